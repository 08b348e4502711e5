//! One line per acceptance criterion, then a single assertion over all of
//! them. Run with `cargo test -p kepler --test acceptance -- --nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::*;
use kepler::frontend::{arith_holds, gen_bench, oracle_script, parse, solve_script, Answer, OracleResult, Route};
use kepler::grammar::{enumerate_cfg, Cfg};
use kepler::parikh::length_constraint;
use kepler::presburger::{self, sat};
use kepler::reduce::{build_tree, check_invariants, Status};
use kepler::regex_combine::{decide, memberships, Verdict, WidenConfig};
use kepler::{Alphabet, ArithFormula, EquationSystem, IntVar, LinExpr, Regex, Vocab};

const MOTIVATING_LIMIT: Duration = Duration::from_secs(1);
const BENCH_LIMIT: Duration = Duration::from_secs(60);
/// Grid for comparing the inferred length constraint, `|x|,|y| <= 64`.
const GRID: i64 = 64;
const QUADRATIC_CASES: u64 = 500;
const QUADRATIC_MAX_N: usize = 12;
const PRESBURGER_SEEDS: u64 = 200;
const PRESBURGER_BOX: i64 = 32;
const ORACLE_LEN: usize = 6;

const MOTIVATING: &str = r#"
(set-logic QF_SLIA)
(declare-fun x () String)
(declare-fun y () String)
(assert (= (str.++ "ab" x) (str.++ x "ba")))
(assert (= (str.++ "a" y) (str.++ y "a")))
(assert (exists ((k Int)) (= (str.len x) (+ (* 4 k) 3))))
(assert (= (str.len x) (* 2 (str.len y))))
(check-sat)
"#;

const ODD_GRAMMAR: &str = "S1 -> a b x\nx -> a x1\nx1 -> b x2\nx2 -> x\nx -> x3\nx3 -> a x1\nx1 -> <eps>\n";

type Check = Result<String, String>;

fn criterion_1() -> Check {
    let script = parse(MOTIVATING).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = solve_script(&script, &Default::default()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    if out.answer != Answer::Unsat {
        return Err(format!("answer {:?}", out.answer));
    }
    if took >= MOTIVATING_LIMIT {
        return Err(format!("took {took:?}"));
    }
    let cube = &out.cubes[0];
    if cube.route != Some(Route::Chc) {
        return Err(format!("route {:?}", cube.route));
    }
    let inferred = cube.inferred.clone().ok_or("no inferred constraint")?;
    let (x, y) = (script.vocab.lookup("x").unwrap(), script.vocab.lookup("y").unwrap());
    let cfg = presburger::Config::default();
    for a in 0..=GRID {
        for b in 0..=GRID {
            let m = BTreeMap::from([(IntVar::Len(x), a), (IntVar::Len(y), b)]);
            let want = a % 2 == 1;
            if arith_holds(&inferred, &m, &cfg) != want {
                return Err(format!("disagrees with |x| odd at |x|={a}, |y|={b}"));
            }
        }
    }
    // no even length hides beyond the grid
    let j = IntVar::int("acc!j");
    let even = ArithFormula::and(vec![inferred.clone(), ArithFormula::eq(LinExpr::len(x), LinExpr::term(2, j))]);
    if !sat(&even).is_unsat() {
        return Err("inferred constraint admits an even |x|".into());
    }
    Ok(format!("unsat in {took:?}, inferred equivalent to |x| odd on [0,{GRID}]^2"))
}

fn criterion_2() -> Check {
    let renamings = |t: &kepler::reduce::ReductionTree, v: &Vocab| -> Vec<String> {
        let mut out: Vec<String> = t.backlinks.iter().map(|b| kepler::show_substs(&b.renaming, v)).collect();
        out.sort();
        out
    };
    let (t, v) = build(&["x"], &["abx=xba"]);
    let labels = renamings(&t, &v);
    if t.nodes.len() != 5 || labels != ["[x/x_2]"] {
        return Err(format!("abx=xba: {} nodes, back-links {labels:?}", t.nodes.len()));
    }
    let (t, v) = build(&["x", "y"], &["abx=xba", "ay=ya"]);
    let labels = renamings(&t, &v);
    if labels != ["[x/x_2]", "[y/y_1]"] {
        return Err(format!("abx=xba ∧ ay=ya: back-links {labels:?}"));
    }
    let (t, v) = build(&["x", "y"], &["xaby=ybax"]);
    if t.nodes.len() - 1 != 24 || t.backlinks.len() != 6 {
        return Err(format!("xaby=ybax: {} nodes, {} back-links", t.nodes.len() - 1, t.backlinks.len()));
    }
    if tree_nodes(&t, &v) != expected_nodes(&XABY_NODES) {
        return Err("xaby=ybax node multiset differs".into());
    }
    if backlink_labels(&t, &v) != expected_backlinks(&XABY_BACKLINKS) {
        return Err("xaby=ybax back-links differ".into());
    }
    Ok("all three trees match under canonical renaming".into())
}

fn criterion_3() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = gen_bench(&dir.path().join("p1"), 1, 30).map_err(|e| e.to_string())?;
    files.extend(gen_bench(&dir.path().join("p2"), 2, 30).map_err(|e| e.to_string())?);
    let (mut solve_time, mut n_sat, mut n_unsat) = (Duration::ZERO, 0, 0);
    let (mut xaay, mut xaa) = (false, false);
    for f in &files {
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        let src = std::fs::read_to_string(f).map_err(|e| e.to_string())?;
        let script = parse(&src).map_err(|e| format!("{name}: {e}"))?;
        let want_sat = name.ends_with("-sat.smt2");
        let start = Instant::now();
        let out = solve_script(&script, &Default::default()).map_err(|e| format!("{name}: {e}"))?;
        solve_time += start.elapsed();
        let ok = match &out.answer {
            Answer::Sat(_) => want_sat,
            Answer::Unsat => !want_sat,
            Answer::Unknown(_) => false,
        };
        if !ok {
            return Err(format!("{name}: got {}", out.answer.label()));
        }
        let oracle = oracle_script(&script, ORACLE_LEN, &Default::default()).map_err(|e| e.to_string())?;
        match (&oracle, want_sat) {
            (OracleResult::Sat(..), true) => n_sat += 1,
            (OracleResult::UnsatWithinBound, false) => n_unsat += 1,
            _ => return Err(format!("{name}: oracle disagrees")),
        }
        xaay |= src.contains(r#""a" "a" y"#);
        xaa |= src.contains(r#""a" "a")"#);
    }
    if (n_sat, n_unsat) != (30, 30) {
        return Err(format!("{n_sat} sat / {n_unsat} unsat"));
    }
    if !(xaay && xaa) {
        return Err("xaay=ybax or xaa=bax shape missing".into());
    }
    if solve_time >= BENCH_LIMIT {
        return Err(format!("took {solve_time:?}"));
    }
    Ok(format!("60/60 decided, oracle agrees up to length {ORACLE_LEN}, solving took {solve_time:?}"))
}

fn criterion_4() -> Check {
    let g = Cfg::parse(ODD_GRAMMAR).map_err(|e| e.to_string())?;
    let mut v = Vocab::new();
    let x = v.var("x");
    let f = length_constraint(&g, &[(x, "x".into())]).map_err(|e| e.to_string())?;
    let by_formula: BTreeSet<usize> = (0..=10)
        .filter(|&k| sat(&ArithFormula::and(vec![f.clone(), ArithFormula::eq(LinExpr::len(x), LinExpr::constant(k))])).is_sat())
        .map(|k| k as usize)
        .collect();
    let at_x = g.restart("x").map_err(|e| e.to_string())?;
    let by_words: BTreeSet<usize> = enumerate_cfg(&at_x, 10).iter().map(|w| w.len()).collect();
    let want: BTreeSet<usize> = [1, 3, 5, 7, 9].into();
    if by_formula != want || by_words != want {
        return Err(format!("formula {by_formula:?}, enumeration {by_words:?}"));
    }
    Ok("|x| in {1,3,5,7,9} for k <= 10, by formula and by enumeration".into())
}

fn criterion_5() -> Check {
    let (t, mut v) = build(&["x"], &["abx=xba"]);
    let x = v.lookup("x").unwrap();
    let al = Alphabet::from_letters(['a', 'b']);
    let ms = memberships(&[(x, Regex::star(Regex::Letter('a')))], &al);
    let d = decide(&t, &ms, &mut v, &WidenConfig::default()).map_err(|e| e.to_string())?;
    if (d.widened.m, d.widened.big_m) != (1, 1) {
        return Err(format!("m={}, M={}", d.widened.m, d.widened.big_m));
    }
    let labels: Vec<&str> = d.reports.iter().map(|r| r.verdict.label()).collect();
    if labels != ["SAT", "UNSAT", "UNSAT"] {
        return Err(format!("rows {labels:?}"));
    }
    if !d.reports[0].row().ends_with("x=ax_1 ∧ x_1=ε ∧ x∈a* → SAT") {
        return Err(format!("first row {}", d.reports[0].row()));
    }
    match &d.verdict {
        Verdict::Sat(m) if m[&x] == "a" => {}
        other => return Err(format!("verdict {other:?}")),
    }
    let script = parse("(declare-fun x () String)\n(assert (= (str.++ \"ab\" x) (str.++ x \"ba\")))\n(assert (str.in_re x (re.* (str.to_re \"a\"))))")
        .map_err(|e| e.to_string())?;
    let out = solve_script(&script, &Default::default()).map_err(|e| e.to_string())?;
    match &out.answer {
        Answer::Sat(m) if m.strings[&script.strings[0]] == "a" => {}
        other => return Err(format!("script answer {other:?}")),
    }
    Ok("m=1, M=1, rows SAT/UNSAT/UNSAT, one surviving leaf, model x=a".into())
}

fn criterion_6() -> Check {
    let mut failures = Vec::new();
    let mut rng = rng(0x0acc_e97);
    let mut trees = Vec::new();
    for _ in 0..QUADRATIC_CASES {
        let e = random_quadratic(&mut rng, QUADRATIC_MAX_N);
        match check_quadratic(&e) {
            Ok(t) => trees.push(t),
            Err(msg) => {
                failures.push(format!("quadratic: {msg}"));
                break;
            }
        }
    }
    let goldens = [
        (&["x"][..], &["abx=xba"][..]),
        (&["x", "y"][..], &["abx=xba", "ay=ya"][..]),
        (&["x", "y"][..], &["xaby=ybax"][..]),
    ];
    for (vars, eqs) in goldens {
        let (t, v) = build(vars, eqs);
        if let Err(msg) = check_invariants(&t) {
            failures.push(format!("structure of {eqs:?}: {msg}"));
        }
        if let Err(msg) = check_edtl_index(&t, &v, 9) {
            failures.push(format!("index bound on {}: {msg}", eqs.join(" & ")));
        }
    }
    let mut v = xyz_vocab();
    for e in [random_quadratic(&mut rng, QUADRATIC_MAX_N), random_quadratic(&mut rng, QUADRATIC_MAX_N)] {
        if let Ok(t) = build_tree(&EquationSystem(vec![e]), &mut v, &Default::default()) {
            if t.count(Status::SatLeaf) > 0 {
                trees.push(t);
            }
        }
    }
    for t in &trees {
        if let Err(msg) = check_invariants(t) {
            failures.push(format!("structure: {msg}"));
            break;
        }
    }
    if let Err(msg) = check_grammar_language(9) {
        failures.push(format!("language: {msg}"));
    }
    if let Err(msg) = check_chc_vs_parikh(20) {
        failures.push(format!("lengths: {msg}"));
    }
    for seed in 0..PRESBURGER_SEEDS {
        if let Err(msg) = check_presburger(seed, PRESBURGER_BOX) {
            failures.push(format!("presburger seed {seed}: {msg}"));
            break;
        }
    }
    if failures.is_empty() {
        Ok(format!("{} trees, all suites pass", trees.len()))
    } else {
        Err(failures.join("; "))
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 6] = [
        ("motivating example", criterion_1),
        ("tree goldens", criterion_2),
        ("benchmark family", criterion_3),
        ("Parikh image of a grammar", criterion_4),
        ("regex combination", criterion_5),
        ("property suites", criterion_6),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
