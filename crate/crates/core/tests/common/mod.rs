//! Helpers shared by the integration suites: canonical rendering of trees,
//! independent brute-force checks, and seeded property checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use kepler::frontend::{arith_holds, holds, oracle, Model, OracleResult};
use kepler::grammar::{enumerate_cfg, enumerate_edtl, extract_cfg, extract_edtl};
use kepler::lengths::{extract_chc, solve_dpi, ChcSystem, Solution};
use kepler::normalize::{alphabet_of, normalize, Options, RawFormula};
use kepler::parikh::{cfg_to_net, length_constraint, net_to_presburger, grammar_size};
use kepler::presburger::{self, sat, SatResult};
use kepler::reduce::{build_tree, check_invariants, Budget, ReductionTree, Status};
use kepler::regex_combine::{decide, memberships, Verdict};
use kepler::{
    equation, Alphabet, ArithFormula, Assignment, EquationSystem, IntVar, LinExpr, Regex, Rel, StringTerm, Symbol,
    Var, Vocab, WordEquation,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Renders a system with user variables by name and every other variable
/// numbered by first occurrence.
pub fn canon(es: &EquationSystem, vocab: &Vocab, user: &dyn Fn(&str) -> bool) -> String {
    if es.is_empty() {
        return "ε".into();
    }
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for e in &es.0 {
        let mut side = |t: &StringTerm| {
            let mut s = String::new();
            for sym in &t.0 {
                match sym {
                    Symbol::Letter(c) => s.push(*c),
                    Symbol::Var(v) => {
                        let name = vocab.name(*v);
                        if user(name) {
                            s.push_str(name);
                        } else {
                            let n = ids.len();
                            let k = *ids.entry(name.to_string()).or_insert(n);
                            s.push_str(&format!("#{k}"));
                        }
                    }
                }
            }
            s
        };
        let l = side(&e.lhs);
        let r = side(&e.rhs);
        out.push(format!("{l}={r}"));
    }
    out.join(" & ")
}

pub fn is_xy(s: &str) -> bool {
    s == "x" || s == "y"
}

/// Canonical systems of all non-root nodes, sorted.
pub fn tree_nodes(t: &ReductionTree, v: &Vocab) -> Vec<String> {
    let mut out: Vec<String> = t.nodes.iter().skip(1).map(|n| canon(&n.system, v, &is_xy)).collect();
    out.sort();
    out
}

pub fn expected_nodes(list: &[&str]) -> Vec<String> {
    let mut v = Vocab::new();
    let names: Vec<String> = ["x", "y"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=9).flat_map(|i| [format!("x{i}"), format!("y{i}")]))
        .collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut out: Vec<String> = list
        .iter()
        .map(|s| {
            if *s == "ε" {
                return "ε".to_string();
            }
            let es = EquationSystem(s.split(" & ").map(|e| equation(&mut v, &refs, e)).collect());
            canon(&es, &v, &is_xy)
        })
        .collect();
    out.sort();
    out
}

pub fn build(vars: &[&str], eqs: &[&str]) -> (ReductionTree, Vocab) {
    let mut v = Vocab::new();
    let es = EquationSystem(eqs.iter().map(|e| equation(&mut v, vars, e)).collect());
    let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
    (t, v)
}

/// `y<-fresh:companion` per back-link: the root variable the renaming
/// restores and the companion's canonical system.
pub fn backlink_labels(t: &ReductionTree, v: &Vocab) -> Vec<String> {
    let mut out: Vec<String> = t
        .backlinks
        .iter()
        .map(|b| {
            let target = &b.renaming[0];
            format!(
                "{}<-fresh:{}",
                v.name(target.replacement.vars().next().unwrap()),
                canon(&t.nodes[b.companion].system, v, &is_xy)
            )
        })
        .collect();
    out.sort();
    out
}

pub const XABY_NODES: [&str; 24] = [
    "aby=yba", "x1aby=bayx1", "xab=bax", "abxy1=y1bax", "ab=ba", "bay3=y3ba",
    "aby=bay", "x2aby=aybx2", "ab=ba", "x4ab=abx4", "abx=bax", "bxay5=y5bax",
    "ε", "aby4=y4ba", "by=yb", "x3aby=ybax3", "ε", "x5ab=bax5",
    "xa=ax", "xaby6=y6bax", "ε", "by2=y2b", "ε", "x6a=ax6",
];

pub const XABY_BACKLINKS: [(&str, &str); 6] = [
    ("y", "aby=yba"),
    ("x", "xaby=ybax"),
    ("x", "xab=bax"),
    ("y", "xaby=ybax"),
    ("y", "by=yb"),
    ("x", "xa=ax"),
];

pub fn expected_backlinks(list: &[(&str, &str)]) -> Vec<String> {
    let mut l: Vec<String> =
        list.iter().map(|(n, c)| format!("{n}<-fresh:{}", expected_nodes(&[c])[0])).collect();
    l.sort();
    l
}

/// Every assignment with words up to `bound` letters over {a, b}.
pub fn brute_sat(es: &EquationSystem, bound: usize) -> bool {
    let vars = es.vars();
    let words = Alphabet::from_letters(['a', 'b']).words_up_to(bound);
    let mut idx = vec![0usize; vars.len()];
    loop {
        let a: Assignment = vars.iter().zip(&idx).map(|(v, &i)| (*v, words[i].clone())).collect();
        if es.holds(&a) {
            return true;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return false;
            }
            idx[k] += 1;
            if idx[k] < words.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Random quadratic equation over `x`, `y`, `z` (ids 0..3) with at most
/// `max_n` symbols.
pub fn random_quadratic(rng: &mut StdRng, max_n: usize) -> WordEquation {
    let mut syms: Vec<(bool, Symbol)> = Vec::new();
    for v in 0..3u32 {
        for _ in 0..rng.gen_range(0..=2) {
            syms.push((rng.gen(), Symbol::Var(Var(v))));
        }
    }
    for _ in 0..rng.gen_range(0..6) {
        syms.push((rng.gen(), Symbol::Letter(if rng.gen() { 'a' } else { 'b' })));
    }
    syms.truncate(max_n);
    for i in (1..syms.len()).rev() {
        let j = rng.gen_range(0..=i);
        syms.swap(i, j);
    }
    let (l, r): (Vec<_>, Vec<_>) = syms.into_iter().partition(|(left, _)| *left);
    WordEquation::new(StringTerm(l.into_iter().map(|p| p.1).collect()), StringTerm(r.into_iter().map(|p| p.1).collect()))
}

pub fn xyz_vocab() -> Vocab {
    let mut v = Vocab::new();
    for n in ["x", "y", "z"] {
        v.var(n);
    }
    v
}

/// Tree of a quadratic equation: quadratic nodes, structural invariants
/// including non-growth and cycle length, and a verdict that agrees with
/// brute force.
pub fn check_quadratic(e: &WordEquation) -> Result<ReductionTree, String> {
    let mut v = xyz_vocab();
    let es = EquationSystem(vec![e.clone()]);
    let t = build_tree(&es, &mut v, &Budget::default()).map_err(|err| err.to_string())?;
    for n in &t.nodes {
        if !(n.system.is_quadratic() || n.status == Status::UnsatLeaf) {
            return Err(format!("non-quadratic node {}", n.system.show(&v)));
        }
    }
    check_invariants(&t)?;
    let sat = t.count(Status::SatLeaf) > 0;
    if !sat && brute_sat(&es, 4) {
        return Err(format!("{} has a solution but no satisfiable leaf", e.show(&v)));
    }
    if sat {
        let m = kepler::reduce::search_model(&t, &kepler::reduce::SearchLimits::default(), &mut |_| true);
        if !m.is_some_and(|a| es.holds(&a)) {
            return Err(format!("{}: no model from a satisfiable tree", e.show(&v)));
        }
    }
    Ok(t)
}

/// The widest sentential form reached while enumerating stays within the
/// declared index.
pub fn check_edtl_index(t: &ReductionTree, v: &Vocab, max_len: usize) -> Result<(), String> {
    let g = extract_edtl(t, v);
    let (_, widest) = enumerate_edtl(&g, max_len);
    if widest > g.index {
        return Err(format!("form with {widest} nonterminals exceeds index {}", g.index));
    }
    Ok(())
}

/// Words `ab·x` for solutions `x` of abx=xba, against both grammars.
pub fn check_grammar_language(max_len: usize) -> Result<(), String> {
    let (t, v) = build(&["x"], &["abx=xba"]);
    let want: std::collections::BTreeSet<String> = Alphabet::from_letters(['a', 'b'])
        .words_up_to(max_len.saturating_sub(2))
        .into_iter()
        .filter(|w| format!("ab{w}") == format!("{w}ba"))
        .map(|w| format!("ab{w}"))
        .collect();
    let (edtl, _) = enumerate_edtl(&extract_edtl(&t, &v), max_len);
    if edtl != want {
        return Err(format!("EDT0L words {edtl:?} != {want:?}"));
    }
    let cfg = enumerate_cfg(&extract_cfg(&t, &v, &Alphabet::from_letters(['a', 'b'])), max_len);
    if cfg != want {
        return Err(format!("CFG words {cfg:?} != {want:?}"));
    }
    Ok(())
}

fn with_len(f: &ArithFormula, x: Var, n: i64) -> ArithFormula {
    ArithFormula::and(vec![f.clone(), ArithFormula::eq(LinExpr::len(x), LinExpr::constant(n))])
}

/// Horn-clause lengths and Parikh lengths of abx=xba agree with each
/// other and with brute force for `|x| <= max`.
pub fn check_chc_vs_parikh(max: i64) -> Result<(), String> {
    let (t, v) = build(&["x"], &["abx=xba"]);
    let x = v.lookup("x").unwrap();
    let chc = extract_chc(&t, &ArithFormula::True);
    let sol = solve_dpi(&chc).map_err(|e| e.to_string())?;
    let p0 = kepler::lengths::solved_query(&chc, &sol);
    let g = extract_cfg(&t, &v, &Alphabet::from_letters(['a', 'b']));
    let pk = length_constraint(&g, &[(x, "x".into())]).map_err(|e| e.to_string())?;
    for n in 0..=max {
        let a = sat(&with_len(&p0, x, n)).is_sat();
        let b = sat(&with_len(&pk, x, n)).is_sat();
        let truth = n % 2 == 1;
        if a != b || a != truth {
            return Err(format!("|x|={n}: horn {a}, parikh {b}, expected {truth}"));
        }
    }
    Ok(())
}

/// Every point of `[0, bound]^k`.
fn grid(k: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out.into_iter().flat_map(|p| (0..=bound).map(move |v| [p.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Substituting each solution into its clauses gives implications that
/// hold on the grid `[0, bound]` of body parameters.
pub fn check_inductive(chc: &ChcSystem, sol: &Solution, bound: i64) -> Result<(), String> {
    let cfg = presburger::Config::default();
    for c in &chc.clauses {
        let head = &chc.preds[c.head];
        let inputs: Vec<IntVar> = match c.body {
            Some(b) => chc.preds[b].params.clone(),
            None => head.params.clone(),
        };
        for point in grid(inputs.len(), bound) {
            let m: BTreeMap<IntVar, i64> = inputs.iter().cloned().zip(point.iter().copied()).collect();
            let body_ok = c.body.map_or(true, |b| arith_holds(&sol[&b], &m, &cfg)) && arith_holds(&c.guard, &m, &cfg);
            if !body_ok {
                continue;
            }
            let mut vals = m.clone();
            for (hv, e) in &c.defs {
                if let Some(k) = e.eval(&m) {
                    vals.insert(hv.clone(), k);
                }
            }
            let hm: BTreeMap<IntVar, i64> =
                head.params.iter().filter_map(|p| vals.get(p).map(|k| (p.clone(), *k))).collect();
            if hm.len() != head.params.len() {
                return Err(format!("clause {:?} leaves head parameters undefined", c.origin));
            }
            if !arith_holds(&sol[&c.head], &hm, &cfg) {
                return Err(format!("clause {:?} fails at {point:?}", c.origin));
            }
        }
    }
    Ok(())
}

/// Parikh formula size is linear in the grammar.
pub fn check_parikh_linear(t: &ReductionTree, v: &Vocab, factor: usize) -> Result<(), String> {
    let g = extract_cfg(t, v, &Alphabet::from_letters(['a', 'b']));
    let f = net_to_presburger(&cfg_to_net(&g), "").with_counters();
    let (atoms, size) = (f.atom_count(), grammar_size(&g));
    if atoms > factor * size {
        return Err(format!("{atoms} atoms for grammar size {size}"));
    }
    Ok(())
}

/// Random regex over {a, b}.
pub fn random_regex(rng: &mut StdRng, depth: u32) -> Regex {
    if depth == 0 || rng.gen_ratio(1, 3) {
        return match rng.gen_range(0..6) {
            0 => Regex::Letter('a'),
            1 => Regex::Letter('b'),
            2 => Regex::Epsilon,
            3 => Regex::AnyLetter,
            4 => Regex::Word("ab".into()),
            _ => {
                if rng.gen_ratio(1, 4) {
                    Regex::Empty
                } else {
                    Regex::Letter('a')
                }
            }
        };
    }
    let sub = |rng: &mut StdRng| random_regex(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 | 1 => Regex::Concat(vec![sub(rng), sub(rng)]),
        2 | 3 => Regex::Union(vec![sub(rng), sub(rng)]),
        4 | 5 => Regex::star(sub(rng)),
        6 => Regex::Intersect(vec![sub(rng), sub(rng)]),
        7 => Regex::complement(sub(rng)),
        _ => Regex::Concat(vec![sub(rng), Regex::star(sub(rng))]),
    }
}

/// Direct recursive matcher, relative to Σ = {a, b}.
pub fn matches(r: &Regex, w: &[char]) -> bool {
    match r {
        Regex::Empty => false,
        Regex::Epsilon => w.is_empty(),
        Regex::Letter(c) => w == [*c],
        Regex::Word(s) => w.iter().copied().eq(s.chars()),
        Regex::AnyLetter => w.len() == 1 && matches!(w[0], 'a' | 'b'),
        Regex::Concat(rs) => match rs.split_first() {
            None => w.is_empty(),
            Some((h, rest)) => {
                let tail = Regex::Concat(rest.to_vec());
                (0..=w.len()).any(|i| matches(h, &w[..i]) && matches(&tail, &w[i..]))
            }
        },
        Regex::Union(rs) => rs.iter().any(|s| matches(s, w)),
        Regex::Intersect(rs) => rs.iter().all(|s| matches(s, w)),
        Regex::Complement(s) => !matches(s, w),
        Regex::Star(s) => w.is_empty() || (1..=w.len()).any(|i| matches(s, &w[..i]) && matches(r, &w[i..])),
    }
}

/// The compiled automaton agrees with the recursive matcher on every word
/// of length at most `max_len`.
pub fn check_regex(seed: u64, max_len: usize) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let r = random_regex(&mut rng, 3);
    let al = Alphabet::from_letters(['a', 'b']);
    let d = kepler::automata::regex_to_dfa(&r, &al);
    for w in al.words_up_to(max_len) {
        let cs: Vec<char> = w.chars().collect();
        if d.accepts(&w) != matches(&r, &cs) {
            return Err(format!("{r} on {w:?}"));
        }
    }
    Ok(())
}

/// Widening of abx=xba against `x ∈ R` decides like brute force over
/// `|x| <= 2(m+M)+3`; skipped when the unrolling cap is hit.
pub fn check_widening(seed: u64) -> Result<bool, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let r = random_regex(&mut rng, 2);
    let (t, mut v) = build(&["x"], &["abx=xba"]);
    let x = v.lookup("x").unwrap();
    let al = Alphabet::from_letters(['a', 'b']);
    let ms = memberships(&[(x, r.clone())], &al);
    let Ok(d) = decide(&t, &ms, &mut v, &Default::default()) else { return Ok(false) };
    let bound = 2 * (d.widened.m + d.widened.big_m) + 3;
    // abx=xba is solved exactly by a(ba)^k; brute force confirms the
    // family on short words, then the family is scanned up to the bound
    let family = |w: &str| w.len() % 2 == 1 && w == "a".to_string() + &"ba".repeat(w.len() / 2);
    for w in al.words_up_to(10) {
        if (format!("ab{w}") == format!("{w}ba")) != family(&w) {
            return Err(format!("solution family wrong at {w:?}"));
        }
    }
    let truth = (0..=bound / 2).any(|k| {
        let cs: Vec<char> = format!("a{}", "ba".repeat(k)).chars().collect();
        matches(&r, &cs)
    });
    match &d.verdict {
        Verdict::Sat(a) => {
            let w = a.get(&x).cloned().unwrap_or_default();
            let cs: Vec<char> = w.chars().collect();
            if !(format!("ab{w}") == format!("{w}ba") && matches(&r, &cs)) {
                return Err(format!("{r}: model x={w:?} does not verify"));
            }
            if !truth {
                return Err(format!("{r}: sat but brute force finds nothing"));
            }
        }
        Verdict::Unsat if truth => return Err(format!("{r}: unsat but brute force finds a solution")),
        Verdict::Unsat => {}
        Verdict::Unknown(why) => return Err(format!("{r}: unknown {why}")),
    }
    Ok(true)
}

fn random_term(rng: &mut StdRng, x: Var, y: Var) -> StringTerm {
    let n = rng.gen_range(0..=3);
    StringTerm(
        (0..n)
            .map(|_| match rng.gen_range(0..4) {
                0 => Symbol::Var(x),
                1 => Symbol::Var(y),
                2 => Symbol::Letter('a'),
                _ => Symbol::Letter('b'),
            })
            .collect(),
    )
}

fn random_raw(rng: &mut StdRng, depth: u32, x: Var, y: Var) -> RawFormula {
    if depth == 0 || rng.gen_ratio(2, 5) {
        return match rng.gen_range(0..3) {
            0 => RawFormula::Eq(random_term(rng, x, y), random_term(rng, x, y)),
            1 => RawFormula::Member(random_term(rng, x, y), random_regex(rng, 1)),
            _ => {
                let v = if rng.gen() { x } else { y };
                let rel = [Rel::Eq, Rel::Ge, Rel::Le][rng.gen_range(0..3)];
                RawFormula::Arith(ArithFormula::atom(LinExpr::len(v), rel, LinExpr::constant(rng.gen_range(0..3))))
            }
        };
    }
    match rng.gen_range(0..3) {
        0 => RawFormula::not(random_raw(rng, depth - 1, x, y)),
        1 => RawFormula::And(vec![random_raw(rng, depth - 1, x, y), random_raw(rng, depth - 1, x, y)]),
        _ => RawFormula::Or(vec![random_raw(rng, depth - 1, x, y), random_raw(rng, depth - 1, x, y)]),
    }
}

/// Normalization is equisatisfiable within the bound, and cube solutions
/// restricted to the original variables satisfy the original formula.
pub fn check_normalize(seed: u64, bound: usize) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut v = Vocab::new();
    let (x, y) = (v.var("x"), v.var("y"));
    let f = random_raw(&mut rng, 2, x, y);
    let al = alphabet_of(&f);
    let cfg = presburger::Config::default();
    let words = al.words_up_to(bound);
    let mut raw_sat = false;
    'outer: for wx in &words {
        for wy in &words {
            let m = Model { strings: BTreeMap::from([(x, wx.clone()), (y, wy.clone())]), ints: BTreeMap::new() };
            if holds(&f, &m, &al, &cfg) {
                raw_sat = true;
                break 'outer;
            }
        }
    }
    let cubes = normalize(&f, &al, &mut v, &Options::default()).map_err(|e| e.to_string())?;
    let mut cube_sat = false;
    for nf in &cubes {
        if let OracleResult::Sat(a, _) = oracle(nf, &al, bound) {
            let mut strings = a.clone();
            strings.entry(x).or_default();
            strings.entry(y).or_default();
            strings.retain(|k, _| *k == x || *k == y);
            let m = Model { strings, ints: BTreeMap::new() };
            if !holds(&f, &m, &al, &cfg) {
                return Err(format!("{}: cube solution {:?} fails", f.show(&v), m.strings));
            }
            cube_sat = true;
            break;
        }
    }
    if raw_sat && !cube_sat {
        return Err(format!("{}: lost solutions", f.show(&v)));
    }
    Ok(())
}

fn random_arith(rng: &mut StdRng, vars: &[IntVar], depth: u32) -> ArithFormula {
    if depth == 0 || rng.gen_ratio(1, 3) {
        let mut l = LinExpr::constant(0);
        for v in vars {
            if rng.gen_ratio(2, 3) {
                l.add_term(rng.gen_range(-4..=4), v.clone());
            }
        }
        let rel = [Rel::Eq, Rel::Ge, Rel::Gt, Rel::Le, Rel::Lt][rng.gen_range(0..5)];
        return ArithFormula::atom(l, rel, LinExpr::constant(rng.gen_range(-20..=20)));
    }
    let n = rng.gen_range(2..=3);
    let parts = (0..n).map(|_| random_arith(rng, vars, depth - 1)).collect();
    if rng.gen() {
        ArithFormula::and(parts)
    } else {
        ArithFormula::or(parts)
    }
}

/// Solver answers against exhaustive search of the box `[-b, b]^k`.
pub fn check_presburger(seed: u64, b: i64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = rng.gen_range(1..=3);
    let vars: Vec<IntVar> = ["p", "q", "r"][..k].iter().map(|n| IntVar::int(n)).collect();
    let f = random_arith(&mut rng, &vars, 2);
    let shown = f.show(&Vocab::new());
    let mut point = vec![-b; k];
    let in_box = loop {
        let m: BTreeMap<IntVar, i64> = vars.iter().cloned().zip(point.iter().copied()).collect();
        if f.eval(&m) == Some(true) {
            break true;
        }
        let mut i = 0;
        while i < k {
            point[i] += 1;
            if point[i] <= b {
                break;
            }
            point[i] = -b;
            i += 1;
        }
        if i == k {
            break false;
        }
    };
    match sat(&f) {
        SatResult::Sat(m) => {
            let full: BTreeMap<IntVar, i64> = vars.iter().map(|v| (v.clone(), m.get(v).copied().unwrap_or(0))).collect();
            if f.eval(&full) != Some(true) {
                return Err(format!("{shown}: model {full:?} fails"));
            }
        }
        SatResult::Unsat if in_box => return Err(format!("{shown}: unsat but the box has a solution")),
        SatResult::Unsat => {}
        SatResult::Unknown(r) => return Err(format!("{shown}: unknown {r}")),
    }
    Ok(())
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
