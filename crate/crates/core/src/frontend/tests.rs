use super::*;
use crate::ast::{equation, EquationSystem, Rel};
use crate::normalize::normalize;

pub(crate) const MOTIVATING: &str = r#"
(set-logic QF_SLIA)
(declare-fun x () String)
(declare-fun y () String)
(assert (= (str.++ "ab" x) (str.++ x "ba")))
(assert (= (str.++ "a" y) (str.++ y "a")))
(assert (exists ((k Int)) (= (str.len x) (+ (* 4 k) 3))))
(assert (= (str.len x) (* 2 (str.len y))))
(check-sat)
"#;

fn run(src: &str) -> (Script, Outcome) {
    let s = parse(src).unwrap();
    let o = solve_script(&s, &SolveConfig::default()).unwrap();
    (s, o)
}

fn one_eq(vars: &[&str], lhs: &str, rhs: &str) -> String {
    let mut out = String::from("(set-logic QF_S)\n");
    for v in vars {
        out.push_str(&format!("(declare-fun {v} () String)\n"));
    }
    out.push_str(&format!("(assert (= {lhs} {rhs}))\n(check-sat)\n"));
    out
}

#[test]
fn motivating_script_normal_form() {
    let s = parse(MOTIVATING).unwrap();
    let mut v = s.vocab.clone();
    let n = normalize(&s.formula, &alphabet_of(&s.formula), &mut v, &Options::default()).unwrap();
    assert_eq!(n.len(), 1);
    let mut w = Vocab::new();
    let e1 = equation(&mut w, &["x", "y"], "abx=xba");
    let e2 = equation(&mut w, &["x", "y"], "ay=ya");
    assert_eq!(n[0].eqs, EquationSystem(vec![e1, e2]));
    let (x, y) = (v.lookup("x").unwrap(), v.lookup("y").unwrap());
    let k = IntVar::int("k");
    let expect = ArithFormula::and(vec![
        ArithFormula::exists(vec![k.clone()], ArithFormula::eq(LinExpr::len(x), LinExpr::term(4, k).offset(3))),
        ArithFormula::eq(LinExpr::len(x), LinExpr::len(y).scaled(2)),
    ]);
    assert_eq!(n[0].arith, expect);
}

#[test]
fn motivating_script_is_unsat() {
    let (_, o) = run(MOTIVATING);
    assert_eq!(o.answer, Answer::Unsat);
    assert_eq!(o.cubes[0].route, Some(Route::Chc));
    assert!(o.cubes[0].inferred.is_some());
}

#[test]
fn trivial_equation_is_sat() {
    let (s, o) = run("(declare-fun x () String)\n(assert (= x x))\n(check-sat)");
    let Answer::Sat(m) = o.answer else { panic!("{:?}", o.answer) };
    assert_eq!(m.strings[&s.strings[0]], "");
}

#[test]
fn replace_is_unsupported() {
    let src = "(declare-fun x () String)\n(assert (= (str.replace x \"a\" \"b\") x))";
    match parse(src) {
        Err(FrontendError::Unsupported { line, col, construct }) => {
            assert_eq!((line, col), (2, 12));
            assert_eq!(construct, "str.replace");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn parse_errors_carry_positions() {
    match parse("(declare-fun x () String)\n(assert (= x z))") {
        Err(FrontendError::Parse { line: 2, col: 14, msg }) => assert!(msg.contains("undeclared")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("(assert (= x"), Err(FrontendError::Parse { .. })));
    assert!(matches!(parse("(push 1)"), Err(FrontendError::Unsupported { .. })));
}

#[test]
fn comparisons_and_regexes() {
    let src = r#"
        (declare-fun x () String)
        (declare-const n Int)
        (assert (str.in.re x (re.+ (re.union (str.to_re "ab") (re.range "c" "c")))))
        (assert (< 2 (str.len x) n 5))
        (check-sat) (get-model)"#;
    let s = parse(src).unwrap();
    assert!(s.check_sat && s.get_model);
    let RawFormula::And(parts) = &s.formula else { panic!() };
    let RawFormula::And(cmp) = &parts[1] else { panic!() };
    assert!(matches!(&cmp[0], RawFormula::Arith(ArithFormula::Atom(_, Rel::Gt, _))));
    let o = solve_script(&s, &SolveConfig::default()).unwrap();
    let Answer::Sat(m) = &o.answer else { panic!("{:?}", o.answer) };
    let w = &m.strings[&s.strings[0]];
    assert!(w.len() == 3);
    assert_eq!(m.ints[&IntVar::int("n")], 4);
    let text = format_model(&s, m, &s.vocab);
    assert!(text.contains("(define-fun n () Int 4)"));
}

#[test]
fn quadratic_examples() {
    let (s, o) = run(&one_eq(&["x", "y"], r#"(str.++ x "ab" y)"#, r#"(str.++ y "ba" x)"#));
    let Answer::Sat(m) = &o.answer else { panic!("{:?}", o.answer) };
    let (x, y) = (&m.strings[&s.strings[0]], &m.strings[&s.strings[1]]);
    assert_eq!(format!("{x}ab{y}"), format!("{y}ba{x}"));
    let (_, o) = run(&one_eq(&["x", "y"], r#"(str.++ x "aa" y)"#, r#"(str.++ y "ba" x)"#));
    assert_eq!(o.answer, Answer::Unsat);
    let (_, o) = run(&one_eq(&["x"], r#"(str.++ x "aa")"#, r#"(str.++ "ba" x)"#));
    assert_eq!(o.answer, Answer::Unsat);
}

#[test]
fn distinct_and_disjunction() {
    let src = r#"
        (declare-fun x () String)
        (assert (= (str.++ "ab" x) (str.++ x "ba")))
        (assert (distinct x "a"))
        (assert (or (= (str.len x) 3) (= (str.len x) 4)))"#;
    let (s, o) = run(src);
    let Answer::Sat(m) = &o.answer else { panic!("{:?}", o.answer) };
    assert_eq!(m.strings[&s.strings[0]], "aba");
}

#[test]
fn membership_with_lengths() {
    let src = r#"
        (declare-fun x () String)
        (assert (= (str.++ "ab" x) (str.++ x "ba")))
        (assert (str.in_re x (re.* (str.to_re "ab"))))
        (assert (>= (str.len x) 1))"#;
    let (_, o) = run(src);
    // ab-words have even length, solutions have odd length
    assert_eq!(o.answer, Answer::Unsat);
}

#[test]
fn membership_lengths_are_periodic() {
    let al = crate::ast::Alphabet::from_letters(['a', 'b']);
    let r = crate::ast::Regex::Concat(vec![
        crate::ast::Regex::Word("ab".into()),
        crate::ast::Regex::star(crate::ast::Regex::Word("aba".into())),
    ]);
    let d = regex_to_dfa(&r, &al);
    let f = membership_lengths(&d, crate::ast::Var(0));
    for n in 0..20i64 {
        let m = BTreeMap::from([(IntVar::Len(crate::ast::Var(0)), n)]);
        let want = n >= 2 && (n - 2) % 3 == 0;
        assert_eq!(arith_holds(&f, &m, &presburger::Config::default()), want, "length {n}");
    }
}

#[test]
fn export_only_stops_before_arithmetic() {
    let s = parse(MOTIVATING).unwrap();
    let mut cfg = SolveConfig::default();
    cfg.backend = Backend::ExportOnly;
    cfg.dumps.lia = true;
    let o = solve_script(&s, &cfg).unwrap();
    let Answer::Unknown(r) = &o.answer else { panic!() };
    assert!(r.starts_with("export-only"));
    assert!(o.dump(|d| d.lia.as_ref(), ";").unwrap().contains("(check-sat)"));
}

#[test]
fn budget_exhaustion_is_unknown() {
    let s = parse(&one_eq(&["x", "y"], r#"(str.++ x "ab" y)"#, r#"(str.++ y "ba" x)"#)).unwrap();
    let mut cfg = SolveConfig::default();
    cfg.budget.max_nodes = 3;
    let o = solve_script(&s, &cfg).unwrap();
    let Answer::Unknown(r) = &o.answer else { panic!("{:?}", o.answer) };
    assert!(r.starts_with("reduce-budget"), "{r}");
}

#[test]
fn oracle_examples() {
    let check = |src: &str, n: usize| {
        let s = parse(src).unwrap();
        oracle_script(&s, n, &Options::default()).unwrap()
    };
    let r = check(&one_eq(&["x"], r#"(str.++ "ab" x)"#, r#"(str.++ x "ba")"#), 5);
    let OracleResult::Sat(a, _) = r else { panic!() };
    assert_eq!(a.values().next().unwrap(), "a");
    let r = check(&one_eq(&["x"], r#"(str.++ x "aa")"#, r#"(str.++ "ba" x)"#), 6);
    assert_eq!(r, OracleResult::UnsatWithinBound);
    assert!(matches!(check("(assert (= \"\" \"\"))", 0), OracleResult::Sat(..)));
}

#[test]
fn bench_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gen_bench(dir.path(), 1, 0).unwrap().is_empty());
    let files = gen_bench(dir.path(), 1, 4).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["quad-001-1-sat.smt2", "quad-002-1-unsat.smt2", "quad-003-1-sat.smt2", "quad-004-1-unsat.smt2"]);
    let text = std::fs::read_to_string(&files[2]).unwrap();
    assert!(text.contains(r#"(assert (= (str.++ x1 "a" "b") (str.++ "b" "a" x1)))"#), "{text}");
    let two = gen_bench(dir.path(), 2, 2).unwrap();
    let text = std::fs::read_to_string(&two[1]).unwrap();
    assert!(text.contains("x2") && text.contains(r#"(str.++ x1 "a" "a""#), "{text}");
    let again = tempfile::tempdir().unwrap();
    let copy = gen_bench(again.path(), 2, 2).unwrap();
    assert_eq!(std::fs::read(&two[1]).unwrap(), std::fs::read(&copy[1]).unwrap());
}
