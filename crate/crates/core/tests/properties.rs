mod common;

use common::*;
use kepler::lengths::{extract_chc, solve_dpi};
use kepler::ArithFormula;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn automata_match_recursive_matcher(seed in any::<u64>()) {
        check_regex(seed, 6).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn presburger_agrees_with_box_search(seed in any::<u64>()) {
        check_presburger(seed, 32).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn normalize_is_equisatisfiable(seed in any::<u64>()) {
        check_normalize(seed, 3).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn widening_matches_brute_force(seed in any::<u64>()) {
        check_widening(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn parikh_size_is_linear(seed in any::<u64>()) {
        let e = random_quadratic(&mut rng(seed), 10);
        let mut v = xyz_vocab();
        let t = kepler::reduce::build_tree(&kepler::EquationSystem(vec![e]), &mut v, &Default::default()).unwrap();
        check_parikh_linear(&t, &v, 12).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn grammar_language_up_to_nine() {
    check_grammar_language(9).unwrap();
}

#[test]
fn horn_and_parikh_lengths_agree() {
    check_chc_vs_parikh(20).unwrap();
}

#[test]
fn solutions_are_inductive() {
    for (vars, eqs) in [
        (&["x"][..], &["abx=xba"][..]),
        (&["x", "y"][..], &["abx=xba", "ay=ya"][..]),
        (&["x"][..], &["xab=bax"][..]),
        (&["x", "y"][..], &["xaby=ybax"][..]),
    ] {
        let (t, _) = build(vars, eqs);
        let chc = extract_chc(&t, &ArithFormula::True);
        let Ok(sol) = solve_dpi(&chc) else { continue };
        check_inductive(&chc, &sol, 12).unwrap();
    }
}

#[test]
fn index_bound_on_single_cycle_trees() {
    for (vars, eqs) in [(&["x"][..], &["abx=xba"][..]), (&["x", "y"][..], &["abx=xba", "ay=ya"][..])] {
        let (t, v) = build(vars, eqs);
        check_edtl_index(&t, &v, 9).unwrap();
        check_parikh_linear(&t, &v, 12).unwrap();
    }
}

/// For xaby=ybax the cycle through `[y x_1/x]` keeps `y`, so each turn
/// adds a nonterminal occurrence: the widest useful form grows with the
/// word length and passes the node-length bound of 8.
#[test]
fn index_grows_on_xaby_ybax() {
    let (t, v) = build(&["x", "y"], &["xaby=ybax"]);
    let g = kepler::grammar::extract_edtl(&t, &v);
    let w5 = kepler::grammar::enumerate_edtl(&g, 5).1;
    let w7 = kepler::grammar::enumerate_edtl(&g, 7).1;
    assert!(w5 < w7, "{w5} {w7}");
    check_parikh_linear(&t, &v, 12).unwrap();
}
