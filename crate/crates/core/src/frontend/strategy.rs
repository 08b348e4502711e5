//! The top-level decision strategy for one normalized cube.

use std::collections::{BTreeMap, BTreeSet};

use super::{arith_holds, Answer, Model, SolveConfig};
use crate::ast::{Alphabet, ArithFormula, Assignment, IntVar, LinExpr, NormalizedFormula, Var, Vocab};
use crate::automata::Dfa;
use crate::grammar::extract_cfg;
use crate::lengths::{extract_chc, flatness, solve_dpi, solved_query, ChcSystem, LengthError};
use crate::parikh::length_constraint;
use crate::presburger::{export_lia, sat_with, SatResult};
use crate::reduce::{build_tree, postpro, search_model, to_dot, ReduceError, ReductionTree, SearchLimits, Status};
use crate::regex_combine::{decide, memberships, Membership, Verdict, WidenError};

/// How the length abstraction of the tree was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Horn clauses solved in closed form.
    Chc,
    /// Parikh image of the extracted grammar.
    Parikh,
}

/// Which artifacts to render while solving.
#[derive(Clone, Debug, Default)]
pub struct DumpRequest {
    pub tree: bool,
    pub cfg: bool,
    pub chc: bool,
    pub lia: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dumps {
    pub tree: Option<String>,
    pub cfg: Option<String>,
    pub chc: Option<String>,
    pub lia: Option<String>,
}

/// Result for one cube, with the intermediate artifacts.
#[derive(Clone, Debug)]
pub struct CubeOutcome {
    pub answer: Answer,
    pub route: Option<Route>,
    /// Closed form of the root predicate over the root lengths, when the
    /// Horn route succeeded.
    pub inferred: Option<ArithFormula>,
    /// Leaf rows from regex combination.
    pub leaf_log: Vec<String>,
    pub dumps: Dumps,
}

impl CubeOutcome {
    fn new() -> Self {
        CubeOutcome { answer: Answer::Unsat, route: None, inferred: None, leaf_log: Vec::new(), dumps: Dumps::default() }
    }

    fn with(mut self, answer: Answer) -> Self {
        self.answer = answer;
        self
    }
}

fn unknown(code: &str, detail: impl std::fmt::Display) -> Answer {
    Answer::Unknown(format!("{code}: {detail}"))
}

/// Lengths of the words accepted by `d` as a formula over `|v|`.
///
/// The sets of states reachable by words of each length form an
/// eventually periodic sequence; accepting lengths are read off the
/// prefix and one period.
pub fn membership_lengths(d: &Dfa, v: Var) -> ArithFormula {
    const LIMIT: usize = 4096;
    let n = d.num_states();
    let mut cur = vec![false; n];
    cur[d.initial] = true;
    let mut seen: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    let mut accepting: Vec<bool> = Vec::new();
    let len = LinExpr::len(v);
    for step in 0..LIMIT {
        if let Some(&first) = seen.get(&cur) {
            let period = (step - first) as i64;
            let mut alts = Vec::new();
            for (k, &acc) in accepting.iter().enumerate() {
                if !acc {
                    continue;
                }
                if k < first {
                    alts.push(ArithFormula::eq(len.clone(), LinExpr::constant(k as i64)));
                } else {
                    let i = IntVar::Int(format!("lenper!{}!{k}", v.0));
                    let rhs = LinExpr::constant(k as i64).plus(&LinExpr::term(period, i.clone()));
                    alts.push(ArithFormula::exists(
                        vec![i.clone()],
                        ArithFormula::and(vec![
                            ArithFormula::ge(LinExpr::var(i), LinExpr::constant(0)),
                            ArithFormula::eq(len.clone(), rhs),
                        ]),
                    ));
                }
            }
            return ArithFormula::or(alts);
        }
        seen.insert(cur.clone(), step);
        accepting.push((0..n).any(|q| cur[q] && d.accepting[q]));
        let mut next = vec![false; n];
        for q in (0..n).filter(|&q| cur[q]) {
            for &r in &d.delta[q] {
                next[r] = true;
            }
        }
        cur = next;
    }
    ArithFormula::ge(len, LinExpr::constant(0))
}

/// Length abstraction of the tree, through Horn clauses when they solve
/// in closed form and through the Parikh image of its grammar otherwise.
/// Both over-approximate the lengths of solutions; the Horn route is exact
/// on flat trees.
fn length_abstraction(
    tree: &ReductionTree,
    vocab: &Vocab,
    alphabet: &Alphabet,
    out: &mut CubeOutcome,
    want: &DumpRequest,
) -> Result<ArithFormula, Answer> {
    let chc = extract_chc(tree, &ArithFormula::True);
    if want.chc {
        out.dumps.chc = Some(chc.dump(vocab));
    }
    let flat = flatness(tree).is_flat();
    let solved = solve_dpi(&chc);
    if want.cfg || solved.is_err() {
        let g = extract_cfg(tree, vocab, alphabet);
        if want.cfg {
            out.dumps.cfg = Some(g.dump());
        }
        if let Err(LengthError::NotDpi(_) | LengthError::UnsupportedShape(_)) = &solved {
            out.route = Some(Route::Parikh);
            let names: BTreeSet<String> = g.nonterminals().into_iter().collect();
            let vars: Vec<(Var, String)> = tree.nodes[tree.root]
                .live
                .iter()
                .filter(|v| names.contains(vocab.name(**v)))
                .map(|v| (*v, vocab.name(*v).to_string()))
                .collect();
            return length_constraint(&g, &vars).map_err(|e| unknown("parikh", e));
        }
    }
    let sol = solved.map_err(|e| unknown("lengths", e))?;
    out.route = Some(Route::Chc);
    let inferred = root_solution(&chc, &sol);
    if let (Some(d), Some(f)) = (out.dumps.chc.as_mut(), &inferred) {
        d.push_str(&format!("; solution {}\n", f.show(vocab)));
        if !flat {
            d.push_str("; tree is not flat\n");
        }
    }
    out.inferred = inferred.clone();
    Ok(inferred.unwrap_or(ArithFormula::True))
}

fn root_solution(chc: &ChcSystem, sol: &crate::lengths::Solution) -> Option<ArithFormula> {
    chc.root?;
    Some(solved_query(chc, sol))
}

/// Verifies a candidate string assignment: equations by concatenation,
/// memberships by automaton runs, arithmetic by substitution. Returns the
/// integer part of the model on success.
fn verify(
    a: &Assignment,
    nf: &NormalizedFormula,
    ms: &[Membership],
    cfg: &SolveConfig,
) -> Option<BTreeMap<IntVar, i64>> {
    if !nf.eqs.holds(a) {
        return None;
    }
    for m in ms {
        if !m.dfa.accepts(a.get(&m.var).map(String::as_str).unwrap_or("")) {
            return None;
        }
    }
    let lens: BTreeMap<IntVar, i64> =
        nf.string_vars().iter().map(|v| (IntVar::Len(*v), a.get(v).map_or(0, |w| w.chars().count()) as i64)).collect();
    let ints: BTreeSet<IntVar> = nf.arith.free_vars().into_iter().filter(|v| matches!(v, IntVar::Int(_))).collect();
    if ints.is_empty() {
        return arith_holds(&nf.arith, &lens, &cfg.presburger).then(BTreeMap::new);
    }
    let fixed: BTreeMap<IntVar, LinExpr> = lens.iter().map(|(k, v)| (k.clone(), LinExpr::constant(*v))).collect();
    match sat_with(&nf.arith.substitute(&fixed), &cfg.presburger) {
        SatResult::Sat(m) => Some(m.into_iter().filter(|(k, _)| ints.contains(k)).collect()),
        _ => None,
    }
}

/// Decides one cube.
pub fn solve_cube(
    nf: &NormalizedFormula,
    alphabet: &Alphabet,
    vocab: &mut Vocab,
    cfg: &SolveConfig,
    want: &DumpRequest,
) -> CubeOutcome {
    let mut out = CubeOutcome::new();
    let vars = nf.string_vars();
    let ms = memberships(&nf.memberships, alphabet);
    if ms.iter().any(|m| m.dfa.is_empty()) {
        return out.with(Answer::Unsat);
    }
    let mut tree = match build_tree(&nf.eqs, vocab, &cfg.budget) {
        Ok(t) => t,
        Err(ReduceError::BudgetExhausted { reason, .. }) => return out.with(unknown("reduce-budget", reason)),
        Err(e) => return out.with(unknown("reduce", e)),
    };
    for v in &vars {
        if !tree.tracked.contains(v) {
            tree.tracked.push(*v);
        }
    }
    tree.compute_live();
    if want.tree {
        out.dumps.tree = Some(to_dot(&tree, vocab));
    }
    if tree.leaves(Status::SatLeaf).is_empty() {
        return out.with(Answer::Unsat);
    }

    let mut membership_pending = false;
    if !ms.is_empty() {
        match decide(&tree, &ms, vocab, &cfg.widen) {
            Err(WidenError::CapExceeded(s)) => {
                out.leaf_log.push(format!("unroll-cap: {s}"));
                membership_pending = true;
            }
            Ok(d) => {
                out.leaf_log = d.reports.iter().map(|r| r.row()).collect();
                match d.verdict {
                    Verdict::Unsat => return out.with(Answer::Unsat),
                    Verdict::Sat(a) if nf.arith.is_true() => {
                        let mut full = a.clone();
                        for v in &vars {
                            full.entry(*v).or_default();
                        }
                        if let Some(ints) = verify(&full, nf, &ms, cfg) {
                            return out.with(Answer::Sat(Model { strings: full, ints }));
                        }
                    }
                    Verdict::Sat(_) => {}
                    Verdict::Unknown(r) => {
                        out.leaf_log.push(format!("leaf-search: {r}"));
                        membership_pending = true;
                    }
                }
            }
        }
    }

    let lengths = if nf.arith.is_true() && ms.is_empty() {
        ArithFormula::True
    } else {
        match length_abstraction(&tree, vocab, alphabet, &mut out, want) {
            Ok(f) => f,
            Err(a) => return out.with(a),
        }
    };
    let mut parts = vec![lengths];
    parts.extend(ms.iter().map(|m| membership_lengths(&m.dfa, m.var)));
    parts.push(nf.arith.clone());
    let phi = ArithFormula::and(parts);
    if want.lia {
        out.dumps.lia = Some(export_lia(&phi, vocab));
    }
    if cfg.backend == super::Backend::ExportOnly {
        return out.with(unknown("export-only", "arithmetic left to an external solver"));
    }
    let witness = match sat_with(&phi, &cfg.presburger) {
        SatResult::Unsat => return out.with(Answer::Unsat),
        SatResult::Unknown(r) => return out.with(unknown("presburger", r)),
        SatResult::Sat(m) => m,
    };

    let post = postpro(&tree, vocab, alphabet, &vars);
    let target: usize = vars.iter().map(|v| witness.get(&IntVar::Len(*v)).copied().unwrap_or(0).max(0) as usize).sum();
    let limits = SearchLimits { max_letters: cfg.search.max_letters.max(target), max_visits: cfg.search.max_visits };
    let mut ints = BTreeMap::new();
    let found = search_model(&post, &limits, &mut |a: &Assignment| match verify(a, nf, &ms, cfg) {
        Some(m) => {
            ints = m;
            true
        }
        None => false,
    });
    match found {
        Some(mut a) => {
            for v in &vars {
                a.entry(*v).or_default();
            }
            out.with(Answer::Sat(Model { strings: a, ints }))
        }
        None if membership_pending => {
            let reason = out.leaf_log.last().cloned().unwrap_or_default();
            out.with(unknown("model-search", format!("no verified model; {reason}")))
        }
        None => out.with(unknown("model-search", format!("no verified model within {} letters", limits.max_letters))),
    }
}
