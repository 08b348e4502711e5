//! Bounded brute-force satisfiability, used as ground truth in tests.

use std::collections::BTreeMap;

use super::arith_holds;
use crate::ast::{Alphabet, Assignment, IntVar, NormalizedFormula, StringTerm, Symbol, Var};
use crate::automata::{regex_to_dfa, Dfa};
use crate::presburger::{self, sat, SatResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResult {
    Sat(Assignment, BTreeMap<IntVar, i64>),
    UnsatWithinBound,
}

/// Tries every assignment with words of length at most `max_len`.
///
/// Variables are assigned in order of first occurrence; after each one,
/// the ground prefix and suffix of both sides of every equation must
/// agree, and memberships on the variable are checked at once.
pub fn oracle(f: &NormalizedFormula, alphabet: &Alphabet, max_len: usize) -> OracleResult {
    let vars = order(f);
    let words = alphabet.words_up_to(max_len);
    let dfas: Vec<(Var, Dfa)> = f.memberships.iter().map(|(v, r)| (*v, regex_to_dfa(r, alphabet))).collect();
    let mut a = Assignment::new();
    let mut s = Search { f, vars: &vars, words: &words, dfas: &dfas, found: None };
    s.go(0, &mut a);
    match s.found {
        Some((a, ints)) => OracleResult::Sat(a, ints),
        None => OracleResult::UnsatWithinBound,
    }
}

fn order(f: &NormalizedFormula) -> Vec<Var> {
    let mut out: Vec<Var> = Vec::new();
    for e in &f.eqs.0 {
        let n = e.lhs.len().max(e.rhs.len());
        for i in 0..n {
            for t in [&e.lhs, &e.rhs] {
                if let Some(Symbol::Var(v)) = t.0.get(i) {
                    if !out.contains(v) {
                        out.push(*v);
                    }
                }
            }
        }
    }
    for v in f.string_vars() {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

struct Search<'a> {
    f: &'a NormalizedFormula,
    vars: &'a [Var],
    words: &'a [String],
    dfas: &'a [(Var, Dfa)],
    found: Option<(Assignment, BTreeMap<IntVar, i64>)>,
}

/// Letters of `t` read from one end until the first unassigned variable.
fn known(t: &StringTerm, a: &Assignment, rev: bool) -> String {
    let mut out = String::new();
    let syms: Box<dyn Iterator<Item = &Symbol>> = if rev { Box::new(t.0.iter().rev()) } else { Box::new(t.0.iter()) };
    for s in syms {
        match s {
            Symbol::Letter(c) => out.push(*c),
            Symbol::Var(v) => match a.get(v) {
                Some(w) if rev => out.extend(w.chars().rev()),
                Some(w) => out.push_str(w),
                None => break,
            },
        }
    }
    out
}

fn compatible(l: &str, r: &str) -> bool {
    l.chars().zip(r.chars()).all(|(x, y)| x == y)
}

impl Search<'_> {
    fn consistent(&self, a: &Assignment) -> bool {
        self.f.eqs.0.iter().all(|e| {
            compatible(&known(&e.lhs, a, false), &known(&e.rhs, a, false))
                && compatible(&known(&e.lhs, a, true), &known(&e.rhs, a, true))
        })
    }

    fn go(&mut self, i: usize, a: &mut Assignment) -> bool {
        if i == self.vars.len() {
            if !self.f.eqs.holds(a) {
                return false;
            }
            return match self.arith(a) {
                Some(ints) => {
                    self.found = Some((a.clone(), ints));
                    true
                }
                None => false,
            };
        }
        let v = self.vars[i];
        for w in self.words {
            if self.dfas.iter().any(|(x, d)| *x == v && !d.accepts(w)) {
                continue;
            }
            a.insert(v, w.clone());
            if self.consistent(a) && self.go(i + 1, a) {
                return true;
            }
        }
        a.remove(&v);
        false
    }

    /// Integer witness for the arithmetic part with lengths fixed.
    fn arith(&self, a: &Assignment) -> Option<BTreeMap<IntVar, i64>> {
        let lens: BTreeMap<IntVar, i64> =
            self.vars.iter().map(|v| (IntVar::Len(*v), a[v].chars().count() as i64)).collect();
        let has_ints = self.f.arith.free_vars().iter().any(|v| matches!(v, IntVar::Int(_)));
        if !has_ints {
            return arith_holds(&self.f.arith, &lens, &presburger::Config::default()).then(BTreeMap::new);
        }
        let fixed = lens.iter().map(|(k, v)| (k.clone(), crate::ast::LinExpr::constant(*v))).collect();
        match sat(&self.f.arith.substitute(&fixed)) {
            SatResult::Sat(m) => Some(m.into_iter().filter(|(k, _)| matches!(k, IntVar::Int(_))).collect()),
            _ => None,
        }
    }
}
