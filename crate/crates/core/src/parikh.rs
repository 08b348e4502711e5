//! Parikh images of context-free grammars as existential Presburger
//! formulas, through the communication-free Petri net of the grammar.
//!
//! Variables: `x_c` counts letter `c`, `y_k` counts uses of production `k`
//! (1-based, in grammar order), `z_s` is the distance of symbol `s` from
//! the start in a spanning tree of the used productions.

use std::collections::BTreeMap;

use crate::ast::{ArithFormula, IntVar, LinExpr, Var};
use crate::grammar::{Cfg, GSym, GrammarError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriNet {
    /// Nonterminals first, then letters.
    pub places: Vec<GSym>,
    /// Consumed place of each transition, with weight one.
    pub input: Vec<usize>,
    /// Produced tokens of each transition, by place.
    pub output: Vec<BTreeMap<usize, u32>>,
    pub marking: Vec<u32>,
}

impl PetriNet {
    pub fn place(&self, s: &GSym) -> Option<usize> {
        self.places.iter().position(|p| p == s)
    }

    /// `W(s, t)` for the transition `t`.
    pub fn weight_in(&self, s: usize, t: usize) -> u32 {
        u32::from(self.input[t] == s)
    }

    /// `W(t, s)` for the transition `t`.
    pub fn weight_out(&self, t: usize, s: usize) -> u32 {
        self.output[t].get(&s).copied().unwrap_or(0)
    }

    /// Each transition consumes one token from a single place.
    pub fn is_communication_free(&self) -> bool {
        (0..self.input.len()).all(|t| (0..self.places.len()).map(|s| self.weight_in(s, t)).sum::<u32>() == 1)
    }
}

pub fn cfg_to_net(g: &Cfg) -> PetriNet {
    let mut places: Vec<GSym> = g.nonterminals().into_iter().map(GSym::N).collect();
    places.extend(g.alphabet.iter().map(|&c| GSym::T(c)));
    for (_, r) in &g.productions {
        for s in r {
            if !places.contains(s) {
                places.push(s.clone());
            }
        }
    }
    let idx = |s: &GSym| places.iter().position(|p| p == s).expect("place");
    let mut input = Vec::new();
    let mut output = Vec::new();
    for (l, r) in &g.productions {
        input.push(idx(&GSym::N(l.clone())));
        let mut out: BTreeMap<usize, u32> = BTreeMap::new();
        for s in r {
            *out.entry(idx(s)).or_insert(0) += 1;
        }
        output.push(out);
    }
    let start = idx(&GSym::N(g.start.clone()));
    let marking = (0..places.len()).map(|i| u32::from(i == start)).collect();
    PetriNet { places, input, output, marking }
}

/// The formula families, kept apart for inspection.
#[derive(Clone, Debug)]
pub struct ParikhFormula {
    pub counters: BTreeMap<char, IntVar>,
    pub rules: Vec<IntVar>,
    pub dist: Vec<IntVar>,
    /// Non-negativity of every variable.
    pub domain: Vec<ArithFormula>,
    /// Token balance per nonterminal place, as `(place, balance)` with the
    /// constraint `balance = 0`.
    pub flow: Vec<(GSym, LinExpr)>,
    /// `x_c = Σ W(p,c)·y_p ∧ (x_c = 0 ∨ z_c > 0)` per letter.
    pub letters: Vec<(char, ArithFormula)>,
    /// Spanning-tree distance constraint per place.
    pub reach: Vec<(GSym, ArithFormula)>,
    /// A nonterminal other than the start is expanded only if reached.
    pub used: Vec<ArithFormula>,
}

fn place_name(s: &GSym) -> String {
    match s {
        GSym::T(c) => c.to_string(),
        GSym::N(n) => n.clone(),
    }
}

fn lin(v: &IntVar) -> LinExpr {
    LinExpr::var(v.clone())
}

pub fn net_to_presburger(net: &PetriNet, prefix: &str) -> ParikhFormula {
    let np = net.places.len();
    let nt = net.input.len();
    let rules: Vec<IntVar> = (1..=nt).map(|k| IntVar::Int(format!("{prefix}y{k}"))).collect();
    let dist: Vec<IntVar> = net.places.iter().map(|s| IntVar::Int(format!("{prefix}z_{}", place_name(s)))).collect();
    let counters: BTreeMap<char, IntVar> = net
        .places
        .iter()
        .filter_map(|s| match s {
            GSym::T(c) => Some((*c, IntVar::Int(format!("{prefix}x_{c}")))),
            GSym::N(_) => None,
        })
        .collect();
    let zero = LinExpr::constant(0);
    let mut domain = Vec::new();
    for v in counters.values().chain(&rules).chain(&dist) {
        domain.push(ArithFormula::ge(lin(v), zero.clone()));
    }
    let start = net.marking.iter().position(|&m| m > 0).expect("marked start");
    let mut flow = Vec::new();
    let mut used = Vec::new();
    for s in 0..np {
        if !matches!(net.places[s], GSym::N(_)) {
            continue;
        }
        let mut bal = LinExpr::constant(net.marking[s] as i64);
        let mut consumed = LinExpr::constant(0);
        for t in 0..nt {
            let w = net.weight_out(t, s) as i64 - net.weight_in(s, t) as i64;
            if w != 0 {
                bal.add_term(w, rules[t].clone());
            }
            if net.weight_in(s, t) > 0 {
                consumed.add_term(1, rules[t].clone());
            }
        }
        flow.push((net.places[s].clone(), bal));
        if s != start {
            used.push(ArithFormula::or(vec![
                ArithFormula::eq(consumed, zero.clone()),
                ArithFormula::gt(lin(&dist[s]), zero.clone()),
            ]));
        }
    }
    let mut letters = Vec::new();
    for s in 0..np {
        let GSym::T(c) = net.places[s] else { continue };
        let mut sum = LinExpr::constant(0);
        for t in 0..nt {
            let w = net.weight_out(t, s);
            if w > 0 {
                sum.add_term(w as i64, rules[t].clone());
            }
        }
        let x = lin(&counters[&c]);
        letters.push((
            c,
            ArithFormula::and(vec![
                ArithFormula::eq(x.clone(), sum),
                ArithFormula::or(vec![
                    ArithFormula::eq(x, zero.clone()),
                    ArithFormula::gt(lin(&dist[s]), zero.clone()),
                ]),
            ]),
        ));
    }
    let mut reach = Vec::new();
    for s in 0..np {
        let z = lin(&dist[s]);
        if s == start {
            reach.push((net.places[s].clone(), ArithFormula::eq(z, zero.clone())));
            continue;
        }
        let mut alts = vec![ArithFormula::eq(z.clone(), zero.clone())];
        for t in 0..nt {
            if net.weight_out(t, s) == 0 {
                continue;
            }
            let from = net.input[t];
            let y_pos = ArithFormula::gt(lin(&rules[t]), zero.clone());
            if from == start {
                alts.push(ArithFormula::and(vec![ArithFormula::eq(z.clone(), LinExpr::constant(1)), y_pos]));
            } else {
                alts.push(ArithFormula::and(vec![
                    ArithFormula::eq(z.clone(), lin(&dist[from]).offset(1)),
                    y_pos,
                    ArithFormula::gt(lin(&dist[from]), zero.clone()),
                ]));
            }
        }
        reach.push((net.places[s].clone(), ArithFormula::or(alts)));
    }
    ParikhFormula { counters, rules, dist, domain, flow, letters, reach, used }
}

impl ParikhFormula {
    /// All families, with the letter counters left free.
    pub fn body(&self) -> ArithFormula {
        let mut parts = self.domain.clone();
        parts.extend(self.flow.iter().map(|(_, b)| ArithFormula::eq(b.clone(), LinExpr::constant(0))));
        parts.extend(self.letters.iter().map(|(_, f)| f.clone()));
        parts.extend(self.reach.iter().map(|(_, f)| f.clone()));
        parts.extend(self.used.iter().cloned());
        ArithFormula::and(parts)
    }

    /// `∃ y, z. body`, free in the letter counters.
    pub fn with_counters(&self) -> ArithFormula {
        let bound: Vec<IntVar> = self.rules.iter().chain(&self.dist).cloned().collect();
        ArithFormula::exists(bound, self.body())
    }

    /// `∃ x, y, z. len = Σ x_c ∧ body`.
    pub fn formula(&self, len: LinExpr) -> ArithFormula {
        let mut total = LinExpr::constant(0);
        for v in self.counters.values() {
            total.add_term(1, v.clone());
        }
        let bound: Vec<IntVar> = self.counters.values().chain(&self.rules).chain(&self.dist).cloned().collect();
        ArithFormula::exists(bound, ArithFormula::and(vec![ArithFormula::eq(len, total), self.body()]))
    }
}

/// Length constraint of each variable from the grammar restarted at its
/// nonterminal, pruned, with `|var|` for the word length.
pub fn length_constraint(g: &Cfg, vars: &[(Var, String)]) -> Result<ArithFormula, GrammarError> {
    let mut parts = Vec::new();
    for (i, (v, x)) in vars.iter().enumerate() {
        let gx = g.restart(x)?.pruned();
        let net = cfg_to_net(&gx);
        let f = net_to_presburger(&net, &format!("p{i}."));
        parts.push(f.formula(LinExpr::len(*v)));
    }
    Ok(ArithFormula::and(parts))
}

/// Size measure used for the linearity bound: rule symbols plus
/// nonterminals plus letters.
pub fn grammar_size(g: &Cfg) -> usize {
    g.productions.iter().map(|(_, r)| 1 + r.len()).sum::<usize>() + g.nonterminals().len() + g.alphabet.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presburger::sat;

    const ODD_GRAMMAR: &str = "S1 -> a b x\nx -> a x1\nx1 -> b x2\nx2 -> x\nx -> x3\nx3 -> a x1\nx1 -> <eps>\n";

    fn expr(terms: &[(i64, &str)], c: i64) -> LinExpr {
        let mut e = LinExpr::constant(c);
        for (k, v) in terms {
            e.add_term(*k, IntVar::int(v));
        }
        e
    }

    #[test]
    fn net_weights() {
        let g = Cfg::parse(ODD_GRAMMAR).unwrap();
        let net = cfg_to_net(&g);
        assert!(net.is_communication_free());
        let p = |s: &str| net.place(&GSym::N(s.into())).unwrap();
        let t = |c: char| net.place(&GSym::T(c)).unwrap();
        assert_eq!(net.weight_in(p("x1"), 2), 1);
        assert_eq!((net.weight_out(2, t('b')), net.weight_out(2, p("x2"))), (1, 1));
        assert_eq!(net.output[6].len(), 0);
        assert_eq!((net.weight_out(0, t('a')), net.weight_out(0, t('b')), net.weight_out(0, p("x"))), (1, 1, 1));
        assert_eq!(net.marking[p("S1")], 1);
    }

    #[test]
    fn g1_at_x_families() {
        let g = Cfg::parse(ODD_GRAMMAR).unwrap().restart("x").unwrap();
        let f = net_to_presburger(&cfg_to_net(&g), "");
        let flow: BTreeMap<String, LinExpr> =
            f.flow.iter().map(|(s, e)| (place_name(s), e.clone())).collect();
        assert_eq!(flow["x"], expr(&[(1, "y4"), (1, "y1"), (-1, "y2"), (-1, "y5")], 1));
        assert_eq!(flow["S1"], expr(&[(-1, "y1")], 0));
        assert_eq!(flow["x1"], expr(&[(1, "y2"), (1, "y6"), (-1, "y3"), (-1, "y7")], 0));
        assert_eq!(flow["x2"], expr(&[(1, "y3"), (-1, "y4")], 0));
        assert_eq!(flow["x3"], expr(&[(1, "y5"), (-1, "y6")], 0));
        let (c, fa) = &f.letters[0];
        assert_eq!(*c, 'a');
        let ArithFormula::And(parts) = fa else { panic!() };
        assert_eq!(parts[0], ArithFormula::eq(expr(&[(1, "x_a")], 0), expr(&[(1, "y1"), (1, "y2"), (1, "y6")], 0)));
    }

    #[test]
    fn g1_lengths_are_odd() {
        let g = Cfg::parse(ODD_GRAMMAR).unwrap();
        let mut v = crate::ast::Vocab::new();
        let x = v.var("x");
        let f = length_constraint(&g, &[(x, "x".into())]).unwrap();
        for k in 0..=10 {
            let q = ArithFormula::and(vec![f.clone(), ArithFormula::eq(LinExpr::len(x), LinExpr::constant(k))]);
            assert_eq!(sat(&q).is_sat(), k % 2 == 1, "k={k}");
        }
    }

    #[test]
    fn epsilon_grammar() {
        let g = Cfg::parse("S -> <eps>").unwrap();
        let f = net_to_presburger(&cfg_to_net(&g), "");
        assert!(f.counters.is_empty());
        let mut v = crate::ast::Vocab::new();
        let x = v.var("x");
        let g = Cfg::parse("x -> <eps>").unwrap();
        let f = length_constraint(&g, &[(x, "x".into())]).unwrap();
        let one = ArithFormula::and(vec![f.clone(), ArithFormula::eq(LinExpr::len(x), LinExpr::constant(1))]);
        assert!(sat(&one).is_unsat());
        let zero = ArithFormula::and(vec![f, ArithFormula::eq(LinExpr::len(x), LinExpr::constant(0))]);
        assert!(sat(&zero).is_sat());
    }

    #[test]
    fn unknown_variable() {
        let g = Cfg::parse(ODD_GRAMMAR).unwrap();
        assert!(length_constraint(&g, &[(Var(0), "q".into())]).is_err());
    }
}
