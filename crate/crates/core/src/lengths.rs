//! Length constraints of a closed tree as constrained Horn clauses, and
//! their closed-form solution when every loop is a translation.
//!
//! Each node with undetermined variables gets a predicate over their
//! lengths. Edges give clauses `gen(σ) ∧ P_child ⇒ P_parent`, back-links
//! give `v_b = v_c ∧ P_companion ⇒ P_bud`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::{ArithFormula, EquationSystem, IntVar, LinExpr, Subst, SubstKind, Symbol, Var, Vocab};
use crate::reduce::{ReductionTree, Status};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LengthError {
    #[error("substitution shape has no gen rule: {0}")]
    UnsupportedShape(String),
    #[error("not in the DPI fragment: {0}")]
    NotDpi(String),
}

/// `n_x = 0`, `n_x = n_y + 1` or `n_x = n_y + n_z`.
pub fn gen_sigma(s: &Subst) -> Result<ArithFormula, LengthError> {
    match s.kind() {
        SubstKind::Eps | SubstKind::LetterCons | SubstKind::VarCons => {
            let (v, e) = gen_def(s);
            Ok(ArithFormula::eq(LinExpr::var(v), e))
        }
        k => Err(LengthError::UnsupportedShape(format!("{k:?}"))),
    }
}

/// Length definition of the target of any substitution.
pub fn gen_def(s: &Subst) -> (IntVar, LinExpr) {
    let mut e = LinExpr::constant(0);
    for sym in &s.replacement.0 {
        match sym {
            Symbol::Letter(_) => e = e.offset(1),
            Symbol::Var(v) => e.add_term(1, IntVar::Len(*v)),
        }
    }
    (IntVar::Len(s.target), e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pred {
    pub node: usize,
    pub params: Vec<IntVar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClauseOrigin {
    Edge(usize),
    BackLink(usize),
    Leaf(usize),
}

/// `∃ locals. defs ∧ guard ∧ body(params) ⇒ head(params)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub head: usize,
    pub body: Option<usize>,
    /// Head variables defined over body variables.
    pub defs: Vec<(IntVar, LinExpr)>,
    pub guard: ArithFormula,
    pub locals: Vec<IntVar>,
    pub origin: ClauseOrigin,
}

#[derive(Clone, Debug)]
pub struct ChcSystem {
    pub preds: Vec<Pred>,
    pub clauses: Vec<Clause>,
    /// Predicate of the root, if the root has undetermined variables.
    pub root: Option<usize>,
    pub arith: ArithFormula,
}

fn lens(vs: &[Var]) -> Vec<IntVar> {
    vs.iter().map(|v| IntVar::Len(*v)).collect()
}

/// One predicate per node with undetermined variables; one clause per
/// edge into a non-failing child, per back-link, and per satisfiable leaf
/// that still has free variables.
pub fn extract_chc(tree: &ReductionTree, arith: &ArithFormula) -> ChcSystem {
    let mut preds = Vec::new();
    let mut pred_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, n) in tree.nodes.iter().enumerate() {
        if !n.live.is_empty() && n.status != Status::UnsatLeaf {
            pred_of.insert(i, preds.len());
            preds.push(Pred { node: i, params: lens(&n.live) });
        }
    }
    let mut clauses = Vec::new();
    for (i, n) in tree.nodes.iter().enumerate() {
        let Some(&head) = pred_of.get(&i) else { continue };
        match n.status {
            Status::Interior => {
                for &e in &n.children {
                    let edge = &tree.edges[e];
                    let c = edge.child;
                    if tree.nodes[c].status == Status::UnsatLeaf {
                        continue;
                    }
                    let body = pred_of.get(&c).copied();
                    let defs: Vec<(IntVar, LinExpr)> = edge.substs.iter().map(gen_def).collect();
                    let head_params: BTreeSet<&IntVar> = preds[head].params.iter().collect();
                    let mut locals: Vec<IntVar> = Vec::new();
                    if let Some(b) = body {
                        locals.extend(preds[b].params.iter().filter(|p| !head_params.contains(p)).cloned());
                    }
                    clauses.push(Clause {
                        head,
                        body,
                        defs,
                        guard: ArithFormula::True,
                        locals,
                        origin: ClauseOrigin::Edge(e),
                    });
                }
            }
            Status::Bud => {
                if let Some(k) = tree.backlinks.iter().position(|b| b.bud == i) {
                    let b = &tree.backlinks[k];
                    let Some(&body) = pred_of.get(&b.companion) else { continue };
                    let defs = b.renaming.iter().map(gen_def).collect();
                    clauses.push(Clause {
                        head,
                        body: Some(body),
                        defs,
                        guard: ArithFormula::True,
                        locals: Vec::new(),
                        origin: ClauseOrigin::BackLink(k),
                    });
                }
            }
            Status::SatLeaf => {
                let guard = ArithFormula::and(
                    preds[head].params.iter().map(|p| ArithFormula::ge(LinExpr::var(p.clone()), LinExpr::constant(0))).collect(),
                );
                clauses.push(Clause { head, body: None, defs: Vec::new(), guard, locals: Vec::new(), origin: ClauseOrigin::Leaf(i) });
            }
            Status::UnsatLeaf | Status::Open => {}
        }
    }
    ChcSystem { preds, clauses, root: pred_of.get(&tree.root).copied(), arith: arith.clone() }
}

impl ChcSystem {
    pub fn pred_name(&self, p: usize) -> String {
        format!("P{}", self.preds[p].node)
    }

    pub fn application(&self, p: usize) -> ArithFormula {
        ArithFormula::Pred(self.pred_name(p), self.preds[p].params.iter().map(|v| LinExpr::var(v.clone())).collect())
    }

    /// Clause body as a formula with the body predicate symbolic.
    pub fn body_formula(&self, c: &Clause) -> ArithFormula {
        let mut parts: Vec<ArithFormula> =
            c.defs.iter().map(|(v, e)| ArithFormula::eq(LinExpr::var(v.clone()), e.clone())).collect();
        parts.push(c.guard.clone());
        if let Some(b) = c.body {
            parts.push(self.application(b));
        }
        ArithFormula::exists(c.locals.clone(), ArithFormula::and(parts))
    }

    pub fn query_formula(&self) -> ArithFormula {
        match self.root {
            Some(r) => ArithFormula::and(vec![self.application(r), self.arith.clone()]),
            None => self.arith.clone(),
        }
    }

    /// One clause per line as `body => head`, then the query after `? `.
    pub fn dump(&self, vocab: &Vocab) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            let head = self.application(c.head).show(vocab);
            out.push_str(&format!("{} => {head}\n", self.body_formula(c).show(vocab)));
        }
        out.push_str(&format!("? {}\n", self.query_formula().show(vocab)));
        out
    }

    /// Replaces every predicate application by its solution.
    pub fn instantiate(&self, f: &ArithFormula, sol: &Solution) -> ArithFormula {
        match f {
            ArithFormula::Pred(name, args) => {
                let p = (0..self.preds.len()).find(|&p| self.pred_name(p) == *name).expect("known predicate");
                let map: BTreeMap<IntVar, LinExpr> =
                    self.preds[p].params.iter().cloned().zip(args.iter().cloned()).collect();
                sol[&p].substitute(&map)
            }
            ArithFormula::And(fs) => ArithFormula::and(fs.iter().map(|g| self.instantiate(g, sol)).collect()),
            ArithFormula::Or(fs) => ArithFormula::or(fs.iter().map(|g| self.instantiate(g, sol)).collect()),
            ArithFormula::Exists(vs, b) => ArithFormula::exists(vs.clone(), self.instantiate(b, sol)),
            other => other.clone(),
        }
    }
}

/// Closed-form definition per predicate index.
pub type Solution = BTreeMap<usize, ArithFormula>;

/// Solves the clauses bottom-up. Non-recursive predicates are inlined; a
/// recursive component must have a single entry predicate whose loops each
/// add a constant to every parameter, giving `∃ i ≥ 0. base(v − i·δ)`.
pub fn solve_dpi(chc: &ChcSystem) -> Result<Solution, LengthError> {
    let n = chc.preds.len();
    let mut by_head: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, c) in chc.clauses.iter().enumerate() {
        by_head[c.head].push(k);
    }
    let sccs = tarjan(n, &|p| by_head[p].iter().filter_map(|&k| chc.clauses[k].body).collect());
    let mut sol: Solution = BTreeMap::new();
    let mut counter = 0usize;
    for comp in sccs {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let recursive = comp.len() > 1
            || by_head[comp[0]].iter().any(|&k| chc.clauses[k].body == Some(comp[0]));
        if !recursive {
            let p = comp[0];
            let f = Explorer { chc, by_head: &by_head, sol: &sol, members: &members, entry: None }.define(p)?;
            sol.insert(p, f);
            continue;
        }
        let entries: BTreeSet<usize> = chc
            .clauses
            .iter()
            .filter(|c| matches!(c.origin, ClauseOrigin::BackLink(_)) && members.contains(&c.head))
            .filter_map(|c| c.body)
            .collect();
        if entries.len() != 1 {
            return Err(LengthError::NotDpi(format!("{} loop entries in one component", entries.len())));
        }
        let c = *entries.iter().next().expect("one entry");
        let ex = Explorer { chc, by_head: &by_head, sol: &sol, members: &members, entry: Some(c) };
        let mut bases = Vec::new();
        let mut loops: Vec<BTreeMap<IntVar, i64>> = Vec::new();
        let params = chc.preds[c].params.clone();
        let start: BTreeMap<IntVar, LinExpr> = params.iter().map(|v| (v.clone(), LinExpr::var(v.clone()))).collect();
        ex.walk(c, start, Vec::new(), &mut bases, &mut loops, 0)?;
        let mut shift: BTreeMap<IntVar, LinExpr> = params.iter().map(|v| (v.clone(), LinExpr::var(v.clone()))).collect();
        let mut counters = Vec::new();
        for d in loops.iter().filter(|d| d.values().any(|&k| k != 0)) {
            counter += 1;
            let i = IntVar::Int(format!("it{counter}"));
            for (v, k) in d {
                if *k != 0 {
                    let e = shift.get_mut(v).expect("param");
                    e.add_term(-k, i.clone());
                }
            }
            counters.push(i);
        }
        let base = ArithFormula::or(bases);
        let mut parts: Vec<ArithFormula> = counters
            .iter()
            .map(|i| ArithFormula::ge(LinExpr::var(i.clone()), LinExpr::constant(0)))
            .collect();
        parts.push(base.substitute(&shift));
        let closed = ArithFormula::exists(counters, ArithFormula::and(parts));
        sol.insert(c, closed);
        for &p in &comp {
            if p != c {
                let ex = Explorer { chc, by_head: &by_head, sol: &sol, members: &members, entry: None };
                let f = ex.define(p)?;
                sol.insert(p, f);
            }
        }
    }
    Ok(sol)
}

struct Explorer<'a> {
    chc: &'a ChcSystem,
    by_head: &'a [Vec<usize>],
    sol: &'a Solution,
    members: &'a BTreeSet<usize>,
    /// The loop entry while it is still unsolved.
    entry: Option<usize>,
}

impl Explorer<'_> {
    /// Definition of `p` by expanding clauses until solved predicates.
    fn define(&self, p: usize) -> Result<ArithFormula, LengthError> {
        let params = self.chc.preds[p].params.clone();
        let start: BTreeMap<IntVar, LinExpr> = params.iter().map(|v| (v.clone(), LinExpr::var(v.clone()))).collect();
        let mut bases = Vec::new();
        let mut loops = Vec::new();
        self.walk(p, start, Vec::new(), &mut bases, &mut loops, 0)?;
        Ok(ArithFormula::or(bases))
    }

    /// Depth-first over clause chains from `p`. `env` expresses the start
    /// parameters over the current predicate's variables.
    fn walk(
        &self,
        p: usize,
        env: BTreeMap<IntVar, LinExpr>,
        guards: Vec<ArithFormula>,
        bases: &mut Vec<ArithFormula>,
        loops: &mut Vec<BTreeMap<IntVar, i64>>,
        depth: usize,
    ) -> Result<(), LengthError> {
        if depth > 4 * self.chc.preds.len() + 4 {
            return Err(LengthError::NotDpi("unbounded clause chain".into()));
        }
        for &k in &self.by_head[p] {
            let c = &self.chc.clauses[k];
            let mut env2 = env.clone();
            for (h, e) in &c.defs {
                for val in env2.values_mut() {
                    *val = val.substitute(h, e);
                }
            }
            let mut g2 = guards.clone();
            if !c.guard.is_true() {
                g2.push(c.guard.clone());
            }
            match c.body {
                Some(b) if Some(b) == self.entry && matches!(c.origin, ClauseOrigin::BackLink(_)) => {
                    let mut delta = BTreeMap::new();
                    for (v, e) in &env2 {
                        let d = e.clone().minus(&LinExpr::var(v.clone()));
                        if !d.coeffs.values().all(|&k| k == 0) || d.constant < 0 {
                            return Err(LengthError::NotDpi("loop is not a translation".into()));
                        }
                        delta.insert(v.clone(), d.constant);
                    }
                    if !g2.is_empty() {
                        return Err(LengthError::NotDpi("guarded loop".into()));
                    }
                    loops.push(delta);
                }
                Some(b) if self.members.contains(&b) && !self.sol.contains_key(&b) => {
                    self.walk(b, env2, g2, bases, loops, depth + 1)?;
                }
                body => {
                    let mut parts: Vec<ArithFormula> = env2
                        .iter()
                        .map(|(v, e)| ArithFormula::eq(LinExpr::var(v.clone()), e.clone()))
                        .collect();
                    parts.extend(g2);
                    if let Some(b) = body {
                        let Some(f) = self.sol.get(&b) else {
                            return Err(LengthError::NotDpi(format!("P{} used before solved", self.chc.preds[b].node)));
                        };
                        parts.push(f.clone());
                    }
                    let conj = ArithFormula::and(parts);
                    let locals: Vec<IntVar> = conj.free_vars().into_iter().filter(|v| !env.contains_key(v)).collect();
                    bases.push(ArithFormula::exists(locals, conj));
                }
            }
        }
        Ok(())
    }
}

/// Strongly connected components, dependencies first.
fn tarjan(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    struct St {
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn go(v: usize, s: &mut St, succ: &dyn Fn(usize) -> Vec<usize>) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on[v] = true;
        for w in succ(v) {
            match s.index[w] {
                None => {
                    go(w, s, succ);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().expect("on stack");
                s.on[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort();
            s.out.push(comp);
        }
    }
    let mut s = St { index: vec![None; n], low: vec![0; n], on: vec![false; n], stack: Vec::new(), next: 0, out: Vec::new() };
    for v in 0..n {
        if s.index[v].is_none() {
            go(v, &mut s, succ);
        }
    }
    s.out
}

/// The query with every predicate replaced by its solution.
pub fn solved_query(chc: &ChcSystem, sol: &Solution) -> ArithFormula {
    chc.instantiate(&chc.query_formula(), sol)
}

/// Per back-link: whether every label on its cycle consumes a letter.
/// Renaming edges inside a cycle are neutral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatnessWitness {
    pub cycles: Vec<(usize, bool)>,
}

impl FlatnessWitness {
    pub fn is_flat(&self) -> bool {
        self.cycles.iter().all(|(_, ok)| *ok)
    }
}

pub fn flatness(tree: &ReductionTree) -> FlatnessWitness {
    let cycles = tree
        .backlinks
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let ok = tree.path_edges(b.companion, b.bud).iter().all(|&e| {
                tree.edges[e]
                    .substs
                    .iter()
                    .all(|s| matches!(s.kind(), SubstKind::LetterCons | SubstKind::Rename))
            });
            (k, ok)
        })
        .collect();
    FlatnessWitness { cycles }
}

/// Whether a quadratic system splits into phases `s_i = t_i`, each with
/// no variable on both sides or of the shape `X w1 = w2 X`.
pub fn is_phased_regular(es: &EquationSystem) -> bool {
    if !es.is_quadratic() {
        return false;
    }
    es.0.iter().all(|e| phases(&e.lhs.0, &e.rhs.0))
}

fn phases(l: &[Symbol], r: &[Symbol]) -> bool {
    // reach[i][j]: prefixes l[..i], r[..j] split into regular phases
    let (n, m) = (l.len(), r.len());
    let mut reach = vec![vec![false; m + 1]; n + 1];
    reach[0][0] = true;
    for i in 0..=n {
        for j in 0..=m {
            if !reach[i][j] {
                continue;
            }
            for i2 in i..=n {
                for j2 in j..=m {
                    if (i2, j2) != (i, j) && !reach[i2][j2] && regular_phase(&l[i..i2], &r[j..j2]) {
                        reach[i2][j2] = true;
                    }
                }
            }
        }
    }
    reach[n][m]
}

fn regular_phase(s: &[Symbol], t: &[Symbol]) -> bool {
    let vs: BTreeSet<Var> = s.iter().filter_map(|x| x.as_var()).collect();
    let vt: BTreeSet<Var> = t.iter().filter_map(|x| x.as_var()).collect();
    if vs.is_disjoint(&vt) {
        return true;
    }
    let shape = |a: &[Symbol], b: &[Symbol]| match (a.first(), b.last()) {
        (Some(Symbol::Var(x)), Some(Symbol::Var(y))) if x == y => {
            a[1..].iter().all(|s| s.is_letter()) && b[..b.len() - 1].iter().all(|s| s.is_letter())
        }
        _ => false,
    };
    shape(s, t) || shape(t, s)
}
