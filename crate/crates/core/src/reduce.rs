//! Cyclic reduction trees for word equation systems.
//!
//! A node holds an equation system. Open nodes are split on the head of
//! their leftmost equation ([`complete`]), children are [`match_eq`]-normal,
//! and a node that repeats an ancestor up to renaming of newer variables
//! becomes a bud with a back-link ([`link_back`]).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::{
    show_substs, Alphabet, Assignment, EquationSystem, StringTerm, Subst, SubstKind, Symbol, Var,
    Vocab, WordEquation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Open,
    SatLeaf,
    UnsatLeaf,
    Bud,
    Interior,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub system: EquationSystem,
    pub status: Status,
    pub parent: Option<usize>,
    /// Index of the edge from the parent.
    pub in_edge: Option<usize>,
    pub depth: usize,
    /// Variables with an id at or above this were created after the node.
    pub watermark: u32,
    /// Outgoing edge indices, in child order.
    pub children: Vec<usize>,
    /// Variables whose value is still undetermined at this node: the
    /// system's variables plus tracked ones that vanished without being
    /// substituted.
    pub live: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub parent: usize,
    pub substs: Vec<Subst>,
    pub child: usize,
}

/// `bud → companion`, where applying `renaming` to the bud's system gives
/// the companion's.
#[derive(Clone, Debug)]
pub struct BackLink {
    pub bud: usize,
    pub companion: usize,
    pub renaming: Vec<Subst>,
}

#[derive(Clone, Debug)]
pub struct ReductionTree {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub backlinks: Vec<BackLink>,
    pub root: usize,
    /// Root variables whose values a model must report.
    pub tracked: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Budget {
    pub max_depth: usize,
    pub max_nodes: usize,
    pub wall_time: Duration,
    /// Stop at the first satisfiable leaf. Only sound for deciding the
    /// equations alone; the tree is left with open nodes.
    pub stop_at_first_sat: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_depth: 512,
            max_nodes: 100_000,
            wall_time: Duration::from_secs(30),
            stop_at_first_sat: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("budget exhausted: {reason}")]
    BudgetExhausted { reason: String, tree: Box<ReductionTree> },
    #[error("equation is a leaf and cannot be split")]
    NotReducible,
    #[error("extracted assignment does not satisfy the root system")]
    InternalUnsound,
}

/// Strips equal head symbols until the heads differ or a side empties.
pub fn match_eq(e: &WordEquation) -> WordEquation {
    let k = e
        .lhs
        .0
        .iter()
        .zip(&e.rhs.0)
        .take_while(|(a, b)| a == b)
        .count();
    WordEquation::new(StringTerm(e.lhs.0[k..].to_vec()), StringTerm(e.rhs.0[k..].to_vec()))
}

/// Applies substitutions to every equation, matches, and drops trivial ones.
pub fn reduce_system(es: &EquationSystem, substs: &[Subst]) -> EquationSystem {
    let mut cur = es.clone();
    for s in substs {
        cur = cur.apply(s);
    }
    normalize_system(&cur)
}

pub fn normalize_system(es: &EquationSystem) -> EquationSystem {
    EquationSystem(
        es.0.iter()
            .map(match_eq)
            .filter(|e| !e.is_trivial())
            .collect(),
    )
}

fn unsat_eq(e: &WordEquation) -> bool {
    match (e.lhs.head(), e.rhs.head()) {
        (Some(Symbol::Letter(a)), Some(Symbol::Letter(b))) => a != b,
        (None, Some(Symbol::Letter(_))) | (Some(Symbol::Letter(_)), None) => true,
        _ => false,
    }
}

/// Leaf classification of a match-normal system.
pub fn classify(es: &EquationSystem) -> Status {
    if es.0.iter().all(|e| e.is_trivial()) {
        Status::SatLeaf
    } else if es.0.iter().any(unsat_eq) {
        Status::UnsatLeaf
    } else {
        Status::Open
    }
}

/// Case split on the head variable(s) of a match-normal equation.
///
/// Fresh variables are minted from the origin of the split variable, so a
/// chain of splits on `x` yields `x_1`, `x_2`, ...
pub fn complete(
    e: &WordEquation,
    vocab: &mut Vocab,
) -> Result<Vec<(WordEquation, Vec<Subst>)>, ReduceError> {
    let substs = split_substs(e, vocab)?;
    Ok(substs
        .into_iter()
        .map(|s| (match_eq(&e.apply(&s)), vec![s]))
        .collect())
}

fn split_substs(e: &WordEquation, vocab: &mut Vocab) -> Result<Vec<Subst>, ReduceError> {
    let fresh = |x: Var, vocab: &mut Vocab| {
        let o = vocab.origin(x);
        vocab.fresh(o)
    };
    Ok(match (e.lhs.head(), e.rhs.head()) {
        (Some(Symbol::Var(x)), None) | (None, Some(Symbol::Var(x))) => vec![Subst::eps(x)],
        (Some(Symbol::Var(x)), Some(Symbol::Letter(c)))
        | (Some(Symbol::Letter(c)), Some(Symbol::Var(x))) => {
            let x1 = fresh(x, vocab);
            vec![Subst::eps(x), Subst::letter_cons(x, c, x1)]
        }
        (Some(Symbol::Var(x)), Some(Symbol::Var(y))) if x != y => {
            let x1 = fresh(x, vocab);
            let y1 = fresh(y, vocab);
            vec![
                Subst::eps(x),
                Subst::var_cons(x, y, x1),
                Subst::eps(y),
                Subst::var_cons(y, x, y1),
            ]
        }
        _ => return Err(ReduceError::NotReducible),
    })
}

/// Simultaneous renaming of variables.
pub fn rename_system(es: &EquationSystem, map: &BTreeMap<Var, Var>) -> EquationSystem {
    let rt = |t: &StringTerm| {
        StringTerm(
            t.0.iter()
                .map(|s| match s {
                    Symbol::Var(v) => Symbol::Var(*map.get(v).unwrap_or(v)),
                    l => *l,
                })
                .collect(),
        )
    };
    EquationSystem(es.0.iter().map(|e| WordEquation::new(rt(&e.lhs), rt(&e.rhs))).collect())
}

pub fn renaming_map(renaming: &[Subst]) -> BTreeMap<Var, Var> {
    renaming
        .iter()
        .filter_map(|s| match s.replacement.0.as_slice() {
            [Symbol::Var(v)] => Some((s.target, *v)),
            _ => None,
        })
        .collect()
}

/// Finds a bijective renaming `θ` with `comp = bud[θ]` that moves only
/// variables with id `>= watermark`.
pub fn find_renaming(
    bud: &EquationSystem,
    comp: &EquationSystem,
    watermark: u32,
) -> Option<BTreeMap<Var, Var>> {
    if bud.0.len() != comp.0.len() {
        return None;
    }
    let mut fwd: BTreeMap<Var, Var> = BTreeMap::new();
    let mut inv: BTreeMap<Var, Var> = BTreeMap::new();
    for (eb, ec) in bud.0.iter().zip(&comp.0) {
        for (tb, tc) in [(&eb.lhs, &ec.lhs), (&eb.rhs, &ec.rhs)] {
            if tb.len() != tc.len() {
                return None;
            }
            for (sb, sc) in tb.0.iter().zip(&tc.0) {
                match (sb, sc) {
                    (Symbol::Letter(a), Symbol::Letter(b)) if a == b => {}
                    (Symbol::Var(b), Symbol::Var(c)) => {
                        if b.0 < watermark && b != c {
                            return None;
                        }
                        match fwd.get(b) {
                            Some(x) if x != c => return None,
                            Some(_) => {}
                            None => {
                                if inv.contains_key(c) {
                                    return None;
                                }
                                fwd.insert(*b, *c);
                                inv.insert(*c, *b);
                            }
                        }
                    }
                    _ => return None,
                }
            }
        }
    }
    Some(fwd)
}

impl ReductionTree {
    fn new(es: EquationSystem, watermark: u32) -> Self {
        let tracked = es.vars();
        ReductionTree {
            nodes: vec![Node {
                status: Status::Open,
                live: tracked.clone(),
                system: es,
                parent: None,
                in_edge: None,
                depth: 0,
                watermark,
                children: Vec::new(),
            }],
            edges: Vec::new(),
            backlinks: Vec::new(),
            root: 0,
            tracked,
        }
    }

    pub fn add_child(&mut self, parent: usize, substs: Vec<Subst>, system: EquationSystem, watermark: u32) -> usize {
        let id = self.nodes.len();
        let e = self.edges.len();
        self.edges.push(Edge { parent, substs, child: id });
        self.nodes.push(Node {
            system,
            status: Status::Open,
            parent: Some(parent),
            in_edge: Some(e),
            depth: self.nodes[parent].depth + 1,
            watermark,
            children: Vec::new(),
            live: Vec::new(),
        });
        self.nodes[parent].children.push(e);
        id
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.nodes[n].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    /// Edges on the tree path from `top` down to `bottom`, top first.
    pub fn path_edges(&self, top: usize, bottom: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = bottom;
        while cur != top {
            let e = self.nodes[cur].in_edge.expect("top is not an ancestor");
            out.push(e);
            cur = self.edges[e].parent;
        }
        out.reverse();
        out
    }

    pub fn count(&self, st: Status) -> usize {
        self.nodes.iter().filter(|n| n.status == st).count()
    }

    pub fn leaves(&self, st: Status) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].status == st).collect()
    }

    pub fn backlink_of(&self, bud: usize) -> Option<&BackLink> {
        self.backlinks.iter().find(|b| b.bud == bud)
    }

    pub fn is_closed(&self) -> bool {
        !self.nodes.iter().any(|n| n.status == Status::Open)
    }

    /// Recomputes `live` top-down from `tracked`.
    pub fn compute_live(&mut self) {
        let mut root_live = self.tracked.clone();
        for v in self.nodes[self.root].system.vars() {
            if !root_live.contains(&v) {
                root_live.push(v);
            }
        }
        self.nodes[self.root].live = root_live;
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            for &e in &self.nodes[n].children.clone() {
                let mut live = self.nodes[n].live.clone();
                for s in &self.edges[e].substs {
                    if let Some(i) = live.iter().position(|&v| v == s.target) {
                        live.remove(i);
                        for v in s.replacement.vars() {
                            if !live.contains(&v) {
                                live.insert(i.min(live.len()), v);
                            }
                        }
                    }
                }
                let c = self.edges[e].child;
                self.nodes[c].live = live;
                stack.push(c);
            }
        }
    }

    /// Longest notational length over all nodes.
    pub fn max_node_length(&self) -> usize {
        self.nodes.iter().map(|n| n.system.notational_length()).max().unwrap_or(0)
    }
}

/// Back-link candidate for `node`: nearest strict ancestor equal up to
/// renaming of variables created since that ancestor, with at least one
/// progressing substitution on the connecting path.
pub fn link_back(tree: &ReductionTree, node: usize) -> Option<(usize, Vec<Subst>)> {
    let sys = &tree.nodes[node].system;
    for a in tree.ancestors(node) {
        let anc = &tree.nodes[a];
        if let Some(map) = find_renaming(sys, &anc.system, anc.watermark) {
            let progressing = tree
                .path_edges(a, node)
                .iter()
                .any(|&e| tree.edges[e].substs.iter().any(|s| s.is_progressing()));
            if !progressing {
                continue;
            }
            let renaming = map
                .into_iter()
                .filter(|(b, c)| b != c)
                .map(|(b, c)| Subst::rename(b, c))
                .collect();
            return Some((a, renaming));
        }
    }
    None
}

/// Builds the reduction tree of `es` depth-first.
pub fn build_tree(
    es: &EquationSystem,
    vocab: &mut Vocab,
    budget: &Budget,
) -> Result<ReductionTree, ReduceError> {
    let start = Instant::now();
    let root_sys = normalize_system(es);
    let mut tree = ReductionTree::new(root_sys, vocab.len() as u32);
    tree.tracked = es.vars();
    let mut stack = vec![tree.root];
    while let Some(n) = stack.pop() {
        let status = classify(&tree.nodes[n].system);
        if status != Status::Open {
            tree.nodes[n].status = status;
            if status == Status::SatLeaf && budget.stop_at_first_sat {
                break;
            }
            continue;
        }
        if let Some((c, renaming)) = link_back(&tree, n) {
            tree.nodes[n].status = Status::Bud;
            tree.backlinks.push(BackLink { bud: n, companion: c, renaming });
            continue;
        }
        let exhausted = if tree.nodes[n].depth >= budget.max_depth {
            Some(format!("depth limit {}", budget.max_depth))
        } else if tree.nodes.len() >= budget.max_nodes {
            Some(format!("node limit {}", budget.max_nodes))
        } else if start.elapsed() > budget.wall_time {
            Some(format!("time limit {:?}", budget.wall_time))
        } else {
            None
        };
        if let Some(reason) = exhausted {
            tree.compute_live();
            return Err(ReduceError::BudgetExhausted { reason, tree: Box::new(tree) });
        }
        let sys = tree.nodes[n].system.clone();
        let substs = split_substs(&sys.0[0], vocab)?;
        let mut seen: HashSet<EquationSystem> = HashSet::new();
        let mut kids = Vec::new();
        for s in substs {
            let child = reduce_system(&sys, std::slice::from_ref(&s));
            if !seen.insert(child.clone()) {
                continue;
            }
            kids.push(tree.add_child(n, vec![s], child, vocab.len() as u32));
        }
        tree.nodes[n].status = Status::Interior;
        stack.extend(kids.into_iter().rev());
    }
    tree.compute_live();
    Ok(tree)
}

/// Grafts a free-variable subtree under every satisfiable leaf that still
/// has undetermined variables: a base edge `[ε/x]` plus one cycle
/// `[c x′/x]` per letter, closed by `[x/x′]`. Several free variables chain
/// through the base nodes.
pub fn postpro(tree: &ReductionTree, vocab: &mut Vocab, alphabet: &Alphabet, tracked: &[Var]) -> ReductionTree {
    let mut t = tree.clone();
    for v in tracked {
        if !t.tracked.contains(v) {
            t.tracked.push(*v);
        }
    }
    t.compute_live();
    for leaf in t.leaves(Status::SatLeaf) {
        let free = t.nodes[leaf].live.clone();
        let mut cur = leaf;
        for x in free {
            t.nodes[cur].status = Status::Interior;
            let o = vocab.origin(x);
            let sys = t.nodes[cur].system.clone();
            let wm = vocab.len() as u32;
            let base = t.add_child(cur, vec![Subst::eps(x)], sys.clone(), wm);
            for &c in alphabet.letters() {
                let x1 = vocab.fresh(o);
                let bud = t.add_child(cur, vec![Subst::letter_cons(x, c, x1)], sys.clone(), vocab.len() as u32);
                t.nodes[bud].status = Status::Bud;
                t.backlinks.push(BackLink { bud, companion: cur, renaming: vec![Subst::rename(x1, x)] });
            }
            t.nodes[base].status = Status::SatLeaf;
            cur = base;
        }
    }
    t.compute_live();
    t
}

/// A step of a run through the tree: follow an edge or take a back-link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Edge(usize),
    Jump(usize),
}

/// The root-to-leaf path of a satisfiable leaf and the cycles that can be
/// entered along it.
#[derive(Clone, Debug)]
pub struct Trace {
    pub edges: Vec<usize>,
    /// `(position on the path, back-link index)`: the cycle's companion is
    /// the node reached after `position` edges.
    pub cycles: Vec<(usize, usize)>,
}

impl Trace {
    pub fn substs<'a>(&self, tree: &'a ReductionTree) -> Vec<&'a Subst> {
        self.edges.iter().flat_map(|&e| tree.edges[e].substs.iter()).collect()
    }
}

pub fn solution_trace(tree: &ReductionTree, leaf: usize) -> Trace {
    let edges = tree.path_edges(tree.root, leaf);
    let mut path_nodes = vec![tree.root];
    path_nodes.extend(edges.iter().map(|&e| tree.edges[e].child));
    let mut cycles = Vec::new();
    for (pos, &n) in path_nodes.iter().enumerate() {
        for (i, b) in tree.backlinks.iter().enumerate() {
            if b.companion == n {
                cycles.push((pos, i));
            }
        }
    }
    Trace { edges, cycles }
}

/// Expands a trace with each cycle taken `counts[i]` times into a run.
pub fn trace_run(tree: &ReductionTree, trace: &Trace, counts: &[usize]) -> Vec<Step> {
    let mut run = Vec::new();
    for pos in 0..=trace.edges.len() {
        for (k, &(p, b)) in trace.cycles.iter().enumerate() {
            if p != pos {
                continue;
            }
            let bl = &tree.backlinks[b];
            let seg = tree.path_edges(bl.companion, bl.bud);
            for _ in 0..counts.get(k).copied().unwrap_or(0) {
                run.extend(seg.iter().map(|&e| Step::Edge(e)));
                run.push(Step::Jump(b));
            }
        }
        if pos < trace.edges.len() {
            run.push(Step::Edge(trace.edges[pos]));
        }
    }
    run
}

/// Evaluates a run ending at a satisfiable leaf, bottom-up. Variables left
/// undetermined read as ε.
pub fn eval_run(tree: &ReductionTree, run: &[Step]) -> Assignment {
    let mut a: Assignment = BTreeMap::new();
    for step in run.iter().rev() {
        match *step {
            Step::Edge(e) => {
                for s in tree.edges[e].substs.iter().rev() {
                    let w = s.replacement.eval(&a);
                    a.insert(s.target, w);
                }
            }
            Step::Jump(b) => {
                let map = renaming_map(&tree.backlinks[b].renaming);
                let vals: Vec<(Var, String)> = map
                    .iter()
                    .map(|(bv, cv)| (*bv, a.get(cv).cloned().unwrap_or_default()))
                    .collect();
                for (bv, w) in vals {
                    a.insert(bv, w);
                }
            }
        }
    }
    a
}

/// Model of the root system for a leaf with given cycle counts.
pub fn extract_model(tree: &ReductionTree, leaf: usize, counts: &[usize]) -> Result<Assignment, ReduceError> {
    let trace = solution_trace(tree, leaf);
    let run = trace_run(tree, &trace, counts);
    let full = eval_run(tree, &run);
    let out = restrict(&full, &tree.tracked);
    if tree.nodes[tree.root].system.holds(&out) {
        Ok(out)
    } else {
        Err(ReduceError::InternalUnsound)
    }
}

fn restrict(a: &Assignment, vars: &[Var]) -> Assignment {
    vars.iter().map(|v| (*v, a.get(v).cloned().unwrap_or_default())).collect()
}

/// Limits for [`search_model`].
#[derive(Clone, Debug)]
pub struct SearchLimits {
    /// Largest number of letter-consuming steps per run.
    pub max_letters: usize,
    /// Total DFS visits before giving up.
    pub max_visits: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_letters: 24, max_visits: 400_000 }
    }
}

/// Iterative deepening over runs ordered by the number of letter-consuming
/// steps. Returns the first root assignment accepted by `check`.
pub fn search_model(
    tree: &ReductionTree,
    limits: &SearchLimits,
    check: &mut dyn FnMut(&Assignment) -> bool,
) -> Option<Assignment> {
    let depth = tree.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    let mut visits = 0usize;
    for d in 0..=limits.max_letters {
        let max_steps = depth + 4 * d + 8;
        let mut run = Vec::new();
        let mut ctx = Dfs { tree, check, visits: &mut visits, limit: limits.max_visits, target: d, max_steps };
        if let Some(a) = ctx.go(tree.root, 0, &mut run) {
            return Some(a);
        }
        if visits >= limits.max_visits {
            return None;
        }
    }
    None
}

struct Dfs<'a, 'b> {
    tree: &'a ReductionTree,
    check: &'b mut dyn FnMut(&Assignment) -> bool,
    visits: &'b mut usize,
    limit: usize,
    target: usize,
    max_steps: usize,
}

impl Dfs<'_, '_> {
    fn go(&mut self, n: usize, letters: usize, run: &mut Vec<Step>) -> Option<Assignment> {
        *self.visits += 1;
        if *self.visits > self.limit || run.len() > self.max_steps {
            return None;
        }
        let node = &self.tree.nodes[n];
        match node.status {
            Status::SatLeaf => {
                if letters != self.target {
                    return None;
                }
                let a = restrict(&eval_run(self.tree, run), &self.tree.tracked);
                if self.tree.nodes[self.tree.root].system.holds(&a) && (self.check)(&a) {
                    return Some(a);
                }
                None
            }
            Status::Bud => {
                let b = self.tree.backlinks.iter().position(|b| b.bud == n)?;
                run.push(Step::Jump(b));
                let r = self.go(self.tree.backlinks[b].companion, letters, run);
                run.pop();
                r
            }
            Status::Interior => {
                for &e in &node.children {
                    let add = self.tree.edges[e]
                        .substs
                        .iter()
                        .filter(|s| s.kind() == SubstKind::LetterCons)
                        .count();
                    if letters + add > self.target {
                        continue;
                    }
                    run.push(Step::Edge(e));
                    let r = self.go(self.tree.edges[e].child, letters + add, run);
                    run.pop();
                    if r.is_some() {
                        return r;
                    }
                }
                None
            }
            Status::UnsatLeaf | Status::Open => None,
        }
    }
}

/// Graphviz rendering: solid edges for substitutions, dashed for back-links.
pub fn to_dot(tree: &ReductionTree, vocab: &Vocab) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, n) in tree.nodes.iter().enumerate() {
        let color = match n.status {
            Status::SatLeaf => "green",
            Status::UnsatLeaf => "red",
            Status::Bud => "blue",
            Status::Open => "orange",
            Status::Interior => "black",
        };
        let _ = writeln!(
            out,
            "  n{i} [label=\"e{i}: {}\", color={color}];",
            escape(&n.system.show(vocab))
        );
    }
    for e in &tree.edges {
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            e.parent,
            e.child,
            escape(&show_substs(&e.substs, vocab))
        );
    }
    for b in &tree.backlinks {
        let _ = writeln!(
            out,
            "  n{} -> n{} [style=dashed, label=\"{}\"];",
            b.bud,
            b.companion,
            escape(&show_substs(&b.renaming, vocab))
        );
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Structural checks: edges re-derive, back-links rename to their
/// companions, cycles progress and are shorter than the companion.
pub fn check_invariants(tree: &ReductionTree) -> Result<(), String> {
    check_structure(tree)?;
    for (i, b) in tree.backlinks.iter().enumerate() {
        let n = tree.nodes[b.companion].system.notational_length();
        let len = tree.path_edges(b.companion, b.bud).len();
        if n > 0 && len >= n {
            return Err(format!("back-link {i} cycle of length {len} not below N={n}"));
        }
    }
    Ok(())
}

/// [`check_invariants`] without the cycle length bound, which unrolled
/// trees give up.
pub fn check_structure(tree: &ReductionTree) -> Result<(), String> {
    for (i, e) in tree.edges.iter().enumerate() {
        let got = reduce_system(&tree.nodes[e.parent].system, &e.substs);
        if got != tree.nodes[e.child].system {
            return Err(format!("edge {i} does not re-derive its child"));
        }
        if tree.nodes[e.child].system.notational_length() > tree.nodes[e.parent].system.notational_length() {
            return Err(format!("edge {i} grows the system"));
        }
    }
    for (i, b) in tree.backlinks.iter().enumerate() {
        let map = renaming_map(&b.renaming);
        if rename_system(&tree.nodes[b.bud].system, &map) != tree.nodes[b.companion].system {
            return Err(format!("back-link {i} does not rename bud to companion"));
        }
        if !tree.ancestors(b.bud).contains(&b.companion) {
            return Err(format!("back-link {i} companion is not an ancestor"));
        }
        let path = tree.path_edges(b.companion, b.bud);
        if !path.iter().any(|&e| tree.edges[e].substs.iter().any(|s| s.is_progressing())) {
            return Err(format!("back-link {i} closes a non-progressing cycle"));
        }
    }
    Ok(())
}

/// Variables introduced anywhere in the tree.
pub fn all_vars(tree: &ReductionTree) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    for n in &tree.nodes {
        out.extend(n.system.vars());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::equation;

    fn sys(v: &mut Vocab, vars: &[&str], eqs: &[&str]) -> EquationSystem {
        EquationSystem(eqs.iter().map(|e| equation(v, vars, e)).collect())
    }

    #[test]
    fn match_strips_heads() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x1"], "abax1=ax1ba");
        assert_eq!(match_eq(&e).show(&v), "bax1=x1ba");
        let e = equation(&mut v, &["x"], "ax=bx");
        assert_eq!(match_eq(&e), e);
    }

    #[test]
    fn complete_var_letter() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x"], "abx=xba");
        let e = WordEquation::new(e.rhs.clone(), e.lhs.clone());
        let kids = complete(&e, &mut v).unwrap();
        let shown: Vec<_> = kids.iter().map(|(e, s)| (e.show(&v), show_substs(s, &v))).collect();
        assert_eq!(shown[0], ("ba=ab".into(), "[ε/x]".into()));
        assert_eq!(shown[1], ("x_1ba=bax_1".into(), "[ax_1/x]".into()));
    }

    #[test]
    fn complete_var_var() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x", "y"], "xaby=ybax");
        let kids = complete(&e, &mut v).unwrap();
        let labels: Vec<_> = kids.iter().map(|(_, s)| show_substs(s, &v)).collect();
        assert_eq!(labels, ["[ε/x]", "[yx_1/x]", "[ε/y]", "[xy_1/y]"]);
        assert_eq!(kids[1].0.show(&v), "x_1aby=bayx_1");
    }

    #[test]
    fn classify_leaves() {
        let mut v = Vocab::new();
        assert_eq!(classify(&sys(&mut v, &[], &["ab=ba"])), Status::UnsatLeaf);
        assert_eq!(classify(&EquationSystem::default()), Status::SatLeaf);
        assert_eq!(classify(&sys(&mut v, &["x1"], &["bax1=x1ba"])), Status::Open);
    }

    #[test]
    fn abx_xba_tree() {
        let mut v = Vocab::new();
        let es = sys(&mut v, &["x"], &["abx=xba"]);
        let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
        assert_eq!(t.nodes.len(), 5);
        assert_eq!(t.backlinks.len(), 1);
        assert_eq!(show_substs(&t.backlinks[0].renaming, &v), "[x/x_2]");
        assert_eq!(t.backlinks[0].companion, t.root);
        check_invariants(&t).unwrap();
    }

    #[test]
    fn abx_xba_models() {
        let mut v = Vocab::new();
        let es = sys(&mut v, &["x"], &["abx=xba"]);
        let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
        let leaf = t.leaves(Status::SatLeaf)[0];
        let x = v.lookup("x").unwrap();
        let words: Vec<String> = (0..3).map(|k| extract_model(&t, leaf, &[k]).unwrap()[&x].clone()).collect();
        assert_eq!(words, ["a", "aba", "ababa"]);
    }

    #[test]
    fn dot_mentions_backlink() {
        let mut v = Vocab::new();
        let es = sys(&mut v, &["x"], &["abx=xba"]);
        let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
        let dot = to_dot(&t, &v);
        assert!(dot.contains("style=dashed, label=\"[x/x_2]\""));
    }

    #[test]
    fn postpro_grafts_free_variable() {
        let mut v = Vocab::new();
        let es = sys(&mut v, &["x"], &["x=x"]);
        let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
        let x = v.lookup("x").unwrap();
        let t = postpro(&t, &mut v, &Alphabet::from_letters(['a', 'b']), &[x]);
        assert_eq!(t.backlinks.len(), 2);
        assert_eq!(t.count(Status::SatLeaf), 1);
        check_invariants(&t).unwrap();
    }
}
