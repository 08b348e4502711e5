//! Refining a reduction tree against regular membership constraints.
//!
//! Every cycle is unrolled `m + M` times, where `m` counts the live states
//! of the product of the constraint automata and `M = m!`. The last copy
//! links back to copy `m + 1`, so longer runs repeat with period `M`. Each
//! satisfiable leaf is then checked as a straight-line program: compose the
//! definitions on its root path and test the resulting words.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::ast::{Alphabet, Assignment, Regex, StringTerm, Subst, Symbol, Var, Vocab};
use crate::automata::{regex_to_dfa, Dfa};
use crate::reduce::{find_renaming, BackLink, Edge, Node, ReductionTree, Status};

/// A constraint `var ∈ regex` with its minimal automaton.
#[derive(Clone, Debug)]
pub struct Membership {
    pub var: Var,
    pub regex: Regex,
    pub dfa: Dfa,
}

impl Membership {
    pub fn new(var: Var, regex: Regex, alphabet: &Alphabet) -> Self {
        let dfa = regex_to_dfa(&regex, alphabet);
        Membership { var, regex, dfa }
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        format!("{}∈{}", vocab.name(self.var), self.regex)
    }
}

pub fn memberships(ups: &[(Var, Regex)], alphabet: &Alphabet) -> Vec<Membership> {
    ups.iter().map(|(v, r)| Membership::new(*v, r.clone(), alphabet)).collect()
}

#[derive(Clone, Debug)]
pub struct WidenConfig {
    /// Largest accepted `m + M`.
    pub cap: usize,
    /// Node limit for the unrolled tree.
    pub max_nodes: usize,
}

impl Default for WidenConfig {
    fn default() -> Self {
        WidenConfig { cap: 5040, max_nodes: 200_000 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WidenError {
    #[error("unrolling bound exceeded: {0}")]
    CapExceeded(String),
}

#[derive(Clone, Debug)]
pub struct Widened {
    pub tree: ReductionTree,
    pub m: usize,
    pub big_m: usize,
    /// Number of subtree copies made.
    pub copies: usize,
}

/// Live states of the product of all constraint automata. Tuple states are
/// explored from the joint initial state and counted when every component
/// can still reach acceptance. Stops counting past `limit`.
pub fn product_states(ms: &[Membership], limit: usize) -> usize {
    if ms.is_empty() {
        return 1;
    }
    let live: Vec<Vec<bool>> = ms.iter().map(|m| m.dfa.live()).collect();
    let k = ms[0].dfa.alphabet.len();
    let start: Vec<usize> = ms.iter().map(|m| m.dfa.initial).collect();
    let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
    seen.insert(start.clone(), ());
    let mut queue = VecDeque::from([start]);
    let mut count = 0;
    while let Some(t) = queue.pop_front() {
        if t.iter().zip(&live).all(|(&q, l)| l[q]) {
            count += 1;
            if count > limit {
                return count;
            }
        }
        for a in 0..k {
            let nxt: Vec<usize> = t.iter().zip(ms).map(|(&q, m)| m.dfa.delta[q][a]).collect();
            if seen.insert(nxt.clone(), ()).is_none() {
                queue.push_back(nxt);
            }
        }
    }
    count.max(1)
}

/// `m` and `M = m!` for the constraints, or `CapExceeded` when `m + M`
/// passes the cap.
pub fn unroll_bound(ms: &[Membership], cap: usize) -> Result<(usize, usize), WidenError> {
    let m = product_states(ms, cap);
    let mut fact: usize = 1;
    for i in 2..=m {
        fact = fact.saturating_mul(i);
        if fact > cap {
            break;
        }
    }
    if m.saturating_add(fact) > cap {
        return Err(WidenError::CapExceeded(format!("m={m} gives m+m! above {cap}")));
    }
    Ok((m, fact))
}

struct Snapshot {
    /// Subtree nodes in DFS order; the first is the companion.
    nodes: Vec<usize>,
    edges: Vec<usize>,
    backlinks: Vec<BackLink>,
}

fn snapshot(t: &ReductionTree, top: usize) -> Snapshot {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut stack = vec![top];
    while let Some(n) = stack.pop() {
        nodes.push(n);
        edges.extend(&t.nodes[n].children);
        stack.extend(t.nodes[n].children.iter().rev().map(|&e| t.edges[e].child));
    }
    let inside: std::collections::HashSet<usize> = nodes.iter().copied().collect();
    let backlinks = t.backlinks.iter().filter(|b| inside.contains(&b.bud)).cloned().collect();
    Snapshot { nodes, edges, backlinks }
}

fn rename_term(t: &StringTerm, rho: &BTreeMap<Var, Var>) -> StringTerm {
    StringTerm(
        t.0.iter()
            .map(|s| match s {
                Symbol::Var(v) => Symbol::Var(*rho.get(v).unwrap_or(v)),
                l => *l,
            })
            .collect(),
    )
}

fn positional_renaming(t: &ReductionTree, from: usize, to: usize) -> Vec<Subst> {
    let map = find_renaming(&t.nodes[from].system, &t.nodes[to].system, 0)
        .expect("copied systems agree up to renaming");
    map.into_iter().filter(|(a, b)| a != b).map(|(a, b)| Subst::rename(a, b)).collect()
}

struct Copy {
    top: usize,
    /// New ids of the buds that linked to the snapshot's top.
    group: Vec<usize>,
}

/// Clones the snapshot under fresh names `name@k`, unattached.
fn clone_snapshot(t: &mut ReductionTree, s: &Snapshot, vocab: &mut Vocab, k: usize, base_depth: usize) -> Copy {
    let mut rho: BTreeMap<Var, Var> = BTreeMap::new();
    let fresh = |v: Var, vocab: &mut Vocab, rho: &mut BTreeMap<Var, Var>| {
        rho.entry(v).or_insert_with(|| {
            let name = format!("{}@{k}", vocab.name(v));
            vocab.fresh_named(&name, v)
        });
    };
    for &n in &s.nodes {
        for v in t.nodes[n].system.vars() {
            fresh(v, vocab, &mut rho);
        }
    }
    for &e in &s.edges {
        for sub in &t.edges[e].substs {
            fresh(sub.target, vocab, &mut rho);
            for v in sub.replacement.vars() {
                fresh(v, vocab, &mut rho);
            }
        }
    }
    let top = s.nodes[0];
    let top_depth = t.nodes[top].depth;
    let wm = vocab.len() as u32;
    let mut id: HashMap<usize, usize> = HashMap::new();
    for &n in &s.nodes {
        let old = &t.nodes[n];
        let node = Node {
            system: crate::reduce::rename_system(&old.system, &rho),
            status: old.status,
            parent: None,
            in_edge: None,
            depth: base_depth + old.depth - top_depth,
            watermark: wm,
            children: Vec::new(),
            live: Vec::new(),
        };
        id.insert(n, t.nodes.len());
        t.nodes.push(node);
    }
    for &e in &s.edges {
        let old = t.edges[e].clone();
        let (p, c) = (id[&old.parent], id[&old.child]);
        let substs = old
            .substs
            .iter()
            .map(|x| Subst::new(*rho.get(&x.target).unwrap_or(&x.target), rename_term(&x.replacement, &rho)))
            .collect();
        let ne = t.edges.len();
        t.edges.push(Edge { parent: p, substs, child: c });
        t.nodes[p].children.push(ne);
        t.nodes[c].parent = Some(p);
        t.nodes[c].in_edge = Some(ne);
    }
    let mut group = Vec::new();
    for b in &s.backlinks {
        let nb = id[&b.bud];
        if b.companion == top {
            group.push(nb);
            continue;
        }
        let comp = id.get(&b.companion).copied().unwrap_or(b.companion);
        let renaming = positional_renaming(t, nb, comp);
        t.backlinks.push(BackLink { bud: nb, companion: comp, renaming });
    }
    Copy { top: id[&top], group }
}

/// Unrolls every cycle of `tree` against the constraints.
///
/// Companions are processed deepest first. For a companion `c`, all buds
/// linking to it are expanded breadth-first: a bud at level `L <= m+M`
/// receives a renamed copy of the subtree of `c` through a renaming edge,
/// and the copy's own buds continue at level `L+1`. Buds past the last
/// level link to the top of copy `m+1`.
pub fn widen_tree(
    tree: &ReductionTree,
    ms: &[Membership],
    vocab: &mut Vocab,
    cfg: &WidenConfig,
) -> Result<Widened, WidenError> {
    let (m, big_m) = unroll_bound(ms, cfg.cap)?;
    let mut t = tree.clone();
    if ms.is_empty() {
        return Ok(Widened { tree: t, m, big_m, copies: 0 });
    }
    let total = m + big_m;
    let mut companions: Vec<usize> = Vec::new();
    for b in &t.backlinks {
        if !companions.contains(&b.companion) {
            companions.push(b.companion);
        }
    }
    companions.sort_by_key(|&c| (std::cmp::Reverse(t.nodes[c].depth), c));
    let mut copies = 0;
    for c in companions {
        let snap = snapshot(&t, c);
        let mut queue: VecDeque<(usize, usize, Vec<usize>)> = t
            .backlinks
            .iter()
            .filter(|b| b.companion == c)
            .map(|b| (b.bud, 1, vec![c]))
            .collect();
        t.backlinks.retain(|b| b.companion != c);
        while let Some((bud, level, chain)) = queue.pop_front() {
            if level > total {
                let target = chain[m + 1];
                let renaming = positional_renaming(&t, bud, target);
                t.backlinks.push(BackLink { bud, companion: target, renaming });
                continue;
            }
            if t.nodes.len() + snap.nodes.len() > cfg.max_nodes {
                return Err(WidenError::CapExceeded(format!("more than {} nodes", cfg.max_nodes)));
            }
            copies += 1;
            let depth = t.nodes[bud].depth + 1;
            let copy = clone_snapshot(&mut t, &snap, vocab, copies, depth);
            let substs = positional_renaming(&t, bud, copy.top);
            let e = t.edges.len();
            t.edges.push(Edge { parent: bud, substs, child: copy.top });
            t.nodes[bud].children.push(e);
            t.nodes[bud].status = Status::Interior;
            t.nodes[copy.top].parent = Some(bud);
            t.nodes[copy.top].in_edge = Some(e);
            for g in copy.group {
                let mut ch = chain.clone();
                ch.push(copy.top);
                queue.push_back((g, level + 1, ch));
            }
        }
    }
    t.compute_live();
    Ok(Widened { tree: t, m, big_m, copies })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(Assignment),
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Unknown(_) => "UNKNOWN",
        }
    }
}

/// Outcome of the straight-line check at one leaf.
#[derive(Clone, Debug)]
pub struct LeafReport {
    pub root: usize,
    pub leaf: usize,
    /// Definitions and constraints, `x=ax_1 ∧ x_1=ε ∧ x∈a*`.
    pub formula: String,
    pub verdict: Verdict,
}

impl LeafReport {
    pub fn row(&self) -> String {
        format!("(e{},e{}) {} → {}", self.root, self.leaf, self.formula, self.verdict.label())
    }
}

/// Limits for the free-variable search in [`evaluate_leaf`].
const MONOID_LIMIT: usize = 50_000;
const SEARCH_LIMIT: usize = 1_000_000;

/// Checks the leaf's straight-line formula against the constraints.
///
/// The definitions on the root path are composed into one term per root
/// variable. Variables left undetermined are free; for them the search
/// ranges over the transition monoid of the constraint automata, which is
/// finite, so the answer is exact.
pub fn evaluate_leaf(tree: &ReductionTree, leaf: usize, ms: &[Membership], vocab: &Vocab) -> LeafReport {
    let path = tree.path_edges(tree.root, leaf);
    let mut parts: Vec<String> = Vec::new();
    for &e in &path {
        for s in &tree.edges[e].substs {
            let rhs = if s.replacement.is_empty() { "ε".to_string() } else { s.replacement.show(vocab) };
            parts.push(format!("{}={}", vocab.name(s.target), rhs));
        }
    }
    parts.extend(ms.iter().map(|m| m.show(vocab)));
    let formula = if parts.is_empty() { "true".into() } else { parts.join(" ∧ ") };
    let defs = compose(tree, &path);
    let verdict = solve_straight_line(tree, &defs, ms);
    LeafReport { root: tree.root, leaf, formula, verdict }
}

/// Bottom-up composition of the path definitions: each variable maps to a
/// term over the variables still free at the leaf.
pub fn compose(tree: &ReductionTree, path: &[usize]) -> BTreeMap<Var, StringTerm> {
    let mut defs: BTreeMap<Var, StringTerm> = BTreeMap::new();
    for &e in path.iter().rev() {
        for s in tree.edges[e].substs.iter().rev() {
            let mut out = Vec::new();
            for sym in &s.replacement.0 {
                match sym {
                    Symbol::Var(v) => match defs.get(v) {
                        Some(t) => out.extend_from_slice(&t.0),
                        None => out.push(*sym),
                    },
                    l => out.push(*l),
                }
            }
            defs.insert(s.target, StringTerm(out));
        }
    }
    defs
}

fn term_of(defs: &BTreeMap<Var, StringTerm>, v: Var) -> StringTerm {
    defs.get(&v).cloned().unwrap_or_else(|| StringTerm::var(v))
}

/// Element of the transition monoid over the disjoint union of all
/// constraint automata.
type Transformer = Vec<usize>;

fn solve_straight_line(tree: &ReductionTree, defs: &BTreeMap<Var, StringTerm>, ms: &[Membership]) -> Verdict {
    let terms: Vec<StringTerm> = ms.iter().map(|m| term_of(defs, m.var)).collect();
    let mut free: Vec<Var> = Vec::new();
    for t in &terms {
        for v in t.vars() {
            if !free.contains(&v) {
                free.push(v);
            }
        }
    }
    let finish = |words: &BTreeMap<Var, String>| -> Verdict {
        let mut out = Assignment::new();
        let mut vars: Vec<Var> = tree.tracked.clone();
        vars.extend(ms.iter().map(|m| m.var));
        for v in vars {
            out.insert(v, term_of(defs, v).eval(words));
        }
        let root = &tree.nodes[tree.root].system;
        let mut full = out.clone();
        for v in root.vars() {
            full.entry(v).or_insert_with(|| term_of(defs, v).eval(words));
        }
        if !root.holds(&full) || !ms.iter().all(|m| m.dfa.accepts(&full[&m.var])) {
            return Verdict::Unknown("leaf assignment failed verification".into());
        }
        Verdict::Sat(out)
    };
    if free.is_empty() {
        let words = BTreeMap::new();
        let ok = terms.iter().zip(ms).all(|(t, m)| m.dfa.accepts(&t.eval(&words)));
        return if ok { finish(&words) } else { Verdict::Unsat };
    }
    let Some((elems, witness)) = transition_monoid(ms) else {
        return Verdict::Unknown(format!("transition monoid above {MONOID_LIMIT} elements"));
    };
    let offsets: Vec<usize> = ms
        .iter()
        .scan(0, |acc, m| {
            let o = *acc;
            *acc += m.dfa.num_states();
            Some(o)
        })
        .collect();
    let alpha = &ms[0].dfa.alphabet;
    let mut choice: Vec<Option<usize>> = vec![None; free.len()];
    let mut steps = 0usize;
    let accepts = |i: usize, choice: &[Option<usize>]| -> Option<bool> {
        let m = &ms[i];
        let mut q = m.dfa.initial;
        for sym in &terms[i].0 {
            q = match sym {
                Symbol::Letter(c) => match alpha.iter().position(|a| a == c) {
                    Some(a) => m.dfa.delta[q][a],
                    None => return Some(false),
                },
                Symbol::Var(v) => {
                    let k = free.iter().position(|f| f == v).expect("free var");
                    let el = &elems[choice[k]?];
                    el[offsets[i] + q] - offsets[i]
                }
            };
        }
        Some(m.dfa.accepting[q])
    };
    let found = search(0, &free, &elems, &mut choice, &mut steps, &|ch| {
        (0..ms.len()).all(|i| accepts(i, ch) != Some(false))
    });
    match found {
        Search::Found => {
            let words: BTreeMap<Var, String> =
                free.iter().zip(&choice).map(|(v, c)| (*v, witness[c.expect("assigned")].clone())).collect();
            finish(&words)
        }
        Search::Exhausted => Verdict::Unsat,
        Search::Budget => Verdict::Unknown(format!("free-variable search above {SEARCH_LIMIT} steps")),
    }
}

enum Search {
    Found,
    Exhausted,
    Budget,
}

/// Backtracking over monoid elements for the free variables. `ok` treats
/// unassigned variables as unknown and fails only on a definite reject.
fn search(
    k: usize,
    free: &[Var],
    elems: &[Transformer],
    choice: &mut Vec<Option<usize>>,
    steps: &mut usize,
    ok: &dyn Fn(&[Option<usize>]) -> bool,
) -> Search {
    if k == free.len() {
        return if ok(choice) { Search::Found } else { Search::Exhausted };
    }
    for i in 0..elems.len() {
        *steps += 1;
        if *steps > SEARCH_LIMIT {
            return Search::Budget;
        }
        choice[k] = Some(i);
        if !ok(choice) {
            continue;
        }
        match search(k + 1, free, elems, choice, steps, ok) {
            Search::Exhausted => {}
            r => return r,
        }
    }
    choice[k] = None;
    Search::Exhausted
}

/// Breadth-first closure of the letter transformers from the identity,
/// with a shortest witness word per element.
fn transition_monoid(ms: &[Membership]) -> Option<(Vec<Transformer>, Vec<String>)> {
    let alpha = ms[0].dfa.alphabet.clone();
    let mut gens: Vec<Transformer> = vec![Vec::new(); alpha.len()];
    let mut id: Transformer = Vec::new();
    let mut off = 0;
    for m in ms {
        for q in 0..m.dfa.num_states() {
            id.push(off + q);
            for (a, g) in gens.iter_mut().enumerate() {
                g.push(off + m.dfa.delta[q][a]);
            }
        }
        off += m.dfa.num_states();
    }
    let mut index: HashMap<Transformer, usize> = HashMap::new();
    index.insert(id.clone(), 0);
    let mut elems = vec![id];
    let mut witness = vec![String::new()];
    let mut i = 0;
    while i < elems.len() {
        for (a, g) in gens.iter().enumerate() {
            let nxt: Transformer = elems[i].iter().map(|&q| g[q]).collect();
            if !index.contains_key(&nxt) {
                if elems.len() >= MONOID_LIMIT {
                    return None;
                }
                index.insert(nxt.clone(), elems.len());
                elems.push(nxt);
                witness.push(format!("{}{}", witness[i], alpha[a]));
            }
        }
        i += 1;
    }
    Some((elems, witness))
}

/// Result of widening plus leaf evaluation.
#[derive(Clone, Debug)]
pub struct Decision {
    pub widened: Widened,
    pub reports: Vec<LeafReport>,
    pub verdict: Verdict,
}

/// Widens `tree` and evaluates every satisfiable leaf; the first
/// satisfiable report wins.
pub fn decide(
    tree: &ReductionTree,
    ms: &[Membership],
    vocab: &mut Vocab,
    cfg: &WidenConfig,
) -> Result<Decision, WidenError> {
    let widened = widen_tree(tree, ms, vocab, cfg)?;
    let mut reports = Vec::new();
    let mut verdict = Verdict::Unsat;
    for leaf in widened.tree.leaves(Status::SatLeaf) {
        let r = evaluate_leaf(&widened.tree, leaf, ms, vocab);
        match (&r.verdict, &verdict) {
            (Verdict::Sat(_), Verdict::Sat(_)) => {}
            (Verdict::Sat(_), _) => verdict = r.verdict.clone(),
            (Verdict::Unknown(_), Verdict::Unsat) => verdict = r.verdict.clone(),
            _ => {}
        }
        reports.push(r);
    }
    Ok(Decision { widened, reports, verdict })
}
