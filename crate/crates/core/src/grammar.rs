//! Solution grammars read off closed reduction trees.
//!
//! [`extract_edtl`] gives one deterministic table per root path ending in a
//! satisfiable leaf or a bud. [`extract_cfg`] gives a context-free grammar
//! whose nonterminals are (variable, node) pairs; for trees with at most
//! one undetermined variable per node it generates exactly the solution
//! words, otherwise a superset.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::ast::{Alphabet, StringTerm, Symbol, Var, Vocab};
use crate::reduce::{renaming_map, ReductionTree, Status};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GSym {
    T(char),
    N(String),
}

pub type Rhs = Vec<GSym>;

pub fn show_rhs(rhs: &[GSym]) -> String {
    if rhs.is_empty() {
        return "<eps>".into();
    }
    rhs.iter()
        .map(|s| match s {
            GSym::T(c) => c.to_string(),
            GSym::N(n) => n.clone(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("unknown nonterminal {0}")]
    UnknownNonterminal(String),
}

/// Extended deterministic table system. A table maps each nonterminal to
/// at most one right-hand side; nonterminals it does not mention rewrite
/// to themselves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edt0l {
    pub nonterminals: BTreeSet<String>,
    pub alphabet: Vec<char>,
    pub tables: Vec<BTreeMap<String, Rhs>>,
    pub start: String,
    /// Bound on the nonterminals in any sentential form.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub start: String,
    pub productions: Vec<(String, Rhs)>,
    pub alphabet: Vec<char>,
    /// False when the grammar may generate more than the solution set.
    pub exact: bool,
}

fn sym_of(s: &Symbol, name: &dyn Fn(Var) -> String) -> GSym {
    match s {
        Symbol::Letter(c) => GSym::T(*c),
        Symbol::Var(v) => GSym::N(name(*v)),
    }
}

fn term_rhs(t: &StringTerm, name: &dyn Fn(Var) -> String) -> Rhs {
    t.0.iter().map(|s| sym_of(s, name)).collect()
}

fn root_lhs(tree: &ReductionTree) -> StringTerm {
    let mut out = StringTerm::eps();
    for e in &tree.nodes[tree.root].system.0 {
        out = out.concat(&e.lhs);
    }
    out
}

fn start_name(vocab: &Vocab) -> String {
    let mut s = "S".to_string();
    while vocab.lookup(&s).is_some() {
        s.push('\'');
    }
    s
}

fn tree_letters(tree: &ReductionTree, alphabet: Option<&Alphabet>) -> Vec<char> {
    let mut set: BTreeSet<char> = alphabet.map(|a| a.letters().iter().copied().collect()).unwrap_or_default();
    for n in &tree.nodes {
        for e in &n.system.0 {
            set.extend(e.lhs.letters());
            set.extend(e.rhs.letters());
        }
    }
    for e in &tree.edges {
        for s in &e.substs {
            set.extend(s.replacement.letters());
        }
    }
    set.into_iter().collect()
}

/// One table per root path to a satisfiable leaf or bud: the start rule,
/// one rule per substitution on the path, and for buds the back-link
/// renaming read as `bud-var -> companion-var`.
pub fn extract_edtl(tree: &ReductionTree, vocab: &Vocab) -> Edt0l {
    let name = |v: Var| vocab.name(v).to_string();
    let start = start_name(vocab);
    let lhs = term_rhs(&root_lhs(tree), &name);
    let mut tables = Vec::new();
    let mut nonterminals: BTreeSet<String> = BTreeSet::new();
    nonterminals.insert(start.clone());
    for (i, n) in tree.nodes.iter().enumerate() {
        if !matches!(n.status, Status::SatLeaf | Status::Bud) {
            continue;
        }
        let mut table: BTreeMap<String, Rhs> = BTreeMap::new();
        table.insert(start.clone(), lhs.clone());
        for e in tree.path_edges(tree.root, i) {
            for s in &tree.edges[e].substs {
                table.entry(name(s.target)).or_insert_with(|| term_rhs(&s.replacement, &name));
            }
        }
        if let Some(b) = tree.backlink_of(i) {
            for (bv, cv) in renaming_map(&b.renaming) {
                table.entry(name(bv)).or_insert_with(|| vec![GSym::N(name(cv))]);
            }
        }
        for (k, rhs) in &table {
            nonterminals.insert(k.clone());
            for s in rhs {
                if let GSym::N(m) = s {
                    nonterminals.insert(m.clone());
                }
            }
        }
        tables.push(table);
    }
    Edt0l {
        nonterminals,
        alphabet: tree_letters(tree, None),
        tables,
        start,
        index: tree.max_node_length().max(1),
    }
}

impl Edt0l {
    /// Right-hand side for `x` in table `k`, identity when absent.
    pub fn production(&self, k: usize, x: &str) -> Rhs {
        self.tables[k].get(x).cloned().unwrap_or_else(|| vec![GSym::N(x.to_string())])
    }

    /// Replaces the start rule in every table, e.g. to read off the values
    /// of one variable.
    pub fn with_start_rhs(&self, rhs: Rhs) -> Edt0l {
        let mut g = self.clone();
        for t in &mut g.tables {
            t.insert(g.start.clone(), rhs.clone());
        }
        g
    }

    /// Union of all table rules as a context-free grammar.
    pub fn to_cfg(&self) -> Cfg {
        let mut seen: HashSet<(String, Rhs)> = HashSet::new();
        let mut productions = Vec::new();
        for t in &self.tables {
            for (k, rhs) in t {
                if seen.insert((k.clone(), rhs.clone())) {
                    productions.push((k.clone(), rhs.clone()));
                }
            }
        }
        Cfg { start: self.start.clone(), productions, alphabet: self.alphabet.clone(), exact: false }
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, t) in self.tables.iter().enumerate() {
            out.push_str(&format!("-- table {}\n", k + 1));
            // start rule first, then the rest by name
            if let Some(r) = t.get(&self.start) {
                out.push_str(&format!("{} -> {}\n", self.start, show_rhs(r)));
            }
            for (x, r) in t {
                if *x != self.start {
                    out.push_str(&format!("{x} -> {}\n", show_rhs(r)));
                }
            }
        }
        out
    }
}

/// Words of length at most `max_len` derivable from the start by parallel
/// rewriting, and the largest nonterminal count of a sentential form on a
/// derivation that reaches one of those words.
pub fn enumerate_edtl(g: &Edt0l, max_len: usize) -> (BTreeSet<String>, usize) {
    const FORM_LIMIT: usize = 200_000;
    let nt_cap = g.index + max_len + 4;
    let start = vec![GSym::N(g.start.clone())];
    let mut ids: HashMap<Rhs, usize> = HashMap::new();
    let mut forms: Vec<Rhs> = vec![start.clone()];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new()];
    ids.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut words = BTreeSet::new();
    let mut terminal: Vec<usize> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let form = forms[i].clone();
        if form.iter().all(|s| matches!(s, GSym::T(_))) {
            words.insert(show_word(&form));
            terminal.push(i);
            continue;
        }
        for k in 0..g.tables.len() {
            let mut next = Vec::new();
            for s in &form {
                match s {
                    GSym::T(_) => next.push(s.clone()),
                    GSym::N(x) => next.extend(g.production(k, x)),
                }
            }
            let terms = next.iter().filter(|s| matches!(s, GSym::T(_))).count();
            let nts = next.len() - terms;
            if terms > max_len || nts > nt_cap {
                continue;
            }
            match ids.get(&next) {
                Some(&j) => parents[j].push(i),
                None if forms.len() < FORM_LIMIT => {
                    let j = forms.len();
                    ids.insert(next.clone(), j);
                    forms.push(next);
                    parents.push(vec![i]);
                    queue.push_back(j);
                }
                None => {}
            }
        }
    }
    let mut useful = vec![false; forms.len()];
    let mut stack = terminal;
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut useful[i], true) {
            continue;
        }
        stack.extend(parents[i].iter().copied());
    }
    let widest = (0..forms.len())
        .filter(|&i| useful[i])
        .map(|i| forms[i].iter().filter(|s| matches!(s, GSym::N(_))).count())
        .max()
        .unwrap_or(0);
    (words, widest)
}

fn show_word(form: &[GSym]) -> String {
    form.iter()
        .map(|s| match s {
            GSym::T(c) => *c,
            GSym::N(_) => '?',
        })
        .collect()
}

/// Context-free grammar over (variable, node) nonterminals: `x` at the
/// root and `x#n` at node `n`.
///
/// An edge substituting `x` gives `x#n -> σ(x)` over the child's
/// nonterminals; other live variables pass through with a unit rule; a bud
/// maps each variable through the back-link renaming to the companion.
/// Variables still free at a satisfiable leaf derive every word.
pub fn extract_cfg(tree: &ReductionTree, vocab: &Vocab, alphabet: &Alphabet) -> Cfg {
    let nt = |v: Var, n: usize| {
        if n == tree.root {
            vocab.name(v).to_string()
        } else {
            format!("{}#{n}", vocab.name(v))
        }
    };
    let letters = tree_letters(tree, Some(alphabet));
    let start = start_name(vocab);
    let mut productions: Vec<(String, Rhs)> = Vec::new();
    let root = tree.root;
    productions.push((start.clone(), term_rhs(&root_lhs(tree), &|v| nt(v, root))));
    let mut exact = true;
    for (i, n) in tree.nodes.iter().enumerate() {
        if n.live.len() > 1 {
            exact = false;
        }
        match n.status {
            Status::Interior => {
                for &e in &n.children {
                    let edge = &tree.edges[e];
                    let c = edge.child;
                    if tree.nodes[c].status == Status::UnsatLeaf {
                        continue;
                    }
                    for &v in &n.live {
                        let rhs = match edge.substs.iter().find(|s| s.target == v) {
                            Some(s) => term_rhs(&s.replacement, &|w| nt(w, c)),
                            None => vec![GSym::N(nt(v, c))],
                        };
                        productions.push((nt(v, i), rhs));
                    }
                }
            }
            Status::Bud => {
                if let Some(b) = tree.backlink_of(i) {
                    let map = renaming_map(&b.renaming);
                    for &v in &n.live {
                        let cv = *map.get(&v).unwrap_or(&v);
                        productions.push((nt(v, i), vec![GSym::N(nt(cv, b.companion))]));
                    }
                }
            }
            Status::SatLeaf => {
                for &v in &n.live {
                    let x = nt(v, i);
                    productions.push((x.clone(), Vec::new()));
                    for &c in &letters {
                        productions.push((x.clone(), vec![GSym::T(c), GSym::N(x.clone())]));
                    }
                }
            }
            Status::UnsatLeaf | Status::Open => {}
        }
    }
    let g = Cfg { start, productions, alphabet: letters, exact };
    g.pruned()
}

impl Cfg {
    /// Parses `X -> s` lines. Symbols are space separated; a symbol is a
    /// nonterminal when it has a rule, else a single-letter terminal.
    pub fn parse(src: &str) -> Result<Cfg, GrammarError> {
        let mut raw: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("--") {
                continue;
            }
            let (l, r) = line
                .split_once("->")
                .ok_or_else(|| GrammarError::Parse(i + 1, "expected '->'".into()))?;
            let toks = r.split_whitespace().filter(|t| *t != "<eps>").map(String::from).collect();
            raw.push((i + 1, l.trim().to_string(), toks));
        }
        let heads: BTreeSet<String> = raw.iter().map(|(_, l, _)| l.clone()).collect();
        let mut alphabet = BTreeSet::new();
        let mut productions = Vec::new();
        for (line, l, toks) in raw {
            let mut rhs = Vec::new();
            for t in toks {
                if heads.contains(&t) {
                    rhs.push(GSym::N(t));
                } else {
                    let mut cs = t.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) => {
                            alphabet.insert(c);
                            rhs.push(GSym::T(c));
                        }
                        _ => return Err(GrammarError::Parse(line, format!("unknown symbol {t}"))),
                    }
                }
            }
            productions.push((l, rhs));
        }
        let start = productions
            .first()
            .map(|(l, _)| l.clone())
            .ok_or_else(|| GrammarError::Parse(0, "no productions".into()))?;
        Ok(Cfg { start, productions, alphabet: alphabet.into_iter().collect(), exact: true })
    }

    /// Nonterminals in order of first appearance.
    pub fn nonterminals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |x: &String| {
            if !out.contains(x) {
                out.push(x.clone());
            }
        };
        add(&self.start);
        for (l, r) in &self.productions {
            add(l);
            for s in r {
                if let GSym::N(x) = s {
                    add(x);
                }
            }
        }
        out
    }

    /// Same productions, new start.
    pub fn restart(&self, x: &str) -> Result<Cfg, GrammarError> {
        if !self.nonterminals().iter().any(|n| n == x) {
            return Err(GrammarError::UnknownNonterminal(x.to_string()));
        }
        Ok(Cfg { start: x.to_string(), ..self.clone() })
    }

    /// Drops unproductive and unreachable nonterminals with their rules.
    pub fn pruned(&self) -> Cfg {
        let mut productive: HashSet<&str> = HashSet::new();
        loop {
            let before = productive.len();
            for (l, r) in &self.productions {
                if r.iter().all(|s| match s {
                    GSym::T(_) => true,
                    GSym::N(x) => productive.contains(x.as_str()),
                }) {
                    productive.insert(l);
                }
            }
            if productive.len() == before {
                break;
            }
        }
        let useful: Vec<&(String, Rhs)> = self
            .productions
            .iter()
            .filter(|(l, r)| {
                productive.contains(l.as_str())
                    && r.iter().all(|s| !matches!(s, GSym::N(x) if !productive.contains(x.as_str())))
            })
            .collect();
        let mut reach: HashSet<&str> = HashSet::from([self.start.as_str()]);
        loop {
            let before = reach.len();
            for (l, r) in &useful {
                if reach.contains(l.as_str()) {
                    for s in r {
                        if let GSym::N(x) = s {
                            reach.insert(x);
                        }
                    }
                }
            }
            if reach.len() == before {
                break;
            }
        }
        let productions = useful
            .into_iter()
            .filter(|(l, _)| reach.contains(l.as_str()))
            .cloned()
            .collect();
        Cfg { productions, ..self.clone() }
    }

    pub fn dump(&self) -> String {
        self.productions.iter().map(|(l, r)| format!("{l} -> {}\n", show_rhs(r))).collect()
    }
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Words of length at most `max_len` generated from the start symbol,
/// computed as a least fixpoint of per-nonterminal word sets.
pub fn enumerate_cfg(g: &Cfg, max_len: usize) -> BTreeSet<String> {
    let mut lang: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    loop {
        let mut changed = false;
        for (l, r) in &g.productions {
            let mut acc: BTreeSet<String> = BTreeSet::from([String::new()]);
            for s in r {
                let mut next = BTreeSet::new();
                match s {
                    GSym::T(c) => {
                        for w in &acc {
                            if w.chars().count() < max_len {
                                next.insert(format!("{w}{c}"));
                            }
                        }
                    }
                    GSym::N(x) => {
                        if let Some(ws) = lang.get(x.as_str()) {
                            for w in &acc {
                                for u in ws {
                                    if w.chars().count() + u.chars().count() <= max_len {
                                        next.insert(format!("{w}{u}"));
                                    }
                                }
                            }
                        }
                    }
                }
                acc = next;
                if acc.is_empty() {
                    break;
                }
            }
            let entry = lang.entry(l.as_str()).or_default();
            for w in acc {
                changed |= entry.insert(w);
            }
        }
        if !changed {
            break;
        }
    }
    lang.remove(g.start.as_str()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{equation, EquationSystem};
    use crate::reduce::{build_tree, Budget};

    fn abx_xba() -> (ReductionTree, Vocab) {
        let mut v = Vocab::new();
        let es = EquationSystem(vec![equation(&mut v, &["x"], "abx=xba")]);
        let t = build_tree(&es, &mut v, &Budget::default()).unwrap();
        (t, v)
    }

    #[test]
    fn abx_xba_tables() {
        let (t, v) = abx_xba();
        let g = extract_edtl(&t, &v);
        assert_eq!(g.tables.len(), 2);
        assert_eq!(
            g.dump(),
            "-- table 1\nS -> a b x\nx -> a x_1\nx_1 -> <eps>\n\
             -- table 2\nS -> a b x\nx -> a x_1\nx_1 -> b x_2\nx_2 -> x\n"
        );
    }

    #[test]
    fn root_leaf_has_one_table() {
        let t = build_tree(&EquationSystem::default(), &mut Vocab::new(), &Budget::default()).unwrap();
        let g = extract_edtl(&t, &Vocab::new());
        assert_eq!(g.tables.len(), 1);
        assert_eq!(g.tables[0]["S"], Vec::<GSym>::new());
    }

    #[test]
    fn cfg_for_abx_xba_is_exact() {
        let (t, v) = abx_xba();
        let g = extract_cfg(&t, &v, &Alphabet::from_letters(['a', 'b']));
        assert!(g.exact);
        let xs = enumerate_cfg(&g.restart("x").unwrap(), 7);
        let want: BTreeSet<String> = ["a", "aba", "ababa", "abababa"].iter().map(|s| s.to_string()).collect();
        assert_eq!(xs, want);
    }

    #[test]
    fn parse_and_dump_round_trip() {
        let src = "S1 -> a b x\nx -> a x1\nx1 -> b x2\nx2 -> x\nx -> x3\nx3 -> a x1\nx1 -> <eps>\n";
        let g = Cfg::parse(src).unwrap();
        assert_eq!(g.dump(), src);
        assert_eq!(g.nonterminals(), ["S1", "x", "x1", "x2", "x3"]);
        assert!(enumerate_cfg(&g, 3).contains("aba"));
        assert!(enumerate_cfg(&Cfg { productions: vec![], ..g }, 5).is_empty());
    }

    #[test]
    fn pruning_drops_dead_rules() {
        let g = Cfg::parse("S -> a\nS -> B\nB -> b B\nC -> c").unwrap().pruned();
        assert_eq!(g.dump(), "S -> a\n");
    }
}
