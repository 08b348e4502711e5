//! Finite automata over a small explicit alphabet.
//!
//! Regexes compile through a Thompson NFA, the subset construction and
//! Hopcroft minimization. `Complement` and `Intersect` subterms are compiled
//! to DFAs first and embedded, so every operator is handled structurally.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::ast::{Alphabet, Regex};

/// A complete DFA. `delta[q][i]` is the successor of `q` on `alphabet[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub alphabet: Vec<char>,
    pub delta: Vec<Vec<usize>>,
    pub initial: usize,
    pub accepting: Vec<bool>,
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    fn sym(&self, c: char) -> Option<usize> {
        self.alphabet.binary_search(&c).ok()
    }

    pub fn step(&self, q: usize, c: char) -> Option<usize> {
        self.sym(c).map(|i| self.delta[q][i])
    }

    /// Runs from `q`; letters outside the alphabet reject.
    pub fn run_from(&self, q: usize, w: &str) -> Option<usize> {
        let mut q = q;
        for c in w.chars() {
            q = self.step(q, c)?;
        }
        Some(q)
    }

    pub fn accepts(&self, w: &str) -> bool {
        self.run_from(self.initial, w).is_some_and(|q| self.accepting[q])
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &r in &self.delta[q] {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        seen
    }

    /// States from which an accepting state is reachable.
    pub fn coreachable(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (q, row) in self.delta.iter().enumerate() {
            for &r in row {
                rev[r].push(q);
            }
        }
        let mut seen = self.accepting.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&q| seen[q]).collect();
        while let Some(q) = stack.pop() {
            for &p in &rev[q] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Reachable and co-reachable states.
    pub fn live(&self) -> Vec<bool> {
        let r = self.reachable();
        let c = self.coreachable();
        r.iter().zip(&c).map(|(a, b)| *a && *b).collect()
    }

    /// Number of live states, at least 1. This is the `m` used when unrolling
    /// cycles against a membership constraint; the sink carries no
    /// information about solutions and is not counted.
    pub fn live_count(&self) -> usize {
        self.live().iter().filter(|&&b| b).count().max(1)
    }

    pub fn is_empty(&self) -> bool {
        let r = self.reachable();
        !(0..self.num_states()).any(|q| r[q] && self.accepting[q])
    }

    pub fn is_universal(&self) -> bool {
        complement(self).is_empty()
    }

    /// Same transition structure with another initial state and final set.
    pub fn with_ends(&self, initial: usize, accepting: &[usize]) -> Dfa {
        let mut acc = vec![false; self.num_states()];
        for &q in accepting {
            acc[q] = true;
        }
        Dfa { alphabet: self.alphabet.clone(), delta: self.delta.clone(), initial, accepting: acc }
    }

    /// Re-expresses the automaton over a larger alphabet; new letters go to
    /// a fresh sink.
    pub fn extend_alphabet(&self, alphabet: &[char]) -> Dfa {
        if alphabet == self.alphabet.as_slice() {
            return self.clone();
        }
        let sink = self.num_states();
        let mut delta = Vec::with_capacity(sink + 1);
        for row in &self.delta {
            delta.push(
                alphabet
                    .iter()
                    .map(|&c| self.sym(c).map(|i| row[i]).unwrap_or(sink))
                    .collect(),
            );
        }
        delta.push(vec![sink; alphabet.len()]);
        let mut accepting = self.accepting.clone();
        accepting.push(false);
        minimize(&Dfa { alphabet: alphabet.to_vec(), delta, initial: self.initial, accepting })
    }

    /// Enumerates accepted words of length at most `n`, shortest first.
    pub fn words_up_to(&self, n: usize) -> Vec<String> {
        let co = self.coreachable();
        let mut out = Vec::new();
        let mut layer = vec![(String::new(), self.initial)];
        for len in 0..=n {
            let mut next = Vec::new();
            for (w, q) in &layer {
                if self.accepting[*q] {
                    out.push(w.clone());
                }
                if len < n {
                    for (i, &c) in self.alphabet.iter().enumerate() {
                        let r = self.delta[*q][i];
                        if co[r] {
                            let mut x = w.clone();
                            x.push(c);
                            next.push((x, r));
                        }
                    }
                }
            }
            layer = next;
        }
        out
    }

    /// A shortest accepted word, if any.
    pub fn shortest_word(&self) -> Option<String> {
        let mut prev: Vec<Option<(usize, char)>> = vec![None; self.num_states()];
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(q) = queue.pop_front() {
            if self.accepting[q] {
                let mut w = Vec::new();
                let mut cur = q;
                while let Some((p, c)) = prev[cur] {
                    w.push(c);
                    cur = p;
                }
                w.reverse();
                return Some(w.into_iter().collect());
            }
            for (i, &r) in self.delta[q].iter().enumerate() {
                if !seen[r] {
                    seen[r] = true;
                    prev[r] = Some((q, self.alphabet[i]));
                    queue.push_back(r);
                }
            }
        }
        None
    }
}

/// Thompson NFA. Letter transitions are indexed into the alphabet.
struct Nfa {
    eps: Vec<Vec<usize>>,
    trans: Vec<Vec<(usize, usize)>>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.trans.push(Vec::new());
        self.eps.len() - 1
    }

    /// Builds a fragment for `r` and returns its (start, end) pair.
    fn build(&mut self, r: &Regex, alpha: &[char]) -> (usize, usize) {
        let idx = |c: &char| alpha.binary_search(c).expect("letter outside alphabet");
        match r {
            Regex::Empty => (self.state(), self.state()),
            Regex::Epsilon => {
                let s = self.state();
                let e = self.state();
                self.eps[s].push(e);
                (s, e)
            }
            Regex::Letter(c) => {
                let s = self.state();
                let e = self.state();
                self.trans[s].push((idx(c), e));
                (s, e)
            }
            Regex::AnyLetter => {
                let s = self.state();
                let e = self.state();
                for i in 0..alpha.len() {
                    self.trans[s].push((i, e));
                }
                (s, e)
            }
            Regex::Word(w) => {
                let s = self.state();
                let mut cur = s;
                for c in w.chars() {
                    let n = self.state();
                    self.trans[cur].push((idx(&c), n));
                    cur = n;
                }
                (s, cur)
            }
            Regex::Concat(rs) => {
                let s = self.state();
                let mut cur = s;
                for sub in rs {
                    let (a, b) = self.build(sub, alpha);
                    self.eps[cur].push(a);
                    cur = b;
                }
                (s, cur)
            }
            Regex::Union(rs) => {
                let s = self.state();
                let e = self.state();
                for sub in rs {
                    let (a, b) = self.build(sub, alpha);
                    self.eps[s].push(a);
                    self.eps[b].push(e);
                }
                (s, e)
            }
            Regex::Star(sub) => {
                let s = self.state();
                let e = self.state();
                let (a, b) = self.build(sub, alpha);
                self.eps[s].push(a);
                self.eps[s].push(e);
                self.eps[b].push(a);
                self.eps[b].push(e);
                (s, e)
            }
            Regex::Complement(_) | Regex::Intersect(_) => {
                let d = compile(r, alpha);
                self.embed(&d)
            }
        }
    }

    fn embed(&mut self, d: &Dfa) -> (usize, usize) {
        let base = self.eps.len();
        for _ in 0..d.num_states() {
            self.state();
        }
        let e = self.state();
        for q in 0..d.num_states() {
            for (i, &r) in d.delta[q].iter().enumerate() {
                self.trans[base + q].push((i, base + r));
            }
            if d.accepting[q] {
                self.eps[base + q].push(e);
            }
        }
        (base + d.initial, e)
    }

    fn closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for &r in &self.eps[q] {
                if set.insert(r) {
                    stack.push(r);
                }
            }
        }
    }
}

fn determinize(nfa: &Nfa, start: usize, end: usize, alpha: &[char]) -> Dfa {
    let mut init = BTreeSet::from([start]);
    nfa.closure(&mut init);
    let mut ids: HashMap<BTreeSet<usize>, usize> = HashMap::new();
    let mut sets = vec![init.clone()];
    ids.insert(init, 0);
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < sets.len() {
        let cur = sets[i].clone();
        let mut row = Vec::with_capacity(alpha.len());
        for a in 0..alpha.len() {
            let mut next = BTreeSet::new();
            for &q in &cur {
                for &(s, r) in &nfa.trans[q] {
                    if s == a {
                        next.insert(r);
                    }
                }
            }
            nfa.closure(&mut next);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = sets.len();
                    ids.insert(next.clone(), id);
                    sets.push(next);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let accepting = sets.iter().map(|s| s.contains(&end)).collect();
    Dfa { alphabet: alpha.to_vec(), delta, initial: 0, accepting }
}

fn compile(r: &Regex, alpha: &[char]) -> Dfa {
    match r {
        Regex::Complement(sub) => complement(&compile(sub, alpha)),
        Regex::Intersect(rs) => {
            let mut acc = universal(alpha);
            for sub in rs {
                acc = product(&acc, &compile(sub, alpha));
            }
            acc
        }
        _ => {
            let mut nfa = Nfa { eps: Vec::new(), trans: Vec::new() };
            let (s, e) = nfa.build(r, alpha);
            minimize(&determinize(&nfa, s, e, alpha))
        }
    }
}

/// Compiles `r` over Σ extended with any letters `r` mentions.
pub fn regex_to_dfa(r: &Regex, alphabet: &Alphabet) -> Dfa {
    let mut letters: BTreeSet<char> = alphabet.letters().iter().copied().collect();
    r.letters(&mut letters);
    let alpha: Vec<char> = letters.into_iter().collect();
    compile(r, &alpha)
}

pub fn universal(alpha: &[char]) -> Dfa {
    Dfa {
        alphabet: alpha.to_vec(),
        delta: vec![vec![0; alpha.len()]],
        initial: 0,
        accepting: vec![true],
    }
}

pub fn empty(alpha: &[char]) -> Dfa {
    Dfa {
        alphabet: alpha.to_vec(),
        delta: vec![vec![0; alpha.len()]],
        initial: 0,
        accepting: vec![false],
    }
}

pub fn complement(d: &Dfa) -> Dfa {
    let mut out = d.clone();
    out.accepting.iter_mut().for_each(|b| *b = !*b);
    out
}

fn aligned(d1: &Dfa, d2: &Dfa) -> (Dfa, Dfa) {
    if d1.alphabet == d2.alphabet {
        return (d1.clone(), d2.clone());
    }
    let alpha: Vec<char> = d1
        .alphabet
        .iter()
        .chain(&d2.alphabet)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    (d1.extend_alphabet(&alpha), d2.extend_alphabet(&alpha))
}

fn product_with(d1: &Dfa, d2: &Dfa, acc: impl Fn(bool, bool) -> bool) -> Dfa {
    let (d1, d2) = aligned(d1, d2);
    let k = d1.alphabet.len();
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = vec![(d1.initial, d2.initial)];
    ids.insert(pairs[0], 0);
    let mut delta = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let (p, q) = pairs[i];
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            let nxt = (d1.delta[p][a], d2.delta[q][a]);
            let id = *ids.entry(nxt).or_insert_with(|| {
                pairs.push(nxt);
                pairs.len() - 1
            });
            row.push(id);
        }
        delta.push(row);
        i += 1;
    }
    let accepting = pairs.iter().map(|&(p, q)| acc(d1.accepting[p], d2.accepting[q])).collect();
    minimize(&Dfa { alphabet: d1.alphabet.clone(), delta, initial: 0, accepting })
}

/// Product automaton for the intersection.
pub fn product(d1: &Dfa, d2: &Dfa) -> Dfa {
    product_with(d1, d2, |a, b| a && b)
}

pub fn union(d1: &Dfa, d2: &Dfa) -> Dfa {
    product_with(d1, d2, |a, b| a || b)
}

/// Language equality via the symmetric difference.
pub fn equivalent(d1: &Dfa, d2: &Dfa) -> bool {
    product_with(d1, d2, |a, b| a != b).is_empty()
}

/// Hopcroft partition refinement over the reachable part.
pub fn minimize(d: &Dfa) -> Dfa {
    let reach = d.reachable();
    let states: Vec<usize> = (0..d.num_states()).filter(|&q| reach[q]).collect();
    let k = d.alphabet.len();
    let mut inv: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); k]; d.num_states()];
    for &q in &states {
        for a in 0..k {
            inv[d.delta[q][a]][a].push(q);
        }
    }
    let acc: Vec<usize> = states.iter().copied().filter(|&q| d.accepting[q]).collect();
    let rej: Vec<usize> = states.iter().copied().filter(|&q| !d.accepting[q]).collect();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; d.num_states()];
    for b in [acc, rej] {
        if !b.is_empty() {
            for &q in &b {
                block_of[q] = blocks.len();
            }
            blocks.push(b);
        }
    }
    let mut work: Vec<(usize, usize)> = Vec::new();
    let smaller = if blocks.len() == 2 && blocks[1].len() < blocks[0].len() { 1 } else { 0 };
    for a in 0..k {
        work.push((smaller, a));
    }
    while let Some((splitter, a)) = work.pop() {
        let mut pre: Vec<usize> = Vec::new();
        for &q in &blocks[splitter] {
            pre.extend_from_slice(&inv[q][a]);
        }
        let mut touched: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &p in &pre {
            touched.entry(block_of[p]).or_default().push(p);
        }
        for (b, mut hit) in touched {
            hit.sort_unstable();
            hit.dedup();
            if hit.len() == blocks[b].len() {
                continue;
            }
            let rest: Vec<usize> = blocks[b].iter().copied().filter(|q| hit.binary_search(q).is_err()).collect();
            let nb = blocks.len();
            let (keep, moved) = if hit.len() <= rest.len() { (rest, hit) } else { (hit, rest) };
            for &q in &moved {
                block_of[q] = nb;
            }
            blocks[b] = keep;
            blocks.push(moved);
            // `moved` is the smaller half; if (b, c) was pending, b's
            // remainder stays pending too
            for c in 0..k {
                work.push((nb, c));
            }
        }
    }
    // renumber blocks in BFS order from the initial state for stable output
    let mut order = vec![usize::MAX; blocks.len()];
    let mut queue = VecDeque::from([block_of[d.initial]]);
    order[block_of[d.initial]] = 0;
    let mut next = 1;
    let mut seq = Vec::new();
    while let Some(b) = queue.pop_front() {
        seq.push(b);
        let rep = blocks[b][0];
        for a in 0..k {
            let t = block_of[d.delta[rep][a]];
            if order[t] == usize::MAX {
                order[t] = next;
                next += 1;
                queue.push_back(t);
            }
        }
    }
    let delta = seq
        .iter()
        .map(|&b| (0..k).map(|a| order[block_of[d.delta[blocks[b][0]][a]]]).collect())
        .collect();
    let accepting = seq.iter().map(|&b| d.accepting[blocks[b][0]]).collect();
    Dfa { alphabet: d.alphabet.clone(), delta, initial: 0, accepting }
}

/// Smart constructors that keep state-elimination output readable.
pub mod re {
    use crate::ast::Regex;

    pub fn concat(a: Regex, b: Regex) -> Regex {
        match (a, b) {
            (Regex::Empty, _) | (_, Regex::Empty) => Regex::Empty,
            (Regex::Epsilon, x) | (x, Regex::Epsilon) => x,
            (Regex::Concat(mut xs), Regex::Concat(ys)) => {
                xs.extend(ys);
                Regex::Concat(xs)
            }
            (Regex::Concat(mut xs), y) => {
                xs.push(y);
                Regex::Concat(xs)
            }
            (x, Regex::Concat(mut ys)) => {
                ys.insert(0, x);
                Regex::Concat(ys)
            }
            (x, y) => Regex::Concat(vec![x, y]),
        }
    }

    pub fn union(a: Regex, b: Regex) -> Regex {
        match (a, b) {
            (Regex::Empty, x) | (x, Regex::Empty) => x,
            (x, y) if x == y => x,
            (Regex::Union(mut xs), Regex::Union(ys)) => {
                for y in ys {
                    if !xs.contains(&y) {
                        xs.push(y);
                    }
                }
                Regex::Union(xs)
            }
            (Regex::Union(mut xs), y) | (y, Regex::Union(mut xs)) => {
                if !xs.contains(&y) {
                    xs.push(y);
                }
                Regex::Union(xs)
            }
            (x, y) => Regex::Union(vec![x, y]),
        }
    }

    pub fn star(a: Regex) -> Regex {
        match a {
            Regex::Empty | Regex::Epsilon => Regex::Epsilon,
            s @ Regex::Star(_) => s,
            x => Regex::Star(Box::new(x)),
        }
    }
}

/// State elimination over the live part of `d`.
pub fn dfa_to_regex(d: &Dfa) -> Regex {
    let live = d.live();
    let states: Vec<usize> = (0..d.num_states()).filter(|&q| live[q]).collect();
    if states.is_empty() {
        return Regex::Empty;
    }
    // generalized automaton: indices 0..n for live states, n = start, n+1 = final
    let n = states.len();
    let pos: HashMap<usize, usize> = states.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut g: Vec<Vec<Regex>> = vec![vec![Regex::Empty; n + 2]; n + 2];
    for (i, &q) in states.iter().enumerate() {
        for (a, &r) in d.delta[q].iter().enumerate() {
            if let Some(&j) = pos.get(&r) {
                let cur = std::mem::replace(&mut g[i][j], Regex::Empty);
                g[i][j] = re::union(cur, Regex::Letter(d.alphabet[a]));
            }
        }
        if d.accepting[q] {
            g[i][n + 1] = Regex::Epsilon;
        }
    }
    g[n][pos[&d.initial]] = Regex::Epsilon;
    for k in 0..n {
        let loop_k = re::star(g[k][k].clone());
        for i in (0..n + 2).filter(|&i| i > k) {
            if g[i][k] == Regex::Empty {
                continue;
            }
            for j in (0..n + 2).filter(|&j| j > k) {
                if g[k][j] == Regex::Empty {
                    continue;
                }
                let path = re::concat(re::concat(g[i][k].clone(), loop_k.clone()), g[k][j].clone());
                let cur = std::mem::replace(&mut g[i][j], Regex::Empty);
                g[i][j] = re::union(cur, path);
            }
        }
    }
    let loop_s = re::star(g[n][n].clone());
    re::concat(loop_s, g[n][n + 1].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::from_letters(['a', 'b'])
    }

    fn a_star() -> Regex {
        Regex::star(Regex::Letter('a'))
    }

    #[test]
    fn a_star_has_one_live_state() {
        let d = regex_to_dfa(&a_star(), &ab());
        assert_eq!(d.num_states(), 2);
        assert_eq!(d.live_count(), 1);
        assert!(d.accepts("aaa"));
        assert!(!d.accepts("ab"));
    }

    #[test]
    fn empty_regex_is_single_sink() {
        let d = regex_to_dfa(&Regex::Empty, &ab());
        assert_eq!(d.num_states(), 1);
        assert!(d.is_empty());
    }

    #[test]
    fn ends_in_a_is_two_states() {
        let r = Regex::Concat(vec![
            Regex::star(Regex::Union(vec![Regex::Letter('a'), Regex::Letter('b')])),
            Regex::Letter('a'),
        ]);
        let d = regex_to_dfa(&r, &ab());
        assert_eq!(d.live_count(), 2);
        assert_eq!(d.num_states(), 2);
    }

    #[test]
    fn products() {
        let a = regex_to_dfa(&a_star(), &ab());
        let b = regex_to_dfa(&Regex::star(Regex::Letter('b')), &ab());
        let p = product(&a, &b);
        assert_eq!(p.words_up_to(4), vec![String::new()]);
        assert!(!p.accepts("a"));
        let aa = regex_to_dfa(&Regex::Concat(vec![Regex::Letter('a'), a_star()]), &ab());
        assert!(equivalent(&product(&a, &aa), &aa));
        assert!(equivalent(&product(&a, &universal(&['a', 'b'])), &a));
    }

    #[test]
    fn round_trip_word() {
        let d = regex_to_dfa(&Regex::Word("ab".into()), &ab());
        let r = dfa_to_regex(&d);
        let back = regex_to_dfa(&r, &ab());
        assert!(equivalent(&d, &back));
        assert_eq!(dfa_to_regex(&regex_to_dfa(&a_star(), &ab())), a_star());
        assert_eq!(dfa_to_regex(&empty(&['a', 'b'])), Regex::Empty);
    }

    #[test]
    fn complement_of_intersection() {
        let r = Regex::complement(Regex::Intersect(vec![a_star(), Regex::Word("aa".into())]));
        let d = regex_to_dfa(&r, &ab());
        assert!(!d.accepts("aa"));
        assert!(d.accepts("a"));
        assert!(d.accepts("b"));
    }
}
