//! Rewriting full input formulas into normalized triples (E, Υ, A).
//!
//! Negation is pushed to atoms: negated memberships become complements,
//! word disequalities are expanded with fresh variables, negated arithmetic
//! flips relations. Memberships of compound terms are split along DFA
//! states. The result is a list of conjunctive cubes whose disjunction is
//! equivalent to the input; an empty list means the input is unsatisfiable.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ast::{
    Alphabet, ArithFormula, EquationSystem, LinExpr, NormalizedFormula, Regex, Rel, StringTerm,
    Symbol, Var, Vocab, WordEquation,
};
use crate::automata::{dfa_to_regex, regex_to_dfa};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawFormula {
    True,
    False,
    Eq(StringTerm, StringTerm),
    Member(StringTerm, Regex),
    Arith(ArithFormula),
    Not(Box<RawFormula>),
    And(Vec<RawFormula>),
    Or(Vec<RawFormula>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("alphabet needs at least two letters")]
    AlphabetTooSmall,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Encode disjunctions of equations as one equation plus a length
    /// disjunction instead of splitting into cubes. This breaks
    /// quadraticity, so it is off by default.
    pub merge_disjunctions: bool,
}

impl RawFormula {
    pub fn not(f: RawFormula) -> RawFormula {
        RawFormula::Not(Box::new(f))
    }

    pub fn letters(&self, out: &mut BTreeSet<char>) {
        match self {
            RawFormula::True | RawFormula::False | RawFormula::Arith(_) => {}
            RawFormula::Eq(l, r) => {
                out.extend(l.letters());
                out.extend(r.letters());
            }
            RawFormula::Member(t, r) => {
                out.extend(t.letters());
                r.letters(out);
            }
            RawFormula::Not(f) => f.letters(out),
            RawFormula::And(fs) | RawFormula::Or(fs) => fs.iter().for_each(|f| f.letters(out)),
        }
    }

    fn has_string_atoms(&self) -> bool {
        match self {
            RawFormula::Eq(..) | RawFormula::Member(..) => true,
            RawFormula::True | RawFormula::False | RawFormula::Arith(_) => false,
            RawFormula::Not(f) => f.has_string_atoms(),
            RawFormula::And(fs) | RawFormula::Or(fs) => fs.iter().any(|f| f.has_string_atoms()),
        }
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        match self {
            RawFormula::True => "true".into(),
            RawFormula::False => "false".into(),
            RawFormula::Eq(l, r) => format!("{}={}", l.show(vocab), r.show(vocab)),
            RawFormula::Member(t, r) => format!("{} ∈ {}", t.show(vocab), r),
            RawFormula::Arith(a) => a.show(vocab),
            RawFormula::Not(f) => format!("¬({})", f.show(vocab)),
            RawFormula::And(fs) => fs.iter().map(|f| format!("({})", f.show(vocab))).collect::<Vec<_>>().join(" ∧ "),
            RawFormula::Or(fs) => fs.iter().map(|f| format!("({})", f.show(vocab))).collect::<Vec<_>>().join(" ∨ "),
        }
    }
}

impl NormalizedFormula {
    pub fn to_raw(&self) -> RawFormula {
        let mut parts: Vec<RawFormula> = self.eqs.0.iter().map(|e| RawFormula::Eq(e.lhs.clone(), e.rhs.clone())).collect();
        parts.extend(self.memberships.iter().map(|(v, r)| RawFormula::Member(StringTerm::var(*v), r.clone())));
        if !self.arith.is_true() {
            parts.push(RawFormula::Arith(self.arith.clone()));
        }
        RawFormula::And(parts)
    }
}

fn has_letter(t: &StringTerm) -> bool {
    t.0.iter().any(|s| s.is_letter())
}

/// An equation atom, decided when one side is ε and the other has a letter
/// or when both sides are ground.
fn eq_atom(l: StringTerm, r: StringTerm) -> RawFormula {
    if (l.is_empty() && has_letter(&r)) || (r.is_empty() && has_letter(&l)) {
        return RawFormula::False;
    }
    if l.is_ground() && r.is_ground() {
        return if l == r { RawFormula::True } else { RawFormula::False };
    }
    if l == r {
        return RawFormula::True;
    }
    RawFormula::Eq(l, r)
}

fn and(parts: Vec<RawFormula>) -> RawFormula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            RawFormula::True => {}
            RawFormula::False => return RawFormula::False,
            RawFormula::And(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => RawFormula::True,
        1 => out.pop().unwrap(),
        _ => RawFormula::And(out),
    }
}

fn or(parts: Vec<RawFormula>) -> RawFormula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            RawFormula::False => {}
            RawFormula::True => return RawFormula::True,
            RawFormula::Or(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => RawFormula::False,
        1 => out.pop().unwrap(),
        _ => RawFormula::Or(out),
    }
}

/// `s1 ≠ s2` as a positive disjunction over fresh variables: one side
/// strictly extends the other, or they differ at some position.
pub fn eliminate_disequality(
    s1: &StringTerm,
    s2: &StringTerm,
    alphabet: &Alphabet,
    vocab: &mut Vocab,
) -> Result<RawFormula, NormalizeError> {
    if alphabet.len() < 2 {
        return Err(NormalizeError::AlphabetTooSmall);
    }
    let x = StringTerm::var(vocab.aux("d"));
    let y = StringTerm::var(vocab.aux("d"));
    let z = StringTerm::var(vocab.aux("d"));
    let mut disjuncts = Vec::new();
    for &a in alphabet.letters() {
        let ax = StringTerm::word(&a.to_string()).concat(&x);
        disjuncts.push(eq_atom(s1.clone(), s2.concat(&ax)));
        disjuncts.push(eq_atom(s2.clone(), s1.concat(&ax)));
    }
    for &a in alphabet.letters() {
        for &b in alphabet.letters() {
            if a == b {
                continue;
            }
            let l = x.concat(&StringTerm::word(&a.to_string())).concat(&y);
            let r = x.concat(&StringTerm::word(&b.to_string())).concat(&z);
            disjuncts.push(and(vec![eq_atom(s1.clone(), l), eq_atom(s2.clone(), r)]));
        }
    }
    Ok(or(disjuncts))
}

/// `u1=v1 ∧ u2=v2` as the single equation `u1 a u2 u1 b u2 = v1 a v2 v1 b v2`.
pub fn conjoin(e1: &WordEquation, e2: &WordEquation, a: char, b: char) -> WordEquation {
    let sa = StringTerm::word(&a.to_string());
    let sb = StringTerm::word(&b.to_string());
    let side = |u1: &StringTerm, u2: &StringTerm| u1.concat(&sa).concat(u2).concat(u1).concat(&sb).concat(u2);
    WordEquation::new(side(&e1.lhs, &e2.lhs), side(&e1.rhs, &e2.rhs))
}

/// `(p=q) ∨ (r=s)` as `⟨p·g = g′·q, r·h = h′·s⟩ ∧ (|g|+|g′| = 0 ∨ |h|+|h′| = 0)`.
///
/// Choosing `g = g′ = ε` forces `p = q`, and the other equation always has
/// the solution `h = s, h′ = r`; symmetrically for the second disjunct.
pub fn merge_disjunction(
    e1: &WordEquation,
    e2: &WordEquation,
    alphabet: &Alphabet,
    vocab: &mut Vocab,
) -> Result<(WordEquation, ArithFormula), NormalizeError> {
    if alphabet.len() < 2 {
        return Err(NormalizeError::AlphabetTooSmall);
    }
    let (a, b) = (alphabet.letters()[0], alphabet.letters()[1]);
    let g = vocab.aux("m");
    let g1 = vocab.aux("m");
    let h = vocab.aux("m");
    let h1 = vocab.aux("m");
    let t = StringTerm::var;
    let first = WordEquation::new(e1.lhs.concat(&t(g)), t(g1).concat(&e1.rhs));
    let second = WordEquation::new(e2.lhs.concat(&t(h)), t(h1).concat(&e2.rhs));
    let zero = |u: Var, w: Var| ArithFormula::eq(LinExpr::len(u).plus(&LinExpr::len(w)), LinExpr::constant(0));
    Ok((conjoin(&first, &second, a, b), ArithFormula::or(vec![zero(g, g1), zero(h, h1)])))
}

fn negate_arith(a: &ArithFormula) -> Result<ArithFormula, NormalizeError> {
    Ok(match a {
        ArithFormula::True => ArithFormula::False,
        ArithFormula::False => ArithFormula::True,
        ArithFormula::Atom(l, r, rhs) => {
            let at = |rel| ArithFormula::Atom(l.clone(), rel, rhs.clone());
            match r {
                Rel::Eq => ArithFormula::or(vec![at(Rel::Lt), at(Rel::Gt)]),
                Rel::Ge => at(Rel::Lt),
                Rel::Gt => at(Rel::Le),
                Rel::Le => at(Rel::Gt),
                Rel::Lt => at(Rel::Ge),
            }
        }
        ArithFormula::And(fs) => ArithFormula::or(fs.iter().map(negate_arith).collect::<Result<_, _>>()?),
        ArithFormula::Or(fs) => ArithFormula::and(fs.iter().map(negate_arith).collect::<Result<_, _>>()?),
        ArithFormula::Exists(..) => {
            return Err(NormalizeError::Unsupported("negated existential quantifier".into()))
        }
        ArithFormula::Pred(p, _) => return Err(NormalizeError::Unsupported(format!("negated predicate {p}"))),
    })
}

fn complement(r: &Regex) -> Regex {
    match r {
        Regex::Complement(inner) => (**inner).clone(),
        other => Regex::complement(other.clone()),
    }
}

fn member_atom(t: StringTerm, r: Regex, alphabet: &Alphabet) -> RawFormula {
    match t.ground_word() {
        Some(w) => {
            if regex_to_dfa(&r, alphabet).accepts(&w) {
                RawFormula::True
            } else {
                RawFormula::False
            }
        }
        None => RawFormula::Member(t, r),
    }
}

/// Negation normal form: complements for negated memberships, disequality
/// expansion, flipped arithmetic; ground memberships are decided.
pub fn push_regex_negation(
    f: &RawFormula,
    alphabet: &Alphabet,
    vocab: &mut Vocab,
) -> Result<RawFormula, NormalizeError> {
    nnf(f, false, alphabet, vocab)
}

fn word_regex(w: &str) -> Regex {
    if w.is_empty() {
        Regex::Epsilon
    } else {
        Regex::Word(w.to_string())
    }
}

fn nnf(f: &RawFormula, neg: bool, alphabet: &Alphabet, vocab: &mut Vocab) -> Result<RawFormula, NormalizeError> {
    Ok(match (f, neg) {
        (RawFormula::True, false) | (RawFormula::False, true) => RawFormula::True,
        (RawFormula::True, true) | (RawFormula::False, false) => RawFormula::False,
        (RawFormula::Eq(l, r), false) => eq_atom(l.clone(), r.clone()),
        (RawFormula::Eq(l, r), true) => match eq_atom(l.clone(), r.clone()) {
            RawFormula::True => RawFormula::False,
            RawFormula::False => RawFormula::True,
            // against a constant, a complemented membership keeps the
            // equations quadratic
            _ => match (l.ground_word(), r.ground_word()) {
                (Some(w), None) => member_atom(r.clone(), complement(&word_regex(&w)), alphabet),
                (None, Some(w)) => member_atom(l.clone(), complement(&word_regex(&w)), alphabet),
                _ => eliminate_disequality(l, r, alphabet, vocab)?,
            },
        },
        (RawFormula::Member(t, r), false) => member_atom(t.clone(), r.clone(), alphabet),
        (RawFormula::Member(t, r), true) => member_atom(t.clone(), complement(r), alphabet),
        (RawFormula::Arith(a), false) => match a {
            ArithFormula::True => RawFormula::True,
            ArithFormula::False => RawFormula::False,
            _ => RawFormula::Arith(a.clone()),
        },
        (RawFormula::Arith(a), true) => nnf(&RawFormula::Arith(negate_arith(a)?), false, alphabet, vocab)?,
        (RawFormula::Not(g), n) => nnf(g, !n, alphabet, vocab)?,
        (RawFormula::And(fs), false) | (RawFormula::Or(fs), true) => {
            and(fs.iter().map(|g| nnf(g, neg, alphabet, vocab)).collect::<Result<_, _>>()?)
        }
        (RawFormula::Or(fs), false) | (RawFormula::And(fs), true) => {
            or(fs.iter().map(|g| nnf(g, neg, alphabet, vocab)).collect::<Result<_, _>>()?)
        }
    })
}

/// Splits a membership of a compound term along the states of the DFA of
/// `r`: every run through the term picks an intermediate state per
/// variable, and the variable is constrained to the words leading between
/// those states. Letters advance the run deterministically; the sink state
/// is never chosen.
pub fn split_membership(t: &StringTerm, r: &Regex, alphabet: &Alphabet) -> RawFormula {
    if t.len() == 1 || t.is_ground() {
        return member_atom(t.clone(), r.clone(), alphabet);
    }
    let d = regex_to_dfa(r, alphabet);
    let live = d.live();
    let finals: Vec<usize> = (0..d.num_states()).filter(|&q| d.accepting[q]).collect();
    let mut disjuncts = Vec::new();
    let mut stack: Vec<(usize, usize, Vec<RawFormula>)> = vec![(0, d.initial, Vec::new())];
    while let Some((i, q, acc)) = stack.pop() {
        if !live[q] {
            continue;
        }
        if i == t.len() {
            if d.accepting[q] {
                disjuncts.push(and(acc));
            }
            continue;
        }
        match t.0[i] {
            Symbol::Letter(c) => {
                if let Some(nq) = d.step(q, c) {
                    stack.push((i + 1, nq, acc));
                }
            }
            Symbol::Var(v) => {
                let last = i + 1 == t.len();
                let targets: Vec<usize> = if last {
                    vec![usize::MAX]
                } else {
                    (0..d.num_states()).filter(|&p| live[p]).rev().collect()
                };
                for p in targets {
                    let sub = if p == usize::MAX {
                        d.with_ends(q, &finals)
                    } else {
                        d.with_ends(q, &[p])
                    };
                    if sub.is_empty() {
                        continue;
                    }
                    let mut next = acc.clone();
                    next.push(RawFormula::Member(StringTerm::var(v), dfa_to_regex(&sub)));
                    let nq = if p == usize::MAX { finals.first().copied().unwrap_or(q) } else { p };
                    if p == usize::MAX {
                        disjuncts.push(and(next));
                    } else {
                        stack.push((i + 1, nq, next));
                    }
                }
            }
        }
    }
    or(disjuncts)
}

#[derive(Clone, Debug, Default)]
struct Cube {
    eqs: Vec<WordEquation>,
    members: Vec<(Var, Regex)>,
    arith: Vec<ArithFormula>,
}

impl Cube {
    fn join(&self, other: &Cube) -> Cube {
        let mut c = self.clone();
        c.eqs.extend(other.eqs.iter().cloned());
        c.members.extend(other.members.iter().cloned());
        c.arith.extend(other.arith.iter().cloned());
        c
    }
}

const MAX_CUBES: usize = 4096;

fn cubes(f: &RawFormula, alphabet: &Alphabet, vocab: &mut Vocab, opts: &Options) -> Result<Vec<Cube>, NormalizeError> {
    Ok(match f {
        RawFormula::True => vec![Cube::default()],
        RawFormula::False => vec![],
        RawFormula::Eq(l, r) => vec![Cube { eqs: vec![WordEquation::new(l.clone(), r.clone())], ..Cube::default() }],
        RawFormula::Arith(a) => vec![Cube { arith: vec![a.clone()], ..Cube::default() }],
        RawFormula::Member(t, r) => {
            if let [Symbol::Var(v)] = t.0.as_slice() {
                vec![Cube { members: vec![(*v, r.clone())], ..Cube::default() }]
            } else {
                let split = split_membership(t, r, alphabet);
                if split == *f {
                    return Err(NormalizeError::Unsupported("membership did not split".into()));
                }
                cubes(&split, alphabet, vocab, opts)?
            }
        }
        RawFormula::Not(_) => return Err(NormalizeError::Unsupported("negation after NNF".into())),
        RawFormula::And(fs) => {
            let mut acc = vec![Cube::default()];
            for g in fs {
                let cs = cubes(g, alphabet, vocab, opts)?;
                let mut next = Vec::new();
                for a in &acc {
                    for c in &cs {
                        next.push(a.join(c));
                    }
                }
                if next.len() > MAX_CUBES {
                    return Err(NormalizeError::Unsupported("disjunctive normal form too large".into()));
                }
                acc = next;
            }
            acc
        }
        RawFormula::Or(fs) => {
            if !f.has_string_atoms() {
                let parts: Vec<ArithFormula> = fs.iter().map(|g| arith_of(g)).collect::<Result<_, _>>()?;
                return Ok(vec![Cube { arith: vec![ArithFormula::or(parts)], ..Cube::default() }]);
            }
            if opts.merge_disjunctions {
                if let Some(c) = merged(fs, alphabet, vocab)? {
                    return Ok(vec![c]);
                }
            }
            let mut out = Vec::new();
            for g in fs {
                out.extend(cubes(g, alphabet, vocab, opts)?);
            }
            out
        }
    })
}

fn arith_of(f: &RawFormula) -> Result<ArithFormula, NormalizeError> {
    Ok(match f {
        RawFormula::True => ArithFormula::True,
        RawFormula::False => ArithFormula::False,
        RawFormula::Arith(a) => a.clone(),
        RawFormula::And(fs) => ArithFormula::and(fs.iter().map(arith_of).collect::<Result<_, _>>()?),
        RawFormula::Or(fs) => ArithFormula::or(fs.iter().map(arith_of).collect::<Result<_, _>>()?),
        _ => return Err(NormalizeError::Unsupported("string atom in arithmetic".into())),
    })
}

/// Merges a disjunction whose branches are conjunctions of equations.
fn merged(fs: &[RawFormula], alphabet: &Alphabet, vocab: &mut Vocab) -> Result<Option<Cube>, NormalizeError> {
    let (a, b) = (alphabet.letters()[0], alphabet.letters()[1]);
    let mut branches = Vec::new();
    for g in fs {
        let eqs: Vec<&RawFormula> = match g {
            RawFormula::And(parts) => parts.iter().collect(),
            other => vec![other],
        };
        let mut acc: Option<WordEquation> = None;
        for e in eqs {
            let RawFormula::Eq(l, r) = e else { return Ok(None) };
            let e = WordEquation::new(l.clone(), r.clone());
            acc = Some(match acc {
                None => e,
                Some(prev) => conjoin(&prev, &e, a, b),
            });
        }
        match acc {
            Some(e) => branches.push(e),
            None => return Ok(None),
        }
    }
    let mut it = branches.into_iter();
    let Some(mut cur) = it.next() else { return Ok(None) };
    let mut arith = Vec::new();
    for e in it {
        let (m, side) = merge_disjunction(&cur, &e, alphabet, vocab)?;
        cur = m;
        arith.push(side);
    }
    Ok(Some(Cube { eqs: vec![cur], members: Vec::new(), arith }))
}

/// Letters of the formula, padded to a working alphabet.
pub fn alphabet_of(f: &RawFormula) -> Alphabet {
    let mut letters = BTreeSet::new();
    f.letters(&mut letters);
    Alphabet::from_letters(letters)
}

/// Normalizes `f` into a disjunction of triples over `alphabet`.
pub fn normalize(
    f: &RawFormula,
    alphabet: &Alphabet,
    vocab: &mut Vocab,
    opts: &Options,
) -> Result<Vec<NormalizedFormula>, NormalizeError> {
    let g = push_regex_negation(f, alphabet, vocab)?;
    let cs = cubes(&g, alphabet, vocab, opts)?;
    let mut out: Vec<NormalizedFormula> = Vec::new();
    for c in cs {
        let n = NormalizedFormula {
            eqs: EquationSystem(c.eqs),
            memberships: c.members,
            arith: ArithFormula::and(c.arith),
        };
        if matches!(n.arith, ArithFormula::False) || out.contains(&n) {
            continue;
        }
        out.push(n);
    }
    Ok(out)
}
