//! Core syntax: symbols, terms, word equations, regexes, linear arithmetic
//! and substitutions.
//!
//! Variables are interned in a [`Vocab`]. Every solve session owns one, and
//! fresh variables are minted from it with a counter suffix, so dumps are
//! reproducible run to run.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

/// An interned string variable. Ids grow in creation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

/// One position of a flattened term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Letter(char),
    Var(Var),
}

impl Symbol {
    pub fn as_var(self) -> Option<Var> {
        match self {
            Symbol::Var(v) => Some(v),
            Symbol::Letter(_) => None,
        }
    }

    pub fn is_letter(self) -> bool {
        matches!(self, Symbol::Letter(_))
    }
}

/// Interning table for string variable names.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, Var>,
    user: Vec<bool>,
    origin: Vec<Var>,
    counters: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns a user-declared variable, returning the existing id on reuse.
    pub fn var(&mut self, name: &str) -> Var {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        self.push(name.to_string(), true, None)
    }

    /// Looks a name up without interning it.
    pub fn lookup(&self, name: &str) -> Option<Var> {
        self.index.get(name).copied()
    }

    fn push(&mut self, name: String, user: bool, origin: Option<Var>) -> Var {
        let v = Var(self.names.len() as u32);
        self.index.insert(name.clone(), v);
        self.names.push(name);
        self.user.push(user);
        self.origin.push(origin.unwrap_or(v));
        v
    }

    /// Mints `base_k` for the next free counter value `k`.
    ///
    /// Names already present in the table are skipped, so a fresh variable
    /// never captures a declared one.
    pub fn fresh(&mut self, base: Var) -> Var {
        let stem = self.names[base.0 as usize].clone();
        let origin = self.origin(base);
        let counter = self.counters.entry(stem.clone()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = format!("{stem}_{counter}");
            if !self.index.contains_key(&candidate) {
                return self.push(candidate, false, Some(origin));
            }
        }
    }

    /// Interns a non-user variable under `name`, suffixing on collision.
    pub fn fresh_named(&mut self, name: &str, origin: Var) -> Var {
        if !self.index.contains_key(name) {
            let origin = self.origin(origin);
            return self.push(name.to_string(), false, Some(origin));
        }
        let mut k = 1;
        loop {
            let candidate = format!("{name}_{k}");
            if !self.index.contains_key(&candidate) {
                let origin = self.origin(origin);
                return self.push(candidate, false, Some(origin));
            }
            k += 1;
        }
    }

    /// A fresh auxiliary variable `stem_k` that is its own origin.
    pub fn aux(&mut self, stem: &str) -> Var {
        let counter = self.counters.entry(stem.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = format!("{stem}_{counter}");
            if !self.index.contains_key(&candidate) {
                return self.push(candidate, false, None);
            }
        }
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v.0 as usize]
    }

    pub fn is_user(&self, v: Var) -> bool {
        self.user[v.0 as usize]
    }

    /// The user variable a fresh variable descends from.
    pub fn origin(&self, v: Var) -> Var {
        self.origin[v.0 as usize]
    }

    /// Number of interned variables; also the id the next one will get.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A flattened concatenation. The empty sequence is ε.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StringTerm(pub Vec<Symbol>);

impl StringTerm {
    pub fn eps() -> Self {
        StringTerm(Vec::new())
    }

    pub fn word(w: &str) -> Self {
        StringTerm(w.chars().map(Symbol::Letter).collect())
    }

    pub fn var(v: Var) -> Self {
        StringTerm(vec![Symbol::Var(v)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn head(&self) -> Option<Symbol> {
        self.0.first().copied()
    }

    pub fn concat(&self, other: &StringTerm) -> StringTerm {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        StringTerm(v)
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().filter_map(|s| s.as_var())
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.0.iter().filter_map(|s| match s {
            Symbol::Letter(c) => Some(*c),
            Symbol::Var(_) => None,
        })
    }

    pub fn is_ground(&self) -> bool {
        self.0.iter().all(|s| s.is_letter())
    }

    /// The word spelled by a ground term.
    pub fn ground_word(&self) -> Option<String> {
        self.0
            .iter()
            .map(|s| match s {
                Symbol::Letter(c) => Some(*c),
                Symbol::Var(_) => None,
            })
            .collect()
    }

    pub fn occurrences(&self, v: Var) -> usize {
        self.vars().filter(|&w| w == v).count()
    }

    /// Evaluates under an assignment; unassigned variables read as ε.
    pub fn eval(&self, a: &Assignment) -> String {
        let mut out = String::new();
        for s in &self.0 {
            match s {
                Symbol::Letter(c) => out.push(*c),
                Symbol::Var(v) => {
                    if let Some(w) = a.get(v) {
                        out.push_str(w);
                    }
                }
            }
        }
        out
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        if self.0.is_empty() {
            return "ε".to_string();
        }
        let mut out = String::new();
        for s in &self.0 {
            match s {
                Symbol::Letter(c) => out.push(*c),
                Symbol::Var(v) => out.push_str(vocab.name(*v)),
            }
        }
        out
    }
}

/// A map from variables to words.
pub type Assignment = BTreeMap<Var, String>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordEquation {
    pub lhs: StringTerm,
    pub rhs: StringTerm,
}

impl WordEquation {
    pub fn new(lhs: StringTerm, rhs: StringTerm) -> Self {
        WordEquation { lhs, rhs }
    }

    /// Symbol count of both sides; `=` is not counted.
    pub fn notational_length(&self) -> usize {
        self.lhs.len() + self.rhs.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.lhs == self.rhs
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lhs.vars().chain(self.rhs.vars())
    }

    pub fn apply(&self, s: &Subst) -> WordEquation {
        WordEquation::new(apply_subst(&self.lhs, s), apply_subst(&self.rhs, s))
    }

    pub fn holds(&self, a: &Assignment) -> bool {
        self.lhs.eval(a) == self.rhs.eval(a)
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        format!("{}={}", self.lhs.show(vocab), self.rhs.show(vocab))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EquationSystem(pub Vec<WordEquation>);

impl EquationSystem {
    pub fn new(eqs: Vec<WordEquation>) -> Self {
        EquationSystem(eqs)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn notational_length(&self) -> usize {
        self.0.iter().map(|e| e.notational_length()).sum()
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in &self.0 {
            for v in e.vars() {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn occurrences(&self) -> BTreeMap<Var, usize> {
        let mut m = BTreeMap::new();
        for e in &self.0 {
            for v in e.vars() {
                *m.entry(v).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every variable occurs at most twice across the system.
    pub fn is_quadratic(&self) -> bool {
        self.occurrences().values().all(|&n| n <= 2)
    }

    pub fn apply(&self, s: &Subst) -> EquationSystem {
        EquationSystem(self.0.iter().map(|e| e.apply(s)).collect())
    }

    pub fn holds(&self, a: &Assignment) -> bool {
        self.0.iter().all(|e| e.holds(a))
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        if self.0.is_empty() {
            return "ε=ε".to_string();
        }
        self.0
            .iter()
            .map(|e| e.show(vocab))
            .collect::<Vec<_>>()
            .join(" ∧ ")
    }
}

/// Regular expressions. `AnyLetter` stands for one letter of the session
/// alphabet; `Complement` is relative to Σ*.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regex {
    Empty,
    Epsilon,
    Letter(char),
    Word(String),
    Concat(Vec<Regex>),
    Union(Vec<Regex>),
    Intersect(Vec<Regex>),
    Complement(Box<Regex>),
    Star(Box<Regex>),
    AnyLetter,
}

impl Regex {
    pub fn star(r: Regex) -> Regex {
        Regex::Star(Box::new(r))
    }

    pub fn complement(r: Regex) -> Regex {
        Regex::Complement(Box::new(r))
    }

    pub fn letters(&self, out: &mut BTreeSet<char>) {
        match self {
            Regex::Letter(c) => {
                out.insert(*c);
            }
            Regex::Word(w) => out.extend(w.chars()),
            Regex::Concat(rs) | Regex::Union(rs) | Regex::Intersect(rs) => {
                rs.iter().for_each(|r| r.letters(out))
            }
            Regex::Complement(r) | Regex::Star(r) => r.letters(out),
            Regex::Empty | Regex::Epsilon | Regex::AnyLetter => {}
        }
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atomic(r: &Regex) -> bool {
            matches!(
                r,
                Regex::Empty | Regex::Epsilon | Regex::Letter(_) | Regex::AnyLetter | Regex::Star(_)
            ) || matches!(r, Regex::Word(w) if w.chars().count() == 1)
        }
        fn paren(r: &Regex, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if atomic(r) {
                write!(f, "{r}")
            } else {
                write!(f, "({r})")
            }
        }
        match self {
            Regex::Empty => write!(f, "∅"),
            Regex::Epsilon => write!(f, "ε"),
            Regex::Letter(c) => write!(f, "{c}"),
            Regex::Word(w) => write!(f, "{w}"),
            Regex::AnyLetter => write!(f, "Σ"),
            Regex::Concat(rs) => {
                for r in rs {
                    paren(r, f)?;
                }
                Ok(())
            }
            Regex::Union(rs) | Regex::Intersect(rs) => {
                let op = if matches!(self, Regex::Union(_)) { "+" } else { "&" };
                for (i, r) in rs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{op}")?;
                    }
                    paren(r, f)?;
                }
                Ok(())
            }
            Regex::Complement(r) => {
                paren(r, f)?;
                write!(f, "^C")
            }
            Regex::Star(r) => {
                if matches!(**r, Regex::Letter(_) | Regex::AnyLetter)
                    || matches!(&**r, Regex::Word(w) if w.chars().count() == 1)
                {
                    write!(f, "{r}*")
                } else {
                    write!(f, "({r})*")
                }
            }
        }
    }
}

/// Integer-valued variable: the length of a string variable or a plain Int.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntVar {
    Len(Var),
    Int(String),
}

impl IntVar {
    pub fn int(name: &str) -> IntVar {
        IntVar::Int(name.to_string())
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        match self {
            IntVar::Len(v) => format!("|{}|", vocab.name(*v)),
            IntVar::Int(s) => s.clone(),
        }
    }
}

/// Integer linear combination plus a constant.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinExpr {
    pub coeffs: BTreeMap<IntVar, i64>,
    pub constant: i64,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: IntVar) -> Self {
        Self::term(1, v)
    }

    pub fn len(v: Var) -> Self {
        Self::var(IntVar::Len(v))
    }

    pub fn term(k: i64, v: IntVar) -> Self {
        let mut e = LinExpr::constant(0);
        e.add_term(k, v);
        e
    }

    pub fn add_term(&mut self, k: i64, v: IntVar) {
        let c = self.coeffs.entry(v.clone()).or_insert(0);
        *c += k;
        if *c == 0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        for (v, k) in &other.coeffs {
            self.add_term(*k, v.clone());
        }
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: &LinExpr) -> Self {
        self.plus(&other.scaled(-1))
    }

    pub fn scaled(&self, k: i64) -> Self {
        if k == 0 {
            return LinExpr::constant(0);
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn offset(mut self, c: i64) -> Self {
        self.constant += c;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Replaces `v` by `e` everywhere.
    pub fn substitute(&self, v: &IntVar, e: &LinExpr) -> LinExpr {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(&k) => {
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.plus(&e.scaled(k))
            }
        }
    }

    pub fn rename(&self, map: &BTreeMap<IntVar, IntVar>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant);
        for (v, k) in &self.coeffs {
            out.add_term(*k, map.get(v).cloned().unwrap_or_else(|| v.clone()));
        }
        out
    }

    pub fn eval(&self, m: &BTreeMap<IntVar, i64>) -> Option<i64> {
        let mut acc = self.constant;
        for (v, k) in &self.coeffs {
            acc = acc.checked_add(k.checked_mul(*m.get(v)?)?)?;
        }
        Some(acc)
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        let mut out = String::new();
        for (v, k) in &self.coeffs {
            let name = v.show(vocab);
            let mag = k.abs();
            if out.is_empty() {
                if *k < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if *k < 0 { " - " } else { " + " });
            }
            if mag != 1 {
                out.push_str(&format!("{mag}·"));
            }
            out.push_str(&name);
        }
        if out.is_empty() {
            return self.constant.to_string();
        }
        if self.constant > 0 {
            out.push_str(&format!(" + {}", self.constant));
        } else if self.constant < 0 {
            out.push_str(&format!(" - {}", -self.constant));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Le => "<=",
            Rel::Lt => "<",
        }
    }

    pub fn holds(self, l: i64, r: i64) -> bool {
        match self {
            Rel::Eq => l == r,
            Rel::Ge => l >= r,
            Rel::Gt => l > r,
            Rel::Le => l <= r,
            Rel::Lt => l < r,
        }
    }
}

/// Existential linear integer arithmetic with optional predicate symbols.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithFormula {
    True,
    False,
    Atom(LinExpr, Rel, LinExpr),
    And(Vec<ArithFormula>),
    Or(Vec<ArithFormula>),
    Exists(Vec<IntVar>, Box<ArithFormula>),
    Pred(String, Vec<LinExpr>),
}

impl ArithFormula {
    pub fn atom(l: LinExpr, r: Rel, rhs: LinExpr) -> Self {
        ArithFormula::Atom(l, r, rhs)
    }

    pub fn eq(l: LinExpr, r: LinExpr) -> Self {
        ArithFormula::Atom(l, Rel::Eq, r)
    }

    pub fn ge(l: LinExpr, r: LinExpr) -> Self {
        ArithFormula::Atom(l, Rel::Ge, r)
    }

    pub fn gt(l: LinExpr, r: LinExpr) -> Self {
        ArithFormula::Atom(l, Rel::Gt, r)
    }

    /// Conjunction with `True` units dropped and nested `And`s flattened.
    pub fn and(parts: Vec<ArithFormula>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                ArithFormula::True => {}
                ArithFormula::False => return ArithFormula::False,
                ArithFormula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => ArithFormula::True,
            1 => out.pop().unwrap(),
            _ => ArithFormula::And(out),
        }
    }

    pub fn or(parts: Vec<ArithFormula>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                ArithFormula::False => {}
                ArithFormula::True => return ArithFormula::True,
                ArithFormula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => ArithFormula::False,
            1 => out.pop().unwrap(),
            _ => ArithFormula::Or(out),
        }
    }

    pub fn exists(vars: Vec<IntVar>, body: ArithFormula) -> Self {
        if vars.is_empty() {
            body
        } else {
            ArithFormula::Exists(vars, Box::new(body))
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, ArithFormula::True)
    }

    /// Free integer variables.
    pub fn free_vars(&self) -> BTreeSet<IntVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<IntVar>, out: &mut BTreeSet<IntVar>) {
        let mut add = |e: &LinExpr, bound: &Vec<IntVar>| {
            for v in e.coeffs.keys() {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        };
        match self {
            ArithFormula::True | ArithFormula::False => {}
            ArithFormula::Atom(l, _, r) => {
                add(l, bound);
                add(r, bound);
            }
            ArithFormula::Pred(_, args) => args.iter().for_each(|a| add(a, bound)),
            ArithFormula::And(fs) | ArithFormula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_free(bound, out))
            }
            ArithFormula::Exists(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// String variables whose lengths occur free.
    pub fn length_vars(&self) -> BTreeSet<Var> {
        self.free_vars()
            .into_iter()
            .filter_map(|v| match v {
                IntVar::Len(x) => Some(x),
                IntVar::Int(_) => None,
            })
            .collect()
    }

    /// Capture-avoiding substitution of free variables by expressions.
    pub fn substitute(&self, map: &BTreeMap<IntVar, LinExpr>) -> ArithFormula {
        match self {
            ArithFormula::True | ArithFormula::False => self.clone(),
            ArithFormula::Atom(l, r, rhs) => {
                ArithFormula::Atom(subst_lin(l, map), *r, subst_lin(rhs, map))
            }
            ArithFormula::Pred(p, args) => {
                ArithFormula::Pred(p.clone(), args.iter().map(|a| subst_lin(a, map)).collect())
            }
            ArithFormula::And(fs) => ArithFormula::And(fs.iter().map(|f| f.substitute(map)).collect()),
            ArithFormula::Or(fs) => ArithFormula::Or(fs.iter().map(|f| f.substitute(map)).collect()),
            ArithFormula::Exists(vs, body) => {
                let inner: BTreeMap<IntVar, LinExpr> = map
                    .iter()
                    .filter(|(k, _)| !vs.contains(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                ArithFormula::Exists(vs.clone(), Box::new(body.substitute(&inner)))
            }
        }
    }

    /// Evaluates a quantifier-free, predicate-free formula.
    pub fn eval(&self, m: &BTreeMap<IntVar, i64>) -> Option<bool> {
        Some(match self {
            ArithFormula::True => true,
            ArithFormula::False => false,
            ArithFormula::Atom(l, r, rhs) => r.holds(l.eval(m)?, rhs.eval(m)?),
            ArithFormula::And(fs) => {
                for f in fs {
                    if !f.eval(m)? {
                        return Some(false);
                    }
                }
                true
            }
            ArithFormula::Or(fs) => {
                for f in fs {
                    if f.eval(m)? {
                        return Some(true);
                    }
                }
                false
            }
            ArithFormula::Exists(..) | ArithFormula::Pred(..) => return None,
        })
    }

    /// Number of atoms, counting predicate applications.
    pub fn atom_count(&self) -> usize {
        match self {
            ArithFormula::True | ArithFormula::False => 0,
            ArithFormula::Atom(..) | ArithFormula::Pred(..) => 1,
            ArithFormula::And(fs) | ArithFormula::Or(fs) => fs.iter().map(|f| f.atom_count()).sum(),
            ArithFormula::Exists(_, b) => b.atom_count(),
        }
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        match self {
            ArithFormula::True => "true".into(),
            ArithFormula::False => "false".into(),
            ArithFormula::Atom(l, r, rhs) => {
                let sym = match r {
                    Rel::Eq => "=",
                    Rel::Ge => "≥",
                    Rel::Gt => ">",
                    Rel::Le => "≤",
                    Rel::Lt => "<",
                };
                format!("{} {} {}", l.show(vocab), sym, rhs.show(vocab))
            }
            ArithFormula::And(fs) => join_show(fs, " ∧ ", vocab),
            ArithFormula::Or(fs) => join_show(fs, " ∨ ", vocab),
            ArithFormula::Exists(vs, b) => format!(
                "∃{}. {}",
                vs.iter().map(|v| v.show(vocab)).collect::<Vec<_>>().join(","),
                b.show(vocab)
            ),
            ArithFormula::Pred(p, args) => format!(
                "{}({})",
                p,
                args.iter().map(|a| a.show(vocab)).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

fn join_show(fs: &[ArithFormula], sep: &str, vocab: &Vocab) -> String {
    fs.iter()
        .map(|f| match f {
            ArithFormula::And(_) | ArithFormula::Or(_) => format!("({})", f.show(vocab)),
            _ => f.show(vocab),
        })
        .collect::<Vec<_>>()
        .join(sep)
}

fn subst_lin(e: &LinExpr, map: &BTreeMap<IntVar, LinExpr>) -> LinExpr {
    let mut out = LinExpr::constant(e.constant);
    for (v, k) in &e.coeffs {
        match map.get(v) {
            Some(r) => out = out.plus(&r.scaled(*k)),
            None => out.add_term(*k, v.clone()),
        }
    }
    out
}

/// Shape of a single-binding substitution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubstKind {
    /// `[ε/x]`
    Eps,
    /// `[c·x′/x]`
    LetterCons,
    /// `[y·x′/x]`
    VarCons,
    /// `[y/x]`
    Rename,
    /// Anything else; produced only by tests and the straight-line checker.
    Other,
}

/// Substitution `[replacement/target]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subst {
    pub target: Var,
    pub replacement: StringTerm,
}

impl Subst {
    pub fn new(target: Var, replacement: StringTerm) -> Self {
        Subst { target, replacement }
    }

    pub fn eps(x: Var) -> Self {
        Subst::new(x, StringTerm::eps())
    }

    pub fn letter_cons(x: Var, c: char, fresh: Var) -> Self {
        Subst::new(x, StringTerm(vec![Symbol::Letter(c), Symbol::Var(fresh)]))
    }

    pub fn var_cons(x: Var, y: Var, fresh: Var) -> Self {
        Subst::new(x, StringTerm(vec![Symbol::Var(y), Symbol::Var(fresh)]))
    }

    /// `[y/x]`: occurrences of `x` become `y`.
    pub fn rename(x: Var, y: Var) -> Self {
        Subst::new(x, StringTerm::var(y))
    }

    pub fn kind(&self) -> SubstKind {
        match self.replacement.0.as_slice() {
            [] => SubstKind::Eps,
            [Symbol::Var(_)] => SubstKind::Rename,
            [Symbol::Letter(_), Symbol::Var(_)] => SubstKind::LetterCons,
            [Symbol::Var(_), Symbol::Var(_)] => SubstKind::VarCons,
            _ => SubstKind::Other,
        }
    }

    /// LetterCons and VarCons consume a symbol; these mark progress on a cycle.
    pub fn is_progressing(&self) -> bool {
        matches!(self.kind(), SubstKind::LetterCons | SubstKind::VarCons)
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        format!("[{}/{}]", self.replacement.show(vocab), vocab.name(self.target))
    }
}

pub fn show_substs(ss: &[Subst], vocab: &Vocab) -> String {
    ss.iter().map(|s| s.show(vocab)).collect::<Vec<_>>().join("")
}

/// Replaces every occurrence of `σ.target` in `t` by `σ.replacement`.
pub fn apply_subst(t: &StringTerm, s: &Subst) -> StringTerm {
    let mut out = Vec::with_capacity(t.len() + s.replacement.len());
    for sym in &t.0 {
        match sym {
            Symbol::Var(v) if *v == s.target => out.extend_from_slice(&s.replacement.0),
            other => out.push(*other),
        }
    }
    StringTerm(out)
}

/// The normalized triple: equations, single-variable memberships, arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedFormula {
    pub eqs: EquationSystem,
    pub memberships: Vec<(Var, Regex)>,
    pub arith: ArithFormula,
}

impl NormalizedFormula {
    /// String variables mentioned anywhere, in a stable order.
    pub fn string_vars(&self) -> Vec<Var> {
        let mut seen: BTreeSet<Var> = BTreeSet::new();
        let mut out = Vec::new();
        let mut add = |v: Var, out: &mut Vec<Var>| {
            if seen.insert(v) {
                out.push(v);
            }
        };
        for v in self.eqs.vars() {
            add(v, &mut out);
        }
        for (v, _) in &self.memberships {
            add(*v, &mut out);
        }
        for v in self.arith.length_vars() {
            add(v, &mut out);
        }
        out
    }

    pub fn letters(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        for e in &self.eqs.0 {
            out.extend(e.lhs.letters());
            out.extend(e.rhs.letters());
        }
        for (_, r) in &self.memberships {
            r.letters(&mut out);
        }
        out
    }

    pub fn show(&self, vocab: &Vocab) -> String {
        let mut parts = Vec::new();
        if !self.eqs.is_empty() {
            parts.push(self.eqs.show(vocab));
        }
        for (v, r) in &self.memberships {
            parts.push(format!("{} ∈ {}", vocab.name(*v), r));
        }
        if !self.arith.is_true() {
            parts.push(self.arith.show(vocab));
        }
        if parts.is_empty() {
            return "true".into();
        }
        parts.join(" ∧ ")
    }
}

/// The working alphabet Σ, sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet(pub Vec<char>);

impl Alphabet {
    /// Letters of the input, padded to at least two with unused letters
    /// `a`, `b`, ... so that disequality expansion has two distinct letters.
    pub fn from_letters(letters: impl IntoIterator<Item = char>) -> Self {
        let mut set: BTreeSet<char> = letters.into_iter().collect();
        let mut pad = 'a';
        while set.len() < 2 {
            set.insert(pad);
            pad = ((pad as u8) + 1) as char;
        }
        Alphabet(set.into_iter().collect())
    }

    pub fn letters(&self) -> &[char] {
        &self.0
    }

    pub fn index(&self, c: char) -> Option<usize> {
        self.0.binary_search(&c).ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All words of length at most `n`, shortest first.
    pub fn words_up_to(&self, n: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..n {
            let mut next = Vec::with_capacity(layer.len() * self.0.len());
            for w in &layer {
                for c in &self.0 {
                    let mut x = w.clone();
                    x.push(*c);
                    next.push(x);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

/// Parses a compact term like `abx_1y` against a vocabulary: maximal
/// identifiers that name interned variables become variables, every other
/// character is a letter. Handy in tests and examples.
pub fn term(vocab: &mut Vocab, src: &str) -> StringTerm {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        // longest interned variable name starting at i
        let mut best = None;
        for j in (i + 1..=chars.len()).rev() {
            let cand: String = chars[i..j].iter().collect();
            if let Some(v) = vocab.lookup(&cand) {
                best = Some((v, j));
                break;
            }
        }
        match best {
            Some((v, j)) => {
                out.push(Symbol::Var(v));
                i = j;
            }
            None => {
                out.push(Symbol::Letter(chars[i]));
                i += 1;
            }
        }
    }
    StringTerm(out)
}

/// Builds `lhs=rhs` where the named variables are interned first.
pub fn equation(vocab: &mut Vocab, vars: &[&str], src: &str) -> WordEquation {
    for v in vars {
        vocab.var(v);
    }
    let (l, r) = src.split_once('=').expect("equation needs '='");
    WordEquation::new(term(vocab, l.trim()), term(vocab, r.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_counter_suffixes() {
        let mut v = Vocab::new();
        let x = v.var("x");
        let x1 = v.fresh(x);
        let x2 = v.fresh(x);
        assert_eq!(v.name(x1), "x_1");
        assert_eq!(v.name(x2), "x_2");
        assert_eq!(v.origin(x2), x);
        assert!(v.is_user(x) && !v.is_user(x1));
    }

    #[test]
    fn fresh_skips_declared_names() {
        let mut v = Vocab::new();
        let y = v.var("y");
        v.var("y_2");
        let y1 = v.fresh(y);
        let next = v.fresh(y);
        assert_eq!(v.name(y1), "y_1");
        assert_eq!(v.name(next), "y_3");
        let y11 = v.fresh(y1);
        assert_eq!(v.name(y11), "y_1_1");
    }

    #[test]
    fn apply_letter_cons() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x", "x1"], "abx=xba");
        let x = v.lookup("x").unwrap();
        let x1 = v.lookup("x1").unwrap();
        let t = apply_subst(&e.lhs, &Subst::letter_cons(x, 'a', x1));
        assert_eq!(t.show(&v), "abax1");
        assert_eq!(apply_subst(&StringTerm::var(x), &Subst::eps(x)), StringTerm::eps());
    }

    #[test]
    fn apply_var_cons() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x", "y", "x1"], "xaby=ybax");
        let (x, y, x1) = (v.lookup("x").unwrap(), v.lookup("y").unwrap(), v.lookup("x1").unwrap());
        let t = apply_subst(&e.lhs, &Subst::var_cons(x, y, x1));
        assert_eq!(t.show(&v), "yx1aby");
    }

    #[test]
    fn substitution_kinds() {
        let mut v = Vocab::new();
        let x = v.var("x");
        let y = v.var("y");
        assert_eq!(Subst::eps(x).kind(), SubstKind::Eps);
        assert_eq!(Subst::rename(x, y).kind(), SubstKind::Rename);
        assert_eq!(Subst::var_cons(x, y, y).kind(), SubstKind::VarCons);
        assert!(Subst::letter_cons(x, 'a', y).is_progressing());
        assert_eq!(Subst::rename(x, y).show(&v), "[y/x]");
    }

    #[test]
    fn alphabet_is_padded() {
        assert_eq!(Alphabet::from_letters(['a']).0, vec!['a', 'b']);
        assert_eq!(Alphabet::from_letters([]).0, vec!['a', 'b']);
        assert_eq!(Alphabet::from_letters(['b']).0, vec!['a', 'b']);
        assert_eq!(Alphabet::from_letters(['a', 'c']).0, vec!['a', 'c']);
    }

    #[test]
    fn quadraticity() {
        let mut v = Vocab::new();
        let e = equation(&mut v, &["x"], "abx=xba");
        assert!(EquationSystem::new(vec![e.clone()]).is_quadratic());
        assert!(!EquationSystem::new(vec![e.clone(), e]).is_quadratic());
    }
}
