//! Reader for the supported SMT-LIB subset.

use std::collections::BTreeMap;

use super::FrontendError;
use crate::ast::{ArithFormula, IntVar, LinExpr, Regex, StringTerm, Symbol, Var, Vocab};
use crate::normalize::RawFormula;
use crate::sexp::{parse_all, Sexp, SexpKind};

/// A parsed script: the conjunction of its assertions plus declarations.
#[derive(Clone, Debug)]
pub struct Script {
    pub vocab: Vocab,
    pub formula: RawFormula,
    /// Declared string variables, in declaration order.
    pub strings: Vec<Var>,
    /// Declared integer variables, in declaration order.
    pub ints: Vec<String>,
    pub check_sat: bool,
    pub get_model: bool,
    /// Value of `(set-info :status ...)`, if given.
    pub status: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sort {
    Str,
    Int,
}

enum Term {
    Str(StringTerm),
    Int(LinExpr),
}

const UNSUPPORTED_OPS: &[&str] = &[
    "str.replace",
    "str.replace_all",
    "str.replaceall",
    "str.replace_re",
    "str.replace_re_all",
    "str.at",
    "str.substr",
    "str.contains",
    "str.prefixof",
    "str.suffixof",
    "str.indexof",
    "str.to_int",
    "str.to.int",
    "str.from_int",
    "int.to.str",
    "str.to_code",
    "str.from_code",
    "str.is_digit",
    "str.<",
    "str.<=",
    "str.lt",
    "str.le",
    "ite",
    "forall",
    "div",
    "mod",
    "abs",
    "let",
];

const UNSUPPORTED_COMMANDS: &[&str] =
    &["push", "pop", "get-value", "check-sat-assuming", "define-fun", "define-fun-rec", "define-sort", "get-assertions"];

struct Reader {
    vocab: Vocab,
    sorts: BTreeMap<String, Sort>,
    bound: Vec<String>,
    strings: Vec<Var>,
    ints: Vec<String>,
}

fn perr(s: &Sexp, msg: impl Into<String>) -> FrontendError {
    FrontendError::Parse { line: s.line, col: s.col, msg: msg.into() }
}

fn unsupported(s: &Sexp, construct: impl Into<String>) -> FrontendError {
    FrontendError::Unsupported { line: s.line, col: s.col, construct: construct.into() }
}

/// Parses a script into one formula.
pub fn parse(src: &str) -> Result<Script, FrontendError> {
    let forms = parse_all(src).map_err(|e| FrontendError::Parse { line: e.line, col: e.col, msg: e.msg })?;
    let mut r = Reader { vocab: Vocab::new(), sorts: BTreeMap::new(), bound: Vec::new(), strings: Vec::new(), ints: Vec::new() };
    let mut asserts = Vec::new();
    let mut check_sat = false;
    let mut get_model = false;
    let mut status = None;
    for f in &forms {
        let items = f.list().ok_or_else(|| perr(f, "expected a command"))?;
        let head = f.head().ok_or_else(|| perr(f, "expected a command"))?;
        match head {
            "set-logic" => {
                let logic = items.get(1).and_then(|s| s.atom()).ok_or_else(|| perr(f, "set-logic needs a name"))?;
                if !matches!(logic, "QF_S" | "QF_SLIA" | "ALL") {
                    return Err(unsupported(&items[1], format!("logic {logic}")));
                }
            }
            "set-info" => {
                if items.get(1).and_then(|s| s.atom()) == Some(":status") {
                    status = items.get(2).and_then(|s| s.atom()).map(String::from);
                }
            }
            "set-option" | "exit" | "echo" => {}
            "declare-fun" => {
                if items.len() != 4 {
                    return Err(perr(f, "declare-fun takes a name, an argument list and a sort"));
                }
                match items[2].list() {
                    Some([]) => {}
                    _ => return Err(unsupported(&items[2], "function with arguments")),
                }
                r.declare(&items[1], &items[3])?;
            }
            "declare-const" => {
                if items.len() != 3 {
                    return Err(perr(f, "declare-const takes a name and a sort"));
                }
                r.declare(&items[1], &items[2])?;
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(perr(f, "assert takes one formula"));
                }
                asserts.push(r.formula(&items[1])?);
            }
            "check-sat" => check_sat = true,
            "get-model" => get_model = true,
            h if UNSUPPORTED_COMMANDS.contains(&h) => return Err(unsupported(f, h)),
            h => return Err(perr(f, format!("unknown command {h}"))),
        }
    }
    let formula = match asserts.len() {
        0 => RawFormula::True,
        1 => asserts.pop().unwrap(),
        _ => RawFormula::And(asserts),
    };
    Ok(Script { vocab: r.vocab, formula, strings: r.strings, ints: r.ints, check_sat, get_model, status })
}

fn numeral(s: &Sexp) -> Option<i64> {
    let a = s.atom()?;
    if a.is_empty() || !a.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    a.parse().ok()
}

impl Reader {
    fn declare(&mut self, name: &Sexp, sort: &Sexp) -> Result<(), FrontendError> {
        let n = name.atom().ok_or_else(|| perr(name, "expected a symbol"))?;
        if self.sorts.contains_key(n) {
            return Err(perr(name, format!("{n} declared twice")));
        }
        match sort.atom() {
            Some("String") => {
                let v = self.vocab.var(n);
                self.strings.push(v);
                self.sorts.insert(n.to_string(), Sort::Str);
            }
            Some("Int") => {
                self.ints.push(n.to_string());
                self.sorts.insert(n.to_string(), Sort::Int);
            }
            _ => return Err(unsupported(sort, "sort other than String or Int")),
        }
        Ok(())
    }

    fn args<'s>(&self, s: &'s Sexp, min: usize) -> Result<&'s [Sexp], FrontendError> {
        let items = s.list().unwrap_or(&[]);
        if items.len() < min + 1 {
            return Err(perr(s, format!("{} needs at least {min} arguments", s.head().unwrap_or("?"))));
        }
        Ok(&items[1..])
    }

    fn formula(&mut self, s: &Sexp) -> Result<RawFormula, FrontendError> {
        match &s.kind {
            SexpKind::Atom(a) if a == "true" => return Ok(RawFormula::True),
            SexpKind::Atom(a) if a == "false" => return Ok(RawFormula::False),
            SexpKind::Atom(a) => return Err(perr(s, format!("expected a formula, found {a}"))),
            SexpKind::Str(_) => return Err(perr(s, "expected a formula, found a string")),
            SexpKind::List(_) => {}
        }
        let head = s.head().ok_or_else(|| perr(s, "expected an operator"))?;
        match head {
            "and" => Ok(RawFormula::And(self.args(s, 1)?.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?)),
            "or" => Ok(RawFormula::Or(self.args(s, 1)?.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?)),
            "not" => {
                let a = self.args(s, 1)?;
                if a.len() != 1 {
                    return Err(perr(s, "not takes one argument"));
                }
                Ok(RawFormula::not(self.formula(&a[0])?))
            }
            "=>" => {
                let a = self.args(s, 2)?;
                let mut parts: Vec<RawFormula> = Vec::new();
                for p in &a[..a.len() - 1] {
                    parts.push(RawFormula::not(self.formula(p)?));
                }
                parts.push(self.formula(&a[a.len() - 1])?);
                Ok(RawFormula::Or(parts))
            }
            "=" | "distinct" => {
                let a = self.args(s, 2)?;
                let terms: Vec<Term> = a.iter().map(|t| self.term(t)).collect::<Result<_, _>>()?;
                let mut out = Vec::new();
                let pairs: Vec<(usize, usize)> = if head == "=" {
                    (1..terms.len()).map(|i| (i - 1, i)).collect()
                } else {
                    (0..terms.len()).flat_map(|i| (i + 1..terms.len()).map(move |j| (i, j))).collect()
                };
                for (i, j) in pairs {
                    let atom = match (&terms[i], &terms[j]) {
                        (Term::Str(l), Term::Str(r)) => RawFormula::Eq(l.clone(), r.clone()),
                        (Term::Int(l), Term::Int(r)) => RawFormula::Arith(ArithFormula::eq(l.clone(), r.clone())),
                        _ => return Err(perr(&a[j], "sort mismatch")),
                    };
                    out.push(if head == "=" { atom } else { RawFormula::not(atom) });
                }
                Ok(if out.len() == 1 { out.pop().unwrap() } else { RawFormula::And(out) })
            }
            "<=" | "<" | ">=" | ">" => {
                let a = self.args(s, 2)?;
                let es: Vec<LinExpr> = a.iter().map(|t| self.int_term(t)).collect::<Result<_, _>>()?;
                let mut out = Vec::new();
                for w in es.windows(2) {
                    let (l, r) = (w[0].clone(), w[1].clone());
                    out.push(RawFormula::Arith(match head {
                        "<=" => ArithFormula::ge(r, l),
                        "<" => ArithFormula::gt(r, l),
                        ">=" => ArithFormula::ge(l, r),
                        _ => ArithFormula::gt(l, r),
                    }));
                }
                Ok(if out.len() == 1 { out.pop().unwrap() } else { RawFormula::And(out) })
            }
            "str.in_re" | "str.in.re" => {
                let a = self.args(s, 2)?;
                if a.len() != 2 {
                    return Err(perr(s, "membership takes a string and a regex"));
                }
                let t = self.str_term(&a[0])?;
                Ok(RawFormula::Member(t, self.regex(&a[1])?))
            }
            "exists" => {
                let a = self.args(s, 2)?;
                if a.len() != 2 {
                    return Err(perr(s, "exists takes a binder list and a body"));
                }
                let binders = a[0].list().ok_or_else(|| perr(&a[0], "expected binders"))?;
                let mut names = Vec::new();
                for b in binders {
                    match b.list() {
                        Some([n, sort]) if sort.atom() == Some("Int") => {
                            names.push(n.atom().ok_or_else(|| perr(n, "expected a symbol"))?.to_string())
                        }
                        Some([_, sort]) => return Err(unsupported(sort, "quantifier over a non-Int sort")),
                        _ => return Err(perr(b, "expected (name Sort)")),
                    }
                }
                let depth = self.bound.len();
                self.bound.extend(names.iter().cloned());
                let body = self.formula(&a[1]);
                self.bound.truncate(depth);
                let body = pure_arith(&body?).ok_or_else(|| unsupported(&a[1], "string constraint under a quantifier"))?;
                Ok(RawFormula::Arith(ArithFormula::exists(names.iter().map(|n| IntVar::int(n)).collect(), body)))
            }
            h if UNSUPPORTED_OPS.contains(&h) => Err(unsupported(s, h)),
            h => Err(perr(s, format!("unknown predicate {h}"))),
        }
    }

    fn sort_of(&self, name: &str) -> Option<Sort> {
        if self.bound.iter().any(|b| b == name) {
            return Some(Sort::Int);
        }
        self.sorts.get(name).copied()
    }

    fn term(&mut self, s: &Sexp) -> Result<Term, FrontendError> {
        match &s.kind {
            SexpKind::Str(w) => Ok(Term::Str(StringTerm::word(w))),
            SexpKind::Atom(a) => {
                if let Some(k) = numeral(s) {
                    return Ok(Term::Int(LinExpr::constant(k)));
                }
                match self.sort_of(a) {
                    Some(Sort::Str) => Ok(Term::Str(StringTerm::var(self.vocab.var(a)))),
                    Some(Sort::Int) => Ok(Term::Int(LinExpr::var(IntVar::int(a)))),
                    None => Err(perr(s, format!("undeclared symbol {a}"))),
                }
            }
            SexpKind::List(_) => match s.head() {
                Some("str.++") => Ok(Term::Str(self.str_term(s)?)),
                Some("str.len" | "+" | "-" | "*") => Ok(Term::Int(self.int_term(s)?)),
                Some(h) if UNSUPPORTED_OPS.contains(&h) => Err(unsupported(s, h)),
                Some(h) => Err(perr(s, format!("unknown function {h}"))),
                None => Err(perr(s, "expected a term")),
            },
        }
    }

    fn str_term(&mut self, s: &Sexp) -> Result<StringTerm, FrontendError> {
        if s.head() == Some("str.++") {
            let mut out = StringTerm::eps();
            for a in self.args(s, 0)? {
                out = out.concat(&self.str_term(a)?);
            }
            return Ok(out);
        }
        match self.term(s)? {
            Term::Str(t) => Ok(t),
            Term::Int(_) => Err(perr(s, "expected a string term")),
        }
    }

    fn int_term(&mut self, s: &Sexp) -> Result<LinExpr, FrontendError> {
        let Some(head) = s.head() else {
            return match self.term(s)? {
                Term::Int(e) => Ok(e),
                Term::Str(_) => Err(perr(s, "expected an integer term")),
            };
        };
        match head {
            "str.len" => {
                let a = self.args(s, 1)?;
                if a.len() != 1 {
                    return Err(perr(s, "str.len takes one argument"));
                }
                let t = self.str_term(&a[0])?;
                let mut e = LinExpr::constant(0);
                for sym in &t.0 {
                    match sym {
                        Symbol::Letter(_) => e = e.offset(1),
                        Symbol::Var(v) => e.add_term(1, IntVar::Len(*v)),
                    }
                }
                Ok(e)
            }
            "+" => {
                let mut e = LinExpr::constant(0);
                for a in self.args(s, 1)? {
                    e = e.plus(&self.int_term(a)?);
                }
                Ok(e)
            }
            "-" => {
                let a = self.args(s, 1)?;
                let first = self.int_term(&a[0])?;
                if a.len() == 1 {
                    return Ok(first.scaled(-1));
                }
                let mut e = first;
                for b in &a[1..] {
                    e = e.minus(&self.int_term(b)?);
                }
                Ok(e)
            }
            "*" => {
                let mut k = 1i64;
                let mut rest: Option<LinExpr> = None;
                for a in self.args(s, 2)? {
                    let e = self.int_term(a)?;
                    if e.is_constant() {
                        k = k.checked_mul(e.constant).ok_or_else(|| perr(a, "constant overflow"))?;
                    } else if rest.is_none() {
                        rest = Some(e);
                    } else {
                        return Err(unsupported(s, "nonlinear multiplication"));
                    }
                }
                Ok(match rest {
                    Some(e) => e.scaled(k),
                    None => LinExpr::constant(k),
                })
            }
            _ => match self.term(s)? {
                Term::Int(e) => Ok(e),
                Term::Str(_) => Err(perr(s, "expected an integer term")),
            },
        }
    }

    fn literal(&self, s: &Sexp) -> Result<String, FrontendError> {
        match &s.kind {
            SexpKind::Str(w) => Ok(w.clone()),
            _ => Err(perr(s, "expected a string literal")),
        }
    }

    fn regex(&mut self, s: &Sexp) -> Result<Regex, FrontendError> {
        if let Some(a) = s.atom() {
            return match a {
                "re.none" | "re.nostr" => Ok(Regex::Empty),
                "re.allchar" => Ok(Regex::AnyLetter),
                "re.all" => Ok(Regex::star(Regex::AnyLetter)),
                _ => Err(perr(s, format!("unknown regex {a}"))),
            };
        }
        let items = s.list().ok_or_else(|| perr(s, "expected a regex"))?;
        if let Some(ix) = items.first().filter(|h| h.head() == Some("_")) {
            return self.indexed_regex(s, ix, &items[1..]);
        }
        let head = s.head().ok_or_else(|| perr(s, "expected a regex operator"))?;
        let many = |r: &mut Self, min: usize| -> Result<Vec<Regex>, FrontendError> {
            r.args(s, min)?.iter().map(|a| r.regex(a)).collect()
        };
        match head {
            "str.to_re" | "str.to.re" => {
                let a = self.args(s, 1)?;
                let w = self.literal(&a[0])?;
                Ok(if w.is_empty() { Regex::Epsilon } else { Regex::Word(w) })
            }
            "re.++" => Ok(Regex::Concat(many(self, 1)?)),
            "re.union" => Ok(Regex::Union(many(self, 1)?)),
            "re.inter" => Ok(Regex::Intersect(many(self, 1)?)),
            "re.comp" => Ok(Regex::complement(self.one_regex(s)?)),
            "re.*" => Ok(Regex::star(self.one_regex(s)?)),
            "re.+" => {
                let r = self.one_regex(s)?;
                Ok(Regex::Concat(vec![r.clone(), Regex::star(r)]))
            }
            "re.opt" => Ok(Regex::Union(vec![Regex::Epsilon, self.one_regex(s)?])),
            "re.range" => {
                let a = self.args(s, 2)?;
                let (lo, hi) = (self.literal(&a[0])?, self.literal(&a[1])?);
                let (mut l, mut h) = (lo.chars(), hi.chars());
                match (l.next(), l.next(), h.next(), h.next()) {
                    (Some(x), None, Some(y), None) if x <= y => Ok(Regex::Union((x..=y).map(Regex::Letter).collect())),
                    (Some(_), None, Some(_), None) => Ok(Regex::Empty),
                    _ => Err(perr(s, "re.range takes single-character strings")),
                }
            }
            h if h.starts_with("re.") => Err(unsupported(s, h)),
            h => Err(perr(s, format!("unknown regex operator {h}"))),
        }
    }

    fn one_regex(&mut self, s: &Sexp) -> Result<Regex, FrontendError> {
        let a = self.args(s, 1)?;
        if a.len() != 1 {
            return Err(perr(s, format!("{} takes one argument", s.head().unwrap_or("?"))));
        }
        self.regex(&a[0])
    }

    fn indexed_regex(&mut self, s: &Sexp, ix: &Sexp, args: &[Sexp]) -> Result<Regex, FrontendError> {
        let parts = ix.list().unwrap_or(&[]);
        let name = parts.get(1).and_then(|p| p.atom()).unwrap_or("");
        let nums: Vec<i64> = parts[2.min(parts.len())..].iter().map(|p| numeral(p).ok_or_else(|| perr(p, "expected a numeral"))).collect::<Result<_, _>>()?;
        if args.len() != 1 {
            return Err(perr(s, "indexed regex operator takes one argument"));
        }
        let r = self.regex(&args[0])?;
        let (lo, hi) = match (name, nums.as_slice()) {
            ("re.^", [n]) => (*n, *n),
            ("re.loop", [l, h]) => (*l, *h),
            _ => return Err(unsupported(ix, format!("indexed operator {name}"))),
        };
        if hi > 64 {
            return Err(unsupported(ix, "repetition bound above 64"));
        }
        let mut alts = Vec::new();
        for k in lo..=hi {
            alts.push(if k == 0 { Regex::Epsilon } else { Regex::Concat(vec![r.clone(); k as usize]) });
        }
        Ok(if alts.is_empty() { Regex::Empty } else { Regex::Union(alts) })
    }
}

/// A quantifier-free combination of arithmetic atoms as one arithmetic formula.
fn pure_arith(f: &RawFormula) -> Option<ArithFormula> {
    Some(match f {
        RawFormula::True => ArithFormula::True,
        RawFormula::False => ArithFormula::False,
        RawFormula::Arith(a) => a.clone(),
        RawFormula::And(fs) => ArithFormula::and(fs.iter().map(pure_arith).collect::<Option<_>>()?),
        RawFormula::Or(fs) => ArithFormula::or(fs.iter().map(pure_arith).collect::<Option<_>>()?),
        RawFormula::Not(g) => negate(&pure_arith(g)?)?,
        RawFormula::Eq(..) | RawFormula::Member(..) => return None,
    })
}

fn negate(a: &ArithFormula) -> Option<ArithFormula> {
    use crate::ast::Rel;
    Some(match a {
        ArithFormula::True => ArithFormula::False,
        ArithFormula::False => ArithFormula::True,
        ArithFormula::Atom(l, r, rhs) => {
            let at = |rel| ArithFormula::Atom(l.clone(), rel, rhs.clone());
            match r {
                Rel::Eq => ArithFormula::or(vec![at(Rel::Lt), at(Rel::Gt)]),
                Rel::Le => at(Rel::Gt),
                Rel::Lt => at(Rel::Ge),
                Rel::Ge => at(Rel::Lt),
                Rel::Gt => at(Rel::Le),
            }
        }
        ArithFormula::And(fs) => ArithFormula::or(fs.iter().map(negate).collect::<Option<_>>()?),
        ArithFormula::Or(fs) => ArithFormula::and(fs.iter().map(negate).collect::<Option<_>>()?),
        ArithFormula::Exists(..) | ArithFormula::Pred(..) => return None,
    })
}
