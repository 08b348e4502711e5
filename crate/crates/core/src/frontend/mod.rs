//! SMT-LIB front end, the top-level strategy, a benchmark generator and a
//! brute-force oracle.
//!
//! ```
//! use kepler::frontend::{parse, solve_script, Answer, SolveConfig};
//!
//! let script = parse(r#"
//!     (declare-fun x () String)
//!     (assert (= (str.++ "ab" x) (str.++ x "ba")))
//!     (check-sat)"#).unwrap();
//! let out = solve_script(&script, &SolveConfig::default()).unwrap();
//! let Answer::Sat(m) = &out.answer else { panic!() };
//! assert_eq!(m.strings[&script.strings[0]], "a");
//! ```

mod bench;
mod oracle;
mod smtlib;
mod strategy;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use bench::{gen_bench, BENCH_SEED};
pub use oracle::{oracle, OracleResult};
pub use smtlib::{parse, Script};
pub use strategy::{membership_lengths, solve_cube, CubeOutcome, DumpRequest, Dumps, Route};

use crate::ast::{ArithFormula, Assignment, IntVar, LinExpr, StringTerm, Vocab};
use crate::automata::regex_to_dfa;
use crate::normalize::{alphabet_of, normalize, NormalizeError, Options, RawFormula};
use crate::presburger::{self, sat_with, SatResult};
use crate::reduce::{Budget, SearchLimits};
use crate::regex_combine::WidenConfig;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: parse error: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unsupported construct: {construct}")]
    Unsupported { line: usize, col: usize, construct: String },
    #[error("normalization failed: {0}")]
    Normalize(#[from] NormalizeError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Internal,
    /// Stop after producing the arithmetic query.
    ExportOnly,
}

#[derive(Clone, Debug, Default)]
pub struct SolveConfig {
    pub budget: Budget,
    pub widen: WidenConfig,
    pub presburger: presburger::Config,
    pub search: SearchLimits,
    pub backend: Backend,
    pub normalize: Options,
    pub dumps: DumpRequest,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub strings: Assignment,
    pub ints: BTreeMap<IntVar, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Sat(Model),
    Unsat,
    /// A reason of the form `code: detail`.
    Unknown(String),
}

impl Answer {
    pub fn label(&self) -> &'static str {
        match self {
            Answer::Sat(_) => "sat",
            Answer::Unsat => "unsat",
            Answer::Unknown(_) => "unknown",
        }
    }
}

/// Result of solving a whole script.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub answer: Answer,
    /// Per-cube results, in order, up to the first satisfiable cube.
    pub cubes: Vec<CubeOutcome>,
    pub elapsed: Duration,
}

impl Outcome {
    /// Dumps of all cubes, joined with a comment line per cube when there
    /// is more than one.
    pub fn dump(&self, pick: impl Fn(&Dumps) -> Option<&String>, comment: &str) -> Option<String> {
        let parts: Vec<&String> = self.cubes.iter().filter_map(|c| pick(&c.dumps)).collect();
        if parts.is_empty() {
            return None;
        }
        if parts.len() == 1 {
            return Some(parts[0].clone());
        }
        let mut out = String::new();
        for (i, p) in parts.iter().enumerate() {
            out.push_str(&format!("{comment} cube {}\n{p}", i + 1));
        }
        Some(out)
    }
}

/// Normalizes and solves a parsed script. A satisfiable answer carries a
/// model checked against the original assertions.
pub fn solve_script(script: &Script, cfg: &SolveConfig) -> Result<Outcome, FrontendError> {
    let start = Instant::now();
    let mut vocab = script.vocab.clone();
    let alphabet = alphabet_of(&script.formula);
    let cubes = normalize(&script.formula, &alphabet, &mut vocab, &cfg.normalize)?;
    let mut outcomes = Vec::new();
    let mut reasons = Vec::new();
    for nf in &cubes {
        let mut c = cfg.clone();
        c.budget.wall_time = cfg.budget.wall_time.saturating_sub(start.elapsed());
        let o = solve_cube(nf, &alphabet, &mut vocab, &c, &cfg.dumps);
        match &o.answer {
            Answer::Sat(m) => {
                let m = complete_model(script, m);
                let answer = if holds(&script.formula, &m, &alphabet_of(&script.formula), &cfg.presburger) {
                    Answer::Sat(m)
                } else {
                    Answer::Unknown("model-verification: candidate fails the original assertions".into())
                };
                outcomes.push(o);
                return Ok(Outcome { answer, cubes: outcomes, elapsed: start.elapsed() });
            }
            Answer::Unknown(r) => reasons.push(r.clone()),
            Answer::Unsat => {}
        }
        outcomes.push(o);
    }
    let answer = if reasons.is_empty() { Answer::Unsat } else { Answer::Unknown(reasons.join("; ")) };
    Ok(Outcome { answer, cubes: outcomes, elapsed: start.elapsed() })
}

/// Restricts the model to declared variables, defaulting missing ones to
/// the empty string and zero.
fn complete_model(script: &Script, m: &Model) -> Model {
    let strings = script.strings.iter().map(|v| (*v, m.strings.get(v).cloned().unwrap_or_default())).collect();
    let ints = script
        .ints
        .iter()
        .map(|n| {
            let k = IntVar::int(n);
            let val = m.ints.get(&k).copied().unwrap_or(0);
            (k, val)
        })
        .collect();
    Model { strings, ints }
}

/// Truth of an arithmetic formula under a total assignment of its free
/// variables; quantifiers are handed to the arithmetic solver.
pub fn arith_holds(f: &ArithFormula, m: &BTreeMap<IntVar, i64>, cfg: &presburger::Config) -> bool {
    if let Some(b) = f.eval(m) {
        return b;
    }
    let fixed: BTreeMap<IntVar, LinExpr> = m.iter().map(|(k, v)| (k.clone(), LinExpr::constant(*v))).collect();
    let g = f.substitute(&fixed);
    if !g.free_vars().is_empty() {
        return false;
    }
    matches!(sat_with(&g, cfg), SatResult::Sat(_))
}

/// Evaluates a raw formula under a model.
pub fn holds(f: &RawFormula, m: &Model, alphabet: &crate::ast::Alphabet, cfg: &presburger::Config) -> bool {
    let eval = |t: &StringTerm| t.eval(&m.strings);
    match f {
        RawFormula::True => true,
        RawFormula::False => false,
        RawFormula::Eq(l, r) => eval(l) == eval(r),
        RawFormula::Member(t, r) => regex_to_dfa(r, alphabet).accepts(&eval(t)),
        RawFormula::Arith(a) => {
            let mut vals = m.ints.clone();
            for v in a.free_vars() {
                if let IntVar::Len(x) = v {
                    vals.insert(v, m.strings.get(&x).map_or(0, |w| w.chars().count()) as i64);
                } else {
                    vals.entry(v).or_insert(0);
                }
            }
            arith_holds(a, &vals, cfg)
        }
        RawFormula::Not(g) => !holds(g, m, alphabet, cfg),
        RawFormula::And(fs) => fs.iter().all(|g| holds(g, m, alphabet, cfg)),
        RawFormula::Or(fs) => fs.iter().any(|g| holds(g, m, alphabet, cfg)),
    }
}

fn quote(w: &str) -> String {
    format!("\"{}\"", w.replace('"', "\"\""))
}

/// `(define-fun x () String "...")` lines for the declared variables.
pub fn format_model(script: &Script, m: &Model, vocab: &Vocab) -> String {
    let mut out = String::new();
    for v in &script.strings {
        let w = m.strings.get(v).map(String::as_str).unwrap_or("");
        out.push_str(&format!("(define-fun {} () String {})\n", vocab.name(*v), quote(w)));
    }
    for n in &script.ints {
        let k = m.ints.get(&IntVar::int(n)).copied().unwrap_or(0);
        let val = if k < 0 { format!("(- {})", -k) } else { k.to_string() };
        out.push_str(&format!("(define-fun {n} () Int {val})\n"));
    }
    out
}

/// Parses, normalizes and runs the oracle on every cube.
pub fn oracle_script(script: &Script, max_len: usize, opts: &Options) -> Result<OracleResult, FrontendError> {
    let mut vocab = script.vocab.clone();
    let alphabet = alphabet_of(&script.formula);
    for nf in normalize(&script.formula, &alphabet, &mut vocab, opts)? {
        if let r @ OracleResult::Sat(..) = oracle(&nf, &alphabet, max_len) {
            return Ok(r);
        }
    }
    Ok(OracleResult::UnsatWithinBound)
}

#[cfg(test)]
mod tests;
