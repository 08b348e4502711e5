//! Satisfiability of existential linear integer arithmetic.
//!
//! Existentials are renamed apart and dropped. Disjunctions are explored
//! depth-first; at every node the committed conjunction of atoms is checked
//! for integer feasibility, and a feasible model that already satisfies the
//! whole formula ends the search. Conjunctions are decided by exact equality
//! elimination followed by branch and bound over a rational simplex, trying
//! a small box first.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ast::{ArithFormula, IntVar, LinExpr, Rel, Vocab};
use crate::sexp::{self, Sexp, SexpKind};

pub type Model = BTreeMap<IntVar, i64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SatResult::Unsat)
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    /// Branch nodes across the whole search.
    pub max_nodes: usize,
    /// Half-width of the box tried before unbounded branch and bound.
    pub box_bound: i64,
}

impl Default for Config {
    fn default() -> Self {
        Config { max_nodes: 100_000, box_bound: 16 }
    }
}

pub fn sat(f: &ArithFormula) -> SatResult {
    sat_with(f, &Config::default())
}

pub fn sat_with(f: &ArithFormula, cfg: &Config) -> SatResult {
    let mut vars = VarTable::default();
    let g = match lower(f, &mut vars, &mut BTreeMap::new()) {
        Ok(g) => g,
        Err(e) => return SatResult::Unknown(e),
    };
    let mut s = Search { nodes: 0, cfg: cfg.clone(), nvars: vars.names.len() };
    match s.dpll(Vec::new(), vec![&g]) {
        Res::Sat(vals) => {
            if g.eval(&vals) != Some(true) {
                return SatResult::Unknown("model check failed".into());
            }
            let mut m = Model::new();
            for (i, name) in vars.names.iter().enumerate() {
                match vals.get(i).copied().unwrap_or(0).to_i64() {
                    Some(v) => {
                        m.insert(name.clone(), v);
                    }
                    None => return SatResult::Unknown("model value overflows i64".into()),
                }
            }
            SatResult::Sat(m)
        }
        Res::Unsat => SatResult::Unsat,
        Res::Unknown(r) => SatResult::Unknown(r),
    }
}

/// `Σ coeffs·x + constant (= | ≥) 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Cons {
    coeffs: Vec<(usize, i128)>,
    constant: i128,
    eq: bool,
}

impl Cons {
    fn eval(&self, vals: &[i128]) -> Option<bool> {
        let mut acc = self.constant;
        for &(v, k) in &self.coeffs {
            acc = acc.checked_add(k.checked_mul(*vals.get(v).unwrap_or(&0))?)?;
        }
        Some(if self.eq { acc == 0 } else { acc >= 0 })
    }

    fn get(&self, v: usize) -> i128 {
        self.coeffs.iter().find(|c| c.0 == v).map_or(0, |c| c.1)
    }

    /// Substitutes `x_v := expr` where expr is `(coeffs, constant)`.
    fn subst(&self, v: usize, expr: &(Vec<(usize, i128)>, i128)) -> Option<Cons> {
        let k = self.get(v);
        if k == 0 {
            return Some(self.clone());
        }
        let mut map: BTreeMap<usize, i128> = BTreeMap::new();
        for &(w, c) in &self.coeffs {
            if w != v {
                *map.entry(w).or_insert(0) += c;
            }
        }
        for &(w, c) in &expr.0 {
            let e = map.entry(w).or_insert(0);
            *e = e.checked_add(c.checked_mul(k)?)?;
        }
        let constant = self.constant.checked_add(expr.1.checked_mul(k)?)?;
        Some(Cons {
            coeffs: map.into_iter().filter(|&(_, c)| c != 0).collect(),
            constant,
            eq: self.eq,
        })
    }

    /// Divides by the coefficient gcd, tightening inequalities.
    /// `None` means the constraint is unsatisfiable on its own.
    fn normalized(mut self) -> Option<Cons> {
        self.coeffs.retain(|c| c.1 != 0);
        if self.coeffs.is_empty() {
            let ok = if self.eq { self.constant == 0 } else { self.constant >= 0 };
            return ok.then_some(self);
        }
        let g = self.coeffs.iter().fold(0i128, |g, c| g.gcd(&c.1));
        if g > 1 {
            if self.eq {
                if self.constant % g != 0 {
                    return None;
                }
                self.constant /= g;
            } else {
                self.constant = Integer::div_floor(&self.constant, &g);
            }
            for c in &mut self.coeffs {
                c.1 /= g;
            }
        }
        Some(self)
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.is_empty()
    }
}

#[derive(Clone, Debug)]
enum F {
    True,
    False,
    Atom(Cons),
    And(Vec<F>),
    Or(Vec<F>),
}

impl F {
    fn eval(&self, vals: &[i128]) -> Option<bool> {
        Some(match self {
            F::True => true,
            F::False => false,
            F::Atom(c) => c.eval(vals)?,
            F::And(fs) => {
                for f in fs {
                    if !f.eval(vals)? {
                        return Some(false);
                    }
                }
                true
            }
            F::Or(fs) => {
                for f in fs {
                    if f.eval(vals)? {
                        return Some(true);
                    }
                }
                false
            }
        })
    }
}

#[derive(Default)]
struct VarTable {
    names: Vec<IntVar>,
    free: BTreeMap<IntVar, usize>,
    bound_count: usize,
}

fn lower(f: &ArithFormula, vars: &mut VarTable, scope: &mut BTreeMap<IntVar, usize>) -> Result<F, String> {
    Ok(match f {
        ArithFormula::True => F::True,
        ArithFormula::False => F::False,
        ArithFormula::Atom(l, r, rhs) => {
            let e = l.clone().minus(rhs);
            let (e, eq) = match r {
                Rel::Eq => (e, true),
                Rel::Ge => (e, false),
                Rel::Gt => (e.offset(-1), false),
                Rel::Le => (e.scaled(-1), false),
                Rel::Lt => (e.scaled(-1).offset(-1), false),
            };
            let mut coeffs: BTreeMap<usize, i128> = BTreeMap::new();
            for (v, k) in &e.coeffs {
                let idx = match scope.get(v) {
                    Some(&i) => i,
                    None => match vars.free.get(v) {
                        Some(&i) => i,
                        None => {
                            let i = vars.names.len();
                            vars.names.push(v.clone());
                            vars.free.insert(v.clone(), i);
                            i
                        }
                    },
                };
                *coeffs.entry(idx).or_insert(0) += *k as i128;
            }
            F::Atom(Cons {
                coeffs: coeffs.into_iter().filter(|&(_, c)| c != 0).collect(),
                constant: e.constant as i128,
                eq,
            })
        }
        ArithFormula::And(fs) => F::And(fs.iter().map(|g| lower(g, vars, scope)).collect::<Result<_, _>>()?),
        ArithFormula::Or(fs) => F::Or(fs.iter().map(|g| lower(g, vars, scope)).collect::<Result<_, _>>()?),
        ArithFormula::Exists(vs, body) => {
            let saved: Vec<(IntVar, Option<usize>)> = vs.iter().map(|v| (v.clone(), scope.get(v).copied())).collect();
            for v in vs {
                vars.bound_count += 1;
                let name = match v {
                    IntVar::Int(s) => IntVar::Int(format!("{s}!{}", vars.bound_count)),
                    IntVar::Len(_) => IntVar::Int(format!("len!{}", vars.bound_count)),
                };
                let i = vars.names.len();
                vars.names.push(name);
                scope.insert(v.clone(), i);
            }
            let out = lower(body, vars, scope)?;
            for (v, old) in saved {
                match old {
                    Some(i) => scope.insert(v, i),
                    None => scope.remove(&v),
                };
            }
            out
        }
        ArithFormula::Pred(p, _) => return Err(format!("uninterpreted predicate {p}")),
    })
}

enum Res {
    Sat(Vec<i128>),
    Unsat,
    Unknown(String),
}

struct Search {
    nodes: usize,
    cfg: Config,
    nvars: usize,
}

impl Search {
    fn dpll<'a>(&mut self, mut committed: Vec<Cons>, mut pending: Vec<&'a F>) -> Res {
        let mut ors: Vec<&'a F> = Vec::new();
        while let Some(f) = pending.pop() {
            match f {
                F::True => {}
                F::False => return Res::Unsat,
                F::Atom(c) => committed.push(c.clone()),
                F::And(fs) => pending.extend(fs.iter()),
                F::Or(fs) => {
                    if fs.is_empty() {
                        return Res::Unsat;
                    }
                    if fs.len() == 1 {
                        pending.push(&fs[0]);
                    } else {
                        ors.push(f);
                    }
                }
            }
        }
        committed.sort();
        committed.dedup();
        let model = match self.conjunction(&committed) {
            Res::Unsat => return Res::Unsat,
            Res::Sat(m) => Some(m),
            Res::Unknown(r) => {
                if ors.is_empty() {
                    return Res::Unknown(r);
                }
                None
            }
        };
        let choice = match &model {
            Some(m) => ors.iter().position(|o| o.eval(m) != Some(true)),
            None => Some(0),
        };
        let Some(i) = choice else {
            return Res::Sat(model.expect("model present when every disjunction holds"));
        };
        let or = ors.remove(i);
        let F::Or(branches) = or else { unreachable!() };
        let mut unknown = None;
        for b in branches {
            if self.nodes > self.cfg.max_nodes {
                return Res::Unknown("node budget exhausted".into());
            }
            let mut p = ors.clone();
            p.push(b);
            match self.dpll(committed.clone(), p) {
                Res::Sat(m) => return Res::Sat(m),
                Res::Unsat => {}
                Res::Unknown(r) => unknown = Some(r),
            }
        }
        match unknown {
            Some(r) => Res::Unknown(r),
            None => Res::Unsat,
        }
    }

    /// Integer feasibility of a conjunction; models cover every variable.
    fn conjunction(&mut self, cons: &[Cons]) -> Res {
        self.nodes += 1;
        let mut nvars = self.nvars;
        let mut work: Vec<Cons> = Vec::new();
        for c in cons {
            match c.clone().normalized() {
                None => return Res::Unsat,
                Some(c) if c.is_trivial() => {}
                Some(c) => work.push(c),
            }
        }
        // exact equality elimination
        let mut subs: Vec<(usize, (Vec<(usize, i128)>, i128))> = Vec::new();
        while let Some(pos) = work.iter().position(|c| c.eq) {
            let e = work[pos].clone();
            let unit = e.coeffs.iter().find(|c| c.1.abs() == 1).copied();
            let (v, expr) = match unit {
                Some((v, a)) => {
                    // a·x_v + rest = 0  ⇒  x_v = -a·rest
                    let coeffs = e.coeffs.iter().filter(|c| c.0 != v).map(|&(w, k)| (w, -a * k)).collect();
                    (v, (coeffs, -a * e.constant))
                }
                None => {
                    let &(v, a) = e.coeffs.iter().min_by_key(|c| c.1.abs()).expect("non-trivial");
                    let m = a.abs() + 1;
                    let sigma = nvars;
                    nvars += 1;
                    let sgn = a.signum();
                    // x_v = -sgn·(m·σ − Σ_{i≠v} modhat(a_i)·x_i − modhat(c))
                    let mut coeffs: Vec<(usize, i128)> = vec![(sigma, -sgn * m)];
                    for &(w, k) in &e.coeffs {
                        if w != v {
                            coeffs.push((w, sgn * modhat(k, m)));
                        }
                    }
                    (v, (coeffs, sgn * modhat(e.constant, m)))
                }
            };
            let mut next = Vec::with_capacity(work.len());
            for (i, c) in work.iter().enumerate() {
                if unit.is_some() && i == pos {
                    continue;
                }
                let Some(s) = c.subst(v, &expr) else {
                    return Res::Unknown("coefficient overflow".into());
                };
                match s.normalized() {
                    None => return Res::Unsat,
                    Some(s) if s.is_trivial() => {}
                    Some(s) => next.push(s),
                }
            }
            work = next;
            subs.push((v, expr));
        }
        work.sort();
        work.dedup();
        let ineqs = work;
        let mut used = vec![false; nvars];
        for c in &ineqs {
            for &(v, _) in &c.coeffs {
                used[v] = true;
            }
        }
        let order: Vec<usize> = (0..nvars).filter(|&v| used[v]).collect();
        let b = self.cfg.box_bound as i128;
        let mut res = self.bnb_root(&ineqs, &order, Some(b));
        if matches!(res, Res::Unsat) {
            res = self.bnb_root(&ineqs, &order, None);
        }
        let mut vals = match res {
            Res::Sat(v) => v,
            other => return other,
        };
        vals.resize(nvars, 0);
        for (v, (coeffs, c)) in subs.iter().rev() {
            let mut acc = *c;
            for &(w, k) in coeffs {
                acc += k * vals[w];
            }
            vals[*v] = acc;
        }
        vals.truncate(self.nvars);
        Res::Sat(vals)
    }

    fn bnb_root(&mut self, ineqs: &[Cons], order: &[usize], bound: Option<i128>) -> Res {
        let mut sx = Simplex::new(order.len());
        let col: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        if let Some(b) = bound {
            for i in 0..order.len() {
                if !sx.assert_lower(i, rat(-b)) || !sx.assert_upper(i, rat(b)) {
                    return Res::Unsat;
                }
            }
        }
        for c in ineqs {
            if c.coeffs.len() == 1 {
                let (v, a) = c.coeffs[0];
                let x = col[&v];
                // a·x + k ≥ 0
                let ok = if a > 0 {
                    sx.assert_lower(x, rat(Integer::div_ceil(&(-c.constant), &a)))
                } else {
                    sx.assert_upper(x, rat(Integer::div_floor(&c.constant, &(-a))))
                };
                if !ok {
                    return Res::Unsat;
                }
            } else {
                let row: Vec<(usize, BigRational)> = c.coeffs.iter().map(|&(v, a)| (col[&v], rat(a))).collect();
                let s = sx.add_row(&row);
                if !sx.assert_lower(s, rat(-c.constant)) {
                    return Res::Unsat;
                }
            }
        }
        match self.bnb(sx, order.len()) {
            Res::Sat(vals) => {
                let mut out = vec![0i128; self.nvars.max(order.iter().max().map_or(0, |m| m + 1))];
                for (i, &v) in order.iter().enumerate() {
                    if v >= out.len() {
                        out.resize(v + 1, 0);
                    }
                    out[v] = vals[i];
                }
                Res::Sat(out)
            }
            other => other,
        }
    }

    fn bnb(&mut self, mut sx: Simplex, n: usize) -> Res {
        self.nodes += 1;
        if self.nodes > self.cfg.max_nodes {
            return Res::Unknown("node budget exhausted".into());
        }
        if !sx.check() {
            return Res::Unsat;
        }
        let frac = (0..n).find(|&i| !sx.val[i].is_integer());
        let Some(i) = frac else {
            let mut vals = Vec::with_capacity(n);
            for i in 0..n {
                match sx.val[i].to_integer().to_i128() {
                    Some(v) => vals.push(v),
                    None => return Res::Unknown("value overflow".into()),
                }
            }
            return Res::Sat(vals);
        };
        let v = sx.val[i].clone();
        let mut unknown = None;
        let mut down = sx.clone();
        if down.assert_upper(i, BigRational::from_integer(v.floor().to_integer())) {
            match self.bnb(down, n) {
                Res::Sat(m) => return Res::Sat(m),
                Res::Unknown(r) => unknown = Some(r),
                Res::Unsat => {}
            }
        }
        if sx.assert_lower(i, BigRational::from_integer(v.ceil().to_integer())) {
            match self.bnb(sx, n) {
                Res::Sat(m) => return Res::Sat(m),
                Res::Unknown(r) => unknown = Some(r),
                Res::Unsat => {}
            }
        }
        match unknown {
            Some(r) => Res::Unknown(r),
            None => Res::Unsat,
        }
    }
}

/// Symmetric residue in `(-m/2, m/2]`.
fn modhat(a: i128, m: i128) -> i128 {
    let r = a.rem_euclid(m);
    if 2 * r > m {
        r - m
    } else {
        r
    }
}

fn rat(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// General simplex with bounds (Dutertre and de Moura style, Bland's rule).
#[derive(Clone, Debug)]
struct Simplex {
    /// `rows[r]` expresses basic variable `basic[r]` over nonbasic ones.
    rows: Vec<Vec<BigRational>>,
    basic: Vec<usize>,
    row_of: Vec<Option<usize>>,
    lower: Vec<Option<BigRational>>,
    upper: Vec<Option<BigRational>>,
    val: Vec<BigRational>,
}

impl Simplex {
    fn new(n: usize) -> Self {
        Simplex {
            rows: Vec::new(),
            basic: Vec::new(),
            row_of: vec![None; n],
            lower: vec![None; n],
            upper: vec![None; n],
            val: vec![BigRational::zero(); n],
        }
    }

    fn width(&self) -> usize {
        self.val.len()
    }

    /// Adds slack `s = Σ a·x` over original variables and returns its index.
    fn add_row(&mut self, coeffs: &[(usize, BigRational)]) -> usize {
        let s = self.width();
        for r in &mut self.rows {
            r.push(BigRational::zero());
        }
        self.row_of.push(None);
        self.lower.push(None);
        self.upper.push(None);
        self.val.push(BigRational::zero());
        let mut row = vec![BigRational::zero(); s + 1];
        for (x, a) in coeffs {
            match self.row_of[*x] {
                None => row[*x] += a,
                Some(r) => {
                    let src = self.rows[r].clone();
                    for (j, c) in src.iter().enumerate() {
                        if !c.is_zero() {
                            row[j] += a * c;
                        }
                    }
                }
            }
        }
        let mut v = BigRational::zero();
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                v += c * &self.val[j];
            }
        }
        self.val[s] = v;
        self.row_of[s] = Some(self.rows.len());
        self.rows.push(row);
        self.basic.push(s);
        s
    }

    fn update(&mut self, x: usize, v: BigRational) {
        let delta = &v - &self.val[x];
        for (r, row) in self.rows.iter().enumerate() {
            if !row[x].is_zero() {
                let b = self.basic[r];
                self.val[b] = &self.val[b] + &row[x] * &delta;
            }
        }
        self.val[x] = v;
    }

    fn assert_upper(&mut self, x: usize, c: BigRational) -> bool {
        if self.upper[x].as_ref().is_some_and(|u| *u <= c) {
            return true;
        }
        if self.lower[x].as_ref().is_some_and(|l| *l > c) {
            return false;
        }
        self.upper[x] = Some(c.clone());
        if self.row_of[x].is_none() && self.val[x] > c {
            self.update(x, c);
        }
        true
    }

    fn assert_lower(&mut self, x: usize, c: BigRational) -> bool {
        if self.lower[x].as_ref().is_some_and(|l| *l >= c) {
            return true;
        }
        if self.upper[x].as_ref().is_some_and(|u| *u < c) {
            return false;
        }
        self.lower[x] = Some(c.clone());
        if self.row_of[x].is_none() && self.val[x] < c {
            self.update(x, c);
        }
        true
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let b = self.basic[r];
        let a = self.rows[r][j].clone();
        // x_j = (b − Σ_{k≠j} row_k x_k) / a
        let mut new_row: Vec<BigRational> = self.rows[r].iter().map(|c| -c / &a).collect();
        new_row[j] = BigRational::zero();
        new_row[b] = BigRational::one() / &a;
        for (rr, row) in self.rows.iter_mut().enumerate() {
            if rr == r || row[j].is_zero() {
                continue;
            }
            let f = std::mem::replace(&mut row[j], BigRational::zero());
            for (k, c) in new_row.iter().enumerate() {
                if !c.is_zero() {
                    row[k] += &f * c;
                }
            }
        }
        self.rows[r] = new_row;
        self.basic[r] = j;
        self.row_of[j] = Some(r);
        self.row_of[b] = None;
    }

    fn check(&mut self) -> bool {
        loop {
            let mut viol = None;
            for x in 0..self.width() {
                if let Some(r) = self.row_of[x] {
                    if self.lower[x].as_ref().is_some_and(|l| self.val[x] < *l) {
                        viol = Some((r, x, true));
                        break;
                    }
                    if self.upper[x].as_ref().is_some_and(|u| self.val[x] > *u) {
                        viol = Some((r, x, false));
                        break;
                    }
                }
            }
            let Some((r, b, raise)) = viol else { return true };
            let target = if raise { self.lower[b].clone() } else { self.upper[b].clone() }.expect("bound");
            let mut pick = None;
            for j in 0..self.width() {
                if self.row_of[j].is_some() {
                    continue;
                }
                let a = &self.rows[r][j];
                if a.is_zero() {
                    continue;
                }
                let can_inc = self.upper[j].as_ref().is_none_or(|u| self.val[j] < *u);
                let can_dec = self.lower[j].as_ref().is_none_or(|l| self.val[j] > *l);
                let ok = if raise == a.is_positive() { can_inc } else { can_dec };
                if ok {
                    pick = Some(j);
                    break;
                }
            }
            let Some(j) = pick else { return false };
            let theta = (&target - &self.val[b]) / &self.rows[r][j];
            let vj = &self.val[j] + &theta;
            self.update(j, vj);
            self.pivot(r, j);
        }
    }
}

/// Renders `f` as an SMT-LIB script with integer declarations, one assert
/// and `check-sat`. Length variables are spelled `len!name`.
pub fn export_lia(f: &ArithFormula, vocab: &Vocab) -> String {
    let mut out = String::new();
    let has_exists = contains_exists(f);
    let _ = writeln!(out, "(set-logic {})", if has_exists { "LIA" } else { "QF_LIA" });
    for v in f.free_vars() {
        let _ = writeln!(out, "(declare-const {} Int)", var_name(&v, vocab));
    }
    let mut preds: BTreeMap<String, usize> = BTreeMap::new();
    collect_preds(f, &mut preds);
    for (p, n) in preds {
        let _ = writeln!(out, "(declare-fun {} ({}) Bool)", symbol(&p), vec!["Int"; n].join(" "));
    }
    let _ = writeln!(out, "(assert {})", formula_sexp(f, vocab));
    out.push_str("(check-sat)\n");
    out
}

fn contains_exists(f: &ArithFormula) -> bool {
    match f {
        ArithFormula::Exists(..) => true,
        ArithFormula::And(fs) | ArithFormula::Or(fs) => fs.iter().any(contains_exists),
        _ => false,
    }
}

fn collect_preds(f: &ArithFormula, out: &mut BTreeMap<String, usize>) {
    match f {
        ArithFormula::Pred(p, args) => {
            out.insert(p.clone(), args.len());
        }
        ArithFormula::And(fs) | ArithFormula::Or(fs) => fs.iter().for_each(|g| collect_preds(g, out)),
        ArithFormula::Exists(_, b) => collect_preds(b, out),
        _ => {}
    }
}

fn symbol(s: &str) -> String {
    let simple = !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        s.to_string()
    } else {
        format!("|{s}|")
    }
}

fn var_name(v: &IntVar, vocab: &Vocab) -> String {
    match v {
        IntVar::Len(x) => symbol(&format!("len!{}", vocab.name(*x))),
        IntVar::Int(s) => symbol(s),
    }
}

fn int_lit(k: i64) -> String {
    if k < 0 {
        format!("(- {})", k.unsigned_abs())
    } else {
        k.to_string()
    }
}

fn lin_sexp(e: &LinExpr, vocab: &Vocab) -> String {
    let mut terms: Vec<String> = e
        .coeffs
        .iter()
        .map(|(v, k)| {
            if *k == 1 {
                var_name(v, vocab)
            } else {
                format!("(* {} {})", int_lit(*k), var_name(v, vocab))
            }
        })
        .collect();
    if e.constant != 0 || terms.is_empty() {
        terms.push(int_lit(e.constant));
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

fn formula_sexp(f: &ArithFormula, vocab: &Vocab) -> String {
    match f {
        ArithFormula::True => "true".into(),
        ArithFormula::False => "false".into(),
        ArithFormula::Atom(l, r, rhs) => {
            format!("({} {} {})", r.symbol(), lin_sexp(l, vocab), lin_sexp(rhs, vocab))
        }
        ArithFormula::And(fs) | ArithFormula::Or(fs) => {
            let op = if matches!(f, ArithFormula::And(_)) { "and" } else { "or" };
            let parts: Vec<String> = fs.iter().map(|g| formula_sexp(g, vocab)).collect();
            format!("({op} {})", parts.join(" "))
        }
        ArithFormula::Exists(vs, b) => {
            let decls: Vec<String> = vs.iter().map(|v| format!("({} Int)", var_name(v, vocab))).collect();
            format!("(exists ({}) {})", decls.join(" "), formula_sexp(b, vocab))
        }
        ArithFormula::Pred(p, args) => {
            let parts: Vec<String> = args.iter().map(|a| lin_sexp(a, vocab)).collect();
            format!("({} {})", symbol(p), parts.join(" "))
        }
    }
}

/// Reads back a script written by [`export_lia`], returning the asserted
/// formula.
pub fn parse_lia(src: &str, vocab: &mut Vocab) -> Result<ArithFormula, String> {
    let items = sexp::parse_all(src).map_err(|e| e.to_string())?;
    for it in &items {
        if it.head() == Some("assert") {
            let l = it.list().expect("list");
            if l.len() != 2 {
                return Err(it.err("assert takes one argument").to_string());
            }
            return read_formula(&l[1], vocab).map_err(|e| e.to_string());
        }
    }
    Err("no assert in script".into())
}

fn read_var(name: &str, vocab: &mut Vocab) -> IntVar {
    match name.strip_prefix("len!") {
        Some(x) => IntVar::Len(vocab.var(x)),
        None => IntVar::Int(name.to_string()),
    }
}

pub(crate) fn read_int(s: &Sexp) -> Option<i64> {
    match &s.kind {
        SexpKind::Atom(a) => a.parse().ok(),
        SexpKind::List(l) if l.len() == 2 && l[0].atom() == Some("-") => read_int(&l[1]).map(|v| -v),
        _ => None,
    }
}

fn read_lin(s: &Sexp, vocab: &mut Vocab) -> Result<LinExpr, sexp::SexpError> {
    if let Some(k) = read_int(s) {
        return Ok(LinExpr::constant(k));
    }
    match &s.kind {
        SexpKind::Atom(a) => Ok(LinExpr::var(read_var(a, vocab))),
        SexpKind::Str(_) => Err(s.err("string in arithmetic")),
        SexpKind::List(l) => {
            let op = s.head().ok_or_else(|| s.err("expected operator"))?;
            let args = &l[1..];
            match op {
                "+" => {
                    let mut acc = LinExpr::constant(0);
                    for a in args {
                        acc = acc.plus(&read_lin(a, vocab)?);
                    }
                    Ok(acc)
                }
                "-" if args.len() == 1 => Ok(read_lin(&args[0], vocab)?.scaled(-1)),
                "-" => {
                    let mut acc = read_lin(&args[0], vocab)?;
                    for a in &args[1..] {
                        acc = acc.minus(&read_lin(a, vocab)?);
                    }
                    Ok(acc)
                }
                "*" => {
                    let mut k = 1i64;
                    let mut term: Option<LinExpr> = None;
                    for a in args {
                        if let Some(c) = read_int(a) {
                            k *= c;
                        } else if term.is_none() {
                            term = Some(read_lin(a, vocab)?);
                        } else {
                            return Err(a.err("non-linear multiplication"));
                        }
                    }
                    Ok(term.map_or(LinExpr::constant(k), |t| t.scaled(k)))
                }
                _ => Err(s.err(format!("unknown arithmetic operator {op}"))),
            }
        }
    }
}

fn read_formula(s: &Sexp, vocab: &mut Vocab) -> Result<ArithFormula, sexp::SexpError> {
    match &s.kind {
        SexpKind::Atom(a) if a == "true" => Ok(ArithFormula::True),
        SexpKind::Atom(a) if a == "false" => Ok(ArithFormula::False),
        SexpKind::List(l) => {
            let op = s.head().ok_or_else(|| s.err("expected operator"))?;
            let args = &l[1..];
            let rel = match op {
                "=" => Some(Rel::Eq),
                ">=" => Some(Rel::Ge),
                ">" => Some(Rel::Gt),
                "<=" => Some(Rel::Le),
                "<" => Some(Rel::Lt),
                _ => None,
            };
            if let Some(r) = rel {
                if args.len() != 2 {
                    return Err(s.err("relation takes two arguments"));
                }
                return Ok(ArithFormula::Atom(read_lin(&args[0], vocab)?, r, read_lin(&args[1], vocab)?));
            }
            match op {
                "and" | "or" => {
                    let parts = args.iter().map(|a| read_formula(a, vocab)).collect::<Result<Vec<_>, _>>()?;
                    Ok(if op == "and" { ArithFormula::And(parts) } else { ArithFormula::Or(parts) })
                }
                "exists" => {
                    let decls = args.first().and_then(|d| d.list()).ok_or_else(|| s.err("bad binder"))?;
                    let mut vs = Vec::new();
                    for d in decls {
                        let name = d.list().and_then(|p| p.first()).and_then(|n| n.atom()).ok_or_else(|| d.err("bad binder"))?;
                        vs.push(read_var(name, vocab));
                    }
                    let body = args.get(1).ok_or_else(|| s.err("missing body"))?;
                    Ok(ArithFormula::Exists(vs, Box::new(read_formula(body, vocab)?)))
                }
                p => {
                    let parts = args.iter().map(|a| read_lin(a, vocab)).collect::<Result<Vec<_>, _>>()?;
                    Ok(ArithFormula::Pred(p.to_string(), parts))
                }
            }
        }
        _ => Err(s.err("expected formula")),
    }
}
