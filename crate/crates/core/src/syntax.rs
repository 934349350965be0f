//! Abstract syntax for the three logics, their S-expression concrete syntax and
//! the structural checks every other module relies on.
//!
//! * [`Formula`] covers FO(<,+1) and Q2MLO(+1). The FO dialect is the subset
//!   without [`Formula::MetricExists`] and [`Formula::Plus1`].
//! * [`Mtlc`] is MTL with counting and punctuality modalities.
//! * [`SimplifiedForm`] is the ordered-witness normal form, with its region
//!   constraints written as [`Prop`]s over an implicit point.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("scope error: variable `{var}` {msg}")]
    Scope { var: String, msg: String },
}

fn syntax_err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Syntax {
        pos,
        msg: msg.into(),
    })
}

/// `var + offset`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub var: String,
    pub offset: i64,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term {
            var: name.into(),
            offset: 0,
        }
    }

    pub fn plus(name: impl Into<String>, offset: i64) -> Self {
        Term {
            var: name.into(),
            offset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `u in (anchor, anchor + 1)`
    Fwd,
    /// `u in (anchor - 1, anchor)`
    Bwd,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Pred(String, Term),
    Less(Term, Term),
    Equal(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    /// Metric quantifier, Q2MLO only.
    MetricExists {
        var: String,
        anchor: String,
        dir: Direction,
        body: Box<Formula>,
    },
    /// `rhs = lhs + 1`, Q2MLO only.
    Plus1(Term, Term),
}

impl Formula {
    pub fn pred(name: impl Into<String>, t: Term) -> Self {
        Formula::Pred(name.into(), t)
    }

    pub fn lt(a: Term, b: Term) -> Self {
        Formula::Less(a, b)
    }

    pub fn eq(a: Term, b: Term) -> Self {
        Formula::Equal(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// `a -> b`, written as `(or (not a) b)`.
    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn exists(v: impl Into<String>, body: Formula) -> Self {
        Formula::Exists(v.into(), Box::new(body))
    }

    pub fn forall(v: impl Into<String>, body: Formula) -> Self {
        Formula::Forall(v.into(), Box::new(body))
    }

    pub fn metric(v: impl Into<String>, anchor: impl Into<String>, dir: Direction, body: Formula) -> Self {
        Formula::MetricExists {
            var: v.into(),
            anchor: anchor.into(),
            dir,
            body: Box::new(body),
        }
    }

    /// Right-nested conjunction; `True` when empty.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Self {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::True;
        };
        while let Some(p) = parts.pop() {
            acc = Formula::and(p, acc);
        }
        acc
    }

    /// Right-nested disjunction; `False` when empty.
    pub fn disj(parts: impl IntoIterator<Item = Formula>) -> Self {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::False;
        };
        while let Some(p) = parts.pop() {
            acc = Formula::or(p, acc);
        }
        acc
    }

    /// True when the formula uses no Q2MLO-only constructs.
    pub fn is_first_order(&self) -> bool {
        match self {
            Formula::MetricExists { .. } | Formula::Plus1(..) => false,
            Formula::True | Formula::False | Formula::Pred(..) | Formula::Less(..) | Formula::Equal(..) => true,
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => a.is_first_order(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_first_order() && b.is_first_order(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    /// Replaces free occurrences of `var` by `by`, adding offsets. Binders are
    /// assumed distinct from `by.var` (true after [`freshen`]).
    pub fn substitute(&self, var: &str, by: &Term) -> Formula {
        let term = |t: &Term| {
            if t.var == var {
                Term::plus(by.var.clone(), by.offset + t.offset)
            } else {
                t.clone()
            }
        };
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Pred(p, t) => Formula::Pred(p.clone(), term(t)),
            Formula::Less(a, b) => Formula::Less(term(a), term(b)),
            Formula::Equal(a, b) => Formula::Equal(term(a), term(b)),
            Formula::Plus1(a, b) => Formula::Plus1(term(a), term(b)),
            Formula::Not(a) => Formula::not(a.substitute(var, by)),
            Formula::And(a, b) => Formula::and(a.substitute(var, by), b.substitute(var, by)),
            Formula::Or(a, b) => Formula::or(a.substitute(var, by), b.substitute(var, by)),
            Formula::Exists(v, _) | Formula::Forall(v, _) if v == var => self.clone(),
            Formula::Exists(v, a) => Formula::exists(v.clone(), a.substitute(var, by)),
            Formula::Forall(v, a) => Formula::forall(v.clone(), a.substitute(var, by)),
            Formula::MetricExists {
                var: v,
                anchor,
                dir,
                body,
            } => {
                // the anchor is a plain variable; only renaming is meaningful there
                let anchor = if anchor == var { by.var.clone() } else { anchor.clone() };
                let body = if v == var {
                    (**body).clone()
                } else {
                    body.substitute(var, by)
                };
                Formula::metric(v.clone(), anchor, *dir, body)
            }
        }
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let mut term = |t: &Term, bound: &Vec<String>| {
        if !bound.contains(&t.var) {
            out.insert(t.var.clone());
        }
    };
    match f {
        Formula::True | Formula::False => {}
        Formula::Pred(_, t) => term(t, bound),
        Formula::Less(a, b) | Formula::Equal(a, b) | Formula::Plus1(a, b) => {
            term(a, bound);
            term(b, bound);
        }
        Formula::Not(a) => collect_free(a, bound, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Formula::Exists(v, a) | Formula::Forall(v, a) => {
            bound.push(v.clone());
            collect_free(a, bound, out);
            bound.pop();
        }
        Formula::MetricExists { var, anchor, body, .. } => {
            if !bound.contains(anchor) {
                out.insert(anchor.clone());
            }
            bound.push(var.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
    }
}

/// Renames binders so that no two binders share a name and no binder reuses
/// a free variable's name. Formulas that already satisfy this are returned
/// unchanged, so the pass is idempotent.
pub fn freshen(f: &Formula) -> Formula {
    let mut used: HashSet<String> = f.free_vars().into_iter().collect();
    let mut scope = Vec::new();
    freshen_in(f, &mut used, &mut scope)
}

fn fresh_name(name: &str, used: &mut HashSet<String>) -> String {
    if used.insert(name.to_string()) {
        return name.to_string();
    }
    (1..)
        .map(|k| format!("{name}_{k}"))
        .find(|cand| !used.contains(cand))
        .map(|cand| {
            used.insert(cand.clone());
            cand
        })
        .expect("unbounded supply of names")
}

fn freshen_in(f: &Formula, used: &mut HashSet<String>, scope: &mut Vec<(String, String)>) -> Formula {
    let rename = |v: &str, scope: &Vec<(String, String)>| {
        scope
            .iter()
            .rev()
            .find(|(old, _)| old == v)
            .map(|(_, new)| new.clone())
            .unwrap_or_else(|| v.to_string())
    };
    let term = |t: &Term, scope: &Vec<(String, String)>| Term::plus(rename(&t.var, scope), t.offset);
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Pred(p, t) => Formula::Pred(p.clone(), term(t, scope)),
        Formula::Less(a, b) => Formula::Less(term(a, scope), term(b, scope)),
        Formula::Equal(a, b) => Formula::Equal(term(a, scope), term(b, scope)),
        Formula::Plus1(a, b) => Formula::Plus1(term(a, scope), term(b, scope)),
        Formula::Not(a) => Formula::not(freshen_in(a, used, scope)),
        Formula::And(a, b) => {
            let a = freshen_in(a, used, scope);
            Formula::and(a, freshen_in(b, used, scope))
        }
        Formula::Or(a, b) => {
            let a = freshen_in(a, used, scope);
            Formula::or(a, freshen_in(b, used, scope))
        }
        Formula::Exists(v, a) | Formula::Forall(v, a) => {
            let new = fresh_name(v, used);
            scope.push((v.clone(), new.clone()));
            let body = freshen_in(a, used, scope);
            scope.pop();
            if matches!(f, Formula::Exists(..)) {
                Formula::exists(new, body)
            } else {
                Formula::forall(new, body)
            }
        }
        Formula::MetricExists { var, anchor, dir, body } => {
            let anchor = rename(anchor, scope);
            let new = fresh_name(var, used);
            scope.push((var.clone(), new.clone()));
            let body = freshen_in(body, used, scope);
            scope.pop();
            Formula::metric(new, anchor, *dir, body)
        }
    }
}

/// Structural equality up to consistent renaming of bound variables.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    fn go(a: &Formula, b: &Formula, env: &mut Vec<(String, String)>) -> bool {
        let var_eq = |x: &str, y: &str, env: &Vec<(String, String)>| {
            let bx = env.iter().rev().position(|(l, _)| l == x);
            let by = env.iter().rev().position(|(_, r)| r == y);
            match (bx, by) {
                (None, None) => x == y,
                (Some(i), Some(j)) => i == j,
                _ => false,
            }
        };
        let term_eq = |s: &Term, t: &Term, env: &Vec<(String, String)>| {
            s.offset == t.offset && var_eq(&s.var, &t.var, env)
        };
        match (a, b) {
            (Formula::True, Formula::True) | (Formula::False, Formula::False) => true,
            (Formula::Pred(p, s), Formula::Pred(q, t)) => p == q && term_eq(s, t, env),
            (Formula::Less(a1, a2), Formula::Less(b1, b2))
            | (Formula::Equal(a1, a2), Formula::Equal(b1, b2))
            | (Formula::Plus1(a1, a2), Formula::Plus1(b1, b2)) => term_eq(a1, b1, env) && term_eq(a2, b2, env),
            (Formula::Not(x), Formula::Not(y)) => go(x, y, env),
            (Formula::And(a1, a2), Formula::And(b1, b2)) | (Formula::Or(a1, a2), Formula::Or(b1, b2)) => {
                go(a1, b1, env) && go(a2, b2, env)
            }
            (Formula::Exists(v, x), Formula::Exists(w, y)) | (Formula::Forall(v, x), Formula::Forall(w, y)) => {
                env.push((v.clone(), w.clone()));
                let r = go(x, y, env);
                env.pop();
                r
            }
            (
                Formula::MetricExists { var: v, anchor: a1, dir: d1, body: x },
                Formula::MetricExists { var: w, anchor: a2, dir: d2, body: y },
            ) => {
                if d1 != d2 || !var_eq(a1, a2, env) {
                    return false;
                }
                env.push((v.clone(), w.clone()));
                let r = go(x, y, env);
                env.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// Structural counts used to size the oracle's candidate grids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metrics {
    pub quantifier_depth: usize,
    pub max_offset: i64,
    pub free_vars: BTreeSet<String>,
}

pub fn metrics(f: &Formula) -> Metrics {
    fn depth(f: &Formula) -> usize {
        match f {
            Formula::True | Formula::False | Formula::Pred(..) | Formula::Less(..) | Formula::Equal(..) | Formula::Plus1(..) => 0,
            Formula::Not(a) => depth(a),
            Formula::And(a, b) | Formula::Or(a, b) => depth(a).max(depth(b)),
            Formula::Exists(_, a) | Formula::Forall(_, a) => 1 + depth(a),
            Formula::MetricExists { body, .. } => 1 + depth(body),
        }
    }
    fn offset(f: &Formula) -> i64 {
        match f {
            Formula::True | Formula::False => 0,
            Formula::Pred(_, t) => t.offset.abs(),
            Formula::Less(a, b) | Formula::Equal(a, b) => a.offset.abs().max(b.offset.abs()),
            // counts as the +1 it stands for
            Formula::Plus1(a, b) => 1.max(a.offset.abs()).max(b.offset.abs()),
            Formula::MetricExists { body, .. } => 1.max(offset(body)),
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => offset(a),
            Formula::And(a, b) | Formula::Or(a, b) => offset(a).max(offset(b)),
        }
    }
    Metrics {
        quantifier_depth: depth(f),
        max_offset: offset(f),
        free_vars: f.free_vars(),
    }
}

/// One reason a formula is not in Q2MLO(+1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Q2Violation {
    /// Metric quantifier whose body has free variables besides the bound one
    /// and the anchor.
    MetricBody {
        node: String,
        free_vars: BTreeSet<String>,
    },
    /// A term with a nonzero offset.
    Offset { term: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Q2Report {
    pub violations: Vec<Q2Violation>,
}

impl Q2Report {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the two-free-variable restriction on metric quantifier bodies and
/// that all metric access goes through `plus1` atoms and metric quantifiers.
pub fn check_q2mlo(f: &Formula) -> Q2Report {
    fn go(f: &Formula, out: &mut Vec<Q2Violation>) {
        let mut term = |t: &Term| {
            if t.offset != 0 {
                out.push(Q2Violation::Offset { term: t.to_string() });
            }
        };
        match f {
            Formula::True | Formula::False => {}
            Formula::Pred(_, t) => term(t),
            Formula::Less(a, b) | Formula::Equal(a, b) | Formula::Plus1(a, b) => {
                term(a);
                term(b);
            }
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => go(a, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                go(a, out);
                go(b, out);
            }
            Formula::MetricExists { var, anchor, body, .. } => {
                let free = body.free_vars();
                if free.iter().any(|v| v != var && v != anchor) {
                    out.push(Q2Violation::MetricBody {
                        node: f.to_string(),
                        free_vars: free,
                    });
                }
                go(body, out);
            }
        }
    }
    let mut violations = Vec::new();
    go(f, &mut violations);
    Q2Report { violations }
}

/// Propositional formula over predicate names, read at an implicit point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Prop {
    True,
    False,
    Atom(String),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn atom(name: impl Into<String>) -> Self {
        Prop::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Prop) -> Self {
        Prop::Not(Box::new(p))
    }

    pub fn and(a: Prop, b: Prop) -> Self {
        Prop::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Prop, b: Prop) -> Self {
        Prop::Or(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, val: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Prop::True => true,
            Prop::False => false,
            Prop::Atom(p) => val(p),
            Prop::Not(a) => !a.eval(val),
            Prop::And(a, b) => a.eval(val) && b.eval(val),
            Prop::Or(a, b) => a.eval(val) || b.eval(val),
        }
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        fn go(p: &Prop, out: &mut BTreeSet<String>) {
            match p {
                Prop::True | Prop::False => {}
                Prop::Atom(a) => {
                    out.insert(a.clone());
                }
                Prop::Not(a) => go(a, out),
                Prop::And(a, b) | Prop::Or(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Truth-table satisfiability.
    pub fn is_satisfiable(&self) -> bool {
        let atoms: Vec<String> = self.atoms().into_iter().collect();
        (0u64..1 << atoms.len()).any(|mask| {
            self.eval(&|a: &str| {
                let i = atoms.iter().position(|x| x == a).expect("atom listed");
                mask >> i & 1 == 1
            })
        })
    }

    /// The formula read at term `at`.
    pub fn at(&self, at: &Term) -> Formula {
        match self {
            Prop::True => Formula::True,
            Prop::False => Formula::False,
            Prop::Atom(p) => Formula::Pred(p.clone(), at.clone()),
            Prop::Not(a) => Formula::not(a.at(at)),
            Prop::And(a, b) => Formula::and(a.at(at), b.at(at)),
            Prop::Or(a, b) => Formula::or(a.at(at), b.at(at)),
        }
    }
}

/// `exists x1 < ... < xn in (z, z+1)` with `phis[i]` holding on the `i`-th of
/// the regions `(z,x1), {x1}, (x1,x2), ..., (xn, z+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SimplifiedForm {
    n: usize,
    phis: Vec<Prop>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("simplified form of arity {n} needs {} region formulas, got {got}", 2 * .n + 1)]
pub struct ArityError {
    pub n: usize,
    pub got: usize,
}

impl SimplifiedForm {
    pub fn new(n: usize, phis: Vec<Prop>) -> Result<Self, ArityError> {
        if phis.len() != 2 * n + 1 {
            return Err(ArityError { n, got: phis.len() });
        }
        Ok(SimplifiedForm { n, phis })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phis(&self) -> &[Prop] {
        &self.phis
    }

    /// Region formula by 1-based index.
    pub fn phi(&self, i: usize) -> &Prop {
        &self.phis[i - 1]
    }
}

/// Integer-endpoint interval attached to `until` / `since`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TimeBounds {
    pub lo: u64,
    /// `None` means unbounded.
    pub hi: Option<u64>,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl TimeBounds {
    pub fn closed(lo: u64, hi: Option<u64>) -> Self {
        TimeBounds {
            lo,
            hi,
            lo_closed: true,
            hi_closed: hi.is_some(),
        }
    }

    pub fn untimed() -> Self {
        Self::closed(0, None)
    }

    pub fn is_valid(&self) -> bool {
        match self.hi {
            None => !self.hi_closed,
            Some(hi) => self.lo < hi || (self.lo == hi && self.lo_closed && self.hi_closed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Mtlc {
    Atom(String),
    True,
    Not(Box<Mtlc>),
    And(Box<Mtlc>, Box<Mtlc>),
    Or(Box<Mtlc>, Box<Mtlc>),
    Until {
        lhs: Box<Mtlc>,
        rhs: Box<Mtlc>,
        bounds: TimeBounds,
    },
    Since {
        lhs: Box<Mtlc>,
        rhs: Box<Mtlc>,
        bounds: TimeBounds,
    },
    /// Holds at t when the body holds at >= n distinct points of (t, t+1).
    Count(u32, Box<Mtlc>),
    /// Mirror of `Count` over (t-1, t).
    CountPast(u32, Box<Mtlc>),
    /// Body holds at t+1.
    Punct(Box<Mtlc>),
    /// Body holds at t-1.
    PunctPast(Box<Mtlc>),
}

impl Mtlc {
    pub fn atom(name: impl Into<String>) -> Self {
        Mtlc::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Mtlc) -> Self {
        Mtlc::Not(Box::new(f))
    }

    pub fn and(a: Mtlc, b: Mtlc) -> Self {
        Mtlc::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Mtlc, b: Mtlc) -> Self {
        Mtlc::Or(Box::new(a), Box::new(b))
    }

    pub fn count(n: u32, f: Mtlc) -> Self {
        Mtlc::Count(n, Box::new(f))
    }

    pub fn count_past(n: u32, f: Mtlc) -> Self {
        Mtlc::CountPast(n, Box::new(f))
    }

    pub fn punct(f: Mtlc) -> Self {
        Mtlc::Punct(Box::new(f))
    }

    pub fn punct_past(f: Mtlc) -> Self {
        Mtlc::PunctPast(Box::new(f))
    }

    pub fn until(lhs: Mtlc, rhs: Mtlc, bounds: TimeBounds) -> Self {
        Mtlc::Until {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            bounds,
        }
    }

    pub fn since(lhs: Mtlc, rhs: Mtlc, bounds: TimeBounds) -> Self {
        Mtlc::Since {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            bounds,
        }
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&Mtlc> {
        match self {
            Mtlc::Atom(_) | Mtlc::True => vec![],
            Mtlc::Not(a) | Mtlc::Count(_, a) | Mtlc::CountPast(_, a) | Mtlc::Punct(a) | Mtlc::PunctPast(a) => {
                vec![a]
            }
            Mtlc::And(a, b) | Mtlc::Or(a, b) => vec![a, b],
            Mtlc::Until { lhs, rhs, .. } | Mtlc::Since { lhs, rhs, .. } => vec![lhs, rhs],
        }
    }

    /// No `until` / `since` anywhere.
    pub fn in_counting_fragment(&self) -> bool {
        !matches!(self, Mtlc::Until { .. } | Mtlc::Since { .. })
            && self.children().iter().all(|c| c.in_counting_fragment())
    }
}

// ---------------------------------------------------------------------------
// printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offset == 0 {
            write!(f, "(var {})", self.var)
        } else {
            write!(f, "(plus (var {}) {})", self.var, self.offset)
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Fwd => "fwd",
            Direction::Bwd => "bwd",
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "(true)"),
            Formula::False => write!(f, "(false)"),
            Formula::Pred(p, t) => write!(f, "(pred {p} {t})"),
            Formula::Less(a, b) => write!(f, "(lt {a} {b})"),
            Formula::Equal(a, b) => write!(f, "(eq {a} {b})"),
            Formula::Plus1(a, b) => write!(f, "(plus1 {a} {b})"),
            Formula::Not(a) => write!(f, "(not {a})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Exists(v, a) => write!(f, "(exists {v} {a})"),
            Formula::Forall(v, a) => write!(f, "(forall {v} {a})"),
            Formula::MetricExists { var, anchor, dir, body } => {
                write!(f, "(mexists {var} {anchor} {dir} {body})")
            }
        }
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::True => write!(f, "(true)"),
            Prop::False => write!(f, "(false)"),
            Prop::Atom(p) => write!(f, "(atom {p})"),
            Prop::Not(a) => write!(f, "(not {a})"),
            Prop::And(a, b) => write!(f, "(and {a} {b})"),
            Prop::Or(a, b) => write!(f, "(or {a} {b})"),
        }
    }
}

impl fmt::Display for SimplifiedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phis: Vec<String> = self.phis.iter().map(|p| p.to_string()).collect();
        write!(f, "(simplified {} ({}))", self.n, phis.join(" "))
    }
}

impl fmt::Display for TimeBounds {
    /// `LO HI`; an open end is marked `>LO` / `<HI`, an unbounded one `inf`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.lo_closed {
            write!(f, ">")?;
        }
        write!(f, "{} ", self.lo)?;
        match self.hi {
            None => write!(f, "inf"),
            Some(hi) if self.hi_closed => write!(f, "{hi}"),
            Some(hi) => write!(f, "<{hi}"),
        }
    }
}

impl fmt::Display for Mtlc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mtlc::Atom(p) => write!(f, "(atom {p})"),
            Mtlc::True => write!(f, "(true)"),
            Mtlc::Not(a) => write!(f, "(not {a})"),
            Mtlc::And(a, b) => write!(f, "(and {a} {b})"),
            Mtlc::Or(a, b) => write!(f, "(or {a} {b})"),
            Mtlc::Until { lhs, rhs, bounds } => write!(f, "(until {bounds} {lhs} {rhs})"),
            Mtlc::Since { lhs, rhs, bounds } => write!(f, "(since {bounds} {lhs} {rhs})"),
            Mtlc::Count(n, a) => write!(f, "(cnt {n} {a})"),
            Mtlc::CountPast(n, a) => write!(f, "(cntbar {n} {a})"),
            Mtlc::Punct(a) => write!(f, "(d1 {a})"),
            Mtlc::PunctPast(a) => write!(f, "(d1bar {a})"),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Fo,
    Q2mlo,
    Mtlc,
    Simplified,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    Fo(Formula),
    Q2(Formula),
    Mtlc(Mtlc),
    Simplified(SimplifiedForm),
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Fo(x) | Ast::Q2(x) => x.fmt(f),
            Ast::Mtlc(x) => x.fmt(f),
            Ast::Simplified(x) => x.fmt(f),
        }
    }
}

pub fn parse(text: &str, dialect: Dialect) -> Result<Ast, ParseError> {
    match dialect {
        Dialect::Fo => parse_fo(text).map(Ast::Fo),
        Dialect::Q2mlo => parse_q2mlo(text).map(Ast::Q2),
        Dialect::Mtlc => parse_mtlc(text).map(Ast::Mtlc),
        Dialect::Simplified => parse_simplified(text).map(Ast::Simplified),
    }
}

pub fn parse_fo(text: &str) -> Result<Formula, ParseError> {
    let sx = read_sexpr(text)?;
    Ok(freshen(&to_formula(&sx, false)?))
}

pub fn parse_q2mlo(text: &str) -> Result<Formula, ParseError> {
    let sx = read_sexpr(text)?;
    Ok(freshen(&to_formula(&sx, true)?))
}

/// Like [`parse_q2mlo`] (or [`parse_fo`] when `q2` is false) but every free
/// variable must appear in `declared`.
pub fn parse_declared(text: &str, q2: bool, declared: &[&str]) -> Result<Formula, ParseError> {
    let f = if q2 { parse_q2mlo(text)? } else { parse_fo(text)? };
    if let Some(v) = f.free_vars().into_iter().find(|v| !declared.contains(&v.as_str())) {
        return Err(ParseError::Scope {
            var: v,
            msg: "is neither bound nor declared free".into(),
        });
    }
    Ok(f)
}

pub fn parse_mtlc(text: &str) -> Result<Mtlc, ParseError> {
    to_mtlc(&read_sexpr(text)?)
}

pub fn parse_simplified(text: &str) -> Result<SimplifiedForm, ParseError> {
    let sx = read_sexpr(text)?;
    let (head, args) = sx.list_head()?;
    if head != "simplified" {
        return syntax_err(sx.pos(), format!("expected `simplified`, found `{head}`"));
    }
    expect_arity(&sx, args, 2)?;
    let n = args[0].number::<usize>()?;
    let SExpr::List { items, .. } = &args[1] else {
        return syntax_err(args[1].pos(), "expected a list of region formulas");
    };
    let phis = items.iter().map(to_prop).collect::<Result<Vec<_>, _>>()?;
    SimplifiedForm::new(n, phis).map_err(|e| ParseError::Syntax {
        pos: args[1].pos(),
        msg: e.to_string(),
    })
}

#[derive(Debug)]
enum SExpr {
    Atom { text: String, pos: usize },
    List { items: Vec<SExpr>, pos: usize },
}

impl SExpr {
    fn pos(&self) -> usize {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    fn list_head(&self) -> Result<(&str, &[SExpr]), ParseError> {
        match self {
            SExpr::List { items, pos } => match items.first() {
                Some(SExpr::Atom { text, .. }) => Ok((text, &items[1..])),
                Some(other) => syntax_err(other.pos(), "expected an operator name"),
                None => syntax_err(*pos, "empty list"),
            },
            SExpr::Atom { text, pos } => syntax_err(*pos, format!("expected a list, found `{text}`")),
        }
    }

    fn ident(&self) -> Result<&str, ParseError> {
        match self {
            SExpr::Atom { text, pos } => {
                let mut chars = text.chars();
                let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
                if first_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'') {
                    Ok(text)
                } else {
                    syntax_err(*pos, format!("invalid name `{text}`"))
                }
            }
            SExpr::List { pos, .. } => syntax_err(*pos, "expected a name"),
        }
    }

    fn number<T: std::str::FromStr>(&self) -> Result<T, ParseError> {
        match self {
            SExpr::Atom { text, pos } => text
                .parse()
                .or_else(|_| syntax_err(*pos, format!("invalid number `{text}`"))),
            SExpr::List { pos, .. } => syntax_err(*pos, "expected a number"),
        }
    }
}

fn read_sexpr(text: &str) -> Result<SExpr, ParseError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let sx = read_one(text, bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos < bytes.len() {
        return syntax_err(pos, "trailing input");
    }
    Ok(sx)
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
}

fn read_one(text: &str, bytes: &[u8], pos: &mut usize) -> Result<SExpr, ParseError> {
    skip_ws(bytes, pos);
    let start = *pos;
    match bytes.get(start) {
        None => syntax_err(start, "unexpected end of input"),
        Some(b')') => syntax_err(start, "unexpected `)`"),
        Some(b'(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(bytes, pos);
                match bytes.get(*pos) {
                    None => return syntax_err(start, "unclosed `(`"),
                    Some(b')') => {
                        *pos += 1;
                        return Ok(SExpr::List { items, pos: start });
                    }
                    Some(_) => items.push(read_one(text, bytes, pos)?),
                }
            }
        }
        Some(_) => {
            while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'(' && bytes[*pos] != b')' {
                *pos += 1;
            }
            Ok(SExpr::Atom {
                text: text[start..*pos].to_string(),
                pos: start,
            })
        }
    }
}

fn expect_arity(sx: &SExpr, args: &[SExpr], n: usize) -> Result<(), ParseError> {
    if args.len() != n {
        let (head, _) = sx.list_head()?;
        return syntax_err(sx.pos(), format!("`{head}` takes {n} argument(s), got {}", args.len()));
    }
    Ok(())
}

fn to_term(sx: &SExpr) -> Result<Term, ParseError> {
    let (head, args) = sx.list_head()?;
    match head {
        "var" => {
            expect_arity(sx, args, 1)?;
            Ok(Term::var(args[0].ident()?))
        }
        "plus" => {
            expect_arity(sx, args, 2)?;
            let base = to_term(&args[0])?;
            if base.offset != 0 {
                return syntax_err(args[0].pos(), "`plus` takes a plain `(var NAME)`");
            }
            Ok(Term::plus(base.var, args[1].number::<i64>()?))
        }
        other => syntax_err(sx.pos(), format!("expected a term, found `{other}`")),
    }
}

fn to_formula(sx: &SExpr, q2: bool) -> Result<Formula, ParseError> {
    let (head, args) = sx.list_head()?;
    let sub = |i: usize| to_formula(&args[i], q2);
    Ok(match head {
        "true" => {
            expect_arity(sx, args, 0)?;
            Formula::True
        }
        "false" => {
            expect_arity(sx, args, 0)?;
            Formula::False
        }
        "pred" => {
            expect_arity(sx, args, 2)?;
            Formula::Pred(args[0].ident()?.to_string(), to_term(&args[1])?)
        }
        "lt" | "eq" => {
            expect_arity(sx, args, 2)?;
            let (a, b) = (to_term(&args[0])?, to_term(&args[1])?);
            if head == "lt" {
                Formula::Less(a, b)
            } else {
                Formula::Equal(a, b)
            }
        }
        "not" => {
            expect_arity(sx, args, 1)?;
            Formula::not(sub(0)?)
        }
        "and" | "or" => {
            expect_arity(sx, args, 2)?;
            let (a, b) = (sub(0)?, sub(1)?);
            if head == "and" {
                Formula::and(a, b)
            } else {
                Formula::or(a, b)
            }
        }
        "exists" | "forall" => {
            expect_arity(sx, args, 2)?;
            let v = args[0].ident()?.to_string();
            if head == "exists" {
                Formula::exists(v, sub(1)?)
            } else {
                Formula::forall(v, sub(1)?)
            }
        }
        "mexists" if q2 => {
            expect_arity(sx, args, 4)?;
            let var = args[0].ident()?.to_string();
            let anchor = args[1].ident()?.to_string();
            if var == anchor {
                return Err(ParseError::Scope {
                    var,
                    msg: "is both bound and the anchor of the same metric quantifier".into(),
                });
            }
            let dir = match &args[2] {
                SExpr::Atom { text, .. } if text == "fwd" => Direction::Fwd,
                SExpr::Atom { text, .. } if text == "bwd" => Direction::Bwd,
                other => return syntax_err(other.pos(), "expected `fwd` or `bwd`"),
            };
            Formula::metric(var, anchor, dir, sub(3)?)
        }
        "plus1" if q2 => {
            expect_arity(sx, args, 2)?;
            Formula::Plus1(to_term(&args[0])?, to_term(&args[1])?)
        }
        "mexists" | "plus1" => return syntax_err(sx.pos(), format!("`{head}` is only allowed in the q2mlo dialect")),
        other => return syntax_err(sx.pos(), format!("unknown connective `{other}`")),
    })
}

fn to_prop(sx: &SExpr) -> Result<Prop, ParseError> {
    let (head, args) = sx.list_head()?;
    Ok(match head {
        "true" => {
            expect_arity(sx, args, 0)?;
            Prop::True
        }
        "false" => {
            expect_arity(sx, args, 0)?;
            Prop::False
        }
        "atom" => {
            expect_arity(sx, args, 1)?;
            Prop::atom(args[0].ident()?)
        }
        "not" => {
            expect_arity(sx, args, 1)?;
            Prop::not(to_prop(&args[0])?)
        }
        "and" => {
            expect_arity(sx, args, 2)?;
            Prop::and(to_prop(&args[0])?, to_prop(&args[1])?)
        }
        "or" => {
            expect_arity(sx, args, 2)?;
            Prop::or(to_prop(&args[0])?, to_prop(&args[1])?)
        }
        other => return syntax_err(sx.pos(), format!("unknown propositional connective `{other}`")),
    })
}

fn to_bounds(lo: &SExpr, hi: &SExpr) -> Result<TimeBounds, ParseError> {
    let SExpr::Atom { text: lo_text, pos: lo_pos } = lo else {
        return syntax_err(lo.pos(), "expected a lower bound");
    };
    let SExpr::Atom { text: hi_text, pos: hi_pos } = hi else {
        return syntax_err(hi.pos(), "expected an upper bound");
    };
    let (lo_closed, lo_digits) = match lo_text.strip_prefix('>') {
        Some(rest) => (false, rest),
        None => (true, lo_text.as_str()),
    };
    let lo_val: u64 = lo_digits
        .parse()
        .or_else(|_| syntax_err(*lo_pos, format!("invalid lower bound `{lo_text}`")))?;
    let (hi_val, hi_closed) = if hi_text == "inf" {
        (None, false)
    } else {
        let (closed, digits) = match hi_text.strip_prefix('<') {
            Some(rest) => (false, rest),
            None => (true, hi_text.as_str()),
        };
        let v: u64 = digits
            .parse()
            .or_else(|_| syntax_err(*hi_pos, format!("invalid upper bound `{hi_text}`")))?;
        (Some(v), closed)
    };
    let bounds = TimeBounds {
        lo: lo_val,
        hi: hi_val,
        lo_closed,
        hi_closed,
    };
    if !bounds.is_valid() {
        return syntax_err(*lo_pos, format!("empty interval `{lo_text} {hi_text}`"));
    }
    Ok(bounds)
}

fn to_mtlc(sx: &SExpr) -> Result<Mtlc, ParseError> {
    let (head, args) = sx.list_head()?;
    Ok(match head {
        "true" => {
            expect_arity(sx, args, 0)?;
            Mtlc::True
        }
        "atom" => {
            expect_arity(sx, args, 1)?;
            Mtlc::atom(args[0].ident()?)
        }
        "not" => {
            expect_arity(sx, args, 1)?;
            Mtlc::not(to_mtlc(&args[0])?)
        }
        "and" | "or" => {
            expect_arity(sx, args, 2)?;
            let (a, b) = (to_mtlc(&args[0])?, to_mtlc(&args[1])?);
            if head == "and" {
                Mtlc::and(a, b)
            } else {
                Mtlc::or(a, b)
            }
        }
        "until" | "since" => {
            expect_arity(sx, args, 4)?;
            let bounds = to_bounds(&args[0], &args[1])?;
            let (lhs, rhs) = (to_mtlc(&args[2])?, to_mtlc(&args[3])?);
            if head == "until" {
                Mtlc::until(lhs, rhs, bounds)
            } else {
                Mtlc::since(lhs, rhs, bounds)
            }
        }
        "cnt" | "cntbar" => {
            expect_arity(sx, args, 2)?;
            let n = args[0].number::<u32>()?;
            let body = to_mtlc(&args[1])?;
            if head == "cnt" {
                Mtlc::count(n, body)
            } else {
                Mtlc::count_past(n, body)
            }
        }
        "d1" => {
            expect_arity(sx, args, 1)?;
            Mtlc::punct(to_mtlc(&args[0])?)
        }
        "d1bar" => {
            expect_arity(sx, args, 1)?;
            Mtlc::punct_past(to_mtlc(&args[0])?)
        }
        other => return syntax_err(sx.pos(), format!("unknown temporal connective `{other}`")),
    })
}
