//! Brute-force evaluation of FO(<,+1) and Q2MLO(+1) over a [`Signal`].
//!
//! Quantifiers are evaluated by enumeration. At every quantifier the candidate
//! set is rebuilt from the signal's breakpoints and the values bound so far:
//! take the fractional parts `F` of all those points, form `F + Z`, and pick
//! every point of that set plus `samples_per_gap` interior samples of every
//! gap. Any two points in the same gap are exchanged by an order automorphism
//! of the reals that commutes with `+1` and fixes `F + Z`, hence fixes every
//! predicate and every bound value, so one sample per gap already decides the
//! quantifier. Points far outside the domain are represented by the window
//! `[min(0, v) - R, max(D, v) + R]`, `R = ceil(D) + 1`, plus one point beyond
//! each end.
//!
//! Internally all time points are integers ("ticks") in units of `1/M`, where
//! `M` is chosen so that every sample taken at every nesting depth is exact.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::Zero;
use thiserror::Error;

use crate::signal::{Interval, IntervalSet, Signal, Time};
use crate::syntax::{check_q2mlo, metrics, Direction, Formula, Metrics, Q2Report, Term};

/// Assignment of time points to variables.
pub type Valuation = BTreeMap<String, Time>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("formula uses Q2MLO constructs; evaluate it with eval_q2mlo")]
    NotFirstOrder,
    #[error("ill-formed Q2MLO formula: {0:?}")]
    IllFormed(Q2Report),
    #[error("expected at most one free variable, found {0:?}")]
    Arity(Vec<String>),
    #[error("time resolution overflow")]
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    /// Interior samples taken in every gap of the candidate grid.
    pub samples_per_gap: usize,
    /// Restrict quantifiers to the range their guards allow. Turning this off
    /// enumerates the whole window and only exists to cross-check the guards.
    pub use_guards: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            samples_per_gap: 1,
            use_guards: true,
        }
    }
}

/// The candidate points a quantifier ranges over for a fixed signal and
/// valuation: the integer-shift closure of breakpoints and valuation values
/// within the extended window, plus `samples_per_gap` interior samples per gap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateGrid {
    pub points: Vec<Time>,
    pub samples_per_gap: usize,
}

impl CandidateGrid {
    /// `p_i + (p_{i+1} - p_i) * j / (q + 1)` for `j = 1..=q`.
    pub fn gap_samples(&self, gap: usize) -> Vec<Time> {
        let (a, b) = (self.points[gap], self.points[gap + 1]);
        let q = self.samples_per_gap as i64;
        (1..=q).map(|j| a + (b - a) * Time::new(j, q + 1)).collect()
    }

    /// Grid points and samples, sorted.
    pub fn all(&self) -> Vec<Time> {
        let mut out = Vec::with_capacity(self.points.len() * (self.samples_per_gap + 1));
        for i in 0..self.points.len() {
            out.push(self.points[i]);
            if i + 1 < self.points.len() {
                out.extend(self.gap_samples(i));
            }
        }
        out
    }

    /// Index of the gap whose right end is `t`, if `t` is a grid point.
    pub fn gap_before(&self, t: &Time) -> Option<usize> {
        let idx = self.points.binary_search(t).ok()?;
        idx.checked_sub(1)
    }
}

fn ceil_domain(s: &Signal) -> i64 {
    s.domain_end().ceil().to_integer()
}

/// Extended window `[min(0, v) - R, max(D, v) + R]` with `R = ceil(D) + 1`.
pub fn window(s: &Signal, v: &Valuation) -> (Time, Time) {
    let r = Time::from_integer(ceil_domain(s) + 1);
    let lo = v.values().copied().fold(Time::zero(), Time::min);
    let hi = v.values().copied().fold(Time::from_integer(ceil_domain(s)), Time::max);
    ((lo - r).floor(), (hi + r).ceil())
}

/// Fractional parts of a set of points, sorted and deduplicated.
fn fractions(points: impl IntoIterator<Item = Time>) -> Vec<Time> {
    let mut fr: Vec<Time> = points.into_iter().map(|t| t - t.floor()).collect();
    fr.sort();
    fr.dedup();
    fr
}

/// The grid for signal `s` and valuation `v` with `q = max(1, quantifier depth)`.
pub fn build_grid(s: &Signal, v: &Valuation, m: &Metrics) -> CandidateGrid {
    build_grid_with(s, v, m.quantifier_depth.max(1))
}

pub fn build_grid_with(s: &Signal, v: &Valuation, samples_per_gap: usize) -> CandidateGrid {
    let (lo, hi) = window(s, v);
    let fr = fractions(s.breakpoints().into_iter().chain(v.values().copied()));
    let mut points = Vec::new();
    let (k0, k1) = (lo.floor().to_integer(), hi.floor().to_integer());
    for k in k0..=k1 {
        for f in &fr {
            let p = Time::from_integer(k) + f;
            if p >= lo && p <= hi {
                points.push(p);
            }
        }
    }
    CandidateGrid {
        points,
        samples_per_gap,
    }
}

/// Rewrites metric quantifiers and `plus1` atoms into plain FO(<,+1).
pub fn desugar(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Pred(..) | Formula::Less(..) | Formula::Equal(..) => f.clone(),
        Formula::Plus1(a, b) => Formula::Equal(b.clone(), Term::plus(a.var.clone(), a.offset + 1)),
        Formula::Not(a) => Formula::not(desugar(a)),
        Formula::And(a, b) => Formula::and(desugar(a), desugar(b)),
        Formula::Or(a, b) => Formula::or(desugar(a), desugar(b)),
        Formula::Exists(v, a) => Formula::exists(v.clone(), desugar(a)),
        Formula::Forall(v, a) => Formula::forall(v.clone(), desugar(a)),
        Formula::MetricExists { var, anchor, dir, body } => {
            let (lo, hi) = match dir {
                Direction::Fwd => (Term::var(anchor.clone()), Term::plus(anchor.clone(), 1)),
                Direction::Bwd => (Term::plus(anchor.clone(), -1), Term::var(anchor.clone())),
            };
            let u = Term::var(var.clone());
            Formula::exists(
                var.clone(),
                Formula::conj([Formula::lt(lo, u.clone()), Formula::lt(u, hi), desugar(body)]),
            )
        }
    }
}

pub fn eval_fo(f: &Formula, s: &Signal, v: &Valuation) -> Result<bool, EvalError> {
    eval_fo_with(f, s, v, EvalConfig::default())
}

pub fn eval_fo_with(f: &Formula, s: &Signal, v: &Valuation, cfg: EvalConfig) -> Result<bool, EvalError> {
    if !f.is_first_order() {
        return Err(EvalError::NotFirstOrder);
    }
    let free: Vec<String> = v.keys().cloned().collect();
    let ev = Evaluator::new(f, s, &free, v.values().map(|t| *t.denom()), cfg)?;
    let vals: Vec<Time> = v.values().copied().collect();
    ev.eval_at(&vals)
}

pub fn eval_q2mlo(f: &Formula, s: &Signal, v: &Valuation) -> Result<bool, EvalError> {
    eval_q2mlo_with(f, s, v, EvalConfig::default())
}

pub fn eval_q2mlo_with(f: &Formula, s: &Signal, v: &Valuation, cfg: EvalConfig) -> Result<bool, EvalError> {
    let report = check_q2mlo(f);
    if !report.is_ok() {
        return Err(EvalError::IllFormed(report));
    }
    eval_fo_with(&desugar(f), s, v, cfg)
}

/// Values of the leading existential block of `f` that make it true, if any.
/// Returned in binding order, keyed by variable name.
pub fn find_witnesses(f: &Formula, s: &Signal, v: &Valuation) -> Result<Option<Vec<(String, Time)>>, EvalError> {
    if !f.is_first_order() {
        return Err(EvalError::NotFirstOrder);
    }
    let free: Vec<String> = v.keys().cloned().collect();
    let ev = Evaluator::new(f, s, &free, v.values().map(|t| *t.denom()), EvalConfig::default())?;
    let vals: Vec<Time> = v.values().copied().collect();
    ev.witnesses_at(&vals)
}

/// Set of points of `[0, D]` where a formula with exactly one free variable
/// holds.
pub fn fo_sat_set(f: &Formula, s: &Signal) -> Result<IntervalSet, EvalError> {
    fo_sat_set_with(f, s, EvalConfig::default())
}

pub fn fo_sat_set_with(f: &Formula, s: &Signal, cfg: EvalConfig) -> Result<IntervalSet, EvalError> {
    let free: Vec<String> = f.free_vars().into_iter().collect();
    if free.len() > 1 {
        return Err(EvalError::Arity(free));
    }
    if !f.is_first_order() {
        return Err(EvalError::NotFirstOrder);
    }
    if free.is_empty() {
        // a sentence holds everywhere or nowhere
        let holds = eval_fo_with(f, s, &Valuation::new(), cfg)?;
        return Ok(if holds { domain_set(s) } else { IntervalSet::empty() });
    }
    // gap midpoints of the breakpoint closure have twice the denominator
    let den = s.breakpoints().iter().fold(1i64, |acc, t| acc.lcm(t.denom()));
    let ev = Evaluator::new(f, s, &free, [2 * den], cfg)?;
    let grid = build_grid_with(s, &Valuation::new(), 1);
    let domain = s.domain();
    let breaks: Vec<Time> = grid.points.into_iter().filter(|p| domain.contains(p)).collect();
    let mut err = None;
    let set = IntervalSet::from_pieces(&breaks, |t| match ev.eval_at(&[*t]) {
        Ok(b) => b,
        Err(e) => {
            err.get_or_insert(e);
            false
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(set),
    }
}

// ---------------------------------------------------------------------------
// compiled evaluator

type Tick = i128;

#[derive(Clone, Copy, Debug)]
struct CTerm {
    slot: usize,
    off: Tick,
}

/// `from <= to + w`, or `<` when strict.
#[derive(Clone, Copy, Debug)]
struct Edge {
    from: usize,
    to: usize,
    w: Tick,
    strict: bool,
}

#[derive(Debug)]
struct Guard {
    edges: Vec<Edge>,
    inner: Vec<usize>,
}

#[derive(Debug)]
enum Node {
    Const(bool),
    Pred { pred: usize, t: CTerm },
    Less(CTerm, CTerm),
    Equal(CTerm, CTerm),
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Quant {
        exists: bool,
        slot: usize,
        guard: Guard,
        body: Box<Node>,
    },
}

#[derive(Debug)]
struct TickInterval {
    lo: Tick,
    hi: Tick,
    lo_closed: bool,
    hi_closed: bool,
}

impl TickInterval {
    fn contains(&self, t: Tick) -> bool {
        (if self.lo_closed { t >= self.lo } else { t > self.lo })
            && (if self.hi_closed { t <= self.hi } else { t < self.hi })
    }
}

/// A formula compiled against one signal, ready to be evaluated at many
/// valuations of its declared free variables.
pub struct Evaluator {
    root: Node,
    unit: Tick,
    nslots: usize,
    names: Vec<String>,
    nfree: usize,
    preds: Vec<Vec<TickInterval>>,
    base_fracs: Vec<Tick>,
    domain_end: Tick,
    radius: Tick,
    samples: usize,
    use_guards: bool,
}

struct State {
    vals: Vec<Tick>,
    bound: Vec<bool>,
    fracs: Vec<Tick>,
}

impl State {
    fn bind(&mut self, slot: usize, v: Tick, unit: Tick) {
        self.vals[slot] = v;
        self.bound[slot] = true;
        let f = v.rem_euclid(unit);
        let idx = self.fracs.partition_point(|x| *x < f);
        self.fracs.insert(idx, f);
    }

    fn unbind(&mut self, slot: usize, unit: Tick) {
        self.bound[slot] = false;
        let f = self.vals[slot].rem_euclid(unit);
        let idx = self.fracs.partition_point(|x| *x < f);
        debug_assert_eq!(self.fracs[idx], f);
        self.fracs.remove(idx);
    }
}

impl Evaluator {
    /// Compiles `f` with `free` as its free-variable slots. `extra_dens` lists
    /// denominators of the values it will later be evaluated at.
    pub fn new(
        f: &Formula,
        s: &Signal,
        free: &[String],
        extra_dens: impl IntoIterator<Item = i64>,
        cfg: EvalConfig,
    ) -> Result<Self, EvalError> {
        if !f.is_first_order() {
            return Err(EvalError::NotFirstOrder);
        }
        let Metrics { quantifier_depth, .. } = metrics(f);
        let q = cfg.samples_per_gap.max(1);
        let breaks = s.breakpoints();
        let mut lcm: i128 = 1;
        for d in breaks.iter().map(|t| *t.denom()).chain(extra_dens) {
            lcm = lcm.lcm(&(d as i128));
        }
        let mut unit = lcm;
        for _ in 0..quantifier_depth {
            unit = unit.checked_mul(q as i128 + 1).ok_or(EvalError::Overflow)?;
        }
        if unit > i128::MAX >> 64 {
            return Err(EvalError::Overflow);
        }
        let to_tick = |t: &Time| (*t.numer() as i128) * (unit / *t.denom() as i128);

        let pred_names: Vec<&String> = s.predicates().keys().collect();
        let preds = s
            .predicates()
            .values()
            .map(|set| {
                set.intervals()
                    .iter()
                    .map(|iv| TickInterval {
                        lo: to_tick(&iv.lo),
                        hi: to_tick(&iv.hi),
                        lo_closed: iv.lo_closed,
                        hi_closed: iv.hi_closed,
                    })
                    .collect()
            })
            .collect();

        let mut compiler = Compiler {
            scope: free.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
            nslots: free.len(),
            names: free.to_vec(),
            slot_of: HashMap::new(),
            preds: pred_names.iter().enumerate().map(|(i, n)| ((*n).clone(), i)).collect(),
            unit,
        };
        let root = compiler.compile(f)?;

        let mut base_fracs: Vec<Tick> = breaks.iter().map(|t| to_tick(t).rem_euclid(unit)).collect();
        base_fracs.sort();
        base_fracs.dedup();
        Ok(Evaluator {
            root,
            unit,
            nslots: compiler.nslots,
            names: compiler.names,
            nfree: free.len(),
            preds,
            base_fracs,
            domain_end: to_tick(&s.domain_end()),
            radius: (ceil_domain(s) as i128 + 1) * unit,
            samples: q,
            use_guards: cfg.use_guards,
        })
    }

    fn tick(&self, t: &Time) -> Result<Tick, EvalError> {
        let den = *t.denom() as i128;
        if self.unit % den != 0 {
            return Err(EvalError::Overflow);
        }
        Ok(*t.numer() as i128 * (self.unit / den))
    }

    fn time(&self, t: Tick) -> Time {
        let g = t.gcd(&self.unit);
        let (n, d) = (t / g, self.unit / g);
        Time::new(n as i64, d as i64)
    }

    fn init_state(&self, vals: &[Time]) -> Result<State, EvalError> {
        assert_eq!(vals.len(), self.nfree, "one value per declared free variable");
        let mut st = State {
            vals: vec![0; self.nslots],
            bound: vec![false; self.nslots],
            fracs: self.base_fracs.clone(),
        };
        for (slot, v) in vals.iter().enumerate() {
            let t = self.tick(v)?;
            st.bind(slot, t, self.unit);
        }
        Ok(st)
    }

    pub fn eval_at(&self, vals: &[Time]) -> Result<bool, EvalError> {
        let mut st = self.init_state(vals)?;
        Ok(self.eval(&self.root, &mut st))
    }

    /// Like [`Evaluator::eval_at`], but also reports the values chosen for the
    /// leading existential block.
    pub fn witnesses_at(&self, vals: &[Time]) -> Result<Option<Vec<(String, Time)>>, EvalError> {
        let mut st = self.init_state(vals)?;
        let mut chain = Vec::new();
        if !self.search(&self.root, &mut st, &mut chain) {
            return Ok(None);
        }
        Ok(Some(chain.into_iter().map(|(name, t)| (name, self.time(t))).collect()))
    }

    fn search(&self, node: &Node, st: &mut State, chain: &mut Vec<(String, Tick)>) -> bool {
        let Node::Quant {
            exists: true,
            slot,
            guard,
            body,
        } = node
        else {
            return self.eval(node, st);
        };
        for c in self.candidates(*slot, guard, st) {
            st.bind(*slot, c, self.unit);
            chain.push((self.names[*slot].clone(), c));
            let ok = self.search(body, st, chain);
            st.unbind(*slot, self.unit);
            if ok {
                return true;
            }
            chain.pop();
        }
        false
    }

    fn holds(&self, pred: usize, t: Tick) -> bool {
        self.preds[pred].iter().any(|iv| iv.contains(t))
    }

    fn eval(&self, node: &Node, st: &mut State) -> bool {
        let val = |t: &CTerm, st: &State| st.vals[t.slot] + t.off;
        match node {
            Node::Const(b) => *b,
            Node::Pred { pred, t } => self.holds(*pred, val(t, st)),
            Node::Less(a, b) => val(a, st) < val(b, st),
            Node::Equal(a, b) => val(a, st) == val(b, st),
            Node::Not(a) => !self.eval(a, st),
            Node::And(xs) => xs.iter().all(|x| self.eval(x, st)),
            Node::Or(xs) => xs.iter().any(|x| self.eval(x, st)),
            Node::Quant {
                exists,
                slot,
                guard,
                body,
            } => {
                for c in self.candidates(*slot, guard, st) {
                    st.bind(*slot, c, self.unit);
                    let r = self.eval(body, st);
                    st.unbind(*slot, self.unit);
                    if r == *exists {
                        return r;
                    }
                }
                !*exists
            }
        }
    }

    /// Tightest bound on `slot` implied by the guard, following chains through
    /// the guard's inner variables. `upper` selects the direction.
    fn bound(&self, slot: usize, guard: &Guard, st: &State, upper: bool) -> Option<(Tick, bool)> {
        // best[v]: slot <= v + d (upper) or slot >= v - d (lower)
        let mut best: HashMap<usize, (Tick, bool)> = HashMap::new();
        best.insert(slot, (0, false));
        let tighter = |a: (Tick, bool), b: Option<&(Tick, bool)>| match b {
            None => true,
            Some(&(d, s)) => a.0 < d || (a.0 == d && a.1 && !s),
        };
        let mut result: Option<(Tick, bool)> = None;
        let better = |cand: (Tick, bool), cur: Option<(Tick, bool)>| match cur {
            None => true,
            Some((v, s)) => {
                if upper {
                    cand.0 < v || (cand.0 == v && cand.1 && !s)
                } else {
                    cand.0 > v || (cand.0 == v && cand.1 && !s)
                }
            }
        };
        let rounds = guard.inner.len() + 1;
        for _ in 0..rounds {
            let mut changed = false;
            for e in &guard.edges {
                let (src, dst) = if upper { (e.from, e.to) } else { (e.to, e.from) };
                let Some(&(d, s)) = best.get(&src) else {
                    continue;
                };
                let cand = (d + e.w, s || e.strict);
                let known = dst != slot && !guard.inner.contains(&dst);
                if known {
                    if !st.bound[dst] {
                        continue;
                    }
                    let v = if upper {
                        st.vals[dst] + cand.0
                    } else {
                        st.vals[dst] - cand.0
                    };
                    if better((v, cand.1), result) {
                        result = Some((v, cand.1));
                    }
                } else if tighter(cand, best.get(&dst)) {
                    best.insert(dst, cand);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        result
    }

    fn candidates(&self, slot: usize, guard: &Guard, st: &State) -> Vec<Tick> {
        let unit = self.unit;
        let (lo, hi) = if self.use_guards {
            (self.bound(slot, guard, st, false), self.bound(slot, guard, st, true))
        } else {
            (None, None)
        };
        if let (Some((l, false)), Some((h, false))) = (lo, hi) {
            if l == h {
                return vec![l];
            }
        }
        let (mut wmin, mut wmax) = (0, self.domain_end);
        for (v, b) in st.vals.iter().zip(&st.bound) {
            if *b {
                wmin = wmin.min(*v);
                wmax = wmax.max(*v);
            }
        }
        let wlo = (wmin - self.radius).div_euclid(unit) * unit;
        let whi = (wmax + self.radius).div_euclid(unit) * unit + unit;
        let (lo_t, lo_strict) = lo.unwrap_or((wlo, false));
        let (hi_t, hi_strict) = hi.unwrap_or((whi, false));
        let mut out = Vec::new();
        if lo_t > hi_t {
            return out;
        }
        if lo.is_none() {
            out.push(wlo - unit);
        }
        let mut pts: Vec<Tick> = Vec::new();
        for k in lo_t.div_euclid(unit)..=hi_t.div_euclid(unit) {
            for f in &st.fracs {
                let p = k * unit + f;
                if p >= lo_t && p <= hi_t && pts.last() != Some(&p) {
                    pts.push(p);
                }
            }
        }
        let q = self.samples as i128;
        for (i, &p) in pts.iter().enumerate() {
            let excluded = (p == lo_t && lo_strict) || (p == hi_t && hi_strict);
            if !excluded {
                out.push(p);
            }
            if let Some(&next) = pts.get(i + 1) {
                let gap = next - p;
                debug_assert_eq!(gap % (q + 1), 0, "tick unit too coarse");
                out.extend((1..=q).map(|j| p + gap * j / (q + 1)));
            }
        }
        if hi.is_none() {
            out.push(whi + unit);
        }
        out
    }
}

struct Compiler {
    scope: Vec<(String, usize)>,
    nslots: usize,
    names: Vec<String>,
    slot_of: HashMap<*const Formula, usize>,
    preds: HashMap<String, usize>,
    unit: Tick,
}

impl Compiler {
    fn term(&self, t: &Term) -> Result<CTerm, EvalError> {
        let slot = self
            .scope
            .iter()
            .rev()
            .find(|(n, _)| *n == t.var)
            .map(|(_, s)| *s)
            .ok_or_else(|| EvalError::UnboundVariable(t.var.clone()))?;
        Ok(CTerm {
            slot,
            off: t.offset as i128 * self.unit,
        })
    }

    fn compile(&mut self, f: &Formula) -> Result<Node, EvalError> {
        Ok(match f {
            Formula::True => Node::Const(true),
            Formula::False => Node::Const(false),
            Formula::Pred(p, t) => Node::Pred {
                pred: *self.preds.get(p).ok_or_else(|| EvalError::UnknownPredicate(p.clone()))?,
                t: self.term(t)?,
            },
            Formula::Less(a, b) => Node::Less(self.term(a)?, self.term(b)?),
            Formula::Equal(a, b) => Node::Equal(self.term(a)?, self.term(b)?),
            Formula::Not(a) => Node::Not(Box::new(self.compile(a)?)),
            Formula::And(..) => {
                let mut parts = Vec::new();
                flatten(f, true, &mut parts);
                Node::And(parts.into_iter().map(|p| self.compile(p)).collect::<Result<_, _>>()?)
            }
            Formula::Or(..) => {
                let mut parts = Vec::new();
                flatten(f, false, &mut parts);
                Node::Or(parts.into_iter().map(|p| self.compile(p)).collect::<Result<_, _>>()?)
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                let exists = matches!(f, Formula::Exists(..));
                let slot = self.nslots;
                self.nslots += 1;
                self.names.push(v.clone());
                self.slot_of.insert(f as *const Formula, slot);
                self.scope.push((v.clone(), slot));
                let body_node = self.compile(body)?;
                let mut guard = Guard {
                    edges: Vec::new(),
                    inner: Vec::new(),
                };
                if exists {
                    self.conj_guard(body, &mut guard, &mut Vec::new())?;
                } else {
                    self.disj_guard(body, &mut guard, &mut Vec::new())?;
                }
                self.scope.pop();
                Node::Quant {
                    exists,
                    slot,
                    guard,
                    body: Box::new(body_node),
                }
            }
            Formula::MetricExists { .. } | Formula::Plus1(..) => return Err(EvalError::NotFirstOrder),
        })
    }

    /// Resolves a term under the current scope extended by `inner` binders,
    /// whose slots were assigned in compile order.
    fn guard_term(&self, t: &Term, inner: &[(String, usize)]) -> Option<CTerm> {
        if let Some((_, slot)) = inner.iter().rev().find(|(n, _)| *n == t.var) {
            return Some(CTerm {
                slot: *slot,
                off: t.offset as i128 * self.unit,
            });
        }
        self.term(t).ok()
    }

    fn push_less(&self, a: &Term, b: &Term, strict: bool, guard: &mut Guard, inner: &[(String, usize)]) {
        if let (Some(x), Some(y)) = (self.guard_term(a, inner), self.guard_term(b, inner)) {
            if x.slot != y.slot {
                guard.edges.push(Edge {
                    from: x.slot,
                    to: y.slot,
                    w: y.off - x.off,
                    strict,
                });
            }
        }
    }

    /// Atoms that every satisfying assignment of an existential body obeys.
    fn conj_guard(&self, f: &Formula, guard: &mut Guard, inner: &mut Vec<(String, usize)>) -> Result<(), EvalError> {
        match f {
            Formula::And(a, b) => {
                self.conj_guard(a, guard, inner)?;
                self.conj_guard(b, guard, inner)?;
            }
            Formula::Less(a, b) => self.push_less(a, b, true, guard, inner),
            Formula::Equal(a, b) => {
                self.push_less(a, b, false, guard, inner);
                self.push_less(b, a, false, guard, inner);
            }
            Formula::Not(g) => {
                if let Formula::Less(a, b) = &**g {
                    self.push_less(b, a, false, guard, inner);
                }
            }
            Formula::Exists(v, body) => {
                if let Some(slot) = self.inner_slot(f) {
                    inner.push((v.clone(), slot));
                    guard.inner.push(slot);
                    self.conj_guard(body, guard, inner)?;
                    inner.pop();
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Constraints outside of which a universal body is trivially true.
    fn disj_guard(&self, f: &Formula, guard: &mut Guard, inner: &mut Vec<(String, usize)>) -> Result<(), EvalError> {
        match f {
            Formula::Or(a, b) => {
                self.disj_guard(a, guard, inner)?;
                self.disj_guard(b, guard, inner)?;
            }
            Formula::Not(g) => self.conj_guard(g, guard, inner)?,
            Formula::Less(a, b) => self.push_less(b, a, false, guard, inner),
            Formula::Forall(v, body) => {
                if let Some(slot) = self.inner_slot(f) {
                    inner.push((v.clone(), slot));
                    guard.inner.push(slot);
                    self.disj_guard(body, guard, inner)?;
                    inner.pop();
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Slot of a nested binder; binders are compiled before the guard of
    /// their enclosing quantifier is collected.
    fn inner_slot(&self, f: &Formula) -> Option<usize> {
        self.slot_of.get(&(f as *const Formula)).copied()
    }
}

fn flatten<'a>(f: &'a Formula, and: bool, out: &mut Vec<&'a Formula>) {
    match (f, and) {
        (Formula::And(a, b), true) | (Formula::Or(a, b), false) => {
            flatten(a, and, out);
            flatten(b, and, out);
        }
        _ => out.push(f),
    }
}

/// Interval `[0, D]` of a signal as a one-element set. Handy for tests.
pub fn domain_set(s: &Signal) -> IntervalSet {
    IntervalSet::single(Interval::closed(Time::zero(), s.domain_end()))
}
