//! Seeded differential testing. Every check generates inputs from
//! `(seed, trial)`, evaluates two supposedly equivalent sides and records the
//! trials where they disagree, with enough data to replay them.

use std::collections::BTreeSet;
use std::time::Instant;

use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mtlc::{CountWindow, MtlcOptions, eval_mtlc_sets_with};
use crate::normalize::{HodkinsonForm, Z, branches_to_fo, normalize, simplified_to_fo};
use crate::oracle::{EvalConfig, EvalError, Evaluator, Valuation, desugar, eval_fo_with, eval_q2mlo_with, fo_sat_set};
use crate::signal::{Interval, IntervalSet, Signal, Time, format_time};
use crate::syntax::{Direction, Formula, Mtlc, Prop, SimplifiedForm, Term, TimeBounds};
use crate::translate::{LemmaVariant, lemma_translate_with, mtlc_to_q2mlo, psi_between};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialConfig {
    pub seed: u64,
    pub trials: usize,
    pub max_n: usize,
    pub alphabet_size: usize,
    pub max_breakpoints: usize,
    pub domain_end: Time,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            seed: 42,
            trials: 1000,
            max_n: 2,
            alphabet_size: 2,
            max_breakpoints: 12,
            domain_end: Time::from_integer(4),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.alphabet_size == 0 || self.alphabet_size > 26 {
            return Err(HarnessError::Config("alphabet size must be in 1..=26".into()));
        }
        if self.max_breakpoints == 0 {
            return Err(HarnessError::Config("max breakpoints must be positive".into()));
        }
        if self.domain_end < Time::from_integer(2) {
            return Err(HarnessError::Config("domain end must be at least 2".into()));
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Vec<String> {
        (0..self.alphabet_size).map(|i| ((b'P' - b'A' + i as u8) % 26 + b'A') as char).map(String::from).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub formula: String,
    pub signal: serde_json::Value,
    pub z: String,
    pub lhs: bool,
    pub rhs: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialReport {
    pub trials: usize,
    pub failures: Vec<Failure>,
    pub elapsed_ms: u128,
    /// Trials whose left-hand side held; a coverage figure.
    pub lhs_true: usize,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

// ---------------------------------------------------------------------------
// generators

fn gen_time(rng: &mut impl Rng, end: &Time) -> Time {
    let den = *[1i64, 2, 2, 3, 4, 4].choose(rng).expect("nonempty");
    let top = (*end * den).floor().to_integer();
    Time::new(rng.gen_range(0..=top), den)
}

/// A signal over `[0, domain_end]` with at most `max_breakpoints` interior
/// breakpoints in total, mixing open and closed ends and singletons.
pub fn gen_signal(rng: &mut impl Rng, cfg: &TrialConfig) -> Signal {
    let end = cfg.domain_end;
    let alphabet = cfg.alphabet();
    let total = rng.gen_range(0..=cfg.max_breakpoints);
    let mut budget = vec![0usize; alphabet.len()];
    for _ in 0..total {
        budget[rng.gen_range(0..alphabet.len())] += 1;
    }
    let mut preds = std::collections::BTreeMap::new();
    for (name, b) in alphabet.into_iter().zip(budget) {
        let mut pts: BTreeSet<Time> = (0..b).map(|_| gen_time(rng, &end)).collect();
        pts.insert(Time::zero());
        pts.insert(end);
        let pts: Vec<Time> = pts.into_iter().collect();
        // dense pieces are likelier than singletons so long runs occur
        let mut pieces = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if rng.gen_bool(0.3) {
                pieces.push(Interval::point(*p));
            }
            if let Some(q) = pts.get(i + 1) {
                if rng.gen_bool(0.5) {
                    pieces.push(Interval::open(*p, *q));
                }
            }
        }
        preds.insert(name, IntervalSet::normalize(pieces));
    }
    Signal::new(end, preds).expect("generated within the domain")
}

pub fn gen_prop(rng: &mut impl Rng, alphabet: &[String], depth: usize) -> Prop {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => Prop::True,
            1 => Prop::not(Prop::atom(alphabet.choose(rng).expect("nonempty").clone())),
            _ => Prop::atom(alphabet.choose(rng).expect("nonempty").clone()),
        };
    }
    match rng.gen_range(0..3) {
        0 => Prop::not(gen_prop(rng, alphabet, depth - 1)),
        1 => Prop::and(gen_prop(rng, alphabet, depth - 1), gen_prop(rng, alphabet, depth - 1)),
        _ => Prop::or(gen_prop(rng, alphabet, depth - 1), gen_prop(rng, alphabet, depth - 1)),
    }
}

pub fn gen_simplified(rng: &mut impl Rng, cfg: &TrialConfig) -> SimplifiedForm {
    let alphabet = cfg.alphabet();
    let n = rng.gen_range(0..=cfg.max_n);
    let phis = (0..2 * n + 1).map(|_| gen_prop(rng, &alphabet, 2)).collect();
    SimplifiedForm::new(n, phis).expect("2n+1 entries")
}

pub fn gen_hodkinson(rng: &mut impl Rng, cfg: &TrialConfig) -> HodkinsonForm {
    let alphabet = cfg.alphabet();
    let n = rng.gen_range(0..=cfg.max_n);
    let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut vars: Vec<String> = vec!["y".into(), "y".into(), Z.into()];
    vars.extend(xs.iter().cloned());
    let matrix = gen_matrix(rng, &alphabet, &vars, 3);
    HodkinsonForm {
        xs,
        y: "y".into(),
        matrix,
    }
}

fn gen_matrix(rng: &mut impl Rng, alphabet: &[String], vars: &[String], depth: usize) -> Formula {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..6) {
            0 => Formula::lt(gen_term(rng, vars), gen_term(rng, vars)),
            1 => Formula::eq(gen_term(rng, vars), gen_term(rng, vars)),
            _ => Formula::pred(alphabet.choose(rng).expect("nonempty").clone(), Term::var(vars.choose(rng).expect("nonempty"))),
        };
    }
    match rng.gen_range(0..3) {
        0 => Formula::not(gen_matrix(rng, alphabet, vars, depth - 1)),
        1 => Formula::and(gen_matrix(rng, alphabet, vars, depth - 1), gen_matrix(rng, alphabet, vars, depth - 1)),
        _ => Formula::or(gen_matrix(rng, alphabet, vars, depth - 1), gen_matrix(rng, alphabet, vars, depth - 1)),
    }
}

fn gen_term(rng: &mut impl Rng, vars: &[String]) -> Term {
    let v = vars.choose(rng).expect("nonempty");
    if v == Z && rng.gen_bool(0.3) {
        Term::plus(Z, 1)
    } else {
        Term::var(v)
    }
}

/// A formula of the counting fragment.
pub fn gen_mtlc(rng: &mut impl Rng, cfg: &TrialConfig) -> Mtlc {
    gen_mtlc_depth(rng, &cfg.alphabet(), 3)
}

fn gen_mtlc_depth(rng: &mut impl Rng, alphabet: &[String], depth: usize) -> Mtlc {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.1) { Mtlc::True } else { Mtlc::atom(alphabet.choose(rng).expect("nonempty").clone()) };
    }
    let sub = |rng: &mut _| gen_mtlc_depth(rng, alphabet, depth - 1);
    match rng.gen_range(0..8) {
        0 => Mtlc::not(sub(rng)),
        1 => Mtlc::and(sub(rng), sub(rng)),
        2 => Mtlc::or(sub(rng), sub(rng)),
        3 => Mtlc::count(rng.gen_range(0..=3), sub(rng)),
        4 => Mtlc::count_past(rng.gen_range(0..=3), sub(rng)),
        5 => Mtlc::punct(sub(rng)),
        6 => Mtlc::punct_past(sub(rng)),
        _ => Mtlc::not(Mtlc::count(rng.gen_range(1..=2), sub(rng))),
    }
}

/// Any MTL+C formula, with bounds up to `max_bound` on the temporal
/// modalities.
pub fn gen_mtlc_full(rng: &mut impl Rng, alphabet: &[String], depth: usize, max_bound: u64) -> Mtlc {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.1) { Mtlc::True } else { Mtlc::atom(alphabet.choose(rng).expect("nonempty").clone()) };
    }
    let sub = |rng: &mut _| gen_mtlc_full(rng, alphabet, depth - 1, max_bound);
    match rng.gen_range(0..10) {
        0 => Mtlc::not(sub(rng)),
        1 => Mtlc::and(sub(rng), sub(rng)),
        2 => Mtlc::or(sub(rng), sub(rng)),
        3 => Mtlc::count(rng.gen_range(0..=3), sub(rng)),
        4 => Mtlc::count_past(rng.gen_range(0..=3), sub(rng)),
        5 => Mtlc::punct(sub(rng)),
        6 => Mtlc::punct_past(sub(rng)),
        7 | 8 => Mtlc::until(sub(rng), sub(rng), gen_bounds(rng, max_bound)),
        _ => Mtlc::since(sub(rng), sub(rng), gen_bounds(rng, max_bound)),
    }
}

pub fn gen_bounds(rng: &mut impl Rng, max_bound: u64) -> TimeBounds {
    let lo = rng.gen_range(0..=max_bound);
    if rng.gen_bool(0.3) {
        return TimeBounds {
            lo,
            hi: None,
            lo_closed: rng.gen(),
            hi_closed: false,
        };
    }
    let hi = rng.gen_range(lo..=max_bound.max(lo));
    let (lo_closed, hi_closed) = if hi == lo { (true, true) } else { (rng.gen(), rng.gen()) };
    TimeBounds {
        lo,
        hi: Some(hi),
        lo_closed,
        hi_closed,
    }
}

fn pick(rng: &mut impl Rng, items: &[String]) -> String {
    items.choose(rng).expect("nonempty").clone()
}

fn gen_fo_term(rng: &mut impl Rng, vars: &[String], offsets: bool) -> Term {
    let v = pick(rng, vars);
    if offsets && rng.gen_bool(0.2) {
        Term::plus(v, rng.gen_range(-2..=2))
    } else {
        Term::var(v)
    }
}

/// A first-order formula over variables drawn from `vars`; with `q2`, also
/// metric quantifiers and `plus1` atoms instead of offsets.
pub fn gen_formula(rng: &mut impl Rng, alphabet: &[String], vars: &[String], q2: bool, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            2 => Formula::lt(gen_fo_term(rng, vars, !q2), gen_fo_term(rng, vars, !q2)),
            3 => Formula::eq(gen_fo_term(rng, vars, !q2), gen_fo_term(rng, vars, !q2)),
            4 if q2 => Formula::Plus1(Term::var(pick(rng, vars)), Term::var(pick(rng, vars))),
            _ => Formula::pred(pick(rng, alphabet), gen_fo_term(rng, vars, !q2)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..7) {
        0 => Formula::not(gen_formula(rng, alphabet, vars, q2, d)),
        1 => Formula::and(gen_formula(rng, alphabet, vars, q2, d), gen_formula(rng, alphabet, vars, q2, d)),
        2 => Formula::or(gen_formula(rng, alphabet, vars, q2, d), gen_formula(rng, alphabet, vars, q2, d)),
        3 => Formula::exists(pick(rng, vars), gen_formula(rng, alphabet, vars, q2, d)),
        4 => Formula::forall(pick(rng, vars), gen_formula(rng, alphabet, vars, q2, d)),
        _ if q2 => {
            let v = pick(rng, vars);
            let anchor = vars.iter().find(|a| **a != v).cloned().unwrap_or_else(|| format!("{v}_a"));
            let dir = if rng.gen() { Direction::Fwd } else { Direction::Bwd };
            Formula::metric(v, anchor, dir, gen_formula(rng, alphabet, vars, q2, d))
        }
        _ => Formula::exists(pick(rng, vars), gen_formula(rng, alphabet, vars, q2, d)),
    }
}

/// A point `z` with `z + 1` in the domain: a breakpoint shifted by an integer,
/// or the midpoint between two consecutive such points.
pub fn gen_z(rng: &mut impl Rng, s: &Signal) -> Time {
    let last = s.domain_end() - 1;
    let mut pts = BTreeSet::new();
    for b in s.breakpoints().into_iter().chain([Time::zero(), s.domain_end()]) {
        let frac = b - b.floor();
        let mut p = frac;
        while p <= last {
            pts.insert(p);
            p += 1;
        }
    }
    pts.insert(last);
    let pts: Vec<Time> = pts.into_iter().collect();
    let mut cands = pts.clone();
    cands.extend(pts.windows(2).map(|w| (w[0] + w[1]) / 2));
    *cands.choose(rng).expect("0 is always a candidate")
}

// ---------------------------------------------------------------------------
// checks

struct Outcome {
    formula: String,
    signal: serde_json::Value,
    z: String,
    lhs: bool,
    rhs: bool,
    error: Option<String>,
    failed: bool,
}

impl Outcome {
    fn compare(formula: String, s: &Signal, z: &Time, lhs: Result<bool, EvalError>, rhs: Result<bool, EvalError>) -> Self {
        let error = lhs.as_ref().err().or(rhs.as_ref().err()).map(|e| e.to_string());
        let (l, r) = (lhs.unwrap_or(false), rhs.unwrap_or(false));
        Outcome {
            formula,
            signal: s.to_json_value(),
            z: format_time(z),
            lhs: l,
            rhs: r,
            failed: error.is_some() || l != r,
            error,
        }
    }
}

fn run(cfg: &TrialConfig, trial: impl Fn(&mut ChaCha8Rng) -> Outcome + Sync) -> Result<TrialReport, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let outcomes: Vec<(usize, Outcome)> = (0..cfg.trials).into_par_iter().map(|i| (i, trial(&mut trial_rng(cfg.seed, i)))).collect();
    let lhs_true = outcomes.iter().filter(|(_, o)| o.lhs).count();
    let failures = outcomes
        .into_iter()
        .filter(|(_, o)| o.failed)
        .map(|(i, o)| Failure {
            trial: i,
            formula: o.formula,
            signal: o.signal,
            z: o.z,
            lhs: o.lhs,
            rhs: o.rhs,
            error: o.error,
        })
        .collect();
    Ok(TrialReport {
        trials: cfg.trials,
        failures,
        elapsed_ms: start.elapsed().as_millis(),
        lhs_true,
    })
}

fn at(z: &Time) -> Valuation {
    [(Z.to_string(), *z)].into()
}

/// Simplified form against its Q2MLO(+1) translation at a random `z`.
pub fn check_lemma(cfg: &TrialConfig) -> Result<TrialReport, HarnessError> {
    check_lemma_with(cfg, LemmaVariant::Full)
}

pub fn check_lemma_with(cfg: &TrialConfig, variant: LemmaVariant) -> Result<TrialReport, HarnessError> {
    run(cfg, |rng| {
        let sf = gen_simplified(rng, cfg);
        let s = gen_signal(rng, cfg);
        let z = gen_z(rng, &s);
        let lhs = eval_fo_with(&simplified_to_fo(&sf), &s, &at(&z), EvalConfig::default());
        let rhs = eval_q2mlo_with(&lemma_translate_with(std::slice::from_ref(&sf), variant), &s, &at(&z), EvalConfig::default());
        Outcome::compare(sf.to_string(), &s, &z, lhs, rhs)
    })
}

/// Relativized `∃x̄ ∀y` formula against the disjunction of its branches.
pub fn check_normalize(cfg: &TrialConfig) -> Result<TrialReport, HarnessError> {
    run(cfg, |rng| {
        let h = gen_hodkinson(rng, cfg);
        let s = gen_signal(rng, cfg);
        let z = gen_z(rng, &s);
        let lhs = eval_fo_with(&h.relativized(), &s, &at(&z), EvalConfig::default());
        let rhs = eval_fo_with(&branches_to_fo(&normalize(&h)), &s, &at(&z), EvalConfig::default());
        Outcome::compare(h.to_formula().to_string(), &s, &z, lhs, rhs)
    })
}

/// Interval-set evaluation against the oracle on the translated formula. A
/// failure reports a point of the symmetric difference as `z`.
pub fn check_mtlc(cfg: &TrialConfig) -> Result<TrialReport, HarnessError> {
    check_mtlc_with(cfg, CountWindow::Open)
}

pub fn check_mtlc_with(cfg: &TrialConfig, window: CountWindow) -> Result<TrialReport, HarnessError> {
    run(cfg, |rng| {
        let f = gen_mtlc(rng, cfg);
        let s = gen_signal(rng, cfg);
        let sets = eval_mtlc_sets_with(&f, &s, MtlcOptions { count_window: window });
        let oracle = mtlc_to_q2mlo(&f).map(|q| desugar(&q));
        let fo = match (sets, oracle) {
            (Ok(sets), Ok(q)) => fo_sat_set(&q, &s).map(|o| (sets.root().clone(), o)),
            (Err(e), _) => Err(EvalError::UnknownPredicate(e.to_string())),
            (_, Err(e)) => Err(EvalError::UnknownPredicate(e.to_string())),
        };
        match fo {
            Ok((mine, theirs)) => {
                let diff = mine.difference(&theirs).union(&theirs.difference(&mine));
                let z = diff.intervals().first().map_or(Time::zero(), representative);
                Outcome::compare(f.to_string(), &s, &z, Ok(mine.contains(&z)), Ok(theirs.contains(&z)))
            }
            Err(e) => Outcome::compare(f.to_string(), &s, &Time::zero(), Err(e), Ok(false)),
        }
    })
}

fn representative(iv: &Interval) -> Time {
    if iv.is_point() { iv.lo } else { (iv.lo + iv.hi) / 2 }
}

/// Same formulas and inputs as [`check_lemma`] and [`check_normalize`],
/// evaluated with `samples` and with twice as many interior samples per gap.
pub fn check_grid_robustness(cfg: &TrialConfig, samples: usize) -> Result<TrialReport, HarnessError> {
    let base = EvalConfig {
        samples_per_gap: samples,
        ..EvalConfig::default()
    };
    let doubled = EvalConfig {
        samples_per_gap: 2 * samples,
        ..EvalConfig::default()
    };
    run(cfg, |rng| {
        let sf = gen_simplified(rng, cfg);
        let h = gen_hodkinson(rng, cfg);
        let s = gen_signal(rng, cfg);
        let z = gen_z(rng, &s);
        let v = at(&z);
        let q2 = lemma_translate_with(std::slice::from_ref(&sf), LemmaVariant::Full);
        let fo = [simplified_to_fo(&sf), h.relativized()];
        for f in &fo {
            let (a, b) = (eval_fo_with(f, &s, &v, base), eval_fo_with(f, &s, &v, doubled));
            if a != b {
                return Outcome::compare(f.to_string(), &s, &z, a, b);
            }
        }
        let (a, b) = (eval_q2mlo_with(&q2, &s, &v, base), eval_q2mlo_with(&q2, &s, &v, doubled));
        Outcome::compare(q2.to_string(), &s, &z, a, b)
    })
}

/// Which conclusion the limit-closure check demands once a prefix holds on
/// the whole last gap below `z+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitTarget {
    /// The same prefix holds at `z+1`.
    SamePrefix,
    /// Odd prefixes hold at `z+1`; an even prefix `r` forces prefix `r-1`
    /// at `z+1`.
    ClosedPrefix,
}

/// The largest point below `z+1` at which truth of a two-variable formula in
/// `(z, ·)` can change: the closest integer shift of a breakpoint or of `z`.
pub fn last_gap_start(s: &Signal, z: &Time) -> Time {
    let top = *z + 1;
    s.breakpoints()
        .into_iter()
        .chain([Time::zero(), s.domain_end(), *z])
        .map(|b| {
            // largest b + k strictly below top
            let k = (top - b).ceil() - 1;
            b + k
        })
        .max()
        .expect("nonempty")
}

/// Prefix `r` true on the last gap below `z+1` must carry over to `z+1`
/// (or, for `ClosedPrefix`, its odd closure must). `lhs` is the gap value,
/// `rhs` the endpoint value; a failure is `lhs && !rhs`.
pub fn check_limit_closure(cfg: &TrialConfig, target: LimitTarget) -> Result<TrialReport, HarnessError> {
    run(cfg, |rng| {
        let mut sf = gen_simplified(rng, cfg);
        while sf.n() == 0 && cfg.max_n > 0 {
            sf = gen_simplified(rng, cfg);
        }
        let r = rng.gen_range(1..=2 * sf.n() + 1);
        let s = gen_signal(rng, cfg);
        let z = gen_z(rng, &s);
        let u = (last_gap_start(&s, &z) + z + 1) / 2;
        let end = z + 1;
        let eval = |i: usize, hi: &Time| -> Result<bool, EvalError> {
            let f = psi_between(&sf, i, Z, "u");
            let dens = [*z.denom(), *hi.denom()];
            Evaluator::new(&f, &s, &[Z.to_string(), "u".to_string()], dens, EvalConfig::default())?.eval_at(&[z, *hi])
        };
        let gap = eval(r, &u);
        let closed_r = match target {
            LimitTarget::SamePrefix => r,
            LimitTarget::ClosedPrefix if r % 2 == 0 => r - 1,
            LimitTarget::ClosedPrefix => r,
        };
        let endpoint = eval(closed_r, &end);
        let label = format!("(prefix {r} {sf})");
        let mut o = Outcome::compare(label, &s, &z, gap.clone(), endpoint.clone());
        if let (Ok(g), Ok(e)) = (gap, endpoint) {
            o.failed = g && !e;
        }
        o
    })
}
