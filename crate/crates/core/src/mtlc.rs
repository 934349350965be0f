//! Satisfaction sets of MTL+C formulas.
//!
//! Evaluation is bottom-up over [`IntervalSet`]s and never enumerates
//! individual points, so it shares no code path with the first-order oracle.
//! Subformulas are evaluated over whatever span their parent needs (for
//! example `[L, R + 1]` below a counting modality evaluated on `[L, R]`), so
//! operators looking past the domain see the same values the first-order
//! reading gives them: atoms are false outside `[0, D]` and negation is
//! classical. Only the root set is clipped to `[0, D]`.

use num_traits::Signed;
use thiserror::Error;

use crate::signal::{Interval, IntervalSet, Signal, Time};
use crate::syntax::{Mtlc, TimeBounds};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MtlcError {
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
}

/// Which unit window the counting modalities inspect.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CountWindow {
    /// `(t, t+1)`, the real semantics.
    #[default]
    Open,
    /// `[t, t+1]`; a deliberately wrong variant used for mutation testing.
    Closed,
}

/// Every subformula occurrence with its satisfaction set on `[0, D]`, in
/// post-order. The root is the last entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatMap {
    entries: Vec<(Mtlc, IntervalSet)>,
}

impl SatMap {
    pub fn entries(&self) -> &[(Mtlc, IntervalSet)] {
        &self.entries
    }

    pub fn root(&self) -> &IntervalSet {
        &self.entries.last().expect("formula has at least one node").1
    }

    pub fn get(&self, f: &Mtlc) -> Option<&IntervalSet> {
        self.entries.iter().find(|(g, _)| g == f).map(|(_, s)| s)
    }
}

fn int(k: i64) -> Time {
    Time::from_integer(k)
}

fn span_points(span: &Interval) -> [Time; 2] {
    [span.lo, span.hi]
}

fn breaks_within(mut pts: Vec<Time>, span: &Interval) -> Vec<Time> {
    pts.extend(span_points(span));
    pts.retain(|p| *p >= span.lo && *p <= span.hi);
    pts.sort();
    pts.dedup();
    pts
}

/// `{ t in span : xs has >= n distinct points in (t, t+1) }`.
pub fn counting_set(xs: &IntervalSet, n: u32, span: &Interval) -> IntervalSet {
    counting_set_in(xs, n, span, CountWindow::Open, false)
}

/// Mirror of [`counting_set`] over the window `(t-1, t)`.
pub fn counting_past_set(xs: &IntervalSet, n: u32, span: &Interval) -> IntervalSet {
    counting_set_in(xs, n, span, CountWindow::Open, true)
}

#[doc(hidden)]
pub fn counting_set_in(xs: &IntervalSet, n: u32, span: &Interval, window: CountWindow, past: bool) -> IntervalSet {
    if n == 0 {
        return IntervalSet::single(span.clone());
    }
    let mut pts = Vec::new();
    for iv in xs.intervals() {
        for e in [iv.lo, iv.hi] {
            pts.push(e);
            pts.push(if past { e + 1 } else { e - 1 });
        }
    }
    let pts = breaks_within(pts, span);
    IntervalSet::from_pieces(&pts, |t| {
        let (a, b) = if past { (*t - 1, *t) } else { (*t, *t + 1) };
        match window {
            CountWindow::Open => xs.count_in_window(&a, &b).at_least(n as usize),
            CountWindow::Closed => {
                let w = IntervalSet::single(Interval::closed(a, b));
                let hit = xs.intersect(&w);
                let infinite = hit.intervals().iter().any(|iv| !iv.is_point());
                infinite || hit.intervals().len() >= n as usize
            }
        }
    })
}

/// `{ t in span : t + 1 in xs }`.
pub fn punct_set(xs: &IntervalSet, span: &Interval) -> IntervalSet {
    xs.shift(-1).intersect_interval(span)
}

/// `{ t in span : t - 1 in xs }`.
pub fn punct_past_set(xs: &IntervalSet, span: &Interval) -> IntervalSet {
    xs.shift(1).intersect_interval(span)
}

fn offsets(bounds: &TimeBounds) -> Vec<Time> {
    let mut out = vec![int(0), int(bounds.lo as i64)];
    if let Some(hi) = bounds.hi {
        out.push(int(hi as i64));
    }
    out
}

/// The points `t + I` (or `t - I` when `past`). An unbounded side is cut
/// off beyond anything the finite sets involved can reach.
fn shifted_window(t: &Time, bounds: &TimeBounds, past: bool, far: &Time) -> Option<Interval> {
    let near = int(bounds.lo as i64);
    let reach = bounds.hi.map_or(*far, |h| int(h as i64));
    if past {
        Interval::new(*t - reach, *t - near, bounds.hi_closed, bounds.lo_closed)
    } else {
        Interval::new(*t + near, *t + reach, bounds.lo_closed, bounds.hi_closed)
    }
}

fn until_at(a: &IntervalSet, b: &IntervalSet, bounds: &TimeBounds, t: &Time, past: bool, far: &Time) -> bool {
    let Some(window) = shifted_window(t, bounds, past, far) else {
        return false;
    };
    // t' = t needs 0 in I; the stretch strictly between them is then empty
    if bounds.lo == 0 && bounds.lo_closed && b.contains(t) {
        return true;
    }
    // the component of `a` covering (t, t + eps), resp. (t - eps, t)
    let comp = a.intervals().iter().find(|iv| {
        if past {
            iv.lo < *t && iv.hi >= *t
        } else {
            iv.lo <= *t && iv.hi > *t
        }
    });
    let Some(comp) = comp else {
        return false;
    };
    let stretch = if past {
        Interval::new(comp.lo, *t, true, false)
    } else {
        Interval::new(*t, comp.hi, false, true)
    };
    match stretch.and_then(|s| s.intersect(&window)) {
        Some(w) => !b.intersect_interval(&w).is_empty(),
        None => false,
    }
}

fn sweep(a: &IntervalSet, b: &IntervalSet, bounds: &TimeBounds, span: &Interval, past: bool) -> IntervalSet {
    let mut pts = Vec::new();
    for e in a.endpoints().into_iter().chain(b.endpoints()) {
        for c in offsets(bounds) {
            pts.push(if past { e + c } else { e - c });
        }
    }
    let pts = breaks_within(pts, span);
    let mut far = span.hi - span.lo + 1;
    for e in a.endpoints().into_iter().chain(b.endpoints()) {
        far = far.max((e - span.lo).abs() + 1).max((e - span.hi).abs() + 1);
    }
    IntervalSet::from_pieces(&pts, |t| until_at(a, b, bounds, t, past, &far))
}

/// `{ t in span : exists t' in t + I. t' in b and (t, t') within a }`.
pub fn until_set(a: &IntervalSet, b: &IntervalSet, bounds: &TimeBounds, span: &Interval) -> IntervalSet {
    sweep(a, b, bounds, span, false)
}

/// `{ t in span : exists t' in t - I. t' in b and (t', t) within a }`.
pub fn since_set(a: &IntervalSet, b: &IntervalSet, bounds: &TimeBounds, span: &Interval) -> IntervalSet {
    sweep(a, b, bounds, span, true)
}

/// Horizon beyond `D` after which the formula's truth value is constant.
fn future_stable(f: &Mtlc) -> i64 {
    match f {
        Mtlc::Atom(_) | Mtlc::True => 0,
        Mtlc::Not(a) | Mtlc::Count(_, a) | Mtlc::Punct(a) => future_stable(a),
        Mtlc::CountPast(_, a) | Mtlc::PunctPast(a) => future_stable(a) + 1,
        Mtlc::And(a, b) | Mtlc::Or(a, b) => future_stable(a).max(future_stable(b)),
        Mtlc::Until { lhs, rhs, .. } => future_stable(lhs).max(future_stable(rhs)),
        Mtlc::Since { lhs, rhs, bounds } => {
            let m = future_stable(lhs).max(future_stable(rhs));
            m + bounds.hi.map_or(bounds.lo as i64 + 1, |h| h as i64)
        }
    }
}

/// Horizon before `0` before which the formula's truth value is constant.
fn past_stable(f: &Mtlc) -> i64 {
    match f {
        Mtlc::Atom(_) | Mtlc::True => 0,
        Mtlc::Not(a) | Mtlc::CountPast(_, a) | Mtlc::PunctPast(a) => past_stable(a),
        Mtlc::Count(_, a) | Mtlc::Punct(a) => past_stable(a) + 1,
        Mtlc::And(a, b) | Mtlc::Or(a, b) => past_stable(a).max(past_stable(b)),
        Mtlc::Since { lhs, rhs, .. } => past_stable(lhs).max(past_stable(rhs)),
        Mtlc::Until { lhs, rhs, bounds } => {
            let m = past_stable(lhs).max(past_stable(rhs));
            m + bounds.hi.map_or(bounds.lo as i64 + 1, |h| h as i64)
        }
    }
}

/// Options for [`eval_mtlc_sets_with`]. Only mutation tests change them.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MtlcOptions {
    pub count_window: CountWindow,
}

pub fn eval_mtlc_sets(f: &Mtlc, s: &Signal) -> Result<SatMap, MtlcError> {
    eval_mtlc_sets_with(f, s, MtlcOptions::default())
}

#[doc(hidden)]
pub fn eval_mtlc_sets_with(f: &Mtlc, s: &Signal, opts: MtlcOptions) -> Result<SatMap, MtlcError> {
    let mut ev = SetEval {
        signal: s,
        opts,
        domain: s.domain(),
        entries: Vec::new(),
    };
    ev.eval(f, &s.domain())?;
    Ok(SatMap { entries: ev.entries })
}

pub fn mtlc_holds_at(f: &Mtlc, s: &Signal, t: &Time) -> Result<bool, MtlcError> {
    Ok(eval_mtlc_sets(f, s)?.root().contains(t))
}

struct SetEval<'a> {
    signal: &'a Signal,
    opts: MtlcOptions,
    domain: Interval,
    entries: Vec<(Mtlc, IntervalSet)>,
}

impl SetEval<'_> {
    fn eval(&mut self, f: &Mtlc, span: &Interval) -> Result<IntervalSet, MtlcError> {
        let widen = |lo: i64, hi: i64| Interval::closed(span.lo - lo, span.hi + hi);
        let set = match f {
            Mtlc::True => IntervalSet::single(span.clone()),
            Mtlc::Atom(p) => self
                .signal
                .predicate(p)
                .map_err(|_| MtlcError::UnknownAtom(p.clone()))?
                .intersect_interval(span),
            Mtlc::Not(a) => self.eval(a, span)?.complement_within(span),
            Mtlc::And(a, b) => {
                let x = self.eval(a, span)?;
                x.intersect(&self.eval(b, span)?)
            }
            Mtlc::Or(a, b) => {
                let x = self.eval(a, span)?;
                x.union(&self.eval(b, span)?)
            }
            Mtlc::Count(n, a) => {
                let xs = self.eval(a, &widen(0, 1))?;
                counting_set_in(&xs, *n, span, self.opts.count_window, false)
            }
            Mtlc::CountPast(n, a) => {
                let xs = self.eval(a, &widen(1, 0))?;
                counting_set_in(&xs, *n, span, self.opts.count_window, true)
            }
            Mtlc::Punct(a) => punct_set(&self.eval(a, &widen(0, 1))?, span),
            Mtlc::PunctPast(a) => punct_past_set(&self.eval(a, &widen(1, 0))?, span),
            Mtlc::Until { lhs, rhs, bounds } => {
                let (child_span, tail) = match bounds.hi {
                    Some(h) => (widen(0, h as i64), None),
                    None => {
                        let stable = self.domain.hi + future_stable(lhs).max(future_stable(rhs));
                        let end = span.hi.max(stable) + int(bounds.lo as i64 + 1);
                        (Interval::closed(span.lo, end), Some(end))
                    }
                };
                let mut a = self.eval(lhs, &child_span)?;
                let mut b = self.eval(rhs, &child_span)?;
                if let Some(end) = tail {
                    a = extend_constant(&a, end, 1);
                    b = extend_constant(&b, end, 1);
                }
                until_set(&a, &b, bounds, span)
            }
            Mtlc::Since { lhs, rhs, bounds } => {
                let (child_span, tail) = match bounds.hi {
                    Some(h) => (widen(h as i64, 0), None),
                    None => {
                        let stable = -int(past_stable(lhs).max(past_stable(rhs)));
                        let start = span.lo.min(stable) - int(bounds.lo as i64 + 1);
                        (Interval::closed(start, span.hi), Some(start))
                    }
                };
                let mut a = self.eval(lhs, &child_span)?;
                let mut b = self.eval(rhs, &child_span)?;
                if let Some(start) = tail {
                    a = extend_constant(&a, start, -1);
                    b = extend_constant(&b, start, -1);
                }
                since_set(&a, &b, bounds, span)
            }
        };
        self.entries.push((f.clone(), set.intersect_interval(&self.domain)));
        Ok(set)
    }
}

/// Continues a set that is constant beyond `edge` by one more unit in
/// direction `dir`.
fn extend_constant(set: &IntervalSet, edge: Time, dir: i64) -> IntervalSet {
    if !set.contains(&edge) {
        return set.clone();
    }
    let more = if dir > 0 {
        Interval::closed(edge, edge + 1)
    } else {
        Interval::closed(edge - 1, edge)
    };
    set.union(&IntervalSet::single(more))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_mtlc;

    fn r(n: i64, d: i64) -> Time {
        Time::new(n, d)
    }

    fn dom(d: i64) -> Interval {
        Interval::closed(int(0), int(d))
    }

    fn set(ivs: Vec<Interval>) -> IntervalSet {
        IntervalSet::normalize(ivs)
    }

    fn sig(preds: &str, d: &str) -> Signal {
        Signal::from_json(&format!(r#"{{"domain_end": "{d}", "predicates": {{{preds}}}}}"#)).unwrap()
    }

    #[test]
    fn counting_examples() {
        let unit = set(vec![Interval::open(int(0), int(1))]);
        assert_eq!(
            counting_set(&unit, 2, &dom(4)),
            set(vec![Interval::new(int(0), int(1), true, false).unwrap()])
        );
        let two = set(vec![Interval::point(int(1)), Interval::point(r(3, 2))]);
        assert_eq!(counting_set(&two, 2, &dom(4)), set(vec![Interval::open(r(1, 2), int(1))]));
        assert_eq!(counting_set(&two, 0, &dom(4)), set(vec![dom(4)]));
        assert_eq!(counting_set(&two, 3, &dom(4)), IntervalSet::empty());
    }

    #[test]
    fn counting_past_examples() {
        let unit = set(vec![Interval::open(int(0), int(1))]);
        assert_eq!(counting_past_set(&unit, 1, &dom(4)), set(vec![Interval::open(int(0), int(2))]));
        assert!(counting_past_set(&IntervalSet::empty(), 1, &dom(4)).is_empty());
    }

    #[test]
    fn punctual_examples() {
        let one = set(vec![Interval::point(int(1))]);
        assert_eq!(punct_set(&one, &dom(4)), set(vec![Interval::point(int(0))]));
        let mid = set(vec![Interval::open(int(2), int(3))]);
        assert_eq!(punct_set(&mid, &dom(4)), set(vec![Interval::open(int(1), int(2))]));
        assert_eq!(punct_past_set(&mid, &dom(4)), set(vec![Interval::open(int(3), int(4))]));
    }

    #[test]
    fn until_examples() {
        let all = set(vec![dom(4)]);
        let two = set(vec![Interval::point(int(2))]);
        assert_eq!(
            until_set(&all, &two, &TimeBounds::untimed(), &dom(4)),
            set(vec![Interval::closed(int(0), int(2))])
        );
        assert!(until_set(&all, &IntervalSet::empty(), &TimeBounds::untimed(), &dom(4)).is_empty());
        // bounded: witness at exactly 2 must be 1..=1 ahead
        let b = TimeBounds::closed(1, Some(1));
        assert_eq!(until_set(&all, &two, &b, &dom(4)), set(vec![Interval::point(int(1))]));
        // a gap in `a` blocks the stretch
        let holey = set(vec![Interval::new(int(0), int(1), true, false).unwrap(), Interval::new(int(1), int(4), false, true).unwrap()]);
        assert_eq!(
            until_set(&holey, &two, &TimeBounds::untimed(), &dom(4)),
            set(vec![Interval::closed(int(1), int(2))])
        );
        assert_eq!(
            since_set(&all, &two, &TimeBounds::untimed(), &dom(4)),
            set(vec![Interval::closed(int(2), int(4))])
        );
    }

    #[test]
    fn formula_examples() {
        let s = sig(r#""P": [["(", "0", "1", ")"]], "Q": [["[", "1", "1", "]"]], "E": []"#, "4");
        let c2 = parse_mtlc("(cnt 2 (atom P))").unwrap();
        assert!(mtlc_holds_at(&c2, &s, &int(0)).unwrap());
        let d1 = parse_mtlc("(d1 (atom Q))").unwrap();
        assert!(mtlc_holds_at(&d1, &s, &int(0)).unwrap());
        assert!(!mtlc_holds_at(&d1, &s, &r(1, 2)).unwrap());
        let nc = parse_mtlc("(not (cnt 1 (atom E)))").unwrap();
        assert_eq!(eval_mtlc_sets(&nc, &s).unwrap().root(), &set(vec![dom(4)]));
        let bad = parse_mtlc("(atom Z)").unwrap();
        assert_eq!(eval_mtlc_sets(&bad, &s), Err(MtlcError::UnknownAtom("Z".into())));
    }

    #[test]
    fn negation_is_classical_beyond_the_domain() {
        // (not P) holds at 5 = 4 + 1, so d1 (not P) holds at the domain end
        let s = sig(r#""P": [["[", "0", "4", "]"]]"#, "4");
        let f = parse_mtlc("(d1 (not (atom P)))").unwrap();
        assert_eq!(eval_mtlc_sets(&f, &s).unwrap().root(), &set(vec![Interval::new(int(3), int(4), false, true).unwrap()]));
    }

    #[test]
    fn satmap_covers_every_node() {
        let s = sig(r#""P": [["(", "0", "1", ")"]]"#, "2");
        let f = parse_mtlc("(and (cnt 1 (atom P)) (not (d1bar (atom P))))").unwrap();
        let m = eval_mtlc_sets(&f, &s).unwrap();
        assert_eq!(m.entries().len(), 6);
        let dom2 = s.domain();
        for (_, xs) in m.entries() {
            assert!(xs.is_subset(&IntervalSet::single(dom2.clone())));
        }
        assert!(m.get(&parse_mtlc("(atom P)").unwrap()).is_some());
    }
}
