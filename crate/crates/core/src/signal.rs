//! Exact dense-time signals.
//!
//! Time points are exact rationals. A predicate's truth set is an
//! [`IntervalSet`], a canonical finite union of intervals whose endpoints may
//! individually be open or closed. Singletons are ordinary intervals with
//! `lo == hi` and both ends closed.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point on the time line.
pub type Time = Rational64;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("malformed signal JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed rational `{0}`")]
    BadTime(String),
    #[error("bad bracket `{0}`, expected one of ( [ ) ]")]
    BadBracket(String),
    #[error("empty interval {0}")]
    EmptyInterval(String),
    #[error("domain end must be positive, got {0}")]
    BadDomain(String),
    #[error("predicate `{pred}` leaves the domain [0, {domain_end}]")]
    OutOfDomain { pred: String, domain_end: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
}

/// Parses `"p/q"`, `"-p/q"` or `"k"`.
pub fn parse_time(text: &str) -> Result<Time, SignalError> {
    let bad = || SignalError::BadTime(text.to_string());
    let text_trim = text.trim();
    match text_trim.split_once('/') {
        Some((num, den)) => {
            let num: i64 = num.trim().parse().map_err(|_| bad())?;
            let den: i64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            Ok(Time::new(num, den))
        }
        None => Ok(Time::from_integer(text_trim.parse().map_err(|_| bad())?)),
    }
}

/// Canonical text form: `"k"` for integers, `"p/q"` otherwise.
pub fn format_time(t: &Time) -> String {
    if t.is_integer() {
        t.numer().to_string()
    } else {
        format!("{}/{}", t.numer(), t.denom())
    }
}

/// A nonempty interval with rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Time,
    pub hi: Time,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    /// Returns `None` when the described point set is empty.
    pub fn new(lo: Time, hi: Time, lo_closed: bool, hi_closed: bool) -> Option<Self> {
        match lo.cmp(&hi) {
            Ordering::Less => Some(Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            }),
            Ordering::Equal if lo_closed && hi_closed => Some(Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            }),
            _ => None,
        }
    }

    pub fn closed(lo: Time, hi: Time) -> Self {
        Self::new(lo, hi, true, true).expect("closed interval with lo <= hi")
    }

    pub fn open(lo: Time, hi: Time) -> Self {
        Self::new(lo, hi, false, false).expect("open interval with lo < hi")
    }

    pub fn point(t: Time) -> Self {
        Self::closed(t, t)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, t: &Time) -> bool {
        let above = if self.lo_closed {
            *t >= self.lo
        } else {
            *t > self.lo
        };
        let below = if self.hi_closed {
            *t <= self.hi
        } else {
            *t < self.hi
        };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = match self.lo.cmp(&other.lo) {
            Ordering::Less => (other.lo, other.lo_closed),
            Ordering::Greater => (self.lo, self.lo_closed),
            Ordering::Equal => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.cmp(&other.hi) {
            Ordering::Less => (self.hi, self.hi_closed),
            Ordering::Greater => (other.hi, other.hi_closed),
            Ordering::Equal => (self.hi, self.hi_closed && other.hi_closed),
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }

    pub fn shift(&self, delta: Time) -> Interval {
        Interval {
            lo: self.lo + delta,
            hi: self.hi + delta,
            ..self.clone()
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            format_time(&self.lo),
            format_time(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Number of distinct points of a set inside an open window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PointCount {
    Finite(usize),
    Infinite,
}

impl PointCount {
    pub fn at_least(self, n: usize) -> bool {
        match self {
            PointCount::Infinite => true,
            PointCount::Finite(k) => k >= n,
        }
    }
}

/// Sorted, pairwise disjoint, non-adjacent intervals. Every point set that is
/// a finite union of intervals has exactly one representation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn single(iv: Interval) -> Self {
        IntervalSet {
            intervals: vec![iv],
        }
    }

    /// Canonicalizes an arbitrary list of intervals.
    pub fn normalize(mut raw: Vec<Interval>) -> Self {
        raw.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            if let Some(cur) = out.last_mut() {
                let touches = iv.lo < cur.hi || (iv.lo == cur.hi && (cur.hi_closed || iv.lo_closed));
                if touches {
                    match iv.hi.cmp(&cur.hi) {
                        Ordering::Greater => {
                            cur.hi = iv.hi;
                            cur.hi_closed = iv.hi_closed;
                        }
                        Ordering::Equal => cur.hi_closed |= iv.hi_closed,
                        Ordering::Less => {}
                    }
                    continue;
                }
            }
            out.push(iv);
        }
        IntervalSet { intervals: out }
    }

    /// Builds a set from a predicate that is constant on every open gap between
    /// consecutive `breaks`. The predicate is sampled at each break and at the
    /// midpoint of each gap. Points outside `[breaks[0], breaks[last]]` are
    /// excluded.
    pub fn from_pieces(breaks: &[Time], mut member: impl FnMut(&Time) -> bool) -> Self {
        let mut raw = Vec::new();
        for (i, b) in breaks.iter().enumerate() {
            if member(b) {
                raw.push(Interval::point(*b));
            }
            if let Some(next) = breaks.get(i + 1) {
                let mid = (*b + *next) / Time::from_integer(2);
                if member(&mid) {
                    raw.push(Interval::open(*b, *next));
                }
            }
        }
        IntervalSet::normalize(raw)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: &Time) -> bool {
        // the list is short in practice; binary search on lo anyway
        let idx = self.intervals.partition_point(|iv| iv.lo <= *t);
        idx > 0 && self.intervals[idx - 1].contains(t)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut raw = self.intervals.clone();
        raw.extend(other.intervals.iter().cloned());
        IntervalSet::normalize(raw)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = &self.intervals[i];
            let b = &other.intervals[j];
            if let Some(c) = a.intersect(b) {
                out.push(c);
            }
            let a_first = match a.hi.cmp(&b.hi) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => !a.hi_closed || b.hi_closed,
            };
            if a_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::normalize(out)
    }

    pub fn intersect_interval(&self, span: &Interval) -> IntervalSet {
        self.intersect(&IntervalSet::single(span.clone()))
    }

    /// Complement relative to `span`.
    pub fn complement_within(&self, span: &Interval) -> IntervalSet {
        let mut out = Vec::new();
        let mut cur_lo = span.lo;
        let mut cur_closed = span.lo_closed;
        for iv in self.intersect_interval(span).intervals {
            if let Some(gap) = Interval::new(cur_lo, iv.lo, cur_closed, !iv.lo_closed) {
                out.push(gap);
            }
            cur_lo = iv.hi;
            cur_closed = !iv.hi_closed;
        }
        if let Some(gap) = Interval::new(cur_lo, span.hi, cur_closed, span.hi_closed) {
            out.push(gap);
        }
        IntervalSet::normalize(out)
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let Some(hull) = self.hull() else {
            return IntervalSet::empty();
        };
        self.intersect(&other.complement_within(&hull))
    }

    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Smallest interval containing the set.
    pub fn hull(&self) -> Option<Interval> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Interval::new(first.lo, last.hi, first.lo_closed, last.hi_closed)
    }

    /// `{ t + delta : t in self }`. No clamping.
    pub fn shift(&self, delta: i64) -> IntervalSet {
        self.shift_by(Time::from_integer(delta))
    }

    pub fn shift_by(&self, delta: Time) -> IntervalSet {
        IntervalSet {
            intervals: self.intervals.iter().map(|iv| iv.shift(delta)).collect(),
        }
    }

    /// Image under `t -> axis - t`.
    pub fn reflect(&self, axis: Time) -> IntervalSet {
        let raw = self
            .intervals
            .iter()
            .map(|iv| Interval {
                lo: axis - iv.hi,
                hi: axis - iv.lo,
                lo_closed: iv.hi_closed,
                hi_closed: iv.lo_closed,
            })
            .collect();
        IntervalSet::normalize(raw)
    }

    /// Distinct points of the set inside the open window `(a, b)`.
    pub fn count_in_window(&self, a: &Time, b: &Time) -> PointCount {
        let mut singles = 0;
        for iv in &self.intervals {
            if iv.is_point() {
                if iv.lo > *a && iv.lo < *b {
                    singles += 1;
                }
            } else if iv.lo.max(*a) < iv.hi.min(*b) {
                return PointCount::Infinite;
            }
        }
        PointCount::Finite(singles)
    }

    /// All interval endpoints, sorted and deduplicated.
    pub fn endpoints(&self) -> Vec<Time> {
        let mut pts: Vec<Time> = self.intervals.iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
        pts.dedup();
        pts
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.intervals.iter().map(|iv| iv.to_string()).collect();
        write!(f, "{}", parts.join(" u "))
    }
}

/// Monadic predicates over the bounded domain `[0, domain_end]`. Every
/// predicate is false outside the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signal {
    domain_end: Time,
    predicates: BTreeMap<String, IntervalSet>,
}

impl Signal {
    pub fn new(
        domain_end: Time,
        predicates: BTreeMap<String, IntervalSet>,
    ) -> Result<Self, SignalError> {
        if domain_end <= Time::zero() {
            return Err(SignalError::BadDomain(format_time(&domain_end)));
        }
        let domain = Interval::closed(Time::zero(), domain_end);
        for (name, set) in &predicates {
            if !set.is_subset(&IntervalSet::single(domain.clone())) {
                return Err(SignalError::OutOfDomain {
                    pred: name.clone(),
                    domain_end: format_time(&domain_end),
                });
            }
        }
        Ok(Signal {
            domain_end,
            predicates,
        })
    }

    pub fn domain_end(&self) -> Time {
        self.domain_end
    }

    pub fn domain(&self) -> Interval {
        Interval::closed(Time::zero(), self.domain_end)
    }

    pub fn predicates(&self) -> &BTreeMap<String, IntervalSet> {
        &self.predicates
    }

    pub fn predicate(&self, name: &str) -> Result<&IntervalSet, SignalError> {
        self.predicates
            .get(name)
            .ok_or_else(|| SignalError::UnknownPredicate(name.to_string()))
    }

    pub fn holds_at(&self, pred: &str, t: &Time) -> Result<bool, SignalError> {
        Ok(self.predicate(pred)?.contains(t))
    }

    /// `0`, the domain end and every endpoint of every predicate.
    pub fn breakpoints(&self) -> Vec<Time> {
        let mut pts = vec![Time::zero(), self.domain_end];
        for set in self.predicates.values() {
            pts.extend(set.endpoints());
        }
        pts.sort();
        pts.dedup();
        pts
    }

    pub fn from_json(text: &str) -> Result<Self, SignalError> {
        let raw: SignalJson = serde_json::from_str(text)?;
        raw.into_signal()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(SignalJson::from_signal(self)).expect("signal serializes")
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct SignalJson {
    domain_end: String,
    predicates: BTreeMap<String, Vec<[String; 4]>>,
}

impl SignalJson {
    fn from_signal(s: &Signal) -> Self {
        let predicates = s
            .predicates
            .iter()
            .map(|(name, set)| {
                let ivs = set
                    .intervals()
                    .iter()
                    .map(|iv| {
                        [
                            if iv.lo_closed { "[" } else { "(" }.to_string(),
                            format_time(&iv.lo),
                            format_time(&iv.hi),
                            if iv.hi_closed { "]" } else { ")" }.to_string(),
                        ]
                    })
                    .collect();
                (name.clone(), ivs)
            })
            .collect();
        SignalJson {
            domain_end: format_time(&s.domain_end),
            predicates,
        }
    }

    fn into_signal(self) -> Result<Signal, SignalError> {
        let domain_end = parse_time(&self.domain_end)?;
        let mut predicates = BTreeMap::new();
        for (name, ivs) in self.predicates {
            let mut raw = Vec::with_capacity(ivs.len());
            for [lb, lo, hi, rb] in ivs {
                let lo_closed = match lb.as_str() {
                    "[" => true,
                    "(" => false,
                    _ => return Err(SignalError::BadBracket(lb)),
                };
                let hi_closed = match rb.as_str() {
                    "]" => true,
                    ")" => false,
                    _ => return Err(SignalError::BadBracket(rb)),
                };
                let (lo_t, hi_t) = (parse_time(&lo)?, parse_time(&hi)?);
                let iv = Interval::new(lo_t, hi_t, lo_closed, hi_closed)
                    .ok_or_else(|| SignalError::EmptyInterval(format!("{lb}{lo}, {hi}{rb}")))?;
                raw.push(iv);
            }
            predicates.insert(name, IntervalSet::normalize(raw));
        }
        Signal::new(domain_end, predicates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Time {
        Time::new(n, d)
    }
    fn i(n: i64) -> Time {
        Time::from_integer(n)
    }

    #[test]
    fn adjacency_merges() {
        let set = IntervalSet::normalize(vec![Interval::open(i(0), i(1)), Interval::closed(i(1), i(2))]);
        assert_eq!(set.intervals(), &[Interval::new(i(0), i(2), false, true).unwrap()]);
    }

    #[test]
    fn singleton_fuses_with_open_neighbour() {
        let set = IntervalSet::normalize(vec![Interval::point(i(1)), Interval::open(i(1), i(2))]);
        assert_eq!(set.intervals(), &[Interval::new(i(1), i(2), true, false).unwrap()]);
    }

    #[test]
    fn open_ends_do_not_merge() {
        let set = IntervalSet::normalize(vec![Interval::open(i(0), i(1)), Interval::open(i(1), i(2))]);
        assert_eq!(set.intervals().len(), 2);
    }

    #[test]
    fn holds_at_endpoints() {
        let mut preds = BTreeMap::new();
        preds.insert(
            "P".to_string(),
            IntervalSet::single(Interval::new(r(1, 2), r(3, 2), false, true).unwrap()),
        );
        let s = Signal::new(i(4), preds).unwrap();
        assert!(s.holds_at("P", &r(3, 2)).unwrap());
        assert!(!s.holds_at("P", &r(1, 2)).unwrap());
        assert!(!s.holds_at("P", &i(7)).unwrap());
        assert!(matches!(s.holds_at("Q", &i(1)), Err(SignalError::UnknownPredicate(_))));
        assert_eq!(s.breakpoints(), vec![i(0), r(1, 2), r(3, 2), i(4)]);
    }

    #[test]
    fn breakpoints_of_empty_signal() {
        let s = Signal::new(i(1), BTreeMap::new()).unwrap();
        assert_eq!(s.breakpoints(), vec![i(0), i(1)]);
    }

    #[test]
    fn shift_examples() {
        let set = IntervalSet::single(Interval::open(i(0), i(1)));
        assert_eq!(set.shift(1), IntervalSet::single(Interval::open(i(1), i(2))));
        assert_eq!(IntervalSet::empty().shift(-1), IntervalSet::empty());
    }

    #[test]
    fn window_counts() {
        let pts = IntervalSet::normalize(vec![Interval::point(i(1)), Interval::point(r(3, 2))]);
        assert_eq!(pts.count_in_window(&r(1, 2), &i(2)), PointCount::Finite(2));
        let unit = IntervalSet::single(Interval::open(i(0), i(1)));
        assert_eq!(unit.count_in_window(&r(1, 2), &r(3, 2)), PointCount::Infinite);
        let one = IntervalSet::single(Interval::point(i(1)));
        assert_eq!(one.count_in_window(&i(1), &i(2)), PointCount::Finite(0));
    }

    #[test]
    fn complement_and_difference() {
        let span = Interval::closed(i(0), i(4));
        let set = IntervalSet::normalize(vec![
            Interval::new(i(0), i(1), true, false).unwrap(),
            Interval::point(i(2)),
        ]);
        let comp = set.complement_within(&span);
        assert_eq!(
            comp.intervals(),
            &[
                Interval::new(i(1), i(2), true, false).unwrap(),
                Interval::new(i(2), i(4), false, true).unwrap()
            ]
        );
        assert!(set.intersect(&comp).is_empty());
        assert_eq!(set.union(&comp), IntervalSet::single(span));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"domain_end": "4", "predicates": {"P": [["(", "1/2", "3/2", "]"]], "Q": [["[", "1", "1", "]"]]}}"#;
        let s = Signal::from_json(text).unwrap();
        assert!(s.holds_at("Q", &i(1)).unwrap());
        assert_eq!(Signal::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn json_errors() {
        assert!(matches!(
            Signal::from_json(r#"{"domain_end": "4", "predicates": {"P": [["<", "0", "1", "]"]]}}"#),
            Err(SignalError::BadBracket(_))
        ));
        assert!(matches!(
            Signal::from_json(r#"{"domain_end": "4", "predicates": {"P": [["(", "1", "1", "]"]]}}"#),
            Err(SignalError::EmptyInterval(_))
        ));
        assert!(matches!(
            Signal::from_json(r#"{"domain_end": "4", "predicates": {"P": [["(", "3", "5", "]"]]}}"#),
            Err(SignalError::OutOfDomain { .. })
        ));
        assert!(matches!(parse_time("1/0"), Err(SignalError::BadTime(_))));
    }

    #[test]
    fn time_text() {
        assert_eq!(parse_time("-3/6").unwrap(), r(-1, 2));
        assert_eq!(format_time(&r(-1, 2)), "-1/2");
        assert_eq!(format_time(&i(4)), "4");
    }
}
