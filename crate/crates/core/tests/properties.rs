use mtlc::harness::{
    TrialConfig, gen_formula, gen_hodkinson, gen_mtlc, gen_mtlc_full, gen_signal, gen_simplified, gen_z, trial_rng,
};
use mtlc::mtlc::{counting_past_set, counting_set, eval_mtlc_sets, punct_past_set, punct_set};
use mtlc::normalize::{Z, normalize, simplified_to_fo};
use mtlc::oracle::{EvalConfig, Evaluator, Valuation, desugar, eval_fo, eval_q2mlo, fo_sat_set};
use mtlc::signal::{Interval, IntervalSet, Signal, Time};
use mtlc::syntax::{Formula, SimplifiedForm, check_q2mlo, freshen, metrics, parse_simplified};
use mtlc::translate::{
    LemmaVariant, build_theta1, build_theta2, lemma_translate, mtlc_to_fo, mtlc_to_q2mlo, psi_between, translate_branches,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn t(n: i64, d: i64) -> Time {
    Time::new(n, d)
}

fn raw_interval() -> impl Strategy<Value = Interval> {
    (0i64..16, 0i64..8, prop::sample::select(vec![1i64, 2, 4]), any::<bool>(), any::<bool>()).prop_map(|(a, len, den, lc, hc)| {
        let lo = t(a, den);
        let hi = t(a + len, den);
        Interval::new(lo, hi, lc || len == 0, hc || len == 0).expect("nonempty by construction")
    })
}

fn interval_set() -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec(raw_interval(), 0..6).prop_map(IntervalSet::normalize)
}

fn probes(sets: &[&IntervalSet]) -> Vec<Time> {
    let mut pts: Vec<Time> = vec![t(-1, 1), t(100, 1)];
    for s in sets {
        pts.extend(s.endpoints());
    }
    pts.sort();
    pts.dedup();
    let mids: Vec<Time> = pts.windows(2).map(|w| (w[0] + w[1]) / 2).collect();
    pts.extend(mids);
    pts
}

fn span(d: i64) -> Interval {
    Interval::closed(t(0, 1), t(d, 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_is_idempotent_and_order_free(mut raw in prop::collection::vec(raw_interval(), 0..8), seed in any::<u64>()) {
        let once = IntervalSet::normalize(raw.clone());
        prop_assert_eq!(IntervalSet::normalize(once.intervals().to_vec()), once.clone());
        let mut rng = trial_rng(seed, 0);
        raw.shuffle(&mut rng);
        prop_assert_eq!(IntervalSet::normalize(raw.clone()), once.clone());
        let as_set: Vec<IntervalSet> = raw.iter().map(|iv| IntervalSet::single(iv.clone())).collect();
        for p in probes(&[&once]) {
            let direct = raw.iter().any(|iv| iv.contains(&p));
            prop_assert_eq!(once.contains(&p), direct);
            prop_assert_eq!(as_set.iter().any(|s| s.contains(&p)), direct);
        }
    }

    #[test]
    fn shifts_round_trip(xs in interval_set(), k in -5i64..5, num in -7i64..7, den in 1i64..5) {
        prop_assert_eq!(xs.shift(k).shift(-k), xs.clone());
        let d = t(num, den);
        prop_assert_eq!(xs.shift_by(d).shift_by(-d), xs.clone());
        prop_assert_eq!(xs.reflect(t(3, 1)).reflect(t(3, 1)), xs);
    }

    #[test]
    fn boolean_algebra(a in interval_set(), b in interval_set(), c in interval_set()) {
        let s = span(8);
        prop_assert_eq!(a.union(&b), b.union(&a));
        prop_assert_eq!(a.intersect(&b), b.intersect(&a));
        prop_assert_eq!(a.intersect(&b.union(&c)), a.intersect(&b).union(&a.intersect(&c)));
        let (a8, b8) = (a.intersect_interval(&s), b.intersect_interval(&s));
        prop_assert_eq!(a8.union(&b8).complement_within(&s), a8.complement_within(&s).intersect(&b8.complement_within(&s)));
        prop_assert_eq!(a8.complement_within(&s).complement_within(&s), a8.clone());
        prop_assert_eq!(a.difference(&b), a.intersect(&b.complement_within(&Interval::closed(t(-100, 1), t(100, 1)))));
        prop_assert!(a.intersect(&b).is_subset(&a));
        prop_assert!(a.is_subset(&a.union(&b)));
    }

    #[test]
    fn counting_is_monotone(a in interval_set(), b in interval_set(), n in 0u32..4) {
        let s = span(6);
        let ab = a.union(&b);
        prop_assert!(counting_set(&a, n + 1, &s).is_subset(&counting_set(&a, n, &s)));
        prop_assert!(counting_set(&a, n, &s).is_subset(&counting_set(&ab, n, &s)));
        prop_assert!(counting_past_set(&a, n, &s).is_subset(&counting_past_set(&ab, n, &s)));
    }

    #[test]
    fn past_operators_mirror_future_ones(a in interval_set(), n in 0u32..4) {
        let d = t(6, 1);
        let s = span(6);
        let m = a.reflect(d);
        prop_assert_eq!(counting_past_set(&a, n, &s), counting_set(&m, n, &s).reflect(d));
        prop_assert_eq!(punct_past_set(&a, &s), punct_set(&m, &s).reflect(d));
    }
}

fn cfg() -> TrialConfig {
    TrialConfig {
        max_n: 2,
        max_breakpoints: 8,
        ..TrialConfig::default()
    }
}

fn vars() -> Vec<String> {
    vec![Z.to_string(), "a".into(), "b".into()]
}

/// Random formulas with unguarded alternation get expensive fast; two
/// nested quantifiers still cover alternation and offsets.
fn small_formula(rng: &mut rand_chacha::ChaCha8Rng, c: &TrialConfig) -> Formula {
    loop {
        let f = close_but_z(gen_formula(rng, &c.alphabet(), &vars(), false, 3));
        if metrics(&f).quantifier_depth <= 2 {
            return f;
        }
    }
}

fn formula_cfg() -> TrialConfig {
    TrialConfig {
        max_breakpoints: 6,
        ..cfg()
    }
}

/// Closes every free variable other than `z` existentially.
fn close_but_z(f: Formula) -> Formula {
    let mut f = f;
    for v in f.free_vars() {
        if v != Z {
            f = Formula::exists(v, f);
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn freshen_is_idempotent_and_sound(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 1);
        let c = formula_cfg();
        let f = small_formula(&mut rng, &c);
        let g = freshen(&f);
        prop_assert_eq!(freshen(&g), g.clone());
        let s = gen_signal(&mut rng, &c);
        let z = gen_z(&mut rng, &s);
        let v: Valuation = [(Z.to_string(), z)].into();
        prop_assert_eq!(eval_fo(&f, &s, &v), eval_fo(&g, &s, &v));
    }

    #[test]
    fn sat_set_matches_pointwise_evaluation(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 2);
        let c = formula_cfg();
        let f = freshen(&small_formula(&mut rng, &c));
        let s = gen_signal(&mut rng, &c);
        let set = fo_sat_set(&f, &s).unwrap();
        let mut pts = s.breakpoints();
        pts.push(s.domain_end());
        pts.push(t(0, 1));
        pts.sort();
        pts.dedup();
        let mids: Vec<Time> = pts.windows(2).map(|w| (w[0] + w[1]) / 2).collect();
        pts.extend(mids);
        for p in pts {
            let v: Valuation = [(Z.to_string(), p)].into();
            prop_assert_eq!(set.contains(&p), eval_fo(&f, &s, &v).unwrap(), "{} at {}", f, p);
        }
    }

    #[test]
    fn translator_outputs_are_q2(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 3);
        let c = TrialConfig { max_n: 3, ..cfg() };
        let sf = gen_simplified(&mut rng, &c);
        for f in [lemma_translate(std::slice::from_ref(&sf)), build_theta1(&sf), build_theta2(&sf)] {
            prop_assert!(check_q2mlo(&f).is_ok(), "{}", f);
        }
        let h = gen_hodkinson(&mut rng, &TrialConfig { max_n: 2, ..cfg() });
        let all = translate_branches(&normalize(&h), LemmaVariant::Full);
        prop_assert!(check_q2mlo(&all).is_ok());
        let m = mtlc_to_q2mlo(&gen_mtlc(&mut rng, &c)).unwrap();
        prop_assert!(check_q2mlo(&m).is_ok(), "{}", m);
    }

    #[test]
    fn interval_evaluation_matches_first_order_reading(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 4);
        let c = TrialConfig { max_breakpoints: 6, ..cfg() };
        let f = gen_mtlc_full(&mut rng, &c.alphabet(), 2, 2);
        let s = gen_signal(&mut rng, &c);
        let mine = eval_mtlc_sets(&f, &s).unwrap().root().clone();
        let theirs = fo_sat_set(&mtlc_to_fo(&f), &s).unwrap();
        prop_assert_eq!(mine, theirs, "{}", f);
    }

    #[test]
    fn two_readings_of_the_counting_fragment_agree(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 5);
        let c = cfg();
        let f = gen_mtlc(&mut rng, &c);
        let s = gen_signal(&mut rng, &c);
        let q2 = fo_sat_set(&desugar(&mtlc_to_q2mlo(&f).unwrap()), &s).unwrap();
        prop_assert_eq!(fo_sat_set(&mtlc_to_fo(&f), &s).unwrap(), q2, "{}", f);
    }

    #[test]
    fn prefixes_hold_along_their_own_witnesses(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 6);
        let c = TrialConfig { max_n: 3, ..cfg() };
        let sf = gen_simplified(&mut rng, &c);
        let s = gen_signal(&mut rng, &c);
        let z = gen_z(&mut rng, &s);
        let j = rng_index(seed, 2 * sf.n() + 1);
        let u = z + 1 - t(1, 8);
        prop_assume!(holds(&sf, j, &s, z, u));
        let k = j.div_ceil(2);
        if k < 2 {
            return Ok(());
        }
        let ev = prefix_eval(&sf, j, &s, &[z, u]);
        let wit = ev.witnesses_at(&[z, u]).unwrap().expect("holds, so witnesses exist");
        let mut xs: Vec<Time> = vec![z];
        xs.extend(wit.iter().map(|(_, v)| *v));
        xs.push(u);
        for i in 1..k {
            prop_assert!(holds(&sf, 2 * i, &s, z, xs[i]), "even prefix {} at x_{}", 2 * i, i);
        }
        for i in 0..k {
            let mid = (xs[i] + xs[i + 1]) / 2;
            if 2 * i + 1 <= j {
                prop_assert!(holds(&sf, 2 * i + 1, &s, z, mid), "odd prefix {} inside gap {}", 2 * i + 1, i);
            }
        }
    }

    #[test]
    fn signal_json_round_trips(seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 7);
        let s = gen_signal(&mut rng, &cfg());
        prop_assert_eq!(Signal::from_json(&s.to_json()).unwrap(), s);
    }
}

fn rng_index(seed: u64, n: usize) -> usize {
    use rand::Rng;
    trial_rng(seed, 99).gen_range(1..=n)
}

fn prefix_eval(sf: &SimplifiedForm, i: usize, s: &Signal, at: &[Time]) -> Evaluator {
    let f = psi_between(sf, i, Z, "u");
    let dens: Vec<i64> = at.iter().map(|x| *x.denom()).collect();
    Evaluator::new(&f, s, &[Z.to_string(), "u".to_string()], dens, EvalConfig::default()).unwrap()
}

fn holds(sf: &SimplifiedForm, i: usize, s: &Signal, z: Time, u: Time) -> bool {
    prefix_eval(sf, i, s, &[z, u]).eval_at(&[z, u]).unwrap()
}

/// Instances where the backward conjunct's chain starts at a point `u0`
/// that the forward conjunct covers only with a partial chain, so a full
/// chain from `z` exists only by splicing the two.
#[test]
fn spliced_witness_chains() {
    let forms = [
        "(simplified 1 ((atom P) (atom Q) (atom P)))",
        "(simplified 2 ((true) (atom Q) (true) (atom Q) (true)))",
        "(simplified 2 ((atom P) (atom Q) (atom P) (atom Q) (atom P)))",
        "(simplified 2 ((not (atom Q)) (atom Q) (not (atom Q)) (atom Q) (true)))",
    ];
    let signals = [
        r#"{"P": [["[", "0", "4", "]"]], "Q": [["[", "1/4", "1/4", "]"], ["[", "3/4", "3/4", "]"]]}"#,
        r#"{"P": [["[", "0", "4", "]"]], "Q": [["[", "1/2", "1/2", "]"], ["[", "3/2", "3/2", "]"]]}"#,
        r#"{"P": [["(", "0", "1/2", ")"], ["(", "1/2", "4", "]"]], "Q": [["[", "1/3", "1/3", "]"], ["[", "2/3", "2/3", "]"], ["[", "5/4", "5/4", "]"]]}"#,
        r#"{"P": [["[", "0", "3/4", ")"], ["(", "3/4", "4", "]"]], "Q": [["(", "1/4", "3/4", ")"]]}"#,
    ];
    let zs = ["0", "1/8", "1/4", "1/3", "1/2", "3/4", "1"];
    let mut spliced = 0;
    for text in forms {
        let sf = parse_simplified(text).unwrap();
        let full = 2 * sf.n() + 1;
        let lhs_f = simplified_to_fo(&sf);
        let rhs_f = lemma_translate(std::slice::from_ref(&sf));
        for sig in signals {
            let s = Signal::from_json(&format!(r#"{{"domain_end": "4", "predicates": {sig}}}"#)).unwrap();
            for z in zs {
                let z = mtlc::signal::parse_time(z).unwrap();
                let v: Valuation = [(Z.to_string(), z)].into();
                let lhs = eval_fo(&lhs_f, &s, &v).unwrap();
                assert_eq!(lhs, eval_q2mlo(&rhs_f, &s, &v).unwrap(), "{text} {sig} z={z}");
                if !lhs {
                    continue;
                }
                let end = z + 1;
                let needs_splice = (1..24).map(|k| z + t(k, 24)).any(|u0| {
                    holds(&sf, full, &s, u0, end) && !holds(&sf, full, &s, z, u0) && (1..full).any(|r| holds(&sf, r, &s, z, u0))
                });
                spliced += needs_splice as usize;
            }
        }
    }
    assert!(spliced > 0, "family never needed a spliced chain");
}
