//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines come out in order
//! and unbuffered. The process fails if any criterion that is expected to
//! hold does not.

use std::time::{Duration, Instant};

use mtlc::harness::{
    LimitTarget, TrialConfig, TrialReport, check_grid_robustness, check_lemma, check_lemma_with, check_limit_closure,
    check_mtlc, check_mtlc_with, check_normalize, gen_formula, gen_hodkinson, gen_mtlc_full, gen_simplified, trial_rng,
};
use mtlc::mtlc::CountWindow;
use mtlc::normalize::{HodkinsonForm, Z, normalize, order_split, simplified_to_fo};
use mtlc::oracle::{Valuation, eval_fo, eval_q2mlo};
use mtlc::signal::{Signal, Time};
use mtlc::syntax::{Dialect, Formula, alpha_eq, check_q2mlo, freshen, parse, parse_simplified};
use mtlc::translate::{LemmaVariant, build_theta1, build_theta2, lemma_translate, lemma_translate_with, translate_branches};

// pinned budgets
const LEMMA_TRIALS: usize = 10_000;
const LEMMA_BUDGET: Duration = Duration::from_secs(300);
const MUTATION_TRIALS: usize = 1_000;
const NORMALIZE_TRIALS: usize = 5_000;
const MTLC_TRIALS: usize = 1_000;
const GRID_TRIALS: usize = 1_000;
const LIMIT_TRIALS: usize = 500;
const ROUND_TRIPS: usize = 1_000;
const Q2_CORPUS: usize = 500;

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn line(&mut self, name: &'static str, ok: bool, detail: impl AsRef<str>) {
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failed.push(name);
        }
    }
}

fn cfg(trials: usize, max_n: usize) -> TrialConfig {
    TrialConfig {
        trials,
        max_n,
        ..TrialConfig::default()
    }
}

fn summary(r: &TrialReport) -> String {
    format!("{} trials, {} failures, lhs true {}, {} ms", r.trials, r.failures.len(), r.lhs_true, r.elapsed_ms)
}

fn first_failure(r: &TrialReport) -> String {
    r.failures.first().map(|f| format!("; first: trial {} z={} {}", f.trial, f.z, f.formula)).unwrap_or_default()
}

fn lemma(t: &mut Tally) {
    let start = Instant::now();
    let r = check_lemma(&cfg(LEMMA_TRIALS, 3)).unwrap();
    let took = start.elapsed();
    t.line(
        "lemma equivalence",
        r.passed() && took <= LEMMA_BUDGET,
        format!("{}{}; wall {:.1}s of {}s", summary(&r), first_failure(&r), took.as_secs_f64(), LEMMA_BUDGET.as_secs()),
    );
    let m = check_lemma_with(&cfg(MUTATION_TRIALS, 3), LemmaVariant::DropTheta2).unwrap();
    t.line("lemma mutation without end check is caught", !m.passed(), summary(&m));
}

fn normalizer(t: &mut Tally) {
    let r = check_normalize(&cfg(NORMALIZE_TRIALS, 2)).unwrap();
    t.line("normalizer equivalence", r.passed(), format!("{}{}", summary(&r), first_failure(&r)));
}

fn mtlc(t: &mut Tally) {
    let r = check_mtlc(&cfg(MTLC_TRIALS, 2)).unwrap();
    t.line("counting fragment translation", r.passed(), format!("{}{}", summary(&r), first_failure(&r)));
    let m = check_mtlc_with(&cfg(MTLC_TRIALS, 2), CountWindow::Closed).unwrap();
    t.line("closed counting window mutation is caught", !m.passed(), summary(&m));
}

fn grid(t: &mut Tally) {
    let r = check_grid_robustness(&cfg(GRID_TRIALS, 2), 1).unwrap();
    t.line("grid refinement changes no verdict", r.passed(), format!("{}{}", summary(&r), first_failure(&r)));
}

fn prefix_index(label: &str) -> Option<usize> {
    label.strip_prefix("(prefix ")?.split_whitespace().next()?.parse().ok()
}

fn limit(t: &mut Tally) {
    let same = check_limit_closure(&cfg(LIMIT_TRIALS, 3), LimitTarget::SamePrefix).unwrap();
    // Known to fail: an even prefix ends on a singleton region and can hold on
    // the whole last gap yet fail at z+1. Print the verdict as is, then check
    // that the failures are exactly of that kind and that the corrected
    // property holds.
    println!(
        "{} prefix limit closure (known unattainable for even prefixes): {}{}",
        if same.passed() { "PASS" } else { "FAIL" },
        summary(&same),
        first_failure(&same)
    );
    let idx: Vec<Option<usize>> = same.failures.iter().map(|f| prefix_index(&f.formula)).collect();
    let all_even = idx.iter().all(|i| matches!(i, Some(r) if r % 2 == 0));
    let errors = same.failures.iter().filter(|f| f.error.is_some()).count();
    t.line(
        "limit closure violations only at even prefixes",
        all_even && errors == 0,
        format!("{} violations, prefixes {:?}, {} evaluation errors", idx.len(), idx, errors),
    );
    let closed = check_limit_closure(&cfg(LIMIT_TRIALS, 3), LimitTarget::ClosedPrefix).unwrap();
    t.line("corrected limit closure", closed.passed(), format!("{}{}", summary(&closed), first_failure(&closed)));
}

fn structural(t: &mut Tally) {
    let c = cfg(0, 3);
    let mut bad = Vec::new();
    for i in 0..Q2_CORPUS {
        let mut rng = trial_rng(7, i);
        let sfs: Vec<_> = (0..1 + i % 3).map(|_| gen_simplified(&mut rng, &c)).collect();
        let h = gen_hodkinson(&mut rng, &cfg(0, 2));
        for (k, f) in [
            lemma_translate(&sfs),
            lemma_translate_with(&sfs, LemmaVariant::DropTheta2),
            translate_branches(&normalize(&h), LemmaVariant::Full),
        ]
        .into_iter()
        .enumerate()
        {
            if !check_q2mlo(&f).is_ok() {
                bad.push((i, k));
            }
        }
    }
    t.line("translator outputs are in the two-variable metric fragment", bad.is_empty(), format!("{} formulas, bad {:?}", 3 * Q2_CORPUS, bad));

    let counts: Vec<usize> = (1..=3)
        .map(|n| {
            let h = HodkinsonForm {
                xs: (1..=n).map(|i| format!("x{i}")).collect(),
                y: "y".into(),
                matrix: Formula::True,
            };
            order_split(&h).len()
        })
        .collect();
    t.line("weak orders of 1, 2, 3 witnesses", counts == [1, 3, 13], format!("{counts:?}"));

    let sf = parse_simplified("(simplified 1 ((atom P) (not (atom P)) (true)))").unwrap();
    let psi = simplified_to_fo(&sf);
    let full = lemma_translate(std::slice::from_ref(&sf));
    let at = |var: &str, x: i64| -> Valuation { [(var.to_string(), Time::from_integer(x))].into() };
    let sig = |p: &str| {
        Signal::from_json(&format!(r#"{{"domain_end": "3", "predicates": {{"P": [["(", {p}, ")"]]}}}}"#)).unwrap()
    };
    let a = sig(r#""0", "1/2""#);
    let got_a = (eval_fo(&psi, &a, &at(Z, 0)).unwrap(), eval_q2mlo(&full, &a, &at(Z, 0)).unwrap());
    t.line("worked case with a boundary witness", got_a == (true, true), format!("{got_a:?}"));
    let b = sig(r#""0", "1""#);
    let got_b = (
        eval_fo(&psi, &b, &at(Z, 0)).unwrap(),
        eval_q2mlo(&full, &b, &at(Z, 0)).unwrap(),
        eval_q2mlo(&build_theta1(&sf), &b, &at(Z, 0)).unwrap(),
        eval_q2mlo(&build_theta2(&sf), &b, &at("w", 1)).unwrap(),
    );
    t.line("worked case decided by the end check", got_b == (false, false, true, false), format!("{got_b:?}"));
}

fn round_trip(t: &mut Tally) {
    let c = cfg(0, 3);
    let alphabet = c.alphabet();
    let vars: Vec<String> = ["z", "a", "b"].iter().map(|s| s.to_string()).collect();
    let mut bad: Vec<(&str, usize)> = Vec::new();
    for i in 0..ROUND_TRIPS {
        let mut rng = trial_rng(11, i);
        let fo = gen_formula(&mut rng, &alphabet, &vars, false, 4);
        let q2 = freshen(&gen_formula(&mut rng, &alphabet, &vars, true, 4));
        let m = gen_mtlc_full(&mut rng, &alphabet, 4, 3);
        let sf = gen_simplified(&mut rng, &c);
        let formula_ok = |f: &Formula, d: Dialect| match parse(&f.to_string(), d) {
            Ok(mtlc::syntax::Ast::Fo(g)) | Ok(mtlc::syntax::Ast::Q2(g)) => alpha_eq(f, &g),
            _ => false,
        };
        if !formula_ok(&fo, Dialect::Fo) {
            bad.push(("fo", i));
        }
        if !formula_ok(&q2, Dialect::Q2mlo) {
            bad.push(("q2", i));
        }
        if !matches!(parse(&m.to_string(), Dialect::Mtlc), Ok(mtlc::syntax::Ast::Mtlc(g)) if g == m) {
            bad.push(("mtlc", i));
        }
        if !matches!(parse(&sf.to_string(), Dialect::Simplified), Ok(mtlc::syntax::Ast::Simplified(g)) if g == sf) {
            bad.push(("simplified", i));
        }
    }
    bad.truncate(10);
    t.line("print then parse is the identity", bad.is_empty(), format!("{ROUND_TRIPS} per dialect, first bad {bad:?}"));
}

fn main() {
    let mut t = Tally { failed: Vec::new() };
    structural(&mut t);
    round_trip(&mut t);
    normalizer(&mut t);
    mtlc(&mut t);
    grid(&mut t);
    limit(&mut t);
    lemma(&mut t);
    if !t.failed.is_empty() {
        eprintln!("failed: {:?}", t.failed);
        std::process::exit(1);
    }
}
