//! Simplified forms to Q2MLO(+1), and the counting fragment of MTL+C to
//! Q2MLO(+1).
//!
//! A simplified form says "there is a chain `z < x_1 < … < x_n < z+1` whose
//! regions satisfy `φ_1 … φ_{2n+1}`". Its only metric content is the distance
//! from `z` to the right end, so the translation replaces that end by a
//! second variable and recovers the distance with two metric quantifiers:
//!
//! * the prefix family `ψ_i(z, u)` says the first `i` regions can be laid out
//!   from `z` up to `u`;
//! * `θ1(z)`: every `u` in `(z, z+1)` is reached by some prefix;
//! * `θ2(w)`: some `u` in `(w-1, w)` starts a complete chain ending at `w`.
//!
//! With `w = z+1` the conjunction is equivalent to the original form.

use thiserror::Error;

use crate::normalize::{Branch, Z, chain_formula};
use crate::syntax::{Direction, Formula, Mtlc, SimplifiedForm, Term, freshen};

/// Name of the second free variable of the two-variable forms.
pub const Z_PRIME: &str = "zp";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("prefix index {i} out of range 1..={max}")]
    IndexOutOfRange { i: usize, max: usize },
    #[error("`{0}` is outside the counting fragment")]
    OutOfFragment(String),
}

/// The form with `z+1` replaced by the variable [`Z_PRIME`].
pub fn build_psi_two_var(sf: &SimplifiedForm) -> Formula {
    chain_formula(sf, &Term::var(Z_PRIME))
}

/// Prefix `i` of the chain, laid out between `lo` and `hi`: `k = ⌈i/2⌉`
/// points `lo = x_0 < x_1 < … < x_k = hi`, and the first `i` regions.
fn prefix(sf: &SimplifiedForm, i: usize, lo: &str, hi: &str) -> Formula {
    let k = i.div_ceil(2);
    let point = |j: usize| -> Term {
        if j == 0 {
            Term::var(lo)
        } else if j == k {
            Term::var(hi)
        } else {
            Term::var(format!("x{j}"))
        }
    };
    let mut parts: Vec<Formula> = (0..k).map(|j| Formula::lt(point(j), point(j + 1))).collect();
    let y = Term::var("y");
    for r in 1..=i {
        let guard = if r % 2 == 1 {
            let j = r / 2;
            Formula::and(Formula::lt(point(j), y.clone()), Formula::lt(y.clone(), point(j + 1)))
        } else {
            Formula::eq(y.clone(), point(r / 2))
        };
        parts.push(Formula::forall("y", Formula::implies(guard, sf.phi(r).at(&y))));
    }
    let mut f = Formula::conj(parts);
    for j in (1..k).rev() {
        f = Formula::exists(format!("x{j}"), f);
    }
    freshen(&f)
}

/// `ψ_i(z, zp)` for `1 <= i <= 2n+1`.
pub fn build_psi_i(sf: &SimplifiedForm, i: usize) -> Result<Formula, TranslateError> {
    let max = 2 * sf.n() + 1;
    if i == 0 || i > max {
        return Err(TranslateError::IndexOutOfRange { i, max });
    }
    Ok(prefix(sf, i, Z, Z_PRIME))
}

/// `ψ_i(lo, hi)` without the range check, for callers that already know `i`.
pub fn psi_between(sf: &SimplifiedForm, i: usize, lo: &str, hi: &str) -> Formula {
    prefix(sf, i, lo, hi)
}

/// `∀u ∈ (z, z+1). ⋁_i ψ_i(z, u)`, as a negated forward metric existential.
pub fn build_theta1(sf: &SimplifiedForm) -> Formula {
    let some_prefix = Formula::disj((1..=2 * sf.n() + 1).map(|i| prefix(sf, i, Z, "u")));
    Formula::not(Formula::metric("u", Z, Direction::Fwd, Formula::not(some_prefix)))
}

/// `∃u ∈ (w-1, w). ψ(u, w)`; free variable `w`.
pub fn build_theta2(sf: &SimplifiedForm) -> Formula {
    Formula::metric("u", "w", Direction::Bwd, prefix(sf, 2 * sf.n() + 1, "u", "w"))
}

/// Which conjuncts [`lemma_translate_with`] emits. Only mutation tests use
/// anything but `Full`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LemmaVariant {
    #[default]
    Full,
    DropTheta2,
}

/// `⋁ ∃w. plus1(z, w) ∧ θ1(z) ∧ θ2(w)` over the given forms; free variable
/// `z`. An empty list gives `false`.
pub fn lemma_translate(sfs: &[SimplifiedForm]) -> Formula {
    lemma_translate_with(sfs, LemmaVariant::Full)
}

pub fn lemma_translate_with(sfs: &[SimplifiedForm], variant: LemmaVariant) -> Formula {
    freshen(&Formula::disj(sfs.iter().map(|sf| {
        let mut parts = vec![Formula::Plus1(Term::var(Z), Term::var("w")), build_theta1(sf)];
        if variant == LemmaVariant::Full {
            parts.push(build_theta2(sf));
        }
        Formula::exists("w", Formula::conj(parts))
    })))
}

/// Translation of a normalizer output: each branch keeps its condition on
/// the predicates at `z` and translates its simplified form.
pub fn translate_branches(branches: &[Branch], variant: LemmaVariant) -> Formula {
    freshen(&Formula::disj(branches.iter().map(|b| {
        let lits = b.z_values.iter().map(|(p, v)| {
            let atom = Formula::pred(p.clone(), Term::var(Z));
            if *v { atom } else { Formula::not(atom) }
        });
        Formula::conj(lits.chain([lemma_translate_with(std::slice::from_ref(&b.form), variant)]))
    })))
}

/// Translates a formula of the counting fragment (atoms, booleans, counting
/// and punctual modalities in both directions) into a Q2MLO(+1) formula with
/// free variable `z`.
pub fn mtlc_to_q2mlo(f: &Mtlc) -> Result<Formula, TranslateError> {
    let mut fresh = 0;
    Ok(freshen(&to_q2(f, Z, &mut fresh)?))
}

fn fresh_name(fresh: &mut usize) -> String {
    *fresh += 1;
    format!("u{fresh}")
}

fn to_q2(f: &Mtlc, at: &str, fresh: &mut usize) -> Result<Formula, TranslateError> {
    Ok(match f {
        Mtlc::True => Formula::True,
        Mtlc::Atom(p) => Formula::pred(p.clone(), Term::var(at)),
        Mtlc::Not(a) => Formula::not(to_q2(a, at, fresh)?),
        Mtlc::And(a, b) => Formula::and(to_q2(a, at, fresh)?, to_q2(b, at, fresh)?),
        Mtlc::Or(a, b) => Formula::or(to_q2(a, at, fresh)?, to_q2(b, at, fresh)?),
        Mtlc::Count(0, _) | Mtlc::CountPast(0, _) => Formula::True,
        Mtlc::Count(n, g) | Mtlc::CountPast(n, g) => {
            let past = matches!(f, Mtlc::CountPast(..));
            // the witness farthest from `at` carries the metric bound; the
            // others sit between it and `at` and need only the order
            let far = fresh_name(fresh);
            let mut body = to_q2(g, &far, fresh)?;
            let mut inner = Vec::new();
            let mut prev = far.clone();
            for _ in 1..*n {
                let u = fresh_name(fresh);
                let between = if past {
                    Formula::and(Formula::lt(Term::var(&prev), Term::var(&u)), Formula::lt(Term::var(&u), Term::var(at)))
                } else {
                    Formula::and(Formula::lt(Term::var(at), Term::var(&u)), Formula::lt(Term::var(&u), Term::var(&prev)))
                };
                inner.push((u.clone(), between, to_q2(g, &u, fresh)?));
                prev = u;
            }
            let mut tail = Formula::True;
            for (u, between, gu) in inner.into_iter().rev() {
                tail = Formula::exists(u, Formula::conj([between, gu, tail]));
            }
            if *n > 1 {
                body = Formula::and(body, tail);
            }
            let dir = if past { Direction::Bwd } else { Direction::Fwd };
            Formula::metric(far, at, dir, body)
        }
        Mtlc::Punct(g) => {
            let w = fresh_name(fresh);
            let gw = to_q2(g, &w, fresh)?;
            Formula::exists(w.clone(), Formula::and(Formula::Plus1(Term::var(at), Term::var(w)), gw))
        }
        Mtlc::PunctPast(g) => {
            let w = fresh_name(fresh);
            let gw = to_q2(g, &w, fresh)?;
            Formula::exists(w.clone(), Formula::and(Formula::Plus1(Term::var(w), Term::var(at)), gw))
        }
        Mtlc::Until { .. } | Mtlc::Since { .. } => return Err(TranslateError::OutOfFragment(f.to_string())),
    })
}

/// First-order reading of any MTL+C formula, with free variable `z`. Bounded
/// modalities become offset comparisons, so the result is in FO(<,+1) but
/// generally not in Q2MLO(+1).
pub fn mtlc_to_fo(f: &Mtlc) -> Formula {
    let mut fresh = 0;
    freshen(&to_fo(f, Z, &mut fresh))
}

fn to_fo(f: &Mtlc, at: &str, fresh: &mut usize) -> Formula {
    let here = Term::var(at);
    match f {
        Mtlc::True => Formula::True,
        Mtlc::Atom(p) => Formula::pred(p.clone(), here),
        Mtlc::Not(a) => Formula::not(to_fo(a, at, fresh)),
        Mtlc::And(a, b) => Formula::and(to_fo(a, at, fresh), to_fo(b, at, fresh)),
        Mtlc::Or(a, b) => Formula::or(to_fo(a, at, fresh), to_fo(b, at, fresh)),
        Mtlc::Count(0, _) | Mtlc::CountPast(0, _) => Formula::True,
        Mtlc::Count(n, g) | Mtlc::CountPast(n, g) => {
            let past = matches!(f, Mtlc::CountPast(..));
            let us: Vec<String> = (0..*n).map(|_| fresh_name(fresh)).collect();
            let mut parts = Vec::new();
            for (i, u) in us.iter().enumerate() {
                let (lo, hi) = if past { (Term::plus(at, -1), here.clone()) } else { (here.clone(), Term::plus(at, 1)) };
                parts.push(Formula::lt(lo, Term::var(u)));
                parts.push(Formula::lt(Term::var(u), hi));
                if i > 0 {
                    parts.push(Formula::lt(Term::var(&us[i - 1]), Term::var(u)));
                }
                parts.push(to_fo(g, u, fresh));
            }
            let mut out = Formula::conj(parts);
            for u in us.into_iter().rev() {
                out = Formula::exists(u, out);
            }
            out
        }
        Mtlc::Punct(g) | Mtlc::PunctPast(g) => {
            let w = fresh_name(fresh);
            let off = if matches!(f, Mtlc::Punct(_)) { 1 } else { -1 };
            Formula::exists(w.clone(), Formula::and(Formula::eq(Term::var(&w), Term::plus(at, off)), to_fo(g, &w, fresh)))
        }
        Mtlc::Until { lhs, rhs, bounds } | Mtlc::Since { lhs, rhs, bounds } => {
            let past = matches!(f, Mtlc::Since { .. });
            let sign = if past { -1 } else { 1 };
            let (w, s) = (fresh_name(fresh), fresh_name(fresh));
            let wt = Term::var(&w);
            // distance condition on w relative to `at`
            let edge = |k: u64, closed: bool, near: bool| -> Formula {
                let mark = Term::plus(at, sign * k as i64);
                // `near` edges bound w from the `at` side
                let (a, b) = if near == !past { (mark, wt.clone()) } else { (wt.clone(), mark) };
                if closed {
                    Formula::or(Formula::lt(a.clone(), b.clone()), Formula::eq(a, b))
                } else {
                    Formula::lt(a, b)
                }
            };
            let mut parts = vec![edge(bounds.lo, bounds.lo_closed, true)];
            if let Some(hi) = bounds.hi {
                parts.push(edge(hi, bounds.hi_closed, false));
            }
            parts.push(to_fo(rhs, &w, fresh));
            let between = if past {
                Formula::and(Formula::lt(wt.clone(), Term::var(&s)), Formula::lt(Term::var(&s), here.clone()))
            } else {
                Formula::and(Formula::lt(here.clone(), Term::var(&s)), Formula::lt(Term::var(&s), wt.clone()))
            };
            parts.push(Formula::forall(s.clone(), Formula::implies(between, to_fo(lhs, &s, fresh))));
            Formula::exists(w, Formula::conj(parts))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::simplified_to_fo;
    use crate::oracle::{eval_fo, eval_q2mlo};
    use crate::signal::{Signal, Time};
    use crate::syntax::{alpha_eq, check_q2mlo, parse_fo, parse_mtlc, parse_q2mlo, parse_simplified};
    use std::collections::BTreeSet;

    fn sf(text: &str) -> SimplifiedForm {
        parse_simplified(text).unwrap()
    }

    fn at_zero() -> crate::oracle::Valuation {
        [(Z.to_string(), Time::from_integer(0))].into()
    }

    fn signal(p: &str, d: &str) -> Signal {
        Signal::from_json(&format!(r#"{{"domain_end": "{d}", "predicates": {{"P": [{p}]}}}}"#)).unwrap()
    }

    #[test]
    fn two_var_form() {
        let f = build_psi_two_var(&sf("(simplified 0 ((atom P)))"));
        let expect = parse_fo("(forall y (or (not (and (lt (var z) (var y)) (lt (var y) (var zp)))) (pred P (var y))))").unwrap();
        assert!(alpha_eq(&f, &expect));
        let s = sf("(simplified 2 ((atom P) (true) (not (atom P)) (atom P) (true)))");
        let two = build_psi_two_var(&s);
        assert_eq!(two.free_vars(), BTreeSet::from([Z.to_string(), Z_PRIME.to_string()]));
        let back = freshen(&two.substitute(Z_PRIME, &Term::plus(Z, 1)));
        assert!(alpha_eq(&back, &simplified_to_fo(&s)));
    }

    #[test]
    fn prefix_members() {
        let s = sf("(simplified 1 ((atom P) (not (atom P)) (true)))");
        let p1 = build_psi_i(&s, 1).unwrap();
        let expect = parse_fo("(and (lt (var z) (var zp)) (forall y (or (not (and (lt (var z) (var y)) (lt (var y) (var zp)))) (pred P (var y)))))").unwrap();
        assert!(alpha_eq(&p1, &expect));
        let p2 = build_psi_i(&s, 2).unwrap();
        let expect = parse_fo(
            "(and (lt (var z) (var zp)) (and (forall y (or (not (and (lt (var z) (var y)) (lt (var y) (var zp)))) (pred P (var y)))) (forall y (or (not (eq (var y) (var zp))) (not (pred P (var y)))))))",
        )
        .unwrap();
        assert!(alpha_eq(&p2, &expect));
        assert!(build_psi_i(&s, 0).is_err());
        assert_eq!(build_psi_i(&s, 4), Err(TranslateError::IndexOutOfRange { i: 4, max: 3 }));
        for i in 1..=3 {
            let f = build_psi_i(&s, i).unwrap();
            assert_eq!(f.free_vars(), BTreeSet::from([Z.to_string(), Z_PRIME.to_string()]));
        }
    }

    #[test]
    fn thetas_are_q2() {
        let s = sf("(simplified 1 ((atom P) (not (atom P)) (true)))");
        for f in [build_theta1(&s), build_theta2(&s), lemma_translate(&[s.clone()])] {
            assert!(check_q2mlo(&f).is_ok(), "{f}");
        }
        let Formula::Not(inner) = build_theta1(&s) else { panic!() };
        let Formula::MetricExists { body, .. } = *inner else { panic!() };
        assert_eq!(body.free_vars(), BTreeSet::from([Z.to_string(), "u".to_string()]));
        let Formula::MetricExists { body, .. } = build_theta2(&s) else { panic!() };
        assert_eq!(body.free_vars(), BTreeSet::from(["u".to_string(), "w".to_string()]));
        assert_eq!(lemma_translate(&[]), Formula::False);
    }

    #[test]
    fn worked_cases() {
        let s = sf("(simplified 1 ((atom P) (not (atom P)) (true)))");
        let psi = simplified_to_fo(&s);
        let full = lemma_translate(&[s.clone()]);
        let v = at_zero();
        // a boundary point of P is the witness
        let a = signal(r#"["(", "0", "1/2", ")"]"#, "3");
        assert!(eval_fo(&psi, &a, &v).unwrap());
        assert!(eval_q2mlo(&full, &a, &v).unwrap());
        // P covers the whole unit interval: no witness; only θ2 notices
        let b = signal(r#"["(", "0", "1", ")"]"#, "3");
        assert!(!eval_fo(&psi, &b, &v).unwrap());
        assert!(!eval_q2mlo(&full, &b, &v).unwrap());
        let w1: crate::oracle::Valuation = [(Z.to_string(), Time::from_integer(0))].into();
        assert!(eval_q2mlo(&build_theta1(&s), &b, &w1).unwrap());
        let w: crate::oracle::Valuation = [("w".to_string(), Time::from_integer(1))].into();
        assert!(!eval_q2mlo(&build_theta2(&s), &b, &w).unwrap());
        assert!(eval_q2mlo(&lemma_translate_with(&[s], LemmaVariant::DropTheta2), &b, &v).unwrap());
    }

    #[test]
    fn counting_translation() {
        let c1 = mtlc_to_q2mlo(&parse_mtlc("(cnt 1 (atom P))").unwrap()).unwrap();
        assert!(alpha_eq(&c1, &parse_q2mlo("(mexists u z fwd (pred P (var u)))").unwrap()), "{c1}");
        assert_eq!(mtlc_to_q2mlo(&parse_mtlc("(cnt 0 (atom P))").unwrap()).unwrap(), Formula::True);
        let f = parse_mtlc("(and (cnt 3 (d1 (atom P))) (cntbar 2 (not (d1bar (atom P)))))").unwrap();
        let q = mtlc_to_q2mlo(&f).unwrap();
        assert!(check_q2mlo(&q).is_ok(), "{q}");
        assert_eq!(q.free_vars(), BTreeSet::from([Z.to_string()]));
        let u = parse_mtlc("(until 0 inf (true) (atom P))").unwrap();
        assert!(matches!(mtlc_to_q2mlo(&u), Err(TranslateError::OutOfFragment(_))));
    }
}
