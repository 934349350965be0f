//! From an `∃x̄ ∀y. matrix` formula to a disjunction of simplified forms.
//!
//! Every bound variable is read as ranging over `(z, z+1)`. The pipeline
//! splits on the weak order of the witnesses ([`order_split`]), then on the
//! truth values of the predicates at `z` and at each witness
//! ([`relativize`]). What is left of the matrix in each region of the chain
//! is a boolean combination of predicates at `y`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{Formula, Prop, SimplifiedForm, Term};

pub const Z: &str = "z";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("not of the form exists* forall y. matrix: {msg} at `{node}`")]
    Shape { node: String, msg: String },
}

fn shape<T>(node: &Formula, msg: &str) -> Result<T, NormalizeError> {
    Err(NormalizeError::Shape {
        node: node.to_string(),
        msg: msg.into(),
    })
}

/// A validated `∃x_1 … ∃x_n ∀y. matrix` with free variable `z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HodkinsonForm {
    pub xs: Vec<String>,
    pub y: String,
    pub matrix: Formula,
}

impl HodkinsonForm {
    pub fn n(&self) -> usize {
        self.xs.len()
    }

    /// The formula itself.
    pub fn to_formula(&self) -> Formula {
        let mut f = Formula::forall(self.y.clone(), self.matrix.clone());
        for x in self.xs.iter().rev() {
            f = Formula::exists(x.clone(), f);
        }
        f
    }

    /// The formula with every quantifier restricted to `(z, z+1)`.
    pub fn relativized(&self) -> Formula {
        let inside = |v: &str| Formula::and(Formula::lt(Term::var(Z), Term::var(v)), Formula::lt(Term::var(v), Term::plus(Z, 1)));
        let mut f = Formula::forall(self.y.clone(), Formula::implies(inside(&self.y), self.matrix.clone()));
        for x in self.xs.iter().rev() {
            f = Formula::exists(x.clone(), Formula::and(inside(x), f));
        }
        f
    }
}

pub fn validate_hodkinson(f: &Formula) -> Result<HodkinsonForm, NormalizeError> {
    let mut xs = Vec::new();
    let mut cur = f;
    while let Formula::Exists(x, body) = cur {
        xs.push(x.clone());
        cur = body;
    }
    let Formula::Forall(y, matrix) = cur else {
        return shape(cur, "expected a universal quantifier after the existential block");
    };
    let mut names: BTreeSet<&str> = xs.iter().map(String::as_str).collect();
    if names.len() != xs.len() || names.contains(y.as_str()) {
        return shape(f, "bound variables must be distinct");
    }
    if names.contains(Z) || y == Z {
        return shape(f, "`z` is the free variable and cannot be bound");
    }
    names.insert(y);
    names.insert(Z);
    check_matrix(matrix, &names)?;
    Ok(HodkinsonForm {
        xs,
        y: y.clone(),
        matrix: (**matrix).clone(),
    })
}

fn check_matrix(f: &Formula, names: &BTreeSet<&str>) -> Result<(), NormalizeError> {
    let term_ok = |t: &Term, offset_ok: bool| -> Result<(), NormalizeError> {
        if !names.contains(t.var.as_str()) {
            return shape(f, "unknown variable");
        }
        match t.offset {
            0 => Ok(()),
            1 if offset_ok && t.var == Z => Ok(()),
            _ => shape(f, "+1 may only appear as z+1 in an order atom"),
        }
    };
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Pred(_, t) => term_ok(t, false),
        Formula::Less(a, b) | Formula::Equal(a, b) => {
            term_ok(a, true)?;
            term_ok(b, true)
        }
        Formula::Not(a) => check_matrix(a, names),
        Formula::And(a, b) | Formula::Or(a, b) => {
            check_matrix(a, names)?;
            check_matrix(b, names)
        }
        Formula::Exists(..) | Formula::Forall(..) => shape(f, "matrix must be quantifier-free"),
        Formula::MetricExists { .. } | Formula::Plus1(..) => shape(f, "matrix must be first-order"),
    }
}

/// A weak order of the witnesses: `rank[i]` is the chain position (1-based)
/// of `xs[i]`, and positions `1..=k` are all used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedForm {
    pub form: HodkinsonForm,
    pub k: usize,
    pub rank: Vec<usize>,
}

/// One form per weak order of the witnesses, in lexicographic order of the
/// rank vectors.
pub fn order_split(h: &HodkinsonForm) -> Vec<OrderedForm> {
    let n = h.n();
    let mut out = Vec::new();
    let mut rank = vec![1; n];
    loop {
        let used: BTreeSet<usize> = rank.iter().copied().collect();
        let k = used.len();
        if used.iter().copied().eq(1..=k) {
            out.push(OrderedForm {
                form: h.clone(),
                k,
                rank: rank.clone(),
            });
        }
        // odometer over {1..n}^n
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if rank[i] < n {
                rank[i] += 1;
                break;
            }
            rank[i] = 1;
        }
    }
}

/// One case of the split on predicate values: `z_values` fixes `P(z)`; the
/// rest is the simplified form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub z_values: BTreeMap<String, bool>,
    pub form: SimplifiedForm,
}

impl Branch {
    pub fn to_fo(&self) -> Formula {
        let lits = self.z_values.iter().map(|(p, v)| {
            let atom = Formula::pred(p.clone(), Term::var(Z));
            if *v { atom } else { Formula::not(atom) }
        });
        Formula::conj(lits.chain(std::iter::once(simplified_to_fo(&self.form))))
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(branch (")?;
        for (i, (p, v)) in self.z_values.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if *v {
                write!(f, "{p}")?;
            } else {
                write!(f, "!{p}")?;
            }
        }
        write!(f, ") {})", self.form)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Point {
    Z,
    /// Chain position, 1-based.
    X(usize),
}

/// Splits on the truth values of every predicate occurring at `z` or at a
/// witness, resolving order atoms region by region. Branches in which some
/// region constraint is unsatisfiable are dropped.
pub fn relativize(o: &OrderedForm) -> Vec<Branch> {
    let h = &o.form;
    let point_of = |v: &str| -> Option<Point> {
        if v == Z {
            return Some(Point::Z);
        }
        h.xs.iter().position(|x| x == v).map(|i| Point::X(o.rank[i]))
    };
    let mut keys = BTreeSet::new();
    collect_keys(&h.matrix, &h.y, &point_of, &mut keys);
    let keys: Vec<(String, Point)> = keys.into_iter().collect();

    let regions = 2 * o.k + 1;
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << keys.len()) {
        let value: BTreeMap<&(String, Point), bool> = keys.iter().enumerate().map(|(i, key)| (key, mask >> i & 1 == 1)).collect();
        let lookup = |p: &str, at: Point| value[&(p.to_string(), at)];
        let mut phis = Vec::with_capacity(regions);
        for region in 1..=regions {
            let pos = |t: &Term| -> usize {
                if t.var == h.y {
                    region
                } else if t.var == Z {
                    if t.offset == 1 { 2 * o.k + 2 } else { 0 }
                } else {
                    let i = h.xs.iter().position(|x| *x == t.var).expect("validated");
                    2 * o.rank[i]
                }
            };
            let mut phi = resolve(&h.matrix, &h.y, &pos, &point_of, &lookup);
            if region % 2 == 0 {
                let c = region / 2;
                for (p, at) in &keys {
                    if *at == Point::X(c) {
                        let lit = if lookup(p, *at) { Prop::atom(p.clone()) } else { Prop::not(Prop::atom(p.clone())) };
                        phi = simplify(Prop::and(phi, lit));
                    }
                }
            }
            phis.push(phi);
        }
        if phis.iter().any(|p| !p.is_satisfiable()) {
            continue;
        }
        let z_values = keys.iter().filter(|(_, at)| *at == Point::Z).map(|(p, at)| (p.clone(), lookup(p, *at))).collect();
        out.push(Branch {
            z_values,
            form: SimplifiedForm::new(o.k, phis).expect("2k+1 regions"),
        });
    }
    out
}

/// All branches of all orderings.
pub fn normalize(h: &HodkinsonForm) -> Vec<Branch> {
    order_split(h).iter().flat_map(relativize).collect()
}

/// The disjunction of the branches as one first-order formula in `z`.
pub fn branches_to_fo(branches: &[Branch]) -> Formula {
    Formula::disj(branches.iter().map(Branch::to_fo))
}

fn collect_keys(f: &Formula, y: &str, point_of: &dyn Fn(&str) -> Option<Point>, out: &mut BTreeSet<(String, Point)>) {
    match f {
        Formula::Pred(p, t) if t.var != y => {
            out.insert((p.clone(), point_of(&t.var).expect("validated")));
        }
        Formula::Not(a) => collect_keys(a, y, point_of, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect_keys(a, y, point_of, out);
            collect_keys(b, y, point_of, out);
        }
        _ => {}
    }
}

fn resolve(
    f: &Formula,
    y: &str,
    pos: &dyn Fn(&Term) -> usize,
    point_of: &dyn Fn(&str) -> Option<Point>,
    lookup: &dyn Fn(&str, Point) -> bool,
) -> Prop {
    let cst = |b: bool| if b { Prop::True } else { Prop::False };
    match f {
        Formula::True => Prop::True,
        Formula::False => Prop::False,
        Formula::Pred(p, t) if t.var == y => Prop::atom(p.clone()),
        Formula::Pred(p, t) => cst(lookup(p, point_of(&t.var).expect("validated"))),
        Formula::Less(a, b) => cst(pos(a) < pos(b)),
        Formula::Equal(a, b) => cst(pos(a) == pos(b)),
        Formula::Not(a) => simplify(Prop::not(resolve(a, y, pos, point_of, lookup))),
        Formula::And(a, b) => simplify(Prop::and(resolve(a, y, pos, point_of, lookup), resolve(b, y, pos, point_of, lookup))),
        Formula::Or(a, b) => simplify(Prop::or(resolve(a, y, pos, point_of, lookup), resolve(b, y, pos, point_of, lookup))),
        _ => unreachable!("matrix validated quantifier-free"),
    }
}

/// One step of constant folding at the root.
fn simplify(p: Prop) -> Prop {
    match p {
        Prop::Not(a) => match *a {
            Prop::True => Prop::False,
            Prop::False => Prop::True,
            Prop::Not(b) => *b,
            a => Prop::not(a),
        },
        Prop::And(a, b) => match (*a, *b) {
            (Prop::False, _) | (_, Prop::False) => Prop::False,
            (Prop::True, x) | (x, Prop::True) => x,
            (a, b) => Prop::and(a, b),
        },
        Prop::Or(a, b) => match (*a, *b) {
            (Prop::True, _) | (_, Prop::True) => Prop::True,
            (Prop::False, x) | (x, Prop::False) => x,
            (a, b) => Prop::or(a, b),
        },
        p => p,
    }
}

/// Chain `z < x_1 < … < x_n < z'` plus one relativized universal per region.
/// `upper` is the term standing for the right end of the unit interval.
pub(crate) fn chain_formula(sf: &SimplifiedForm, upper: &Term) -> Formula {
    let n = sf.n();
    let xname = |j: usize| format!("x{j}");
    let point = |j: usize| -> Term {
        if j == 0 {
            Term::var(Z)
        } else if j == n + 1 {
            upper.clone()
        } else {
            Term::var(xname(j))
        }
    };
    let mut parts: Vec<Formula> = (0..=n).map(|j| Formula::lt(point(j), point(j + 1))).collect();
    if n == 0 {
        parts.clear();
    }
    let y = Term::var("y");
    for i in 1..=2 * n + 1 {
        let guard = if i % 2 == 1 {
            let j = i / 2;
            Formula::and(Formula::lt(point(j), y.clone()), Formula::lt(y.clone(), point(j + 1)))
        } else {
            Formula::eq(y.clone(), point(i / 2))
        };
        parts.push(Formula::forall("y", Formula::implies(guard, sf.phi(i).at(&y))));
    }
    let mut f = Formula::conj(parts);
    for j in (1..=n).rev() {
        f = Formula::exists(xname(j), f);
    }
    crate::syntax::freshen(&f)
}

/// The first-order reading of a simplified form, with free variable `z`.
pub fn simplified_to_fo(sf: &SimplifiedForm) -> Formula {
    chain_formula(sf, &Term::plus(Z, 1))
}
