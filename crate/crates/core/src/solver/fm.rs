//! Fourier–Motzkin elimination over the rationals.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigRational, One, Signed, Zero};

use crate::vcgen::LinTerm;

/// `constant + Σ coeff·var` with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Affine {
    pub coeffs: BTreeMap<String, BigRational>,
    pub constant: BigRational,
}

impl Affine {
    pub fn from_lin(t: &LinTerm) -> Affine {
        Affine {
            coeffs: t
                .terms
                .iter()
                .map(|(v, k)| (v.clone(), BigRational::from_integer(k.clone())))
                .collect(),
            constant: BigRational::from_integer(t.constant.clone()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn scale(&self, k: &BigRational) -> Affine {
        if k.is_zero() {
            return Affine::default();
        }
        Affine {
            coeffs: self
                .coeffs
                .iter()
                .map(|(v, c)| (v.clone(), c * k))
                .collect(),
            constant: &self.constant * k,
        }
    }

    fn add(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (v, c) in &other.coeffs {
            let e = out
                .coeffs
                .entry(v.clone())
                .or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                out.coeffs.remove(v);
            }
        }
        out
    }

    fn sub(&self, other: &Affine) -> Affine {
        self.add(&other.scale(&-BigRational::one()))
    }

    /// Replaces `var` by `e`.
    fn substitute(&self, var: &str, e: &Affine) -> Affine {
        match self.coeffs.get(var) {
            None => self.clone(),
            Some(k) => {
                let mut rest = self.clone();
                rest.coeffs.remove(var);
                rest.add(&e.scale(k))
            }
        }
    }

    /// Value under `w`; unassigned variables count as zero.
    pub fn eval(&self, w: &BTreeMap<String, BigRational>) -> BigRational {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            if let Some(x) = w.get(v) {
                acc += c * x;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rel {
    /// `expr <= 0`
    Le,
    /// `expr = 0`
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Constraint {
    pub expr: Affine,
    pub rel: Rel,
}

impl Constraint {
    pub fn le(t: &LinTerm) -> Constraint {
        Constraint {
            expr: Affine::from_lin(t),
            rel: Rel::Le,
        }
    }

    pub fn eq(t: &LinTerm) -> Constraint {
        Constraint {
            expr: Affine::from_lin(t),
            rel: Rel::Eq,
        }
    }

    pub fn holds(&self, w: &BTreeMap<String, BigRational>) -> bool {
        let v = self.expr.eval(w);
        match self.rel {
            Rel::Le => !v.is_positive(),
            Rel::Eq => v.is_zero(),
        }
    }

    /// Scales an inequality so its leading coefficient has magnitude one,
    /// making equivalent constraints compare equal.
    fn normalized(mut self) -> Constraint {
        if self.rel == Rel::Le {
            if let Some(k) = self.expr.coeffs.values().next() {
                let k = k.abs();
                self.expr = self.expr.scale(&k.recip());
            }
        }
        self
    }

    fn vars(&self) -> impl Iterator<Item = &String> {
        self.expr.coeffs.keys()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FmResult {
    UnsatOverRationals,
    SatOverRationals(BTreeMap<String, BigRational>),
}

enum Step {
    Subst(String, Affine),
    Bounds {
        var: String,
        lower: Vec<Affine>,
        upper: Vec<Affine>,
    },
}

/// Decides rational satisfiability of a conjunction of constraints,
/// returning a checked witness when satisfiable.
pub fn fm_eliminate(input: &[Constraint]) -> FmResult {
    let all_vars: BTreeSet<String> = input.iter().flat_map(|c| c.vars().cloned()).collect();
    let mut cur: Vec<Constraint> = input.to_vec();
    let mut steps = Vec::new();

    // equalities first, by substitution
    while let Some(i) = cur
        .iter()
        .position(|c| c.rel == Rel::Eq && !c.expr.is_constant())
    {
        let c = cur.remove(i);
        let (x, a) = c
            .expr
            .coeffs
            .iter()
            .next()
            .map(|(v, k)| (v.clone(), k.clone()))
            .unwrap();
        let mut rest = c.expr.clone();
        rest.coeffs.remove(&x);
        let e = rest.scale(&(-a.recip()));
        for other in &mut cur {
            other.expr = other.expr.substitute(&x, &e);
        }
        steps.push(Step::Subst(x, e));
    }

    loop {
        let mut kept = Vec::new();
        for c in cur {
            if c.expr.is_constant() {
                if !c.holds(&BTreeMap::new()) {
                    return FmResult::UnsatOverRationals;
                }
            } else if !kept.contains(&c) {
                kept.push(c);
            }
        }
        cur = kept;
        if cur.is_empty() {
            break;
        }
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        for c in &cur {
            for v in c.vars() {
                *counts.entry(v).or_default() += 1;
            }
        }
        let min = counts.values().min().copied().unwrap();
        let x = counts
            .into_iter()
            .find(|(_, n)| *n == min)
            .map(|(v, _)| v.clone())
            .unwrap();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut next = Vec::new();
        for c in cur {
            match c.expr.coeffs.get(&x) {
                None => next.push(c),
                Some(a) => {
                    let mut rest = c.expr.clone();
                    rest.coeffs.remove(&x);
                    let bound = rest.scale(&(-a.recip()));
                    if a.is_positive() {
                        upper.push(bound);
                    } else {
                        lower.push(bound);
                    }
                }
            }
        }
        for l in &lower {
            for u in &upper {
                next.push(
                    Constraint {
                        expr: l.sub(u),
                        rel: Rel::Le,
                    }
                    .normalized(),
                );
            }
        }
        steps.push(Step::Bounds {
            var: x,
            lower,
            upper,
        });
        cur = next;
    }

    let eliminated: BTreeSet<&String> = steps
        .iter()
        .map(|s| match s {
            Step::Subst(v, _) => v,
            Step::Bounds { var, .. } => var,
        })
        .collect();
    let mut w: BTreeMap<String, BigRational> = all_vars
        .iter()
        .filter(|v| !eliminated.contains(v))
        .map(|v| (v.clone(), BigRational::zero()))
        .collect();
    for s in steps.iter().rev() {
        match s {
            Step::Subst(v, e) => {
                let val = e.eval(&w);
                w.insert(v.clone(), val);
            }
            Step::Bounds { var, lower, upper } => {
                let lo = lower.iter().map(|e| e.eval(&w)).max();
                let hi = upper.iter().map(|e| e.eval(&w)).min();
                w.insert(var.clone(), pick(lo, hi));
            }
        }
    }
    for c in input {
        assert!(c.holds(&w), "Fourier–Motzkin witness violates {c:?}");
    }
    FmResult::SatOverRationals(w)
}

/// A value in `[lo, hi]`, integral when the interval contains an integer.
fn pick(lo: Option<BigRational>, hi: Option<BigRational>) -> BigRational {
    match (lo, hi) {
        (None, None) => BigRational::zero(),
        (Some(l), None) => l.ceil(),
        (None, Some(h)) => h.floor(),
        (Some(l), Some(h)) => {
            if l.ceil() <= h {
                l.ceil()
            } else {
                l
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vcgen::{parse_formula, Formula};
    use num::BigInt;

    fn int(k: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(k))
    }

    fn lin(s: &str) -> LinTerm {
        match parse_formula(&format!("(cmp == {s} 0)")).unwrap() {
            Formula::Cmp { lhs, .. } => lhs,
            _ => unreachable!(),
        }
    }

    #[test]
    fn empty_interval() {
        let cs = [
            Constraint::le(&lin("(+ -1 x)")),
            Constraint::le(&lin("(+ 2 (* -1 x))")),
        ];
        assert_eq!(fm_eliminate(&cs), FmResult::UnsatOverRationals);
    }

    #[test]
    fn rational_equality() {
        let cs = [Constraint::eq(&lin("(+ -1 (* 2 x))"))];
        let FmResult::SatOverRationals(w) = fm_eliminate(&cs) else {
            panic!()
        };
        assert_eq!(w["x"], BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn vacuous() {
        assert_eq!(
            fm_eliminate(&[]),
            FmResult::SatOverRationals(BTreeMap::new())
        );
    }

    #[test]
    fn prefers_integers() {
        // 1/3 <= x <= 5/2 and x + y <= 0 and y >= -10
        let cs = [
            Constraint::le(&lin("(+ 1 (* -3 x))")),
            Constraint::le(&lin("(+ -5 (* 2 x))")),
            Constraint::le(&lin("(+ 0 (* 1 x) (* 1 y))")),
            Constraint::le(&lin("(+ -10 (* -1 y))")),
        ];
        let FmResult::SatOverRationals(w) = fm_eliminate(&cs) else {
            panic!()
        };
        assert!(w.values().all(|v| v.is_integer()), "{w:?}");
    }

    #[test]
    fn chained_equalities() {
        let cs = [
            Constraint::eq(&lin("(+ 0 (* 1 x) (* -1 y))")),
            Constraint::eq(&lin("(+ -3 (* 1 y))")),
            Constraint::le(&lin("(+ 0 (* 1 x) (* -1 z))")),
            Constraint::le(&lin("(+ 0 (* 1 z) -4)")),
        ];
        let FmResult::SatOverRationals(w) = fm_eliminate(&cs) else {
            panic!()
        };
        assert_eq!(w["x"], int(3));
        assert!(w["z"] >= int(3) && w["z"] <= int(4));
    }

    #[test]
    fn contradictory_equalities() {
        let cs = [
            Constraint::eq(&lin("(+ 0 (* 1 x) (* -1 y))")),
            Constraint::eq(&lin("(+ 1 (* 1 x) (* -1 y))")),
        ];
        assert_eq!(fm_eliminate(&cs), FmResult::UnsatOverRationals);
    }
}
