//! Validity checking for verification conditions.
//!
//! A formula is valid when its negation has no model. The negation is put in
//! negation normal form, its existentials (the negated `Forall`s) become fresh
//! constants, and the result is expanded into a disjunction of conjunctions.
//! Each conjunction is tested over the rationals by Fourier–Motzkin
//! elimination; a rational model is rounded in search of an integer
//! counterexample.

mod eval;
mod fm;

use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, One};
use thiserror::Error;

use crate::vcgen::{CmpOp, Formula, LinTerm, Sort, Subst};

pub use eval::{domain, eval_bounded, eval_formula, Assignment, EvalError, Value};
pub use fm::{fm_eliminate, Affine, Constraint, FmResult, Rel};

/// Disjuncts allowed in the normal form before giving up.
pub const MAX_DISJUNCTS: usize = 100_000;

/// Variables [`brute_force`] will enumerate.
pub const MAX_BRUTE_FORCE_VARS: usize = 6;

/// Rational witness components that get both roundings tried.
const MAX_ROUNDED: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Proved,
    /// A falsifying assignment. It covers the formula's free variables and,
    /// under their `name!k` skolem names, witnesses for its quantifiers.
    Counterexample(Assignment),
    /// The negation is satisfiable over the rationals but no nearby integer
    /// point was found.
    Unknown(BTreeMap<String, BigRational>),
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("quantifier over `{0}` occurs in negative position")]
    Polarity(String),
    #[error("normal form exceeds {MAX_DISJUNCTS} disjuncts")]
    Capacity,
    #[error("brute force supports at most {MAX_BRUTE_FORCE_VARS} variables, got {0}")]
    TooManyVariables(usize),
}

/// Strips the positive quantifiers of `f`, renaming each bound variable to a
/// fresh `name!k`. The result is quantifier-free, and `f` is valid iff the
/// result is valid for every value of the new names. Returns the sorts of
/// the introduced names.
pub fn skolemize(f: &Formula) -> Result<(Formula, BTreeMap<String, Sort>), SolverError> {
    let mut s = Skolemizer {
        avoid: f.free_vars(),
        next: 0,
        sorts: BTreeMap::new(),
    };
    let out = s.go(f, true)?;
    Ok((out, s.sorts))
}

struct Skolemizer {
    avoid: BTreeSet<String>,
    next: usize,
    sorts: BTreeMap<String, Sort>,
}

impl Skolemizer {
    fn fresh(&mut self, base: &str) -> String {
        loop {
            let n = format!("{base}!{}", self.next);
            self.next += 1;
            if !self.avoid.contains(&n) {
                self.avoid.insert(n.clone());
                return n;
            }
        }
    }

    fn go(&mut self, f: &Formula, positive: bool) -> Result<Formula, SolverError> {
        Ok(match f {
            Formula::Not(a) => Formula::Not(Box::new(self.go(a, !positive)?)),
            Formula::And(a, b) => Formula::And(
                Box::new(self.go(a, positive)?),
                Box::new(self.go(b, positive)?),
            ),
            Formula::Or(a, b) => Formula::Or(
                Box::new(self.go(a, positive)?),
                Box::new(self.go(b, positive)?),
            ),
            Formula::Implies(a, b) => Formula::Implies(
                Box::new(self.go(a, !positive)?),
                Box::new(self.go(b, positive)?),
            ),
            Formula::Forall { var, sort, body } => {
                if !positive {
                    return Err(SolverError::Polarity(var.clone()));
                }
                let k = self.fresh(var);
                self.sorts.insert(k.clone(), sort.clone());
                let body = body.subst1(var, Subst::variable(&k, sort));
                self.go(&body, positive)?
            }
            other => other.clone(),
        })
    }
}

/// A literal of a conjunction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Bool(String),
    /// Identity of two references, names in order.
    RefEq(String, String),
}

/// One disjunct: signed boolean atoms and linear constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Conjunction {
    pub literals: BTreeMap<Atom, bool>,
    pub constraints: Vec<Constraint>,
}

impl Conjunction {
    fn merge(&self, other: &Conjunction) -> Option<Conjunction> {
        let mut out = self.clone();
        for (a, sign) in &other.literals {
            if *out.literals.entry(a.clone()).or_insert(*sign) != *sign {
                return None;
            }
        }
        out.constraints.extend(other.constraints.iter().cloned());
        Some(out)
    }

    fn literal(atom: Atom, sign: bool) -> Conjunction {
        Conjunction {
            literals: BTreeMap::from([(atom, sign)]),
            constraints: Vec::new(),
        }
    }

    fn constraint(c: Constraint) -> Conjunction {
        Conjunction {
            literals: BTreeMap::new(),
            constraints: vec![c],
        }
    }
}

/// Disjunctive normal form of a quantifier-free formula; inconsistent
/// boolean literals are pruned while expanding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClauseSet {
    pub disjuncts: Vec<Conjunction>,
}

impl ClauseSet {
    pub fn of(f: &Formula) -> Result<ClauseSet, SolverError> {
        Ok(ClauseSet {
            disjuncts: dnf(f, true)?,
        })
    }
}

fn one() -> BigInt {
    BigInt::one()
}

/// Constraints equivalent over the integers to `l op r`, as alternatives.
fn compare(op: CmpOp, l: &LinTerm, r: &LinTerm) -> Vec<Conjunction> {
    let d = l.sub(r);
    let strict = |t: LinTerm| Constraint::le(&t.add(&LinTerm::constant(one())));
    let c = |x| vec![Conjunction::constraint(x)];
    match op {
        CmpOp::Le => c(Constraint::le(&d)),
        CmpOp::Ge => c(Constraint::le(&d.neg())),
        CmpOp::Lt => c(strict(d)),
        CmpOp::Gt => c(strict(d.neg())),
        CmpOp::Eq => c(Constraint::eq(&d)),
        CmpOp::Ne => vec![
            Conjunction::constraint(strict(d.clone())),
            Conjunction::constraint(strict(d.neg())),
        ],
    }
}

fn dnf(f: &Formula, positive: bool) -> Result<Vec<Conjunction>, SolverError> {
    let truth = |b: bool| {
        if b {
            vec![Conjunction::default()]
        } else {
            Vec::new()
        }
    };
    Ok(match f {
        Formula::True => truth(positive),
        Formula::False => truth(!positive),
        Formula::Not(a) => dnf(a, !positive)?,
        Formula::And(a, b) if positive => product(dnf(a, true)?, dnf(b, true)?)?,
        Formula::Or(a, b) if !positive => product(dnf(a, false)?, dnf(b, false)?)?,
        Formula::Implies(a, b) if !positive => product(dnf(a, true)?, dnf(b, false)?)?,
        Formula::And(a, b) => union(dnf(a, false)?, dnf(b, false)?)?,
        Formula::Or(a, b) => union(dnf(a, true)?, dnf(b, true)?)?,
        Formula::Implies(a, b) => union(dnf(a, false)?, dnf(b, true)?)?,
        Formula::Cmp { op, lhs, rhs } => {
            let op = if positive { *op } else { op.negate() };
            compare(op, lhs, rhs)
        }
        Formula::BoolVar(v) => vec![Conjunction::literal(Atom::Bool(v.clone()), positive)],
        Formula::RefEq(a, b) if a == b => truth(positive),
        Formula::RefEq(a, b) => {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            vec![Conjunction::literal(
                Atom::RefEq(a.clone(), b.clone()),
                positive,
            )]
        }
        Formula::Forall { var, .. } => return Err(SolverError::Polarity(var.clone())),
    })
}

fn union(mut a: Vec<Conjunction>, b: Vec<Conjunction>) -> Result<Vec<Conjunction>, SolverError> {
    a.extend(b);
    if a.len() > MAX_DISJUNCTS {
        return Err(SolverError::Capacity);
    }
    Ok(a)
}

fn product(a: Vec<Conjunction>, b: Vec<Conjunction>) -> Result<Vec<Conjunction>, SolverError> {
    if a.len().saturating_mul(b.len()) > MAX_DISJUNCTS {
        return Err(SolverError::Capacity);
    }
    let mut out = Vec::new();
    for x in &a {
        for y in &b {
            if let Some(m) = x.merge(y) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

pub fn is_valid(f: &Formula) -> Result<Verdict, SolverError> {
    let (body, skolems) = skolemize(f)?;
    let mut sorts = body.free_var_sorts();
    for (k, s) in skolems {
        sorts.entry(k).or_insert(s);
    }
    let negation = ClauseSet::of(&Formula::not(body.clone()))?;
    let mut first_witness = None;
    for conj in &negation.disjuncts {
        let FmResult::SatOverRationals(w) = fm_eliminate(&conj.constraints) else {
            continue;
        };
        if let Some(a) = round(&body, &sorts, conj, &w) {
            return Ok(Verdict::Counterexample(a));
        }
        first_witness.get_or_insert(w);
    }
    Ok(match first_witness {
        None => Verdict::Proved,
        Some(w) => Verdict::Unknown(w),
    })
}

/// Searches the integer points around rational witness `w` for one that
/// falsifies `body`.
fn round(
    body: &Formula,
    sorts: &BTreeMap<String, Sort>,
    conj: &Conjunction,
    w: &BTreeMap<String, BigRational>,
) -> Option<Assignment> {
    let fractional: Vec<&String> = w
        .iter()
        .filter(|(_, v)| !v.is_integer())
        .map(|(k, _)| k)
        .take(MAX_ROUNDED)
        .collect();
    let mut next_ref = 0;
    let mut base = Assignment::new();
    for (v, s) in sorts {
        let val = match s {
            Sort::Int => Value::Int(w.get(v).map(|x| x.floor().to_integer()).unwrap_or_default()),
            Sort::Bool => Value::Bool(
                conj.literals
                    .get(&Atom::Bool(v.clone()))
                    .copied()
                    .unwrap_or(false),
            ),
            Sort::Unit => Value::Unit,
            Sort::Ref(_) => {
                next_ref += 1;
                Value::Ref(next_ref - 1)
            }
        };
        base.insert(v.clone(), val);
    }
    for mask in 0u32..(1 << fractional.len()) {
        let mut a = base.clone();
        for (i, v) in fractional.iter().enumerate() {
            if mask & (1 << i) != 0 {
                a.insert((*v).clone(), Value::Int(w[*v].ceil().to_integer()));
            }
        }
        if eval_formula(body, &a) == Ok(false) {
            return Some(a);
        }
    }
    None
}

/// Exhaustive search over `[-bound, bound]` for an assignment falsifying
/// `f`, with quantifiers read over the same range.
pub fn brute_force(f: &Formula, bound: u64) -> Result<Option<Assignment>, SolverError> {
    let vars: Vec<(String, Sort)> = f.free_var_sorts().into_iter().collect();
    if vars.len() > MAX_BRUTE_FORCE_VARS {
        return Err(SolverError::TooManyVariables(vars.len()));
    }
    let domains: Vec<Vec<Value>> = vars.iter().map(|(_, s)| domain(s, bound)).collect();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let a: Assignment = vars
            .iter()
            .zip(&idx)
            .zip(&domains)
            .map(|(((v, _), &i), d)| (v.clone(), d[i].clone()))
            .collect();
        if eval_bounded(f, &a, bound) == Ok(false) {
            return Ok(Some(a));
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(None);
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
