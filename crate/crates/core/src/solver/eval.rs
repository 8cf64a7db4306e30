use std::collections::BTreeMap;
use std::fmt;

use num::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::vcgen::{Formula, Sort};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    /// An object or function value; only its identity is observable.
    Ref(u32),
    Unit,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Ref(k) => write!(f, "ref#{k}"),
            Value::Unit => f.write_str("()"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bool(b) => s.serialize_bool(*b),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

pub type Assignment = BTreeMap<String, Value>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` has no value")]
    Unbound(String),
    #[error("variable `{0}` has a value of the wrong sort")]
    Sort(String),
    #[error("quantifiers need a bounded evaluation")]
    Quantifier,
}

/// Truth of a quantifier-free formula under `a`.
pub fn eval_formula(f: &Formula, a: &Assignment) -> Result<bool, EvalError> {
    Evaluator { bound: None }.eval(f, &mut a.clone())
}

/// Like [`eval_formula`], reading each `Forall` as a conjunction over
/// integers in `[-bound, bound]`, both booleans, and a single object.
pub fn eval_bounded(f: &Formula, a: &Assignment, bound: u64) -> Result<bool, EvalError> {
    Evaluator { bound: Some(bound) }.eval(f, &mut a.clone())
}

/// Every value of `sort` considered by bounded evaluation.
pub fn domain(sort: &Sort, bound: u64) -> Vec<Value> {
    match sort {
        Sort::Int => {
            let b = bound as i128;
            (-b..=b).map(|i| Value::Int(BigInt::from(i))).collect()
        }
        Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Sort::Unit => vec![Value::Unit],
        Sort::Ref(_) => vec![Value::Ref(0)],
    }
}

struct Evaluator {
    bound: Option<u64>,
}

impl Evaluator {
    fn eval(&self, f: &Formula, a: &mut Assignment) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Not(x) => !self.eval(x, a)?,
            Formula::And(x, y) => self.eval(x, a)? && self.eval(y, a)?,
            Formula::Or(x, y) => self.eval(x, a)? || self.eval(y, a)?,
            Formula::Implies(x, y) => !self.eval(x, a)? || self.eval(y, a)?,
            Formula::Cmp { op, lhs, rhs } => {
                let lookup = |v: &str| match a.get(v) {
                    Some(Value::Int(i)) => Some(i.clone()),
                    _ => None,
                };
                let l = lhs.eval(&lookup);
                let r = rhs.eval(&lookup);
                match (l, r) {
                    (Ok(l), Ok(r)) => op.holds(&l, &r),
                    (Err(v), _) | (_, Err(v)) => {
                        return Err(match a.get(&v) {
                            Some(_) => EvalError::Sort(v),
                            None => EvalError::Unbound(v),
                        })
                    }
                }
            }
            Formula::BoolVar(v) => match a.get(v) {
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(EvalError::Sort(v.clone())),
                None => return Err(EvalError::Unbound(v.clone())),
            },
            Formula::RefEq(x, y) => {
                let get = |v: &String| {
                    a.get(v)
                        .cloned()
                        .ok_or_else(|| EvalError::Unbound(v.clone()))
                };
                get(x)? == get(y)?
            }
            Formula::Forall { var, sort, body } => {
                let Some(bound) = self.bound else {
                    return Err(EvalError::Quantifier);
                };
                let saved = a.remove(var);
                let mut result = Ok(true);
                for v in domain(sort, bound) {
                    a.insert(var.clone(), v);
                    match self.eval(body, a) {
                        Ok(true) => {}
                        other => {
                            result = other;
                            break;
                        }
                    }
                }
                match saved {
                    Some(v) => a.insert(var.clone(), v),
                    None => a.remove(var),
                };
                result?
            }
        })
    }
}
