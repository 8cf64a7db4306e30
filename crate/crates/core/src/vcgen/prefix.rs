//! Reader for the prefix notation produced by `Formula`'s `Display`.

use num::BigInt;
use thiserror::Error;

use super::formula::{CmpOp, Formula, LinTerm, Sort};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("prefix formula, token {position}: {message}")]
pub struct PrefixError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(s: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if !cur.is_empty() {
                out.push(Tok::Atom(std::mem::take(&mut cur)));
            }
            match c {
                '(' => out.push(Tok::Open),
                ')' => out.push(Tok::Close),
                _ => {}
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(Tok::Atom(cur));
    }
    out
}

struct Reader {
    toks: Vec<Tok>,
    pos: usize,
}

impl Reader {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, PrefixError> {
        Err(PrefixError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Result<Tok, PrefixError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn atom(&mut self) -> Result<String, PrefixError> {
        match self.next()? {
            Tok::Atom(a) => Ok(a),
            _ => {
                self.pos -= 1;
                self.err("expected an atom")
            }
        }
    }

    fn close(&mut self) -> Result<(), PrefixError> {
        match self.next()? {
            Tok::Close => Ok(()),
            _ => {
                self.pos -= 1;
                self.err("expected `)`")
            }
        }
    }

    fn formula(&mut self) -> Result<Formula, PrefixError> {
        match self.next()? {
            Tok::Atom(a) => match a.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ if is_name(&a) => Ok(Formula::BoolVar(a)),
                _ => {
                    self.pos -= 1;
                    self.err(format!("`{a}` is not a formula"))
                }
            },
            Tok::Close => {
                self.pos -= 1;
                self.err("unexpected `)`")
            }
            Tok::Open => {
                let head = self.atom()?;
                let f = match head.as_str() {
                    "not" => Formula::not(self.formula()?),
                    "and" | "or" | "=>" => {
                        let a = Box::new(self.formula()?);
                        let b = Box::new(self.formula()?);
                        match head.as_str() {
                            "and" => Formula::And(a, b),
                            "or" => Formula::Or(a, b),
                            _ => Formula::Implies(a, b),
                        }
                    }
                    "forall" => {
                        let binder = self.atom()?;
                        let Some((var, sort)) = binder.split_once(':') else {
                            return self.err("binder must look like `name:sort`");
                        };
                        if !is_name(var) {
                            return self.err(format!("bad binder name `{var}`"));
                        }
                        let sort = match sort {
                            "int" => Sort::Int,
                            "bool" => Sort::Bool,
                            "unit" => Sort::Unit,
                            "" => return self.err("missing sort"),
                            other => Sort::Ref(other.to_string()),
                        };
                        Formula::forall(var, sort, self.formula()?)
                    }
                    "cmp" => {
                        let op = self.atom()?;
                        let Some(op) = CmpOp::ALL.into_iter().find(|o| o.symbol() == op) else {
                            return self.err(format!("unknown comparison `{op}`"));
                        };
                        let lhs = self.term()?;
                        let rhs = self.term()?;
                        Formula::cmp(op, lhs, rhs)
                    }
                    "refeq" => {
                        let a = self.atom()?;
                        let b = self.atom()?;
                        Formula::RefEq(a, b)
                    }
                    other => return self.err(format!("unknown connective `{other}`")),
                };
                self.close()?;
                Ok(f)
            }
        }
    }

    fn term(&mut self) -> Result<LinTerm, PrefixError> {
        match self.next()? {
            Tok::Atom(a) => {
                if let Ok(n) = a.parse::<BigInt>() {
                    Ok(LinTerm::constant(n))
                } else if is_name(&a) {
                    Ok(LinTerm::var(a))
                } else {
                    self.pos -= 1;
                    self.err(format!("`{a}` is not a term"))
                }
            }
            Tok::Close => {
                self.pos -= 1;
                self.err("unexpected `)`")
            }
            Tok::Open => {
                let head = self.atom()?;
                match head.as_str() {
                    "+" => {
                        let mut acc = LinTerm::default();
                        while self.toks.get(self.pos) != Some(&Tok::Close) {
                            acc = acc.add(&self.term()?);
                        }
                        self.close()?;
                        Ok(acc)
                    }
                    "*" => {
                        let k = self.atom()?;
                        let Ok(k) = k.parse::<BigInt>() else {
                            return self.err(format!("`{k}` is not an integer coefficient"));
                        };
                        let t = self.term()?;
                        self.close()?;
                        Ok(t.scale(&k))
                    }
                    other => self.err(format!("unknown term operator `{other}`")),
                }
            }
        }
    }
}

fn is_name(a: &str) -> bool {
    let mut chars = a.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && a != "true" && a != "false"
}

pub fn parse_formula(s: &str) -> Result<Formula, PrefixError> {
    let mut r = Reader {
        toks: tokenize(s),
        pos: 0,
    };
    let f = r.formula()?;
    if r.pos != r.toks.len() {
        return r.err("trailing input");
    }
    Ok(f)
}
