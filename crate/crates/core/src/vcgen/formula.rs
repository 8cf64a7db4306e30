use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, One, Zero};

use crate::frontend::Type;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    Unit,
    /// Objects and function values, named by their source type.
    Ref(String),
}

impl Sort {
    pub fn of(ty: &Type) -> Sort {
        match ty {
            Type::Int => Sort::Int,
            Type::Bool => Sort::Bool,
            Type::Unit => Sort::Unit,
            Type::Named(n) => Sort::Ref(n.clone()),
            Type::Arrow(..) => Sort::Ref(arrow_name(ty)),
        }
    }
}

fn arrow_name(ty: &Type) -> String {
    match ty {
        Type::Arrow(ps, r) => {
            let ps: Vec<String> = ps.iter().map(arrow_name).collect();
            format!("[{}]->{}", ps.join(","), arrow_name(r))
        }
        other => other.to_string(),
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("int"),
            Sort::Bool => f.write_str("bool"),
            Sort::Unit => f.write_str("unit"),
            Sort::Ref(n) => f.write_str(n),
        }
    }
}

/// `constant + Σ coeff·var`, never storing a zero coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LinTerm {
    pub constant: BigInt,
    pub terms: BTreeMap<String, BigInt>,
}

impl LinTerm {
    pub fn constant(c: impl Into<BigInt>) -> Self {
        LinTerm {
            constant: c.into(),
            terms: BTreeMap::new(),
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(name.into(), BigInt::one());
        LinTerm {
            constant: BigInt::zero(),
            terms,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, var: &str, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        let entry = self
            .terms
            .entry(var.to_string())
            .or_insert_with(BigInt::zero);
        *entry += k;
        if entry.is_zero() {
            self.terms.remove(var);
        }
    }

    pub fn add(&self, other: &LinTerm) -> LinTerm {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (v, k) in &other.terms {
            out.add_term(v, k);
        }
        out
    }

    pub fn scale(&self, k: &BigInt) -> LinTerm {
        if k.is_zero() {
            return LinTerm::default();
        }
        LinTerm {
            constant: &self.constant * k,
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
        }
    }

    pub fn neg(&self) -> LinTerm {
        self.scale(&-BigInt::one())
    }

    pub fn sub(&self, other: &LinTerm) -> LinTerm {
        self.add(&other.neg())
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.terms.keys()
    }

    /// Replaces integer variables by terms; other substitutions are ignored.
    pub fn subst(&self, map: &BTreeMap<String, Subst>) -> LinTerm {
        let mut out = LinTerm::constant(self.constant.clone());
        for (v, k) in &self.terms {
            match map.get(v) {
                Some(Subst::Int(t)) => out = out.add(&t.scale(k)),
                _ => out.add_term(v, k),
            }
        }
        out
    }

    pub fn rename(&self, from: &str, to: &str) -> LinTerm {
        let mut out = LinTerm::constant(self.constant.clone());
        for (v, k) in &self.terms {
            out.add_term(if v == from { to } else { v }, k);
        }
        out
    }

    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<BigInt>) -> Result<BigInt, String> {
        let mut acc = self.constant.clone();
        for (v, k) in &self.terms {
            let x = lookup(v).ok_or_else(|| v.clone())?;
            acc += k * x;
        }
        Ok(acc)
    }
}

impl fmt::Display for LinTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(+ {}", self.constant)?;
        for (v, k) in &self.terms {
            write!(f, " (* {k} {v})")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn holds(self, l: &BigInt, r: &BigInt) -> bool {
        match self {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall {
        var: String,
        sort: Sort,
        body: Box<Formula>,
    },
    Cmp {
        op: CmpOp,
        lhs: LinTerm,
        rhs: LinTerm,
    },
    BoolVar(String),
    /// Object identity. Contracts cannot compare objects, so generated VCs
    /// never contain it.
    RefEq(String, String),
}

/// Replacement for a variable during substitution.
#[derive(Debug, Clone, PartialEq)]
pub enum Subst {
    Int(LinTerm),
    Bool(Formula),
    Ref(String),
}

impl Subst {
    pub fn variable(name: &str, sort: &Sort) -> Subst {
        match sort {
            Sort::Int => Subst::Int(LinTerm::var(name)),
            Sort::Bool => Subst::Bool(Formula::BoolVar(name.to_string())),
            _ => Subst::Ref(name.to_string()),
        }
    }

    fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Subst::Int(t) => out.extend(t.vars().cloned()),
            Subst::Bool(f) => out.extend(f.free_vars()),
            Subst::Ref(v) => {
                out.insert(v.clone());
            }
        }
    }
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction, dropping `True` operands.
    pub fn and(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::True, b) => b,
            (a, Formula::True) => a,
            (a, b) => Formula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Implication, dropping a `True` antecedent.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        match a {
            Formula::True => b,
            a => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    pub fn forall(var: impl Into<String>, sort: Sort, body: Formula) -> Formula {
        Formula::Forall {
            var: var.into(),
            sort,
            body: Box::new(body),
        }
    }

    pub fn cmp(op: CmpOp, lhs: LinTerm, rhs: LinTerm) -> Formula {
        Formula::Cmp { op, lhs, rhs }
    }

    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut fs: Vec<Formula> = fs.into_iter().collect();
        let Some(mut acc) = fs.pop() else {
            return Formula::True;
        };
        while let Some(f) = fs.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b, a),
        )
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let mut add = |v: &String, bound: &Vec<String>| {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Not(a) => a.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Forall { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Formula::Cmp { lhs, rhs, .. } => {
                for v in lhs.vars().chain(rhs.vars()) {
                    add(v, bound);
                }
            }
            Formula::BoolVar(v) => add(v, bound),
            Formula::RefEq(a, b) => {
                add(a, bound);
                add(b, bound);
            }
        }
    }

    /// Sorts of free variables, inferred from the positions they occur in.
    pub fn free_var_sorts(&self) -> BTreeMap<String, Sort> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeMap<String, Sort>) {
            let mut add = |v: &String, s: Sort, bound: &Vec<String>| {
                if !bound.contains(v) {
                    out.entry(v.clone()).or_insert(s);
                }
            };
            match f {
                Formula::True | Formula::False => {}
                Formula::Not(a) => go(a, bound, out),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Formula::Forall { var, body, .. } => {
                    bound.push(var.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                Formula::Cmp { lhs, rhs, .. } => {
                    for v in lhs.vars().chain(rhs.vars()) {
                        add(v, Sort::Int, bound);
                    }
                }
                Formula::BoolVar(v) => add(v, Sort::Bool, bound),
                Formula::RefEq(a, b) => {
                    add(a, Sort::Ref(String::new()), bound);
                    add(b, Sort::Ref(String::new()), bound);
                }
            }
        }
        let mut out = BTreeMap::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Simultaneous, capture-avoiding substitution.
    pub fn subst(&self, map: &BTreeMap<String, Subst>) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Not(a) => Formula::Not(Box::new(a.subst(map))),
            Formula::And(a, b) => Formula::And(Box::new(a.subst(map)), Box::new(b.subst(map))),
            Formula::Or(a, b) => Formula::Or(Box::new(a.subst(map)), Box::new(b.subst(map))),
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(a.subst(map)), Box::new(b.subst(map)))
            }
            Formula::Cmp { op, lhs, rhs } => Formula::Cmp {
                op: *op,
                lhs: lhs.subst(map),
                rhs: rhs.subst(map),
            },
            Formula::BoolVar(v) => match map.get(v) {
                Some(Subst::Bool(f)) => f.clone(),
                _ => self.clone(),
            },
            Formula::RefEq(a, b) => {
                let r = |v: &String| match map.get(v) {
                    Some(Subst::Ref(w)) => w.clone(),
                    _ => v.clone(),
                };
                Formula::RefEq(r(a), r(b))
            }
            Formula::Forall { var, sort, body } => {
                let body_free = body.free_vars();
                let inner: BTreeMap<String, Subst> = map
                    .iter()
                    .filter(|(k, _)| *k != var && body_free.contains(*k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                if inner.is_empty() {
                    return self.clone();
                }
                let mut incoming = BTreeSet::new();
                for s in inner.values() {
                    s.free_vars(&mut incoming);
                }
                if !incoming.contains(var) {
                    return Formula::forall(var.clone(), sort.clone(), body.subst(&inner));
                }
                let mut avoid = body_free;
                avoid.extend(incoming);
                avoid.extend(inner.keys().cloned());
                let fresh = fresh_name(var, &avoid);
                let mut inner = inner;
                inner.insert(var.clone(), Subst::variable(&fresh, sort));
                Formula::forall(fresh, sort.clone(), body.subst(&inner))
            }
        }
    }

    /// Substitutes a single variable.
    pub fn subst1(&self, var: &str, with: Subst) -> Formula {
        let mut m = BTreeMap::new();
        m.insert(var.to_string(), with);
        self.subst(&m)
    }

    /// True if every `Forall` sits under an even number of negations and
    /// implication antecedents.
    pub fn quantifiers_positive(&self) -> bool {
        fn go(f: &Formula, positive: bool) -> bool {
            match f {
                Formula::Not(a) => go(a, !positive),
                Formula::And(a, b) | Formula::Or(a, b) => go(a, positive) && go(b, positive),
                Formula::Implies(a, b) => go(a, !positive) && go(b, positive),
                Formula::Forall { body, .. } => positive && go(body, positive),
                _ => true,
            }
        }
        go(self, true)
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Not(a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.size() + b.size()
            }
            Formula::Forall { body, .. } => 1 + body.size(),
            _ => 1,
        }
    }
}

/// `base'k` for the smallest `k` not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = match base.rfind('\'') {
        Some(i) if base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < base.len() => {
            &base[..i]
        }
        _ => base,
    };
    (0..)
        .map(|k| format!("{stem}'{k}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Not(a) => write!(f, "(not {a})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Implies(a, b) => write!(f, "(=> {a} {b})"),
            Formula::Forall { var, sort, body } => write!(f, "(forall {var}:{sort} {body})"),
            Formula::Cmp { op, lhs, rhs } => write!(f, "(cmp {} {lhs} {rhs})", op.symbol()),
            Formula::BoolVar(v) => f.write_str(v),
            Formula::RefEq(a, b) => write!(f, "(refeq {a} {b})"),
        }
    }
}
