//! Weakest preconditions over A-normalized bodies.

use std::collections::BTreeMap;

use num::BigInt;

use super::anf::AnfBody;
use super::formula::{CmpOp, Formula, LinTerm, Sort, Subst};
use super::{ContractEnv, VcError};
use crate::frontend::{
    BinOp, Block, CallableId, Expr, ExprKind, Resolution, Stmt, StmtKind, Type, TypedProgram, UnOp,
};

/// Result of translating one pure expression: the value plus variables that
/// stand for havoced field reads and must be universally bound around its use.
pub(crate) struct Translated<T> {
    pub value: T,
    pub havocs: Vec<(String, Sort)>,
}

impl<T> Translated<T> {
    pub fn wrap(havocs: Vec<(String, Sort)>, f: Formula) -> Formula {
        havocs
            .into_iter()
            .rev()
            .fold(f, |acc, (v, s)| Formula::forall(v, s, acc))
    }
}

pub(crate) struct Wp<'a> {
    pub tp: &'a TypedProgram,
    pub anf: &'a AnfBody,
    pub env: &'a ContractEnv,
    pub fresh: usize,
}

impl<'a> Wp<'a> {
    pub fn new(tp: &'a TypedProgram, anf: &'a AnfBody, env: &'a ContractEnv) -> Self {
        Wp {
            tp,
            anf,
            env,
            fresh: 0,
        }
    }

    fn ty(&self, e: &Expr) -> &Type {
        self.anf.ty(self.tp, e)
    }

    fn havoc_name(&mut self, field: &str) -> String {
        let n = format!("{field}#{}", self.fresh);
        self.fresh += 1;
        n
    }

    pub fn term(&mut self, e: &Expr) -> Translated<LinTerm> {
        let mut havocs = Vec::new();
        let value = self.term_in(e, &mut havocs);
        Translated { value, havocs }
    }

    pub fn formula(&mut self, e: &Expr) -> Translated<Formula> {
        let mut havocs = Vec::new();
        let value = self.formula_in(e, &mut havocs);
        Translated { value, havocs }
    }

    fn term_in(&mut self, e: &Expr, havocs: &mut Vec<(String, Sort)>) -> LinTerm {
        match &e.kind {
            ExprKind::Int(v) => LinTerm::constant(*v),
            ExprKind::Var(n) => LinTerm::var(n.clone()),
            ExprKind::Result => LinTerm::var("result"),
            ExprKind::Unary {
                op: UnOp::Neg,
                operand,
            } => self.term_in(operand, havocs).neg(),
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.term_in(lhs, havocs);
                let r = self.term_in(rhs, havocs);
                match op {
                    BinOp::Add => l.add(&r),
                    BinOp::Sub => l.sub(&r),
                    BinOp::Mul if l.is_constant() => r.scale(&l.constant),
                    BinOp::Mul if r.is_constant() => l.scale(&r.constant),
                    _ => unreachable!("non-linear or non-integer term after typechecking"),
                }
            }
            ExprKind::Field { field, .. } => {
                let v = self.havoc_name(field);
                havocs.push((v.clone(), Sort::Int));
                LinTerm::var(v)
            }
            other => unreachable!("impure integer expression in normalized code: {other:?}"),
        }
    }

    fn formula_in(&mut self, e: &Expr, havocs: &mut Vec<(String, Sort)>) -> Formula {
        match &e.kind {
            ExprKind::Bool(true) => Formula::True,
            ExprKind::Bool(false) => Formula::False,
            ExprKind::Var(n) => Formula::BoolVar(n.clone()),
            ExprKind::Result => Formula::BoolVar("result".into()),
            ExprKind::Unary {
                op: UnOp::Not,
                operand,
            } => Formula::not(self.formula_in(operand, havocs)),
            ExprKind::Binary { op, lhs, rhs } => {
                let bool_operands = self.ty(lhs) == &Type::Bool;
                match op {
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        let l = self.formula_in(lhs, havocs);
                        let r = self.formula_in(rhs, havocs);
                        match op {
                            BinOp::And => Formula::And(Box::new(l), Box::new(r)),
                            BinOp::Or => Formula::or(l, r),
                            _ => Formula::Implies(Box::new(l), Box::new(r)),
                        }
                    }
                    BinOp::Eq | BinOp::Ne if bool_operands => {
                        let l = self.formula_in(lhs, havocs);
                        let r = self.formula_in(rhs, havocs);
                        let iff = Formula::iff(l, r);
                        if *op == BinOp::Eq {
                            iff
                        } else {
                            Formula::not(iff)
                        }
                    }
                    _ => {
                        let l = self.term_in(lhs, havocs);
                        let r = self.term_in(rhs, havocs);
                        let op = match op {
                            BinOp::Eq => CmpOp::Eq,
                            BinOp::Ne => CmpOp::Ne,
                            BinOp::Lt => CmpOp::Lt,
                            BinOp::Le => CmpOp::Le,
                            BinOp::Gt => CmpOp::Gt,
                            BinOp::Ge => CmpOp::Ge,
                            _ => unreachable!("arithmetic operator in boolean position"),
                        };
                        Formula::cmp(op, l, r)
                    }
                }
            }
            ExprKind::Field { field, .. } => {
                let v = self.havoc_name(field);
                havocs.push((v.clone(), Sort::Bool));
                Formula::BoolVar(v)
            }
            other => unreachable!("impure boolean expression in normalized code: {other:?}"),
        }
    }

    /// Translates `e` as a replacement for a variable of sort `sort`. Object
    /// and function values have no logical content beyond variable identity.
    pub fn subst_for(&mut self, e: &Expr, sort: &Sort) -> Translated<Option<Subst>> {
        match sort {
            Sort::Int => {
                let t = self.term(e);
                Translated {
                    value: Some(Subst::Int(t.value)),
                    havocs: t.havocs,
                }
            }
            Sort::Bool => {
                let t = self.formula(e);
                Translated {
                    value: Some(Subst::Bool(t.value)),
                    havocs: t.havocs,
                }
            }
            _ => Translated {
                value: match &e.kind {
                    ExprKind::Var(n) => Some(Subst::Ref(n.clone())),
                    ExprKind::This => Some(Subst::Ref("this".into())),
                    _ => None,
                },
                havocs: Vec::new(),
            },
        }
    }

    /// Binds `params` to `args`. Returns the substitution and the havoc
    /// variables introduced by the arguments.
    pub fn bind_args(
        &mut self,
        params: &[(String, Sort)],
        args: &[Expr],
    ) -> (BTreeMap<String, Subst>, Vec<(String, Sort)>) {
        let mut map = BTreeMap::new();
        let mut havocs = Vec::new();
        for ((p, sort), a) in params.iter().zip(args) {
            let t = self.subst_for(a, sort);
            havocs.extend(t.havocs);
            if let Some(s) = t.value {
                map.insert(p.clone(), s);
            }
        }
        (map, havocs)
    }

    /// `Q[e/x]`, or `∀x. Q` when `e` has no logical translation.
    fn assign(&mut self, name: &str, e: &Expr, q: Formula) -> Formula {
        let sort = Sort::of(self.ty(e));
        if name == "_" {
            return q;
        }
        let t = self.subst_for(e, &sort);
        let body = match t.value {
            Some(s) => q.subst1(name, s),
            None if q.free_vars().contains(name) => Formula::forall(name, sort, q),
            None => q,
        };
        Translated::<()>::wrap(t.havocs, body)
    }

    /// Binder for the value of a call assigned to `name`, renamed if `name`
    /// also occurs in the arguments.
    fn binder(&self, name: &str, args: &[Expr], q: &Formula) -> String {
        let mut arg_vars = std::collections::BTreeSet::new();
        for a in args {
            a.walk(&mut |x| {
                if let ExprKind::Var(n) = &x.kind {
                    arg_vars.insert(n.clone());
                }
            });
        }
        if !arg_vars.contains(name) {
            return name.to_string();
        }
        let mut avoid = q.free_vars();
        avoid.extend(arg_vars);
        super::formula::fresh_name(name, &avoid)
    }

    fn call(&mut self, name: &str, init: &Expr, q: Formula) -> Formula {
        let sort = Sort::of(self.ty(init));
        let (callee, args): (Option<CallableId>, &[Expr]) = match &init.kind {
            ExprKind::Call { args, .. } | ExprKind::MethodCall { args, .. } => {
                match self.tp.resolution.get(&init.id) {
                    Some(Resolution::Callable(id)) => (Some(*id), args.as_slice()),
                    _ => (None, args.as_slice()),
                }
            }
            // function values and constructors carry no contract
            ExprKind::Invoke { args, .. } | ExprKind::New { args, .. } => (None, args.as_slice()),
            _ => unreachable!("not a call"),
        };
        let contract = callee.and_then(|c| self.env.get(c));
        let Some(contract) = contract.filter(|c| !c.requires.is_empty() || !c.ensures.is_empty())
        else {
            return Formula::forall(name, sort, q);
        };
        let contract = contract.clone();
        let binder = self.binder(name, args, &q);
        let (mut map, havocs) = self.bind_args(&contract.params, args);
        let pre = Formula::and_all(contract.requires.iter().map(|r| r.subst(&map)));
        map.insert("result".into(), Subst::variable(&binder, &sort));
        let ens = Formula::and_all(contract.ensures.iter().map(|e| e.subst(&map)));
        let q = if binder != name {
            q.subst1(name, Subst::variable(&binder, &sort))
        } else {
            q
        };
        let f = Formula::and(pre, Formula::forall(binder, sort, Formula::implies(ens, q)));
        Translated::<()>::wrap(havocs, f)
    }

    pub fn stmt(&mut self, s: &Stmt, q: Formula, ret_post: &Formula) -> Formula {
        match &s.kind {
            StmtKind::VarDecl { name, init, .. } => {
                if init.kind.is_call_like() {
                    self.call(name, init, q)
                } else {
                    self.assign(name, init, q)
                }
            }
            StmtKind::Expr(e) => {
                if e.kind.is_call_like() {
                    self.call("_", e, q)
                } else {
                    q
                }
            }
            StmtKind::FieldAssign { .. } => q,
            StmtKind::Return(None) => ret_post.clone(),
            StmtKind::Return(Some(e)) => self.assign("result", e, ret_post.clone()),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let c = self.formula(cond);
                let t = self.block(then_block, q.clone(), ret_post);
                let e = match else_block {
                    Some(b) => self.block(b, q, ret_post),
                    None => q,
                };
                let f = Formula::and(
                    Formula::implies(c.value.clone(), t),
                    Formula::implies(Formula::not(c.value), e),
                );
                Translated::<()>::wrap(c.havocs, f)
            }
        }
    }

    /// `wp(b, q)` where `q` holds after falling off the end of `b` and
    /// `ret_post` after any `return`.
    pub fn block(&mut self, b: &Block, q: Formula, ret_post: &Formula) -> Formula {
        b.stmts
            .iter()
            .rev()
            .fold(q, |acc, s| self.stmt(s, acc, ret_post))
    }

    /// The condition under which `obligation` holds on reaching the statement
    /// whose initializer is node `site`; paths that return earlier or never
    /// reach it impose nothing.
    pub fn to_site(
        &mut self,
        b: &Block,
        site: crate::frontend::NodeId,
        obligation: &dyn Fn(&mut Self, &Stmt) -> Formula,
    ) -> Option<Formula> {
        let (idx, at) = b.stmts.iter().enumerate().find_map(|(i, s)| {
            let hit = match &s.kind {
                StmtKind::VarDecl { init, .. } if init.id == site => Some(obligation(self, s)),
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    if let Some(inner) = self.to_site(then_block, site, obligation) {
                        let c = self.formula(cond);
                        Some(Translated::<()>::wrap(
                            c.havocs,
                            Formula::implies(c.value, inner),
                        ))
                    } else if let Some(inner) = else_block
                        .as_ref()
                        .and_then(|eb| self.to_site(eb, site, obligation))
                    {
                        let c = self.formula(cond);
                        Some(Translated::<()>::wrap(
                            c.havocs,
                            Formula::implies(Formula::not(c.value), inner),
                        ))
                    } else {
                        None
                    }
                }
                _ => None,
            };
            hit.map(|f| (i, f))
        })?;
        let mut q = at;
        for s in b.stmts[..idx].iter().rev() {
            q = self.stmt(s, q, &Formula::True);
        }
        Some(q)
    }
}

/// True if every path through `b` ends in a `return`.
pub fn always_returns(b: &Block) -> bool {
    b.stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If {
            then_block,
            else_block: Some(eb),
            ..
        } => always_returns(then_block) && always_returns(eb),
        _ => false,
    })
}

pub(crate) fn nonneg(measure: &LinTerm) -> Formula {
    Formula::cmp(
        CmpOp::Ge,
        measure.clone(),
        LinTerm::constant(BigInt::from(0)),
    )
}

pub(crate) fn malformed(callable: &str) -> VcError {
    VcError::MalformedBlock {
        callable: callable.to_string(),
    }
}
