//! A-normal form: every call, invoke and `new` becomes the whole initializer
//! of a `var` declaration, and declarations that shadow an earlier name are
//! renamed apart so later substitution cannot confuse them.

use std::collections::{BTreeSet, HashMap};

use crate::frontend::{
    BinOp, Block, Expr, ExprKind, NodeId, Stmt, StmtKind, Type, TypedProgram, UnOp,
};

/// A normalized body. `types` covers nodes introduced by normalization; all
/// other nodes keep their ids and are typed by the source program.
#[derive(Debug, Clone)]
pub struct AnfBody {
    pub block: Block,
    pub types: HashMap<NodeId, Type>,
}

impl AnfBody {
    pub fn ty<'a>(&'a self, tp: &'a TypedProgram, e: &Expr) -> &'a Type {
        self.types.get(&e.id).unwrap_or_else(|| tp.ty(e))
    }
}

pub fn anormalize(tp: &TypedProgram, block: &Block, params: &[String]) -> AnfBody {
    let mut reserved: BTreeSet<String> = params.iter().cloned().collect();
    block.for_each_expr(&mut |e| {
        e.walk(&mut |x| {
            if let ExprKind::Var(n) = &x.kind {
                reserved.insert(n.clone());
            }
        })
    });
    collect_decl_names(block, &mut reserved);
    let mut n = Normalizer {
        tp,
        types: HashMap::new(),
        next_id: tp.next_node_id,
        reserved,
        declared: params.iter().cloned().collect(),
        scopes: vec![params.iter().map(|p| (p.clone(), p.clone())).collect()],
        next_temp: 0,
    };
    let block = n.block(block);
    AnfBody {
        block,
        types: n.types,
    }
}

fn collect_decl_names(b: &Block, out: &mut BTreeSet<String>) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::VarDecl { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                collect_decl_names(then_block, out);
                if let Some(e) = else_block {
                    collect_decl_names(e, out);
                }
            }
            _ => {}
        }
    }
}

struct Normalizer<'a> {
    tp: &'a TypedProgram,
    types: HashMap<NodeId, Type>,
    next_id: NodeId,
    reserved: BTreeSet<String>,
    declared: BTreeSet<String>,
    /// source name -> name in the output
    scopes: Vec<HashMap<String, String>>,
    next_temp: usize,
}

impl Normalizer<'_> {
    fn block(&mut self, b: &Block) -> Block {
        self.scopes.push(HashMap::new());
        let mut out = Vec::new();
        for s in &b.stmts {
            self.stmt(s, &mut out);
        }
        self.scopes.pop();
        Block {
            stmts: out,
            span: b.span.clone(),
        }
    }

    fn taken(&self, name: &str) -> bool {
        self.reserved.contains(name) || self.declared.contains(name)
    }

    fn fresh_temp(&mut self) -> String {
        loop {
            let name = format!("t{}", self.next_temp);
            self.next_temp += 1;
            if !self.taken(&name) {
                self.declared.insert(name.clone());
                return name;
            }
        }
    }

    fn declare(&mut self, name: &str) -> String {
        if name == "_" {
            return name.to_string();
        }
        let out = if self.declared.contains(name) {
            (1..)
                .map(|k| format!("{name}_{k}"))
                .find(|n| !self.taken(n))
                .expect("unbounded")
        } else {
            name.to_string()
        };
        self.declared.insert(out.clone());
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), out.clone());
        out
    }

    fn lookup(&self, name: &str) -> Option<&String> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    /// Applies the current renaming to free variables of `e`.
    fn rename(&self, e: &Expr) -> Expr {
        let mut e = e.clone();
        self.rename_in(&mut e, &mut Vec::new());
        e
    }

    fn rename_in(&self, e: &mut Expr, lambda_bound: &mut Vec<Vec<String>>) {
        match &mut e.kind {
            ExprKind::Var(n) => {
                if lambda_bound.iter().any(|b| b.contains(n)) {
                    return;
                }
                if let Some(r) = self.lookup(n) {
                    *n = r.clone();
                }
            }
            ExprKind::Lambda { params, body } => {
                lambda_bound.push(params.iter().map(|p| p.name.clone()).collect());
                self.rename_in(body, lambda_bound);
                lambda_bound.pop();
            }
            _ => e.for_each_child_mut(|c| self.rename_in(c, lambda_bound)),
        }
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<Stmt>) {
        let span = s.span.clone();
        match &s.kind {
            StmtKind::VarDecl { name, ghost, init } => {
                let init = self.lift_top(self.rename(init), *ghost, out);
                let name = self.declare(name);
                out.push(Stmt {
                    kind: StmtKind::VarDecl {
                        name,
                        ghost: *ghost,
                        init,
                    },
                    span,
                });
            }
            StmtKind::Expr(e) => {
                let init = self.lift_top(self.rename(e), false, out);
                out.push(Stmt {
                    kind: StmtKind::VarDecl {
                        name: "_".to_string(),
                        ghost: false,
                        init,
                    },
                    span,
                });
            }
            StmtKind::FieldAssign { field, value } => {
                let value = self.lift_full(self.rename(value), false, out);
                out.push(Stmt {
                    kind: StmtKind::FieldAssign {
                        field: field.clone(),
                        value,
                    },
                    span,
                });
            }
            StmtKind::Return(value) => {
                let value = value
                    .as_ref()
                    .map(|v| self.lift_full(self.rename(v), false, out));
                out.push(Stmt {
                    kind: StmtKind::Return(value),
                    span,
                });
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let cond = self.lift_full(self.rename(cond), false, out);
                let then_block = self.block(then_block);
                let else_block = else_block.as_ref().map(|b| self.block(b));
                out.push(Stmt {
                    kind: StmtKind::If {
                        cond,
                        then_block,
                        else_block,
                    },
                    span,
                });
            }
        }
    }

    /// Lifts calls nested inside `e` but keeps `e` itself if it is a call.
    fn lift_top(&mut self, mut e: Expr, ghost: bool, out: &mut Vec<Stmt>) -> Expr {
        if e.kind.is_call_like() {
            e.for_each_child_mut(|c| self.lift_in_place(c, ghost, out));
            e
        } else {
            self.lift_full(e, ghost, out)
        }
    }

    fn lift_full(&mut self, mut e: Expr, ghost: bool, out: &mut Vec<Stmt>) -> Expr {
        self.lift_in_place(&mut e, ghost, out);
        e
    }

    fn node(&mut self, ty: Type) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        self.types.insert(id, ty);
        id
    }

    fn negate(&mut self, e: Expr) -> Expr {
        Expr {
            id: self.node(Type::Bool),
            span: e.span.clone(),
            kind: ExprKind::Unary {
                op: UnOp::Not,
                operand: Box::new(e),
            },
        }
    }

    fn lift_in_place(&mut self, e: &mut Expr, ghost: bool, out: &mut Vec<Stmt>) {
        match &mut e.kind {
            ExprKind::Lambda { .. } => return,
            ExprKind::Binary { op, lhs, rhs }
                if matches!(op, BinOp::And | BinOp::Or | BinOp::Implies) =>
            {
                let op = *op;
                self.lift_in_place(lhs, ghost, out);
                let mut inner = Vec::new();
                self.lift_in_place(rhs, ghost, &mut inner);
                if !inner.is_empty() {
                    // the right operand only runs when the left one does not decide
                    let lhs = (**lhs).clone();
                    let cond = if op == BinOp::Or {
                        self.negate(lhs)
                    } else {
                        lhs
                    };
                    out.push(Stmt {
                        span: e.span.clone(),
                        kind: StmtKind::If {
                            cond,
                            then_block: Block {
                                stmts: inner,
                                span: e.span.clone(),
                            },
                            else_block: None,
                        },
                    });
                }
                return;
            }
            _ => {}
        }
        e.for_each_child_mut(|c| self.lift_in_place(c, ghost, out));
        if !e.kind.is_call_like() {
            return;
        }
        let ty = self
            .types
            .get(&e.id)
            .cloned()
            .unwrap_or_else(|| self.tp.ty(e).clone());
        let name = self.fresh_temp();
        let id = self.node(ty);
        let var = Expr {
            id,
            span: e.span.clone(),
            kind: ExprKind::Var(name.clone()),
        };
        let call = std::mem::replace(e, var);
        out.push(Stmt {
            span: call.span.clone(),
            kind: StmtKind::VarDecl {
                name,
                ghost,
                init: call,
            },
        });
    }
}
