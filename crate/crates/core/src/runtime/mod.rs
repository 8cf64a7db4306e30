//! Interpreter for typechecked programs. Execution is bounded by a budget of
//! call-frame entries, and contracts can optionally be checked on entry and
//! return.

mod erase;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::frontend::{
    BinOp, Block, CallableId, CallableKind, Decl, Expr, ExprKind, Resolution, StmtKind, Type,
    TypedProgram, UnOp,
};
use crate::span::SourceSpan;

pub use erase::{erase, erase_program, EraseError};

#[derive(Debug)]
pub struct Object {
    pub class: String,
    /// Filled during construction, read-only afterwards.
    pub fields: RefCell<BTreeMap<String, Value>>,
}

#[derive(Debug)]
pub struct Closure {
    pub lambda: CallableId,
    pub name: String,
    pub params: Vec<String>,
    pub body: Rc<Expr>,
    pub env: HashMap<String, Value>,
    pub this: Option<Value>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Object(Rc<Object>),
    Closure(Rc<Closure>),
    Unit,
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Unit, Value::Unit) => true,
            (Value::Object(a), Value::Object(b)) => Rc::ptr_eq(a, b),
            (Value::Closure(a), Value::Closure(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Object(o) => write!(f, "<{} object>", o.class),
            Value::Closure(c) => write!(f, "<closure {}>", c.name),
            Value::Unit => f.write_str("unit"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_i64(*i),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Unit => s.serialize_unit(),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fuel {
    pub budget: u64,
    pub consumed: u64,
}

impl Fuel {
    pub fn new(budget: u64) -> Fuel {
        Fuel {
            budget,
            consumed: 0,
        }
    }

    fn enter(&mut self) -> Result<(), Stop> {
        if self.consumed >= self.budget {
            return Err(Stop(Outcome::FuelExhausted {
                consumed: self.consumed,
            }));
        }
        self.consumed += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    Requires,
    Ensures,
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseKind::Requires => "requires",
            ClauseKind::Ensures => "ensures",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeErrorKind {
    UnboundEntry,
    ArityMismatch,
    /// An argument's type differs from the entry's parameter type.
    ArgumentType,
    IntegerOverflow,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::UnboundEntry => "unbound-entry",
            RuntimeErrorKind::ArityMismatch => "arity-mismatch",
            RuntimeErrorKind::ArgumentType => "argument-type",
            RuntimeErrorKind::IntegerOverflow => "integer-overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Returned(Value),
    ContractViolation {
        callable: String,
        clause: ClauseKind,
        index: usize,
        /// Source text of the violated clause.
        text: String,
        site: SourceSpan,
        /// The value being returned when an `ensures` clause failed.
        returned: Option<Value>,
    },
    FuelExhausted {
        consumed: u64,
    },
    RuntimeError {
        kind: RuntimeErrorKind,
        site: Option<SourceSpan>,
        message: String,
    },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Returned(v) => write!(f, "returned {v}"),
            Outcome::ContractViolation {
                callable,
                clause,
                text,
                site,
                returned,
                ..
            } => {
                write!(f, "{site}: in `{callable}`: {clause} {text} violated")?;
                if let Some(v) = returned {
                    write!(f, "; returned {v}")?;
                }
                Ok(())
            }
            Outcome::FuelExhausted { consumed } => {
                write!(f, "fuel exhausted after {consumed} call frames")
            }
            Outcome::RuntimeError {
                kind,
                site,
                message,
            } => match site {
                Some(s) => write!(f, "{s}: runtime error ({kind}): {message}"),
                None => write!(f, "runtime error ({kind}): {message}"),
            },
        }
    }
}

/// Early exit from evaluation carrying the final outcome.
#[derive(Debug)]
struct Stop(Outcome);

type Eval<T> = Result<T, Stop>;

fn runtime_error<T>(kind: RuntimeErrorKind, site: Option<&SourceSpan>, message: String) -> Eval<T> {
    Err(Stop(Outcome::RuntimeError {
        kind,
        site: site.cloned(),
        message,
    }))
}

/// Runs top-level function `entry` on `args`. `fuel` records how many call
/// frames were entered. With `check_contracts`, the entry's own `requires`
/// clauses are evaluated on entry and its `ensures` clauses on return.
pub fn eval(
    tp: &TypedProgram,
    entry: &str,
    args: &[Value],
    fuel: &mut Fuel,
    check_contracts: bool,
) -> Outcome {
    let Some(id) = tp.callables.iter().find_map(|c| match c.kind {
        CallableKind::Function { .. } if c.name == entry => Some(c.id),
        _ => None,
    }) else {
        return Outcome::RuntimeError {
            kind: RuntimeErrorKind::UnboundEntry,
            site: None,
            message: format!("no top-level function `{entry}`"),
        };
    };
    let params = &tp.callable(id).params;
    if params.len() != args.len() {
        return Outcome::RuntimeError {
            kind: RuntimeErrorKind::ArityMismatch,
            site: None,
            message: format!(
                "`{entry}` takes {} arguments, got {}",
                params.len(),
                args.len()
            ),
        };
    }
    for ((name, ty), a) in params.iter().zip(args) {
        let ok = matches!(
            (ty, a),
            (Type::Int, Value::Int(_)) | (Type::Bool, Value::Bool(_))
        );
        if !ok {
            return Outcome::RuntimeError {
                kind: RuntimeErrorKind::ArgumentType,
                site: None,
                message: format!("parameter `{name}` expects {ty}, got {a}"),
            };
        }
    }
    let mut m = Machine { tp, fuel };
    match m.call(id, None, args.to_vec(), check_contracts) {
        Ok(v) => Outcome::Returned(v),
        Err(Stop(o)) => o,
    }
}

struct Frame {
    locals: Vec<HashMap<String, Value>>,
    this: Option<Value>,
    result: Option<Value>,
}

impl Frame {
    fn new(this: Option<Value>, bindings: impl IntoIterator<Item = (String, Value)>) -> Frame {
        Frame {
            locals: vec![bindings.into_iter().collect()],
            this,
            result: None,
        }
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.locals.iter().rev().find_map(|s| s.get(name))
    }

    fn bind(&mut self, name: &str, v: Value) {
        if name != "_" {
            self.locals
                .last_mut()
                .expect("scope")
                .insert(name.to_string(), v);
        }
    }

    fn captured(&self) -> HashMap<String, Value> {
        let mut out = HashMap::new();
        for s in &self.locals {
            out.extend(s.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        out
    }
}

enum Flow {
    Normal,
    Return(Value),
}

struct Machine<'a> {
    tp: &'a TypedProgram,
    fuel: &'a mut Fuel,
}

impl Machine<'_> {
    /// Enters callable `id` with receiver `this`.
    fn call(
        &mut self,
        id: CallableId,
        this: Option<Value>,
        args: Vec<Value>,
        check: bool,
    ) -> Eval<Value> {
        stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || {
            self.fuel.enter()?;
            let tp = self.tp;
            let callable = tp.callable(id);
            let names: Vec<String> = callable.params.iter().map(|(n, _)| n.clone()).collect();
            let mut frame = Frame::new(this, names.into_iter().zip(args));
            let decl = tp.function_decl(id);
            if let (true, Some(f)) = (check, decl) {
                for (i, r) in f.requires.iter().enumerate() {
                    if !self.truth(r, &mut frame)? {
                        return Err(Stop(Outcome::ContractViolation {
                            callable: callable.name.clone(),
                            clause: ClauseKind::Requires,
                            index: i,
                            text: crate::frontend::expr_to_string(r),
                            site: r.span.clone(),
                            returned: None,
                        }));
                    }
                }
            }
            let body = decl
                .and_then(|f| f.body.as_ref())
                .expect("calls reach concrete callables only");
            let v = match self.block(body, &mut frame)? {
                Flow::Return(v) => v,
                Flow::Normal => Value::Unit,
            };
            if let (true, Some(f)) = (check, decl) {
                frame.result = Some(v.clone());
                for (i, e) in f.ensures.iter().enumerate() {
                    if !self.truth(e, &mut frame)? {
                        return Err(Stop(Outcome::ContractViolation {
                            callable: callable.name.clone(),
                            clause: ClauseKind::Ensures,
                            index: i,
                            text: crate::frontend::expr_to_string(e),
                            site: e.span.clone(),
                            returned: Some(v),
                        }));
                    }
                }
            }
            Ok(v)
        })
    }

    fn construct(&mut self, class: &str, args: Vec<Value>) -> Eval<Value> {
        self.fuel.enter()?;
        let tp = self.tp;
        let Some(cd) = tp.program.decls.iter().find_map(|d| match d {
            Decl::Class(c) if c.name == class => Some(c),
            _ => None,
        }) else {
            unreachable!("typechecked `new` of unknown class `{class}`")
        };
        let obj = Rc::new(Object {
            class: class.to_string(),
            fields: RefCell::new(BTreeMap::new()),
        });
        let this = Value::Object(obj.clone());
        for f in &cd.fields {
            if let Some(init) = &f.init {
                let mut frame = Frame::new(Some(this.clone()), []);
                let v = self.expr(init, &mut frame)?;
                obj.fields.borrow_mut().insert(f.name.clone(), v);
            }
        }
        if let Some(k) = &cd.constructor {
            let bindings = k.params.iter().map(|p| p.name.clone()).zip(args);
            let mut frame = Frame::new(Some(this.clone()), bindings);
            self.block(&k.body, &mut frame)?;
        }
        Ok(this)
    }

    fn block(&mut self, b: &Block, frame: &mut Frame) -> Eval<Flow> {
        frame.locals.push(HashMap::new());
        let out = self.stmts(b, frame);
        frame.locals.pop();
        out
    }

    fn stmts(&mut self, b: &Block, frame: &mut Frame) -> Eval<Flow> {
        for s in &b.stmts {
            match &s.kind {
                StmtKind::VarDecl { name, init, .. } => {
                    let v = self.expr(init, frame)?;
                    frame.bind(name, v);
                }
                StmtKind::Expr(e) => {
                    self.expr(e, frame)?;
                }
                StmtKind::FieldAssign { field, value } => {
                    let v = self.expr(value, frame)?;
                    let Some(Value::Object(o)) = &frame.this else {
                        unreachable!("field assignment outside a constructor")
                    };
                    o.fields.borrow_mut().insert(field.clone(), v);
                }
                StmtKind::Return(e) => {
                    let v = match e {
                        Some(e) => self.expr(e, frame)?,
                        None => Value::Unit,
                    };
                    return Ok(Flow::Return(v));
                }
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    let flow = if self.truth(cond, frame)? {
                        self.block(then_block, frame)?
                    } else if let Some(eb) = else_block {
                        self.block(eb, frame)?
                    } else {
                        Flow::Normal
                    };
                    if let Flow::Return(v) = flow {
                        return Ok(Flow::Return(v));
                    }
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn truth(&mut self, e: &Expr, frame: &mut Frame) -> Eval<bool> {
        match self.expr(e, frame)? {
            Value::Bool(b) => Ok(b),
            other => unreachable!("typechecked condition evaluated to {other}"),
        }
    }

    fn int(&mut self, e: &Expr, frame: &mut Frame) -> Eval<i64> {
        match self.expr(e, frame)? {
            Value::Int(i) => Ok(i),
            other => unreachable!("typechecked integer evaluated to {other}"),
        }
    }

    fn args(&mut self, args: &[Expr], frame: &mut Frame) -> Eval<Vec<Value>> {
        args.iter().map(|a| self.expr(a, frame)).collect()
    }

    fn expr(&mut self, e: &Expr, frame: &mut Frame) -> Eval<Value> {
        let overflow = |span: &SourceSpan| {
            runtime_error(
                RuntimeErrorKind::IntegerOverflow,
                Some(span),
                "64-bit integer overflow".into(),
            )
        };
        Ok(match &e.kind {
            ExprKind::Int(i) => Value::Int(*i),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Var(n) => frame
                .get(n)
                .cloned()
                .unwrap_or_else(|| unreachable!("typechecked variable `{n}` is unbound")),
            ExprKind::Result => frame.result.clone().expect("`result` outside ensures"),
            ExprKind::This => frame.this.clone().expect("`this` outside a class"),
            ExprKind::Unary { op, operand } => match op {
                UnOp::Not => Value::Bool(!self.truth(operand, frame)?),
                UnOp::Neg => match self.int(operand, frame)?.checked_neg() {
                    Some(v) => Value::Int(v),
                    None => return overflow(&e.span),
                },
            },
            ExprKind::Binary { op, lhs, rhs } => match op {
                BinOp::And => Value::Bool(self.truth(lhs, frame)? && self.truth(rhs, frame)?),
                BinOp::Or => Value::Bool(self.truth(lhs, frame)? || self.truth(rhs, frame)?),
                BinOp::Implies => Value::Bool(!self.truth(lhs, frame)? || self.truth(rhs, frame)?),
                BinOp::Eq | BinOp::Ne => {
                    let l = self.expr(lhs, frame)?;
                    let r = self.expr(rhs, frame)?;
                    Value::Bool((l == r) == (*op == BinOp::Eq))
                }
                _ => {
                    let l = self.int(lhs, frame)?;
                    let r = self.int(rhs, frame)?;
                    let arith = |v: Option<i64>| v.map(Value::Int);
                    let v = match op {
                        BinOp::Add => arith(l.checked_add(r)),
                        BinOp::Sub => arith(l.checked_sub(r)),
                        BinOp::Mul => arith(l.checked_mul(r)),
                        BinOp::Lt => Some(Value::Bool(l < r)),
                        BinOp::Le => Some(Value::Bool(l <= r)),
                        BinOp::Gt => Some(Value::Bool(l > r)),
                        BinOp::Ge => Some(Value::Bool(l >= r)),
                        _ => unreachable!(),
                    };
                    match v {
                        Some(v) => v,
                        None => return overflow(&e.span),
                    }
                }
            },
            ExprKind::Call { args, .. } => {
                let Some(Resolution::Callable(id)) = self.tp.resolution.get(&e.id) else {
                    unreachable!("unresolved call")
                };
                let args = self.args(args, frame)?;
                self.call(*id, None, args, false)?
            }
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } => {
                let recv = self.expr(receiver, frame)?;
                let args = self.args(args, frame)?;
                let Value::Object(o) = &recv else {
                    unreachable!("method call on {recv}")
                };
                let id = self
                    .tp
                    .method_of(&o.class, method)
                    .unwrap_or_else(|| unreachable!("`{}` lacks `{method}`", o.class));
                self.call(id, Some(recv.clone()), args, false)?
            }
            ExprKind::Field { receiver, field } => {
                let recv = self.expr(receiver, frame)?;
                let Value::Object(o) = &recv else {
                    unreachable!("field read on {recv}")
                };
                let v = o.fields.borrow().get(field).cloned();
                v.unwrap_or_else(|| unreachable!("field `{field}` read before assignment"))
            }
            ExprKind::Invoke { callee, args } => {
                let f = self.expr(callee, frame)?;
                let args = self.args(args, frame)?;
                let Value::Closure(c) = f else {
                    unreachable!("invoking {f}")
                };
                stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || {
                    self.fuel.enter()?;
                    let mut env = c.env.clone();
                    env.extend(c.params.iter().cloned().zip(args));
                    let mut inner = Frame::new(c.this.clone(), env);
                    self.expr(&c.body, &mut inner)
                })?
            }
            ExprKind::Lambda { params, body } => {
                let lambda = *self
                    .tp
                    .lambdas
                    .get(&e.id)
                    .expect("lambda registered by the typechecker");
                Value::Closure(Rc::new(Closure {
                    lambda,
                    name: self.tp.callable(lambda).name.clone(),
                    params: params.iter().map(|p| p.name.clone()).collect(),
                    body: Rc::new((**body).clone()),
                    env: frame.captured(),
                    this: frame.this.clone(),
                }))
            }
            ExprKind::New { class, args } => {
                let args = self.args(args, frame)?;
                stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || self.construct(class, args))?
            }
        })
    }
}

#[cfg(test)]
mod tests;
