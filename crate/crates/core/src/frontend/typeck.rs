//! Name resolution, typing and well-formedness checks.
//!
//! Two passes: the first enumerates every callable (functions, methods,
//! constructors, field initializers and lambdas, in source order) and resolves
//! declared signatures; the second types every body. Calls through
//! function-valued locals and fields are rewritten to `Invoke` nodes here.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::{
    Callable, CallableId, CallableKind, Resolution, Type, TypeError, TypeErrorKind, TypedProgram,
};
use crate::span::SourceSpan;

pub fn typecheck(program: &Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut prog = program.clone();
    let mut ck = Checker::new(&prog);
    ck.declare(&prog);
    if ck.errors.is_empty() {
        ck.check_program(&mut prog);
    }
    if !ck.errors.is_empty() {
        return Err(ck.errors);
    }
    Ok(TypedProgram {
        program: prog,
        types: ck.types,
        resolution: ck.resolution,
        callables: ck.callables,
        lambdas: ck.lambdas,
        next_node_id: ck.next_id,
    })
}

struct FieldInfo {
    name: String,
    ty: Type,
    has_init: bool,
}

struct ClassInfo {
    fields: Vec<FieldInfo>,
    methods: HashMap<String, CallableId>,
    ctor: CallableId,
    implements: Option<String>,
}

struct TraitInfo {
    methods: HashMap<String, CallableId>,
}

#[derive(Clone)]
struct Local {
    ty: Type,
    ghost: bool,
    is_param: bool,
}

#[derive(Clone)]
enum Ret {
    Value(Type),
    Void,
}

#[derive(Clone)]
struct Ctx {
    this_class: Option<String>,
    in_ctor: bool,
    ret: Ret,
    /// `Some(ret)` while checking an `ensures` clause.
    result: Option<Option<Type>>,
    contract: bool,
    ghost: bool,
}

impl Ctx {
    fn plain(this_class: Option<String>, ret: Ret) -> Self {
        Ctx {
            this_class,
            in_ctor: false,
            ret,
            result: None,
            contract: false,
            ghost: false,
        }
    }
}

struct Checker {
    errors: Vec<TypeError>,
    types: HashMap<NodeId, Type>,
    resolution: HashMap<NodeId, Resolution>,
    callables: Vec<Callable>,
    lambdas: HashMap<NodeId, CallableId>,
    functions: HashMap<String, CallableId>,
    classes: HashMap<String, ClassInfo>,
    traits: HashMap<String, TraitInfo>,
    next_id: NodeId,
    scopes: Vec<HashMap<String, Local>>,
    ctor_assigned: Option<BTreeSet<String>>,
    lambda_ordinal: usize,
}

impl Checker {
    fn new(prog: &Program) -> Self {
        Checker {
            errors: Vec::new(),
            types: HashMap::new(),
            resolution: HashMap::new(),
            callables: Vec::new(),
            lambdas: HashMap::new(),
            functions: HashMap::new(),
            classes: HashMap::new(),
            traits: HashMap::new(),
            next_id: prog.next_node_id(),
            scopes: Vec::new(),
            ctor_assigned: None,
            lambda_ordinal: 0,
        }
    }

    fn err(&mut self, kind: TypeErrorKind, span: &SourceSpan, message: impl Into<String>) {
        self.errors.push(TypeError {
            kind,
            span: span.clone(),
            message: message.into(),
        });
    }

    // ---------------------------------------------------------------- pass 1

    fn resolve_type(&mut self, t: &TypeExpr, span: &SourceSpan, prog: &Program) -> Type {
        match t {
            TypeExpr::Named(n) if prog.find_class(n).is_none() && prog.find_trait(n).is_none() => {
                self.err(
                    TypeErrorKind::UnresolvedName,
                    span,
                    format!("unknown type `{n}`"),
                );
            }
            TypeExpr::Arrow(ps, r) => {
                for p in ps {
                    self.resolve_type(p, span, prog);
                }
                self.resolve_type(r, span, prog);
            }
            _ => {}
        }
        Type::from_type_expr(t)
    }

    fn resolve_params(&mut self, params: &[Param], prog: &Program) -> Vec<(String, Type)> {
        let mut seen = BTreeSet::new();
        params
            .iter()
            .map(|p| {
                if p.name != "_" && !seen.insert(p.name.clone()) {
                    self.err(
                        TypeErrorKind::DuplicateName,
                        &p.span,
                        format!("duplicate parameter `{}`", p.name),
                    );
                }
                (p.name.clone(), self.resolve_type(&p.ty, &p.span, prog))
            })
            .collect()
    }

    fn push_callable(
        &mut self,
        name: String,
        kind: CallableKind,
        params: Vec<(String, Type)>,
        ret: Option<Type>,
        span: SourceSpan,
    ) -> CallableId {
        let id = CallableId(self.callables.len() as u32);
        self.callables.push(Callable {
            id,
            name,
            kind,
            params,
            ret,
            span,
        });
        id
    }

    fn declare_lambdas_in(&mut self, e: &Expr, parent: CallableId, prog: &Program) {
        if let ExprKind::Lambda { params, body } = &e.kind {
            let params = self.resolve_params(params, prog);
            let ordinal = self.lambda_ordinal;
            self.lambda_ordinal += 1;
            let id = self.push_callable(
                format!("lambda#{ordinal}"),
                CallableKind::Lambda {
                    expr: e.id,
                    ordinal,
                    parent,
                },
                params,
                None,
                e.span.clone(),
            );
            self.lambdas.insert(e.id, id);
            self.declare_lambdas_in(body, id, prog);
            return;
        }
        e.for_each_child(|c| self.declare_lambdas_in(c, parent, prog));
    }

    fn declare_function(
        &mut self,
        f: &FunctionDecl,
        name: String,
        kind: CallableKind,
        prog: &Program,
    ) -> CallableId {
        let params = self.resolve_params(&f.params, prog);
        let ret = f
            .return_type
            .as_ref()
            .map(|t| self.resolve_type(t, &f.span, prog));
        let id = self.push_callable(name, kind, params, ret, f.span.clone());
        if let Some(body) = &f.body {
            body.for_each_expr(&mut |e| self.declare_lambdas_in(e, id, prog));
        }
        for e in f.requires.iter().chain(&f.ensures).chain(&f.decreases) {
            self.declare_lambdas_in(e, id, prog);
        }
        id
    }

    fn declare(&mut self, prog: &Program) {
        let mut top = BTreeSet::new();
        for d in &prog.decls {
            if !top.insert(d.name().to_string()) {
                self.err(
                    TypeErrorKind::DuplicateName,
                    d.span(),
                    format!("duplicate top-level declaration `{}`", d.name()),
                );
            }
        }
        for (di, d) in prog.decls.iter().enumerate() {
            match d {
                Decl::Function(f) => {
                    let id = self.declare_function(
                        f,
                        f.name.clone(),
                        CallableKind::Function { decl: di },
                        prog,
                    );
                    self.functions.entry(f.name.clone()).or_insert(id);
                }
                Decl::Trait(t) => {
                    let mut methods = HashMap::new();
                    for (mi, m) in t.methods.iter().enumerate() {
                        let id = self.declare_function(
                            m,
                            format!("{}.{}", t.name, m.name),
                            CallableKind::Method {
                                decl: di,
                                index: mi,
                                is_abstract: true,
                            },
                            prog,
                        );
                        if methods.insert(m.name.clone(), id).is_some() {
                            self.err(
                                TypeErrorKind::DuplicateName,
                                &m.span,
                                format!("duplicate method `{}`", m.name),
                            );
                        }
                    }
                    self.traits.insert(t.name.clone(), TraitInfo { methods });
                }
                Decl::Class(c) => self.declare_class(di, c, prog),
            }
        }
    }

    fn declare_class(&mut self, di: usize, c: &ClassDecl, prog: &Program) {
        let mut members = BTreeSet::new();
        let mut fields = Vec::new();
        for (fi, field) in c.fields.iter().enumerate() {
            if !members.insert(field.name.clone()) {
                self.err(
                    TypeErrorKind::DuplicateName,
                    &field.span,
                    format!("duplicate member `{}`", field.name),
                );
            }
            let ty = self.resolve_type(&field.ty, &field.span, prog);
            if let Some(init) = &field.init {
                let id = self.push_callable(
                    format!("{}.{}.init", c.name, field.name),
                    CallableKind::FieldInit {
                        decl: di,
                        field: fi,
                    },
                    Vec::new(),
                    Some(ty.clone()),
                    field.span.clone(),
                );
                self.declare_lambdas_in(init, id, prog);
            }
            fields.push(FieldInfo {
                name: field.name.clone(),
                ty,
                has_init: field.init.is_some(),
            });
        }
        let ctor = match &c.constructor {
            Some(k) => {
                let params = self.resolve_params(&k.params, prog);
                let id = self.push_callable(
                    format!("{}.constructor", c.name),
                    CallableKind::Constructor {
                        decl: di,
                        implicit: false,
                    },
                    params,
                    Some(Type::Named(c.name.clone())),
                    k.span.clone(),
                );
                k.body
                    .for_each_expr(&mut |e| self.declare_lambdas_in(e, id, prog));
                id
            }
            None => self.push_callable(
                format!("{}.constructor", c.name),
                CallableKind::Constructor {
                    decl: di,
                    implicit: true,
                },
                Vec::new(),
                Some(Type::Named(c.name.clone())),
                c.span.clone(),
            ),
        };
        let mut methods = HashMap::new();
        for (mi, m) in c.methods.iter().enumerate() {
            if !members.insert(m.name.clone()) {
                self.err(
                    TypeErrorKind::DuplicateName,
                    &m.span,
                    format!("duplicate member `{}`", m.name),
                );
            }
            let id = self.declare_function(
                m,
                format!("{}.{}", c.name, m.name),
                CallableKind::Method {
                    decl: di,
                    index: mi,
                    is_abstract: false,
                },
                prog,
            );
            methods.insert(m.name.clone(), id);
        }
        if let Some(t) = &c.implements {
            if prog.find_trait(t).is_none() {
                self.err(
                    TypeErrorKind::UnresolvedName,
                    &c.span,
                    format!("unknown trait `{t}`"),
                );
            }
        }
        self.classes.insert(
            c.name.clone(),
            ClassInfo {
                fields,
                methods,
                ctor,
                implements: c.implements.clone(),
            },
        );
    }

    // ---------------------------------------------------------------- pass 2

    fn check_program(&mut self, prog: &mut Program) {
        for d in prog.decls.iter_mut() {
            match d {
                Decl::Function(f) => {
                    let id = self.functions[&f.name];
                    self.check_function(f, id, None);
                }
                Decl::Trait(t) => {
                    for m in t.methods.iter_mut() {
                        let id = self.traits[&t.name].methods[&m.name];
                        self.check_function(m, id, None);
                    }
                }
                Decl::Class(c) => self.check_class(c),
            }
        }
    }

    fn subtype(&self, a: &Type, b: &Type) -> bool {
        if a == b {
            return true;
        }
        match (a, b) {
            (Type::Named(c), Type::Named(t)) => self
                .classes
                .get(c)
                .is_some_and(|ci| ci.implements.as_deref() == Some(t.as_str())),
            _ => false,
        }
    }

    fn with_params<R>(&mut self, params: &[(String, Type)], f: impl FnOnce(&mut Self) -> R) -> R {
        let saved = std::mem::take(&mut self.scopes);
        let mut scope = HashMap::new();
        for (n, t) in params {
            if n != "_" {
                scope.insert(
                    n.clone(),
                    Local {
                        ty: t.clone(),
                        ghost: false,
                        is_param: true,
                    },
                );
            }
        }
        self.scopes.push(scope);
        let r = f(self);
        self.scopes = saved;
        r
    }

    fn check_function(&mut self, f: &mut FunctionDecl, id: CallableId, this: Option<String>) {
        let params = self.callables[id.0 as usize].params.clone();
        let ret_ty = self.callables[id.0 as usize].ret.clone();
        let ret = ret_ty.clone().map_or(Ret::Void, Ret::Value);
        self.with_params(&params, |ck| {
            let mut cx = Ctx::plain(this.clone(), ret.clone());
            cx.contract = true;
            cx.ghost = true;
            for r in f.requires.iter_mut() {
                ck.expect_type(r, &Type::Bool, &cx, "requires clause");
            }
            cx.result = Some(ret_ty.clone());
            for e in f.ensures.iter_mut() {
                ck.expect_type(e, &Type::Bool, &cx, "ensures clause");
            }
            cx.result = None;
            if let Some(d) = f.decreases.as_mut() {
                ck.expect_type(d, &Type::Int, &cx, "decreases clause");
            }
            if let Some(body) = f.body.as_mut() {
                let cx = Ctx::plain(this.clone(), ret.clone());
                let returns = ck.block(body, &cx);
                if ret_ty.is_some() && !returns {
                    ck.err(
                        TypeErrorKind::MissingReturn,
                        &f.span,
                        format!("`{}` does not return a value on every path", f.name),
                    );
                }
            }
        });
    }

    fn check_class(&mut self, c: &mut ClassDecl) {
        let class_name = c.name.clone();
        for field in c.fields.iter_mut() {
            let fty = Type::from_type_expr(&field.ty);
            if let Some(init) = field.init.as_mut() {
                let saved = std::mem::take(&mut self.scopes);
                let cx = Ctx::plain(None, Ret::Void);
                if let Some(t) = self.expr(init, &cx) {
                    if !self.subtype(&t, &fty) {
                        self.err(
                            TypeErrorKind::TypeMismatch,
                            &init.span,
                            format!(
                                "initializer of `{}` has type {t}, expected {fty}",
                                field.name
                            ),
                        );
                    }
                }
                self.scopes = saved;
            }
        }
        let ctor_id = self.classes[&class_name].ctor;
        match c.constructor.as_mut() {
            Some(k) => {
                let params = self.callables[ctor_id.0 as usize].params.clone();
                self.ctor_assigned = Some(BTreeSet::new());
                self.with_params(&params, |ck| {
                    let mut cx = Ctx::plain(Some(class_name.clone()), Ret::Void);
                    cx.in_ctor = true;
                    let returns = ck.block(&mut k.body, &cx);
                    if !returns {
                        let end = k.body.span.clone();
                        ck.check_all_assigned(&class_name, &end);
                    }
                });
                self.ctor_assigned = None;
            }
            None => {
                for field in &c.fields {
                    if field.init.is_none() {
                        self.err(
                            TypeErrorKind::FieldUnassigned,
                            &field.span,
                            format!(
                                "field `{}` has no initializer and `{class_name}` has no constructor",
                                field.name
                            ),
                        );
                    }
                }
            }
        }
        for m in c.methods.iter_mut() {
            let id = self.classes[&class_name].methods[&m.name];
            self.check_function(m, id, Some(class_name.clone()));
        }
        if let Some(t) = c.implements.clone() {
            self.check_implements(c, &t);
        }
    }

    fn check_implements(&mut self, c: &ClassDecl, trait_name: &str) {
        let Some(ti) = self.traits.get(trait_name) else {
            return;
        };
        let mut wanted: Vec<(String, CallableId)> =
            ti.methods.iter().map(|(n, id)| (n.clone(), *id)).collect();
        wanted.sort_by_key(|(_, id)| *id);
        for (name, tid) in wanted {
            let tsig = self.callables[tid.0 as usize].signature();
            match self.classes[&c.name].methods.get(&name) {
                None => self.err(
                    TypeErrorKind::UnresolvedName,
                    &c.span,
                    format!(
                        "class `{}` does not implement `{trait_name}.{name}`",
                        c.name
                    ),
                ),
                Some(cid) => {
                    let csig = self.callables[cid.0 as usize].signature();
                    if csig != tsig {
                        let span = self.callables[cid.0 as usize].span.clone();
                        self.err(
                            TypeErrorKind::TypeMismatch,
                            &span,
                            format!(
                                "`{}.{name}` has signature {csig}, but `{trait_name}.{name}` declares {tsig}",
                                c.name
                            ),
                        );
                    }
                }
            }
        }
    }

    fn check_all_assigned(&mut self, class: &str, span: &SourceSpan) {
        let assigned = self.ctor_assigned.clone().unwrap_or_default();
        let missing: Vec<String> = self.classes[class]
            .fields
            .iter()
            .filter(|f| !f.has_init && !assigned.contains(&f.name))
            .map(|f| f.name.clone())
            .collect();
        for name in missing {
            self.err(
                TypeErrorKind::FieldUnassigned,
                span,
                format!("field `{name}` is not assigned on every path of the constructor"),
            );
        }
    }

    fn lookup(&self, name: &str) -> Option<&Local> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn block(&mut self, b: &mut Block, cx: &Ctx) -> bool {
        self.scopes.push(HashMap::new());
        let mut returns = false;
        for s in b.stmts.iter_mut() {
            if self.stmt(s, cx) {
                returns = true;
            }
        }
        self.scopes.pop();
        returns
    }

    /// Returns true if every path through `s` ends in a `return`.
    fn stmt(&mut self, s: &mut Stmt, cx: &Ctx) -> bool {
        match &mut s.kind {
            StmtKind::VarDecl { name, ghost, init } => {
                let mut icx = cx.clone();
                icx.ghost = cx.ghost || *ghost;
                if let Some(t) = self.expr(init, &icx) {
                    if t == Type::Unit && name != "_" {
                        self.err(
                            TypeErrorKind::TypeMismatch,
                            &init.span,
                            format!("cannot bind `{name}` to a call without a result"),
                        );
                    }
                    if name != "_" {
                        self.scopes.last_mut().expect("scope").insert(
                            name.clone(),
                            Local {
                                ty: t,
                                ghost: icx.ghost,
                                is_param: false,
                            },
                        );
                    }
                }
                false
            }
            StmtKind::FieldAssign { field, value } => {
                let vt = self.expr(value, cx);
                let Some(class) = cx.this_class.clone().filter(|_| cx.in_ctor) else {
                    self.err(
                        TypeErrorKind::FieldUnassigned,
                        &s.span,
                        "field assignment outside a constructor",
                    );
                    return false;
                };
                let info = self.classes[&class]
                    .fields
                    .iter()
                    .find(|f| &f.name == field)
                    .map(|f| (f.ty.clone(), f.has_init));
                let Some((fty, has_init)) = info else {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &s.span,
                        format!("class `{class}` has no field `{field}`"),
                    );
                    return false;
                };
                if has_init {
                    self.err(
                        TypeErrorKind::FieldUnassigned,
                        &s.span,
                        format!("field `{field}` is already initialized by its declaration"),
                    );
                } else if let Some(assigned) = self.ctor_assigned.as_mut() {
                    if !assigned.insert(field.clone()) {
                        self.err(
                            TypeErrorKind::FieldUnassigned,
                            &s.span,
                            format!("field `{field}` is assigned more than once"),
                        );
                    }
                }
                if let Some(vt) = vt {
                    if !self.subtype(&vt, &fty) {
                        self.err(
                            TypeErrorKind::TypeMismatch,
                            &value.span,
                            format!("cannot assign {vt} to field `{field}` of type {fty}"),
                        );
                    }
                }
                false
            }
            StmtKind::Return(value) => {
                match (&cx.ret, value) {
                    (Ret::Value(rt), Some(e)) => {
                        let rt = rt.clone();
                        if let Some(t) = self.expr(e, cx) {
                            if !self.subtype(&t, &rt) {
                                self.err(
                                    TypeErrorKind::TypeMismatch,
                                    &e.span,
                                    format!("returning {t}, expected {rt}"),
                                );
                            }
                        }
                    }
                    (Ret::Value(rt), None) => {
                        let msg = format!("missing return value of type {rt}");
                        self.err(TypeErrorKind::TypeMismatch, &s.span, msg);
                    }
                    (Ret::Void, Some(e)) => {
                        self.expr(e, cx);
                        self.err(
                            TypeErrorKind::TypeMismatch,
                            &e.span,
                            "returning a value from a callable without a return type",
                        );
                    }
                    (Ret::Void, None) => {}
                }
                if cx.in_ctor {
                    if let Some(class) = cx.this_class.clone() {
                        self.check_all_assigned(&class, &s.span);
                    }
                }
                true
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expect_type(cond, &Type::Bool, cx, "condition");
                let before = self.ctor_assigned.clone();
                let t_ret = self.block(then_block, cx);
                let t_assigned = std::mem::replace(&mut self.ctor_assigned, before);
                let e_ret = match else_block {
                    Some(b) => self.block(b, cx),
                    None => false,
                };
                let e_assigned = self.ctor_assigned.take();
                self.ctor_assigned = match (t_ret, e_ret, t_assigned, e_assigned) {
                    (true, false, _, e) => e,
                    (false, true, t, _) => t,
                    (_, _, Some(t), Some(e)) => {
                        for f in t.symmetric_difference(&e) {
                            self.err(
                                TypeErrorKind::FieldUnassigned,
                                &s.span,
                                format!("field `{f}` is assigned on only some paths"),
                            );
                        }
                        Some(t.union(&e).cloned().collect())
                    }
                    (_, _, t, _) => t,
                };
                t_ret && e_ret
            }
            StmtKind::Expr(e) => {
                self.expr(e, cx);
                false
            }
        }
    }

    fn expect_type(&mut self, e: &mut Expr, want: &Type, cx: &Ctx, what: &str) {
        if let Some(t) = self.expr(e, cx) {
            if !self.subtype(&t, want) {
                self.err(
                    TypeErrorKind::TypeMismatch,
                    &e.span,
                    format!("{what} has type {t}, expected {want}"),
                );
            }
        }
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn expr(&mut self, e: &mut Expr, cx: &Ctx) -> Option<Type> {
        let t = stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner(e, cx))?;
        self.types.insert(e.id, t.clone());
        Some(t)
    }

    fn check_args(
        &mut self,
        args: &mut [Expr],
        params: &[(String, Type)],
        span: &SourceSpan,
        cx: &Ctx,
        what: &str,
    ) {
        let mut arg_types = Vec::new();
        for a in args.iter_mut() {
            arg_types.push(self.expr(a, cx));
        }
        if args.len() != params.len() {
            self.err(
                TypeErrorKind::TypeMismatch,
                span,
                format!(
                    "{what} expects {} argument(s), found {}",
                    params.len(),
                    args.len()
                ),
            );
            return;
        }
        for ((a, t), (pname, pt)) in args.iter().zip(arg_types).zip(params) {
            if let Some(t) = t {
                if !self.subtype(&t, pt) {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &a.span,
                        format!("argument `{pname}` of {what} has type {t}, expected {pt}"),
                    );
                }
            }
        }
    }

    fn expr_inner(&mut self, e: &mut Expr, cx: &Ctx) -> Option<Type> {
        if cx.contract {
            let forbidden = match &e.kind {
                ExprKind::Call { .. } | ExprKind::MethodCall { .. } | ExprKind::Invoke { .. } => {
                    Some("calls")
                }
                ExprKind::New { .. } => Some("object creation"),
                ExprKind::Lambda { .. } => Some("lambdas"),
                ExprKind::Field { .. } | ExprKind::This => Some("object access"),
                _ => None,
            };
            if let Some(what) = forbidden {
                self.err(
                    TypeErrorKind::ImpureContract,
                    &e.span,
                    format!("contracts may not contain {what}"),
                );
                return None;
            }
        }
        let span = e.span.clone();
        let id = e.id;
        match &mut e.kind {
            ExprKind::Int(_) => Some(Type::Int),
            ExprKind::Bool(_) => Some(Type::Bool),
            ExprKind::Var(name) => {
                if name == "_" {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        "`_` can be assigned but never read",
                    );
                    return None;
                }
                let Some(local) = self.lookup(name).cloned() else {
                    let msg = if self.functions.contains_key(name.as_str()) {
                        format!("function `{name}` cannot be used as a value")
                    } else {
                        format!("unresolved name `{name}`")
                    };
                    self.err(TypeErrorKind::UnresolvedName, &span, msg);
                    return None;
                };
                if local.ghost && !cx.ghost {
                    self.err(
                        TypeErrorKind::GhostMisuse,
                        &span,
                        format!("ghost variable `{name}` read from non-ghost code"),
                    );
                }
                let res = if local.is_param {
                    Resolution::Param(name.clone())
                } else {
                    Resolution::Local(name.clone())
                };
                self.resolution.insert(id, res);
                Some(local.ty)
            }
            ExprKind::Result => match &cx.result {
                Some(Some(t)) => Some(t.clone()),
                Some(None) => {
                    self.err(
                        TypeErrorKind::ResultMisuse,
                        &span,
                        "`result` used in a callable without a return type",
                    );
                    None
                }
                None => {
                    self.err(
                        TypeErrorKind::ResultMisuse,
                        &span,
                        "`result` may only appear in ensures clauses",
                    );
                    None
                }
            },
            ExprKind::This => match &cx.this_class {
                None => {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        "`this` used outside a method or constructor",
                    );
                    None
                }
                Some(c) => {
                    if cx.in_ctor {
                        self.err(
                            TypeErrorKind::FieldUnassigned,
                            &span,
                            "`this` escapes the constructor before construction completes",
                        );
                    }
                    Some(Type::Named(c.clone()))
                }
            },
            ExprKind::Binary { op, lhs, rhs } => {
                let op = *op;
                let lt = self.expr(lhs, cx);
                let rt = self.expr(rhs, cx);
                let (lt, rt) = (lt?, rt?);
                let ok = |want: &Type| &lt == want && &rt == want;
                let result = match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => ok(&Type::Int).then_some(Type::Int),
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        ok(&Type::Int).then_some(Type::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => (lt == rt && lt.is_scalar()).then_some(Type::Bool),
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        ok(&Type::Bool).then_some(Type::Bool)
                    }
                };
                let Some(result) = result else {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &span,
                        format!(
                            "operator `{}` cannot be applied to {lt} and {rt}",
                            op.symbol()
                        ),
                    );
                    return None;
                };
                if op == BinOp::Mul && !is_int_literal(lhs) && !is_int_literal(rhs) {
                    self.err(
                        TypeErrorKind::NonlinearMultiplication,
                        &span,
                        "`*` needs an integer literal operand",
                    );
                }
                Some(result)
            }
            ExprKind::Unary { op, operand } => {
                let want = match op {
                    UnOp::Not => Type::Bool,
                    UnOp::Neg => Type::Int,
                };
                let t = self.expr(operand, cx)?;
                if t != want {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &span,
                        format!("operator `{}` cannot be applied to {t}", op.symbol()),
                    );
                    return None;
                }
                Some(want)
            }
            ExprKind::Call { callee, args } => {
                if let Some(local) = self.lookup(callee) {
                    if matches!(local.ty, Type::Arrow(..)) {
                        let callee_expr = Expr {
                            id: self.fresh_id(),
                            span: span.clone(),
                            kind: ExprKind::Var(callee.clone()),
                        };
                        let args = std::mem::take(args);
                        e.kind = ExprKind::Invoke {
                            callee: Box::new(callee_expr),
                            args,
                        };
                        return self.expr_inner(e, cx);
                    }
                    let msg = format!("`{callee}` is a {} value, not a function", local.ty);
                    self.err(TypeErrorKind::TypeMismatch, &span, msg);
                    return None;
                }
                let Some(&fid) = self.functions.get(callee.as_str()) else {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        format!("unresolved function `{callee}`"),
                    );
                    return None;
                };
                let params = self.callables[fid.0 as usize].params.clone();
                let what = format!("`{callee}`");
                self.check_args(args, &params, &span, cx, &what);
                self.resolution.insert(id, Resolution::Callable(fid));
                Some(
                    self.callables[fid.0 as usize]
                        .ret
                        .clone()
                        .unwrap_or(Type::Unit),
                )
            }
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } => {
                let rt = self.expr(receiver, cx)?;
                let Type::Named(owner) = &rt else {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &receiver.span,
                        format!("cannot call method `{method}` on {rt}"),
                    );
                    return None;
                };
                let target = if let Some(ci) = self.classes.get(owner) {
                    match ci.methods.get(method.as_str()) {
                        Some(m) => Some(*m),
                        None => {
                            let field_is_fn = ci
                                .fields
                                .iter()
                                .any(|f| &f.name == method && matches!(f.ty, Type::Arrow(..)));
                            if field_is_fn {
                                let recv = std::mem::replace(
                                    receiver.as_mut(),
                                    Expr {
                                        id: 0,
                                        span: SourceSpan::dummy(),
                                        kind: ExprKind::Bool(false),
                                    },
                                );
                                let field_expr = Expr {
                                    id: self.fresh_id(),
                                    span: recv.span.clone(),
                                    kind: ExprKind::Field {
                                        receiver: Box::new(recv),
                                        field: method.clone(),
                                    },
                                };
                                let args = std::mem::take(args);
                                e.kind = ExprKind::Invoke {
                                    callee: Box::new(field_expr),
                                    args,
                                };
                                // receiver was already typed; re-checking is idempotent
                                return self.expr_inner(e, cx);
                            }
                            None
                        }
                    }
                } else {
                    self.traits
                        .get(owner)
                        .and_then(|ti| ti.methods.get(method.as_str()).copied())
                };
                let Some(mid) = target else {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        format!("`{owner}` has no method `{method}`"),
                    );
                    return None;
                };
                let params = self.callables[mid.0 as usize].params.clone();
                let what = format!("`{owner}.{method}`");
                self.check_args(args, &params, &span, cx, &what);
                self.resolution.insert(id, Resolution::Callable(mid));
                Some(
                    self.callables[mid.0 as usize]
                        .ret
                        .clone()
                        .unwrap_or(Type::Unit),
                )
            }
            ExprKind::Field { receiver, field } => {
                let rt = if cx.in_ctor && matches!(receiver.kind, ExprKind::This) {
                    let class = cx.this_class.clone()?;
                    let initialized = self.classes[&class]
                        .fields
                        .iter()
                        .any(|f| &f.name == field && f.has_init);
                    let assigned = self
                        .ctor_assigned
                        .as_ref()
                        .is_some_and(|a| a.contains(field.as_str()));
                    if !initialized && !assigned {
                        self.err(
                            TypeErrorKind::FieldUnassigned,
                            &span,
                            format!("field `{field}` read before it is assigned"),
                        );
                    }
                    let t = Type::Named(class);
                    self.types.insert(receiver.id, t.clone());
                    t
                } else {
                    self.expr(receiver, cx)?
                };
                let Type::Named(class) = &rt else {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &receiver.span,
                        format!("cannot access field `{field}` on {rt}"),
                    );
                    return None;
                };
                let fty = self.classes.get(class).and_then(|ci| {
                    ci.fields
                        .iter()
                        .find(|f| &f.name == field)
                        .map(|f| f.ty.clone())
                });
                let Some(fty) = fty else {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        format!("`{class}` has no field `{field}`"),
                    );
                    return None;
                };
                self.resolution.insert(
                    id,
                    Resolution::Field {
                        class: class.clone(),
                        field: field.clone(),
                    },
                );
                Some(fty)
            }
            ExprKind::Invoke { callee, args } => {
                let ct = self.expr(callee, cx)?;
                let Type::Arrow(ps, r) = ct else {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &callee.span,
                        format!("{ct} is not a function value"),
                    );
                    return None;
                };
                let params: Vec<(String, Type)> = ps
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| (format!("#{i}"), t))
                    .collect();
                self.check_args(args, &params, &span, cx, "function value");
                Some(*r)
            }
            ExprKind::Lambda { body, .. } => {
                let lid = self.lambdas[&id];
                let params = self.callables[lid.0 as usize].params.clone();
                let mut scope = HashMap::new();
                for (n, t) in &params {
                    if n != "_" {
                        scope.insert(
                            n.clone(),
                            Local {
                                ty: t.clone(),
                                ghost: false,
                                is_param: true,
                            },
                        );
                    }
                }
                self.scopes.push(scope);
                let mut bcx = cx.clone();
                bcx.result = None;
                let bt = self.expr(body, &bcx);
                self.scopes.pop();
                let bt = bt?;
                if bt == Type::Unit {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &body.span,
                        "lambda body must produce a value",
                    );
                    return None;
                }
                self.callables[lid.0 as usize].ret = Some(bt.clone());
                Some(Type::Arrow(
                    params.into_iter().map(|(_, t)| t).collect(),
                    Box::new(bt),
                ))
            }
            ExprKind::New { class, args } => {
                if self.traits.contains_key(class.as_str()) {
                    self.err(
                        TypeErrorKind::TypeMismatch,
                        &span,
                        format!("cannot instantiate trait `{class}`"),
                    );
                    return None;
                }
                let Some(ci) = self.classes.get(class.as_str()) else {
                    self.err(
                        TypeErrorKind::UnresolvedName,
                        &span,
                        format!("unknown class `{class}`"),
                    );
                    return None;
                };
                let ctor = ci.ctor;
                let params = self.callables[ctor.0 as usize].params.clone();
                let what = format!("`new {class}`");
                self.check_args(args, &params, &span, cx, &what);
                self.resolution.insert(id, Resolution::Callable(ctor));
                Some(Type::Named(class.clone()))
            }
        }
    }
}

fn is_int_literal(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Int(_) => true,
        ExprKind::Unary {
            op: UnOp::Neg,
            operand,
        } => is_int_literal(operand),
        _ => false,
    }
}
