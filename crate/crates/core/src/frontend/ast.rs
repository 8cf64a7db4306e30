//! MiniOO abstract syntax.
//!
//! Every expression carries a [`NodeId`] that is unique within its program;
//! the typechecker keys its type and resolution tables on it.

use std::fmt;

use crate::span::SourceSpan;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Function(FunctionDecl),
    Trait(TraitDecl),
    Class(ClassDecl),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Function(f) => &f.name,
            Decl::Trait(t) => &t.name,
            Decl::Class(c) => &c.name,
        }
    }

    pub fn span(&self) -> &SourceSpan {
        match self {
            Decl::Function(f) => &f.span,
            Decl::Trait(t) => &t.span,
            Decl::Class(c) => &c.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: Option<TypeExpr>,
    pub requires: Vec<Expr>,
    pub ensures: Vec<Expr>,
    pub decreases: Option<Expr>,
    /// Absent only for trait methods.
    pub body: Option<Block>,
    /// Enclosing class or trait, for methods.
    pub owner: Option<String>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraitDecl {
    pub name: String,
    pub methods: Vec<FunctionDecl>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constructor {
    pub params: Vec<Param>,
    pub body: Block,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub implements: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub constructor: Option<Constructor>,
    pub methods: Vec<FunctionDecl>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ghost: bool,
        init: Expr,
    },
    /// `this.field := value`, constructors only.
    FieldAssign {
        field: String,
        value: Expr,
    },
    Return(Option<Expr>),
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }

    pub fn is_right_assoc(self) -> bool {
        matches!(self, BinOp::Implies)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: SourceSpan,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Var(String),
    Result,
    This,
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    MethodCall {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
    },
    Field {
        receiver: Box<Expr>,
        field: String,
    },
    /// Application of a function-valued expression.
    Invoke {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Lambda {
        params: Vec<Param>,
        body: Box<Expr>,
    },
    New {
        class: String,
        args: Vec<Expr>,
    },
}

impl ExprKind {
    pub fn is_call_like(&self) -> bool {
        matches!(
            self,
            ExprKind::Call { .. }
                | ExprKind::MethodCall { .. }
                | ExprKind::Invoke { .. }
                | ExprKind::New { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Int,
    Bool,
    Named(String),
    Arrow(Vec<TypeExpr>, Box<TypeExpr>),
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Int => f.write_str("int"),
            TypeExpr::Bool => f.write_str("bool"),
            TypeExpr::Named(n) => f.write_str(n),
            TypeExpr::Arrow(params, ret) => {
                f.write_str("(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ") -> {ret}")
            }
        }
    }
}

impl Expr {
    /// Pre-order walk over this expression and all sub-expressions,
    /// including lambda bodies.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        self.for_each_child(|c| c.walk(f));
    }

    pub fn for_each_child<'a>(&'a self, mut f: impl FnMut(&'a Expr)) {
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Var(_)
            | ExprKind::Result
            | ExprKind::This => {}
            ExprKind::Binary { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            ExprKind::Unary { operand, .. } => f(operand),
            ExprKind::Call { args, .. } | ExprKind::New { args, .. } => args.iter().for_each(f),
            ExprKind::MethodCall { receiver, args, .. } => {
                f(receiver);
                args.iter().for_each(f);
            }
            ExprKind::Field { receiver, .. } => f(receiver),
            ExprKind::Invoke { callee, args } => {
                f(callee);
                args.iter().for_each(f);
            }
            ExprKind::Lambda { body, .. } => f(body),
        }
    }

    pub fn for_each_child_mut(&mut self, mut f: impl FnMut(&mut Expr)) {
        match &mut self.kind {
            ExprKind::Int(_)
            | ExprKind::Bool(_)
            | ExprKind::Var(_)
            | ExprKind::Result
            | ExprKind::This => {}
            ExprKind::Binary { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            ExprKind::Unary { operand, .. } => f(operand),
            ExprKind::Call { args, .. } | ExprKind::New { args, .. } => args.iter_mut().for_each(f),
            ExprKind::MethodCall { receiver, args, .. } => {
                f(receiver);
                args.iter_mut().for_each(f);
            }
            ExprKind::Field { receiver, .. } => f(receiver),
            ExprKind::Invoke { callee, args } => {
                f(callee);
                args.iter_mut().for_each(f);
            }
            ExprKind::Lambda { body, .. } => f(body),
        }
    }

    /// True if any sub-expression satisfies `pred`, not descending into lambdas.
    pub fn any_outside_lambdas(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        if matches!(self.kind, ExprKind::Lambda { .. }) {
            return false;
        }
        let mut found = false;
        self.for_each_child(|c| found = found || c.any_outside_lambdas(pred));
        found
    }
}

impl Block {
    /// Every expression directly owned by statements of this block (recursively
    /// through nested blocks), in source order.
    pub fn for_each_expr<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        for stmt in &self.stmts {
            stmt.for_each_expr(f);
        }
    }
}

impl Stmt {
    pub fn for_each_expr<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        match &self.kind {
            StmtKind::VarDecl { init, .. } => f(init),
            StmtKind::FieldAssign { value, .. } => f(value),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    f(e)
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                f(cond);
                then_block.for_each_expr(f);
                if let Some(b) = else_block {
                    b.for_each_expr(f);
                }
            }
            StmtKind::Expr(e) => f(e),
        }
    }
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn find_function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions().find(|f| f.name == name)
    }

    pub fn find_class(&self, name: &str) -> Option<&ClassDecl> {
        self.decls.iter().find_map(|d| match d {
            Decl::Class(c) if c.name == name => Some(c),
            _ => None,
        })
    }

    pub fn find_trait(&self, name: &str) -> Option<&TraitDecl> {
        self.decls.iter().find_map(|d| match d {
            Decl::Trait(t) if t.name == name => Some(t),
            _ => None,
        })
    }

    /// Largest node id in use, plus one.
    pub fn next_node_id(&self) -> NodeId {
        let mut max = 0;
        self.for_each_expr(&mut |e: &Expr| {
            e.walk(&mut |e| max = max.max(e.id + 1));
        });
        max
    }

    /// Every top-level expression tree in the program (contracts, bodies,
    /// initializers), in source order.
    pub fn for_each_expr<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        fn func<'a>(fd: &'a FunctionDecl, f: &mut dyn FnMut(&'a Expr)) {
            fd.requires.iter().for_each(&mut *f);
            fd.ensures.iter().for_each(&mut *f);
            if let Some(d) = &fd.decreases {
                f(d);
            }
            if let Some(b) = &fd.body {
                b.for_each_expr(f);
            }
        }
        for d in &self.decls {
            match d {
                Decl::Function(fd) => func(fd, f),
                Decl::Trait(t) => t.methods.iter().for_each(|m| func(m, f)),
                Decl::Class(c) => {
                    for field in &c.fields {
                        if let Some(init) = &field.init {
                            f(init);
                        }
                    }
                    if let Some(ctor) = &c.constructor {
                        ctor.body.for_each_expr(f);
                    }
                    c.methods.iter().for_each(|m| func(m, f));
                }
            }
        }
    }

    /// A copy with every span blanked and every node id zeroed, for
    /// structural comparison.
    pub fn structural(&self) -> Program {
        let mut p = self.clone();
        p.strip_locations();
        p
    }

    pub fn strip_locations(&mut self) {
        fn expr(e: &mut Expr) {
            e.id = 0;
            e.span = SourceSpan::dummy();
            if let ExprKind::Lambda { params, .. } = &mut e.kind {
                params.iter_mut().for_each(param);
            }
            e.for_each_child_mut(expr);
        }
        fn param(p: &mut Param) {
            p.span = SourceSpan::dummy();
        }
        fn block(b: &mut Block) {
            b.span = SourceSpan::dummy();
            for s in &mut b.stmts {
                s.span = SourceSpan::dummy();
                match &mut s.kind {
                    StmtKind::VarDecl { init, .. } => expr(init),
                    StmtKind::FieldAssign { value, .. } => expr(value),
                    StmtKind::Return(e) => e.iter_mut().for_each(expr),
                    StmtKind::If {
                        cond,
                        then_block,
                        else_block,
                    } => {
                        expr(cond);
                        block(then_block);
                        else_block.iter_mut().for_each(block);
                    }
                    StmtKind::Expr(e) => expr(e),
                }
            }
        }
        fn func(f: &mut FunctionDecl) {
            f.span = SourceSpan::dummy();
            f.params.iter_mut().for_each(param);
            f.requires.iter_mut().for_each(expr);
            f.ensures.iter_mut().for_each(expr);
            f.decreases.iter_mut().for_each(expr);
            f.body.iter_mut().for_each(block);
        }
        for d in &mut self.decls {
            match d {
                Decl::Function(f) => func(f),
                Decl::Trait(t) => {
                    t.span = SourceSpan::dummy();
                    t.methods.iter_mut().for_each(func);
                }
                Decl::Class(c) => {
                    c.span = SourceSpan::dummy();
                    for field in &mut c.fields {
                        field.span = SourceSpan::dummy();
                        field.init.iter_mut().for_each(expr);
                    }
                    if let Some(ctor) = &mut c.constructor {
                        ctor.span = SourceSpan::dummy();
                        ctor.params.iter_mut().for_each(param);
                        block(&mut ctor.body);
                    }
                    c.methods.iter_mut().for_each(func);
                }
            }
        }
    }
}
