//! Lexing, parsing, pretty-printing and typechecking of MiniOO source.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod typeck;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use lexer::is_keyword;
pub use pretty::{expr_to_string, pretty_print};
pub use typeck::typecheck;

use crate::span::SourceSpan;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: parse error: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

/// Parses MiniOO source text.
pub fn parse(source: &str, file: &str) -> Result<Program, ParseError> {
    parser::parse(source, file)
}

/// Parses raw bytes, rejecting invalid UTF-8 with a [`ParseError`].
pub fn parse_bytes(bytes: &[u8], file: &str) -> Result<Program, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse(s, file),
        Err(e) => {
            let at = e.valid_up_to();
            let prefix = String::from_utf8_lossy(&bytes[..at]);
            let line = prefix.matches('\n').count() as u32 + 1;
            let col = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
            Err(ParseError {
                span: SourceSpan::new(file.into(), at, at, line, col),
                message: "source is not valid UTF-8".to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeErrorKind {
    UnresolvedName,
    TypeMismatch,
    NonlinearMultiplication,
    ResultMisuse,
    FieldUnassigned,
    GhostMisuse,
    DuplicateName,
    ImpureContract,
    MissingReturn,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::UnresolvedName => "unresolved-name",
            TypeErrorKind::TypeMismatch => "type-mismatch",
            TypeErrorKind::NonlinearMultiplication => "nonlinear-multiplication",
            TypeErrorKind::ResultMisuse => "result-misuse",
            TypeErrorKind::FieldUnassigned => "field-unassigned",
            TypeErrorKind::GhostMisuse => "ghost-misuse",
            TypeErrorKind::DuplicateName => "duplicate-name",
            TypeErrorKind::ImpureContract => "impure-contract",
            TypeErrorKind::MissingReturn => "missing-return",
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{span}: {kind}: {message}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

/// Resolved types. `Unit` is the type of calls to procedures without a
/// return type; it has no surface syntax.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Bool,
    Unit,
    Named(String),
    Arrow(Vec<Type>, Box<Type>),
}

impl Type {
    pub fn from_type_expr(t: &TypeExpr) -> Type {
        match t {
            TypeExpr::Int => Type::Int,
            TypeExpr::Bool => Type::Bool,
            TypeExpr::Named(n) => Type::Named(n.clone()),
            TypeExpr::Arrow(ps, r) => Type::Arrow(
                ps.iter().map(Type::from_type_expr).collect(),
                Box::new(Type::from_type_expr(r)),
            ),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Type::Int | Type::Bool)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
            Type::Unit => f.write_str("unit"),
            Type::Named(n) => f.write_str(n),
            Type::Arrow(ps, r) => {
                f.write_str("(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ") -> {r}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CallableId(pub u32);

impl fmt::Display for CallableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CallableKind {
    /// Top-level function; `decl` indexes `Program::decls`.
    Function {
        decl: usize,
    },
    /// Class or trait method.
    Method {
        decl: usize,
        index: usize,
        is_abstract: bool,
    },
    Constructor {
        decl: usize,
        implicit: bool,
    },
    Lambda {
        expr: NodeId,
        ordinal: usize,
        parent: CallableId,
    },
    FieldInit {
        decl: usize,
        field: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Callable {
    pub id: CallableId,
    pub name: String,
    pub kind: CallableKind,
    pub params: Vec<(String, Type)>,
    /// `None` for procedures; constructors report their class type.
    pub ret: Option<Type>,
    pub span: SourceSpan,
}

impl Callable {
    pub fn is_lambda(&self) -> bool {
        matches!(self.kind, CallableKind::Lambda { .. })
    }

    pub fn is_abstract(&self) -> bool {
        matches!(
            self.kind,
            CallableKind::Method {
                is_abstract: true,
                ..
            }
        )
    }

    pub fn signature(&self) -> Type {
        Type::Arrow(
            self.params.iter().map(|(_, t)| t.clone()).collect(),
            Box::new(self.ret.clone().unwrap_or(Type::Unit)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Local(String),
    Param(String),
    Callable(CallableId),
    Field { class: String, field: String },
}

/// A program whose names and types have been resolved.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub types: HashMap<NodeId, Type>,
    pub resolution: HashMap<NodeId, Resolution>,
    pub callables: Vec<Callable>,
    pub lambdas: HashMap<NodeId, CallableId>,
    pub next_node_id: NodeId,
}

/// The code a callable runs: either a statement block or a single expression
/// (lambdas and field initializers).
#[derive(Debug, Clone, Copy)]
pub enum CallableBody<'a> {
    Block(&'a Block),
    Expr(&'a Expr),
    None,
}

impl TypedProgram {
    pub fn callable(&self, id: CallableId) -> &Callable {
        &self.callables[id.0 as usize]
    }

    pub fn callable_by_name(&self, name: &str) -> Option<&Callable> {
        self.callables.iter().find(|c| c.name == name)
    }

    pub fn ty(&self, e: &Expr) -> &Type {
        self.types
            .get(&e.id)
            .unwrap_or_else(|| panic!("expression {} has no type", e.id))
    }

    /// Source declaration for functions and methods.
    pub fn function_decl(&self, id: CallableId) -> Option<&FunctionDecl> {
        match &self.callable(id).kind {
            CallableKind::Function { decl } => match &self.program.decls[*decl] {
                Decl::Function(f) => Some(f),
                _ => None,
            },
            CallableKind::Method { decl, index, .. } => match &self.program.decls[*decl] {
                Decl::Class(c) => c.methods.get(*index),
                Decl::Trait(t) => t.methods.get(*index),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn lambda_expr(&self, id: CallableId) -> Option<&Expr> {
        let CallableKind::Lambda { expr, .. } = self.callable(id).kind else {
            return None;
        };
        let mut found = None;
        self.program.for_each_expr(&mut |e| {
            e.walk(&mut |x| {
                if x.id == expr {
                    found = Some(x);
                }
            })
        });
        found
    }

    pub fn body(&self, id: CallableId) -> CallableBody<'_> {
        match &self.callable(id).kind {
            CallableKind::Function { .. } | CallableKind::Method { .. } => self
                .function_decl(id)
                .and_then(|f| f.body.as_ref())
                .map_or(CallableBody::None, CallableBody::Block),
            CallableKind::Constructor { decl, .. } => match &self.program.decls[*decl] {
                Decl::Class(c) => c
                    .constructor
                    .as_ref()
                    .map_or(CallableBody::None, |k| CallableBody::Block(&k.body)),
                _ => CallableBody::None,
            },
            CallableKind::Lambda { .. } => match self.lambda_expr(id) {
                Some(Expr {
                    kind: ExprKind::Lambda { body, .. },
                    ..
                }) => CallableBody::Expr(body),
                _ => CallableBody::None,
            },
            CallableKind::FieldInit { decl, field } => match &self.program.decls[*decl] {
                Decl::Class(c) => c.fields[*field]
                    .init
                    .as_ref()
                    .map_or(CallableBody::None, CallableBody::Expr),
                _ => CallableBody::None,
            },
        }
    }

    pub fn class_of_constructor(&self, id: CallableId) -> Option<&ClassDecl> {
        match &self.callable(id).kind {
            CallableKind::Constructor { decl, .. } => match &self.program.decls[*decl] {
                Decl::Class(c) => Some(c),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn constructor_of(&self, class: &str) -> Option<CallableId> {
        self.callables.iter().find_map(|c| match &c.kind {
            CallableKind::Constructor { decl, .. } if self.program.decls[*decl].name() == class => {
                Some(c.id)
            }
            _ => None,
        })
    }

    pub fn field_inits_of(&self, class: &str) -> Vec<CallableId> {
        self.callables
            .iter()
            .filter_map(|c| match &c.kind {
                CallableKind::FieldInit { decl, .. }
                    if self.program.decls[*decl].name() == class =>
                {
                    Some(c.id)
                }
                _ => None,
            })
            .collect()
    }

    /// The method named `method` declared directly in class or trait `owner`.
    pub fn method_of(&self, owner: &str, method: &str) -> Option<CallableId> {
        self.callables.iter().find_map(|c| match &c.kind {
            CallableKind::Method { decl, .. }
                if self.program.decls[*decl].name() == owner
                    && self.function_decl(c.id).is_some_and(|f| f.name == method) =>
            {
                Some(c.id)
            }
            _ => None,
        })
    }

    /// Classes declaring `implements trait_name`.
    pub fn implementors(&self, trait_name: &str) -> Vec<&ClassDecl> {
        self.program
            .decls
            .iter()
            .filter_map(|d| match d {
                Decl::Class(c) if c.implements.as_deref() == Some(trait_name) => Some(c),
                _ => None,
            })
            .collect()
    }

    pub fn is_trait(&self, name: &str) -> bool {
        self.program.find_trait(name).is_some()
    }
}
