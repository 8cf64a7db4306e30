//! Recursive-descent parser with precedence climbing for expressions.

use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::span::SourceSpan;

const MAX_NESTING: usize = 256;

pub fn parse(source: &str, file: &str) -> Result<Program, ParseError> {
    let file: Arc<str> = Arc::from(file);
    let tokens = tokenize(source, &file)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: 0,
        depth: 0,
    };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: NodeId,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if self.peek() == &tok {
            Ok(self.bump().span)
        } else {
            self.error(&tok.describe())
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let sp = self.bump().span;
                Ok((name, sp))
            }
            _ => self.error(what),
        }
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn mk(&mut self, span: SourceSpan, kind: ExprKind) -> Expr {
        Expr {
            id: self.fresh_id(),
            span,
            kind,
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(ParseError {
                span: self.span(),
                message: "nesting too deep".to_string(),
            });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn program(&mut self) -> PResult<Program> {
        let mut decls = Vec::new();
        while self.peek() != &Tok::Eof {
            decls.push(match self.peek() {
                Tok::Func => Decl::Function(self.function(None, false)?),
                Tok::Trait => Decl::Trait(self.trait_decl()?),
                Tok::Class => Decl::Class(self.class_decl()?),
                _ => return self.error("`func`, `trait` or `class`"),
            });
        }
        Ok(Program { decls })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        loop {
            let (name, sp) = match self.peek().clone() {
                Tok::Ident(n) => (n, self.bump().span),
                _ => {
                    let what = if params.is_empty() {
                        "parameter or `)`"
                    } else {
                        "parameter"
                    };
                    return self.error(what);
                }
            };
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            params.push(Param {
                name,
                ty,
                span: sp.to(&self.prev_span()),
            });
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RParen) {
                return Ok(params);
            }
            return self.error("`,` or `)`");
        }
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        self.enter()?;
        let t = match self.peek().clone() {
            Tok::IntTy => {
                self.bump();
                TypeExpr::Int
            }
            Tok::BoolTy => {
                self.bump();
                TypeExpr::Bool
            }
            Tok::Ident(n) => {
                self.bump();
                TypeExpr::Named(n)
            }
            Tok::LParen => {
                self.bump();
                let mut params = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        params.push(self.type_expr()?);
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        self.expect(Tok::RParen)?;
                        break;
                    }
                }
                self.expect(Tok::Arrow)?;
                let ret = self.type_expr()?;
                TypeExpr::Arrow(params, Box::new(ret))
            }
            _ => return self.error("type"),
        };
        self.leave();
        Ok(t)
    }

    /// `func` declarations; `abstract_only` parses trait signatures ending in `;`.
    fn function(&mut self, owner: Option<&str>, abstract_only: bool) -> PResult<FunctionDecl> {
        let start = self.expect(Tok::Func)?;
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen)?;
        let params = self.params()?;
        let return_type = if self.eat(&Tok::Arrow) {
            Some(self.type_expr()?)
        } else {
            None
        };
        let mut requires = Vec::new();
        let mut ensures = Vec::new();
        let mut decreases = None;
        loop {
            match self.peek() {
                Tok::Requires => {
                    self.bump();
                    requires.push(self.expr()?);
                }
                Tok::Ensures => {
                    self.bump();
                    ensures.push(self.expr()?);
                }
                Tok::Decreases => {
                    let sp = self.bump().span;
                    if decreases.is_some() {
                        return Err(ParseError {
                            span: sp,
                            message: "duplicate `decreases` clause".to_string(),
                        });
                    }
                    decreases = Some(self.expr()?);
                }
                _ => break,
            }
        }
        let body = if abstract_only {
            if return_type.is_none() {
                return self.error("`->` return type on trait method");
            }
            self.expect(Tok::Semi)?;
            None
        } else {
            Some(self.block()?)
        };
        Ok(FunctionDecl {
            name,
            params,
            return_type,
            requires,
            ensures,
            decreases,
            body,
            owner: owner.map(str::to_string),
            span: start.to(&self.prev_span()),
        })
    }

    fn trait_decl(&mut self) -> PResult<TraitDecl> {
        let start = self.expect(Tok::Trait)?;
        let (name, _) = self.ident("trait name")?;
        self.expect(Tok::LBrace)?;
        let mut methods = Vec::new();
        while self.peek() == &Tok::Func {
            methods.push(self.function(Some(&name), true)?);
        }
        if self.peek() != &Tok::RBrace {
            return self.error("`func` or `}`");
        }
        self.bump();
        Ok(TraitDecl {
            name,
            methods,
            span: start.to(&self.prev_span()),
        })
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let start = self.expect(Tok::Class)?;
        let (name, _) = self.ident("class name")?;
        let implements = if self.eat(&Tok::Implements) {
            Some(self.ident("trait name")?.0)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while self.peek() == &Tok::Const {
            let fstart = self.bump().span;
            let (fname, _) = self.ident("field name")?;
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            let init = if self.eat(&Tok::Assign) {
                Some(self.expr()?)
            } else {
                None
            };
            self.expect(Tok::Semi)?;
            fields.push(FieldDecl {
                name: fname,
                ty,
                init,
                span: fstart.to(&self.prev_span()),
            });
        }
        let constructor = if self.peek() == &Tok::Constructor {
            let cstart = self.bump().span;
            self.expect(Tok::LParen)?;
            let params = self.params()?;
            let body = self.block()?;
            Some(Constructor {
                params,
                body,
                span: cstart.to(&self.prev_span()),
            })
        } else {
            None
        };
        let mut methods = Vec::new();
        while self.peek() == &Tok::Func {
            methods.push(self.function(Some(&name), false)?);
        }
        if self.peek() != &Tok::RBrace {
            return self.error("`const`, `constructor`, `func` or `}`");
        }
        self.bump();
        Ok(ClassDecl {
            name,
            implements,
            fields,
            constructor,
            methods,
            span: start.to(&self.prev_span()),
        })
    }

    fn block(&mut self) -> PResult<Block> {
        self.enter()?;
        let start = self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                return self.error("statement or `}`");
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        self.leave();
        Ok(Block {
            stmts,
            span: start.to(&self.prev_span()),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = match self.peek() {
            Tok::Ghost | Tok::Var => {
                let ghost = self.eat(&Tok::Ghost);
                self.expect(Tok::Var)?;
                let (name, _) = self.ident("variable name")?;
                self.expect(Tok::Assign)?;
                let init = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::VarDecl { name, ghost, init }
            }
            Tok::This if self.peek_at(1) == &Tok::Dot && self.peek_at(3) == &Tok::Assign => {
                self.bump();
                self.bump();
                let (field, _) = self.ident("field name")?;
                self.expect(Tok::Assign)?;
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::FieldAssign { field, value }
            }
            Tok::Return => {
                self.bump();
                let value = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Tok::If => {
                self.bump();
                let cond = self.expr()?;
                let then_block = self.block()?;
                let else_block = if self.eat(&Tok::Else) {
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                }
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt {
            kind,
            span: start.to(&self.prev_span()),
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let e = stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.binary(1))?;
        self.leave();
        Ok(e)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Implies => BinOp::Implies,
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let next_min = if op.is_right_assoc() { prec } else { prec + 1 };
            self.enter()?;
            let rhs = self.binary(next_min)?;
            self.leave();
            let span = lhs.span.to(&rhs.span);
            lhs = self.mk(
                span,
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Bang => UnOp::Not,
            Tok::Minus => UnOp::Neg,
            _ => return self.postfix(),
        };
        let start = self.bump().span;
        self.enter()?;
        let operand = self.unary()?;
        self.leave();
        let span = start.to(&operand.span);
        Ok(self.mk(
            span,
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
        ))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            return self.error("`,` or `)`");
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let args = self.args()?;
                    let span = e.span.to(&self.prev_span());
                    e = self.mk(
                        span,
                        ExprKind::Invoke {
                            callee: Box::new(e),
                            args,
                        },
                    );
                }
                Tok::Dot => {
                    self.bump();
                    let (name, _) = self.ident("field or method name")?;
                    if self.eat(&Tok::LParen) {
                        let args = self.args()?;
                        let span = e.span.to(&self.prev_span());
                        e = self.mk(
                            span,
                            ExprKind::MethodCall {
                                receiver: Box::new(e),
                                method: name,
                                args,
                            },
                        );
                    } else {
                        let span = e.span.to(&self.prev_span());
                        e = self.mk(
                            span,
                            ExprKind::Field {
                                receiver: Box::new(e),
                                field: name,
                            },
                        );
                    }
                }
                _ => return Ok(e),
            }
        }
    }

    fn looks_like_lambda(&self) -> bool {
        match (self.peek_at(1), self.peek_at(2)) {
            (Tok::RParen, Tok::FatArrow) => true,
            (Tok::Ident(_), Tok::Colon) => true,
            _ => false,
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(self.mk(start, ExprKind::Int(v)))
            }
            Tok::True => {
                self.bump();
                Ok(self.mk(start, ExprKind::Bool(true)))
            }
            Tok::False => {
                self.bump();
                Ok(self.mk(start, ExprKind::Bool(false)))
            }
            Tok::Result => {
                self.bump();
                Ok(self.mk(start, ExprKind::Result))
            }
            Tok::This => {
                self.bump();
                Ok(self.mk(start, ExprKind::This))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let args = self.args()?;
                    let span = start.to(&self.prev_span());
                    Ok(self.mk(span, ExprKind::Call { callee: name, args }))
                } else {
                    Ok(self.mk(start, ExprKind::Var(name)))
                }
            }
            Tok::New => {
                self.bump();
                let (class, _) = self.ident("class name")?;
                self.expect(Tok::LParen)?;
                let args = self.args()?;
                let span = start.to(&self.prev_span());
                Ok(self.mk(span, ExprKind::New { class, args }))
            }
            Tok::LParen if self.looks_like_lambda() => {
                self.bump();
                let params = self.params()?;
                self.expect(Tok::FatArrow)?;
                let body = self.expr()?;
                let span = start.to(&body.span);
                Ok(self.mk(
                    span,
                    ExprKind::Lambda {
                        params,
                        body: Box::new(body),
                    },
                ))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.error("expression"),
        }
    }
}
