//! Canonical source rendering. Output always re-parses to a structurally
//! identical program.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for (i, decl) in program.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match decl {
            Decl::Function(f) => function(&mut out, f, 0),
            Decl::Trait(t) => {
                if t.methods.is_empty() {
                    let _ = writeln!(out, "trait {} {{}}", t.name);
                    continue;
                }
                let _ = writeln!(out, "trait {} {{", t.name);
                for m in &t.methods {
                    function(&mut out, m, 1);
                }
                out.push_str("}\n");
            }
            Decl::Class(c) => class(&mut out, c),
        }
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{}: {}", p.name, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

fn function(out: &mut String, f: &FunctionDecl, level: usize) {
    indent(out, level);
    let _ = write!(out, "func {}({})", f.name, params(&f.params));
    if let Some(rt) = &f.return_type {
        let _ = write!(out, " -> {rt}");
    }
    let specs: Vec<(&str, &Expr)> = f
        .requires
        .iter()
        .map(|e| ("requires", e))
        .chain(f.ensures.iter().map(|e| ("ensures", e)))
        .chain(f.decreases.iter().map(|e| ("decreases", e)))
        .collect();
    for (kw, e) in &specs {
        out.push('\n');
        indent(out, level + 1);
        let _ = write!(out, "{kw} {}", expr_to_string(e));
    }
    match &f.body {
        None => out.push_str(";\n"),
        Some(body) => {
            if specs.is_empty() {
                out.push(' ');
            } else {
                out.push('\n');
                indent(out, level);
            }
            block(out, body, level);
            out.push('\n');
        }
    }
}

fn class(out: &mut String, c: &ClassDecl) {
    let _ = write!(out, "class {}", c.name);
    if let Some(t) = &c.implements {
        let _ = write!(out, " implements {t}");
    }
    if c.fields.is_empty() && c.constructor.is_none() && c.methods.is_empty() {
        out.push_str(" {}\n");
        return;
    }
    out.push_str(" {\n");
    for field in &c.fields {
        indent(out, 1);
        let _ = write!(out, "const {}: {}", field.name, field.ty);
        if let Some(init) = &field.init {
            let _ = write!(out, " := {}", expr_to_string(init));
        }
        out.push_str(";\n");
    }
    if let Some(ctor) = &c.constructor {
        indent(out, 1);
        let _ = write!(out, "constructor({}) ", params(&ctor.params));
        block(out, &ctor.body, 1);
        out.push('\n');
    }
    for m in &c.methods {
        function(out, m, 1);
    }
    out.push_str("}\n");
}

fn block(out: &mut String, b: &Block, level: usize) {
    if b.stmts.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for s in &b.stmts {
        indent(out, level + 1);
        stmt(out, s, level + 1);
        out.push('\n');
    }
    indent(out, level);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    match &s.kind {
        StmtKind::VarDecl { name, ghost, init } => {
            if *ghost {
                out.push_str("ghost ");
            }
            let _ = write!(out, "var {name} := {};", expr_to_string(init));
        }
        StmtKind::FieldAssign { field, value } => {
            let _ = write!(out, "this.{field} := {};", expr_to_string(value));
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", expr_to_string(e));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = write!(out, "if {} ", expr_to_string(cond));
            block(out, then_block, level);
            if let Some(eb) = else_block {
                out.push_str(" else ");
                block(out, eb, level);
            }
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", expr_to_string(e));
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

const PREC_UNARY: u8 = 7;
const PREC_POSTFIX: u8 = 8;

/// Writes `e`, parenthesized if its own precedence is below `min`.
fn expr(out: &mut String, e: &Expr, min: u8) {
    let own = match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } => PREC_UNARY,
        ExprKind::Lambda { .. } => 0,
        ExprKind::Int(v) if *v < 0 => PREC_UNARY,
        _ => PREC_POSTFIX + 1,
    };
    let paren = own < min;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Result => out.push_str("result"),
        ExprKind::This => out.push_str("this"),
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let (lmin, rmin) = if op.is_right_assoc() {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            expr(out, lhs, lmin);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs, rmin);
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            // keep `- -x` from lexing as anything else and keep `-5` distinct from a literal
            if matches!(operand.kind, ExprKind::Unary { .. })
                || matches!(operand.kind, ExprKind::Int(v) if v < 0)
            {
                out.push(' ');
            }
            expr(out, operand, PREC_UNARY);
        }
        ExprKind::Call { callee, args: a } => {
            out.push_str(callee);
            args(out, a);
        }
        ExprKind::MethodCall {
            receiver,
            method,
            args: a,
        } => {
            expr(out, receiver, PREC_POSTFIX);
            let _ = write!(out, ".{method}");
            args(out, a);
        }
        ExprKind::Field { receiver, field } => {
            expr(out, receiver, PREC_POSTFIX);
            let _ = write!(out, ".{field}");
        }
        ExprKind::Invoke { callee, args: a } => {
            // A bare name or field access would re-parse as a call or method call.
            let needs_paren = matches!(callee.kind, ExprKind::Var(_) | ExprKind::Field { .. });
            if needs_paren {
                out.push('(');
                expr(out, callee, 0);
                out.push(')');
            } else {
                expr(out, callee, PREC_POSTFIX);
            }
            args(out, a);
        }
        ExprKind::Lambda { params: ps, body } => {
            let _ = write!(out, "({}) => ", params(ps));
            expr(out, body, 0);
        }
        ExprKind::New { class, args: a } => {
            let _ = write!(out, "new {class}");
            args(out, a);
        }
    }
    if paren {
        out.push(')');
    }
}

fn args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, a, 0);
    }
    out.push(')');
}
