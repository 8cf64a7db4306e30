use thiserror::Error;

use crate::frontend::{typecheck, Block, Decl, Program, StmtKind, TypeError, TypedProgram};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EraseError {
    /// Non-ghost code depends on something erasure removed.
    #[error("erased program no longer typechecks: {}", .0.first().map(|e| e.to_string()).unwrap_or_default())]
    GhostDependency(Vec<TypeError>),
}

fn erase_block(b: &mut Block) {
    b.stmts
        .retain(|s| !matches!(s.kind, StmtKind::VarDecl { ghost: true, .. }));
    for s in &mut b.stmts {
        if let StmtKind::If {
            then_block,
            else_block,
            ..
        } = &mut s.kind
        {
            erase_block(then_block);
            if let Some(e) = else_block {
                erase_block(e);
            }
        }
    }
}

/// `p` without its ghost declarations.
pub fn erase_program(p: &Program) -> Program {
    let mut p = p.clone();
    for d in &mut p.decls {
        match d {
            Decl::Function(f) => {
                if let Some(b) = &mut f.body {
                    erase_block(b);
                }
            }
            Decl::Class(c) => {
                if let Some(k) = &mut c.constructor {
                    erase_block(&mut k.body);
                }
                for m in &mut c.methods {
                    if let Some(b) = &mut m.body {
                        erase_block(b);
                    }
                }
            }
            Decl::Trait(_) => {}
        }
    }
    p
}

/// Removes every ghost declaration and checks the result again.
pub fn erase(tp: &TypedProgram) -> Result<TypedProgram, EraseError> {
    typecheck(&erase_program(&tp.program)).map_err(EraseError::GhostDependency)
}
