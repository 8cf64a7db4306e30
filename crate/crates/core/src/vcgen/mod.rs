//! Verification-condition generation.
//!
//! Calls are verified modularly: a call site must establish the callee's
//! precondition and may then assume its postcondition, including when the
//! callee is the caller itself. Function-value invocations and object
//! creation yield an arbitrary value. Ghost declarations obey exactly the same
//! rules as ordinary ones; ghostness only marks an obligation as erasable. In
//! sound mode, recursive call sites also carry decreases obligations.

pub mod anf;
pub mod formula;
pub mod prefix;
mod wp;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::callgraph::{build_call_graph, call_targets_with, has_decreases, sccs, Mode, Policy};
use crate::frontend::{
    expr_to_string, Block, CallableBody, CallableId, CallableKind, Expr, ExprKind, Stmt, StmtKind,
    TypedProgram,
};
use crate::span::SourceSpan;

pub use anf::{anormalize, AnfBody};
pub use formula::{CmpOp, Formula, LinTerm, Sort, Subst};
pub use prefix::{parse_formula, PrefixError};
pub use wp::always_returns;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VcKind {
    Postcondition,
    CalleePrecondition,
    DecreasesBound,
    DecreasesNonneg,
    /// An implementing method repeats its trait method's contract verbatim.
    TraitConformance,
}

impl VcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VcKind::Postcondition => "postcondition",
            VcKind::CalleePrecondition => "callee_precondition",
            VcKind::DecreasesBound => "decreases_bound",
            VcKind::DecreasesNonneg => "decreases_nonneg",
            VcKind::TraitConformance => "trait_conformance",
        }
    }
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationCondition {
    pub owner: CallableId,
    pub owner_name: String,
    pub kind: VcKind,
    pub formula: Formula,
    pub origin: SourceSpan,
    /// The obligation comes from ghost code.
    pub erasable_origin: bool,
}

impl fmt::Display for VerificationCondition {
    /// One line of the `--dump-vcs` listing.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.owner_name, self.kind, self.origin, self.formula
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VcError {
    #[error("`{callable}` has a path that does not return a value")]
    MalformedBlock { callable: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub params: Vec<(String, Sort)>,
    pub requires: Vec<Formula>,
    pub ensures: Vec<Formula>,
    pub decreases: Option<LinTerm>,
    pub ret: Option<Sort>,
}

/// Logical contracts of every callable. Callables without source contracts
/// (constructors, lambdas, initializers) have empty ones.
#[derive(Debug, Clone, Default)]
pub struct ContractEnv {
    contracts: HashMap<CallableId, Contract>,
}

impl ContractEnv {
    pub fn build(tp: &TypedProgram) -> ContractEnv {
        let mut contracts = HashMap::new();
        let empty = ContractEnv::default();
        for c in &tp.callables {
            let params: Vec<(String, Sort)> = c
                .params
                .iter()
                .map(|(n, t)| (n.clone(), Sort::of(t)))
                .collect();
            let ret = match c.kind {
                CallableKind::Constructor { .. } => None,
                _ => c.ret.as_ref().map(Sort::of),
            };
            let mut contract = Contract {
                params,
                requires: Vec::new(),
                ensures: Vec::new(),
                decreases: None,
                ret,
            };
            if let Some(f) = tp.function_decl(c.id) {
                let anf = AnfBody {
                    block: Block {
                        stmts: Vec::new(),
                        span: f.span.clone(),
                    },
                    types: HashMap::new(),
                };
                let mut w = wp::Wp::new(tp, &anf, &empty);
                contract.requires = f.requires.iter().map(|e| w.formula(e).value).collect();
                contract.ensures = f.ensures.iter().map(|e| w.formula(e).value).collect();
                contract.decreases = f.decreases.as_ref().map(|e| w.term(e).value);
            }
            contracts.insert(c.id, contract);
        }
        ContractEnv { contracts }
    }

    pub fn get(&self, id: CallableId) -> Option<&Contract> {
        self.contracts.get(&id)
    }
}

/// The statements a callable executes, as a block. Expression-bodied
/// callables become a single `return`.
fn body_block(tp: &TypedProgram, id: CallableId) -> Option<Block> {
    match tp.body(id) {
        CallableBody::Block(b) => Some(b.clone()),
        CallableBody::Expr(e) => Some(Block {
            stmts: vec![Stmt {
                kind: StmtKind::Return(Some(e.clone())),
                span: e.span.clone(),
            }],
            span: e.span.clone(),
        }),
        CallableBody::None => None,
    }
}

/// `wp(body, post)` for a normalized body owned by a callable.
pub fn wp(tp: &TypedProgram, body: &AnfBody, post: &Formula, env: &ContractEnv) -> Formula {
    let mut w = wp::Wp::new(tp, body, env);
    w.block(&body.block, post.clone(), post)
}

fn contains_named_call(b: &Block) -> bool {
    let mut found = false;
    b.for_each_expr(&mut |e| {
        found = found
            || e.any_outside_lambdas(&|x| {
                matches!(x.kind, ExprKind::Call { .. } | ExprKind::MethodCall { .. })
            })
    });
    found
}

fn call_sites(b: &Block, out: &mut Vec<(Expr, bool, SourceSpan)>) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::VarDecl { init, ghost, .. } if init.kind.is_call_like() => {
                out.push((init.clone(), *ghost, s.span.clone()))
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                call_sites(then_block, out);
                if let Some(eb) = else_block {
                    call_sites(eb, out);
                }
            }
            _ => {}
        }
    }
}

/// Callables sharing a nontrivial component of the over-approximated graph.
fn recursive_components(tp: &TypedProgram) -> HashMap<CallableId, usize> {
    let graph = build_call_graph(tp, Policy::Overapprox);
    let mut out = HashMap::new();
    for (i, s) in sccs(&graph).into_iter().enumerate() {
        if s.is_nontrivial {
            for m in s.members {
                out.insert(m, i);
            }
        }
    }
    out
}

pub fn vcs_for_callable(
    tp: &TypedProgram,
    env: &ContractEnv,
    id: CallableId,
    mode: Mode,
) -> Result<Vec<VerificationCondition>, VcError> {
    let components = if mode == Mode::Sound {
        recursive_components(tp)
    } else {
        HashMap::new()
    };
    vcs_with_components(tp, env, id, mode, &components)
}

fn vcs_with_components(
    tp: &TypedProgram,
    env: &ContractEnv,
    id: CallableId,
    mode: Mode,
    components: &HashMap<CallableId, usize>,
) -> Result<Vec<VerificationCondition>, VcError> {
    let callable = tp.callable(id);
    if callable.is_abstract() {
        return Ok(Vec::new());
    }
    let Some(block) = body_block(tp, id) else {
        return Ok(Vec::new());
    };
    let params: Vec<String> = callable.params.iter().map(|(n, _)| n.clone()).collect();
    let anf = anormalize(tp, &block, &params);
    let contract = env.get(id).cloned().expect("contract for every callable");
    let is_routine = matches!(
        callable.kind,
        CallableKind::Function { .. } | CallableKind::Method { .. }
    );
    if is_routine && contract.ret.is_some() && !always_returns(&anf.block) {
        return Err(wp::malformed(&callable.name));
    }
    let vc = |kind, formula, origin: &SourceSpan, erasable| VerificationCondition {
        owner: id,
        owner_name: callable.name.clone(),
        kind,
        formula,
        origin: origin.clone(),
        erasable_origin: erasable,
    };
    let mut out = Vec::new();
    let requires = Formula::and_all(contract.requires.iter().cloned());
    if is_routine {
        let post = Formula::and_all(contract.ensures.iter().cloned());
        let body = wp(tp, &anf, &post, env);
        out.push(vc(
            VcKind::Postcondition,
            Formula::implies(requires.clone(), body),
            &callable.span,
            false,
        ));
    } else if contains_named_call(&anf.block) {
        let body = wp(tp, &anf, &Formula::True, env);
        out.push(vc(VcKind::CalleePrecondition, body, &callable.span, false));
    }

    if mode != Mode::Sound {
        return Ok(out);
    }
    let (Some(component), Some(measure)) = (components.get(&id), contract.decreases.clone()) else {
        return Ok(out);
    };
    let mut sites = Vec::new();
    call_sites(&anf.block, &mut sites);
    for (site, ghost, span) in sites {
        let ty_of = |e: &Expr| anf.ty(tp, e).clone();
        for (target, _) in call_targets_with(tp, &site, Policy::Overapprox, &ty_of) {
            if components.get(&target) != Some(component) || !has_decreases(tp, target) {
                continue;
            }
            let callee = env.get(target).expect("contract").clone();
            let callee_measure = callee.decreases.clone().expect("measure");
            let args: Vec<Expr> = match &site.kind {
                ExprKind::Call { args, .. }
                | ExprKind::MethodCall { args, .. }
                | ExprKind::Invoke { args, .. }
                | ExprKind::New { args, .. } => args.clone(),
                _ => unreachable!(),
            };
            let mut w = wp::Wp::new(tp, &anf, env);
            let nonneg = w
                .to_site(&anf.block, site.id, &|_, _| wp::nonneg(&measure))
                .expect("site is in the body");
            let bound = w
                .to_site(&anf.block, site.id, &|w, _| {
                    let (map, havocs) = w.bind_args(&callee.params, &args);
                    let callee_at_site = callee_measure.subst(&map);
                    wp::Translated::<()>::wrap(
                        havocs,
                        Formula::cmp(CmpOp::Lt, callee_at_site, measure.clone()),
                    )
                })
                .expect("site is in the body");
            out.push(vc(
                VcKind::DecreasesNonneg,
                Formula::implies(requires.clone(), nonneg),
                &span,
                ghost,
            ));
            out.push(vc(
                VcKind::DecreasesBound,
                Formula::implies(requires.clone(), bound),
                &span,
                ghost,
            ));
        }
    }
    Ok(out)
}

/// Textual contract of a method, used to compare implementations against
/// their trait declarations.
fn contract_text(tp: &TypedProgram, id: CallableId) -> Option<Vec<String>> {
    let f = tp.function_decl(id)?;
    let mut out: Vec<String> = f
        .params
        .iter()
        .map(|p| format!("param {}", p.name))
        .collect();
    out.extend(
        f.requires
            .iter()
            .map(|e| format!("requires {}", expr_to_string(e))),
    );
    out.extend(
        f.ensures
            .iter()
            .map(|e| format!("ensures {}", expr_to_string(e))),
    );
    out.extend(
        f.decreases
            .iter()
            .map(|e| format!("decreases {}", expr_to_string(e))),
    );
    Some(out)
}

pub fn vcs_for_program(
    tp: &TypedProgram,
    mode: Mode,
) -> Result<Vec<VerificationCondition>, VcError> {
    let env = ContractEnv::build(tp);
    let components = if mode == Mode::Sound {
        recursive_components(tp)
    } else {
        HashMap::new()
    };
    let mut out = Vec::new();
    for c in &tp.callables {
        out.extend(vcs_with_components(tp, &env, c.id, mode, &components)?);
    }
    for class in tp.program.decls.iter().filter_map(|d| match d {
        crate::frontend::Decl::Class(c) => Some(c),
        _ => None,
    }) {
        let Some(trait_name) = &class.implements else {
            continue;
        };
        let Some(tdecl) = tp.program.find_trait(trait_name) else {
            continue;
        };
        for m in &tdecl.methods {
            let (Some(abs), Some(imp)) = (
                tp.method_of(trait_name, &m.name),
                tp.method_of(&class.name, &m.name),
            ) else {
                continue;
            };
            let same = contract_text(tp, abs) == contract_text(tp, imp);
            let imp_c = tp.callable(imp);
            out.push(VerificationCondition {
                owner: imp,
                owner_name: imp_c.name.clone(),
                kind: VcKind::TraitConformance,
                formula: if same { Formula::True } else { Formula::False },
                origin: imp_c.span.clone(),
                erasable_origin: false,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
