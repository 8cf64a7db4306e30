//! Call graphs over every callable, strongly connected components, and the
//! termination discipline enforced by each verification mode.

mod scc;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frontend::{
    CallableBody, CallableId, CallableKind, Expr, ExprKind, Resolution, Type, TypedProgram,
};
use crate::span::SourceSpan;

pub use scc::{sccs, Scc};

/// Termination policy, ordered from most permissive to strictest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Partial,
    SelfCheck,
    #[serde(rename = "callgraph")]
    CallGraph,
    Sound,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Partial, Mode::SelfCheck, Mode::CallGraph, Mode::Sound];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Partial => "partial",
            Mode::SelfCheck => "self-check",
            Mode::CallGraph => "callgraph",
            Mode::Sound => "sound",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!("unknown mode `{s}` (expected partial, self-check, callgraph or sound)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    FirstOrder,
    Overapprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Direct,
    HigherOrder,
    InitializerRef,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Direct => "direct",
            EdgeKind::HigherOrder => "higher_order",
            EdgeKind::InitializerRef => "initializer_ref",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: CallableId,
    pub to: CallableId,
    pub kind: EdgeKind,
    pub site: SourceSpan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: Vec<CallableId>,
    pub edges: Vec<Edge>,
}

impl CallGraph {
    pub fn edges_from(&self, from: CallableId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == from)
    }

    pub fn has_edge(&self, from: CallableId, to: CallableId) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }
}

/// Visits every expression of a callable's own code, stopping at nested
/// lambdas (their bodies belong to the lambda callables).
fn visit_own<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(e);
    if matches!(e.kind, ExprKind::Lambda { .. }) {
        return;
    }
    e.for_each_child(|c| visit_own(c, f));
}

fn own_exprs(tp: &TypedProgram, id: CallableId) -> Vec<&Expr> {
    let mut out = Vec::new();
    match tp.body(id) {
        CallableBody::Block(b) => b.for_each_expr(&mut |e| visit_own(e, &mut |x| out.push(x))),
        CallableBody::Expr(e) => visit_own(e, &mut |x| out.push(x)),
        CallableBody::None => {}
    }
    out
}

/// Field initializers that mention the field they define, with the span of
/// the first mention.
pub fn self_referential_initializers(tp: &TypedProgram) -> Vec<(CallableId, SourceSpan)> {
    let mut out = Vec::new();
    for c in &tp.callables {
        let CallableKind::FieldInit { decl, field } = c.kind else {
            continue;
        };
        let class = tp.program.decls[decl].name();
        let crate::frontend::Decl::Class(cd) = &tp.program.decls[decl] else {
            continue;
        };
        let fname = &cd.fields[field].name;
        let Some(init) = cd.fields[field].init.as_ref() else {
            continue;
        };
        let mut site = None;
        init.walk(&mut |e| {
            if site.is_some() {
                return;
            }
            if let Some(Resolution::Field {
                class: c2,
                field: f2,
            }) = tp.resolution.get(&e.id)
            {
                if c2 == class && f2 == fname {
                    site = Some(e.span.clone());
                }
            }
        });
        if let Some(site) = site {
            out.push((c.id, site));
        }
    }
    out
}

/// Callables a function value of type `ty` might evaluate to.
fn signature_matches(tp: &TypedProgram, ty: &Type) -> Vec<CallableId> {
    tp.callables
        .iter()
        .filter(|c| {
            matches!(
                c.kind,
                CallableKind::Lambda { .. }
                    | CallableKind::Function { .. }
                    | CallableKind::Method { .. }
            ) && &c.signature() == ty
        })
        .map(|c| c.id)
        .collect()
}

/// Concrete implementations that a call to abstract method `target` may dispatch to.
pub fn dispatch_targets(tp: &TypedProgram, target: CallableId) -> Vec<CallableId> {
    let callable = tp.callable(target);
    if !callable.is_abstract() {
        return Vec::new();
    }
    let (CallableKind::Method { decl, .. }, Some(f)) = (&callable.kind, tp.function_decl(target))
    else {
        return Vec::new();
    };
    let trait_name = tp.program.decls[*decl].name();
    tp.implementors(trait_name)
        .into_iter()
        .filter_map(|c| tp.method_of(&c.name, &f.name))
        .collect()
}

/// Possible targets of one call site, with the kind of edge each induces.
pub fn call_targets(tp: &TypedProgram, e: &Expr, policy: Policy) -> Vec<(CallableId, EdgeKind)> {
    call_targets_with(tp, e, policy, &|x| tp.ty(x).clone())
}

/// As [`call_targets`], typing invoked callees with `ty_of` (for rewritten
/// bodies whose nodes are not all in the program's type table).
pub fn call_targets_with(
    tp: &TypedProgram,
    e: &Expr,
    policy: Policy,
    ty_of: &dyn Fn(&Expr) -> Type,
) -> Vec<(CallableId, EdgeKind)> {
    let mut out = Vec::new();
    match &e.kind {
        ExprKind::Call { .. } | ExprKind::New { .. } => {
            if let Some(Resolution::Callable(id)) = tp.resolution.get(&e.id) {
                out.push((*id, EdgeKind::Direct));
            }
        }
        ExprKind::MethodCall { .. } => {
            if let Some(Resolution::Callable(id)) = tp.resolution.get(&e.id) {
                out.push((*id, EdgeKind::Direct));
                if policy == Policy::Overapprox {
                    for t in dispatch_targets(tp, *id) {
                        out.push((t, EdgeKind::HigherOrder));
                    }
                }
            }
        }
        ExprKind::Invoke { callee, .. } if policy == Policy::Overapprox => {
            for t in signature_matches(tp, &ty_of(callee)) {
                out.push((t, EdgeKind::HigherOrder));
            }
        }
        _ => {}
    }
    out
}

pub fn build_call_graph(tp: &TypedProgram, policy: Policy) -> CallGraph {
    let mut graph = CallGraph {
        nodes: tp.callables.iter().map(|c| c.id).collect(),
        edges: Vec::new(),
    };
    for c in &tp.callables {
        // a constructor runs its class's field initializers
        if let CallableKind::Constructor { .. } = c.kind {
            let class = tp.class_of_constructor(c.id).expect("constructor class");
            for init in tp.field_inits_of(&class.name) {
                graph.edges.push(Edge {
                    from: c.id,
                    to: init,
                    kind: EdgeKind::Direct,
                    site: tp.callable(init).span.clone(),
                });
            }
        }
        for e in own_exprs(tp, c.id) {
            for (to, kind) in call_targets(tp, e, policy) {
                graph.edges.push(Edge {
                    from: c.id,
                    to,
                    kind,
                    site: e.span.clone(),
                });
            }
        }
    }
    if policy == Policy::Overapprox {
        for (id, site) in self_referential_initializers(tp) {
            graph.edges.push(Edge {
                from: id,
                to: id,
                kind: EdgeKind::InitializerRef,
                site,
            });
        }
    }
    graph
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    SelfContractUse,
    ContractCycle,
    RecursiveFieldInitializer,
    MissingDecreases,
    LambdaInCycle,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::SelfContractUse => "self_contract_use",
            DiagnosticKind::ContractCycle => "contract_cycle",
            DiagnosticKind::RecursiveFieldInitializer => "recursive_field_initializer",
            DiagnosticKind::MissingDecreases => "missing_decreases",
            DiagnosticKind::LambdaInCycle => "lambda_in_cycle",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminationDiagnostic {
    pub callable: CallableId,
    pub kind: DiagnosticKind,
    /// Closed cycle starting at `callable`: the last element calls the first.
    pub cycle: Vec<CallableId>,
    pub site: SourceSpan,
}

impl TerminationDiagnostic {
    pub fn describe(&self, tp: &TypedProgram) -> String {
        let names: Vec<&str> = self
            .cycle
            .iter()
            .map(|c| tp.callable(*c).name.as_str())
            .collect();
        let name = &tp.callable(self.callable).name;
        match self.kind {
            DiagnosticKind::SelfContractUse => {
                format!("`{name}` calls itself and would rely on its own contract")
            }
            DiagnosticKind::ContractCycle => {
                format!("`{name}` is on a call cycle: {} -> {}", names.join(" -> "), names[0])
            }
            DiagnosticKind::RecursiveFieldInitializer => {
                format!("initializer `{name}` refers to the field it defines")
            }
            DiagnosticKind::MissingDecreases => format!(
                "`{name}` may recurse ({} -> {}) but has no decreases clause",
                names.join(" -> "),
                names[0]
            ),
            DiagnosticKind::LambdaInCycle => format!(
                "`{name}` may recurse through a function value ({} -> {}) and lambdas cannot carry decreases clauses",
                names.join(" -> "),
                names[0]
            ),
        }
    }
}

pub fn has_decreases(tp: &TypedProgram, id: CallableId) -> bool {
    tp.function_decl(id).is_some_and(|f| f.decreases.is_some())
}

/// Shortest cycle through `start` using only edges inside `members`, with the
/// site of its first edge.
fn shortest_cycle(
    graph: &CallGraph,
    start: CallableId,
    members: &HashSet<CallableId>,
) -> Option<(Vec<CallableId>, SourceSpan)> {
    if let Some(e) = graph.edges_from(start).find(|e| e.to == start) {
        return Some((vec![start], e.site.clone()));
    }
    let mut prev: HashMap<CallableId, (CallableId, SourceSpan)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for e in graph.edges_from(v) {
            if !members.contains(&e.to) {
                continue;
            }
            if e.to == start {
                let mut path = vec![v];
                let mut site = e.site.clone();
                let mut cur = v;
                while cur != start {
                    let (p, s) = prev[&cur].clone();
                    path.push(p);
                    site = s;
                    cur = p;
                }
                path.reverse();
                return Some((path, site));
            }
            if e.to != start && !prev.contains_key(&e.to) {
                prev.insert(e.to, (v, e.site.clone()));
                queue.push_back(e.to);
            }
        }
    }
    None
}

pub fn check_termination(tp: &TypedProgram, mode: Mode) -> Vec<TerminationDiagnostic> {
    let mut out = Vec::new();
    match mode {
        Mode::Partial => {}
        Mode::SelfCheck => {
            let graph = build_call_graph(tp, Policy::FirstOrder);
            for c in &tp.callables {
                // a decreases clause is the callable's own termination argument
                if has_decreases(tp, c.id) {
                    continue;
                }
                if let Some(e) = graph.edges_from(c.id).find(|e| e.to == c.id) {
                    out.push(TerminationDiagnostic {
                        callable: c.id,
                        kind: DiagnosticKind::SelfContractUse,
                        cycle: vec![c.id],
                        site: e.site.clone(),
                    });
                }
            }
        }
        Mode::CallGraph | Mode::Sound => {
            let policy = if mode == Mode::Sound {
                Policy::Overapprox
            } else {
                Policy::FirstOrder
            };
            let graph = build_call_graph(tp, policy);
            for scc in sccs(&graph).into_iter().filter(|s| s.is_nontrivial) {
                let members: HashSet<CallableId> = scc.members.iter().copied().collect();
                for &c in &scc.members {
                    let kind = match mode {
                        Mode::CallGraph => DiagnosticKind::ContractCycle,
                        _ if tp.callable(c).is_lambda() => DiagnosticKind::LambdaInCycle,
                        _ if has_decreases(tp, c) => continue,
                        _ => DiagnosticKind::MissingDecreases,
                    };
                    let (cycle, site) =
                        shortest_cycle(&graph, c, &members).expect("nontrivial scc has a cycle");
                    out.push(TerminationDiagnostic {
                        callable: c,
                        kind,
                        cycle,
                        site,
                    });
                }
            }
            for (id, site) in self_referential_initializers(tp) {
                out.push(TerminationDiagnostic {
                    callable: id,
                    kind: DiagnosticKind::RecursiveFieldInitializer,
                    cycle: vec![id],
                    site,
                });
            }
        }
    }
    out.sort_by_key(|d| (d.callable, d.kind));
    out
}

/// Graphviz rendering: solid edges are direct calls, dashed are
/// higher-order, dotted are initializer references.
pub fn to_dot(tp: &TypedProgram, graph: &CallGraph) -> String {
    let mut out = String::from("digraph callgraph {\n");
    for n in &graph.nodes {
        let _ = writeln!(
            out,
            "    n{} [label=\"{}#{}\"];",
            n.0,
            tp.callable(*n).name,
            n.0
        );
    }
    for e in &graph.edges {
        let style = match e.kind {
            EdgeKind::Direct => "solid",
            EdgeKind::HigherOrder => "dashed",
            EdgeKind::InitializerRef => "dotted",
        };
        let _ = writeln!(out, "    n{} -> n{} [style={style}];", e.from.0, e.to.0);
    }
    out.push_str("}\n");
    out
}

/// Plain-text listing of nodes, edges and SCCs.
pub fn to_text(tp: &TypedProgram, graph: &CallGraph) -> String {
    let name = |id: CallableId| format!("{}#{}", tp.callable(id).name, id.0);
    let mut out = String::from("nodes:\n");
    for n in &graph.nodes {
        let _ = writeln!(out, "  {}", name(*n));
    }
    out.push_str("edges:\n");
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  {} -> {} [{}] at {}:{}",
            name(e.from),
            name(e.to),
            e.kind,
            e.site.line,
            e.site.col
        );
    }
    out.push_str("sccs:\n");
    for s in sccs(graph) {
        let members: Vec<String> = s.members.iter().map(|m| name(*m)).collect();
        let _ = writeln!(
            out,
            "  {{{}}}{}",
            members.join(", "),
            if s.is_nontrivial { " nontrivial" } else { "" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, typecheck};

    const GOBRA: &str = "func recurse() -> int ensures false { return recurse(); }\n\
                         func test() ensures false { ghost var _ := recurse(); }";
    const KEY: &str = "func recurse1() -> int ensures false { return recurse2(); }\n\
                       func recurse2() -> int ensures false { return recurse1(); }\n\
                       func test() ensures false { ghost var x := recurse1(); return; }";
    const OMEGA: &str = "trait Uninhabited { func get() -> int ensures false; }\n\
                         class Omega {\n\
                           const omega: (Omega) -> Uninhabited;\n\
                           constructor() { this.omega := (o: Omega) => o.omega(o); }\n\
                         }\n\
                         func test() ensures false { var o := new Omega(); ghost var _ := o.omega(o).get(); }";
    const OMEGA_DIRECT: &str = "trait Uninhabited { func get() -> int ensures false; }\n\
                                class Omega { const omega: (Omega) -> Uninhabited := (o: Omega) => o.omega(o); }";

    fn typed(src: &str) -> TypedProgram {
        typecheck(&parse(src, "t.moo").unwrap()).unwrap()
    }

    fn edge_names(tp: &TypedProgram, g: &CallGraph) -> Vec<(String, String, EdgeKind)> {
        g.edges
            .iter()
            .map(|e| {
                (
                    tp.callable(e.from).name.clone(),
                    tp.callable(e.to).name.clone(),
                    e.kind,
                )
            })
            .collect()
    }

    fn e(a: &str, b: &str, k: EdgeKind) -> (String, String, EdgeKind) {
        (a.into(), b.into(), k)
    }

    #[test]
    fn self_recursion_first_order_edges() {
        let tp = typed(GOBRA);
        let g = build_call_graph(&tp, Policy::FirstOrder);
        assert_eq!(
            edge_names(&tp, &g),
            vec![
                e("recurse", "recurse", EdgeKind::Direct),
                e("test", "recurse", EdgeKind::Direct)
            ]
        );
        let s = sccs(&g);
        assert_eq!(s.len(), 2);
        assert!(s[0].is_nontrivial);
        assert!(!s[1].is_nontrivial);
    }

    #[test]
    fn mutual_recursion_cycle() {
        let tp = typed(KEY);
        let g = build_call_graph(&tp, Policy::FirstOrder);
        assert_eq!(
            edge_names(&tp, &g),
            vec![
                e("recurse1", "recurse2", EdgeKind::Direct),
                e("recurse2", "recurse1", EdgeKind::Direct),
                e("test", "recurse1", EdgeKind::Direct)
            ]
        );
        let s = sccs(&g);
        assert_eq!(s[0].members, vec![CallableId(0), CallableId(1)]);
        assert!(s[0].is_nontrivial);
        assert!(check_termination(&tp, Mode::SelfCheck).is_empty());
        let cg = check_termination(&tp, Mode::CallGraph);
        assert_eq!(cg.len(), 2);
        assert_eq!(cg[0].cycle, vec![CallableId(0), CallableId(1)]);
    }

    #[test]
    fn omega_hidden_edge() {
        let tp = typed(OMEGA);
        let fo = build_call_graph(&tp, Policy::FirstOrder);
        let lambda = tp.callable_by_name("lambda#0").unwrap().id;
        assert_eq!(fo.edges_from(lambda).count(), 0);
        assert!(sccs(&fo).iter().all(|s| !s.is_nontrivial));
        let oa = build_call_graph(&tp, Policy::Overapprox);
        let from_lambda: Vec<_> = oa.edges_from(lambda).collect();
        assert_eq!(from_lambda.len(), 1);
        assert_eq!(from_lambda[0].to, lambda);
        assert_eq!(from_lambda[0].kind, EdgeKind::HigherOrder);

        assert!(check_termination(&tp, Mode::CallGraph).is_empty());
        let sound = check_termination(&tp, Mode::Sound);
        assert_eq!(sound.len(), 1);
        assert_eq!(sound[0].kind, DiagnosticKind::LambdaInCycle);
        assert_eq!(sound[0].callable, lambda);
    }

    #[test]
    fn omega_direct_initializer() {
        let tp = typed(OMEGA_DIRECT);
        let d = check_termination(&tp, Mode::CallGraph);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::RecursiveFieldInitializer);
        assert_eq!(tp.callable(d[0].callable).name, "Omega.omega.init");
        let oa = build_call_graph(&tp, Policy::Overapprox);
        assert!(oa
            .edges
            .iter()
            .any(|e| e.kind == EdgeKind::InitializerRef && e.from == e.to));
    }

    #[test]
    fn partial_never_complains() {
        assert!(check_termination(&typed(GOBRA), Mode::Partial).is_empty());
    }

    #[test]
    fn self_check_sees_direct_self_calls() {
        let tp = typed(GOBRA);
        let d = check_termination(&tp, Mode::SelfCheck);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::SelfContractUse);
        assert_eq!(d[0].cycle, vec![CallableId(0)]);
    }

    #[test]
    fn trait_dispatch_is_over_approximated() {
        let tp = typed(
            "trait T { func m(x: int) -> int; }\n\
             class C implements T { func m(x: int) -> int { var t := mk(); return t.m(x); } }\n\
             func mk() -> T { return new C(); }",
        );
        let fo = build_call_graph(&tp, Policy::FirstOrder);
        assert!(sccs(&fo).iter().all(|s| !s.is_nontrivial));
        let oa = build_call_graph(&tp, Policy::Overapprox);
        assert!(sccs(&oa).iter().any(|s| s.is_nontrivial));
    }

    #[test]
    fn empty_graph_has_no_sccs() {
        assert!(sccs(&CallGraph::default()).is_empty());
    }

    #[test]
    fn dot_styles() {
        let tp = typed(OMEGA);
        let dot = to_dot(&tp, &build_call_graph(&tp, Policy::Overapprox));
        assert!(dot.contains("n2 -> n2 [style=dashed];"), "{dot}");
        assert!(dot.contains("label=\"lambda#0#2\""), "{dot}");
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("total".parse::<Mode>().is_err());
    }
}
