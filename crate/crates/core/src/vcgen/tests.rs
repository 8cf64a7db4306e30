use std::collections::BTreeMap;

use num::BigInt;

use super::*;
use crate::frontend::{parse, typecheck, Decl, Program};

const GOBRA: &str = "func recurse() -> int ensures false { return recurse(); }\n\
                     func test() ensures false { ghost var _ := recurse(); }\n";

const KEY: &str = "func recurse1() -> int ensures false { return recurse2(); }\n\
                   func recurse2() -> int ensures false { return recurse1(); }\n\
                   func test() ensures false { ghost var x := recurse1(); return; }\n";

const OMEGA: &str = "trait Uninhabited { func get() -> int ensures false; }\n\
                     class Omega {\n\
                       const omega: (Omega) -> Uninhabited;\n\
                       constructor() { this.omega := (o: Omega) => o.omega(o); }\n\
                     }\n\
                     func test() ensures false {\n\
                       var o := new Omega();\n\
                       ghost var u := o.omega(o).get();\n\
                       return;\n\
                     }\n";

const FACT: &str = "func fact(n: int) -> int requires n >= 0 ensures result >= 1 decreases n {\n\
                      if n == 0 { return 1; } else { var r := fact(n - 1); return r + n; }\n\
                    }\n";

fn typed(src: &str) -> TypedProgram {
    typecheck(&parse(src, "t.moo").unwrap()).unwrap()
}

fn id(tp: &TypedProgram, name: &str) -> CallableId {
    tp.callable_by_name(name).unwrap().id
}

/// Independent truth oracle: free and bound integers range over `-R..=R`,
/// booleans over both values, references are opaque.
const R: i64 = 6;

fn holds(f: &Formula, env: &mut BTreeMap<String, Val>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Not(a) => !holds(a, env),
        Formula::And(a, b) => holds(a, env) && holds(b, env),
        Formula::Or(a, b) => holds(a, env) || holds(b, env),
        Formula::Implies(a, b) => !holds(a, env) || holds(b, env),
        Formula::BoolVar(v) => matches!(env.get(v), Some(Val::B(true))),
        Formula::RefEq(a, b) => a == b,
        Formula::Cmp { op, lhs, rhs } => {
            let look = |n: &str| match env.get(n) {
                Some(Val::I(i)) => Some(BigInt::from(*i)),
                _ => None,
            };
            let l = lhs.eval(&look).unwrap();
            let r = rhs.eval(&look).unwrap();
            op.holds(&l, &r)
        }
        Formula::Forall { var, sort, body } => {
            let saved = env.get(var).cloned();
            let ok = domain(sort).into_iter().all(|v| {
                env.insert(var.clone(), v);
                holds(body, env)
            });
            match saved {
                Some(v) => env.insert(var.clone(), v),
                None => env.remove(var),
            };
            ok
        }
    }
}

#[derive(Debug, Clone)]
enum Val {
    I(i64),
    B(bool),
    Opaque,
}

fn domain(sort: &Sort) -> Vec<Val> {
    match sort {
        Sort::Int => (-R..=R).map(Val::I).collect(),
        Sort::Bool => vec![Val::B(false), Val::B(true)],
        _ => vec![Val::Opaque],
    }
}

fn valid_by_enumeration(f: &Formula) -> bool {
    let free: Vec<(String, Sort)> = f.free_var_sorts().into_iter().collect();
    let closed = free
        .into_iter()
        .rev()
        .fold(f.clone(), |acc, (v, s)| Formula::forall(v, s, acc));
    holds(&closed, &mut BTreeMap::new())
}

fn flip_ghosts(b: &mut Block) {
    for s in &mut b.stmts {
        match &mut s.kind {
            StmtKind::VarDecl { ghost, .. } => *ghost = false,
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                flip_ghosts(then_block);
                if let Some(e) = else_block {
                    flip_ghosts(e);
                }
            }
            _ => {}
        }
    }
}

fn without_ghosts(p: &Program) -> Program {
    let mut p = p.clone();
    for d in &mut p.decls {
        match d {
            Decl::Function(f) => {
                if let Some(b) = &mut f.body {
                    flip_ghosts(b);
                }
            }
            Decl::Class(c) => {
                if let Some(k) = &mut c.constructor {
                    flip_ghosts(&mut k.body);
                }
                for m in &mut c.methods {
                    if let Some(b) = &mut m.body {
                        flip_ghosts(b);
                    }
                }
            }
            Decl::Trait(_) => {}
        }
    }
    p
}

#[test]
fn recurse_assumes_its_own_postcondition() {
    let tp = typed(GOBRA);
    let env = ContractEnv::build(&tp);
    let vcs = vcs_for_callable(&tp, &env, id(&tp, "recurse"), Mode::Partial).unwrap();
    assert_eq!(vcs.len(), 1);
    assert_eq!(vcs[0].kind, VcKind::Postcondition);
    assert_eq!(
        vcs[0].formula.to_string(),
        "(forall t0:int (=> false false))"
    );
    assert!(valid_by_enumeration(&vcs[0].formula));
}

#[test]
fn call_to_false_contract_proves_anything() {
    let tp = typed(
        "func test() ensures false { test(); }\n\
         func bad() -> int ensures result == 0 { test(); return 1; }",
    );
    let env = ContractEnv::build(&tp);
    let vcs = vcs_for_callable(&tp, &env, id(&tp, "bad"), Mode::Partial).unwrap();
    assert_eq!(vcs.len(), 1);
    assert_eq!(
        vcs[0].formula.to_string(),
        "(forall _:unit (=> false (cmp == (+ 1) (+ 0))))"
    );
    assert!(valid_by_enumeration(&vcs[0].formula));
}

#[test]
fn omega_test_is_discharged_by_the_abstract_contract() {
    let tp = typed(OMEGA);
    let env = ContractEnv::build(&tp);
    let vcs = vcs_for_callable(&tp, &env, id(&tp, "test"), Mode::Partial).unwrap();
    assert_eq!(vcs.len(), 1);
    let text = vcs[0].formula.to_string();
    assert!(
        text.contains("(forall t0:Uninhabited (forall u:int (=> false false)))"),
        "{text}"
    );
    assert!(vcs[0].formula.free_vars().is_empty());
    assert!(valid_by_enumeration(&vcs[0].formula));
}

#[test]
fn abstract_methods_have_no_vcs() {
    let tp = typed(OMEGA);
    let env = ContractEnv::build(&tp);
    let get = id(&tp, "Uninhabited.get");
    for mode in Mode::ALL {
        assert!(vcs_for_callable(&tp, &env, get, mode).unwrap().is_empty());
    }
}

#[test]
fn fact_decreases_obligations() {
    let tp = typed(FACT);
    let env = ContractEnv::build(&tp);
    let vcs = vcs_for_callable(&tp, &env, id(&tp, "fact"), Mode::Sound).unwrap();
    let kinds: Vec<VcKind> = vcs.iter().map(|v| v.kind).collect();
    assert_eq!(
        kinds,
        [
            VcKind::Postcondition,
            VcKind::DecreasesNonneg,
            VcKind::DecreasesBound
        ]
    );
    let n = || LinTerm::var("n");
    let zero = || LinTerm::constant(0);
    let guard = Formula::and(
        Formula::cmp(CmpOp::Ge, n(), zero()),
        Formula::not(Formula::cmp(CmpOp::Eq, n(), zero())),
    );
    let nonneg = Formula::implies(guard.clone(), Formula::cmp(CmpOp::Ge, n(), zero()));
    let bound = Formula::implies(
        guard,
        Formula::cmp(CmpOp::Lt, n().sub(&LinTerm::constant(1)), n()),
    );
    // the generated obligations agree with the hand expansion pointwise
    for (got, want) in [(&vcs[1].formula, &nonneg), (&vcs[2].formula, &bound)] {
        for v in -R..=R {
            let mut env = BTreeMap::from([("n".to_string(), Val::I(v))]);
            assert_eq!(
                holds(got, &mut env),
                holds(want, &mut env),
                "n = {v}: {got}"
            );
        }
        assert!(valid_by_enumeration(got), "{got}");
    }
    assert!(valid_by_enumeration(&vcs[0].formula));
    for v in &vcs[1..] {
        assert!(!v.erasable_origin);
    }
    // no decreases obligations outside sound mode
    for mode in [Mode::Partial, Mode::SelfCheck, Mode::CallGraph] {
        assert_eq!(
            vcs_for_callable(&tp, &env, id(&tp, "fact"), mode)
                .unwrap()
                .len(),
            1
        );
    }
}

#[test]
fn broken_measure_is_caught() {
    let tp = typed(
        "func f(n: int) -> int ensures true decreases n { if n > 0 { var r := f(n + 1); return r; } return 0; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Sound).unwrap();
    let bound = vcs
        .iter()
        .find(|v| v.kind == VcKind::DecreasesBound)
        .unwrap();
    assert!(!valid_by_enumeration(&bound.formula));
    let nonneg = vcs
        .iter()
        .find(|v| v.kind == VcKind::DecreasesNonneg)
        .unwrap();
    assert!(valid_by_enumeration(&nonneg.formula));
}

#[test]
fn ghost_call_sites_are_erasable() {
    let tp = typed(
        "func f(n: int) -> int requires n >= 0 ensures true decreases n {\n\
           if n > 0 { ghost var r := f(n - 1); } return 0; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Sound).unwrap();
    let dec: Vec<_> = vcs
        .iter()
        .filter(|v| v.kind != VcKind::Postcondition)
        .collect();
    assert_eq!(dec.len(), 2);
    assert!(dec.iter().all(|v| v.erasable_origin));
}

#[test]
fn self_recursion_program_has_two_valid_vcs() {
    let tp = typed(GOBRA);
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let owners: Vec<&str> = vcs.iter().map(|v| v.owner_name.as_str()).collect();
    assert_eq!(owners, ["recurse", "test"]);
    assert!(vcs.iter().all(|v| valid_by_enumeration(&v.formula)));
}

#[test]
fn mutual_recursion_program_has_three_valid_vcs() {
    let tp = typed(KEY);
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let owners: Vec<&str> = vcs.iter().map(|v| v.owner_name.as_str()).collect();
    assert_eq!(owners, ["recurse1", "recurse2", "test"]);
    assert!(vcs.iter().all(|v| valid_by_enumeration(&v.formula)));
}

#[test]
fn empty_program_has_no_vcs() {
    let tp = typed("");
    for mode in Mode::ALL {
        assert!(vcs_for_program(&tp, mode).unwrap().is_empty());
    }
}

#[test]
fn ghost_flags_do_not_change_formulas() {
    for src in [GOBRA, KEY, OMEGA, FACT] {
        let p = parse(src, "t.moo").unwrap();
        let a = vcs_for_program(&typecheck(&p).unwrap(), Mode::Sound).unwrap();
        let b = vcs_for_program(&typecheck(&without_ghosts(&p)).unwrap(), Mode::Sound).unwrap();
        let fa: Vec<&Formula> = a.iter().map(|v| &v.formula).collect();
        let fb: Vec<&Formula> = b.iter().map(|v| &v.formula).collect();
        assert_eq!(fa, fb);
    }
}

#[test]
fn quantifiers_only_in_positive_positions() {
    for src in [GOBRA, KEY, OMEGA, FACT] {
        for mode in Mode::ALL {
            for vc in vcs_for_program(&typed(src), mode).unwrap() {
                assert!(vc.formula.quantifiers_positive(), "{vc}");
            }
        }
    }
}

#[test]
fn shadowed_names_do_not_capture() {
    // the inner `x` must not be confused with the parameter
    let tp = typed(
        "func g(a: int) -> int ensures result == a + 1 { return a + 1; }\n\
         func f(x: int) -> int ensures result == x + 2 {\n\
           if x > 0 { var x := g(x); return x + 1; }\n\
           var y := g(x); return y + 1; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let f = vcs.iter().find(|v| v.owner_name == "f").unwrap();
    assert!(valid_by_enumeration(&f.formula), "{}", f.formula);

    let tp = typed(
        "func g(a: int) -> int ensures result == a + 1 { return a + 1; }\n\
         func f(x: int) -> int ensures result == x + 1 {\n\
           if x > 0 { var x := g(x); return x + 1; }\n\
           return x + 1; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let f = vcs.iter().find(|v| v.owner_name == "f").unwrap();
    assert!(!valid_by_enumeration(&f.formula), "{}", f.formula);
}

#[test]
fn binder_is_renamed_when_it_occurs_in_arguments() {
    let tp = typed(
        "func inc(a: int) -> int ensures result == a + 1 { return a + 1; }\n\
         func f(x: int) -> int ensures result == x + 1 { var y := x; var y := inc(y); return y; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let f = vcs.iter().find(|v| v.owner_name == "f").unwrap();
    assert!(valid_by_enumeration(&f.formula), "{}", f.formula);
}

#[test]
fn preconditions_are_checked_at_call_sites() {
    let tp = typed(
        "func pos(a: int) -> int requires a > 0 ensures result > 0 { return a; }\n\
         func ok() -> int ensures result > 0 { var r := pos(3); return r; }\n\
         func bad() -> int ensures true { var r := pos(0); return r; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let by = |n: &str| vcs.iter().find(|v| v.owner_name == n).unwrap();
    assert!(valid_by_enumeration(&by("ok").formula));
    assert!(!valid_by_enumeration(&by("bad").formula));
}

#[test]
fn short_circuited_calls_are_assumed_only_when_evaluated() {
    let tp = typed(
        "func never() -> bool ensures false { return never(); }\n\
         func or_(x: int) -> int ensures result == 0 { if x > 0 || never() { return 1; } return 0; }\n\
         func and_(x: int) -> int ensures result == 0 { if x > 0 && never() { return 1; } return 0; }\n\
         func imp(x: int) -> int ensures result == 0 { if x > 0 ==> never() { return 1; } return 0; }\n\
         func guarded(x: int) -> int ensures x > 0 ==> result == 0 { if x > 0 && never() { return 1; } return 0; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let by = |n: &str| vcs.iter().find(|v| v.owner_name == n).unwrap();
    // x = 1 skips the call in `or_` and returns 1
    assert!(!valid_by_enumeration(&by("or_").formula));
    // x = 0 skips the call in `and_`, which then returns 0, and in `imp`, which returns 1
    assert!(valid_by_enumeration(&by("and_").formula));
    assert!(!valid_by_enumeration(&by("imp").formula));
    assert!(valid_by_enumeration(&by("guarded").formula));
}

#[test]
fn callee_preconditions_apply_only_when_the_call_runs() {
    let tp = typed(
        "func pos(a: int) -> bool requires a > 0 ensures true { return true; }\n\
         func f(x: int) -> bool ensures true { var b := x > 0 && pos(x); return b; }\n\
         func g(x: int) -> bool ensures true { var b := x > 0 || pos(x); return b; }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let by = |n: &str| vcs.iter().find(|v| v.owner_name == n).unwrap();
    assert!(valid_by_enumeration(&by("f").formula));
    assert!(!valid_by_enumeration(&by("g").formula));
}

#[test]
fn constructors_only_carry_call_obligations() {
    let tp = typed(
        "func pos(a: int) -> int requires a > 0 ensures true { return a; }\n\
         class A { const v: int; constructor(k: int) { var t := pos(k); this.v := t; } }\n\
         class B { const v: int; constructor() { this.v := 1; } }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let ctor: Vec<_> = vcs
        .iter()
        .filter(|v| v.owner_name.ends_with("constructor"))
        .collect();
    assert_eq!(ctor.len(), 1);
    assert_eq!(ctor[0].owner_name, "A.constructor");
    assert_eq!(ctor[0].kind, VcKind::CalleePrecondition);
    assert!(!valid_by_enumeration(&ctor[0].formula));
}

#[test]
fn trait_conformance_is_verbatim() {
    let tp = typed(
        "trait T { func m(x: int) -> int ensures result > x; }\n\
         class Good implements T { constructor() {} func m(x: int) -> int ensures result > x { return x + 1; } }\n\
         class Weak implements T { constructor() {} func m(x: int) -> int ensures true { return x; } }",
    );
    let vcs = vcs_for_program(&tp, Mode::Partial).unwrap();
    let conf: Vec<_> = vcs
        .iter()
        .filter(|v| v.kind == VcKind::TraitConformance)
        .map(|v| (v.owner_name.as_str(), v.formula.clone()))
        .collect();
    assert_eq!(
        conf,
        [("Good.m", Formula::True), ("Weak.m", Formula::False)]
    );
}

#[test]
fn two_armed_if_counts_as_returning() {
    let tp = typed("func f(x: int) -> int { if x > 0 { return 1; } else { return 2; } }");
    assert!(vcs_for_program(&tp, Mode::Partial).is_ok());
}

#[test]
fn dump_lines_parse_back() {
    for src in [GOBRA, KEY, OMEGA, FACT] {
        for vc in vcs_for_program(&typed(src), Mode::Sound).unwrap() {
            let line = vc.to_string();
            let (head, formula) = line.split_once(": ").unwrap();
            assert!(head.starts_with(&vc.owner_name), "{line}");
            assert!(head.contains(vc.kind.as_str()), "{line}");
            assert_eq!(parse_formula(formula).unwrap(), vc.formula, "{line}");
        }
    }
}
