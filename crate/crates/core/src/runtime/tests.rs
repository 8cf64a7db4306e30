use super::*;
use crate::frontend::{parse, typecheck, Program};

const GOBRA: &str = "func recurse() -> int ensures false { return recurse(); }\n\
                     func test() ensures false { ghost var _ := recurse(); }\n";

const BAD: &str = "func recurse() -> int ensures false { return recurse(); }\n\
                   func test() ensures false { ghost var _ := recurse(); }\n\
                   func bad() -> int ensures result == 0 { test(); return 1; }\n";

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

fn typed(src: &str) -> TypedProgram {
    typecheck(&parse(src, "t.moo").unwrap()).unwrap()
}

fn run(tp: &TypedProgram, entry: &str, args: &[Value], budget: u64, check: bool) -> (Outcome, u64) {
    let mut fuel = Fuel::new(budget);
    let o = eval(tp, entry, args, &mut fuel, check);
    (o, fuel.consumed)
}

fn body_of(p: &Program, name: &str) -> usize {
    p.find_function(name)
        .unwrap()
        .body
        .as_ref()
        .unwrap()
        .stmts
        .len()
}

#[test]
fn erasure_drops_the_ghost_call() {
    let tp = erase(&typed(GOBRA)).unwrap();
    assert_eq!(body_of(&tp.program, "test"), 0);
    assert_eq!(body_of(&tp.program, "recurse"), 1);
}

#[test]
fn erasure_keeps_the_object() {
    let tp = erase(&typed(OMEGA)).unwrap();
    let test = tp.program.find_function("test").unwrap();
    let text = crate::frontend::pretty_print(&Program {
        decls: vec![crate::frontend::Decl::Function(test.clone())],
    });
    assert!(text.contains("var o := new Omega();"), "{text}");
    assert!(!text.contains("ghost"), "{text}");
    assert!(text.contains("return;"), "{text}");
}

#[test]
fn ghost_free_program_is_unchanged() {
    let src = "func f(x: int) -> int { var y := x + 1; return y; }";
    let tp = typed(src);
    assert_eq!(erase(&tp).unwrap().program, tp.program);
}

#[test]
fn erasure_is_idempotent() {
    for src in [GOBRA, BAD, OMEGA] {
        let once = erase(&typed(src)).unwrap();
        let twice = erase(&once).unwrap();
        assert_eq!(once.program, twice.program);
    }
}

#[test]
fn bad_returns_one_against_its_contract() {
    let tp = erase(&typed(BAD)).unwrap();
    let (o, _) = run(&tp, "bad", &[], 1_000_000, true);
    let Outcome::ContractViolation {
        callable,
        clause,
        index,
        text,
        returned,
        ..
    } = &o
    else {
        panic!("{o:?}")
    };
    assert_eq!(callable, "bad");
    assert_eq!(*clause, ClauseKind::Ensures);
    assert_eq!(*index, 0);
    assert_eq!(text, "result == 0");
    assert_eq!(returned, &Some(Value::Int(1)));
    assert!(
        o.to_string().contains("ensures result == 0 violated"),
        "{o}"
    );
    assert!(o.to_string().ends_with("returned 1"), "{o}");
    // without checks the value simply comes back
    assert_eq!(
        run(&tp, "bad", &[], 1_000_000, false).0,
        Outcome::Returned(Value::Int(1))
    );
}

#[test]
fn erased_test_terminates() {
    let tp = erase(&typed(GOBRA)).unwrap();
    let (o, used) = run(&tp, "test", &[], 1_000_000, false);
    assert_eq!(o, Outcome::Returned(Value::Unit));
    assert_eq!(used, 1);
}

#[test]
fn unerased_recursion_runs_out_of_fuel() {
    let tp = typed(GOBRA);
    assert_eq!(
        run(&tp, "recurse", &[], 1000, false).0,
        Outcome::FuelExhausted { consumed: 1000 }
    );
    assert_eq!(
        run(&tp, "test", &[], 10_000, false).0,
        Outcome::FuelExhausted { consumed: 10_000 }
    );
}

#[test]
fn omega_diverges_only_with_ghost_code() {
    let tp = typed(OMEGA);
    assert_eq!(
        run(&tp, "test", &[], 10_000, false).0,
        Outcome::FuelExhausted { consumed: 10_000 }
    );
    let (o, used) = run(&erase(&tp).unwrap(), "test", &[], 10_000, false);
    assert_eq!(o, Outcome::Returned(Value::Unit));
    assert!(used < 10, "{used}");
}

#[test]
fn field_initializers_and_closures() {
    let src = "class Counter {\n\
                 const base: int := 40;\n\
                 const step: (int) -> int;\n\
                 constructor(k: int) { this.step := (x: int) => x + k; }\n\
                 func next() -> int { return this.step(this.base) + 1; }\n\
               }\n\
               func main(k: int) -> int { var c := new Counter(k); return c.next(); }";
    let tp = typed(src);
    let (o, used) = run(&tp, "main", &[Value::Int(1)], 100, false);
    assert_eq!(o, Outcome::Returned(Value::Int(42)));
    // main, constructor, next, closure
    assert_eq!(used, 4);
}

#[test]
fn trait_calls_dispatch_on_the_receiver() {
    let src = "trait Shape { func area() -> int ensures result >= 0; }\n\
               class Sq implements Shape { const s: int; constructor(s: int) { this.s := s; }\n\
                 func area() -> int ensures result >= 0 { return this.s + this.s; } }\n\
               func use(sh: Shape) -> int { return sh.area(); }\n\
               func main() -> int { var q := new Sq(5); return use(q); }";
    let tp = typed(src);
    assert_eq!(
        run(&tp, "main", &[], 100, true).0,
        Outcome::Returned(Value::Int(10))
    );
}

#[test]
fn requires_is_checked_on_entry() {
    let tp = typed("func pos(a: int) -> int requires a > 0 ensures true { return a; }");
    let (o, _) = run(&tp, "pos", &[Value::Int(0)], 10, true);
    assert!(matches!(
        o,
        Outcome::ContractViolation {
            clause: ClauseKind::Requires,
            returned: None,
            ..
        }
    ));
    assert_eq!(
        run(&tp, "pos", &[Value::Int(0)], 10, false).0,
        Outcome::Returned(Value::Int(0))
    );
}

#[test]
fn entry_errors() {
    let tp = typed("func f(a: int) -> int { return a; }");
    let kind = |o: Outcome| match o {
        Outcome::RuntimeError { kind, .. } => kind,
        other => panic!("{other:?}"),
    };
    assert_eq!(
        kind(run(&tp, "g", &[], 10, false).0),
        RuntimeErrorKind::UnboundEntry
    );
    assert_eq!(
        kind(run(&tp, "f", &[], 10, false).0),
        RuntimeErrorKind::ArityMismatch
    );
    assert_eq!(
        kind(run(&tp, "f", &[Value::Bool(true)], 10, false).0),
        RuntimeErrorKind::ArgumentType
    );
}

#[test]
fn overflow_is_reported() {
    let tp = typed("func f(a: int) -> int { return a + 1; }");
    let (o, _) = run(&tp, "f", &[Value::Int(i64::MAX)], 10, false);
    assert!(matches!(
        o,
        Outcome::RuntimeError {
            kind: RuntimeErrorKind::IntegerOverflow,
            ..
        }
    ));
}

#[test]
fn short_circuit_and_shadowing() {
    let src = "func loop() -> bool { return loop(); }\n\
               func f(x: int) -> int {\n\
                 if x > 0 || loop() { var x := 7; if false && loop() { return 0; } return x; }\n\
                 return x; }";
    let tp = typed(src);
    assert_eq!(
        run(&tp, "f", &[Value::Int(1)], 10, false).0,
        Outcome::Returned(Value::Int(7))
    );
    assert_eq!(
        run(&tp, "f", &[Value::Int(0)], 10, false).0,
        Outcome::FuelExhausted { consumed: 10 }
    );
}

#[test]
fn deep_recursion_does_not_overflow_the_stack() {
    let src =
        "func down(n: int) -> int { if n == 0 { return 0; } var r := down(n - 1); return r + 1; }";
    let tp = typed(src);
    assert_eq!(
        run(&tp, "down", &[Value::Int(200_000)], 1_000_000, false).0,
        Outcome::Returned(Value::Int(200_000))
    );
}

#[test]
fn fuel_is_monotone() {
    let src = "func down(n: int) -> int requires n >= 0 ensures result == n { if n == 0 { return 0; } var r := down(n - 1); return r + 1; }";
    let tp = typed(src);
    for n in 0..6 {
        let mut first = None;
        for budget in 1..12 {
            let (o, _) = run(&tp, "down", &[Value::Int(n)], budget, true);
            if let Some(f) = &first {
                assert_eq!(&o, f, "n = {n}, budget = {budget}");
            } else if !matches!(o, Outcome::FuelExhausted { .. }) {
                first = Some(o);
            }
        }
    }
}
