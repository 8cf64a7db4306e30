//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use miniver_core::callgraph::check_termination;
use miniver_core::driver::{load, verify_source, Verdict};
use miniver_core::frontend::{parse, parse_bytes, pretty_print, ExprKind, TypeExpr, TypedProgram};
use miniver_core::runtime::{erase, eval, ClauseKind, Fuel, Outcome, Value};
use miniver_core::solver::{brute_force, is_valid, Verdict as SolverVerdict};
use miniver_core::vcgen::parse_formula;
use miniver_core::Mode;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value as Json;

type Check = Result<String, String>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_files() -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "moo"))
        .collect();
    v.sort();
    v
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

fn typed(path: &Path) -> TypedProgram {
    let src = std::fs::read_to_string(path).unwrap();
    load(&src, &file_name(path)).unwrap_or_else(|r| panic!("{}: {r:?}", path.display()))
}

fn miniver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miniver"))
        .args(args)
        .current_dir(corpus_dir())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn verdict_matrix() -> Check {
    let start = Instant::now();
    let out = miniver(&[
        "matrix",
        ".",
        "--manifest",
        "expected.json",
        "--format",
        "json",
    ]);
    let elapsed = start.elapsed();
    let v: Json = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let cells = v["cells"].as_array().ok_or("no cells")?;
    let mismatched: Vec<String> = cells
        .iter()
        .filter(|c| c["matches"] != true)
        .map(|c| format!("{} [{}]", c["file"], c["mode"]))
        .collect();
    ensure(
        out.status.code() == Some(0) && mismatched.is_empty(),
        || format!("exit {:?}, mismatched {mismatched:?}", out.status.code()),
    )?;
    let headline = [
        ("gobra_exploit.moo", "partial", "verified", None),
        ("bad_client.moo", "partial", "verified", None),
        ("key_exploit.moo", "self-check", "verified", None),
        ("omega_exploit.moo", "callgraph", "verified", None),
        (
            "omega_direct.moo",
            "callgraph",
            "rejected",
            Some("recursive_field_initializer"),
        ),
    ];
    for (file, mode, expected, reason) in headline {
        let cell = cells
            .iter()
            .find(|c| c["file"] == file && c["mode"] == mode && c.get("callable").is_none())
            .ok_or_else(|| format!("no cell for {file} [{mode}]"))?;
        ensure(cell["actual"] == expected, || {
            format!("{file} [{mode}] is {}", cell["actual"])
        })?;
        if let Some(r) = reason {
            let reasons = cell["reasons"].as_array().unwrap();
            ensure(reasons.iter().any(|x| x == r), || {
                format!("{file} [{mode}] lacks {r}")
            })?;
        }
    }
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{} cells match in {:.2?}", cells.len(), elapsed))
}

fn proved_false_demo() -> Check {
    let verify = miniver(&["verify", "bad_client.moo", "--mode", "partial"]);
    ensure(verify.status.code() == Some(0), || {
        format!(
            "verify exited {:?}: {}",
            verify.status.code(),
            stdout(&verify)
        )
    })?;
    let run = miniver(&[
        "run",
        "bad_client.moo",
        "--entry",
        "bad",
        "--check-contracts",
    ]);
    let text = stdout(&run);
    ensure(run.status.code() == Some(1), || {
        format!("run exited {:?}", run.status.code())
    })?;
    ensure(
        text.contains("ensures result == 0 violated; returned 1"),
        || text.clone(),
    )?;
    Ok(text.lines().next().unwrap_or_default().to_string())
}

fn frames(text: &str) -> Option<u64> {
    text.lines()
        .find_map(|l| l.strip_prefix("frames: "))
        .and_then(|n| n.parse().ok())
}

fn erasure_demo() -> Check {
    let exploits = [
        "gobra_exploit.moo",
        "bad_client.moo",
        "key_exploit.moo",
        "omega_exploit.moo",
        "omega_direct.moo",
    ];
    let mut worst = 0;
    for file in exploits {
        let full = miniver(&[
            "run",
            file,
            "--entry",
            "test",
            "--fuel",
            "10000",
            "--no-erase",
        ]);
        ensure(full.status.code() == Some(3), || {
            format!("{file} un-erased exited {:?}", full.status.code())
        })?;
        let erased = miniver(&["run", file, "--entry", "test", "--fuel", "10000"]);
        let n = frames(&stdout(&erased)).unwrap_or(u64::MAX);
        ensure(erased.status.code() == Some(0) && n < 10, || {
            format!(
                "{file} erased exited {:?} after {n} frames",
                erased.status.code()
            )
        })?;
        worst = worst.max(n);
    }
    Ok(format!(
        "{} exploits diverge un-erased and finish erased within {worst} frames",
        exploits.len()
    ))
}

fn random_args(tp: &TypedProgram, name: &str, rng: &mut StdRng) -> Option<Vec<Value>> {
    let f = tp.program.find_function(name)?;
    f.params
        .iter()
        .map(|p| match p.ty {
            TypeExpr::Int => Some(Value::Int(rng.gen_range(-20..=20))),
            TypeExpr::Bool => Some(Value::Bool(rng.gen())),
            _ => None,
        })
        .collect()
}

fn is_requires_violation(o: &Outcome) -> bool {
    matches!(
        o,
        Outcome::ContractViolation {
            clause: ClauseKind::Requires,
            ..
        }
    )
}

fn sound_mode_safety() -> Check {
    let mut rng = StdRng::seed_from_u64(4);
    let mut runs = 0;
    let mut programs = 0;
    for path in corpus_files() {
        let src = std::fs::read_to_string(&path).unwrap();
        if verify_source(&src, &file_name(&path), Mode::Sound)
            .0
            .verdict()
            != Verdict::Verified
        {
            continue;
        }
        programs += 1;
        let full = typed(&path);
        let erased = erase(&full).map_err(|e| e.to_string())?;
        let entries: Vec<String> = full
            .program
            .functions()
            .filter(|f| f.owner.is_none())
            .map(|f| f.name.clone())
            .collect();
        for entry in &entries {
            for _ in 0..25 {
                let Some(args) = random_args(&full, entry, &mut rng) else {
                    continue;
                };
                for tp in [&full, &erased] {
                    let mut fuel = Fuel::new(1_000_000);
                    let o = eval(tp, entry, &args, &mut fuel, true);
                    if is_requires_violation(&o) {
                        continue;
                    }
                    ensure(matches!(o, Outcome::Returned(_)), || {
                        format!("{} {entry}{args:?}: {o}", file_name(&path))
                    })?;
                    runs += 1;
                }
            }
        }
    }
    ensure(programs > 0, || {
        "no corpus program verifies under sound".into()
    })?;
    Ok(format!(
        "{runs} admissible runs over {programs} sound-verified programs, no violations"
    ))
}

fn lin(rng: &mut StdRng) -> String {
    let mut s = format!("(+ {}", rng.gen_range(-3..=3));
    for v in ["x", "y", "z"] {
        if rng.gen_bool(0.5) {
            s.push_str(&format!(" (* {} {v})", rng.gen_range(-3..=3)));
        }
    }
    s + ")"
}

fn random_formula(rng: &mut StdRng, depth: u32) -> String {
    let ops = ["==", "!=", "<", "<=", ">", ">="];
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..8) {
            0 => "true".into(),
            1 => "false".into(),
            _ => format!(
                "(cmp {} {} {})",
                ops[rng.gen_range(0..6)],
                lin(rng),
                lin(rng)
            ),
        };
    }
    match rng.gen_range(0..4) {
        0 => format!("(not {})", random_formula(rng, depth - 1)),
        k => format!(
            "({} {} {})",
            ["and", "or", "=>"][k - 1],
            random_formula(rng, depth - 1),
            random_formula(rng, depth - 1)
        ),
    }
}

fn solver_soundness() -> Check {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    let mut proved = 0;
    for _ in 0..1000 {
        let mut text = random_formula(&mut rng, 4);
        if rng.gen_bool(0.3) {
            text = format!("(forall z:int {text})");
        }
        let f = parse_formula(&text).map_err(|e| format!("{text}: {e}"))?;
        if is_valid(&f).map_err(|e| format!("{text}: {e}"))? == SolverVerdict::Proved {
            proved += 1;
            let cex = brute_force(&f, 10).map_err(|e| e.to_string())?;
            ensure(cex.is_none(), || {
                format!("{text} proved but falsified by {cex:?}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "1000 formulas, {proved} proved, none falsified, {elapsed:.2?}"
    ))
}

fn is_call_free(tp: &TypedProgram, name: &str) -> bool {
    let f = tp.program.find_function(name).unwrap();
    let mut calls = false;
    if let Some(b) = &f.body {
        b.for_each_expr(&mut |e| e.walk(&mut |x| calls |= x.kind.is_call_like()));
    }
    !calls
}

fn wp_differential() -> Check {
    let mut rng = StdRng::seed_from_u64(6);
    let mut checked = Vec::new();
    for path in corpus_files() {
        let src = std::fs::read_to_string(&path).unwrap();
        let (report, _) = verify_source(&src, &file_name(&path), Mode::Sound);
        let tp = typed(&path);
        for f in tp
            .program
            .functions()
            .filter(|f| f.owner.is_none() && !f.ensures.is_empty())
        {
            let verified = report
                .callable(&f.name)
                .is_some_and(|c| c.verdict == Verdict::Verified);
            if !verified || !is_call_free(&tp, &f.name) {
                continue;
            }
            let mut accepted = 0;
            let mut tries = 0;
            while accepted < 100 {
                tries += 1;
                ensure(tries < 100_000, || {
                    format!("{}: precondition too narrow", f.name)
                })?;
                let args = random_args(&tp, &f.name, &mut rng).ok_or("non-scalar parameter")?;
                let o = eval(&tp, &f.name, &args, &mut Fuel::new(1000), true);
                if is_requires_violation(&o) {
                    continue;
                }
                accepted += 1;
                ensure(matches!(o, Outcome::Returned(_)), || {
                    format!("{}{args:?}: {o}", f.name)
                })?;
            }
            checked.push(f.name.clone());
        }
    }
    ensure(!checked.is_empty(), || {
        "no call-free verified functions".into()
    })?;
    Ok(format!("100 inputs each for {}", checked.join(", ")))
}

fn has_lambda(tp: &TypedProgram) -> bool {
    let mut found = false;
    tp.program.for_each_expr(&mut |e| {
        e.walk(&mut |x| found |= matches!(x.kind, ExprKind::Lambda { .. }))
    });
    found
}

fn flagged(tp: &TypedProgram, mode: Mode) -> BTreeSet<String> {
    check_termination(tp, mode)
        .iter()
        .map(|d| tp.callable(d.callable).name.clone())
        .collect()
}

fn mode_monotonicity() -> Check {
    let mut failures = Vec::new();
    for path in corpus_files() {
        let tp = typed(&path);
        let [p, s, c, sound] = Mode::ALL.map(|m| flagged(&tp, m));
        let mut chain = vec![("callgraph", &c, "sound", &sound)];
        if !has_lambda(&tp) {
            chain.insert(0, ("partial", &p, "self-check", &s));
            chain.insert(1, ("self-check", &s, "callgraph", &c));
        }
        for (lo, a, hi, b) in chain {
            for name in a.difference(b) {
                failures.push(format!(
                    "{}: `{name}` flagged under {lo} but not {hi}",
                    file_name(&path)
                ));
            }
        }
    }
    if failures.is_empty() {
        Ok("flagged sets grow along the mode order on every corpus file".into())
    } else {
        Err(failures.join("; "))
    }
}

fn frontend_robustness() -> Check {
    let mut rng = StdRng::seed_from_u64(8);
    let mut programs = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..=256);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let result = std::panic::catch_unwind(|| parse_bytes(&bytes, "fuzz.moo").is_ok());
        match result {
            Ok(true) => programs += 1,
            Ok(false) => {}
            Err(_) => return Err(format!("parse panicked on {bytes:?}")),
        }
    }
    for path in corpus_files() {
        let src = std::fs::read_to_string(&path).unwrap();
        let p = parse(&src, "a.moo").map_err(|e| e.to_string())?;
        let q = parse(&pretty_print(&p), "a.moo").map_err(|e| e.to_string())?;
        ensure(p.structural() == q.structural(), || {
            format!("{} does not round-trip", file_name(&path))
        })?;
    }
    Ok(format!(
        "10000 random inputs parsed without panicking ({programs} programs); corpus round-trips"
    ))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(&str, fn() -> Check); 8] = [
        ("verdict matrix reproduction", verdict_matrix),
        ("proved-false end-to-end demo", proved_false_demo),
        ("erasure and divergence demo", erasure_demo),
        ("sound-mode safety", sound_mode_safety),
        ("solver soundness", solver_soundness),
        ("WP/interpreter differential", wp_differential),
        ("mode monotonicity", mode_monotonicity),
        ("frontend robustness", frontend_robustness),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
