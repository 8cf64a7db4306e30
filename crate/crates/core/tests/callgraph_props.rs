use std::collections::BTreeSet;

use miniver_core::callgraph::{check_termination, sccs, CallGraph, Edge, EdgeKind, Mode};
use miniver_core::frontend::{parse, typecheck, CallableId};
use miniver_core::span::SourceSpan;
use proptest::prelude::*;

fn graph(n: u32, edges: &[(u32, u32)]) -> CallGraph {
    CallGraph {
        nodes: (0..n).map(CallableId).collect(),
        edges: edges
            .iter()
            .map(|&(a, b)| Edge {
                from: CallableId(a),
                to: CallableId(b),
                kind: EdgeKind::Direct,
                site: SourceSpan::dummy(),
            })
            .collect(),
    }
}

/// Transitive closure by repeated squaring of the adjacency matrix.
fn reach(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a as usize][b as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

fn edges_strategy() -> impl Strategy<Value = (u32, Vec<(u32, u32)>)> {
    (1u32..9).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
}

/// `f_i` calls each `f_j` listed for it, and carries `decreases n` when flagged.
fn first_order_program(calls: &[(Vec<usize>, bool)]) -> String {
    let mut src = String::new();
    for (i, (callees, decreases)) in calls.iter().enumerate() {
        src.push_str(&format!("func f{i}(n: int) -> int requires n >= 0"));
        if *decreases {
            src.push_str(" decreases n");
        }
        src.push_str(" { if n == 0 { return 0; }");
        for (k, j) in callees.iter().enumerate() {
            src.push_str(&format!(" var a{k} := f{}(n - 1);", j % calls.len()));
        }
        src.push_str(" return 1; }\n");
    }
    src
}

fn flagged(src: &str, mode: Mode) -> BTreeSet<u32> {
    let tp = typecheck(&parse(src, "gen.moo").unwrap()).unwrap();
    check_termination(&tp, mode)
        .iter()
        .map(|d| d.callable.0)
        .collect()
}

fn program_strategy(with_decreases: bool) -> impl Strategy<Value = String> {
    prop::collection::vec(
        (prop::collection::vec(0usize..6, 0..3), any::<bool>()),
        1..6,
    )
    .prop_map(move |fs| {
        let fs: Vec<_> = fs
            .into_iter()
            .map(|(c, d)| (c, d && with_decreases))
            .collect();
        first_order_program(&fs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sccs_agree_with_mutual_reachability((n, edges) in edges_strategy()) {
        let comps = sccs(&graph(n, &edges));
        let r = reach(n as usize, &edges);
        let mut seen = BTreeSet::new();
        let mut last_min = None;
        for c in &comps {
            prop_assert!(c.members.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(last_min < Some(c.members[0]));
            last_min = Some(c.members[0]);
            for a in &c.members {
                prop_assert!(seen.insert(a.0));
                for b in &c.members {
                    if a != b {
                        prop_assert!(r[a.0 as usize][b.0 as usize]);
                    }
                }
            }
            let x = c.members[0].0 as usize;
            prop_assert_eq!(c.is_nontrivial, c.members.len() > 1 || r[x][x]);
        }
        prop_assert_eq!(seen.len(), n as usize);
        // distinct components are never mutually reachable
        for c in &comps {
            for d in &comps {
                if c != d {
                    let (a, b) = (c.members[0].0 as usize, d.members[0].0 as usize);
                    prop_assert!(!(r[a][b] && r[b][a]));
                }
            }
        }
    }

    #[test]
    fn modes_grow_stricter_on_first_order_programs(src in program_strategy(true)) {
        let p = flagged(&src, Mode::Partial);
        let s = flagged(&src, Mode::SelfCheck);
        let c = flagged(&src, Mode::CallGraph);
        prop_assert!(p.is_empty());
        prop_assert!(s.is_subset(&c), "{}", src);
    }

    #[test]
    fn sound_flags_everything_callgraph_does_without_decreases(src in program_strategy(false)) {
        let s = flagged(&src, Mode::SelfCheck);
        let c = flagged(&src, Mode::CallGraph);
        let sound = flagged(&src, Mode::Sound);
        prop_assert!(s.is_subset(&c), "{}", src);
        prop_assert!(c.is_subset(&sound), "{}", src);
    }
}
