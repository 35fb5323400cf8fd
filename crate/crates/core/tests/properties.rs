use proptest::prelude::*;

use linkmatch::daemon::{DaemonKind, DaemonSpec, TieBreak};
use linkmatch::executor::{self, random_configuration, RunOptions, Trace};
use linkmatch::graph::{Graph, GraphKind};
use linkmatch::modelcheck::{enumerate_states, DEFAULT_CAP};
use linkmatch::protocol::{self, Action, RuleKind};
use linkmatch::trace_io::{check_trace_file, read_trace, trace_to_string, TraceMeta};
use linkmatch::verifier;

fn arb_graph() -> impl Strategy<Value = Graph> {
    prop_oneof![
        (2usize..9).prop_map(|n| GraphKind::Path { n }),
        (3usize..9).prop_map(|n| GraphKind::Cycle { n }),
        (2usize..7).prop_map(|n| GraphKind::Complete { n }),
        (2usize..9).prop_map(|n| GraphKind::Star { n }),
        (2usize..14, 0.05f64..0.9, any::<u64>()).prop_map(|(n, p, seed)| GraphKind::Gnp { n, p, seed, no_isolated: false }),
    ]
    .prop_map(|k| Graph::generate(k).unwrap())
}

fn arb_daemon() -> impl Strategy<Value = DaemonSpec> {
    let priority = Just(RuleKind::ALL.to_vec()).prop_shuffle();
    let kind = prop_oneof![
        (0.05f64..=1.0).prop_map(|q| DaemonKind::AdvRandom { q }),
        Just(DaemonKind::Sequential),
        Just(DaemonKind::Synchronous),
        priority.prop_map(|priority| DaemonKind::Greedy { priority }),
    ];
    let tie = prop_oneof![Just(TieBreak::FixedPriority), Just(TieBreak::UniformRandom)];
    (kind, any::<u64>(), tie).prop_map(|(k, seed, t)| DaemonSpec::new(k, seed).with_tie_break(t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_execution_converges_and_passes_all_monitors(
        g in arb_graph(),
        init_seed in any::<u64>(),
        spec in arb_daemon(),
    ) {
        let init = random_configuration(&g, init_seed);
        let trace = executor::run(&g, &init, &spec, RunOptions::for_graph(&g).recording()).unwrap();
        prop_assert!(trace.is_stable(), "budget exceeded");
        prop_assert!(verifier::is_legitimate(&g, &trace.last));
        prop_assert_eq!(verifier::check_stable_registers(&g, &trace.last), Ok(true));
        let report = verifier::verify_trace(&g, &trace).unwrap();
        prop_assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn serialized_traces_check_clean(g in arb_graph(), init_seed in any::<u64>(), spec in arb_daemon()) {
        let init = random_configuration(&g, init_seed);
        let trace = executor::run(&g, &init, &spec, RunOptions::for_graph(&g)).unwrap();
        let meta = TraceMeta { daemon: Some(spec), init: "random".into(), budget: None };
        let text = trace_to_string(&g, &meta, &trace);
        let tf = read_trace(text.as_bytes()).unwrap();
        prop_assert_eq!(&tf.trace, &trace);
        prop_assert!(check_trace_file(&tf).passed());
    }

    #[test]
    fn replaying_a_run_rebuilds_it(g in arb_graph(), init_seed in any::<u64>(), spec in arb_daemon()) {
        let init = random_configuration(&g, init_seed);
        let recorded = executor::run(&g, &init, &spec, RunOptions::for_graph(&g).recording()).unwrap();
        let sets: Vec<Vec<Action>> = recorded.action_sets().map(|s| s.to_vec()).collect();
        let rebuilt = Trace::from_actions(&g, init, sets).unwrap();
        prop_assert_eq!(rebuilt, recorded);
    }
}

/// One-step closure over the complete K2 transition relation: from every
/// configuration, under every daemon choice.
#[test]
fn closure_holds_for_every_k2_transition() {
    let g = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
    let mut steps = 0;
    for c in enumerate_states(&g, false, DEFAULT_CAP).unwrap().iter() {
        assert!(verifier::exclusivity_violations(&g, &c).is_empty());
        let per_node = protocol::enabled_actions(&g, &c);
        let mut selections: Vec<Vec<Action>> = vec![vec![]];
        for (u, rules) in &per_node {
            let mut next = Vec::new();
            for sel in &selections {
                next.push(sel.clone());
                for &r in rules {
                    let mut s = sel.clone();
                    s.push(Action::new(*u, r));
                    next.push(s);
                }
            }
            selections = next;
        }
        for sel in selections.into_iter().filter(|s| !s.is_empty()) {
            let trace = Trace::from_actions(&g, c.clone(), vec![sel]).unwrap();
            let report = verifier::check_closure(&g, &trace).unwrap();
            assert!(report.passed(), "{c:?}: {report:?}");
            steps += 1;
        }
    }
    assert_eq!(steps, 8041);
}

#[test]
fn exclusivity_on_path3_sample() {
    let g = Graph::generate(GraphKind::Path { n: 3 }).unwrap();
    let space = enumerate_states(&g, true, DEFAULT_CAP).unwrap();
    for c in space.iter().step_by(97) {
        assert!(verifier::exclusivity_violations(&g, &c).is_empty());
    }
}
