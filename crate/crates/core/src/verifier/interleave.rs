//! Interleaving monitors over the raw action sequence of a trace.
//!
//! These only look at who executed what and when, so they also work on
//! traces whose configurations were never recorded (or were forged).
//!
//! - `marriage-seduction`: between two Marriage(s) moves of `t`, `s` executes
//!   Seduction(t) at least once.
//! - `reset-pairing`: between two Reset moves of `u`, `u` executes exactly one
//!   Seduction or Marriage.
//! - `increase-reset`: among three consecutive Increase moves of `u` there is a
//!   Reset of `u`.
//! - `seduction-bound`: `s` executes Seduction(t) at most `2Δ + 3` times.

use std::collections::BTreeMap;

use crate::executor::Trace;
use crate::graph::{Graph, NodeId};
use crate::protocol::Rule;

use super::{MonitorReport, MonitorResult};

pub const MARRIAGE_SEDUCTION: &str = "marriage-seduction";
pub const RESET_PAIRING: &str = "reset-pairing";
pub const INCREASE_RESET: &str = "increase-reset";
pub const SEDUCTION_BOUND: &str = "seduction-bound";

/// Per-node (and per-pair) step indices of each interesting move.
#[derive(Default)]
struct Timeline {
    resets: BTreeMap<NodeId, Vec<usize>>,
    increases: BTreeMap<NodeId, Vec<usize>>,
    /// Seduction or Marriage by the node.
    couplings: BTreeMap<NodeId, Vec<usize>>,
    /// `(t, s)`: t executed Marriage(s).
    marriages: BTreeMap<(NodeId, NodeId), Vec<usize>>,
    /// `(s, t)`: s executed Seduction(t).
    seductions: BTreeMap<(NodeId, NodeId), Vec<usize>>,
}

impl Timeline {
    fn build(trace: &Trace) -> Self {
        let mut tl = Timeline::default();
        for (i, actions) in trace.action_sets().enumerate() {
            let k = i + 1;
            for a in actions {
                let u = a.node;
                match a.rule {
                    Rule::Reset => tl.resets.entry(u).or_default().push(k),
                    Rule::Increase => tl.increases.entry(u).or_default().push(k),
                    Rule::Seduction(t) => {
                        tl.couplings.entry(u).or_default().push(k);
                        tl.seductions.entry((u, t)).or_default().push(k);
                    }
                    Rule::Marriage(s) => {
                        tl.couplings.entry(u).or_default().push(k);
                        tl.marriages.entry((u, s)).or_default().push(k);
                    }
                    Rule::Write(_) => {}
                }
            }
        }
        tl
    }
}

/// Number of entries of sorted `v` in the open-closed interval `(lo, hi]`.
fn count_in(v: &[usize], lo: usize, hi: usize) -> usize {
    v.partition_point(|&x| x <= hi) - v.partition_point(|&x| x <= lo)
}

fn marriage_seduction(tl: &Timeline) -> MonitorResult {
    let empty = Vec::new();
    let mut checked = 0;
    for (&(t, s), ks) in &tl.marriages {
        let sed = tl.seductions.get(&(s, t)).unwrap_or(&empty);
        for w in ks.windows(2) {
            checked += 1;
            if count_in(sed, w[0], w[1]) == 0 {
                return MonitorResult::fail(
                    MARRIAGE_SEDUCTION,
                    w[1],
                    Some(t),
                    format!("node {t} executed Marriage({s}) at steps {} and {} with no Seduction({t}) by {s} in between", w[0], w[1]),
                    (w[0], w[1]),
                );
            }
        }
    }
    MonitorResult::pass(MARRIAGE_SEDUCTION, format!("{checked} marriage pairs checked"))
}

fn reset_pairing(tl: &Timeline) -> MonitorResult {
    let empty = Vec::new();
    let mut checked = 0;
    for (&u, ks) in &tl.resets {
        let couplings = tl.couplings.get(&u).unwrap_or(&empty);
        for w in ks.windows(2) {
            checked += 1;
            // strictly between: (w0, w1 - 1]
            let n = count_in(couplings, w[0], w[1] - 1);
            if n != 1 {
                let weak = if n == 0 { "fails" } else { "holds" };
                return MonitorResult::fail(
                    RESET_PAIRING,
                    w[1],
                    Some(u),
                    format!(
                        "node {u} executed {n} Seduction/Marriage moves between Resets at steps {} and {} (at-least-once {weak})",
                        w[0], w[1]
                    ),
                    (w[0], w[1]),
                );
            }
        }
    }
    MonitorResult::pass(RESET_PAIRING, format!("{checked} reset pairs checked"))
}

fn increase_reset(tl: &Timeline) -> MonitorResult {
    let empty = Vec::new();
    let mut checked = 0;
    for (&u, ks) in &tl.increases {
        let resets = tl.resets.get(&u).unwrap_or(&empty);
        for w in ks.windows(3) {
            checked += 1;
            if count_in(resets, w[0], w[2] - 1) == 0 {
                return MonitorResult::fail(
                    INCREASE_RESET,
                    w[2],
                    Some(u),
                    format!("node {u} executed Increase at steps {}, {}, {} without a Reset", w[0], w[1], w[2]),
                    (w[0], w[2]),
                );
            }
        }
    }
    MonitorResult::pass(INCREASE_RESET, format!("{checked} increase triples checked"))
}

fn seduction_bound(g: &Graph, tl: &Timeline) -> MonitorResult {
    let bound = 2 * g.max_degree() + 3;
    let mut worst = 0;
    for (&(s, t), ks) in &tl.seductions {
        worst = worst.max(ks.len());
        if ks.len() > bound {
            let k = ks[bound];
            return MonitorResult::fail(
                SEDUCTION_BOUND,
                k,
                Some(s),
                format!("node {s} executed Seduction({t}) {} times (bound {bound})", ks.len()),
                (ks[0], k),
            );
        }
    }
    MonitorResult::pass(SEDUCTION_BOUND, format!("max {worst} Seductions per pair, bound {bound}"))
}

/// Runs all four interleaving monitors.
pub fn check_interleavings(g: &Graph, trace: &Trace) -> MonitorReport {
    let tl = Timeline::build(trace);
    MonitorReport {
        results: vec![
            marriage_seduction(&tl),
            reset_pairing(&tl),
            increase_reset(&tl),
            seduction_bound(g, &tl),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{Outcome, Step};
    use crate::protocol::tests::{k2, S, T};
    use crate::protocol::{Action, Configuration};

    fn forged(actions: Vec<Vec<Action>>) -> Trace {
        let g = k2();
        let c = Configuration::all_null(&g);
        Trace {
            initial: c.clone(),
            steps: actions
                .into_iter()
                .map(|actions| Step { actions, hash: String::new() })
                .collect(),
            configs: None,
            move_counts: Default::default(),
            outcome: Outcome::BudgetExceeded,
            last: c,
        }
    }

    #[test]
    fn count_in_bounds() {
        let v = [2, 4, 6];
        assert_eq!(count_in(&v, 2, 6), 2);
        assert_eq!(count_in(&v, 1, 2), 1);
        assert_eq!(count_in(&v, 6, 9), 0);
        assert_eq!(count_in(&v, 3, 3), 0);
    }

    #[test]
    fn empty_trace_passes() {
        assert!(check_interleavings(&k2(), &forged(vec![])).passed());
    }

    #[test]
    fn consecutive_resets_fail_pairing() {
        let r = Action::new(S, Rule::Reset);
        let report = check_interleavings(&k2(), &forged(vec![vec![r], vec![Action::new(S, Rule::Write(T))], vec![r]]));
        let m = report.get(RESET_PAIRING).unwrap();
        assert!(!m.pass);
        assert_eq!((m.step, m.node, m.window), (Some(3), Some(S), Some((1, 3))));
        assert!(m.detail.contains("at-least-once fails"));
    }

    #[test]
    fn double_coupling_fails_pairing_but_not_weak_form() {
        let r = Action::new(S, Rule::Reset);
        let sed = Action::new(S, Rule::Seduction(T));
        let report = check_interleavings(&k2(), &forged(vec![vec![r], vec![sed], vec![sed], vec![r]]));
        let m = report.get(RESET_PAIRING).unwrap();
        assert!(!m.pass);
        assert!(m.detail.contains("at-least-once holds"));
    }

    #[test]
    fn marriage_without_seduction_fails() {
        let mar = Action::new(T, Rule::Marriage(S));
        let sed = Action::new(S, Rule::Seduction(T));
        let ok = forged(vec![vec![mar], vec![sed], vec![mar]]);
        assert!(check_interleavings(&k2(), &ok).get(MARRIAGE_SEDUCTION).unwrap().pass);
        // A Seduction in the same step as the second Marriage still counts.
        let same = forged(vec![vec![mar], vec![sed, mar]]);
        assert!(check_interleavings(&k2(), &same).get(MARRIAGE_SEDUCTION).unwrap().pass);
        let bad = forged(vec![vec![sed], vec![mar], vec![mar]]);
        let m = check_interleavings(&k2(), &bad);
        let m = m.get(MARRIAGE_SEDUCTION).unwrap();
        assert_eq!((m.pass, m.step, m.node), (false, Some(3), Some(T)));
    }

    #[test]
    fn three_increases_without_reset_fail() {
        let inc = Action::new(S, Rule::Increase);
        let bad = forged(vec![vec![inc], vec![inc], vec![inc]]);
        let m = check_interleavings(&k2(), &bad);
        assert_eq!(m.get(INCREASE_RESET).unwrap().step, Some(3));
        let ok = forged(vec![vec![inc], vec![inc], vec![Action::new(S, Rule::Reset)], vec![inc]]);
        assert!(check_interleavings(&k2(), &ok).get(INCREASE_RESET).unwrap().pass);
    }

    #[test]
    fn seduction_bound_on_k2() {
        // Δ = 1, bound 5; the sixth Seduction is the violation.
        let sed = Action::new(S, Rule::Seduction(T));
        let ok = forged(vec![vec![sed]; 5]);
        assert!(check_interleavings(&k2(), &ok).get(SEDUCTION_BOUND).unwrap().pass);
        let bad = forged(vec![vec![sed]; 6]);
        let r = check_interleavings(&k2(), &bad);
        let m = r.get(SEDUCTION_BOUND).unwrap();
        assert_eq!((m.pass, m.step), (false, Some(6)));
    }
}
