//! Decidable checks for the protocol's correctness theory.
//!
//! Configuration-level predicates (stability, maximal-matching legitimacy,
//! the edge-state classifier, eligibility exclusivity) live here; trace-level
//! monitors are in [`closure`] and [`interleave`]. Monitors check theorem
//! conclusions on concrete executions, so a failure points at a bug in this
//! implementation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::Trace;
use crate::graph::{Graph, NodeId};
use crate::protocol::{self, Configuration, PField, RegisterValue, Rule};

pub mod closure;
pub mod interleave;

pub use closure::check_closure;
pub use interleave::check_interleavings;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("edge ({s},{t}) must be given with s < t")]
    Orientation { s: NodeId, t: NodeId },
    #[error("({s},{t}) is not an edge")]
    NotAnEdge { s: NodeId, t: NodeId },
    #[error("configuration is not stable")]
    NotStable,
    #[error("trace carries no per-step configurations; rerun with recording enabled")]
    NoConfigurations,
}

/// State of an edge `(s, t)`, `s < t`, per the correct-state definitions.
/// The two counters are `(m_s, m_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeStateClass {
    UpdatedCorrect(u8, u8),
    ToUpdateCorrect(u8, u8),
    /// Married, but the counters/registers are outside the correct region.
    Matched(u8, u8),
    NotMatched,
}

impl EdgeStateClass {
    pub fn is_correct(self) -> bool {
        matches!(
            self,
            EdgeStateClass::UpdatedCorrect(..) | EdgeStateClass::ToUpdateCorrect(..)
        )
    }
}

impl std::fmt::Display for EdgeStateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeStateClass::UpdatedCorrect(a, b) => write!(f, "updated (You,{a},{b})"),
            EdgeStateClass::ToUpdateCorrect(a, b) => write!(f, "toUpdate (You,{a},{b})"),
            EdgeStateClass::Matched(a, b) => write!(f, "matched, not correct (You,{a},{b})"),
            EdgeStateClass::NotMatched => f.write_str("not matched"),
        }
    }
}

/// No node has an enabled rule.
pub fn is_stable(g: &Graph, c: &Configuration) -> bool {
    !protocol::any_enabled(g, c)
}

/// Mutually pointing adjacent pairs, as `(u, v)` with `u < v`.
pub fn matched_pairs(g: &Graph, c: &Configuration) -> BTreeSet<(NodeId, NodeId)> {
    g.edges()
        .filter(|&(u, v)| {
            let pu = c.states[g.index_of(u).unwrap()].p;
            let pv = c.states[g.index_of(v).unwrap()].p;
            pu == Some(v) && pv == Some(u)
        })
        .collect()
}

/// Every non-null pointer is reciprocated and no two adjacent nodes are both
/// null; i.e. the pointers encode a maximal matching.
pub fn is_legitimate(g: &Graph, c: &Configuration) -> bool {
    g.nodes().iter().enumerate().all(|(ui, &u)| match c.states[ui].p {
        Some(p) => c.states[g.index_of(p).unwrap()].p == Some(u),
        None => g
            .adj_at(ui)
            .iter()
            .all(|v| c.states[g.index_of(*v).unwrap()].p.is_some()),
    })
}

const UPDATED: [(u8, u8); 5] = [(0, 0), (0, 1), (1, 1), (2, 1), (2, 2)];

/// Classifies edge `(s, t)`; the caller supplies the `s < t` orientation.
pub fn classify_edge(
    g: &Graph,
    c: &Configuration,
    s: NodeId,
    t: NodeId,
) -> Result<EdgeStateClass, VerifyError> {
    if s >= t {
        return Err(VerifyError::Orientation { s, t });
    }
    if !g.has_edge(s, t) {
        return Err(VerifyError::NotAnEdge { s, t });
    }
    let si = g.index_of(s).unwrap();
    let ti = g.index_of(t).unwrap();
    Ok(classify_at(g, c, si, ti))
}

pub(crate) fn classify_at(g: &Graph, c: &Configuration, si: usize, ti: usize) -> EdgeStateClass {
    let (s, t) = (g.id(si), g.id(ti));
    let (ss, ts) = (c.states[si], c.states[ti]);
    if ss.p != Some(t) || ts.p != Some(s) {
        return EdgeStateClass::NotMatched;
    }
    let r_st = c.registers[si][g.slot(si, t).unwrap()];
    let r_ts = c.registers[ti][g.slot(ti, s).unwrap()];
    let (a, b) = (ss.m, ts.m);
    let you = |m: u8| RegisterValue::new(PField::You, m);
    if UPDATED.contains(&(a, b)) && r_st == you(a) && r_ts == you(b) {
        return EdgeStateClass::UpdatedCorrect(a, b);
    }
    let lag_t = matches!((a, b), (0, 1) | (2, 2)) && r_st == you(a) && r_ts == you(b - 1);
    let lag_s = matches!((a, b), (1, 1) | (2, 1)) && r_st == you(a - 1) && r_ts == you(b);
    if lag_t || lag_s {
        EdgeStateClass::ToUpdateCorrect(a, b)
    } else {
        EdgeStateClass::Matched(a, b)
    }
}

/// In a stable configuration every register holds its correct value.
pub fn check_stable_registers(g: &Graph, c: &Configuration) -> Result<bool, VerifyError> {
    if !is_stable(g, c) {
        return Err(VerifyError::NotStable);
    }
    Ok((0..g.node_count()).all(|ui| {
        g.adj_at(ui)
            .iter()
            .enumerate()
            .all(|(k, &v)| c.registers[ui][k] == protocol::crv_at(c, ui, v))
    }))
}

/// Violations of the per-node eligibility exclusivity clauses; empty when the
/// configuration respects all of them.
pub fn exclusivity_violations(g: &Graph, c: &Configuration) -> Vec<String> {
    let mut out = Vec::new();
    let mut rules = Vec::new();
    for ui in 0..g.node_count() {
        let u = g.id(ui);
        rules.clear();
        protocol::enabled_at(g, c, ui, &mut rules);
        match c.states[ui].p {
            None => {
                if rules.iter().any(|r| matches!(r, Rule::Increase | Rule::Reset)) {
                    out.push(format!("node {u}: p = null but Increase/Reset enabled"));
                }
                for &v in g.adj_at(ui) {
                    let n = rules
                        .iter()
                        .filter(|r| matches!(r, Rule::Write(a) | Rule::Seduction(a) | Rule::Marriage(a) if *a == v))
                        .count();
                    if n > 1 {
                        out.push(format!("node {u}: {n} rules enabled towards {v}"));
                    }
                }
            }
            Some(p) => {
                if rules.iter().any(|r| matches!(r, Rule::Seduction(_) | Rule::Marriage(_))) {
                    out.push(format!("node {u}: p = {p} but Seduction/Marriage enabled"));
                }
                let n = rules
                    .iter()
                    .filter(|r| matches!(r, Rule::Increase | Rule::Reset) || **r == Rule::Write(p))
                    .count();
                if n > 1 {
                    out.push(format!("node {u}: {n} of Write({p})/Increase/Reset enabled"));
                }
            }
        }
    }
    out
}

/// One monitor's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorResult {
    pub monitor: String,
    pub pass: bool,
    /// First violating step (1-based), when failing.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node: Option<NodeId>,
    pub detail: String,
    /// Smallest step range containing the violation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<(usize, usize)>,
}

impl MonitorResult {
    pub fn pass(monitor: &str, detail: impl Into<String>) -> Self {
        MonitorResult {
            monitor: monitor.into(),
            pass: true,
            step: None,
            node: None,
            detail: detail.into(),
            window: None,
        }
    }

    pub fn fail(
        monitor: &str,
        step: usize,
        node: Option<NodeId>,
        detail: impl Into<String>,
        window: (usize, usize),
    ) -> Self {
        MonitorResult {
            monitor: monitor.into(),
            pass: false,
            step: Some(step),
            node,
            detail: detail.into(),
            window: Some(window),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonitorReport {
    pub results: Vec<MonitorResult>,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn get(&self, monitor: &str) -> Option<&MonitorResult> {
        self.results.iter().find(|r| r.monitor == monitor)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MonitorResult> {
        self.results.iter().filter(|r| !r.pass)
    }

    pub fn extend(&mut self, other: MonitorReport) {
        self.results.extend(other.results);
    }
}

/// Checks a finished trace's final configuration: legitimacy and register
/// consistency when stable.
pub fn check_final(g: &Graph, trace: &Trace) -> MonitorReport {
    let last = &trace.last;
    let mut results = Vec::new();
    let steps = trace.steps.len();
    if !trace.is_stable() {
        results.push(MonitorResult::fail(
            "stable",
            steps,
            None,
            format!("not stable after {} moves", trace.total_moves()),
            (steps, steps),
        ));
        return MonitorReport { results };
    }
    results.push(MonitorResult::pass("stable", format!("{} moves", trace.total_moves())));
    results.push(if is_legitimate(g, last) {
        MonitorResult::pass("legitimate", format!("{} matched pairs", matched_pairs(g, last).len()))
    } else {
        MonitorResult::fail("legitimate", steps, None, "final pointers are not a maximal matching", (steps, steps))
    });
    results.push(match check_stable_registers(g, last) {
        Ok(true) => MonitorResult::pass("stable-registers", "every register holds its correct value"),
        _ => MonitorResult::fail("stable-registers", steps, None, "stale register in stable configuration", (steps, steps)),
    });
    let unlocked: Vec<_> = matched_pairs(g, last)
        .into_iter()
        .filter(|&(s, t)| classify_edge(g, last, s, t) != Ok(EdgeStateClass::UpdatedCorrect(2, 2)))
        .collect();
    results.push(if unlocked.is_empty() {
        MonitorResult::pass("locked-edges", "every matched edge is updated (You,2,2)")
    } else {
        MonitorResult::fail("locked-edges", steps, Some(unlocked[0].0), format!("edges not locked: {unlocked:?}"), (steps, steps))
    });
    MonitorReport { results }
}

/// Closure, interleaving and final-configuration checks on one trace.
pub fn verify_trace(g: &Graph, trace: &Trace) -> Result<MonitorReport, VerifyError> {
    let mut report = check_closure(g, trace)?;
    report.extend(check_interleavings(g, trace));
    report.extend(check_final(g, trace));
    Ok(report)
}
