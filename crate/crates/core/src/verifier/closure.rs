//! Correct-state closure.
//!
//! Once a matched edge `(s, t)` is in a correct state it stays correct, its
//! endpoints never execute Seduction, Marriage or Reset, and each move that
//! touches the edge follows the fixed progression
//! `(You,0,0) → (You,0,1) → (You,1,1) → (You,2,1) → (You,2,2)`, alternating
//! Increase (entering a toUpdate state) and Write (back to updated).

use crate::executor::Trace;
use crate::graph::Graph;
use crate::protocol::{self, Rule, RuleKind};

use super::{classify_at, EdgeStateClass, MonitorReport, MonitorResult, VerifyError};

/// `(m_s, m_t, r_st.m, r_ts.m)`
type Quad = (u8, u8, u8, u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mover {
    None,
    S(RuleKind),
    T(RuleKind),
}

struct Row {
    updated: bool,
    state: (u8, u8),
    before: Quad,
    mover: Mover,
    after: Option<Quad>,
}

const fn row(updated: bool, state: (u8, u8), before: Quad, mover: Mover, after: Option<Quad>) -> Row {
    Row { updated, state, before, mover, after }
}

use Mover::{S, T};
use RuleKind::{Increase, Write};

#[rustfmt::skip]
const TABLE: [Row; 9] = [
    // updated correct states
    row(true,  (0, 0), (0, 0, 0, 0), T(Increase), Some((0, 1, 0, 0))),
    row(true,  (0, 1), (0, 1, 0, 1), S(Increase), Some((1, 1, 0, 1))),
    row(true,  (1, 1), (1, 1, 1, 1), S(Increase), Some((2, 1, 1, 1))),
    row(true,  (2, 1), (2, 1, 2, 1), T(Increase), Some((2, 2, 2, 1))),
    row(true,  (2, 2), (2, 2, 2, 2), Mover::None, None),
    // toUpdate correct states
    row(false, (0, 1), (0, 1, 0, 0), T(Write),    Some((0, 1, 0, 1))),
    row(false, (1, 1), (1, 1, 0, 1), S(Write),    Some((1, 1, 1, 1))),
    row(false, (2, 1), (2, 1, 1, 1), S(Write),    Some((2, 1, 2, 1))),
    row(false, (2, 2), (2, 2, 2, 1), T(Write),    Some((2, 2, 2, 2))),
];

fn lookup(class: EdgeStateClass) -> Option<&'static Row> {
    let (updated, state) = match class {
        EdgeStateClass::UpdatedCorrect(a, b) => (true, (a, b)),
        EdgeStateClass::ToUpdateCorrect(a, b) => (false, (a, b)),
        _ => return None,
    };
    TABLE.iter().find(|r| r.updated == updated && r.state == state)
}

/// Checks correct-state closure over every edge and step of `trace`.
pub fn check_closure(g: &Graph, trace: &Trace) -> Result<MonitorReport, VerifyError> {
    let configs = trace.configs.as_ref().ok_or(VerifyError::NoConfigurations)?;
    const NAME: &str = "closure";
    let edges: Vec<(usize, usize)> = g
        .edges()
        .map(|(s, t)| (g.index_of(s).unwrap(), g.index_of(t).unwrap()))
        .collect();
    let mut correct_steps = 0usize;
    let mut rules = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let k = i + 1;
        let (c, d) = (&configs[i], &configs[i + 1]);
        for &(si, ti) in &edges {
            let class = classify_at(g, c, si, ti);
            let Some(row) = lookup(class) else { continue };
            correct_steps += 1;
            let (s, t) = (g.id(si), g.id(ti));
            let fail = |node, detail: String| {
                Ok(MonitorReport {
                    results: vec![MonitorResult::fail(NAME, k, node, detail, (k, k))],
                })
            };

            for a in step.actions.iter().filter(|a| a.node == s || a.node == t) {
                if matches!(a.rule, Rule::Seduction(_) | Rule::Marriage(_) | Rule::Reset) {
                    return fail(Some(a.node), format!("edge ({s},{t}) in {class}: endpoint executed {a}"));
                }
            }

            let quad = |cfg: &protocol::Configuration| -> (u8, u8, u8, u8) {
                (
                    cfg.states[si].m,
                    cfg.states[ti].m,
                    cfg.registers[si][g.slot(si, t).unwrap()].m,
                    cfg.registers[ti][g.slot(ti, s).unwrap()].m,
                )
            };
            if quad(c) != row.before {
                return fail(None, format!("edge ({s},{t}) in {class} with quadruple {:?}", quad(c)));
            }

            // Relevant rules: t-Increase and Write(t) for s, s-Increase and Write(s) for t.
            let mut relevant = |ui: usize, other| -> Vec<Rule> {
                rules.clear();
                protocol::enabled_at(g, c, ui, &mut rules);
                rules
                    .iter()
                    .copied()
                    .filter(|r| *r == Rule::Increase || *r == Rule::Write(other))
                    .collect()
            };
            let (rel_s, rel_t) = (relevant(si, t), relevant(ti, s));
            let expected = match row.mover {
                Mover::None => (vec![], vec![]),
                S(kind) => (vec![relevant_rule(kind, t)], vec![]),
                T(kind) => (vec![], vec![relevant_rule(kind, s)]),
            };
            if (rel_s.clone(), rel_t.clone()) != expected {
                return fail(
                    None,
                    format!("edge ({s},{t}) in {class}: relevant rules s={rel_s:?} t={rel_t:?}, expected {expected:?}"),
                );
            }

            let fired = step.actions.iter().any(|a| match row.mover {
                S(kind) => a.node == s && a.rule == relevant_rule(kind, t),
                T(kind) => a.node == t && a.rule == relevant_rule(kind, s),
                Mover::None => false,
            });
            let want = if fired { row.after.unwrap() } else { row.before };
            if quad(d) != want {
                return fail(None, format!("edge ({s},{t}) left {class} for quadruple {:?}, expected {want:?}", quad(d)));
            }
            let next = classify_at(g, d, si, ti);
            if !next.is_correct() {
                return fail(None, format!("edge ({s},{t}) left the correct region: {class} -> {next}"));
            }
        }
    }
    Ok(MonitorReport {
        results: vec![MonitorResult::pass(
            NAME,
            format!("{correct_steps} correct edge-steps checked"),
        )],
    })
}

fn relevant_rule(kind: RuleKind, other: crate::graph::NodeId) -> Rule {
    match kind {
        RuleKind::Increase => Rule::Increase,
        _ => Rule::Write(other),
    }
}
