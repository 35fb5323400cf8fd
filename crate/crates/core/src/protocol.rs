//! The maximal-matching protocol in the link-register model.
//!
//! Each node `u` owns a pointer `p_u` (a neighbor or null) and a lock
//! counter `m_u ∈ {0,1,2}`, plus one single-writer register `r_uv` per
//! neighbor `v`. A rule either reads neighbor registers and updates local
//! variables, or writes one of the node's own registers, never both.
//!
//! Guards are evaluated on a configuration snapshot and every selected action
//! computes its effect from that same snapshot, so applying a step is
//! order-independent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PField {
    Idle,
    You,
    Other,
}

impl PField {
    pub const ALL: [PField; 3] = [PField::Idle, PField::You, PField::Other];
}

/// Content of a register `r_uv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegisterValue {
    pub p: PField,
    pub m: u8,
}

impl RegisterValue {
    pub const IDLE: RegisterValue = RegisterValue { p: PField::Idle, m: 0 };

    pub const fn new(p: PField, m: u8) -> Self {
        RegisterValue { p, m }
    }

    /// The nine values the rules can write.
    pub fn domain() -> impl Iterator<Item = RegisterValue> {
        PField::ALL
            .into_iter()
            .flat_map(|p| (0..3).map(move |m| RegisterValue { p, m }))
    }
}

impl fmt::Display for RegisterValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{})", self.p, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeState {
    pub p: Option<NodeId>,
    pub m: u8,
}

impl NodeState {
    pub const fn new(p: Option<NodeId>, m: u8) -> Self {
        NodeState { p, m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleKind {
    Write,
    Seduction,
    Marriage,
    Increase,
    Reset,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Write,
        RuleKind::Seduction,
        RuleKind::Marriage,
        RuleKind::Increase,
        RuleKind::Reset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Write => "Write",
            RuleKind::Seduction => "Seduction",
            RuleKind::Marriage => "Marriage",
            RuleKind::Increase => "Increase",
            RuleKind::Reset => "Reset",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Write(NodeId),
    Seduction(NodeId),
    Marriage(NodeId),
    Increase,
    Reset,
}

impl Rule {
    pub fn kind(self) -> RuleKind {
        match self {
            Rule::Write(_) => RuleKind::Write,
            Rule::Seduction(_) => RuleKind::Seduction,
            Rule::Marriage(_) => RuleKind::Marriage,
            Rule::Increase => RuleKind::Increase,
            Rule::Reset => RuleKind::Reset,
        }
    }

    pub fn arg(self) -> Option<NodeId> {
        match self {
            Rule::Write(a) | Rule::Seduction(a) | Rule::Marriage(a) => Some(a),
            Rule::Increase | Rule::Reset => None,
        }
    }

    pub fn from_parts(kind: RuleKind, arg: Option<NodeId>) -> Result<Rule, String> {
        match (kind, arg) {
            (RuleKind::Write, Some(a)) => Ok(Rule::Write(a)),
            (RuleKind::Seduction, Some(a)) => Ok(Rule::Seduction(a)),
            (RuleKind::Marriage, Some(a)) => Ok(Rule::Marriage(a)),
            (RuleKind::Increase, None) => Ok(Rule::Increase),
            (RuleKind::Reset, None) => Ok(Rule::Reset),
            (k, Some(_)) => Err(format!("{} takes no argument", k.name())),
            (k, None) => Err(format!("{} needs a neighbor argument", k.name())),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arg() {
            Some(a) => write!(f, "{}({a})", self.kind().name()),
            None => f.write_str(self.kind().name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub node: NodeId,
    pub rule: Rule,
}

impl Action {
    pub const fn new(node: NodeId, rule: Rule) -> Self {
        Action { node, rule }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node, self.rule)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error("{a} is not a neighbor of {u}")]
    NotNeighbor { u: NodeId, a: NodeId },
    #[error("m value {m} of node {u} is outside {{0,1,2}}")]
    BadCounter { u: NodeId, m: u8 },
    #[error("register {u}->{v} holds m = {m}, outside {{0,1,2}}")]
    BadRegister { u: NodeId, v: NodeId, m: u8 },
    #[error("missing state for node {0}")]
    MissingNode(NodeId),
    #[error("missing register {0}->{1}")]
    MissingRegister(NodeId, NodeId),
    #[error("register {0}->{1} does not correspond to an edge")]
    ExtraRegister(NodeId, NodeId),
    #[error("configuration does not match the graph shape")]
    ShapeMismatch,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("empty action set")]
    Empty,
    #[error("node {0} appears in more than one action")]
    DuplicateNode(NodeId),
    #[error("{0} is not enabled")]
    Disabled(Action),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Full assignment of node variables and registers over a fixed graph.
///
/// Storage is positional: `states[i]` belongs to the i-th smallest node id and
/// `registers[i][k]` is the register towards that node's k-th smallest
/// neighbor. Accessors take the graph to translate identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub(crate) states: Vec<NodeState>,
    pub(crate) registers: Vec<Vec<RegisterValue>>,
}

impl Configuration {
    /// Every pointer null, every counter 0, every register `(Idle,0)`.
    pub fn all_null(g: &Graph) -> Self {
        let n = g.node_count();
        Configuration {
            states: vec![NodeState::default(); n],
            registers: (0..n)
                .map(|i| vec![RegisterValue::IDLE; g.adj_at(i).len()])
                .collect(),
        }
    }

    /// Assembles a configuration from explicit maps, requiring exactly one
    /// state per node and one register per ordered adjacent pair.
    pub fn from_maps(
        g: &Graph,
        states: &BTreeMap<NodeId, NodeState>,
        registers: &BTreeMap<(NodeId, NodeId), RegisterValue>,
    ) -> Result<Self, ProtocolError> {
        for &u in states.keys() {
            if !g.contains(u) {
                return Err(ProtocolError::UnknownNode(u));
            }
        }
        for &(u, v) in registers.keys() {
            if !g.has_edge(u, v) {
                return Err(ProtocolError::ExtraRegister(u, v));
            }
        }
        let mut c = Configuration::all_null(g);
        for (ui, &u) in g.nodes().iter().enumerate() {
            c.states[ui] = *states.get(&u).ok_or(ProtocolError::MissingNode(u))?;
            for (k, &v) in g.adj_at(ui).iter().enumerate() {
                c.registers[ui][k] = *registers
                    .get(&(u, v))
                    .ok_or(ProtocolError::MissingRegister(u, v))?;
            }
        }
        c.validate(g)?;
        Ok(c)
    }

    /// Checks shape against `g`, pointer targets and counter ranges.
    pub fn validate(&self, g: &Graph) -> Result<(), ProtocolError> {
        if self.states.len() != g.node_count() || self.registers.len() != g.node_count() {
            return Err(ProtocolError::ShapeMismatch);
        }
        for (ui, st) in self.states.iter().enumerate() {
            let u = g.id(ui);
            if st.m > 2 {
                return Err(ProtocolError::BadCounter { u, m: st.m });
            }
            if let Some(a) = st.p {
                if g.slot(ui, a).is_none() {
                    return Err(ProtocolError::NotNeighbor { u, a });
                }
            }
            let regs = &self.registers[ui];
            if regs.len() != g.adj_at(ui).len() {
                return Err(ProtocolError::ShapeMismatch);
            }
            for (k, r) in regs.iter().enumerate() {
                if r.m > 2 {
                    return Err(ProtocolError::BadRegister {
                        u,
                        v: g.adj_at(ui)[k],
                        m: r.m,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn state(&self, g: &Graph, u: NodeId) -> Result<NodeState, ProtocolError> {
        let ui = g.index_of(u).ok_or(ProtocolError::UnknownNode(u))?;
        Ok(self.states[ui])
    }

    pub fn register(&self, g: &Graph, u: NodeId, v: NodeId) -> Result<RegisterValue, ProtocolError> {
        let (ui, k) = locate(g, u, v)?;
        Ok(self.registers[ui][k])
    }

    pub fn set_state(&mut self, g: &Graph, u: NodeId, st: NodeState) -> Result<(), ProtocolError> {
        let ui = g.index_of(u).ok_or(ProtocolError::UnknownNode(u))?;
        if st.m > 2 {
            return Err(ProtocolError::BadCounter { u, m: st.m });
        }
        if let Some(a) = st.p {
            g.slot(ui, a).ok_or(ProtocolError::NotNeighbor { u, a })?;
        }
        self.states[ui] = st;
        Ok(())
    }

    pub fn set_register(
        &mut self,
        g: &Graph,
        u: NodeId,
        v: NodeId,
        r: RegisterValue,
    ) -> Result<(), ProtocolError> {
        if r.m > 2 {
            return Err(ProtocolError::BadRegister { u, v, m: r.m });
        }
        let (ui, k) = locate(g, u, v)?;
        self.registers[ui][k] = r;
        Ok(())
    }

    /// Node states keyed by id.
    pub fn states(&self, g: &Graph) -> BTreeMap<NodeId, NodeState> {
        g.nodes().iter().copied().zip(self.states.iter().copied()).collect()
    }

    /// Registers keyed by directed pair, in lexicographic order.
    pub fn registers(&self, g: &Graph) -> BTreeMap<(NodeId, NodeId), RegisterValue> {
        g.nodes()
            .iter()
            .enumerate()
            .flat_map(|(ui, &u)| {
                g.adj_at(ui)
                    .iter()
                    .zip(&self.registers[ui])
                    .map(move |(&v, &r)| ((u, v), r))
            })
            .collect()
    }
}

fn locate(g: &Graph, u: NodeId, v: NodeId) -> Result<(usize, usize), ProtocolError> {
    let ui = g.index_of(u).ok_or(ProtocolError::UnknownNode(u))?;
    let k = g.slot(ui, v).ok_or(ProtocolError::NotNeighbor { u, a: v })?;
    Ok((ui, k))
}

// Positional helpers shared by the model checker and the executor hot loop.

#[inline]
pub(crate) fn crv_at(c: &Configuration, ui: usize, a: NodeId) -> RegisterValue {
    let st = c.states[ui];
    match st.p {
        None => RegisterValue::IDLE,
        Some(p) if p == a => RegisterValue::new(PField::You, st.m),
        Some(_) => RegisterValue::new(PField::Other, st.m),
    }
}

/// Register `r_{a,u}` where `a` is the k-th neighbor of `u`.
#[inline]
fn incoming(g: &Graph, c: &Configuration, ui: usize, k: usize) -> RegisterValue {
    let a = g.adj_at(ui)[k];
    let ai = g.index_of(a).expect("neighbor is a node");
    c.registers[ai][g.rev_slot(ui, k)]
}

pub(crate) fn pr_abandonment_at(g: &Graph, c: &Configuration, ui: usize) -> bool {
    let st = c.states[ui];
    let Some(p) = st.p else { return false };
    let u = g.id(ui);
    let k = g.slot(ui, p).expect("pointer targets a neighbor");
    let r = incoming(g, c, ui, k);
    (r.p != PField::You && (u > p || st.m != 0))
        || (r == RegisterValue::new(PField::Other, 2) && u < p)
}

pub(crate) fn pr_reset_at(g: &Graph, c: &Configuration, ui: usize) -> bool {
    let st = c.states[ui];
    let Some(p) = st.p else { return false };
    let u = g.id(ui);
    let k = g.slot(ui, p).expect("pointer targets a neighbor");
    let r = incoming(g, c, ui, k);
    if r.p != PField::You {
        return false;
    }
    let (lo, hi) = (u < p, u > p);
    matches!(
        (st.m, r.m, lo, hi),
        (0, 2, _, _)
            | (2, 0, _, _)
            | (0, 1, _, true)
            | (1, 0, true, _)
            | (1, 2, true, _)
            | (2, 1, _, true)
    )
}

fn increase_condition(u: NodeId, p: NodeId, m: u8, r: RegisterValue) -> bool {
    if r.p != PField::You {
        return false;
    }
    match m {
        0 => (u < p && r.m == 1) || (u > p && r.m == 0),
        1 => (u < p && r.m == 1) || (u > p && r.m == 2),
        _ => false,
    }
}

/// Appends the rules enabled at the node in position `ui`, in the canonical
/// order Write(a↑), Seduction(a↑), Marriage(a↑), Increase, Reset.
pub(crate) fn enabled_at(g: &Graph, c: &Configuration, ui: usize, out: &mut Vec<Rule>) {
    let u = g.id(ui);
    let st = c.states[ui];
    let adj = g.adj_at(ui);
    for (k, &a) in adj.iter().enumerate() {
        if c.registers[ui][k] != crv_at(c, ui, a) {
            out.push(Rule::Write(a));
        }
    }
    match st.p {
        None => {
            // r_ua equals crv = (Idle,0) in both guards.
            for (k, &a) in adj.iter().enumerate() {
                if u < a && c.registers[ui][k] == RegisterValue::IDLE && incoming(g, c, ui, k) == RegisterValue::IDLE {
                    out.push(Rule::Seduction(a));
                }
            }
            for (k, &a) in adj.iter().enumerate() {
                if u > a
                    && c.registers[ui][k] == RegisterValue::IDLE
                    && incoming(g, c, ui, k) == RegisterValue::new(PField::You, 0)
                {
                    out.push(Rule::Marriage(a));
                }
            }
        }
        Some(p) => {
            let k = g.slot(ui, p).expect("pointer targets a neighbor");
            if c.registers[ui][k] != RegisterValue::new(PField::You, st.m) {
                return;
            }
            if increase_condition(u, p, st.m, incoming(g, c, ui, k)) {
                out.push(Rule::Increase);
            }
            if pr_abandonment_at(g, c, ui) || pr_reset_at(g, c, ui) {
                out.push(Rule::Reset);
            }
        }
    }
}

pub(crate) fn is_enabled_at(g: &Graph, c: &Configuration, ui: usize, rule: Rule) -> bool {
    let mut buf = Vec::with_capacity(4);
    enabled_at(g, c, ui, &mut buf);
    buf.contains(&rule)
}

pub(crate) fn any_enabled(g: &Graph, c: &Configuration) -> bool {
    let mut buf = Vec::new();
    (0..g.node_count()).any(|ui| {
        buf.clear();
        enabled_at(g, c, ui, &mut buf);
        !buf.is_empty()
    })
}

/// Effect of one enabled action, written into `next`, computed from `c`.
pub(crate) fn apply_at(g: &Graph, c: &Configuration, next: &mut Configuration, ui: usize, rule: Rule) {
    match rule {
        Rule::Write(a) => {
            let k = g.slot(ui, a).expect("write targets a neighbor");
            next.registers[ui][k] = crv_at(c, ui, a);
        }
        Rule::Seduction(a) | Rule::Marriage(a) => next.states[ui] = NodeState::new(Some(a), 0),
        Rule::Increase => next.states[ui].m = c.states[ui].m + 1,
        Rule::Reset => next.states[ui] = NodeState::new(None, 0),
    }
}

/// `Correct_register_value(u, a)`: the value `r_ua` should hold.
pub fn correct_register_value(
    g: &Graph,
    c: &Configuration,
    u: NodeId,
    a: NodeId,
) -> Result<RegisterValue, ProtocolError> {
    let (ui, _) = locate(g, u, a)?;
    Ok(crv_at(c, ui, a))
}

/// # Panics
/// If `u` is not a node of `g`.
pub fn pr_abandonment(g: &Graph, c: &Configuration, u: NodeId) -> bool {
    pr_abandonment_at(g, c, g.index_of(u).expect("unknown node"))
}

/// # Panics
/// If `u` is not a node of `g`.
pub fn pr_reset(g: &Graph, c: &Configuration, u: NodeId) -> bool {
    pr_reset_at(g, c, g.index_of(u).expect("unknown node"))
}

/// Rules whose guards hold for `u` in `c`; empty for unknown nodes.
pub fn enabled_rules(g: &Graph, c: &Configuration, u: NodeId) -> Vec<Rule> {
    let mut out = Vec::new();
    if let Some(ui) = g.index_of(u) {
        enabled_at(g, c, ui, &mut out);
    }
    out
}

/// Every enabled action in `c`, grouped by node in id order.
pub fn enabled_actions(g: &Graph, c: &Configuration) -> Vec<(NodeId, Vec<Rule>)> {
    let mut out = Vec::new();
    for ui in 0..g.node_count() {
        let mut rules = Vec::new();
        enabled_at(g, c, ui, &mut rules);
        if !rules.is_empty() {
            out.push((g.id(ui), rules));
        }
    }
    out
}

/// Checks the daemon contract for `actions` in `c`: nonempty, one action per
/// node, every action enabled.
pub fn validate_actions(g: &Graph, c: &Configuration, actions: &[Action]) -> Result<(), StepError> {
    if actions.is_empty() {
        return Err(StepError::Empty);
    }
    let mut seen = BTreeSet::new();
    for act in actions {
        let ui = g
            .index_of(act.node)
            .ok_or(ProtocolError::UnknownNode(act.node))?;
        if !seen.insert(act.node) {
            return Err(StepError::DuplicateNode(act.node));
        }
        if !is_enabled_at(g, c, ui, act.rule) {
            return Err(StepError::Disabled(*act));
        }
    }
    Ok(())
}

/// Concurrent application of `actions`, all evaluated against `c`.
pub fn apply_step(g: &Graph, c: &Configuration, actions: &[Action]) -> Result<Configuration, StepError> {
    validate_actions(g, c, actions)?;
    Ok(apply_unchecked(g, c, actions))
}

pub(crate) fn apply_unchecked(g: &Graph, c: &Configuration, actions: &[Action]) -> Configuration {
    let mut next = c.clone();
    for act in actions {
        let ui = g.index_of(act.node).expect("validated node");
        apply_at(g, c, &mut next, ui, act.rule);
    }
    next
}
