//! Explicit-state model checking on tiny graphs.
//!
//! Every configuration is a possible start, so the whole space is explored.
//! Transitions cover every daemon choice: any nonempty set of enabled actions
//! with at most one per node, weighted by the number of moves it contains.
//! Convergence holds iff the transition graph is acyclic and every sink is a
//! legitimate configuration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::ConfigView;
use crate::graph::Graph;
use crate::protocol::{self, Configuration, Rule};
use crate::verifier;

pub mod encoding;
pub mod scc;

pub use encoding::{projected_count, Encoding};
use scc::Csr;

pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelCheckError {
    #[error("state space has {projected} configurations, above the cap of {cap}")]
    CapExceeded { projected: u128, cap: u64 },
    #[error("transition system has a cycle; longest path undefined")]
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Fix `m = 0` on null nodes (no guard or effect reads it).
    pub canonicalize: bool,
    pub cap: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            canonicalize: true,
            cap: DEFAULT_CAP,
        }
    }
}

/// The configuration space of a graph under one encoding.
pub struct StateSpace {
    encoding: Encoding,
}

impl StateSpace {
    pub fn len(&self) -> u64 {
        self.encoding.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    /// Configurations in index order.
    pub fn iter(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.len()).map(|i| self.encoding.decode(i))
    }
}

pub fn enumerate_states(g: &Graph, canonicalize: bool, cap: u64) -> Result<StateSpace, ModelCheckError> {
    let cap = cap.min(u32::MAX as u64);
    let projected = projected_count(g, canonicalize);
    if projected > cap as u128 {
        return Err(ModelCheckError::CapExceeded { projected, cap });
    }
    Ok(StateSpace {
        encoding: Encoding::new(g, canonicalize).expect("count below cap"),
    })
}

/// `Π (|enabled(u)| + 1) − 1` over all nodes.
pub fn successor_count(g: &Graph, c: &Configuration) -> u64 {
    protocol::enabled_actions(g, c)
        .iter()
        .map(|(_, rules)| rules.len() as u64 + 1)
        .product::<u64>()
        - 1
}

/// Successor indices of `c` with their move weights, one per daemon choice.
///
/// Each action only writes its own node's variables, so a step's index delta
/// is the sum of the single-action deltas.
pub fn successors(g: &Graph, enc: &Encoding, c: &Configuration) -> Vec<(u64, u8)> {
    let mut out = Vec::new();
    let mut scratch = c.clone();
    let base = enc.encode(c).expect("configuration inside the encoded space");
    expand(g, enc, c, base, &mut scratch, &mut Vec::new(), &mut out);
    out
}

fn expand(
    g: &Graph,
    enc: &Encoding,
    c: &Configuration,
    base: u64,
    scratch: &mut Configuration,
    rules: &mut Vec<Rule>,
    out: &mut Vec<(u64, u8)>,
) {
    let mut options: Vec<Vec<i64>> = Vec::new();
    for ui in 0..g.node_count() {
        rules.clear();
        protocol::enabled_at(g, c, ui, rules);
        if rules.is_empty() {
            continue;
        }
        let before = enc.node_part(c, ui) as i64;
        let deltas = rules
            .iter()
            .map(|&rule| {
                protocol::apply_at(g, c, scratch, ui, rule);
                let d = enc.node_part(scratch, ui) as i64 - before;
                scratch.states[ui] = c.states[ui];
                scratch.registers[ui].copy_from_slice(&c.registers[ui]);
                d
            })
            .collect();
        options.push(deltas);
    }
    if options.is_empty() {
        return;
    }
    let mut choice = vec![0usize; options.len()];
    'odometer: loop {
        let mut i = 0;
        loop {
            if i == choice.len() {
                break 'odometer;
            }
            choice[i] += 1;
            if choice[i] <= options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        let mut target = base as i64;
        let mut weight = 0u8;
        for (opts, &ch) in options.iter().zip(&choice) {
            if ch > 0 {
                target += opts[ch - 1];
                weight += 1;
            }
        }
        out.push((target as u64, weight));
    }
}

/// Full transition relation in CSR form.
pub struct TransitionSystem {
    encoding: Encoding,
    offsets: Vec<u64>,
    targets: Vec<u32>,
    weights: Vec<u8>,
}

const BLOCK: u64 = 1 << 14;

impl TransitionSystem {
    pub fn build(g: &Graph, opts: CheckOptions) -> Result<Self, ModelCheckError> {
        let space = enumerate_states(g, opts.canonicalize, opts.cap)?;
        let encoding = space.encoding;
        let count = encoding.count();
        log::info!("building transition system over {count} states");
        let blocks: Vec<(Vec<u32>, Vec<u32>, Vec<u8>)> = (0..count.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let (lo, hi) = (b * BLOCK, ((b + 1) * BLOCK).min(count));
                let mut c = encoding.decode(lo);
                let mut scratch = c.clone();
                let mut rules = Vec::new();
                let mut succ = Vec::new();
                let (mut degs, mut targets, mut weights) = (Vec::new(), Vec::new(), Vec::new());
                for i in lo..hi {
                    encoding.decode_into(i, &mut c);
                    scratch.clone_from(&c);
                    succ.clear();
                    expand(g, &encoding, &c, i, &mut scratch, &mut rules, &mut succ);
                    degs.push(succ.len() as u32);
                    for &(t, w) in &succ {
                        targets.push(t as u32);
                        weights.push(w);
                    }
                }
                (degs, targets, weights)
            })
            .collect();
        let total: usize = blocks.iter().map(|b| b.1.len()).sum();
        let mut offsets = Vec::with_capacity(count as usize + 1);
        let mut targets = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        offsets.push(0u64);
        for (degs, t, w) in blocks {
            for d in degs {
                offsets.push(offsets.last().unwrap() + d as u64);
            }
            targets.extend(t);
            weights.extend(w);
        }
        log::info!("{} transitions", targets.len());
        Ok(TransitionSystem {
            encoding,
            offsets,
            targets,
            weights,
        })
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn state_count(&self) -> u64 {
        self.encoding.count()
    }

    pub fn transition_count(&self) -> u64 {
        self.targets.len() as u64
    }

    fn range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v] as usize..self.offsets[v + 1] as usize
    }

    pub fn out_degree(&self, v: u64) -> u64 {
        self.range(v as usize).len() as u64
    }

    /// `(target, moves)` pairs of state `v`.
    pub fn edges(&self, v: u64) -> impl Iterator<Item = (u32, u8)> + '_ {
        let r = self.range(v as usize);
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }
}

impl Csr for TransitionSystem {
    fn vertex_count(&self) -> usize {
        self.encoding.count() as usize
    }

    fn successors(&self, v: usize) -> &[u32] {
        &self.targets[self.range(v)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    /// A cycle `C_0 → … → C_k → C_0`.
    Cycle,
    /// A stable configuration that is not legitimate or has a stale register.
    Sink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub configurations: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub canonicalized: bool,
    pub state_count: u64,
    pub transition_count: u64,
    pub has_cycle: bool,
    pub all_sinks_legitimate: bool,
    /// Every sink also holds correct values in all registers.
    pub all_sinks_registers_correct: bool,
    pub sink_count: u64,
    /// Longest weighted path to a sink; `None` when cyclic.
    pub max_moves_to_stability: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

impl CheckReport {
    /// Self-stabilization holds exhaustively on the checked graph.
    pub fn verified(&self) -> bool {
        !self.has_cycle && self.all_sinks_legitimate && self.all_sinks_registers_correct
    }
}

fn to_json(g: &Graph, c: &Configuration) -> serde_json::Value {
    serde_json::to_value(ConfigView::new(g, c)).expect("configuration serializes")
}

/// Shortest cycle through `start` inside its component, by BFS.
fn cycle_through(ts: &TransitionSystem, comp: &[u32], start: u32) -> Vec<u32> {
    use std::collections::{HashMap, HashSet, VecDeque};
    let members: HashSet<u32> = comp.iter().copied().collect();
    let mut parent: HashMap<u32, u32> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in ts.successors(v as usize) {
            if w == start {
                let mut path = vec![v];
                let mut x = v;
                while x != start {
                    x = parent[&x];
                    path.push(x);
                }
                path.reverse();
                return path;
            }
            if members.contains(&w) && !parent.contains_key(&w) {
                parent.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    unreachable!("component member lies on a cycle")
}

pub fn verify(g: &Graph, opts: CheckOptions) -> Result<CheckReport, ModelCheckError> {
    let ts = TransitionSystem::build(g, opts)?;
    let enc = ts.encoding();
    let n = ts.state_count() as usize;

    let mut sink_count = 0u64;
    let mut all_legit = true;
    let mut all_regs = true;
    let mut bad_sink = None;
    for v in 0..n {
        if ts.out_degree(v as u64) > 0 {
            continue;
        }
        sink_count += 1;
        let c = enc.decode(v as u64);
        let legit = verifier::is_legitimate(g, &c);
        let regs = verifier::check_stable_registers(g, &c) == Ok(true);
        all_legit &= legit;
        all_regs &= regs;
        if !(legit && regs) && bad_sink.is_none() {
            bad_sink = Some(c);
        }
    }

    let mut dist = vec![0u64; n];
    let mut cyclic: Option<Vec<u32>> = None;
    scc::tarjan(&ts, |comp| {
        let v = comp[0] as usize;
        let self_loop = comp.len() == 1 && ts.successors(v).contains(&comp[0]);
        if comp.len() > 1 || self_loop {
            if cyclic.is_none() {
                cyclic = Some(comp.to_vec());
            }
            return;
        }
        dist[v] = ts
            .edges(v as u64)
            .map(|(t, w)| w as u64 + dist[t as usize])
            .max()
            .unwrap_or(0);
    });

    let witness = if let Some(comp) = &cyclic {
        let cycle = cycle_through(&ts, comp, comp[0]);
        Some(Witness {
            kind: WitnessKind::Cycle,
            configurations: cycle.iter().map(|&v| to_json(g, &enc.decode(v as u64))).collect(),
        })
    } else {
        bad_sink.map(|c| Witness {
            kind: WitnessKind::Sink,
            configurations: vec![to_json(g, &c)],
        })
    };

    Ok(CheckReport {
        canonicalized: opts.canonicalize,
        state_count: ts.state_count(),
        transition_count: ts.transition_count(),
        has_cycle: cyclic.is_some(),
        all_sinks_legitimate: all_legit,
        all_sinks_registers_correct: all_regs,
        sink_count,
        max_moves_to_stability: cyclic.is_none().then(|| dist.iter().copied().max().unwrap_or(0)),
        witness,
    })
}

/// Exact worst-case number of moves any daemon can force on `g` (canonical
/// encoding, default cap).
pub fn longest_move_path(g: &Graph) -> Result<u64, ModelCheckError> {
    let report = verify(g, CheckOptions::default())?;
    report.max_moves_to_stability.ok_or(ModelCheckError::Cyclic)
}
