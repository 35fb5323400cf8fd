//! Trace JSONL.
//!
//! ```text
//! {"graph":{"nodes":[0,1],"edges":[[0,1]]},"daemon":{...},"init":"allnull","budget":1200,"initial":{...}}
//! {"step":1,"actions":[{"node":0,"rule":"Seduction","arg":1}],"hash":"9f2c..."}
//! ...
//! {"outcome":"stable","moves":13,"per_rule":{"Write":7,...},"final":{...}}
//! ```
//!
//! The header embeds the graph and the initial configuration, so a trace file
//! can be checked without any other input.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::codec::{config_from_value, CodecError, ConfigView};
use crate::daemon::DaemonSpec;
use crate::executor::{MoveCounts, Outcome, Step, Trace};
use crate::graph::{Graph, GraphError, NodeId};
use crate::protocol::{Action, Rule, RuleKind};
use crate::verifier::{self, MonitorReport, MonitorResult};

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("header graph: {0}")]
    Graph(#[from] GraphError),
    #[error("line {line}: {source}")]
    Config { line: usize, source: CodecError },
}

/// One action as written in traces and replay scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionJson {
    pub node: NodeId,
    pub rule: RuleKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub arg: Option<NodeId>,
}

impl From<Action> for ActionJson {
    fn from(a: Action) -> Self {
        ActionJson {
            node: a.node,
            rule: a.rule.kind(),
            arg: a.rule.arg(),
        }
    }
}

impl TryFrom<ActionJson> for Action {
    type Error = String;

    fn try_from(a: ActionJson) -> Result<Self, String> {
        Ok(Action::new(a.node, Rule::from_parts(a.rule, a.arg)?))
    }
}

/// Graph as embedded in JSON documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl GraphJson {
    pub fn from_graph(g: &Graph) -> Self {
        GraphJson {
            nodes: g.nodes().to_vec(),
            edges: g.edges().collect(),
        }
    }

    pub fn to_graph(&self) -> Result<Graph, GraphError> {
        Graph::from_edges(self.edges.iter().copied(), &self.nodes)
    }
}

/// Provenance recorded in the header line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub daemon: Option<DaemonSpec>,
    pub init: String,
    pub budget: Option<u64>,
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    graph: GraphJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    daemon: Option<&'a DaemonSpec>,
    init: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
    initial: ConfigView<'a>,
}

#[derive(Deserialize)]
struct HeaderIn {
    graph: GraphJson,
    #[serde(default)]
    daemon: Option<DaemonSpec>,
    #[serde(default)]
    init: String,
    #[serde(default)]
    budget: Option<u64>,
    initial: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    step: usize,
    actions: Vec<ActionJson>,
    hash: String,
}

#[derive(Serialize)]
struct FinalOut<'a> {
    outcome: Outcome,
    moves: u64,
    per_rule: BTreeMap<RuleKind, u64>,
    #[serde(rename = "final")]
    last: ConfigView<'a>,
}

#[derive(Deserialize)]
struct FinalIn {
    outcome: Outcome,
    moves: u64,
    #[serde(rename = "final")]
    last: Value,
}

pub fn write_trace<W: Write>(mut w: W, g: &Graph, meta: &TraceMeta, trace: &Trace) -> io::Result<()> {
    let header = HeaderOut {
        graph: GraphJson::from_graph(g),
        daemon: meta.daemon.as_ref(),
        init: &meta.init,
        budget: meta.budget,
        initial: ConfigView::new(g, &trace.initial),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (i, step) in trace.steps.iter().enumerate() {
        let line = StepLine {
            step: i + 1,
            actions: step.actions.iter().map(|&a| a.into()).collect(),
            hash: step.hash.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    let per_rule = RuleKind::ALL
        .into_iter()
        .map(|k| (k, trace.move_counts.rule(k)))
        .collect();
    let fin = FinalOut {
        outcome: trace.outcome,
        moves: trace.total_moves(),
        per_rule,
        last: ConfigView::new(g, &trace.last),
    };
    serde_json::to_writer(&mut w, &fin)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn trace_to_string(g: &Graph, meta: &TraceMeta, trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, g, meta, trace).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// A parsed trace file. `trace.configs` is empty; `trace.last`, the outcome
/// and the step hashes are as claimed by the file.
#[derive(Debug, Clone)]
pub struct TraceFile {
    pub graph: Graph,
    pub meta: TraceMeta,
    pub trace: Trace,
    pub claimed_moves: u64,
}

pub fn read_trace<R: BufRead>(r: R) -> Result<TraceFile, TraceIoError> {
    let mut header: Option<(Graph, TraceMeta, crate::protocol::Configuration)> = None;
    let mut steps = Vec::new();
    let mut fin: Option<(Outcome, u64, crate::protocol::Configuration)> = None;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let format = |msg: &str| TraceIoError::Format {
            line: line_no,
            msg: msg.to_owned(),
        };
        let json = |source| TraceIoError::Json { line: line_no, source };
        let config = |source| TraceIoError::Config { line: line_no, source };
        if fin.is_some() {
            return Err(format("content after the final line"));
        }
        let v: Value = serde_json::from_str(&line).map_err(json)?;
        let Some((g, _, _)) = &header else {
            let h: HeaderIn = serde_json::from_value(v).map_err(json)?;
            let g = h.graph.to_graph()?;
            let initial = config_from_value(&g, h.initial).map_err(config)?;
            let meta = TraceMeta {
                daemon: h.daemon,
                init: h.init,
                budget: h.budget,
            };
            header = Some((g, meta, initial));
            continue;
        };
        if v.get("step").is_some() {
            let s: StepLine = serde_json::from_value(v).map_err(json)?;
            if s.step != steps.len() + 1 {
                return Err(format(&format!("expected step {}, found {}", steps.len() + 1, s.step)));
            }
            let actions = s
                .actions
                .into_iter()
                .map(Action::try_from)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format(&e))?;
            steps.push(Step { actions, hash: s.hash });
        } else if v.get("outcome").is_some() {
            let f: FinalIn = serde_json::from_value(v).map_err(json)?;
            let last = config_from_value(g, f.last).map_err(config)?;
            fin = Some((f.outcome, f.moves, last));
        } else {
            return Err(format("neither a step nor a final line"));
        }
    }
    let (graph, meta, initial) = header.ok_or(TraceIoError::Format {
        line: 1,
        msg: "empty trace".into(),
    })?;
    let (outcome, claimed_moves, last) = fin.ok_or(TraceIoError::Format {
        line: steps.len() + 2,
        msg: "missing final line".into(),
    })?;
    let mut move_counts = MoveCounts::default();
    steps.iter().flat_map(|s| &s.actions).for_each(|a| move_counts.record(a));
    Ok(TraceFile {
        graph,
        meta,
        trace: Trace {
            initial,
            steps,
            configs: None,
            move_counts,
            outcome,
            last,
        },
        claimed_moves,
    })
}

/// Scripted execution: one action set per step, with optional expected
/// configurations after given steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayScript {
    pub steps: Vec<Vec<ActionJson>>,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// Number of steps applied; 0 is the initial configuration.
    pub after: usize,
    #[serde(default)]
    pub label: String,
    pub config: Value,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("step {step}: {msg}")]
    Action { step: usize, msg: String },
    #[error("checkpoint `{label}` after step {after}: {source}")]
    Config { label: String, after: usize, source: CodecError },
    #[error("checkpoint `{label}` refers to step {after}, script has {len}")]
    OutOfRange { label: String, after: usize, len: usize },
}

impl ReplayScript {
    pub fn action_sets(&self) -> Result<Vec<Vec<Action>>, ScriptError> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, set)| {
                set.iter()
                    .map(|&a| Action::try_from(a))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|msg| ScriptError::Action { step: i + 1, msg })
            })
            .collect()
    }

    /// Compares each checkpoint with `configs[after]`; returns the labels
    /// of mismatching checkpoints.
    pub fn check(&self, g: &Graph, configs: &[crate::protocol::Configuration]) -> Result<Vec<String>, ScriptError> {
        let mut bad = Vec::new();
        for cp in &self.checkpoints {
            let expected = config_from_value(g, cp.config.clone()).map_err(|source| ScriptError::Config {
                label: cp.label.clone(),
                after: cp.after,
                source,
            })?;
            let actual = configs.get(cp.after).ok_or_else(|| ScriptError::OutOfRange {
                label: cp.label.clone(),
                after: cp.after,
                len: configs.len().saturating_sub(1),
            })?;
            if *actual != expected {
                bad.push(cp.label.clone());
            }
        }
        Ok(bad)
    }
}

pub const REPLAY: &str = "replay";

/// Checks a trace file end to end.
///
/// The interleaving monitors run on the actions exactly as written. The
/// execution is then replayed from the embedded initial configuration; every
/// step must be enabled, and the hashes, final configuration, outcome and
/// move count must match what the file claims. Closure and final-state checks
/// run on the replayed execution.
pub fn check_trace_file(tf: &TraceFile) -> MonitorReport {
    let g = &tf.graph;
    let claimed = &tf.trace;
    let mut report = verifier::check_interleavings(g, claimed);
    let action_sets: Vec<Vec<Action>> = claimed.steps.iter().map(|s| s.actions.clone()).collect();
    let replayed = match Trace::from_actions(g, claimed.initial.clone(), action_sets) {
        Ok(t) => t,
        Err(e) => {
            report.results.push(MonitorResult::fail(REPLAY, e.step, None, e.to_string(), (e.step, e.step)));
            return report;
        }
    };
    let mismatch = claimed
        .steps
        .iter()
        .zip(&replayed.steps)
        .position(|(a, b)| a.hash != b.hash)
        .map(|i| (i + 1, format!("step {} hash differs from the replayed configuration", i + 1)))
        .or_else(|| {
            let k = claimed.steps.len();
            if replayed.last != claimed.last {
                Some((k, "final configuration differs from the replayed one".into()))
            } else if replayed.outcome != claimed.outcome {
                Some((k, format!("claimed outcome {:?}, replay gives {:?}", claimed.outcome, replayed.outcome)))
            } else if tf.claimed_moves != replayed.total_moves() {
                Some((k, format!("claimed {} moves, actions contain {}", tf.claimed_moves, replayed.total_moves())))
            } else {
                None
            }
        });
    report.results.push(match mismatch {
        Some((k, detail)) => MonitorResult::fail(REPLAY, k, None, detail, (k, k)),
        None => MonitorResult::pass(REPLAY, format!("{} steps replayed", replayed.steps.len())),
    });
    report.extend(verifier::check_closure(g, &replayed).expect("replay records configurations"));
    report.extend(verifier::check_final(g, &replayed));
    report
}
