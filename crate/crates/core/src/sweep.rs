//! Batch runs over a suite of graphs, initial configurations and daemons.

use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daemon::DaemonSpec;
use crate::executor::{self, random_configuration, RunOptions};
use crate::graph::{Graph, GraphError, GraphKind};
use crate::protocol::RuleKind;
use crate::verifier;

const STANDARD: &str = include_str!("../../../suites/standard.toml");

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("suite manifest: {0}")]
    Manifest(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("graph {label}: {source}")]
    Graph { label: String, source: GraphError },
    #[error("run on {label}: {msg}")]
    Run { label: String, msg: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    /// Random initial configurations per (graph, daemon).
    pub inits: u64,
    #[serde(default)]
    pub seed_base: u64,
    pub graphs: Vec<GraphKind>,
    pub daemons: Vec<DaemonSpec>,
}

impl Suite {
    pub fn standard() -> Suite {
        Suite::from_toml(STANDARD).expect("bundled suite parses")
    }

    pub fn from_toml(text: &str) -> Result<Suite, SweepError> {
        Ok(toml::from_str(text)?)
    }

    /// `standard` names the bundled suite; anything else is a manifest path.
    pub fn load(name_or_path: &str) -> Result<Suite, SweepError> {
        if name_or_path == "standard" {
            return Ok(Suite::standard());
        }
        Suite::from_toml(&std::fs::read_to_string(Path::new(name_or_path))?)
    }

    pub fn run_count(&self) -> u64 {
        self.graphs.len() as u64 * self.daemons.len() as u64 * self.inits
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub graph: String,
    pub n: usize,
    pub delta: usize,
    pub daemon: String,
    pub seed: u64,
    pub moves: u64,
    pub steps: u64,
    pub write: u64,
    pub seduction: u64,
    pub marriage: u64,
    pub increase: u64,
    pub reset: u64,
    pub stabilized: bool,
    /// Final configuration is a maximal matching with correct registers.
    pub legitimate: bool,
    pub monitors_pass: bool,
    /// `moves / (n·Δ³)`.
    pub ratio: f64,
    /// First failing monitor, empty when all pass.
    pub failure: String,
}

/// Runs one execution with full recording and every monitor.
pub fn run_one(g: &Graph, label: &str, init_seed: u64, spec: &DaemonSpec) -> Result<SweepRow, SweepError> {
    let mut spec = spec.clone();
    spec.seed = spec.seed.wrapping_add(init_seed);
    let init = random_configuration(g, init_seed);
    let trace = executor::run(g, &init, &spec, RunOptions::for_graph(g).recording()).map_err(|e| SweepError::Run {
        label: label.to_owned(),
        msg: e.to_string(),
    })?;
    let report = verifier::verify_trace(g, &trace).map_err(|e| SweepError::Run {
        label: label.to_owned(),
        msg: e.to_string(),
    })?;
    let stabilized = trace.is_stable();
    let legitimate = stabilized
        && verifier::is_legitimate(g, &trace.last)
        && verifier::check_stable_registers(g, &trace.last) == Ok(true);
    let (n, delta) = (g.node_count(), g.max_degree());
    let scale = (n * delta.pow(3)) as f64;
    let mc = &trace.move_counts;
    let failure = report
        .failures()
        .next()
        .map(|f| format!("{}: {}", f.monitor, f.detail))
        .unwrap_or_default();
    Ok(SweepRow {
        graph: label.to_owned(),
        n,
        delta,
        daemon: spec.label(),
        seed: init_seed,
        moves: trace.total_moves(),
        steps: trace.steps.len() as u64,
        write: mc.rule(RuleKind::Write),
        seduction: mc.rule(RuleKind::Seduction),
        marriage: mc.rule(RuleKind::Marriage),
        increase: mc.rule(RuleKind::Increase),
        reset: mc.rule(RuleKind::Reset),
        stabilized,
        legitimate,
        monitors_pass: report.passed(),
        ratio: if scale > 0.0 { trace.total_moves() as f64 / scale } else { 0.0 },
        failure,
    })
}

/// Runs the whole suite on `workers` threads (0 = rayon default). Rows come
/// back in graph, daemon, seed order regardless of scheduling.
pub fn sweep(suite: &Suite, workers: usize) -> Result<Vec<SweepRow>, SweepError> {
    let graphs = suite
        .graphs
        .iter()
        .map(|k| {
            Graph::generate(*k)
                .map(|g| (k.label(), g))
                .map_err(|source| SweepError::Graph { label: k.label(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize, u64)> = (0..graphs.len())
        .flat_map(|gi| {
            (0..suite.daemons.len())
                .flat_map(move |di| (0..suite.inits).map(move |s| (gi, di, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    log::info!("sweep `{}`: {} runs on {} workers", suite.name, jobs.len(), pool.current_num_threads());
    pool.install(|| {
        jobs.par_iter()
            .map(|&(gi, di, s)| {
                let (label, g) = &graphs[gi];
                run_one(g, label, suite.seed_base + s, &suite.daemons[di])
            })
            .collect()
    })
}

pub fn write_csv<W: io::Write>(w: W, rows: &[SweepRow]) -> Result<(), SweepError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(r: R) -> Result<Vec<SweepRow>, SweepError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(SweepError::from)
}
