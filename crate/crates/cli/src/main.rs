//! `linkmatch`: simulate, sweep, model-check and verify executions of the
//! link-register maximal matching protocol.
//!
//! Exit codes: 0 success, 1 a monitor or check failed, 2 usage or I/O error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use linkmatch::codec::config_from_json;
use linkmatch::daemon::{default_priority, DaemonKind, DaemonSpec, TieBreak};
use linkmatch::executor::{self, InitSpec, RunOptions, Trace};
use linkmatch::graph::{Graph, GraphKind};
use linkmatch::modelcheck::{self, CheckOptions, ModelCheckError, DEFAULT_CAP};
use linkmatch::protocol::{Configuration, RuleKind};
use linkmatch::sweep::{self, Suite};
use linkmatch::trace_io::{self, ReplayScript, TraceMeta};

/// Cap used by `modelcheck` unless `--big` is given.
const SMALL_CAP: u64 = 100_000;

#[derive(Parser)]
#[command(name = "linkmatch", version, about = "Self-stabilizing maximal matching with link registers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph as an edge list.
    GenGraph(GenGraphArgs),
    /// Run one execution and emit its trace as JSONL.
    Run(RunArgs),
    /// Run a suite of executions and emit one CSV row per run.
    Sweep(SweepArgs),
    /// Exhaustively check convergence on a tiny graph.
    Modelcheck(ModelcheckArgs),
    /// Verify a trace JSONL file and emit a monitor report.
    CheckTrace(CheckTraceArgs),
    /// Apply a scripted action sequence and emit the resulting trace.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Path,
    Cycle,
    Complete,
    Star,
    Gnp,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Edge probability (gnp only).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resample gnp until no node is isolated.
    #[arg(long)]
    no_isolated: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DaemonArg {
    AdvRandom,
    Sequential,
    Synchronous,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieBreakArg {
    FixedPriority,
    UniformRandom,
}

#[derive(Args)]
struct DaemonArgs {
    #[arg(long, value_enum, default_value = "adv-random")]
    daemon: DaemonArg,
    /// Inclusion probability of adv-random.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Greedy rule priority, comma separated (default Reset,Seduction,Marriage,Increase,Write).
    #[arg(long, value_delimiter = ',')]
    priority: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "fixed-priority")]
    tie_break: TieBreakArg,
}

#[derive(Args)]
struct RunArgs {
    /// Edge-list file.
    #[arg(long)]
    graph: PathBuf,
    /// allnull | legit | random | random:<seed> | file:<path>
    #[arg(long, default_value = "random")]
    init: String,
    #[command(flatten)]
    daemon: DaemonArgs,
    /// Seeds the daemon, and the initial configuration for `--init random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Move budget (default 200·n·Δ³ + 1000).
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a human-readable summary instead of the trace.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// `standard` or a suite manifest path.
    #[arg(long, default_value = "standard")]
    suite: String,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print per-graph aggregates instead of CSV.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct ModelcheckArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Allow state spaces up to 10^7 configurations (default cap 10^5).
    #[arg(long)]
    big: bool,
    /// Keep the counter of null nodes instead of fixing it to 0.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckTraceArgs {
    /// Trace file, or `-` for stdin.
    #[arg(long = "in")]
    input: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    graph: PathBuf,
    /// allnull | legit | random | random:<seed> | file:<path>
    #[arg(long)]
    init: String,
    /// JSON script: {"steps": [[{"node":0,"rule":"Write","arg":1}], ...], "checkpoints": [...]}
    #[arg(long)]
    script: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: bool,
}

/// A check that ran to completion and failed; exit code 1.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn fail(msg: impl Into<String>) -> anyhow::Error {
    Failed(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SELFSTAB_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Modelcheck(a) => modelcheck_cmd(a),
        Command::CheckTrace(a) => check_trace(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Failed>() => {
            eprintln!("linkmatch: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("linkmatch: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Graph::from_edge_list(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_init(spec: &str, seed: u64, g: &Graph) -> Result<(InitSpec, String)> {
    let init = match spec {
        "allnull" => InitSpec::AllNull,
        "legit" => InitSpec::Legitimate,
        "random" => InitSpec::ArbitraryRandom { seed },
        s if s.starts_with("random:") => InitSpec::ArbitraryRandom {
            seed: s["random:".len()..].parse().context("bad random seed")?,
        },
        s if s.starts_with("file:") => {
            let path = &s["file:".len()..];
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let c = config_from_json(g, &text).with_context(|| format!("parsing {path}"))?;
            return Ok((InitSpec::Explicit(c), s.to_owned()));
        }
        other => bail!("unknown --init `{other}` (allnull | legit | random | random:<seed> | file:<path>)"),
    };
    let label = init.label();
    Ok((init, label))
}

fn daemon_spec(a: &DaemonArgs, seed: u64) -> Result<DaemonSpec> {
    let kind = match a.daemon {
        DaemonArg::AdvRandom => DaemonKind::AdvRandom { q: a.q },
        DaemonArg::Sequential => DaemonKind::Sequential,
        DaemonArg::Synchronous => DaemonKind::Synchronous,
        DaemonArg::Greedy => DaemonKind::Greedy {
            priority: match &a.priority {
                Some(names) => names
                    .iter()
                    .map(|n| n.parse::<RuleKind>().map_err(anyhow::Error::msg))
                    .collect::<Result<_>>()?,
                None => default_priority(),
            },
        },
    };
    let tie = match a.tie_break {
        TieBreakArg::FixedPriority => TieBreak::FixedPriority,
        TieBreakArg::UniformRandom => TieBreak::UniformRandom,
    };
    let spec = DaemonSpec::new(kind, seed).with_tie_break(tie);
    spec.validate()?;
    Ok(spec)
}

fn gen_graph(a: GenGraphArgs) -> Result<()> {
    let kind = match a.family {
        Family::Path => GraphKind::Path { n: a.n },
        Family::Cycle => GraphKind::Cycle { n: a.n },
        Family::Complete => GraphKind::Complete { n: a.n },
        Family::Star => GraphKind::Star { n: a.n },
        Family::Gnp => GraphKind::Gnp {
            n: a.n,
            p: a.p,
            seed: a.seed,
            no_isolated: a.no_isolated,
        },
    };
    let g = Graph::generate(kind)?;
    let mut w = output(&a.out)?;
    writeln!(w, "# {}", kind.label())?;
    w.write_all(g.to_edge_list().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn summarize(w: &mut dyn Write, g: &Graph, trace: &Trace) -> io::Result<()> {
    let (n, d) = (g.node_count(), g.max_degree());
    writeln!(w, "outcome      {:?}", trace.outcome)?;
    writeln!(w, "steps        {}", trace.steps.len())?;
    writeln!(w, "moves        {}", trace.total_moves())?;
    for k in RuleKind::ALL {
        writeln!(w, "  {:<10} {}", k.name(), trace.move_counts.rule(k))?;
    }
    let scale = (n * d.pow(3)) as f64;
    if scale > 0.0 {
        writeln!(w, "moves/(n·Δ³) {:.4}  (n={n}, Δ={d})", trace.total_moves() as f64 / scale)?;
    }
    let pairs = linkmatch::verifier::matched_pairs(g, &trace.last);
    writeln!(w, "matched      {pairs:?}")?;
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let (init, label) = parse_init(&a.init, a.seed, &g)?;
    let initial = init.build(&g)?;
    let spec = daemon_spec(&a.daemon, a.seed)?;
    let budget = a.budget.unwrap_or_else(|| executor::default_budget(&g));
    let trace = executor::run(&g, &initial, &spec, RunOptions { budget, record_configs: false })?;
    let mut w = output(&a.out)?;
    if a.summary {
        summarize(&mut w, &g, &trace)?;
    } else {
        let meta = TraceMeta {
            daemon: Some(spec),
            init: label,
            budget: Some(budget),
        };
        trace_io::write_trace(&mut w, &g, &meta, &trace)?;
    }
    w.flush()?;
    if !trace.is_stable() {
        return Err(fail(format!("not stable after {} moves (budget {budget})", trace.total_moves())));
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let suite = Suite::load(&a.suite)?;
    let rows = sweep::sweep(&suite, a.workers)?;
    let mut w = output(&a.out)?;
    if a.summary {
        writeln!(w, "{:<22} {:<18} {:>5} {:>9} {:>9} {:>8} {:>6}", "graph", "daemon", "runs", "mean", "max", "max/nΔ³", "ok")?;
        let mut i = 0;
        while i < rows.len() {
            let j = i + rows[i..]
                .iter()
                .take_while(|r| r.graph == rows[i].graph && r.daemon == rows[i].daemon)
                .count();
            let grp = &rows[i..j];
            let mean = grp.iter().map(|r| r.moves as f64).sum::<f64>() / grp.len() as f64;
            let max = grp.iter().map(|r| r.moves).max().unwrap_or(0);
            let ratio = grp.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let ok = grp.iter().filter(|r| r.stabilized && r.legitimate && r.monitors_pass).count();
            writeln!(w, "{:<22} {:<18} {:>5} {:>9.1} {:>9} {:>8.4} {:>6}", grp[0].graph, grp[0].daemon, grp.len(), mean, max, ratio, ok)?;
            i = j;
        }
    } else {
        sweep::write_csv(&mut w, &rows)?;
    }
    w.flush()?;
    let bad = rows
        .iter()
        .filter(|r| !(r.stabilized && r.legitimate && r.monitors_pass))
        .count();
    if bad > 0 {
        return Err(fail(format!("{bad} of {} runs failed", rows.len())));
    }
    Ok(())
}

fn modelcheck_cmd(a: ModelcheckArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let opts = CheckOptions {
        canonicalize: !a.full,
        cap: if a.big { DEFAULT_CAP } else { SMALL_CAP },
    };
    let report = match modelcheck::verify(&g, opts) {
        Ok(r) => r,
        Err(e @ ModelCheckError::CapExceeded { .. }) if !a.big => bail!("{e} (use --big to raise the cap to {DEFAULT_CAP})"),
        Err(e) => return Err(e.into()),
    };
    let mut w = output(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if !report.verified() {
        return Err(fail("self-stabilization falsified; see witness"));
    }
    Ok(())
}

fn check_trace(a: CheckTraceArgs) -> Result<()> {
    let reader: Box<dyn BufRead> = if a.input == "-" {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        Box::new(BufReader::new(
            File::open(&a.input).with_context(|| format!("opening {}", a.input))?,
        ))
    };
    let tf = trace_io::read_trace(reader)?;
    let report = trace_io::check_trace_file(&tf);
    let mut w = output(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(f) = report.failures().next() {
        return Err(fail(format!("monitor `{}` failed: {}", f.monitor, f.detail)));
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let (init, label) = parse_init(&a.init, a.seed, &g)?;
    let initial: Configuration = init.build(&g)?;
    let text = std::fs::read_to_string(&a.script).with_context(|| format!("reading {}", a.script.display()))?;
    let script: ReplayScript = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.script.display()))?;
    let sets = script.action_sets()?;
    let trace = Trace::from_actions(&g, initial, sets).map_err(|e| fail(e.to_string()))?;
    let configs = trace.configs.as_deref().expect("replay records configurations");
    let bad = script.check(&g, configs)?;
    let mut w = output(&a.out)?;
    if a.summary {
        summarize(&mut w, &g, &trace)?;
        writeln!(w, "checkpoints  {} of {} match", script.checkpoints.len() - bad.len(), script.checkpoints.len())?;
    } else {
        let meta = TraceMeta {
            daemon: None,
            init: label,
            budget: None,
        };
        trace_io::write_trace(&mut w, &g, &meta, &trace)?;
    }
    w.flush()?;
    if !bad.is_empty() {
        return Err(fail(format!("checkpoints differ: {}", bad.join(", "))));
    }
    Ok(())
}
