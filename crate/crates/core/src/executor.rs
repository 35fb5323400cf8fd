//! Executions: initial configurations, the select/apply loop, move
//! accounting and replay of scripted action sequences.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::config_hash;
use crate::daemon::{Daemon, DaemonError, DaemonSpec};
use crate::graph::{Graph, NodeId};
use crate::protocol::{
    self, Action, Configuration, NodeState, ProtocolError, RegisterValue, RuleKind, StepError,
};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid initial configuration: {0}")]
    InvalidInit(#[from] ProtocolError),
    #[error("move budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Daemon(#[from] DaemonError),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("step {step}: {source}")]
pub struct ReplayError {
    /// 1-based index of the offending action set.
    pub step: usize,
    pub source: StepError,
}

/// How the initial configuration of an execution is produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitSpec {
    AllNull,
    Legitimate,
    ArbitraryRandom { seed: u64 },
    Explicit(Configuration),
}

impl InitSpec {
    pub fn build(&self, g: &Graph) -> Result<Configuration, ProtocolError> {
        match self {
            InitSpec::AllNull => Ok(Configuration::all_null(g)),
            InitSpec::Legitimate => Ok(legitimate_configuration(g)),
            InitSpec::ArbitraryRandom { seed } => Ok(random_configuration(g, *seed)),
            InitSpec::Explicit(c) => {
                c.validate(g)?;
                Ok(c.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitSpec::AllNull => "allnull".into(),
            InitSpec::Legitimate => "legit".into(),
            InitSpec::ArbitraryRandom { seed } => format!("random(seed={seed})"),
            InitSpec::Explicit(_) => "explicit".into(),
        }
    }
}

/// Uniform arbitrary configuration: `p_u` over `N(u) ∪ {null}`, `m_u` over
/// `{0,1,2}`, every register over the nine-value domain.
pub fn random_configuration(g: &Graph, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain: Vec<RegisterValue> = RegisterValue::domain().collect();
    let mut c = Configuration::all_null(g);
    for ui in 0..g.node_count() {
        let adj = g.adj_at(ui);
        let pick = rng.random_range(0..=adj.len());
        let p = (pick < adj.len()).then(|| adj[pick]);
        let m = rng.random_range(0..3u8);
        c.states[ui] = NodeState::new(p, m);
        for r in c.registers[ui].iter_mut() {
            *r = *domain.choose(&mut rng).expect("nonempty domain");
        }
    }
    c
}

/// A stable configuration encoding the greedy (id-order) maximal matching:
/// matched pairs locked at `m = 2`, everything else null, registers current.
pub fn legitimate_configuration(g: &Graph) -> Configuration {
    let mut c = Configuration::all_null(g);
    for (u, v) in g.edges() {
        let (ui, vi) = (g.index_of(u).unwrap(), g.index_of(v).unwrap());
        if c.states[ui].p.is_none() && c.states[vi].p.is_none() {
            c.states[ui] = NodeState::new(Some(v), 2);
            c.states[vi] = NodeState::new(Some(u), 2);
        }
    }
    with_current_registers(g, c)
}

/// `200·n·Δ³ + 1000` moves.
pub fn default_budget(g: &Graph) -> u64 {
    let n = g.node_count() as u64;
    let d = g.max_degree() as u64;
    200 * n * d * d * d + 1000
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MoveCounts {
    pub per_rule: BTreeMap<RuleKind, u64>,
    pub per_node: BTreeMap<NodeId, u64>,
}

impl MoveCounts {
    pub fn record(&mut self, act: &Action) {
        *self.per_rule.entry(act.rule.kind()).or_default() += 1;
        *self.per_node.entry(act.node).or_default() += 1;
    }

    pub fn rule(&self, kind: RuleKind) -> u64 {
        self.per_rule.get(&kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.per_rule.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub actions: Vec<Action>,
    /// Hash of the configuration this step produced.
    pub hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Stable,
    #[serde(rename = "budget")]
    BudgetExceeded,
}

/// A recorded execution `C_0, A_0, C_1, A_1, …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: Configuration,
    pub steps: Vec<Step>,
    /// `C_0..=C_k` when recorded; `configs[i]` is the configuration before step `i + 1`.
    pub configs: Option<Vec<Configuration>>,
    pub move_counts: MoveCounts,
    pub outcome: Outcome,
    /// Final configuration (stable or the last one before the budget ran out).
    pub last: Configuration,
}

impl Trace {
    pub fn total_moves(&self) -> u64 {
        self.move_counts.total()
    }

    pub fn is_stable(&self) -> bool {
        self.outcome == Outcome::Stable
    }

    pub fn action_sets(&self) -> impl Iterator<Item = &[Action]> {
        self.steps.iter().map(|s| s.actions.as_slice())
    }

    /// Rebuilds a trace with full per-step configurations from its initial
    /// configuration and action sets, checking every step is enabled.
    pub fn from_actions(
        g: &Graph,
        initial: Configuration,
        action_sets: Vec<Vec<Action>>,
    ) -> Result<Trace, ReplayError> {
        let configs = replay(g, &initial, &action_sets)?;
        let mut move_counts = MoveCounts::default();
        let steps = action_sets
            .into_iter()
            .zip(&configs[1..])
            .map(|(actions, c)| {
                actions.iter().for_each(|a| move_counts.record(a));
                Step {
                    actions,
                    hash: config_hash(c),
                }
            })
            .collect();
        let last = configs.last().expect("replay yields the initial configuration").clone();
        let outcome = if protocol::any_enabled(g, &last) {
            Outcome::BudgetExceeded
        } else {
            Outcome::Stable
        };
        Ok(Trace {
            initial,
            steps,
            configs: Some(configs),
            move_counts,
            outcome,
            last,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub budget: u64,
    /// Keep every intermediate configuration (needed by the closure monitor).
    pub record_configs: bool,
}

impl RunOptions {
    pub fn for_graph(g: &Graph) -> Self {
        RunOptions {
            budget: default_budget(g),
            record_configs: false,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record_configs = true;
        self
    }
}

/// Runs select→apply until no node is eligible or the move budget is spent.
pub fn run(g: &Graph, init: &Configuration, spec: &DaemonSpec, opts: RunOptions) -> Result<Trace, ExecError> {
    if opts.budget == 0 {
        return Err(ExecError::ZeroBudget);
    }
    init.validate(g)?;
    let mut daemon = Daemon::new(spec.clone())?;
    let mut current = init.clone();
    let mut steps = Vec::new();
    let mut configs = opts.record_configs.then(|| vec![init.clone()]);
    let mut counts = MoveCounts::default();
    let mut moves = 0u64;
    let outcome = loop {
        if !protocol::any_enabled(g, &current) {
            break Outcome::Stable;
        }
        if moves >= opts.budget {
            break Outcome::BudgetExceeded;
        }
        let sel = daemon.select(g, &current)?;
        let next = protocol::apply_unchecked(g, &current, &sel.actions);
        debug_assert_ne!(next, current, "every enabled action changes the configuration");
        for a in &sel.actions {
            counts.record(a);
        }
        moves += sel.actions.len() as u64;
        steps.push(Step {
            actions: sel.actions,
            hash: config_hash(&next),
        });
        if let Some(cs) = configs.as_mut() {
            cs.push(next.clone());
        }
        current = next;
    };
    log::debug!("run finished: {outcome:?} after {moves} moves, {} steps", steps.len());
    Ok(Trace {
        initial: init.clone(),
        steps,
        configs,
        move_counts: counts,
        outcome,
        last: current,
    })
}

/// Applies a scripted sequence of action sets, returning `C_0..=C_k`.
pub fn replay(g: &Graph, init: &Configuration, script: &[Vec<Action>]) -> Result<Vec<Configuration>, ReplayError> {
    init.validate(g).map_err(|e| ReplayError {
        step: 0,
        source: e.into(),
    })?;
    let mut out = Vec::with_capacity(script.len() + 1);
    out.push(init.clone());
    for (i, actions) in script.iter().enumerate() {
        let next = protocol::apply_step(g, out.last().unwrap(), actions).map_err(|source| ReplayError {
            step: i + 1,
            source,
        })?;
        out.push(next);
    }
    Ok(out)
}

/// Overwrites every register with its correct value.
pub fn with_current_registers(g: &Graph, mut c: Configuration) -> Configuration {
    for ui in 0..g.node_count() {
        for (k, &a) in g.adj_at(ui).iter().enumerate() {
            c.registers[ui][k] = protocol::crv_at(&c, ui, a);
        }
    }
    c
}

/// Empirical frequency of each register value, used by the sampler test.
pub fn register_histogram<'a, I>(configs: I) -> BTreeMap<RegisterValue, u64>
where
    I: IntoIterator<Item = &'a Configuration>,
{
    let mut h = BTreeMap::new();
    for c in configs {
        for r in c.registers.iter().flatten() {
            *h.entry(*r).or_default() += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daemon::DaemonKind;
    use crate::graph::GraphKind;
    use crate::protocol::tests::{k2, k2_config, S, T};
    use crate::protocol::PField::*;
    use crate::protocol::Rule;

    #[test]
    fn random_configuration_is_deterministic_and_valid() {
        let g = Graph::generate(GraphKind::Complete { n: 5 }).unwrap();
        let a = random_configuration(&g, 42);
        assert_eq!(a, random_configuration(&g, 42));
        assert_ne!(a, random_configuration(&g, 43));
        a.validate(&g).unwrap();
    }

    #[test]
    fn register_values_are_uniform_on_k2() {
        // Frequency oracle: 10^4 configurations × 2 registers, each of the
        // nine values expected at 1/9; tolerance ±0.02 absolute.
        let g = k2();
        let samples: Vec<Configuration> = (0..10_000).map(|s| random_configuration(&g, s)).collect();
        let h = register_histogram(&samples);
        assert_eq!(h.len(), 9);
        let total: u64 = h.values().sum();
        assert_eq!(total, 20_000);
        let mut chi2 = 0.0;
        let expected = total as f64 / 9.0;
        for (&r, &count) in &h {
            let freq = count as f64 / total as f64;
            assert!((freq - 1.0 / 9.0).abs() < 0.02, "{r}: {freq}");
            chi2 += (count as f64 - expected).powi(2) / expected;
        }
        // 8 degrees of freedom, 99.9th percentile ≈ 26.12
        assert!(chi2 < 26.12, "chi-square {chi2}");
    }

    #[test]
    fn all_null_is_not_stable_on_k2() {
        let g = k2();
        let c = InitSpec::AllNull.build(&g).unwrap();
        assert!(c.states.iter().all(|s| *s == NodeState::default()));
        assert!(c.registers.iter().flatten().all(|r| *r == RegisterValue::IDLE));
        assert_eq!(protocol::enabled_rules(&g, &c, S), vec![Rule::Seduction(T)]);
    }

    #[test]
    fn figure_initial_configuration_stabilizes_locked() {
        let g = k2();
        let init = k2_config((None, 0), (None, 0), (You, 2), (Idle, 0));
        let spec = DaemonSpec::new(DaemonKind::Sequential, 0);
        let trace = run(&g, &init, &spec, RunOptions::for_graph(&g)).unwrap();
        assert!(trace.is_stable());
        let fin = &trace.last;
        assert_eq!(fin.state(&g, S).unwrap(), NodeState::new(Some(T), 2));
        assert_eq!(fin.state(&g, T).unwrap(), NodeState::new(Some(S), 2));
        assert_eq!(fin.register(&g, S, T).unwrap(), RegisterValue::new(You, 2));
        assert_eq!(fin.register(&g, T, S).unwrap(), RegisterValue::new(You, 2));
        // Only one action is ever enabled on this path: it is exactly the 13-move script.
        assert_eq!(trace.total_moves(), 13);
    }

    #[test]
    fn legitimate_start_takes_no_steps() {
        for kind in [GraphKind::Path { n: 7 }, GraphKind::Complete { n: 5 }, GraphKind::Star { n: 6 }] {
            let g = Graph::generate(kind).unwrap();
            let init = InitSpec::Legitimate.build(&g).unwrap();
            let spec = DaemonSpec::new(DaemonKind::Synchronous, 0);
            let trace = run(&g, &init, &spec, RunOptions::for_graph(&g)).unwrap();
            assert!(trace.is_stable());
            assert!(trace.steps.is_empty());
            assert_eq!(trace.last, init);
        }
    }

    #[test]
    fn budget_exhaustion() {
        let g = Graph::generate(GraphKind::Complete { n: 6 }).unwrap();
        let init = random_configuration(&g, 5);
        let spec = DaemonSpec::new(DaemonKind::Sequential, 1);
        let opts = RunOptions { budget: 3, record_configs: false };
        let trace = run(&g, &init, &spec, opts).unwrap();
        assert_eq!(trace.outcome, Outcome::BudgetExceeded);
        assert_eq!(trace.total_moves(), 3);
        assert!(matches!(
            run(&g, &init, &spec, RunOptions { budget: 0, record_configs: false }),
            Err(ExecError::ZeroBudget)
        ));
    }

    #[test]
    fn rejects_foreign_initial_configuration() {
        let g = k2();
        let other = Graph::generate(GraphKind::Path { n: 3 }).unwrap();
        let c = Configuration::all_null(&other);
        let spec = DaemonSpec::new(DaemonKind::Synchronous, 0);
        assert!(matches!(
            run(&g, &c, &spec, RunOptions::for_graph(&g)),
            Err(ExecError::InvalidInit(_))
        ));
    }

    #[test]
    fn move_counts_are_consistent_and_runs_reproducible() {
        let g = Graph::generate(GraphKind::Cycle { n: 7 }).unwrap();
        let init = random_configuration(&g, 9);
        let spec = DaemonSpec::new(DaemonKind::AdvRandom { q: 0.5 }, 4);
        let opts = RunOptions::for_graph(&g).recording();
        let a = run(&g, &init, &spec, opts).unwrap();
        let b = run(&g, &init, &spec, opts).unwrap();
        assert_eq!(a, b);
        let per_node: u64 = a.move_counts.per_node.values().sum();
        let per_step: usize = a.steps.iter().map(|s| s.actions.len()).sum();
        assert_eq!(per_node, a.total_moves());
        assert_eq!(per_step as u64, a.total_moves());
        let configs = a.configs.as_ref().unwrap();
        assert_eq!(configs.len(), a.steps.len() + 1);
        for w in configs.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        let rebuilt = Trace::from_actions(&g, init, a.steps.iter().map(|s| s.actions.clone()).collect()).unwrap();
        assert_eq!(rebuilt, a);
    }

    #[test]
    fn replay_contract() {
        let g = k2();
        let init = k2_config((None, 0), (None, 0), (You, 2), (Idle, 0));
        assert_eq!(replay(&g, &init, &[]).unwrap(), vec![init.clone()]);
        let script = vec![
            vec![Action::new(S, Rule::Write(T))],
            vec![Action::new(T, Rule::Marriage(S))],
        ];
        let err = replay(&g, &init, &script).unwrap_err();
        assert_eq!(err.step, 2);
        assert_eq!(err.source, StepError::Disabled(Action::new(T, Rule::Marriage(S))));
    }

    #[test]
    fn default_budget_formula() {
        let g = Graph::generate(GraphKind::Complete { n: 4 }).unwrap();
        assert_eq!(default_budget(&g), 200 * 4 * 27 + 1000);
    }
}
