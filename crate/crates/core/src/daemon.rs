//! Schedulers that pick, at each step, a nonempty set of enabled actions with
//! at most one action per node.
//!
//! The adversarial distributed daemon is a predicate over executions rather
//! than a procedure, so it is approximated here by a seeded family: random
//! subsets, one-at-a-time, everyone-at-once, and a greedy adversary that
//! prefers a configurable rule ordering. Exhaustive adversary coverage is the
//! model checker's job.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::protocol::{self, Action, Configuration, Rule, RuleKind, StepError};

#[derive(Debug, Error, PartialEq)]
pub enum DaemonError {
    #[error("configuration is stable: no enabled action to select")]
    Stable,
    #[error("inclusion probability q = {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("priority list must be a permutation of the five rule kinds")]
    BadPriority,
    #[error("daemon produced an invalid selection: {0}")]
    Invalid(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Reset > Increase > Marriage(lowest a) > Seduction(lowest a) > Write(lowest a).
    #[default]
    FixedPriority,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DaemonKind {
    /// Each eligible node joins independently with probability `q`.
    AdvRandom { q: f64 },
    /// One action per step.
    Sequential,
    /// Every eligible node acts.
    Synchronous,
    /// Every eligible node acts, each with its highest-priority enabled rule.
    Greedy {
        #[serde(default = "default_priority")]
        priority: Vec<RuleKind>,
    },
}

/// Stress ordering for the greedy adversary: favor abandonment and fresh
/// proposals over progress.
pub fn default_priority() -> Vec<RuleKind> {
    vec![
        RuleKind::Reset,
        RuleKind::Seduction,
        RuleKind::Marriage,
        RuleKind::Increase,
        RuleKind::Write,
    ]
}

const FIXED_ORDER: [RuleKind; 5] = [
    RuleKind::Reset,
    RuleKind::Increase,
    RuleKind::Marriage,
    RuleKind::Seduction,
    RuleKind::Write,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaemonSpec {
    #[serde(flatten)]
    pub kind: DaemonKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl DaemonSpec {
    pub fn new(kind: DaemonKind, seed: u64) -> Self {
        DaemonSpec {
            kind,
            seed,
            tie_break: TieBreak::FixedPriority,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn validate(&self) -> Result<(), DaemonError> {
        match &self.kind {
            DaemonKind::AdvRandom { q } if !(*q > 0.0 && *q <= 1.0) => {
                Err(DaemonError::BadProbability(*q))
            }
            DaemonKind::Greedy { priority } => {
                let mut sorted = priority.clone();
                sorted.sort();
                if sorted == RuleKind::ALL {
                    Ok(())
                } else {
                    Err(DaemonError::BadPriority)
                }
            }
            _ => Ok(()),
        }
    }

    /// Short name used in reports: `adv-random`, `sequential`, ...
    pub fn label(&self) -> String {
        match &self.kind {
            DaemonKind::AdvRandom { q } => format!("adv-random(q={q})"),
            DaemonKind::Sequential => "sequential".into(),
            DaemonKind::Synchronous => "synchronous".into(),
            DaemonKind::Greedy { .. } => "greedy".into(),
        }
    }
}

/// A daemon's choice for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub actions: Vec<Action>,
}

impl SelectionOutcome {
    /// Nonempty, at most one action per node, all enabled in `c`.
    pub fn validate(&self, g: &Graph, c: &Configuration) -> Result<(), StepError> {
        protocol::validate_actions(g, c, &self.actions)
    }
}

/// A daemon instance: the spec plus the generator it owns.
pub struct Daemon {
    spec: DaemonSpec,
    rng: ChaCha8Rng,
}

impl Daemon {
    pub fn new(spec: DaemonSpec) -> Result<Self, DaemonError> {
        spec.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(Daemon { spec, rng })
    }

    pub fn spec(&self) -> &DaemonSpec {
        &self.spec
    }

    pub fn select(&mut self, g: &Graph, c: &Configuration) -> Result<SelectionOutcome, DaemonError> {
        let eligible = protocol::enabled_actions(g, c);
        if eligible.is_empty() {
            return Err(DaemonError::Stable);
        }
        let actions = self.choose(&eligible);
        let outcome = SelectionOutcome { actions };
        outcome.validate(g, c)?;
        Ok(outcome)
    }

    fn choose(&mut self, eligible: &[(NodeId, Vec<Rule>)]) -> Vec<Action> {
        let tie_break = self.spec.tie_break;
        match &self.spec.kind {
            DaemonKind::AdvRandom { q } => {
                let q = *q;
                let mut picked: Vec<usize> = (0..eligible.len())
                    .filter(|_| self.rng.random_bool(q))
                    .collect();
                if picked.is_empty() {
                    picked.push(self.rng.random_range(0..eligible.len()));
                }
                picked
                    .into_iter()
                    .map(|i| {
                        let (u, rules) = &eligible[i];
                        Action::new(*u, pick_rule(rules, tie_break, &mut self.rng))
                    })
                    .collect()
            }
            DaemonKind::Sequential => {
                let (u, rules) = eligible.choose(&mut self.rng).expect("nonempty");
                vec![Action::new(*u, pick_rule(rules, tie_break, &mut self.rng))]
            }
            DaemonKind::Synchronous => eligible
                .iter()
                .map(|(u, rules)| Action::new(*u, pick_rule(rules, tie_break, &mut self.rng)))
                .collect(),
            DaemonKind::Greedy { priority } => eligible
                .iter()
                .map(|(u, rules)| {
                    let kind = priority
                        .iter()
                        .copied()
                        .find(|k| rules.iter().any(|r| r.kind() == *k))
                        .expect("priority covers every kind");
                    let of_kind: Vec<Rule> =
                        rules.iter().copied().filter(|r| r.kind() == kind).collect();
                    let rule = match tie_break {
                        TieBreak::FixedPriority => of_kind[0],
                        TieBreak::UniformRandom => *of_kind.choose(&mut self.rng).expect("nonempty"),
                    };
                    Action::new(*u, rule)
                })
                .collect(),
        }
    }
}

/// `rules` comes sorted (Write, Seduction, Marriage by increasing argument,
/// then Increase, Reset), so the first rule of a kind has the lowest argument.
fn pick_rule(rules: &[Rule], tie_break: TieBreak, rng: &mut ChaCha8Rng) -> Rule {
    match tie_break {
        TieBreak::FixedPriority => FIXED_ORDER
            .iter()
            .find_map(|k| rules.iter().copied().find(|r| r.kind() == *k))
            .expect("nonempty rule set"),
        TieBreak::UniformRandom => *rules.choose(rng).expect("nonempty rule set"),
    }
}
