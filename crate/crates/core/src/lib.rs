//! Self-stabilizing maximal matching with link registers.
//!
//! Every node `u` owns a pointer `p_u` and a counter `m_u ∈ {0,1,2}`, and
//! writes one register per incident edge that its neighbor reads. Five guarded
//! rules (Write, Seduction, Marriage, Increase, Reset) drive any initial
//! configuration to a maximal matching under an unfair distributed daemon.
//!
//! - [`graph`]: undirected simple graphs, edge lists and generators.
//! - [`protocol`]: state, guards and the atomic step semantics.
//! - [`daemon`]: schedulers choosing which enabled nodes move.
//! - [`executor`]: runs, move accounting and replay.
//! - [`verifier`]: legitimacy, edge-state classes and trace monitors.
//! - [`modelcheck`]: exhaustive state-space exploration on small graphs.

pub mod codec;
pub mod daemon;
pub mod executor;
pub mod graph;
pub mod protocol;
pub mod verifier;
pub mod modelcheck;
pub mod sweep;
pub mod trace_io;
