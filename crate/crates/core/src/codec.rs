//! Configuration JSON.
//!
//! ```json
//! {"nodes": {"0": {"p": 1, "m": 2}}, "registers": {"0->1": {"p": "You", "m": 2}}}
//! ```
//!
//! Keys are written in numeric node order and lexicographic directed-pair
//! order, so serializing a parsed canonical document reproduces it byte for
//! byte.

use std::collections::BTreeMap;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::protocol::{Configuration, NodeState, PField, ProtocolError, RegisterValue};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid configuration JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad key `{0}`")]
    Key(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Serializable view of a configuration over its graph.
pub struct ConfigView<'a> {
    pub graph: &'a Graph,
    pub config: &'a Configuration,
}

impl<'a> ConfigView<'a> {
    pub fn new(graph: &'a Graph, config: &'a Configuration) -> Self {
        ConfigView { graph, config }
    }
}

struct NodesView<'a>(&'a Graph, &'a Configuration);
struct RegistersView<'a>(&'a Graph, &'a Configuration);

#[derive(Serialize, Deserialize)]
struct NodeJson {
    p: Option<NodeId>,
    m: u8,
}

#[derive(Serialize, Deserialize)]
struct RegisterJson {
    p: PField,
    m: u8,
}

impl Serialize for ConfigView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Configuration", 2)?;
        st.serialize_field("nodes", &NodesView(self.graph, self.config))?;
        st.serialize_field("registers", &RegistersView(self.graph, self.config))?;
        st.end()
    }
}

impl Serialize for NodesView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.1.states.len()))?;
        for (&u, st) in self.0.nodes().iter().zip(&self.1.states) {
            map.serialize_entry(&u.to_string(), &NodeJson { p: st.p, m: st.m })?;
        }
        map.end()
    }
}

impl Serialize for RegistersView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        for ((u, v), r) in self.0.directed_edges().zip(self.1.registers.iter().flatten()) {
            map.serialize_entry(&format!("{u}->{v}"), &RegisterJson { p: r.p, m: r.m })?;
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    nodes: BTreeMap<String, NodeJson>,
    registers: BTreeMap<String, RegisterJson>,
}

fn parse_id(key: &str) -> Result<NodeId, CodecError> {
    key.trim().parse().map_err(|_| CodecError::Key(key.to_owned()))
}

impl ConfigJson {
    fn into_config(self, g: &Graph) -> Result<Configuration, CodecError> {
        let mut states = BTreeMap::new();
        for (k, n) in self.nodes {
            states.insert(parse_id(&k)?, NodeState::new(n.p, n.m));
        }
        let mut regs = BTreeMap::new();
        for (k, r) in self.registers {
            let (u, v) = k.split_once("->").ok_or_else(|| CodecError::Key(k.clone()))?;
            regs.insert((parse_id(u)?, parse_id(v)?), RegisterValue::new(r.p, r.m));
        }
        Ok(Configuration::from_maps(g, &states, &regs)?)
    }
}

pub fn config_to_json(g: &Graph, c: &Configuration) -> String {
    serde_json::to_string(&ConfigView::new(g, c)).expect("configuration serializes")
}

pub fn config_from_json(g: &Graph, text: &str) -> Result<Configuration, CodecError> {
    serde_json::from_str::<ConfigJson>(text)?.into_config(g)
}

pub fn config_from_value(g: &Graph, value: serde_json::Value) -> Result<Configuration, CodecError> {
    serde_json::from_value::<ConfigJson>(value)?.into_config(g)
}

/// Short content hash (first 8 bytes of SHA-256, hex) over a canonical byte
/// encoding of the configuration.
pub fn config_hash(c: &Configuration) -> String {
    let mut h = Sha256::new();
    for st in &c.states {
        h.update(st.p.map_or(u32::MAX, |p| p).to_le_bytes());
        h.update([st.m]);
    }
    for r in c.registers.iter().flatten() {
        h.update([r.p as u8, r.m]);
    }
    hex::encode(&h.finalize()[..8])
}
