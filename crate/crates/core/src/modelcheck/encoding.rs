//! Mixed-radix state indices.
//!
//! Digits are laid out as node states in id order followed by registers in
//! lexicographic directed-pair order; the first digit is the most significant,
//! so index order is the lexicographic order of digit tuples.
//!
//! Node digit, with `k` the position of `p` in the sorted neighbor list:
//! - full: `0..3` for `p = null` with `m = 0..3`, then `3(k+1) + m`
//! - canonical (`m = 0` whenever `p = null`): `0` for null, then `1 + 3k + m`
//!
//! Register digit: `3·idx(p) + m` with `Idle < You < Other`.

use crate::graph::Graph;
use crate::protocol::{Configuration, NodeState, PField, RegisterValue};

#[derive(Debug, Clone)]
pub struct Encoding {
    canonical: bool,
    /// `adj` copies, so decoding does not need the graph.
    adj: Vec<Vec<u32>>,
    /// Place value of each node digit.
    node_place: Vec<u64>,
    /// Place value of each register digit, grouped per node.
    reg_place: Vec<Vec<u64>>,
    count: u64,
}

/// Projected number of configurations, without overflow.
pub fn projected_count(g: &Graph, canonical: bool) -> u128 {
    let mut total: u128 = 1;
    for ui in 0..g.node_count() {
        let deg = g.adj_at(ui).len() as u128;
        let node = if canonical { 1 + 3 * deg } else { 3 * (1 + deg) };
        total = total.saturating_mul(node).saturating_mul(9u128.saturating_pow(deg as u32));
    }
    total
}

fn node_radix(deg: usize, canonical: bool) -> u64 {
    if canonical {
        1 + 3 * deg as u64
    } else {
        3 * (1 + deg as u64)
    }
}

impl Encoding {
    /// `None` when the configuration count does not fit in `u64`.
    pub fn new(g: &Graph, canonical: bool) -> Option<Self> {
        if projected_count(g, canonical) > u64::MAX as u128 {
            return None;
        }
        let n = g.node_count();
        let adj: Vec<Vec<u32>> = (0..n).map(|ui| g.adj_at(ui).to_vec()).collect();
        // Walk digits from least significant (last register) back to the first node.
        let mut reg_place: Vec<Vec<u64>> = adj.iter().map(|a| vec![0; a.len()]).collect();
        let mut node_place = vec![0; n];
        let mut place = 1u64;
        for ui in (0..n).rev() {
            for k in (0..adj[ui].len()).rev() {
                reg_place[ui][k] = place;
                place *= 9;
            }
        }
        for ui in (0..n).rev() {
            node_place[ui] = place;
            place *= node_radix(adj[ui].len(), canonical);
        }
        Some(Encoding {
            canonical,
            adj,
            node_place,
            reg_place,
            count: place,
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    fn node_digit(&self, ui: usize, st: NodeState) -> Option<u64> {
        let m = st.m as u64;
        match st.p {
            None if self.canonical => (m == 0).then_some(0),
            None => Some(m),
            Some(p) => {
                let k = self.adj[ui].binary_search(&p).ok()? as u64;
                Some(if self.canonical { 1 + 3 * k + m } else { 3 * (k + 1) + m })
            }
        }
    }

    fn reg_digit(r: RegisterValue) -> u64 {
        3 * r.p as u64 + r.m as u64
    }

    /// Contribution of node `ui`'s own variables (state and outgoing registers).
    pub(crate) fn node_part(&self, c: &Configuration, ui: usize) -> u64 {
        let mut x = self.node_digit(ui, c.states[ui]).expect("encodable node state") * self.node_place[ui];
        for (k, r) in c.registers[ui].iter().enumerate() {
            x += Self::reg_digit(*r) * self.reg_place[ui][k];
        }
        x
    }

    /// `None` if `c` lies outside the encoded space (a non-canonical null
    /// node under canonical encoding).
    pub fn encode(&self, c: &Configuration) -> Option<u64> {
        let mut x = 0;
        for ui in 0..self.adj.len() {
            x += self.node_digit(ui, c.states[ui])? * self.node_place[ui];
            for (k, r) in c.registers[ui].iter().enumerate() {
                x += Self::reg_digit(*r) * self.reg_place[ui][k];
            }
        }
        Some(x)
    }

    pub fn decode(&self, idx: u64) -> Configuration {
        let mut c = Configuration {
            states: vec![NodeState::default(); self.adj.len()],
            registers: self.adj.iter().map(|a| vec![RegisterValue::IDLE; a.len()]).collect(),
        };
        self.decode_into(idx, &mut c);
        c
    }

    /// Overwrites `c`, which must already have this graph's shape.
    pub fn decode_into(&self, idx: u64, c: &mut Configuration) {
        debug_assert!(idx < self.count);
        let mut rest = idx;
        for ui in 0..self.adj.len() {
            let d = rest / self.node_place[ui];
            rest %= self.node_place[ui];
            c.states[ui] = if self.canonical {
                match d {
                    0 => NodeState::new(None, 0),
                    _ => NodeState::new(Some(self.adj[ui][(d as usize - 1) / 3]), ((d - 1) % 3) as u8),
                }
            } else {
                let (k, m) = ((d / 3) as usize, (d % 3) as u8);
                NodeState::new((k > 0).then(|| self.adj[ui][k - 1]), m)
            };
        }
        for ui in 0..self.adj.len() {
            for k in 0..self.adj[ui].len() {
                let place = self.reg_place[ui][k];
                let d = rest / place;
                rest %= place;
                c.registers[ui][k] = RegisterValue::new(PField::ALL[(d / 3) as usize], (d % 3) as u8);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::random_configuration;
    use crate::graph::GraphKind;
    use proptest::prelude::*;

    #[test]
    fn counts_match_closed_forms() {
        let k2 = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
        assert_eq!(Encoding::new(&k2, false).unwrap().count(), 6 * 6 * 81);
        assert_eq!(Encoding::new(&k2, true).unwrap().count(), 4 * 4 * 81);
        let p3 = Graph::generate(GraphKind::Path { n: 3 }).unwrap();
        assert_eq!(Encoding::new(&p3, true).unwrap().count(), 7 * 4 * 4 * 9u64.pow(4));
        assert_eq!(projected_count(&p3, true), 734_832);
        let k10 = Graph::generate(GraphKind::Complete { n: 10 }).unwrap();
        assert!(projected_count(&k10, true) > u64::MAX as u128);
    }

    #[test]
    fn first_digit_is_most_significant() {
        let k2 = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
        let e = Encoding::new(&k2, true).unwrap();
        let c = e.decode(0);
        assert_eq!(c, Configuration::all_null(&k2));
        let mut c = e.decode(0);
        c.registers[1][0] = RegisterValue::new(PField::Idle, 1);
        assert_eq!(e.encode(&c), Some(1));
        let mut c = e.decode(0);
        c.states[0] = NodeState::new(Some(1), 0);
        assert_eq!(e.encode(&c), Some(4 * 81));
    }

    #[test]
    fn canonical_rejects_null_with_counter() {
        let k2 = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
        let e = Encoding::new(&k2, true).unwrap();
        let mut c = Configuration::all_null(&k2);
        c.states[0].m = 1;
        assert_eq!(e.encode(&c), None);
        assert!(Encoding::new(&k2, false).unwrap().encode(&c).is_some());
    }

    #[test]
    fn exhaustive_bijection_on_k2() {
        let k2 = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
        for canonical in [false, true] {
            let e = Encoding::new(&k2, canonical).unwrap();
            let mut seen = std::collections::HashSet::new();
            for i in 0..e.count() {
                let c = e.decode(i);
                c.validate(&k2).unwrap();
                assert_eq!(e.encode(&c), Some(i));
                assert!(seen.insert(c));
            }
        }
    }

    proptest! {
        #[test]
        fn random_configurations_round_trip(seed in any::<u64>(), n in 2usize..6) {
            let g = Graph::generate(GraphKind::Cycle { n: n.max(3) }).unwrap();
            let e = Encoding::new(&g, false).unwrap();
            let c = random_configuration(&g, seed);
            let i = e.encode(&c).unwrap();
            prop_assert!(i < e.count());
            prop_assert_eq!(e.decode(i), c);
        }
    }
}
