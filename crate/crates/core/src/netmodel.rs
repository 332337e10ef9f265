//! Single-delay dynamic networks `w(t) = A w(t-1) + B r(t)`.
//!
//! A [`NetworkModel`] stores the nonzero entries of the gain matrix `A` as
//! directed edges `i -> j` carrying the real gain `a_ji`. Node indices are
//! 1-based throughout, including in serialized forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Networks whose spectral radius reaches `1 - STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Identifies the module `a_ji q^-1`, i.e. the edge from node `i` to node `j`.
///
/// Ordering is by `(to, from)`, which is the canonical parameter order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub from: usize,
    pub to: usize,
}

impl EdgeId {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }
}

impl Ord for EdgeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.to, self.from).cmp(&(other.to, other.from))
    }
}

impl PartialOrd for EdgeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EdgeId {
    /// `a21` for the edge 1 -> 2; a comma separates multi-digit indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.to < 10 && self.from < 10 {
            write!(f, "a{}{}", self.to, self.from)
        } else {
            write!(f, "a{},{}", self.to, self.from)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub gain: f64,
}

impl Edge {
    pub fn id(&self) -> EdgeId {
        EdgeId::new(self.from, self.to)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Branch,
    Cycle,
    General,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Branch => "branch",
            Topology::Cycle => "cycle",
            Topology::General => "general",
        })
    }
}

/// The ordered list of identified modules (the parameter vector θ).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<EdgeId>);

impl ParameterVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EdgeId> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn index_of(&self, edge: EdgeId) -> Option<usize> {
        self.0.binary_search(&edge).ok()
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = EdgeId;
    fn index(&self, k: usize) -> &EdgeId {
        &self.0[k]
    }
}

/// A stable single-delay network. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    n: usize,
    edges: Vec<Edge>,
    topology: Topology,
    radius: f64,
}

impl NetworkModel {
    /// Chain `1 -> 2 -> ... -> n`; `gains[i-1]` is the gain of edge `i -> i+1`.
    pub fn branch(n: usize, gains: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize("n must be ≥ 2".into()));
        }
        if gains.len() != n - 1 {
            return Err(Error::InvalidSize(format!("a {n}-node branch needs {} gains, got {}", n - 1, gains.len())));
        }
        let edges = (1..n).map(|i| Edge { from: i, to: i + 1, gain: gains[i - 1] }).collect();
        Self::finish(n, edges, Topology::Branch)
    }

    /// Loop `1 -> 2 -> ... -> n -> 1`; the last gain belongs to edge `n -> 1`.
    pub fn cycle(n: usize, gains: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize("n must be ≥ 2".into()));
        }
        if gains.len() != n {
            return Err(Error::InvalidSize(format!("a {n}-node cycle needs {n} gains, got {}", gains.len())));
        }
        let edges = (1..=n).map(|i| Edge { from: i, to: if i == n { 1 } else { i + 1 }, gain: gains[i - 1] }).collect();
        Self::finish(n, edges, Topology::Cycle)
    }

    /// Six-node network: branch `1 -> 2 -> 3`, loop `3 -> 4 -> 5 -> 3`, tail
    /// `5 -> 6`. Gains in parameter order `a21, a32, a35, a43, a54, a65`.
    pub fn hybrid_example(gains: &[f64; 6]) -> Result<Self> {
        let [a21, a32, a35, a43, a54, a65] = *gains;
        Self::general(6, &[(1, 2, a21), (2, 3, a32), (5, 3, a35), (3, 4, a43), (4, 5, a54), (5, 6, a65)])
    }

    /// Arbitrary topology given as `(from, to, gain)` triples.
    pub fn general(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidSize("n must be ≥ 1".into()));
        }
        let edges = edges.iter().map(|&(from, to, gain)| Edge { from, to, gain }).collect();
        Self::finish(n, edges, Topology::General)
    }

    fn finish(n: usize, mut edges: Vec<Edge>, topology: Topology) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.from == 0 || e.to == 0 || e.from > n || e.to > n {
                return Err(Error::Validation(format!(
                    "edge {} -> {} references a node outside 1..={n}",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::Validation(format!("self-loop at node {}", e.from)));
            }
            if !e.gain.is_finite() {
                return Err(Error::Validation(format!("gain of edge {} -> {} is not finite", e.from, e.to)));
            }
            if !seen.insert(e.id()) {
                return Err(Error::Validation(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
        }
        edges.sort_by_key(Edge::id);
        let radius = spectral_radius_of(n, &edges);
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable { radius });
        }
        Ok(Self { n, edges, topology, radius })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges in canonical `(to, from)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    pub fn parameters(&self) -> ParameterVector {
        ParameterVector(self.edges.iter().map(Edge::id).collect())
    }

    pub fn gain(&self, edge: EdgeId) -> Option<f64> {
        self.edges.binary_search_by_key(&edge, Edge::id).ok().map(|k| self.edges[k].gain)
    }

    /// Gains in the branch/cycle listing order (edge `i -> i+1` first,
    /// then `n -> 1` for cycles). `None` for general networks.
    pub fn chain_gains(&self) -> Option<Vec<f64>> {
        let n = self.n;
        match self.topology {
            Topology::General => None,
            Topology::Branch => Some((1..n).map(|i| self.gain(EdgeId::new(i, i + 1)).unwrap()).collect()),
            Topology::Cycle => {
                Some((1..=n).map(|i| self.gain(EdgeId::new(i, if i == n { 1 } else { i + 1 })).unwrap()).collect())
            }
        }
    }

    /// Same network with one gain replaced; stability is re-checked.
    pub fn with_gain(&self, edge: EdgeId, gain: f64) -> Result<Self> {
        let mut edges = self.edges.clone();
        let slot = edges
            .iter_mut()
            .find(|e| e.id() == edge)
            .ok_or_else(|| Error::Validation(format!("no edge {edge} in network")))?;
        slot.gain = gain;
        Self::finish(self.n, edges, self.topology)
    }

    /// The n×n matrix `A` with `A[(j-1, i-1)] = a_ji`.
    pub fn gain_matrix(&self) -> DMatrix<f64> {
        gain_matrix(self.n, &self.edges)
    }

    /// The edge with the largest |gain|; ties go to the first in canonical order.
    pub fn largest_module(&self) -> Option<EdgeId> {
        let mut best: Option<&Edge> = None;
        for e in &self.edges {
            if best.is_none_or(|b| e.gain.abs() > b.gain.abs()) {
                best = Some(e);
            }
        }
        best.map(Edge::id)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: NetworkFile = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_file_format(&self) -> NetworkFile {
        match (self.topology, self.chain_gains()) {
            (Topology::Branch, Some(gains)) => NetworkFile::Chain { kind: ChainKind::Branch, n: self.n, gains },
            (Topology::Cycle, Some(gains)) => NetworkFile::Chain { kind: ChainKind::Cycle, n: self.n, gains },
            _ => NetworkFile::Edges { n: self.n, edges: self.edges.iter().map(|e| (e.from, e.to, e.gain)).collect() },
        }
    }
}

fn gain_matrix(n: usize, edges: &[Edge]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for e in edges {
        a[(e.to - 1, e.from - 1)] = e.gain;
    }
    a
}

/// Largest eigenvalue modulus of the gain matrix.
///
/// The eigenvalues of `A` are the union of those of its strongly connected
/// components. Acyclic parts contribute exact zeros, a component that is a
/// single directed loop of length `m` contributes `|∏ gains|^(1/m)`, and any
/// other component falls back to a dense Schur decomposition.
pub fn spectral_radius(model: &NetworkModel) -> f64 {
    model.spectral_radius()
}

fn spectral_radius_of(n: usize, edges: &[Edge]) -> f64 {
    let mut graph = DiGraph::<(), ()>::with_capacity(n, edges.len());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for e in edges {
        graph.add_edge(nodes[e.from - 1], nodes[e.to - 1], ());
    }
    let mut radius: f64 = 0.0;
    for component in tarjan_scc(&graph) {
        if component.len() < 2 {
            continue;
        }
        let members: BTreeMap<usize, usize> =
            component.iter().enumerate().map(|(local, idx)| (idx.index() + 1, local)).collect();
        let inner: Vec<&Edge> =
            edges.iter().filter(|e| members.contains_key(&e.from) && members.contains_key(&e.to)).collect();
        let r = if inner.len() == members.len() {
            let product: f64 = inner.iter().map(|e| e.gain).product();
            product.abs().powf(1.0 / members.len() as f64)
        } else {
            let m = members.len();
            let mut sub = DMatrix::zeros(m, m);
            for e in inner {
                sub[(members[&e.to], members[&e.from])] = e.gain;
            }
            sub.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
        };
        radius = radius.max(r);
    }
    radius
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Branch,
    Cycle,
}

/// On-disk network description.
///
/// Either `{"n": 3, "edges": [[1, 2, 0.5], ...]}` or
/// `{"kind": "cycle", "n": 3, "gains": [0.5, 0.5, 0.5]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum NetworkFile {
    Chain { kind: ChainKind, n: usize, gains: Vec<f64> },
    Edges { n: usize, edges: Vec<(usize, usize, f64)> },
}

impl NetworkFile {
    pub fn build(&self) -> Result<NetworkModel> {
        match self {
            NetworkFile::Chain { kind: ChainKind::Branch, n, gains } => NetworkModel::branch(*n, gains),
            NetworkFile::Chain { kind: ChainKind::Cycle, n, gains } => NetworkModel::cycle(*n, gains),
            NetworkFile::Edges { n, edges } => NetworkModel::general(*n, edges),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_is_nilpotent() {
        let m = NetworkModel::branch(3, &[0.5, 0.5]).unwrap();
        assert_eq!(m.spectral_radius(), 0.0);
        assert_eq!(m.edges().len(), 2);
        assert_eq!(m.gain(EdgeId::new(1, 2)), Some(0.5));
        assert_eq!(m.gain(EdgeId::new(2, 3)), Some(0.5));
        // branch gains are unconstrained
        let big = NetworkModel::branch(4, &[20.0, 1.0, 1.0]).unwrap();
        assert_eq!(big.spectral_radius(), 0.0);
    }

    #[test]
    fn branch_rejects_single_node() {
        assert!(matches!(NetworkModel::branch(1, &[]), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn cycle_radius() {
        let m = NetworkModel::cycle(2, &[0.5, 0.5]).unwrap();
        assert!((m.spectral_radius() - 0.5).abs() < 1e-15);
        let m = NetworkModel::cycle(3, &[1.0, 1.0, 0.125]).unwrap();
        assert!((m.spectral_radius() - 0.5).abs() < 1e-15);
        assert!(NetworkModel::cycle(3, &[0.5, 0.5, 0.5]).is_ok());
        assert!(matches!(NetworkModel::cycle(2, &[2.0, 0.6]), Err(Error::Unstable { .. })));
    }

    #[test]
    fn cycle_closing_edge_carries_last_gain() {
        let m = NetworkModel::cycle(3, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(m.gain(EdgeId::new(3, 1)), Some(0.3));
        assert_eq!(m.chain_gains().unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn hybrid_topology() {
        let edges = [(1, 2, 0.3), (2, 3, 0.3), (3, 4, 0.3), (4, 5, 0.3), (5, 3, 0.3), (5, 6, 0.3)];
        let m = NetworkModel::general(6, &edges).unwrap();
        assert!((m.spectral_radius() - 0.3).abs() < 1e-12);
        let bad = [(1, 2, 0.5), (1, 2, 0.3)];
        assert!(matches!(NetworkModel::general(2, &bad), Err(Error::Validation(_))));
        let unstable = [(1, 2, 0.0), (2, 3, 0.0), (3, 4, 1.1), (4, 5, 1.0), (5, 3, 1.0), (5, 6, 0.0)];
        assert!(matches!(NetworkModel::general(6, &unstable), Err(Error::Unstable { .. })));
        assert!(matches!(NetworkModel::general(2, &[(1, 1, 0.1)]), Err(Error::Validation(_))));
    }

    #[test]
    fn dense_component_uses_eigenvalues() {
        // two loops sharing node 1: 1->2->1 and 1->3->1
        let edges = [(1, 2, 0.5), (2, 1, 0.5), (1, 3, 0.5), (3, 1, 0.5)];
        let m = NetworkModel::general(3, &edges).unwrap();
        // characteristic polynomial z^3 - 0.5 z => radius sqrt(0.5)
        assert!((m.spectral_radius() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn canonical_parameter_order() {
        let m = NetworkModel::cycle(3, &[0.1, 0.2, 0.3]).unwrap();
        let p: Vec<String> = m.parameters().iter().map(|e| e.to_string()).collect();
        assert_eq!(p, ["a13", "a21", "a32"]);
        assert_eq!(m.parameters().index_of(EdgeId::new(2, 3)), Some(2));
    }

    #[test]
    fn json_round_trip() {
        let m = NetworkModel::from_json_str(r#"{"kind": "cycle", "n": 2, "gains": [0.5, 0.25]}"#).unwrap();
        assert_eq!(m.topology(), Topology::Cycle);
        let g = NetworkModel::from_json_str(r#"{"n": 3, "edges": [[1, 2, 0.5], [2, 3, -0.5]]}"#).unwrap();
        assert_eq!(g.topology(), Topology::General);
        let text = serde_json::to_string(&m.to_file_format()).unwrap();
        assert_eq!(NetworkModel::from_json_str(&text).unwrap(), m);
        assert!(NetworkModel::from_json_str(r#"{"n": 3}"#).is_err());
    }
}
