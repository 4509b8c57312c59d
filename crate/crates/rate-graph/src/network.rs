//! The undirected weighted co-occurrence graph.
//!
//! Nodes are technology terms; an edge's weight counts how many papers
//! mention both endpoints. Storage is ordered (sorted node set, edges keyed
//! by the lexicographically ordered pair) so every traversal and export is
//! deterministic.

use std::collections::{BTreeMap, BTreeSet};

use crate::{GraphError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TechNetwork {
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), u64>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

impl TechNetwork {
    pub fn new() -> Self {
        TechNetwork::default()
    }

    pub fn add_node(&mut self, name: impl Into<String>) {
        self.nodes.insert(name.into());
    }

    /// Add `weight` to the edge between `a` and `b`, creating nodes and
    /// edge as needed. Self-loops and zero weights are rejected.
    pub fn increment_edge(&mut self, a: &str, b: &str, weight: u64) -> Result<()> {
        if a == b {
            return Err(GraphError::SelfLoop(a.to_owned()));
        }
        if weight == 0 {
            return Err(GraphError::ZeroWeight);
        }
        self.nodes.insert(a.to_owned());
        self.nodes.insert(b.to_owned());
        *self.edges.entry(ordered(a, b)).or_insert(0) += weight;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.nodes.contains(name)
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> Option<u64> {
        self.edges.get(&ordered(a, b)).copied()
    }

    /// Nodes in sorted order.
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// Edges as (a, b, weight) with a < b, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.edges.iter().map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, node: &str) -> u64 {
        self.edges
            .iter()
            .filter(|((a, b), _)| a == node || b == node)
            .map(|(_, w)| *w)
            .sum()
    }

    /// Number of incident edges.
    pub fn degree(&self, node: &str) -> usize {
        self.edges
            .keys()
            .filter(|(a, b)| a == node || b == node)
            .count()
    }

    /// Keep only nodes whose weighted degree reaches `min`, in one pass:
    /// degrees are measured on the input graph, then qualifying nodes and
    /// the edges between them are copied over. Degrees are not re-checked
    /// afterwards, so survivors may fall below `min` once their weaker
    /// neighbors are gone.
    pub fn filter_by_weighted_degree(&self, min: u64) -> TechNetwork {
        let mut weighted: BTreeMap<&str, u64> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for ((a, b), w) in &self.edges {
            *weighted.get_mut(a.as_str()).unwrap() += *w;
            *weighted.get_mut(b.as_str()).unwrap() += *w;
        }
        let mut out = TechNetwork::new();
        for (node, wd) in &weighted {
            if *wd >= min {
                out.add_node(*node);
            }
        }
        for ((a, b), w) in &self.edges {
            if out.has_node(a) && out.has_node(b) {
                out.edges.insert((a.clone(), b.clone()), *w);
            }
        }
        out
    }

    /// Index form for traversal: sorted names plus per-node neighbor lists
    /// of (neighbor index, weight), each list sorted by index.
    pub fn adjacency(&self) -> Adjacency {
        let names: Vec<String> = self.nodes.iter().cloned().collect();
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut neighbors = vec![Vec::new(); names.len()];
        for ((a, b), w) in &self.edges {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            neighbors[i].push((j, *w));
            neighbors[j].push((i, *w));
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Adjacency { names, neighbors }
    }
}

/// Contiguous-index view of a [`TechNetwork`].
pub struct Adjacency {
    pub names: Vec<String>,
    pub neighbors: Vec<Vec<(usize, u64)>>,
}

impl Adjacency {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Build the co-occurrence network from per-paper term lists: every
/// unordered pair of distinct terms in one paper adds one to its edge.
/// Terms are counted once per paper even if listed twice.
pub fn build_network<S: AsRef<str>>(term_lists: &[Vec<S>]) -> TechNetwork {
    let mut network = TechNetwork::new();
    for terms in term_lists {
        let unique: BTreeSet<&str> = terms.iter().map(AsRef::as_ref).collect();
        let unique: Vec<&str> = unique.into_iter().collect();
        for term in &unique {
            network.add_node(*term);
        }
        for i in 0..unique.len() {
            for j in i + 1..unique.len() {
                network
                    .increment_edge(unique[i], unique[j], 1)
                    .expect("distinct terms cannot self-loop");
            }
        }
    }
    network
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edges_are_stored_unordered() {
        let mut g = TechNetwork::new();
        g.increment_edge("b", "a", 2).unwrap();
        g.increment_edge("a", "b", 3).unwrap();
        assert_eq!(g.edge_weight("a", "b"), Some(5));
        assert_eq!(g.edge_weight("b", "a"), Some(5));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn self_loops_and_zero_weights_are_rejected() {
        let mut g = TechNetwork::new();
        assert!(matches!(
            g.increment_edge("a", "a", 1),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            g.increment_edge("a", "b", 0),
            Err(GraphError::ZeroWeight)
        ));
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn paper_lists_contribute_every_pair_once() {
        let papers = vec![
            vec!["eeg", "vr", "unity"],
            vec!["eeg", "vr"],
            vec!["eeg", "eeg", "vr"], // duplicate mention counts once
        ];
        let g = build_network(&papers);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_weight("eeg", "vr"), Some(3));
        assert_eq!(g.edge_weight("eeg", "unity"), Some(1));
        assert_eq!(g.edge_weight("unity", "vr"), Some(1));
    }

    #[test]
    fn single_term_papers_add_isolated_nodes() {
        let g = build_network(&[vec!["eeg"]]);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.weighted_degree("eeg"), 0);
    }

    #[test]
    fn weighted_degree_sums_incident_weights() {
        let mut g = TechNetwork::new();
        g.increment_edge("a", "b", 2).unwrap();
        g.increment_edge("a", "c", 3).unwrap();
        g.increment_edge("b", "c", 5).unwrap();
        assert_eq!(g.weighted_degree("a"), 5);
        assert_eq!(g.weighted_degree("b"), 7);
        assert_eq!(g.weighted_degree("c"), 8);
        assert_eq!(g.degree("a"), 2);
    }

    #[test]
    fn degree_filter_measures_on_the_input_graph_once() {
        // chain: a -5- b -5- c -1- d ; weighted degrees a:5 b:10 c:6 d:1
        let mut g = TechNetwork::new();
        g.increment_edge("a", "b", 5).unwrap();
        g.increment_edge("b", "c", 5).unwrap();
        g.increment_edge("c", "d", 1).unwrap();

        let filtered = g.filter_by_weighted_degree(5);
        assert!(filtered.has_node("a") && filtered.has_node("b") && filtered.has_node("c"));
        assert!(!filtered.has_node("d"));
        assert_eq!(filtered.edge_weight("a", "b"), Some(5));
        assert_eq!(filtered.edge_weight("c", "d"), None);
        // c kept its place even though dropping d lowered it to 5.
        assert_eq!(filtered.weighted_degree("c"), 5);

        // Strict cut just above a's degree removes a.
        let filtered = g.filter_by_weighted_degree(6);
        assert!(!filtered.has_node("a"));
        assert!(filtered.has_node("c"));
    }

    #[test]
    fn adjacency_mirrors_the_edge_set() {
        let mut g = TechNetwork::new();
        g.increment_edge("b", "c", 1).unwrap();
        g.increment_edge("a", "c", 4).unwrap();
        let adj = g.adjacency();
        assert_eq!(adj.names, vec!["a", "b", "c"]);
        assert_eq!(adj.neighbors[0], vec![(2, 4)]);
        assert_eq!(adj.neighbors[1], vec![(2, 1)]);
        assert_eq!(adj.neighbors[2], vec![(0, 4), (1, 1)]);
    }

    proptest! {
        #[test]
        fn handshake_holds_over_random_paper_sets(
            papers in proptest::collection::vec(
                proptest::collection::vec("[a-f]", 0..6),
                0..10,
            ),
        ) {
            let g = build_network(&papers);
            let degree_sum: u64 = g.nodes().map(|n| g.weighted_degree(n)).sum();
            prop_assert_eq!(degree_sum, 2 * g.total_weight());
        }

        #[test]
        fn filtering_never_raises_counts(
            papers in proptest::collection::vec(
                proptest::collection::vec("[a-f]", 0..6),
                0..10,
            ),
            min in 0u64..8,
        ) {
            let g = build_network(&papers);
            let f = g.filter_by_weighted_degree(min);
            prop_assert!(f.node_count() <= g.node_count());
            prop_assert!(f.edge_count() <= g.edge_count());
            for node in f.nodes() {
                prop_assert!(g.weighted_degree(node) >= min);
            }
        }
    }
}
