//! Descriptive statistics of the co-occurrence network.
//!
//! Distances are unweighted (hop counts). Diameter and average path length
//! are computed within the largest connected component; clustering follows
//! the usual convention that nodes with fewer than two neighbors
//! contribute zero to the average.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::network::{Adjacency, TechNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub total_weight: u64,
    /// Fraction of possible edges present: 2E / (N (N - 1)); zero below
    /// two nodes.
    pub density: f64,
    /// Mean number of incident edges, 2E / N.
    pub average_degree: f64,
    /// Mean sum of incident weights, 2W / N.
    pub average_weighted_degree: f64,
    /// Mean local clustering coefficient over all nodes.
    pub average_clustering: f64,
    pub connected_components: usize,
    pub largest_component_size: usize,
    /// Longest shortest path within the largest component; `None` when no
    /// two nodes are connected.
    pub diameter: Option<usize>,
    /// Mean shortest-path length over ordered pairs of distinct nodes in
    /// the largest component; `None` when no two nodes are connected.
    pub average_path_length: Option<f64>,
}

fn bfs_distances(adj: &Adjacency, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &(v, _) in &adj.neighbors[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Component id per node, ids numbered by smallest member index.
pub fn component_labels(adj: &Adjacency) -> Vec<usize> {
    let mut label = vec![usize::MAX; adj.len()];
    let mut next = 0;
    for start in 0..adj.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label[start] = next;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj.neighbors[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

fn local_clustering(adj: &Adjacency, node: usize) -> f64 {
    let neighbors: Vec<usize> = adj.neighbors[node].iter().map(|&(v, _)| v).collect();
    let k = neighbors.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (i, &u) in neighbors.iter().enumerate() {
        for &v in &neighbors[i + 1..] {
            if adj.neighbors[u].binary_search_by_key(&v, |&(n, _)| n).is_ok() {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (k as f64 * (k - 1) as f64)
}

pub fn compute_stats(network: &TechNetwork) -> NetworkStats {
    let adj = network.adjacency();
    let n = adj.len();
    let e = network.edge_count();
    let w = network.total_weight();

    let density = if n < 2 {
        0.0
    } else {
        2.0 * e as f64 / (n as f64 * (n - 1) as f64)
    };
    let average_degree = if n == 0 { 0.0 } else { 2.0 * e as f64 / n as f64 };
    let average_weighted_degree = if n == 0 { 0.0 } else { 2.0 * w as f64 / n as f64 };
    let average_clustering = if n == 0 {
        0.0
    } else {
        (0..n).map(|v| local_clustering(&adj, v)).sum::<f64>() / n as f64
    };

    let labels = component_labels(&adj);
    let connected_components = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; connected_components];
    for &l in &labels {
        sizes[l] += 1;
    }
    let largest_component_size = sizes.iter().copied().max().unwrap_or(0);
    let largest_label = sizes
        .iter()
        .enumerate()
        .max_by_key(|&(i, &s)| (s, std::cmp::Reverse(i)))
        .map(|(i, _)| i);

    let mut diameter = None;
    let mut average_path_length = None;
    if largest_component_size >= 2 {
        let members: Vec<usize> = (0..n)
            .filter(|&v| Some(labels[v]) == largest_label)
            .collect();
        let mut max_dist = 0usize;
        let mut sum_dist = 0u64;
        let mut pairs = 0u64;
        for &source in &members {
            let dist = bfs_distances(&adj, source);
            for &target in &members {
                if target == source {
                    continue;
                }
                let d = dist[target].expect("members of one component are connected");
                max_dist = max_dist.max(d);
                sum_dist += d as u64;
                pairs += 1;
            }
        }
        diameter = Some(max_dist);
        average_path_length = Some(sum_dist as f64 / pairs as f64);
    }

    NetworkStats {
        node_count: n,
        edge_count: e,
        total_weight: w,
        density,
        average_degree,
        average_weighted_degree,
        average_clustering,
        connected_components,
        largest_component_size,
        diameter,
        average_path_length,
    }
}
