//! Community detection by weighted modularity.
//!
//! Two detectors are provided: a greedy agglomerative method (local moving
//! plus graph aggregation, seeded and deterministic) and a divisive method
//! that repeatedly removes the highest-betweenness edge and keeps the
//! best-scoring component partition it ever saw. Both report the weighted
//! modularity of their final assignment measured on the original graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::network::TechNetwork;
use crate::stats::component_labels;
use crate::{GraphError, Result};

const EPS: f64 = 1e-12;

/// Weighted modularity of a node-to-community assignment:
/// sum over communities of W_c / m - (K_c / 2m)^2, where W_c is the
/// intra-community edge weight, K_c the summed weighted degree, and m the
/// total edge weight. Zero for graphs without edges.
pub fn modularity(network: &TechNetwork, assignment: &BTreeMap<String, usize>) -> Result<f64> {
    for node in network.nodes() {
        if !assignment.contains_key(node) {
            return Err(GraphError::Unassigned(node.to_owned()));
        }
    }
    let m = network.total_weight() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut intra: BTreeMap<usize, f64> = BTreeMap::new();
    for (a, b, w) in network.edges() {
        if assignment[a] == assignment[b] {
            *intra.entry(assignment[a]).or_insert(0.0) += w as f64;
        }
    }
    let mut degree: BTreeMap<usize, f64> = BTreeMap::new();
    for node in network.nodes() {
        *degree.entry(assignment[node]).or_insert(0.0) += network.weighted_degree(node) as f64;
    }
    let q = degree
        .iter()
        .map(|(c, k)| {
            let w_c = intra.get(c).copied().unwrap_or(0.0);
            w_c / m - (k / (2.0 * m)).powi(2)
        })
        .sum();
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityResult {
    pub assignment: BTreeMap<String, usize>,
    pub modularity: f64,
    pub community_count: usize,
}

/// Aggregated working graph: inter-node links (mirrored per endpoint) plus
/// self-loop weight per node.
struct LevelGraph {
    links: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl LevelGraph {
    fn from_network(network: &TechNetwork) -> (Self, Vec<String>) {
        let adj = network.adjacency();
        let links = adj
            .neighbors
            .iter()
            .map(|list| list.iter().map(|&(v, w)| (v, w as f64)).collect())
            .collect();
        let loops = vec![0.0; adj.names.len()];
        (LevelGraph { links, loops }, adj.names)
    }

    fn len(&self) -> usize {
        self.loops.len()
    }

    /// Total edge weight m: each link once, each loop once.
    fn total_weight(&self) -> f64 {
        let link_sum: f64 = self.links.iter().flatten().map(|&(_, w)| w).sum();
        link_sum / 2.0 + self.loops.iter().sum::<f64>()
    }

    /// Weighted degree with loops counted twice, as usual for undirected
    /// graphs.
    fn degree(&self, node: usize) -> f64 {
        self.links[node].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.loops[node]
    }

    /// Collapse communities into single nodes. `assignment` must use
    /// contiguous ids 0..k.
    fn aggregate(&self, assignment: &[usize], k: usize) -> LevelGraph {
        let mut loops = vec![0.0; k];
        let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (node, &c) in assignment.iter().enumerate() {
            loops[c] += self.loops[node];
            for &(other, w) in &self.links[node] {
                let co = assignment[other];
                if co == c {
                    // both directions visit this link, so half each time
                    loops[c] += w / 2.0;
                } else {
                    *between.entry((c.min(co), c.max(co))).or_insert(0.0) += w / 2.0;
                }
            }
        }
        let mut links = vec![Vec::new(); k];
        for (&(a, b), &w) in &between {
            links[a].push((b, w));
            links[b].push((a, w));
        }
        LevelGraph { links, loops }
    }
}

/// One sweep of local moving. Returns the node assignment (contiguous ids)
/// and whether any node changed community.
fn one_level(graph: &LevelGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize, bool) {
    let n = graph.len();
    let m = graph.total_weight();
    let mut community: Vec<usize> = (0..n).collect();
    if m <= 0.0 {
        return (community, n, false);
    }
    let degrees: Vec<f64> = (0..n).map(|v| graph.degree(v)).collect();
    let mut sigma_tot = degrees.clone();
    let two_m = 2.0 * m;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut improved = false;
    loop {
        let mut moves = 0;
        for &node in &order {
            let current = community[node];
            let mut weight_to: BTreeMap<usize, f64> = BTreeMap::new();
            for &(other, w) in &graph.links[node] {
                *weight_to.entry(community[other]).or_insert(0.0) += w;
            }
            sigma_tot[current] -= degrees[node];

            let gain = |c: usize| {
                weight_to.get(&c).copied().unwrap_or(0.0) - sigma_tot[c] * degrees[node] / two_m
            };
            let mut best = current;
            let mut best_gain = gain(current);
            // Ascending community ids: on equal gain the smallest id wins
            // because replacement requires a strict improvement.
            for &c in weight_to.keys() {
                if c != current {
                    let g = gain(c);
                    if g > best_gain + EPS {
                        best = c;
                        best_gain = g;
                    }
                }
            }
            sigma_tot[best] += degrees[node];
            if best != current {
                community[node] = best;
                moves += 1;
                improved = true;
            }
        }
        if moves == 0 {
            break;
        }
    }

    // Renumber to contiguous ids, ordered by first appearance.
    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &mut community {
        let next = renumber.len();
        *c = *renumber.entry(*c).or_insert(next);
    }
    (community, renumber.len(), improved)
}

/// Greedy agglomerative community detection (local moving + aggregation).
/// Deterministic for a given `seed`; node visit order is reshuffled per
/// level.
pub fn louvain(network: &TechNetwork, seed: u64) -> Result<CommunityResult> {
    let (mut graph, names) = LevelGraph::from_network(network);
    let mut membership: Vec<usize> = (0..names.len()).collect();

    for level in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ level);
        let (assignment, k, improved) = one_level(&graph, &mut rng);
        if !improved {
            break;
        }
        for slot in &mut membership {
            *slot = assignment[*slot];
        }
        graph = graph.aggregate(&assignment, k);
    }

    finish(network, &names, &membership)
}

/// Renumber communities by first appearance over sorted node names and
/// score the assignment on the original graph.
fn finish(network: &TechNetwork, names: &[String], membership: &[usize]) -> Result<CommunityResult> {
    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    let mut assignment: BTreeMap<String, usize> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        let next = renumber.len();
        let id = *renumber.entry(membership[i]).or_insert(next);
        assignment.insert(name.clone(), id);
    }
    let q = modularity(network, &assignment)?;
    Ok(CommunityResult {
        modularity: q,
        community_count: renumber.len(),
        assignment,
    })
}

/// Shortest-path edge betweenness, unweighted, counting each unordered
/// node pair once.
fn index_edge_betweenness(
    n: usize,
    edges: &BTreeSet<(usize, usize)>,
) -> BTreeMap<(usize, usize), f64> {
    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut betweenness: BTreeMap<(usize, usize), f64> =
        edges.iter().map(|&e| (e, 0.0)).collect();

    for source in 0..n {
        // Brandes: BFS with path counts, then dependency accumulation.
        let mut stack = Vec::new();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[source] = 1.0;
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            stack.push(u);
            for &v in &neighbors[u] {
                if dist[v] < 0 {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                let credit = sigma[v] / sigma[w] * (1.0 + delta[w]);
                *betweenness.get_mut(&(v.min(w), v.max(w))).unwrap() += credit;
                delta[v] += credit;
            }
        }
    }
    // Every unordered pair was visited from both endpoints.
    for value in betweenness.values_mut() {
        *value /= 2.0;
    }
    betweenness
}

/// Edge betweenness keyed by node names (a < b).
pub fn edge_betweenness(network: &TechNetwork) -> BTreeMap<(String, String), f64> {
    let adj = network.adjacency();
    let edges: BTreeSet<(usize, usize)> = adj
        .neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().filter(move |&&(j, _)| i < j).map(move |&(j, _)| (i, j)))
        .collect();
    index_edge_betweenness(adj.names.len(), &edges)
        .into_iter()
        .map(|((i, j), v)| ((adj.names[i].clone(), adj.names[j].clone()), v))
        .collect()
}

fn labels_for(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    // Reuse the component labelling over a throwaway adjacency.
    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in edges {
        neighbors[a].push((b, 1));
        neighbors[b].push((a, 1));
    }
    let adj = crate::network::Adjacency {
        names: (0..n).map(|i| i.to_string()).collect(),
        neighbors,
    };
    component_labels(&adj)
}

/// Divisive community detection: repeatedly remove the edge with the
/// highest betweenness (ties broken by the lexicographically smallest
/// endpoint pair), evaluating the component partition whenever the graph
/// splits, and return the partition with the highest weighted modularity.
/// The starting partition (components of the intact graph) is a candidate
/// too; on equal scores the earliest partition wins.
pub fn girvan_newman(network: &TechNetwork) -> Result<CommunityResult> {
    let adj = network.adjacency();
    let n = adj.names.len();
    let mut live: BTreeSet<(usize, usize)> = adj
        .neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().filter(move |&&(j, _)| i < j).map(move |&(j, _)| (i, j)))
        .collect();

    let mut best: Option<CommunityResult> = None;
    let consider = |labels: &[usize], best: &mut Option<CommunityResult>| -> Result<()> {
        let result = finish(network, &adj.names, labels)?;
        if best.as_ref().is_none_or(|b| result.modularity > b.modularity + EPS) {
            *best = Some(result);
        }
        Ok(())
    };

    let labels = labels_for(n, &live);
    let mut component_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    consider(&labels, &mut best)?;

    while !live.is_empty() {
        let betweenness = index_edge_betweenness(n, &live);
        // Highest betweenness; BTreeMap order makes the smallest index
        // pair (hence smallest name pair) win ties.
        let (&target, _) = betweenness
            .iter()
            .fold(None, |acc: Option<(&(usize, usize), &f64)>, (e, v)| match acc {
                Some((_, best_v)) if *v <= best_v + EPS => acc,
                _ => Some((e, v)),
            })
            .expect("live edge set is non-empty");
        live.remove(&target);

        let labels = labels_for(n, &live);
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        if count > component_count {
            component_count = count;
            consider(&labels, &mut best)?;
        }
    }

    Ok(best.unwrap_or(CommunityResult {
        assignment: BTreeMap::new(),
        modularity: 0.0,
        community_count: 0,
    }))
}
