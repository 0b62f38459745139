use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::LtiNetworkSystem;

/// Undirected, unweighted interconnection graph over subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterconnectionGraph {
    /// Sorted neighbor lists; never contains `i` itself.
    adjacency: Vec<Vec<usize>>,
}

impl InterconnectionGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i != j {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        InterconnectionGraph { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distances from `i`; `None` for unreachable vertices.
    pub fn distances_from(&self, i: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[i] = Some(0);
        let mut queue = VecDeque::from([i]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].expect("queued vertices have distances");
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.distances_from(0).iter().all(Option::is_some)
    }

    /// Largest finite hop distance (per-component diameter for disconnected graphs).
    pub fn diameter(&self) -> usize {
        (0..self.n())
            .map(|i| self.distances_from(i).into_iter().flatten().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Edge `(i, j)`, `i != j`, iff the `(i, j)` state block of `A` or the block
/// of `B` between `i`'s states and `j`'s inputs has an exactly nonzero entry.
pub fn build_interconnection_graph(sys: &LtiNetworkSystem) -> InterconnectionGraph {
    let p = sys.partition();
    let (so, io) = (p.state_owner(), p.input_owner());
    let mut edges = Vec::new();
    let a = sys.a();
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            if a[(r, c)] != 0.0 && so[r] != so[c] {
                edges.push((so[r], so[c]));
            }
        }
    }
    let b = sys.b();
    for c in 0..b.ncols() {
        for r in 0..b.nrows() {
            if b[(r, c)] != 0.0 && so[r] != io[c] {
                edges.push((so[r], io[c]));
            }
        }
    }
    InterconnectionGraph::from_edges(p.count(), &edges)
}

/// `{j : dist(i, j) <= d}` in ascending order; always contains `i`.
pub fn d_local_neighborhood(g: &InterconnectionGraph, i: usize, d: usize) -> Vec<usize> {
    g.distances_from(i)
        .into_iter()
        .enumerate()
        .filter_map(|(j, dj)| dj.filter(|&h| h <= d).map(|_| j))
        .collect()
}
