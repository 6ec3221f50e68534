//! Undirected 0/1 graphs: adjacency, hop distances, connectivity and degree
//! statistics.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::swarm::Position;

/// Symmetric, irreflexive 0/1 adjacency stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an undirected edge list. Self-loops and duplicates
    /// are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for (a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for n = {n}");
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    /// Disk model: `i ~ j` iff `i != j` and `‖p_i − p_j‖ ≤ d_tr` (boundary
    /// inclusive).
    pub fn from_positions(positions: &[Position], d_tr: f64) -> Self {
        let n = positions.len();
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance(&positions[j]) <= d_tr {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        // pushes happen in increasing order of the other endpoint
        Self { neighbors }
    }

    /// Dense 0/1 matrix with a symmetric, zero-diagonal pattern.
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let n = m.nrows();
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i < j && m[[i, j]] != 0.0);
        Self::from_edges(n, edges)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Non-zeros of the full symmetric matrix, `2 · edge_count`.
    pub fn nnz(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Largest row sum, i.e. the induced infinity norm of the matrix.
    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Subgraph induced on `nodes`; vertex `t` of the result is `nodes[t]`.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.len()];
        for (t, &v) in nodes.iter().enumerate() {
            local[v] = t;
        }
        let neighbors = nodes
            .iter()
            .map(|&v| {
                let mut list: Vec<usize> = self.neighbors[v]
                    .iter()
                    .filter_map(|&w| (local[w] != usize::MAX).then_some(local[w]))
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        Self { neighbors }
    }

    /// `order` must be a permutation; vertex `t` of the result is `order[t]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len(), "permutation length mismatch");
        self.induced(order)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.len();
        let mut m = Array2::zeros((n, n));
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                m[[i, j]] = 1.0;
            }
        }
        m
    }

    /// Block-diagonal union: block `b` occupies vertices `offset_b..offset_b + n_b`.
    pub fn block_diagonal(blocks: &[Adjacency]) -> Self {
        let mut neighbors = Vec::with_capacity(blocks.iter().map(Adjacency::len).sum());
        let mut offset = 0;
        for block in blocks {
            for list in &block.neighbors {
                neighbors.push(list.iter().map(|&j| j + offset).collect());
            }
            offset += block.len();
        }
        Self { neighbors }
    }

    /// Connected-component label of every vertex, labels numbered from 0 in
    /// order of their smallest vertex.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn is_connected(&self) -> bool {
        count_subnets(self) <= 1
    }

    /// Breadth-first hop counts from `source`, stopping at depth `limit` when
    /// given.
    pub fn bfs_hops(&self, source: usize, limit: Option<u32>) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].expect("queued vertices are labeled");
            if limit.is_some_and(|l| d >= l) {
                continue;
            }
            for &w in &self.neighbors[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// All-pairs hop counts; `None` marks unreachable pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<Option<u32>>,
}

impl HopMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        self.hops[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[Option<u32>] {
        &self.hops[i * self.n..(i + 1) * self.n]
    }

    /// Largest finite entry.
    pub fn max_finite(&self) -> u32 {
        self.hops.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// One BFS per source vertex.
pub fn hop_distances(adj: &Adjacency) -> HopMatrix {
    let n = adj.len();
    let mut hops = Vec::with_capacity(n * n);
    for s in 0..n {
        hops.extend(adj.bfs_hops(s, None));
    }
    HopMatrix { n, hops }
}

/// Number of connected components (sub-nets).
pub fn count_subnets(adj: &Adjacency) -> usize {
    adj.component_labels().1
}

/// `L = diag(row sums) − A`.
pub fn laplacian(adj: &Adjacency) -> Array2<f64> {
    let n = adj.len();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        l[[i, i]] = adj.degree(i) as f64;
        for &j in adj.neighbors(i) {
            l[[i, j]] = -1.0;
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DegreeStats {
    pub mean: f64,
    pub max: usize,
    /// `cumulative[d]` is the fraction of vertices with degree ≤ d, for
    /// `d = 0..=max`; beyond `max` it is 1.
    pub cumulative: Vec<f64>,
}

impl DegreeStats {
    pub fn at(&self, d: usize) -> f64 {
        self.cumulative.get(d).copied().unwrap_or(1.0)
    }
}

pub fn degree_stats(adj: &Adjacency) -> DegreeStats {
    let n = adj.len();
    if n == 0 {
        return DegreeStats {
            mean: 0.0,
            max: 0,
            cumulative: vec![1.0],
        };
    }
    let max = adj.max_degree();
    let mut histogram = vec![0usize; max + 1];
    for i in 0..n {
        histogram[adj.degree(i)] += 1;
    }
    let mut running = 0;
    let cumulative = histogram
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / n as f64
        })
        .collect();
    DegreeStats {
        mean: adj.nnz() as f64 / n as f64,
        max,
        cumulative,
    }
}

/// Hop diameter of a connected graph.
pub fn diameter_hops(adj: &Adjacency) -> Result<u32> {
    let components = count_subnets(adj);
    if components > 1 {
        return Err(Error::Disconnected { components });
    }
    Ok(hop_distances(adj).max_finite())
}
