//! Multi-branch damage attention: k-hop dilation of the input graph masked to
//! remaining↔destroyed links, one bipartite graph per branch `k = 1..=K`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, HopMatrix};
use crate::scenario::InputGraph;

/// Default resource cap on the number of branches.
pub const DEFAULT_K_CAP: usize = 12;

/// `a^k_ij = 1` iff `0 < H_ij ≤ k`.
pub fn dilate(hops: &HopMatrix, k: u32) -> Result<Adjacency> {
    if k == 0 {
        return Err(Error::invalid("dilation size must be at least 1"));
    }
    let n = hops.len();
    let edges = (0..n).flat_map(|i| {
        hops.row(i)
            .iter()
            .enumerate()
            .filter(move |&(j, h)| j > i && h.is_some_and(|h| h <= k))
            .map(move |(j, _)| (i, j))
    });
    Ok(Adjacency::from_edges(n, edges))
}

/// Damage attention mask: ones exactly on the remaining×destroyed blocks.
pub fn damage_mask(n_r: usize, n_d: usize) -> Array2<u8> {
    let n = n_r + n_d;
    Array2::from_shape_fn((n, n), |(i, j)| u8::from((i < n_r) != (j < n_r)))
}

/// One k-hop damage-attentive graph, stored as its `n_r × n_d` biadjacency.
/// The full matrix is `[[0, B], [Bᵀ, 0]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MDag {
    k: usize,
    n_r: usize,
    n_d: usize,
    /// `rows[i]` lists the destroyed columns linked to remaining node `i`.
    rows: Vec<Vec<usize>>,
}

impl MDag {
    pub fn from_biadjacency(k: usize, n_d: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut rows = rows;
        for row in &mut rows {
            assert!(row.iter().all(|&j| j < n_d), "column out of range");
            row.sort_unstable();
            row.dedup();
        }
        Self {
            k,
            n_r: rows.len(),
            n_d,
            rows,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    pub fn n(&self) -> usize {
        self.n_r + self.n_d
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    /// Non-zeros of the biadjacency `B`.
    pub fn nnz_biadjacency(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn biadjacency_dense(&self) -> Array2<u8> {
        let mut b = Array2::zeros((self.n_r, self.n_d));
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                b[[i, j]] = 1;
            }
        }
        b
    }

    /// The full `N × N` bipartite adjacency in input ordering.
    pub fn to_adjacency(&self) -> Adjacency {
        let edges = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, self.n_r + j)));
        Adjacency::from_edges(self.n(), edges)
    }

    /// Degrees of all `N` vertices in input ordering.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for (i, row) in self.rows.iter().enumerate() {
            deg[i] = row.len();
            for &j in row {
                deg[self.n_r + j] += 1;
            }
        }
        deg
    }

    /// `‖A_dag‖_∞`, the largest vertex degree.
    pub fn infinity_norm(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn edge_dump(&self) -> MDagDump {
        MDagDump {
            k: self.k,
            edges: self
                .rows
                .iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().map(move |&j| [i, self.n_r + j]))
                .collect(),
        }
    }
}

/// Debug dump of one branch: edges as `[remaining, destroyed]` input-graph
/// indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MDagDump {
    pub k: usize,
    pub edges: Vec<[usize; 2]>,
}

/// `A_dag = A^k ⊙ M_da` for a dilated input graph ordered remaining-first.
pub fn mdag(dilated: &Adjacency, k: usize, n_r: usize, n_d: usize) -> Result<MDag> {
    if dilated.len() != n_r + n_d {
        return Err(Error::Shape(format!(
            "adjacency has {} nodes, expected {}",
            dilated.len(),
            n_r + n_d
        )));
    }
    let rows = (0..n_r)
        .map(|i| {
            dilated
                .neighbors(i)
                .iter()
                .filter(|&&j| j >= n_r)
                .map(|&j| j - n_r)
                .collect()
        })
        .collect();
    Ok(MDag::from_biadjacency(k, n_d, rows))
}

/// `K = ⌊(H_max + 1)/2⌋`, clamped to `1..=k_cap`.
pub fn choose_k(h_max: u32, k_cap: usize) -> usize {
    (((h_max as usize) + 1) / 2).clamp(1, k_cap.max(1))
}

/// True iff the bipartite graph on all `n_r + n_d` vertices is one component.
pub fn mdag_connected(m: &MDag) -> bool {
    m.to_adjacency().is_connected()
}

/// The branch sequence plus its block-diagonal batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MDagSequence {
    mdags: Vec<MDag>,
    features: Array2<f64>,
}

impl MDagSequence {
    pub fn mdags(&self) -> &[MDag] {
        &self.mdags
    }

    pub fn branches(&self) -> usize {
        self.mdags.len()
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.mdags[0].n_r()
    }

    pub fn n_d(&self) -> usize {
        self.mdags[0].n_d()
    }

    /// Unbatched `N × 2` input features.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// `KN × KN` block-diagonal adjacency, block `k` being branch `k`.
    pub fn batch_adjacency(&self) -> Adjacency {
        let blocks: Vec<Adjacency> = self.mdags.iter().map(MDag::to_adjacency).collect();
        Adjacency::block_diagonal(&blocks)
    }

    /// The features stacked `K` times, `KN × 2`.
    pub fn batch_features(&self) -> Array2<f64> {
        let views: Vec<_> = (0..self.branches()).map(|_| self.features.view()).collect();
        ndarray::concatenate(ndarray::Axis(0), &views).expect("equal column counts")
    }

    pub fn dumps(&self) -> Vec<MDagDump> {
        self.mdags.iter().map(MDag::edge_dump).collect()
    }
}

/// Builds branches `1..=K` from one depth-`K` BFS per remaining node.
pub fn build_sequence(input: &InputGraph, k: usize) -> Result<MDagSequence> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let (n_r, n_d) = (input.n_r(), input.n_d());
    let adjacency = input.adjacency();
    // hop[i][j]: hops from remaining i to destroyed j, if within K
    let within: Vec<Vec<(usize, u32)>> = (0..n_r)
        .map(|i| {
            adjacency
                .bfs_hops(i, Some(k as u32))
                .into_iter()
                .enumerate()
                .skip(n_r)
                .filter_map(|(j, h)| h.map(|h| (j - n_r, h)))
                .collect()
        })
        .collect();
    let mdags = (1..=k)
        .map(|kk| {
            let rows = within
                .iter()
                .map(|row| {
                    row.iter()
                        .filter(|&&(_, h)| h as usize <= kk)
                        .map(|&(j, _)| j)
                        .collect()
                })
                .collect();
            MDag::from_biadjacency(kk, n_d, rows)
        })
        .collect();
    Ok(MDagSequence {
        mdags,
        features: input.features().clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// `nnz(A_dag^k)` for `k = 1..=K`.
    pub nnz_per_branch: Vec<usize>,
    /// Structural non-zeros of the batched kernel `I − εL̇` (diagonal included).
    pub kernel_nnz: usize,
    /// `kernel_nnz / (KN)²`.
    pub density: f64,
    /// `1/(2K) + KN/(KN)²`.
    pub bound: f64,
}

impl SparsityReport {
    pub fn within_bound(&self) -> bool {
        self.density <= self.bound
    }
}

pub fn sparsity_report(seq: &MDagSequence) -> SparsityReport {
    let kk = seq.branches();
    let kn = (kk * seq.n()) as f64;
    let nnz_per_branch: Vec<usize> = seq
        .mdags()
        .iter()
        .map(|m| 2 * m.nnz_biadjacency())
        .collect();
    let kernel_nnz = nnz_per_branch.iter().sum::<usize>() + kk * seq.n();
    let report = SparsityReport {
        density: kernel_nnz as f64 / (kn * kn),
        bound: 1.0 / (2.0 * kk as f64) + kn / (kn * kn),
        nnz_per_branch,
        kernel_nnz,
    };
    debug_assert!(report.within_bound(), "{report:?}");
    report
}
