//! Recovery objective over the `K` candidate solutions of one forward pass.
//!
//! The reported loss is `Σ_k [T_rc^k + λ(N̂_S^k − 1)]`. Its connectivity term
//! is piecewise constant, so gradients come from a surrogate: the components
//! of each candidate target graph are joined by a minimum spanning tree over
//! closest inter-component node pairs, and every tree edge longer than `d_tr`
//! costs `λ_g` per meter of excess.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::graph::Adjacency;
use crate::swarm::Position;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchMetrics {
    /// Longest flight time of a surviving node, seconds.
    pub t_rc: f64,
    /// Sub-nets of the survivors' target graph.
    pub subnets: usize,
}

impl BranchMetrics {
    pub fn feasible(&self) -> bool {
        self.subnets == 1
    }
}

/// The quantities that must not change for the loss to be smooth at a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchStructure {
    /// Remaining row attaining `T_rc`.
    pub argmax: usize,
    pub labels: Vec<usize>,
    /// Closest node pairs of the spanning-tree links.
    pub links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct LossEvaluation {
    pub metrics: Vec<BranchMetrics>,
    /// `Σ_k [T_rc^k + λ(N̂_S^k − 1)]`.
    pub reported: f64,
    /// `Σ_k λ_g · Σ_tree max(0, w − d_tr)`.
    pub surrogate: f64,
    /// `∂(Σ_k T_rc^k + surrogate)/∂output`, `KN × 2`.
    pub gradient: Array2<f64>,
    pub structure: Vec<BranchStructure>,
}

impl LossEvaluation {
    /// The smooth function whose gradient is [`LossEvaluation::gradient`].
    pub fn differentiable(&self) -> f64 {
        self.metrics.iter().map(|m| m.t_rc).sum::<f64>() + self.surrogate
    }
}

/// Survivor geometry and weights of the objective for one damage case.
#[derive(Debug, Clone)]
pub struct RecoveryObjective {
    n: usize,
    branches: usize,
    start: Vec<Position>,
    v_max: f64,
    d_tr: f64,
    lambda: f64,
    lambda_g: f64,
}

impl RecoveryObjective {
    /// `start` holds the survivors' positions at damage time, which are the
    /// first `start.len()` rows of every branch block.
    pub fn new(
        n: usize,
        branches: usize,
        start: Vec<Position>,
        v_max: f64,
        d_tr: f64,
        lambda: f64,
        lambda_g: f64,
    ) -> Self {
        assert!(start.len() <= n, "more survivors than nodes");
        Self {
            n,
            branches,
            start,
            v_max,
            d_tr,
            lambda,
            lambda_g,
        }
    }

    pub fn n_r(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[Position] {
        &self.start
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn branch_targets(&self, output: ArrayView2<'_, f64>, k: usize) -> Vec<Position> {
        let base = k * self.n;
        (0..self.n_r())
            .map(|i| Position::new(output[[base + i, 0]], output[[base + i, 1]]))
            .collect()
    }

    pub fn metrics(&self, output: ArrayView2<'_, f64>) -> Vec<BranchMetrics> {
        (0..self.branches)
            .map(|k| {
                let targets = self.branch_targets(output, k);
                branch_metrics(&self.start, &targets, self.v_max, self.d_tr)
            })
            .collect()
    }

    pub fn evaluate(&self, output: ArrayView2<'_, f64>) -> LossEvaluation {
        assert_eq!(output.nrows(), self.n * self.branches, "output rows");
        let mut gradient = Array2::zeros(output.raw_dim());
        let mut metrics = Vec::with_capacity(self.branches);
        let mut structure = Vec::with_capacity(self.branches);
        let mut surrogate = 0.0;
        for k in 0..self.branches {
            let base = k * self.n;
            let targets = self.branch_targets(output, k);

            let (argmax, t_rc) = flight_argmax(&self.start, &targets, self.v_max);
            let (p, q) = (targets[argmax], self.start[argmax]);
            let dist = p.distance(&q);
            if dist > 0.0 {
                gradient[[base + argmax, 0]] += (p.x - q.x) / (self.v_max * dist);
                gradient[[base + argmax, 1]] += (p.y - q.y) / (self.v_max * dist);
            }

            let (labels, subnets) = Adjacency::from_positions(&targets, self.d_tr).component_labels();
            let tree = spanning_links(&targets, &labels, subnets);
            let mut links = Vec::with_capacity(tree.len());
            for (a, b, w) in tree {
                links.push((a, b));
                let excess = w - self.d_tr;
                if excess <= 0.0 {
                    continue;
                }
                surrogate += self.lambda_g * excess;
                let (pa, pb) = (targets[a], targets[b]);
                let gx = self.lambda_g * (pa.x - pb.x) / w;
                let gy = self.lambda_g * (pa.y - pb.y) / w;
                gradient[[base + a, 0]] += gx;
                gradient[[base + a, 1]] += gy;
                gradient[[base + b, 0]] -= gx;
                gradient[[base + b, 1]] -= gy;
            }

            metrics.push(BranchMetrics { t_rc, subnets });
            structure.push(BranchStructure {
                argmax,
                labels,
                links,
            });
        }
        LossEvaluation {
            reported: loss(&metrics, self.lambda),
            metrics,
            surrogate,
            gradient,
            structure,
        }
    }
}

/// `(index, time)` of the slowest survivor; ties go to the lowest index.
fn flight_argmax(start: &[Position], targets: &[Position], v_max: f64) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (i, (s, t)) in start.iter().zip(targets).enumerate() {
        let time = s.distance(t) / v_max;
        if time > best.1 {
            best = (i, time);
        }
    }
    best
}

/// Metrics of one candidate: survivors fly from `start` to `targets`.
pub fn branch_metrics(start: &[Position], targets: &[Position], v_max: f64, d_tr: f64) -> BranchMetrics {
    BranchMetrics {
        t_rc: flight_argmax(start, targets, v_max).1,
        subnets: crate::graph::count_subnets(&Adjacency::from_positions(targets, d_tr)),
    }
}

/// Per-branch metrics of a batched `KN × 2` output whose blocks list the
/// `start.len()` survivors first.
pub fn per_branch_metrics(
    output: ArrayView2<'_, f64>,
    n: usize,
    start: &[Position],
    v_max: f64,
    d_tr: f64,
) -> Vec<BranchMetrics> {
    let branches = output.nrows() / n;
    RecoveryObjective::new(n, branches, start.to_vec(), v_max, d_tr, 0.0, 0.0).metrics(output)
}

/// `Σ_k [T_rc^k + λ(N̂_S^k − 1)]`.
pub fn loss(metrics: &[BranchMetrics], lambda: f64) -> f64 {
    metrics
        .iter()
        .map(|m| m.t_rc + lambda * (m.subnets as f64 - 1.0))
        .sum()
}

/// Prim's tree over the complete component graph, each link weighted by the
/// closest node pair between two components. Returns `(a, b, distance)` node
/// pairs.
fn spanning_links(points: &[Position], labels: &[usize], components: usize) -> Vec<(usize, usize, f64)> {
    if components < 2 {
        return Vec::new();
    }
    let c = components;
    let mut closest = vec![(f64::INFINITY, 0usize, 0usize); c * c];
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (li, lj) = (labels[i], labels[j]);
            if li == lj {
                continue;
            }
            let d = points[i].distance(&points[j]);
            let (a, b) = if li < lj { (li, lj) } else { (lj, li) };
            let slot = &mut closest[a * c + b];
            if d < slot.0 {
                *slot = if li < lj { (d, i, j) } else { (d, j, i) };
            }
        }
    }
    let pair = |a: usize, b: usize| {
        if a < b {
            closest[a * c + b]
        } else {
            let (d, i, j) = closest[b * c + a];
            (d, j, i)
        }
    };

    let mut in_tree = vec![false; c];
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); c];
    in_tree[0] = true;
    for v in 1..c {
        best[v] = (pair(0, v).0, 0);
    }
    let mut links = Vec::with_capacity(c - 1);
    for _ in 1..c {
        let v = (0..c)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
            .expect("a component remains outside the tree");
        in_tree[v] = true;
        let (d, i, j) = pair(best[v].1, v);
        links.push((i, j, d));
        for u in 0..c {
            if !in_tree[u] {
                let w = pair(v, u).0;
                if w < best[u].0 {
                    best[u] = (w, v);
                }
            }
        }
    }
    links
}
