//! Independent dense reference implementations shared by the test targets.
#![allow(dead_code)]

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod fd;
pub mod flow;

use resilinet::dgcn::ModelParams;
use resilinet::graph::Adjacency;
use resilinet::scenario::{apply_damage, DamageScenario};
use resilinet::swarm::{generate_swarm, Position, SwarmTopology};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Adjacency {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Adjacency::from_edges(n, edges)
}

pub fn dense_adjacency(adj: &Adjacency) -> Array2<f64> {
    let n = adj.len();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j && adj.has_edge(i, j) {
                a[[i, j]] = 1.0;
            }
        }
    }
    a
}

/// Laplacian zero-eigenvalue count with the `1e-8·n·max|L|` tolerance.
pub fn eigen_zero_count(a: &Array2<f64>) -> usize {
    let n = a.nrows();
    let mut l = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let deg: f64 = a.row(i).sum();
        for j in 0..n {
            l[(i, j)] = if i == j { deg } else { -a[[i, j]] };
        }
    }
    let max = l.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-8 * n as f64 * max;
    l.symmetric_eigenvalues().iter().filter(|v| v.abs() < tol).count()
}

/// Unit-weight all-pairs shortest paths; `None` for unreachable.
pub fn floyd_warshall(a: &Array2<f64>) -> Vec<Vec<Option<u32>>> {
    let n = a.nrows();
    let inf = u32::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[[i, j]] != 0.0 {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|row| row.into_iter().map(|v| (v < inf).then_some(v)).collect())
        .collect()
}

/// Pairs joined by a walk of length `1..=k`, from boolean matrix powers.
pub fn boolean_power_reach(a: &Array2<f64>, k: u32) -> Array2<f64> {
    let n = a.nrows();
    let b = a.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
    let mut power = b.clone();
    let mut reach = b.clone();
    for _ in 1..k {
        power = power.dot(&b).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        reach = (&reach + &power).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    }
    for i in 0..n {
        reach[[i, i]] = 0.0;
    }
    reach
}

/// `M_da` as a dense matrix.
pub fn dense_mask(n_r: usize, n_d: usize) -> Array2<f64> {
    let n = n_r + n_d;
    Array2::from_shape_fn((n, n), |(i, j)| if (i < n_r) != (j < n_r) { 1.0 } else { 0.0 })
}

/// `A_in^k ⊙ M_da` computed from a dense adjacency.
pub fn dense_mdag(a_in: &Array2<f64>, k: u32, n_r: usize) -> Array2<f64> {
    let n = a_in.nrows();
    &boolean_power_reach(a_in, k) * &dense_mask(n_r, n - n_r)
}

/// `I − ε(D − A)`.
pub fn dense_kernel(a: &Array2<f64>, eps: f64) -> Array2<f64> {
    let n = a.nrows();
    let mut k = Array2::eye(n);
    for i in 0..n {
        let deg: f64 = a.row(i).sum();
        k[[i, i]] -= eps * deg;
        for j in 0..n {
            if i != j {
                k[[i, j]] += eps * a[[i, j]];
            }
        }
    }
    k
}

/// Block-diagonal dense kernel of the branches `k = 1..=branches`.
pub fn dense_batch_kernel(a_in: &Array2<f64>, n_r: usize, branches: u32, eps: f64) -> Array2<f64> {
    let n = a_in.nrows();
    let kn = n * branches as usize;
    let mut out = Array2::zeros((kn, kn));
    for k in 1..=branches {
        let block = dense_kernel(&dense_mdag(a_in, k, n_r), eps);
        let o = (k as usize - 1) * n;
        out.slice_mut(ndarray::s![o..o + n, o..o + n]).assign(&block);
    }
    out
}

/// Dense forward: same layer algebra, written against a full kernel matrix.
pub fn dense_forward(params: &ModelParams, kernel: &Array2<f64>, positions: &Array2<f64>, branches: usize) -> Array2<f64> {
    let c = positions.mean_axis(Axis(0)).unwrap();
    let radius = positions
        .rows()
        .into_iter()
        .map(|r| ((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let scale = radius + 1.0;
    let single = (positions - &c) / scale;
    let views: Vec<_> = (0..branches).map(|_| single.view()).collect();
    let x = ndarray::concatenate(Axis(0), &views).unwrap();

    let w = params.layers();
    let relu = |m: Array2<f64>| m.mapv(|v| v.max(0.0));
    let h1 = relu(kernel.dot(&x).dot(&w[0]));
    let mut h = h1.clone();
    for l in 0..params.blocks() {
        let a = relu(kernel.dot(&h).dot(&w[1 + 2 * l]));
        let b = relu(kernel.dot(&a).dot(&w[2 + 2 * l]));
        h = b + &h1;
    }
    let t = kernel.dot(&h).dot(&w[w.len() - 1]).mapv(f64::tanh);
    t * scale + &c
}

pub fn positions_matrix(p: &[Position]) -> Array2<f64> {
    Array2::from_shape_fn((p.len(), 2), |(i, j)| if j == 0 { p[i].x } else { p[i].y })
}

/// Random connected swarm plus a split-causing damage case.
pub fn cns_case(n: usize, n_d: usize, seed: u64) -> (SwarmTopology, DamageScenario) {
    let t = generate_swarm(n, 200.0, 120.0, seed).expect("connected swarm");
    let s = apply_damage(&t, n_d, seed ^ 0xD1CE, true).expect("CNS damage");
    (t, s)
}

/// Swarm plus any damage case, split or not.
pub fn damage_case(n: usize, n_d: usize, seed: u64) -> (SwarmTopology, DamageScenario) {
    let t = generate_swarm(n, 200.0, 120.0, seed).expect("connected swarm");
    let s = apply_damage(&t, n_d, seed ^ 0xD1CE, false).expect("damage");
    (t, s)
}

/// Glorot-style init scaled so the tiny nets are not near-linear.
pub fn scaled_params(hidden: usize, blocks: usize, seed: u64, gain: f64) -> ModelParams {
    let p = ModelParams::init(hidden, blocks, seed);
    let layers = p.layers().iter().map(|w| w * gain).collect();
    ModelParams::from_layers(hidden, blocks, layers).unwrap()
}
