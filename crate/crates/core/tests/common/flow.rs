//! Helpers for the kernel-flow checks.

use ndarray::{Array2, Axis};

use resilinet::dgcn::GcoKernel;
use resilinet::graph::diameter_hops;
use resilinet::mbda::{build_sequence, mdag_connected, MDag, MDagSequence};
use resilinet::scenario::build_input_graph;

use super::damage_case;

pub fn inf_norm(x: &Array2<f64>) -> f64 {
    x.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn sequence(n: usize, n_d: usize, k: usize, seed: u64) -> MDagSequence {
    let (t, s) = damage_case(n, n_d, seed);
    build_sequence(&build_input_graph(&t, &s), k).unwrap()
}

/// First branch whose mDAG is connected, searched over seeds.
pub fn connected_branch(n: usize, n_d: usize, seed0: u64) -> (MDagSequence, usize) {
    for seed in seed0.. {
        let (t, s) = damage_case(n, n_d, seed);
        let input = build_input_graph(&t, &s);
        let k = diameter_hops(&t.adjacency()).unwrap() as usize;
        let seq = build_sequence(&input, k).unwrap();
        if let Some(kk) = seq.mdags().iter().position(mdag_connected) {
            if kk + 1 < k {
                return (seq, kk + 1);
            }
        }
    }
    unreachable!()
}

/// Component label of each of the `n_r + n_d` mDAG nodes.
pub fn mdag_components(m: &MDag) -> Vec<usize> {
    m.to_adjacency().component_labels().0
}

pub fn max_drift(kernel: &GcoKernel, x: Array2<f64>, steps: usize) -> f64 {
    let sums = x.sum_axis(Axis(0));
    let mut cur = x;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        cur = kernel.apply(cur.view());
        let d = (&cur.sum_axis(Axis(0)) - &sums).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(d);
    }
    worst
}
