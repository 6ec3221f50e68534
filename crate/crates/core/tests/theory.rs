mod common;

use common::flow::*;
use common::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;

use resilinet::dgcn::{branch_flow, epsilon_admissible, kernel_flow, normalize, GcoKernel};
use resilinet::graph::diameter_hops;
use resilinet::mbda::{build_sequence, choose_k, mdag_connected, MDag};
use resilinet::scenario::build_input_graph;

#[test]
fn two_node_flow_meets_in_the_middle() {
    let m = MDag::from_biadjacency(1, 1, vec![vec![0]]);
    let x = ndarray::array![[0.0, 0.0], [2.0, 0.0]];
    let y = kernel_flow(&GcoKernel::from_mdag(&m, 0.5), x.view(), 1);
    assert_eq!(y, ndarray::array![[1.0, 0.0], [1.0, 0.0]]);
}

#[test]
fn column_sums_survive_ten_thousand_steps() {
    let seq = sequence(40, 15, 3, 11);
    let kernel = GcoKernel::from_mdag(&seq.mdags()[2], 1.0 / 40.0);
    let (xn, _) = normalize(seq.features().view());
    let d = max_drift(&kernel, xn, 10_000);
    assert!(d <= 1e-9, "normalized drift {d}");
    let meters = seq.features().clone();
    let scale = meters.sum_axis(Axis(0)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d = max_drift(&kernel, meters, 10_000);
    assert!(d <= 1e-9 * scale, "drift {d} on column sums of {scale}");
}

#[test]
fn connected_mdag_flows_to_centroid() {
    for seed in [1, 40, 80] {
        let (seq, k) = connected_branch(30, 12, seed);
        let x = seq.features().clone();
        let c = x.mean_axis(Axis(0)).unwrap();
        let y = branch_flow(&seq, k, x.view(), 10_000, 1.0 / 30.0).unwrap();
        let err = y.rows().into_iter().map(|r| (r[0] - c[0]).abs().max((r[1] - c[1]).abs())).fold(0.0, f64::max);
        assert!(err < 1e-6, "seed {seed} k {k}: {err}");
    }
}

#[test]
fn disconnected_mdag_flows_to_component_centroids() {
    let mut checked = 0;
    for seed in 0..40 {
        let seq = sequence(40, 12, 1, 500 + seed);
        let m = &seq.mdags()[0];
        if mdag_connected(m) {
            continue;
        }
        let labels = mdag_components(m);
        let x = seq.features().clone();
        let y = branch_flow(&seq, 1, x.view(), 200_000, 1.0 / 40.0).unwrap();
        let groups = labels.iter().max().unwrap() + 1;
        for g in 0..groups {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
            let c = x.select(Axis(0), &rows).mean_axis(Axis(0)).unwrap();
            for &i in &rows {
                let d = (y[[i, 0]] - c[0]).abs().max((y[[i, 1]] - c[1]).abs());
                assert!(d < 1e-6, "component {g} row {i}: {d}");
            }
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} disconnected cases");
}

#[test]
fn epsilon_one_over_n_is_admissible() {
    let mut r = rng(77);
    for i in 0..100 {
        let n = r.random_range(4..=100);
        let n_d = r.random_range(1..n - 1);
        let (t, s) = damage_case(n, n_d, 1000 + i);
        let k = choose_k(diameter_hops(&t.adjacency()).unwrap(), 12);
        let seq = build_sequence(&build_input_graph(&t, &s), k).unwrap();
        assert!(epsilon_admissible(&seq, 1.0 / n as f64), "n = {n}, n_d = {n_d}");
        for m in seq.mdags() {
            assert!(m.infinity_norm() < n);
        }
    }
}

#[test]
fn kernel_entries_are_stochastic_and_symmetric() {
    let seq = sequence(50, 25, 4, 3);
    let k = GcoKernel::from_sequence(&seq, 1.0 / 50.0).to_dense();
    assert_eq!(k, k.t());
    assert!(k.iter().all(|v| (0.0..=1.0).contains(v)));
    for row in k.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn repeated_flow_strictly_contracts_on_connected_mdag() {
    let (seq, k) = connected_branch(30, 12, 7);
    let kernel = GcoKernel::from_mdag(&seq.mdags()[k - 1], 1.0 / 30.0);
    let mut r = rng(8);
    let a = Array2::from_shape_simple_fn((30, 2), || r.random_range(-1.0..1.0));
    let mut b = Array2::from_shape_simple_fn((30, 2), || r.random_range(-1.0..1.0));
    let shift = (&a.sum_axis(Axis(0)) - &b.sum_axis(Axis(0))) / 30.0;
    b += &shift;
    let before = inf_norm(&(&a - &b));
    let after = inf_norm(&(&kernel_flow(&kernel, a.view(), 200) - &kernel_flow(&kernel, b.view(), 200)));
    assert!(after < before, "{after} vs {before}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_never_expands_differences(seed in 0u64..10_000, n_d in 3usize..20, k in 1usize..5) {
        let seq = sequence(30, n_d, k, seed);
        let kernel = GcoKernel::from_sequence(&seq, 1.0 / 30.0);
        let mut r = rng(seed);
        let dim = kernel.dim();
        let a = Array2::from_shape_simple_fn((dim, 2), || r.random_range(-100.0..100.0));
        let mut b = Array2::from_shape_simple_fn((dim, 2), || r.random_range(-100.0..100.0));
        let shift = (&a.sum_axis(Axis(0)) - &b.sum_axis(Axis(0))) / dim as f64;
        b += &shift;
        let d0 = inf_norm(&(&a - &b));
        let d1 = inf_norm(&(&kernel.apply(a.view()) - &kernel.apply(b.view())));
        prop_assert!(d1 <= d0 * (1.0 + 1e-12));
    }

    #[test]
    fn flow_preserves_column_sums(seed in 0u64..10_000, steps in 1usize..200) {
        let seq = sequence(25, 10, 2, seed);
        let kernel = GcoKernel::from_sequence(&seq, 1.0 / 25.0);
        let x = seq.batch_features();
        let y = kernel_flow(&kernel, x.view(), steps);
        let d = (&x.sum_axis(Axis(0)) - &y.sum_axis(Axis(0))).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(d < 1e-8);
    }
}
