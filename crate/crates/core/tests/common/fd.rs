//! Central-difference gradient checks on tiny nets.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resilinet::dgcn::{backward, forward, BranchStructure, DgcnInput, Mode, ModelParams, RecoveryObjective};
use resilinet::mbda::build_sequence;
use resilinet::scenario::build_input_graph;
use resilinet::swarm::Position;

use super::{damage_case, scaled_params};

pub const H: f64 = 1e-5;

pub struct Case {
    pub input: DgcnInput,
    pub objective: RecoveryObjective,
}

/// Tiny case whose target graphs are split, so both loss terms contribute.
pub fn case(n: usize, n_d: usize, k: usize, seed: u64) -> Case {
    let (t, s) = damage_case(n, n_d, seed);
    let graph = build_input_graph(&t, &s);
    let seq = build_sequence(&graph, k).unwrap();
    let start: Vec<Position> = s.remaining_positions(&t);
    // short range keeps several components in the candidate layouts
    let d_tr = 25.0;
    let lambda = 1.0;
    Case {
        input: DgcnInput::new(&seq, 1.0 / n as f64, false),
        objective: RecoveryObjective::new(n, k, start, 10.0, d_tr, lambda, lambda / d_tr),
    }
}

fn mode_for(seed: Option<u64>, rng: &mut Option<ChaCha8Rng>) -> Mode<'_> {
    match (seed, rng) {
        (Some(s), slot) => {
            *slot = Some(ChaCha8Rng::seed_from_u64(s));
            Mode::Train {
                dropout: 0.3,
                rng: slot.as_mut().unwrap(),
            }
        }
        (None, _) => Mode::Eval,
    }
}

fn value(params: &ModelParams, c: &Case, dropout_seed: Option<u64>) -> (f64, Vec<BranchStructure>) {
    let mut rng = None;
    let (out, _) = forward(params, &c.input, mode_for(dropout_seed, &mut rng)).unwrap();
    let e = c.objective.evaluate(out.view());
    (e.differentiable(), e.structure)
}

fn analytic(params: &ModelParams, c: &Case, dropout_seed: Option<u64>) -> (Vec<Array2<f64>>, Vec<BranchStructure>) {
    let mut rng = None;
    let (out, trace) = forward(params, &c.input, mode_for(dropout_seed, &mut rng)).unwrap();
    let e = c.objective.evaluate(out.view());
    (backward(&trace, params, &c.input, e.gradient.view()).unwrap(), e.structure)
}

fn nudged(params: &ModelParams, layer: usize, idx: (usize, usize), delta: f64) -> ModelParams {
    let mut layers = params.layers().to_vec();
    layers[layer][idx] += delta;
    ModelParams::from_layers(params.hidden(), params.blocks(), layers).unwrap()
}

/// Max relative error over all weights, or `None` if some ±h probe changes
/// the argmax, the component labels or the spanning links.
pub fn check_point(params: &ModelParams, c: &Case, dropout_seed: Option<u64>, floor: f64) -> Option<f64> {
    let (grads, structure) = analytic(params, c, dropout_seed);
    let mut worst = 0.0f64;
    for (q, w) in params.layers().iter().enumerate() {
        for idx in ndarray::indices(w.raw_dim()) {
            let (fp, sp) = value(&nudged(params, q, idx, H), c, dropout_seed);
            let (fm, sm) = value(&nudged(params, q, idx, -H), c, dropout_seed);
            if sp != structure || sm != structure {
                return None;
            }
            let numeric = (fp - fm) / (2.0 * H);
            let a = grads[q][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Some(worst)
}

pub fn gradient_sweep(blocks: usize, dropout: bool, gain: f64, floor: f64) -> (usize, f64) {
    let mut points = 0;
    let mut worst = 0.0f64;
    let mut seed = 0;
    while points < 20 {
        seed += 1;
        assert!(seed < 400, "too few structurally stable points");
        let c = case(6, 2, 2, 900 + seed % 7);
        let params = scaled_params(4, blocks, seed, gain);
        if let Some(err) = check_point(&params, &c, dropout.then_some(seed), floor) {
            points += 1;
            worst = worst.max(err);
        }
    }
    (points, worst)
}
