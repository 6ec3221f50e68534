//! Pretraining on one random damage case and online solving for a new one.

use std::path::Path;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{backward, forward, DgcnInput, Mode};
use super::objective::{BranchMetrics, LossEvaluation, RecoveryObjective};
use super::params::{ModelParams, PretrainMeta};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::graph::diameter_hops;
use crate::mbda::{build_sequence, choose_k, MDagSequence};
use crate::scenario::{apply_damage, build_input_graph, InputGraph};
use crate::seed::derive_seed;
use crate::swarm::{generate_swarm, Position, SwarmParams};

/// One row of a loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub reported_loss: f64,
    pub surrogate_loss: f64,
    /// Best feasible recovery time so far.
    pub best_t_rc: Option<f64>,
    pub feasible_flag: bool,
}

pub fn write_curve_csv(rows: &[CurveRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            what: "loss curve",
            detail: format!("{other:?}"),
        },
    })?;
    w.write_record([
        "iteration",
        "reported_loss",
        "surrogate_loss",
        "best_T_rc",
        "feasible_flag",
    ])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.reported_loss.to_string(),
            r.surrogate_loss.to_string(),
            r.best_t_rc.map_or_else(String::new, |t| t.to_string()),
            u8::from(r.feasible_flag).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parameters, optimizer state and the fixed inputs of one damage case.
pub struct Trainer {
    params: ModelParams,
    adam: AdamState,
    input: DgcnInput,
    objective: RecoveryObjective,
    lr: f64,
    dropout: f64,
    adam_cfg: super::AdamConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(
        params: ModelParams,
        input_graph: &InputGraph,
        seq: &MDagSequence,
        hyper: &Hyperparams,
        swarm: &SwarmParams,
    ) -> Result<Self> {
        hyper.validate()?;
        let n = seq.n();
        let input = DgcnInput::new(seq, hyper.epsilon_for(n), hyper.paper_literal_upscale);
        let f = input_graph.features();
        let start = (0..input_graph.n_r())
            .map(|i| Position::new(f[[i, 0]], f[[i, 1]]))
            .collect();
        let objective = RecoveryObjective::new(
            n,
            seq.branches(),
            start,
            swarm.v_max,
            swarm.d_tr,
            hyper.lambda,
            hyper.lambda_g_for(swarm.d_tr),
        );
        Ok(Self {
            adam: AdamState::new(&params),
            params,
            input,
            objective,
            lr: hyper.learning_rate,
            dropout: hyper.dropout,
            adam_cfg: hyper.adam,
            rng: ChaCha8Rng::seed_from_u64(hyper.seed),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn objective(&self) -> &RecoveryObjective {
        &self.objective
    }

    pub fn input(&self) -> &DgcnInput {
        &self.input
    }

    /// Train-mode forward, loss, backward and one Adam update. The returned
    /// evaluation belongs to the parameters before the update.
    pub fn step(&mut self, iteration: usize) -> Result<LossEvaluation> {
        let mode = Mode::Train {
            dropout: self.dropout,
            rng: &mut self.rng,
        };
        let (output, trace) = forward(&self.params, &self.input, mode).map_err(|e| at(e, iteration))?;
        let eval = self.objective.evaluate(output.view());
        let grads = backward(&trace, &self.params, &self.input, eval.gradient.view())
            .map_err(|e| at(e, iteration))?;
        adam_step(&mut self.params, &grads, &mut self.adam, self.lr, self.adam_cfg);
        Ok(eval)
    }

    /// Deterministic forward of the current parameters.
    pub fn evaluate(&self) -> Result<(Array2<f64>, Vec<BranchMetrics>, f64)> {
        let (output, _) = forward(&self.params, &self.input, Mode::Eval)?;
        let metrics = self.objective.metrics(output.view());
        let reported = super::loss(&metrics, self.objective_lambda());
        Ok((output, metrics, reported))
    }

    fn objective_lambda(&self) -> f64 {
        self.objective.lambda()
    }
}

fn at(e: Error, iteration: usize) -> Error {
    match e {
        Error::Divergence { detail, .. } => Error::Divergence { iteration, detail },
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub params: ModelParams,
    pub meta: PretrainMeta,
    pub curve: Vec<CurveRow>,
    pub init_seed: u64,
}

/// Trains from a scaled-uniform init on one random half-damaged case.
pub fn pretrain(n: usize, swarm: &SwarmParams, seed: u64, hyper: &Hyperparams) -> Result<Pretrained> {
    let topology = generate_swarm(n, swarm.density, swarm.d_tr, seed)?;
    let n_d = n / 2;
    let scenario = apply_damage(&topology, n_d, derive_seed(seed, 1), true)?;
    let input_graph = build_input_graph(&topology, &scenario);
    let h_max = diameter_hops(&topology.adjacency())?;
    let k = choose_k(h_max, hyper.k_cap);
    let seq = build_sequence(&input_graph, k)?;

    let init_seed = derive_seed(seed, 2);
    let params = ModelParams::for_hyper(hyper, init_seed);
    let mut hyper_run = hyper.clone();
    hyper_run.seed = derive_seed(seed, 3);
    let mut trainer = Trainer::new(params, &input_graph, &seq, &hyper_run, swarm)?;

    let mut curve = Vec::with_capacity(hyper.pretrain_iters);
    let mut best: Option<f64> = None;
    for it in 1..=hyper.pretrain_iters {
        let eval = trainer.step(it)?;
        let feasible_t = eval
            .metrics
            .iter()
            .filter(|m| m.feasible())
            .map(|m| m.t_rc)
            .min_by(f64::total_cmp);
        if let Some(t) = feasible_t {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
        curve.push(CurveRow {
            iteration: it,
            reported_loss: eval.reported,
            surrogate_loss: eval.surrogate,
            best_t_rc: best,
            feasible_flag: feasible_t.is_some(),
        });
    }

    let meta = PretrainMeta {
        k_policy: format!("floor((H_max + 1) / 2) capped at {}", hyper.k_cap),
        k,
        n_d,
        density: swarm.density,
        d_tr_m: swarm.d_tr,
        seed,
        iterations: hyper.pretrain_iters,
        loss_curve: curve.iter().map(|r| r.reported_loss).collect(),
        hyper: hyper.clone(),
    };
    Ok(Pretrained {
        params: trainer.into_params(),
        meta,
        curve,
        init_seed,
    })
}

/// One candidate target matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSolution {
    /// `N × 2` targets in input ordering; only the first `N_R` rows are used.
    pub targets: Array2<f64>,
    pub metrics: BranchMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub branches: Vec<BranchSolution>,
    /// Selected branch, 1-based.
    pub k_star: usize,
    pub feasible: bool,
    /// Online iterations performed.
    pub iterations: usize,
    pub curve: Vec<CurveRow>,
}

impl SolutionSet {
    pub fn selected(&self) -> &BranchSolution {
        &self.branches[self.k_star - 1]
    }

    /// Surviving rows of the selected branch.
    pub fn remaining_targets(&self, n_r: usize) -> Array2<f64> {
        self.selected().targets.slice(s![..n_r, ..]).to_owned()
    }
}

fn split_branches(output: &Array2<f64>, n: usize, metrics: &[BranchMetrics]) -> Vec<BranchSolution> {
    metrics
        .iter()
        .enumerate()
        .map(|(k, &m)| BranchSolution {
            targets: output.slice(s![k * n..(k + 1) * n, ..]).to_owned(),
            metrics: m,
        })
        .collect()
}

/// Fastest feasible branch, 0-based.
fn best_feasible(metrics: &[BranchMetrics]) -> Option<(usize, f64)> {
    metrics
        .iter()
        .enumerate()
        .filter(|(_, m)| m.feasible())
        .map(|(k, m)| (k, m.t_rc))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Replaces `best` when this evaluation holds a faster feasible branch.
fn record(
    best: &mut Option<(f64, SolutionSet)>,
    iteration: usize,
    output: &Array2<f64>,
    n: usize,
    metrics: &[BranchMetrics],
) {
    let Some((k, t)) = best_feasible(metrics) else {
        return;
    };
    if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
        *best = Some((
            t,
            SolutionSet {
                branches: split_branches(output, n, metrics),
                k_star: k + 1,
                feasible: true,
                iterations: iteration,
                curve: Vec::new(),
            },
        ));
    }
}

/// Online iterations from pretrained parameters (copied, never mutated).
/// Keeps the fastest feasible candidate seen across iterations and branches,
/// iteration 0 being the pretrained parameters themselves.
pub fn solve(
    input_graph: &InputGraph,
    seq: &MDagSequence,
    params: &ModelParams,
    hyper: &Hyperparams,
    swarm: &SwarmParams,
) -> Result<SolutionSet> {
    let n = seq.n();
    let n_r = input_graph.n_r();
    let survivors: Vec<usize> = (0..n_r).collect();
    if input_graph.adjacency().induced(&survivors).is_connected() {
        let still = BranchSolution {
            targets: input_graph.features().clone(),
            metrics: BranchMetrics {
                t_rc: 0.0,
                subnets: 1,
            },
        };
        return Ok(SolutionSet {
            branches: vec![still; seq.branches()],
            k_star: 1,
            feasible: true,
            iterations: 0,
            curve: Vec::new(),
        });
    }

    let mut trainer = Trainer::new(params.clone(), input_graph, seq, hyper, swarm)?;
    let mut curve = Vec::new();

    let (output, metrics, mut last_loss) = trainer.evaluate()?;
    let mut best: Option<(f64, SolutionSet)> = None;
    let mut fallback = split_branches(&output, n, &metrics);
    record(&mut best, 0, &output, n, &metrics);
    curve.push(CurveRow {
        iteration: 0,
        reported_loss: last_loss,
        surrogate_loss: f64::NAN,
        best_t_rc: best.as_ref().map(|b| b.0),
        feasible_flag: best_feasible(&metrics).is_some(),
    });

    let mut calm = 0;
    let mut iterations = 0;
    for it in 1..=hyper.online_iters {
        let step = match trainer.step(it) {
            Ok(eval) => eval,
            Err(Error::Divergence { .. }) => break,
            Err(e) => return Err(e),
        };
        let (output, metrics, reported) = match trainer.evaluate() {
            Ok(v) => v,
            Err(Error::Divergence { .. }) => break,
            Err(e) => return Err(e),
        };
        iterations = it;
        record(&mut best, it, &output, n, &metrics);
        if best.is_none() {
            fallback = split_branches(&output, n, &metrics);
        }
        curve.push(CurveRow {
            iteration: it,
            reported_loss: reported,
            surrogate_loss: step.surrogate,
            best_t_rc: best.as_ref().map(|b| b.0),
            feasible_flag: best_feasible(&metrics).is_some(),
        });

        let change = (reported - last_loss).abs() / last_loss.abs().max(1e-12);
        last_loss = reported;
        calm = if change < hyper.early_stop_tol { calm + 1 } else { 0 };
        if best.is_some() && calm >= hyper.early_stop_patience {
            break;
        }
    }

    Ok(match best {
        Some((_, mut set)) => {
            set.iterations = iterations;
            set.curve = curve;
            set
        }
        None => {
            let k_star = fallback
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.metrics.t_rc.total_cmp(&b.1.metrics.t_rc))
                .map_or(1, |(k, _)| k + 1);
            SolutionSet {
                branches: fallback,
                k_star,
                feasible: false,
                iterations,
                curve,
            }
        }
    })
}
