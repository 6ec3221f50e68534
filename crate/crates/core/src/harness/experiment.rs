use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::export::ResultRow;
use super::sim::execute;
use crate::dgcn::{Hyperparams, ModelParams};
use crate::error::{Error, Result};
use crate::planner::{plan_centering, plan_mldagl, Method};
use crate::scenario::apply_damage;
use crate::seed::derive_seed;
use crate::swarm::{generate_swarm, SwarmParams};

/// Time limit of a simulated recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TMaxPolicy {
    /// `D / (2·v_max)` with `D` the side of the deployment area.
    HalfSide,
    Fixed(f64),
}

impl TMaxPolicy {
    pub fn resolve(self, side: f64, v_max: f64) -> f64 {
        match self {
            TMaxPolicy::HalfSide => side / (2.0 * v_max),
            TMaxPolicy::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub swarm: SwarmParams,
    pub damage_sizes: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub t_max: TMaxPolicy,
    pub hyper: Hyperparams,
}

impl ExperimentSpec {
    pub fn new(n: usize, damage_sizes: Vec<usize>, trials: usize, master_seed: u64, methods: Vec<Method>) -> Self {
        Self {
            n,
            swarm: SwarmParams::default(),
            damage_sizes,
            trials,
            master_seed,
            methods,
            t_max: TMaxPolicy::HalfSide,
            hyper: Hyperparams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if !(self.swarm.dt > 0.0) || !(self.swarm.v_max > 0.0) {
            return Err(Error::invalid("dt and v_max must be positive"));
        }
        if self.methods.is_empty() || self.damage_sizes.is_empty() {
            return Err(Error::invalid("need at least one method and one damage size"));
        }
        if let Some(&bad) = self.damage_sizes.iter().find(|&&d| d == 0 || d + 2 > self.n) {
            return Err(Error::invalid(format!(
                "damage size {bad} leaves fewer than two survivors of {}",
                self.n
            )));
        }
        if self.methods.contains(&Method::FallbackCentroid) {
            return Err(Error::invalid("fallback-centroid is not a selectable method"));
        }
        Ok(())
    }

    /// Topology seed of a trial; shared by every damage size and method.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, trial as u64)
    }
}

/// One executed (method, damage size, trial) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Method requested; the selected plan may still be a fallback.
    pub method: Method,
    pub plan_method: Method,
    pub n: usize,
    pub n_d: usize,
    pub seed: u64,
    pub converged: bool,
    #[serde(rename = "measured_T_rc_s")]
    pub measured_t_rc: Option<f64>,
    #[serde(rename = "planned_T_rc_s")]
    pub planned_t_rc: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub degree_cdf: Vec<f64>,
    pub k_star: Option<usize>,
    pub iterations_used: usize,
}

impl TrialResult {
    pub fn row(&self) -> ResultRow {
        ResultRow {
            method: self.method,
            n: self.n,
            n_d: self.n_d,
            seed: self.seed,
            converged: self.converged,
            measured_t_rc_s: self.measured_t_rc,
            planned_t_rc_s: self.planned_t_rc,
            mean_degree: self.mean_degree,
            max_degree: self.max_degree,
            k_star: self.k_star,
            iterations_used: self.iterations_used,
        }
    }
}

/// A trial that could not be set up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub trial: usize,
    pub n_d: usize,
    pub seed: u64,
    pub reason: String,
}

/// Aggregate of one (method, damage size) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub n: usize,
    pub n_d: usize,
    pub trials: usize,
    #[serde(rename = "R_c")]
    pub r_c: f64,
    /// Over converged trials; `None` when none converged.
    pub mean_t: Option<f64>,
    pub std_t: Option<f64>,
    pub mean_deg: f64,
    /// Mean over trials of each recovered graph's maximum degree.
    pub max_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub trials: Vec<TrialResult>,
    pub skips: Vec<Skip>,
    pub summary: Vec<CellSummary>,
}

enum Outcome {
    Done(Vec<TrialResult>),
    Skipped(Skip),
}

fn run_trial(spec: &ExperimentSpec, model: Option<&ModelParams>, n_d: usize, trial: usize) -> Result<Outcome> {
    let seed = spec.trial_seed(trial);
    let skip = |e: Error| {
        Outcome::Skipped(Skip {
            trial,
            n_d,
            seed,
            reason: e.to_string(),
        })
    };
    let sw = &spec.swarm;
    let topology = match generate_swarm(spec.n, sw.density, sw.d_tr, seed) {
        Ok(t) => t,
        Err(e @ Error::GenerationFailed { .. }) => return Ok(skip(e)),
        Err(e) => return Err(e),
    };
    let scenario = match apply_damage(&topology, n_d, derive_seed(seed, n_d as u64), true) {
        Ok(s) => s,
        Err(e @ Error::CnsUnobtainable { .. }) => return Ok(skip(e)),
        Err(e) => return Err(e),
    };
    let start = scenario.remaining_positions(&topology);
    let t_max = spec.t_max.resolve(topology.side(), sw.v_max);

    let mut out = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let plan = match method {
            Method::Centering => plan_centering(&topology, &scenario, sw.v_max),
            Method::MlDagl => {
                let params = model.ok_or_else(|| Error::invalid("ml-dagl needs a pretrained model"))?;
                let mut hyper = spec.hyper.clone();
                hyper.seed = derive_seed(seed, (1 << 32) | n_d as u64);
                plan_mldagl(&topology, &scenario, params, &hyper, sw)?
            }
            Method::FallbackCentroid => unreachable!("rejected by validate"),
        };
        let sim = execute(&start, &plan, sw.v_max, sw.dt, sw.d_tr, t_max)?;
        out.push(TrialResult {
            trial,
            method,
            plan_method: plan.method,
            n: spec.n,
            n_d,
            seed,
            converged: sim.converged,
            measured_t_rc: sim.measured_t_rc,
            planned_t_rc: plan.planned_t_rc,
            mean_degree: sim.degrees.mean,
            max_degree: sim.degrees.max,
            degree_cdf: sim.degrees.cumulative,
            k_star: plan.k_star,
            iterations_used: plan.iterations,
        });
    }
    Ok(Outcome::Done(out))
}

/// Runs every (damage size, trial) pair on `jobs` worker threads. Results do
/// not depend on `jobs`.
pub fn run_experiment(spec: &ExperimentSpec, model: Option<&ModelParams>, jobs: usize) -> Result<ExperimentReport> {
    spec.validate()?;
    if spec.methods.contains(&Method::MlDagl) && model.is_none() {
        return Err(Error::invalid("ml-dagl needs a pretrained model"));
    }
    let cells: Vec<(usize, usize)> = spec
        .damage_sizes
        .iter()
        .flat_map(|&d| (0..spec.trials).map(move |t| (d, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, t)| run_trial(spec, model, d, t))
            .collect::<Result<_>>()
    })?;

    let mut trials = Vec::new();
    let mut skips = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Done(r) => trials.extend(r),
            Outcome::Skipped(s) => skips.push(s),
        }
    }
    let summary = summarize(&trials);
    Ok(ExperimentReport {
        spec: spec.clone(),
        trials,
        skips,
        summary,
    })
}

pub fn summarize(trials: &[TrialResult]) -> Vec<CellSummary> {
    summarize_rows(&trials.iter().map(TrialResult::row).collect::<Vec<_>>())
}

/// Cells in first-appearance order of (damage size, method).
pub fn summarize_rows(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, usize, usize)> = Vec::new();
    for r in rows {
        let key = (r.method, r.n, r.n_d);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, n, n_d)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && r.n == n && r.n_d == n_d)
                .collect();
            let count = cell.len() as f64;
            let times: Vec<f64> = cell
                .iter()
                .filter(|r| r.converged)
                .filter_map(|r| r.measured_t_rc_s)
                .collect();
            let (mean_t, std_t) = if times.is_empty() {
                (None, None)
            } else {
                let m = times.iter().sum::<f64>() / times.len() as f64;
                let var = times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / times.len() as f64;
                (Some(m), Some(var.sqrt()))
            };
            CellSummary {
                method,
                n,
                n_d,
                trials: cell.len(),
                r_c: cell.iter().filter(|r| r.converged).count() as f64 / count,
                mean_t,
                std_t,
                mean_deg: cell.iter().map(|r| r.mean_degree).sum::<f64>() / count,
                max_deg: cell.iter().map(|r| r.max_degree as f64).sum::<f64>() / count,
            }
        })
        .collect()
}
