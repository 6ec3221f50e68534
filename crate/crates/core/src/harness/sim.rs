use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{count_subnets, degree_stats, Adjacency, DegreeStats};
use crate::io;
use crate::planner::RecoveryPlan;
use crate::swarm::{Position, FORMAT_VERSION};

/// Remaining distances below this many meters count as arrived.
const ARRIVAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Sub-net count at `t = i·Δt`, from the start until every node arrived.
    pub ns_series: Vec<usize>,
    pub dt: f64,
    /// First time at which the survivors form one network.
    #[serde(rename = "measured_T_rc_s")]
    pub measured_t_rc: Option<f64>,
    pub converged: bool,
    /// Degrees of the graph on the final positions.
    pub degrees: DegreeStats,
}

impl SimResult {
    pub fn steps(&self) -> usize {
        self.ns_series.len() - 1
    }
}

/// Moves every node up to `reach` meters straight toward its target,
/// snapping onto targets within reach. Returns whether any node is still
/// short of its target afterwards.
pub fn advance(pos: &mut [Position], targets: &[Position], reach: f64) -> bool {
    let mut moving = false;
    for (p, target) in pos.iter_mut().zip(targets) {
        let left = p.distance(target);
        if left <= reach + ARRIVAL_TOL {
            *p = *target;
        } else {
            let f = reach / left;
            *p = Position::new(p.x + (target.x - p.x) * f, p.y + (target.y - p.y) * f);
            moving = true;
        }
    }
    moving
}

/// Straight-line motion at full speed, each step clamped to the remaining
/// distance.
pub fn execute(
    start: &[Position],
    plan: &RecoveryPlan,
    v_max: f64,
    dt: f64,
    d_tr: f64,
    t_max: f64,
) -> Result<SimResult> {
    if !(v_max > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("v_max and dt must be positive"));
    }
    if start.len() != plan.targets.len() {
        return Err(Error::Shape(format!(
            "{} start positions but {} targets",
            start.len(),
            plan.targets.len()
        )));
    }
    let reach = v_max * dt;
    let mut pos = start.to_vec();
    let subnets = |p: &[Position]| count_subnets(&Adjacency::from_positions(p, d_tr));
    let mut ns_series = vec![subnets(&pos)];
    let mut measured = (ns_series[0] == 1).then_some(0.0);
    let mut step = 0usize;
    loop {
        let moving = advance(&mut pos, &plan.targets, reach);
        step += 1;
        let ns = subnets(&pos);
        ns_series.push(ns);
        if ns == 1 && measured.is_none() {
            measured = Some(step as f64 * dt);
        }
        if !moving {
            break;
        }
    }
    let converged = measured.is_some_and(|t| t <= t_max + ARRIVAL_TOL);
    Ok(SimResult {
        ns_series,
        dt,
        measured_t_rc: measured,
        converged,
        degrees: degree_stats(&Adjacency::from_positions(&pos, d_tr)),
    })
}

/// On-disk simulation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFile {
    pub version: u32,
    pub plan_ref: String,
    #[serde(rename = "planned_T_rc_s")]
    pub planned_t_rc_s: f64,
    #[serde(rename = "T_max_s")]
    pub t_max_s: f64,
    #[serde(flatten)]
    pub result: SimResult,
}

impl SimFile {
    pub fn new(plan_ref: impl Into<String>, plan: &RecoveryPlan, t_max: f64, result: SimResult) -> Self {
        Self {
            version: FORMAT_VERSION,
            plan_ref: plan_ref.into(),
            planned_t_rc_s: plan.planned_t_rc,
            t_max_s: t_max,
            result,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: SimFile = io::read_json(path)?;
        io::check_version("simulation", file.version)?;
        Ok(file)
    }
}
