//! Target selection for the survivors: the learned planner, the centering
//! baseline and the feasibility gate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgcn::{solve, Hyperparams, ModelParams, SolutionSet};
use crate::error::{Error, Result};
use crate::graph::{count_subnets, diameter_hops, Adjacency};
use crate::io;
use crate::mbda::{build_sequence, choose_k};
use crate::scenario::{build_input_graph, DamageScenario};
use crate::swarm::{Position, SwarmParams, SwarmTopology, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MlDagl,
    Centering,
    FallbackCentroid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MlDagl => "ml-dagl",
            Method::Centering => "centering",
            Method::FallbackCentroid => "fallback-centroid",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml-dagl" => Ok(Method::MlDagl),
            "centering" => Ok(Method::Centering),
            "fallback-centroid" => Ok(Method::FallbackCentroid),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Where every survivor flies, in remaining-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryPlan {
    pub targets: Vec<Position>,
    /// Longest flight at full speed, seconds.
    pub planned_t_rc: f64,
    pub method: Method,
    /// Selected branch (1-based) for learned plans.
    pub k_star: Option<usize>,
    /// Online iterations spent by the learned planner.
    pub iterations: usize,
}

impl RecoveryPlan {
    /// Plan whose `planned_t_rc` is the flight time from `start`.
    pub fn new(start: &[Position], targets: Vec<Position>, v_max: f64, method: Method, k_star: Option<usize>) -> Self {
        let planned_t_rc = flight_time(start, &targets, v_max);
        Self {
            targets,
            planned_t_rc,
            method,
            k_star,
            iterations: 0,
        }
    }

    pub fn to_file(&self, scenario_ref: impl Into<String>) -> PlanFile {
        PlanFile {
            version: FORMAT_VERSION,
            scenario_ref: scenario_ref.into(),
            method: self.method,
            k_star: self.k_star,
            targets: self.targets.clone(),
            planned_t_rc_s: self.planned_t_rc,
        }
    }
}

/// On-disk plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub version: u32,
    pub scenario_ref: String,
    pub method: Method,
    pub k_star: Option<usize>,
    pub targets: Vec<Position>,
    #[serde(rename = "planned_T_rc_s")]
    pub planned_t_rc_s: f64,
}

impl PlanFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: PlanFile = io::read_json(path)?;
        io::check_version("plan", file.version)?;
        Ok(file)
    }

    pub fn plan(&self) -> RecoveryPlan {
        RecoveryPlan {
            targets: self.targets.clone(),
            planned_t_rc: self.planned_t_rc_s,
            method: self.method,
            k_star: self.k_star,
            iterations: 0,
        }
    }
}

/// `max_r ‖target_r − start_r‖ / v_max`.
pub fn flight_time(start: &[Position], targets: &[Position], v_max: f64) -> f64 {
    start
        .iter()
        .zip(targets)
        .map(|(a, b)| a.distance(b) / v_max)
        .fold(0.0, f64::max)
}

/// Every survivor flies to the centroid of the full pre-damage swarm.
pub fn plan_centering(topology: &SwarmTopology, scenario: &DamageScenario, v_max: f64) -> RecoveryPlan {
    let start = scenario.remaining_positions(topology);
    let center = topology.centroid();
    let targets = vec![center; start.len()];
    RecoveryPlan::new(&start, targets, v_max, Method::Centering, None)
}

/// Learned plan, falling back to the centroid plan when no branch reconnects
/// the survivors or the best branch is slower than the centroid. Never fails for a well-formed scenario unless the network
/// setup itself is invalid.
pub fn plan_mldagl(
    topology: &SwarmTopology,
    scenario: &DamageScenario,
    params: &ModelParams,
    hyper: &Hyperparams,
    swarm: &SwarmParams,
) -> Result<RecoveryPlan> {
    let (plan, _) = plan_mldagl_with_solution(topology, scenario, params, hyper, swarm)?;
    Ok(plan)
}

/// As [`plan_mldagl`], also returning the full branch set and loss curve.
pub fn plan_mldagl_with_solution(
    topology: &SwarmTopology,
    scenario: &DamageScenario,
    params: &ModelParams,
    hyper: &Hyperparams,
    swarm: &SwarmParams,
) -> Result<(RecoveryPlan, SolutionSet)> {
    let start = scenario.remaining_positions(topology);
    let input = build_input_graph(topology, scenario);
    let k = choose_k(diameter_hops(&topology.adjacency())?, hyper.k_cap);
    let seq = build_sequence(&input, k)?;
    let solution = solve(&input, &seq, params, hyper, swarm)?;

    let mut fallback = plan_centering(topology, scenario, swarm.v_max);
    fallback.method = Method::FallbackCentroid;
    let learned = solution.feasible.then(|| {
        let t = solution.remaining_targets(scenario.n_r());
        let targets = t.rows().into_iter().map(|r| Position::new(r[0], r[1])).collect();
        RecoveryPlan::new(&start, targets, swarm.v_max, Method::MlDagl, Some(solution.k_star))
    });
    // the centroid plan bounds every plan worth keeping
    let mut plan = match learned {
        Some(p) if verify_plan(&p, swarm.d_tr) && p.planned_t_rc <= fallback.planned_t_rc => p,
        _ => fallback,
    };
    plan.iterations = solution.iterations;
    Ok((plan, solution))
}

/// Whether the survivors are connected once at their targets.
pub fn verify_plan(plan: &RecoveryPlan, d_tr: f64) -> bool {
    !plan.targets.is_empty() && count_subnets(&Adjacency::from_positions(&plan.targets, d_tr)) == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (SwarmTopology, DamageScenario) {
        let pts = vec![
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            Position::new(0.0, 100.0),
            Position::new(100.0, 100.0),
        ];
        (
            SwarmTopology::new(pts, 120.0, 100.0).unwrap(),
            DamageScenario::new(4, [3]).unwrap(),
        )
    }

    #[test]
    fn centering_square_goes_to_center() {
        let (t, s) = square();
        let plan = plan_centering(&t, &s, 10.0);
        assert!(plan.targets.iter().all(|p| *p == Position::new(50.0, 50.0)));
        let half_diag = 50.0 * std::f64::consts::SQRT_2;
        assert!((plan.planned_t_rc - half_diag / 10.0).abs() < 1e-12);
        assert!(verify_plan(&plan, 120.0));
    }

    #[test]
    fn identity_plan_on_split_survivors_fails_gate() {
        let pts = vec![
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            Position::new(200.0, 0.0),
        ];
        let t = SwarmTopology::new(pts, 120.0, 200.0).unwrap();
        let s = DamageScenario::new(3, [1]).unwrap();
        let start = s.remaining_positions(&t);
        let plan = RecoveryPlan::new(&start, start.clone(), 10.0, Method::MlDagl, Some(1));
        assert_eq!(plan.planned_t_rc, 0.0);
        assert!(!verify_plan(&plan, 120.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::MlDagl, Method::Centering, Method::FallbackCentroid] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
    }

    #[test]
    fn plan_file_renames_time() {
        let (t, s) = square();
        let text = serde_json::to_string(&plan_centering(&t, &s, 10.0).to_file("s.json")).unwrap();
        assert!(text.contains("\"planned_T_rc_s\""));
        assert!(text.contains("\"method\":\"centering\""));
    }
}
