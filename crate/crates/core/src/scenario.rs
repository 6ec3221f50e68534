//! Damage events and the remaining-first input graph consumed by the planner.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{count_subnets, Adjacency};
use crate::io;
use crate::swarm::{Position, SwarmTopology, FORMAT_VERSION};

/// Resampling budget when a network split is required.
pub const CNS_ATTEMPTS: usize = 10_000;

/// Destroyed and surviving node indices (0-based, ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DamageScenario {
    n: usize,
    destroyed: Vec<usize>,
    remaining: Vec<usize>,
}

impl DamageScenario {
    pub fn new(n: usize, destroyed: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut hit = vec![false; n];
        for d in destroyed {
            if d >= n {
                return Err(Error::invalid(format!("destroyed index {d} out of range")));
            }
            if std::mem::replace(&mut hit[d], true) {
                return Err(Error::invalid(format!("destroyed index {d} repeated")));
            }
        }
        let destroyed: Vec<usize> = (0..n).filter(|&i| hit[i]).collect();
        let remaining: Vec<usize> = (0..n).filter(|&i| !hit[i]).collect();
        if destroyed.is_empty() || remaining.is_empty() {
            return Err(Error::invalid(
                "a scenario needs at least one destroyed and one surviving node",
            ));
        }
        Ok(Self {
            n,
            destroyed,
            remaining,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn destroyed(&self) -> &[usize] {
        &self.destroyed
    }

    pub fn remaining(&self) -> &[usize] {
        &self.remaining
    }

    pub fn n_d(&self) -> usize {
        self.destroyed.len()
    }

    pub fn n_r(&self) -> usize {
        self.remaining.len()
    }

    /// Surviving positions in remaining-index order.
    pub fn remaining_positions(&self, topology: &SwarmTopology) -> Vec<Position> {
        self.remaining
            .iter()
            .map(|&i| topology.positions()[i])
            .collect()
    }

    pub fn to_file(&self, topology_ref: impl Into<String>) -> ScenarioFile {
        ScenarioFile {
            version: FORMAT_VERSION,
            topology_ref: topology_ref.into(),
            destroyed: self.destroyed.iter().map(|&d| d + 1).collect(),
        }
    }

    pub fn from_file(file: &ScenarioFile, n: usize) -> Result<Self> {
        io::check_version("scenario", file.version)?;
        if file.destroyed.contains(&0) {
            return Err(Error::Format {
                what: "scenario",
                detail: "indices are 1-based".into(),
            });
        }
        Self::new(n, file.destroyed.iter().map(|&d| d - 1))
    }
}

/// On-disk scenario; `destroyed` holds 1-based node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub topology_ref: String,
    pub destroyed: Vec<usize>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Destroys a uniform random `n_d`-subset. With `require_cns` the draw is
/// repeated until the surviving graph is split.
pub fn apply_damage(
    topology: &SwarmTopology,
    n_d: usize,
    seed: u64,
    require_cns: bool,
) -> Result<DamageScenario> {
    let n = topology.len();
    if n_d == 0 || n_d >= n {
        return Err(Error::invalid(format!("n_d must lie in 1..={}", n - 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        DamageScenario::new(n, rand::seq::index::sample(rng, n, n_d).into_iter())
    };
    if !require_cns {
        return draw(&mut rng);
    }
    // a single survivor is always connected; fail without burning the budget
    if n - n_d >= 2 {
        let adjacency = topology.adjacency();
        for _ in 0..CNS_ATTEMPTS {
            let scenario = draw(&mut rng)?;
            if count_subnets(&remaining_adjacency_of(&adjacency, &scenario)) >= 2 {
                return Ok(scenario);
            }
        }
    }
    Err(Error::CnsUnobtainable {
        n,
        n_d,
        attempts: CNS_ATTEMPTS,
    })
}

/// Subgraph of the pre-damage links induced on the survivors.
pub fn remaining_adjacency(topology: &SwarmTopology, scenario: &DamageScenario) -> Adjacency {
    remaining_adjacency_of(&topology.adjacency(), scenario)
}

fn remaining_adjacency_of(adjacency: &Adjacency, scenario: &DamageScenario) -> Adjacency {
    adjacency.induced(scenario.remaining())
}

/// Pre-damage graph re-indexed remaining-first: `[r_1..r_{N_R}, d_1..d_{N_D}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGraph {
    order: Vec<usize>,
    features: Array2<f64>,
    adjacency: Adjacency,
    n_r: usize,
    n_d: usize,
}

impl InputGraph {
    /// `order[t]` is the original index at input position `t`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `N × 2` positions in meters, rows in input order.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    /// Input position of each original index.
    pub fn inverse_order(&self) -> Vec<usize> {
        let mut inv = vec![0; self.order.len()];
        for (t, &v) in self.order.iter().enumerate() {
            inv[v] = t;
        }
        inv
    }

    /// Surviving start positions as an `N_R × 2` matrix.
    pub fn remaining_features(&self) -> Array2<f64> {
        self.features
            .slice(ndarray::s![..self.n_r, ..])
            .to_owned()
    }
}

pub fn build_input_graph(topology: &SwarmTopology, scenario: &DamageScenario) -> InputGraph {
    let order: Vec<usize> = scenario
        .remaining()
        .iter()
        .chain(scenario.destroyed())
        .copied()
        .collect();
    let positions = topology.positions();
    let mut features = Array2::zeros((order.len(), 2));
    for (t, &v) in order.iter().enumerate() {
        features[[t, 0]] = positions[v].x;
        features[[t, 1]] = positions[v].y;
    }
    InputGraph {
        adjacency: topology.adjacency().permuted(&order),
        features,
        n_r: scenario.n_r(),
        n_d: scenario.n_d(),
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm::generate_swarm;

    fn line(n: usize, spacing: f64) -> SwarmTopology {
        let positions = (0..n)
            .map(|i| Position::new(i as f64 * spacing, 0.0))
            .collect();
        SwarmTopology::new(positions, 120.0, 1000.0).unwrap()
    }

    #[test]
    fn cut_vertex_and_leaf_damage() {
        let t = line(3, 100.0);
        let cut = DamageScenario::new(3, [1]).unwrap();
        assert_eq!(count_subnets(&remaining_adjacency(&t, &cut)), 2);
        let leaf = DamageScenario::new(3, [2]).unwrap();
        assert_eq!(count_subnets(&remaining_adjacency(&t, &leaf)), 1);
    }

    #[test]
    fn input_order_puts_survivors_first() {
        let t = line(3, 100.0);
        let s = DamageScenario::new(3, [1]).unwrap();
        let g = build_input_graph(&t, &s);
        assert_eq!(g.order(), &[0, 2, 1]);
        assert_eq!(g.features()[[1, 0]], 200.0);
        assert_eq!((g.n_r(), g.n_d()), (2, 1));
    }

    #[test]
    fn inverse_permutation_recovers_adjacency() {
        let t = generate_swarm(30, 200.0, 120.0, 2).unwrap();
        let s = apply_damage(&t, 12, 9, false).unwrap();
        let g = build_input_graph(&t, &s);
        let inv = g.inverse_order();
        let back = g.adjacency().permuted(&inv);
        assert_eq!(back, t.adjacency());
    }

    #[test]
    fn damage_is_deterministic_and_splits() {
        let t = generate_swarm(200, 200.0, 120.0, 1).unwrap();
        let a = apply_damage(&t, 100, 4, true).unwrap();
        let b = apply_damage(&t, 100, 4, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_d(), 100);
        assert!(count_subnets(&remaining_adjacency(&t, &a)) > 1);
    }

    #[test]
    fn single_survivor_cannot_split() {
        let t = generate_swarm(10, 200.0, 120.0, 1).unwrap();
        assert!(matches!(
            apply_damage(&t, 9, 0, true),
            Err(Error::CnsUnobtainable { .. })
        ));
        let s = apply_damage(&t, 9, 0, false).unwrap();
        assert_eq!(count_subnets(&remaining_adjacency(&t, &s)), 1);
    }

    #[test]
    fn out_of_range_damage_rejected() {
        let t = line(3, 100.0);
        assert!(apply_damage(&t, 0, 0, false).is_err());
        assert!(apply_damage(&t, 3, 0, false).is_err());
        assert!(DamageScenario::new(3, [3]).is_err());
        assert!(DamageScenario::new(3, [1, 1]).is_err());
    }

    #[test]
    fn scenario_file_is_one_based() {
        let s = DamageScenario::new(5, [0, 3]).unwrap();
        let f = s.to_file("topo.json");
        assert_eq!(f.destroyed, vec![1, 4]);
        assert_eq!(DamageScenario::from_file(&f, 5).unwrap(), s);
        let bad = ScenarioFile {
            destroyed: vec![0],
            ..f
        };
        assert!(DamageScenario::from_file(&bad, 5).is_err());
    }
}
