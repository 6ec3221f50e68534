//! Swarm geometry: node positions, the deterministic disk link model and
//! random swarm generation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{count_subnets, Adjacency};
use crate::io;

/// Every file format carries this version tag.
pub const FORMAT_VERSION: u32 = 1;

/// Resampling budget of [`generate_swarm`].
pub const GENERATION_ATTEMPTS: usize = 1000;

/// Positions written to disk are quantized to this step (meters).
pub const POSITION_QUANTUM: f64 = 1e-6;

/// Link and motion constants shared by planning and simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmParams {
    /// Nodes per km².
    pub density: f64,
    /// Communication range, meters.
    pub d_tr: f64,
    /// Maximum speed, m/s.
    pub v_max: f64,
    /// Simulation step, seconds.
    pub dt: f64,
}

impl Default for SwarmParams {
    fn default() -> Self {
        Self {
            density: 200.0,
            d_tr: 120.0,
            v_max: 10.0,
            dt: 0.1,
        }
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn quantized(self) -> Self {
        Self::new(quantize(self.x), quantize(self.y))
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

fn quantize(v: f64) -> f64 {
    (v / POSITION_QUANTUM).round() * POSITION_QUANTUM
}

/// Centroid of a non-empty point set.
pub fn centroid(points: &[Position]) -> Position {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Position::new(sx / n, sy / n)
}

/// The pre-damage swarm: positions plus the parameters of its link model.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTopology {
    positions: Vec<Position>,
    d_tr: f64,
    side: f64,
}

impl SwarmTopology {
    pub fn new(positions: Vec<Position>, d_tr: f64, side: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("a swarm needs at least two nodes"));
        }
        if !(d_tr > 0.0) || !(side > 0.0) {
            return Err(Error::invalid("d_tr and side must be positive"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite position"));
        }
        Ok(Self {
            positions,
            d_tr,
            side,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn d_tr(&self) -> f64 {
        self.d_tr
    }

    /// Side length of the square deployment area.
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn adjacency(&self) -> Adjacency {
        build_adjacency(&self.positions, self.d_tr)
    }

    pub fn centroid(&self) -> Position {
        centroid(&self.positions)
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            version: FORMAT_VERSION,
            n: self.len(),
            d_tr_m: self.d_tr,
            side_m: self.side,
            positions: self.positions.iter().map(|p| p.quantized()).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, &self.to_file())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: TopologyFile = io::read_json(path)?;
        Self::try_from(file)
    }
}

/// On-disk topology, positions in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub version: u32,
    pub n: usize,
    pub d_tr_m: f64,
    pub side_m: f64,
    pub positions: Vec<Position>,
}

impl TryFrom<TopologyFile> for SwarmTopology {
    type Error = Error;

    fn try_from(file: TopologyFile) -> Result<Self> {
        io::check_version("topology", file.version)?;
        if file.positions.len() != file.n {
            return Err(Error::Format {
                what: "topology",
                detail: format!("n = {} but {} positions", file.n, file.positions.len()),
            });
        }
        SwarmTopology::new(file.positions, file.d_tr_m, file.side_m)
    }
}

/// Side of the square holding `n` nodes at `density` nodes/km², in meters.
pub fn area_side(n: usize, density: f64) -> f64 {
    (n as f64 / density).sqrt() * 1000.0
}

/// Uniform swarm on `[0, D]²` with `D = √(n/ρ)`, resampled until the disk
/// graph is connected. Positions are quantized to [`POSITION_QUANTUM`] so that
/// a saved topology reloads bit-exactly.
pub fn generate_swarm(n: usize, density: f64, d_tr: f64, seed: u64) -> Result<SwarmTopology> {
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    if !(density > 0.0) || !(d_tr > 0.0) {
        return Err(Error::invalid("density and d_tr must be positive"));
    }
    let side = area_side(n, density);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERATION_ATTEMPTS {
        let positions: Vec<Position> = (0..n)
            .map(|_| {
                Position::new(rng.random_range(0.0..side), rng.random_range(0.0..side)).quantized()
            })
            .collect();
        if count_subnets(&build_adjacency(&positions, d_tr)) == 1 {
            return SwarmTopology::new(positions, d_tr, side);
        }
    }
    Err(Error::GenerationFailed {
        n,
        density,
        d_tr,
        attempts: GENERATION_ATTEMPTS,
    })
}

pub fn build_adjacency(positions: &[Position], d_tr: f64) -> Adjacency {
    Adjacency::from_positions(positions, d_tr)
}

/// Maximum link distance from the Friis budget `P0·Gtx·Grx·(λc/4πd)² = τ`
/// with unit small-scale fading.
pub fn friis_range(p0: f64, g_tx: f64, g_rx: f64, wavelength: f64, sensitivity: f64) -> Result<f64> {
    let inputs = [p0, g_tx, g_rx, wavelength, sensitivity];
    if inputs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("Friis inputs must be positive and finite"));
    }
    Ok(wavelength / (4.0 * std::f64::consts::PI) * (p0 * g_tx * g_rx / sensitivity).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_side_at_default_density() {
        assert!((area_side(200, 200.0) - 1000.0).abs() < 1e-9);
        assert!((area_side(50, 200.0) - 500.0).abs() < 1e-9);
    }

    #[test]
    fn two_node_swarm_is_connected() {
        let t = generate_swarm(2, 200.0, 120.0, 3).unwrap();
        assert_eq!(t.adjacency().edge_count(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_swarm(50, 200.0, 120.0, 7).unwrap();
        let b = generate_swarm(50, 200.0, 120.0, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_swarm(50, 200.0, 120.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_positions_lie_in_area() {
        let t = generate_swarm(100, 200.0, 120.0, 11).unwrap();
        assert!(t
            .positions()
            .iter()
            .all(|p| (0.0..=t.side()).contains(&p.x) && (0.0..=t.side()).contains(&p.y)));
    }

    #[test]
    fn infeasible_density_fails_explicitly() {
        // 30 nodes over 30 km² with 10 m range never connect
        let err = generate_swarm(30, 1.0, 10.0, 1).unwrap_err();
        assert!(matches!(err, Error::GenerationFailed { attempts: 1000, .. }));
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(generate_swarm(1, 200.0, 120.0, 0).is_err());
        assert!(generate_swarm(5, 0.0, 120.0, 0).is_err());
        assert!(generate_swarm(5, 200.0, -1.0, 0).is_err());
    }

    #[test]
    fn friis_identities() {
        let lambda = 0.125;
        let base = friis_range(2.0, 1.5, 1.5, lambda, 4.5).unwrap();
        assert!((base - lambda / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        let quad = friis_range(8.0, 1.5, 1.5, lambda, 4.5).unwrap();
        assert!((quad / base - 2.0).abs() < 1e-12);
        assert!(friis_range(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(friis_range(1.0, 1.0, 1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn friis_matches_configured_range() {
        // closed form inverted by hand: (4π·120/0.125)² ≈ 1.4555e8
        let d = friis_range(1.456e8, 1.0, 1.0, 0.125, 1.0).unwrap();
        assert!((d - 120.0).abs() < 0.05, "{d}");
    }

    #[test]
    fn topology_file_round_trip_is_exact() {
        let t = generate_swarm(20, 200.0, 120.0, 5).unwrap();
        let back = SwarmTopology::try_from(t.to_file()).unwrap();
        assert_eq!(t, back);
        let text = serde_json::to_string(&t.to_file()).unwrap();
        assert!(text.starts_with("{\"version\":1,\"n\":20,"));
    }
}
