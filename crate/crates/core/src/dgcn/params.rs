use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Hyperparams;
use crate::error::{Error, Result};
use crate::io;
use crate::swarm::FORMAT_VERSION;

/// Layer weights in forward order: `W¹` (2×d_s), two `d_s×d_s` matrices per
/// residual block, then `W^Q` (d_s×2). `Q = 2L + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    hidden: usize,
    blocks: usize,
    layers: Vec<Array2<f64>>,
}

impl ModelParams {
    pub fn layer_shapes(hidden: usize, blocks: usize) -> Vec<(usize, usize)> {
        std::iter::once((2, hidden))
            .chain(std::iter::repeat_n((hidden, hidden), 2 * blocks))
            .chain(std::iter::once((hidden, 2)))
            .collect()
    }

    pub fn from_layers(hidden: usize, blocks: usize, layers: Vec<Array2<f64>>) -> Result<Self> {
        if blocks == 0 || hidden == 0 {
            return Err(Error::invalid("need at least one block and one hidden unit"));
        }
        let shapes = Self::layer_shapes(hidden, blocks);
        if layers.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (q, (w, shape)) in layers.iter().zip(&shapes).enumerate() {
            if w.dim() != *shape {
                return Err(Error::Shape(format!(
                    "layer {q}: expected {shape:?}, got {:?}",
                    w.dim()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {q} has non-finite weights")));
            }
        }
        Ok(Self {
            hidden,
            blocks,
            layers,
        })
    }

    /// Uniform in `±√(6/(fan_in + fan_out))` per layer.
    pub fn init(hidden: usize, blocks: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::layer_shapes(hidden, blocks)
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit))
            })
            .collect();
        Self {
            hidden,
            blocks,
            layers,
        }
    }

    pub fn zeros(hidden: usize, blocks: usize) -> Self {
        let layers = Self::layer_shapes(hidden, blocks)
            .into_iter()
            .map(Array2::zeros)
            .collect();
        Self {
            hidden,
            blocks,
            layers,
        }
    }

    pub fn for_hyper(hyper: &Hyperparams, seed: u64) -> Self {
        Self::init(hyper.hidden, hyper.blocks, seed)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Number of convolution layers `Q`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Array2::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

/// Provenance recorded by pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainMeta {
    pub k_policy: String,
    pub k: usize,
    pub n_d: usize,
    pub density: f64,
    pub d_tr_m: f64,
    pub seed: u64,
    pub iterations: usize,
    pub loss_curve: Vec<f64>,
    pub hyper: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub n: usize,
    pub d_s: usize,
    #[serde(rename = "L")]
    pub blocks: usize,
    #[serde(rename = "Q")]
    pub depth: usize,
    pub weights: Vec<WeightMatrix>,
    pub init_seed: u64,
    pub pretrain: Option<PretrainMeta>,
}

impl ModelFile {
    pub fn new(params: &ModelParams, n: usize, init_seed: u64, pretrain: Option<PretrainMeta>) -> Self {
        Self {
            version: FORMAT_VERSION,
            n,
            d_s: params.hidden,
            blocks: params.blocks,
            depth: params.depth(),
            weights: params
                .layers
                .iter()
                .map(|w| WeightMatrix {
                    rows: w.nrows(),
                    cols: w.ncols(),
                    data: w.iter().copied().collect(),
                })
                .collect(),
            init_seed,
            pretrain,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        io::check_version("model", self.version)?;
        if self.depth != 2 * self.blocks + 2 {
            return Err(Error::Format {
                what: "model",
                detail: format!("Q = {} does not equal 2L + 2 with L = {}", self.depth, self.blocks),
            });
        }
        let layers = self
            .weights
            .iter()
            .map(|w| {
                Array2::from_shape_vec((w.rows, w.cols), w.data.clone()).map_err(|e| Error::Format {
                    what: "model",
                    detail: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ModelParams::from_layers(self.d_s, self.blocks, layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path)
    }
}
