//! Dilated graph convolution network over the branch batch: forward and
//! reverse passes, the recovery objective, Adam, pretraining and online
//! solving.

mod adam;
mod kernel;
mod network;
mod objective;
mod params;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use kernel::{branch_flow, epsilon_admissible, gco_apply, kernel_flow, GcoKernel};
pub use network::{backward, forward, normalize, DgcnInput, ForwardTrace, Mode, Normalization};
pub use objective::{
    branch_metrics, loss, per_branch_metrics, BranchMetrics, BranchStructure, LossEvaluation,
    RecoveryObjective,
};
pub use params::{ModelFile, ModelParams, PretrainMeta, WeightMatrix};
pub use train::{
    pretrain, solve, write_curve_csv, BranchSolution, CurveRow, Pretrained, SolutionSet, Trainer,
};

use crate::mbda::DEFAULT_K_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Residual blocks `L`.
    pub blocks: usize,
    /// Hidden width `d_s`.
    pub hidden: usize,
    /// Kernel step; `None` means `1/N`.
    pub epsilon: Option<f64>,
    /// Penalty per extra sub-net in the reported loss, seconds.
    pub lambda: f64,
    /// Surrogate penalty per meter of gap; `None` means `λ/d_tr`.
    pub lambda_g: Option<f64>,
    pub learning_rate: f64,
    pub dropout: f64,
    pub pretrain_iters: usize,
    pub online_iters: usize,
    pub adam: AdamConfig,
    pub k_cap: usize,
    /// Early stop once the relative loss change stays below `early_stop_tol`
    /// for `early_stop_patience` iterations (and a feasible solution exists).
    pub early_stop_tol: f64,
    pub early_stop_patience: usize,
    /// Use `(D + 1)·(x + p_c)` as the output map instead of the inverse of
    /// the input normalization.
    pub paper_literal_upscale: bool,
    /// Dropout stream seed for online iterations.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            blocks: 3,
            hidden: 512,
            epsilon: None,
            lambda: 100.0,
            lambda_g: None,
            learning_rate: 1e-4,
            dropout: 0.1,
            pretrain_iters: 500,
            online_iters: 100,
            adam: AdamConfig::default(),
            k_cap: DEFAULT_K_CAP,
            early_stop_tol: 1e-3,
            early_stop_patience: 10,
            paper_literal_upscale: false,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / n as f64)
    }

    pub fn lambda_g_for(&self, d_tr: f64) -> f64 {
        self.lambda_g.unwrap_or(self.lambda / d_tr)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::invalid(m.to_string()));
        if self.blocks == 0 || self.hidden == 0 {
            return bad("blocks and hidden width must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.epsilon.is_some_and(|e| !(e > 0.0)) {
            return bad("epsilon must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.lambda > 0.0) {
            return bad("learning rate and lambda must be positive");
        }
        Ok(())
    }
}
