use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .layers()
            .iter()
            .map(|w| Array2::zeros(w.raw_dim()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of every layer.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Array2<f64>],
    state: &mut AdamState,
    lr: f64,
    cfg: AdamConfig,
) {
    assert_eq!(grads.len(), params.depth(), "one gradient per layer");
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((w, g), m), v) in params
        .layers_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        Zip::from(w)
            .and(g)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ModelParams::init(3, 1, 4);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        let g: Vec<_> = p.layers().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        adam_step(&mut p, &g, &mut s, 1e-3, AdamConfig::default());
        assert_eq!(p, before);
        assert_eq!(s.timestep(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = ModelParams::zeros(2, 1);
        let mut s = AdamState::new(&p);
        let g: Vec<_> = p
            .layers()
            .iter()
            .map(|w| Array2::from_elem(w.raw_dim(), -0.3))
            .collect();
        adam_step(&mut p, &g, &mut s, 1e-4, AdamConfig::default());
        for w in p.layers() {
            assert!(w.iter().all(|&v| (v - 1e-4).abs() < 1e-10));
        }
    }
}
