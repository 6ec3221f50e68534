//! Forward and reverse passes of the dilated graph convolution network.
//!
//! Layer `q` computes `Z_q = (I − εL̇)·X_q·W_q`. The first layer and both
//! layers of every residual block apply ReLU; each block adds the first
//! layer's activation `X¹` to its output. The final layer applies tanh and
//! the result is mapped back to meters.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::GcoKernel;
use super::ModelParams;
use crate::error::{Error, Result};
use crate::mbda::MDagSequence;

/// Position normalization `(x − p_c)/(D + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: [f64; 2],
    /// Largest distance from a node to the center.
    pub radius: f64,
}

impl Normalization {
    pub fn scale(&self) -> f64 {
        self.radius + 1.0
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        let s = self.scale();
        for mut row in out.rows_mut() {
            row[0] = (row[0] - self.center[0]) / s;
            row[1] = (row[1] - self.center[1]) / s;
        }
        out
    }

    /// Inverse of [`Normalization::apply`]. With `literal` the center is added
    /// before scaling, `(D + 1)·(x + p_c)`, which is not an inverse.
    pub fn upscale(&self, x: ArrayView2<'_, f64>, literal: bool) -> Array2<f64> {
        let mut out = x.to_owned();
        let s = self.scale();
        for mut row in out.rows_mut() {
            if literal {
                row[0] = s * (row[0] + self.center[0]);
                row[1] = s * (row[1] + self.center[1]);
            } else {
                row[0] = s * row[0] + self.center[0];
                row[1] = s * row[1] + self.center[1];
            }
        }
        out
    }
}

/// Center and radius from all `N` positions, plus the normalized features.
pub fn normalize(x: ArrayView2<'_, f64>) -> (Array2<f64>, Normalization) {
    assert_eq!(x.ncols(), 2, "positions are N × 2");
    let n = x.nrows() as f64;
    let center = [x.column(0).sum() / n, x.column(1).sum() / n];
    let radius = x
        .rows()
        .into_iter()
        .map(|r| (r[0] - center[0]).hypot(r[1] - center[1]))
        .fold(0.0, f64::max);
    let norm = Normalization { center, radius };
    (norm.apply(x), norm)
}

/// Everything the network consumes for one damage case, built once.
#[derive(Debug, Clone)]
pub struct DgcnInput {
    kernel: GcoKernel,
    features: Array2<f64>,
    norm: Normalization,
    n: usize,
    branches: usize,
    literal_upscale: bool,
}

impl DgcnInput {
    pub fn new(seq: &MDagSequence, epsilon: f64, literal_upscale: bool) -> Self {
        let (single, norm) = normalize(seq.features().view());
        let views: Vec<_> = (0..seq.branches()).map(|_| single.view()).collect();
        Self {
            kernel: GcoKernel::from_sequence(seq, epsilon),
            features: ndarray::concatenate(Axis(0), &views).expect("equal widths"),
            norm,
            n: seq.n(),
            branches: seq.branches(),
            literal_upscale,
        }
    }

    pub fn kernel(&self) -> &GcoKernel {
        &self.kernel
    }

    /// Normalized, batched `KN × 2` features.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branches(&self) -> usize {
        self.branches
    }
}

pub enum Mode<'a> {
    Eval,
    /// Inverted dropout on the input of every residual block after the first.
    Train {
        dropout: f64,
        rng: &'a mut ChaCha8Rng,
    },
}

/// Intermediates cached by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `(I − εL̇)·X_q`, the smoothed input of each layer.
    smoothed: Vec<Array2<f64>>,
    /// Post-activation output of each layer (ReLU, last one tanh).
    activations: Vec<Array2<f64>>,
    /// Scaled keep-masks for the input of block `l`, `None` when unused.
    dropout: Vec<Option<Array2<f64>>>,
    norm: Normalization,
}

impl ForwardTrace {
    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn dropout_masks(&self) -> &[Option<Array2<f64>>] {
        &self.dropout
    }
}

fn relu_in_place(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

fn check_shapes(params: &ModelParams, input: &DgcnInput) -> Result<()> {
    if params.layers().first().map(|w| w.nrows()) != Some(2) {
        return Err(Error::Shape("first layer must take 2 input features".into()));
    }
    if input.features.nrows() != input.kernel.dim() {
        return Err(Error::Shape("features do not match kernel".into()));
    }
    Ok(())
}

/// Returns the `KN × 2` output in meters and the trace.
pub fn forward(params: &ModelParams, input: &DgcnInput, mode: Mode<'_>) -> Result<(Array2<f64>, ForwardTrace)> {
    check_shapes(params, input)?;
    let kernel = &input.kernel;
    let layers = params.layers();
    let q_last = layers.len() - 1;
    let (dropout, mut rng) = match mode {
        Mode::Eval => (0.0, None),
        Mode::Train { dropout, rng } => (dropout, Some(rng)),
    };

    let mut smoothed = Vec::with_capacity(layers.len());
    let mut activations = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(params.blocks());

    let s0 = kernel.apply(input.features.view());
    let mut first = s0.dot(&layers[0]);
    relu_in_place(&mut first);
    smoothed.push(s0);

    let mut block_input = first.clone();
    activations.push(first);
    for l in 0..params.blocks() {
        if l > 0 && dropout > 0.0 {
            let rng = rng.as_deref_mut().expect("train mode carries an rng");
            let keep = 1.0 - dropout;
            let mask = Array2::from_shape_simple_fn(block_input.raw_dim(), || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            block_input *= &mask;
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
        let s_a = kernel.apply(block_input.view());
        let mut a = s_a.dot(&layers[1 + 2 * l]);
        relu_in_place(&mut a);
        let s_b = kernel.apply(a.view());
        let mut c = s_b.dot(&layers[2 + 2 * l]);
        relu_in_place(&mut c);
        block_input = &c + &activations[0];
        smoothed.push(s_a);
        activations.push(a);
        smoothed.push(s_b);
        activations.push(c);
    }

    let s_q = kernel.apply(block_input.view());
    let mut t = s_q.dot(&layers[q_last]);
    t.mapv_inplace(f64::tanh);
    smoothed.push(s_q);
    let output = input.norm.upscale(t.view(), input.literal_upscale);
    activations.push(t);

    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iteration: 0,
            detail: "non-finite network output".into(),
        });
    }
    Ok((
        output,
        ForwardTrace {
            smoothed,
            activations,
            dropout: masks,
            norm: input.norm,
        },
    ))
}

/// Gradients of all weights given `d_output = ∂loss/∂output` (meters).
pub fn backward(
    trace: &ForwardTrace,
    params: &ModelParams,
    input: &DgcnInput,
    d_output: ArrayView2<'_, f64>,
) -> Result<Vec<Array2<f64>>> {
    let layers = params.layers();
    let depth = layers.len();
    if trace.smoothed.len() != depth || trace.activations.len() != depth {
        return Err(Error::Shape("trace does not belong to these parameters".into()));
    }
    let kernel = &input.kernel;
    let q_last = depth - 1;
    if d_output.dim() != trace.activations[q_last].dim() {
        return Err(Error::Shape("output gradient shape mismatch".into()));
    }
    let mut grads: Vec<Array2<f64>> = layers.iter().map(|w| Array2::zeros(w.raw_dim())).collect();

    // upscale and tanh
    let s = trace.norm.scale();
    let mut dz = d_output.to_owned();
    Zip::from(&mut dz)
        .and(&trace.activations[q_last])
        .for_each(|g, &t| *g *= s * (1.0 - t * t));
    grads[q_last] = trace.smoothed[q_last].t().dot(&dz);
    // kernel is symmetric, so its transpose is itself
    let mut d_block_out = kernel.apply(dz.dot(&layers[q_last].t()).view());

    let mut d_first = Array2::<f64>::zeros(trace.activations[0].raw_dim());
    for l in (0..params.blocks()).rev() {
        let (qa, qb) = (1 + 2 * l, 2 + 2 * l);
        d_first += &d_block_out;

        let mut dzb = d_block_out;
        Zip::from(&mut dzb)
            .and(&trace.activations[qb])
            .for_each(|g, &c| {
                if c <= 0.0 {
                    *g = 0.0
                }
            });
        grads[qb] = trace.smoothed[qb].t().dot(&dzb);
        let mut dza = kernel.apply(dzb.dot(&layers[qb].t()).view());
        Zip::from(&mut dza)
            .and(&trace.activations[qa])
            .for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
        grads[qa] = trace.smoothed[qa].t().dot(&dza);
        let mut d_in = kernel.apply(dza.dot(&layers[qa].t()).view());
        if let Some(mask) = &trace.dropout[l] {
            d_in *= mask;
        }
        if l == 0 {
            d_first += &d_in;
            d_block_out = Array2::zeros((0, 0));
        } else {
            d_block_out = d_in;
        }
    }

    Zip::from(&mut d_first)
        .and(&trace.activations[0])
        .for_each(|g, &h| {
            if h <= 0.0 {
                *g = 0.0
            }
        });
    grads[0] = trace.smoothed[0].t().dot(&d_first);

    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Divergence {
            iteration: 0,
            detail: "non-finite gradient".into(),
        });
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn coincident_nodes_normalize_to_zero() {
        let x = Array2::from_elem((4, 2), 7.0);
        let (xn, norm) = normalize(x.view());
        assert_eq!(norm.radius, 0.0);
        assert!(xn.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_node_normalization() {
        let (xn, norm) = normalize(array![[0.0, 0.0], [2.0, 0.0]].view());
        assert_eq!(norm.center, [1.0, 0.0]);
        assert_eq!(norm.radius, 1.0);
        assert_eq!(xn, array![[-0.5, 0.0], [0.5, 0.0]]);
    }

    #[test]
    fn upscale_inverts_normalize() {
        let x = array![[12.5, -3.0], [400.0, 88.25], [-7.0, 1e3], [0.1, 0.2]];
        let (xn, norm) = normalize(x.view());
        assert!(xn.rows().into_iter().all(|r| r[0].hypot(r[1]) < 1.0));
        let back = norm.upscale(xn.view(), false);
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        let literal = norm.upscale(xn.view(), true);
        assert!((literal[[0, 0]] - back[[0, 0]]).abs() > 1.0);
    }
}
