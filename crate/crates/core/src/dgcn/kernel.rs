//! The bipartite graph convolution kernel `I − εL` and its fixed-point flow.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::mbda::{MDag, MDagSequence};

/// Sparse symmetric `KN × KN` matrix `I − εL̇` in CSR form. Block `k` is the
/// kernel of branch `k`; blocks never interact.
#[derive(Debug, Clone, PartialEq)]
pub struct GcoKernel {
    block: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GcoKernel {
    /// Batched kernel over all branches of `seq`.
    pub fn from_sequence(seq: &MDagSequence, epsilon: f64) -> Self {
        Self::from_mdags(seq.mdags(), epsilon)
    }

    /// Kernel of a single branch.
    pub fn from_mdag(m: &MDag, epsilon: f64) -> Self {
        Self::from_mdags(std::slice::from_ref(m), epsilon)
    }

    fn from_mdags(mdags: &[MDag], epsilon: f64) -> Self {
        let block = mdags.first().map_or(0, MDag::n);
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (b, m) in mdags.iter().enumerate() {
            assert_eq!(m.n(), block, "branches must share the node count");
            let offset = b * block;
            let n_r = m.n_r();
            let mut destroyed_rows: Vec<Vec<usize>> = vec![Vec::new(); m.n_d()];
            for i in 0..n_r {
                for &j in m.row(i) {
                    destroyed_rows[j].push(i);
                }
            }
            for i in 0..block {
                // off-diagonal columns in ascending order around the diagonal
                let (below, above): (Vec<usize>, Vec<usize>) = if i < n_r {
                    (Vec::new(), m.row(i).iter().map(|&j| n_r + j).collect())
                } else {
                    (destroyed_rows[i - n_r].clone(), Vec::new())
                };
                let degree = below.len() + above.len();
                for &c in &below {
                    cols.push(offset + c);
                    vals.push(epsilon);
                }
                cols.push(offset + i);
                vals.push(1.0 - epsilon * degree as f64);
                for &c in &above {
                    cols.push(offset + c);
                    vals.push(epsilon);
                }
                row_ptr.push(cols.len());
            }
        }
        Self {
            block,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Side of the square matrix.
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Node count `N` of one branch block.
    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }

    /// `kernel · x`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.dim(), "kernel/feature row mismatch");
        let d = x.ncols();
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.dim() * d];
        for (r, dst) in out.chunks_exact_mut(d.max(1)).enumerate().take(self.dim()) {
            for (c, v) in self.row(r) {
                let from = &src[c * d..(c + 1) * d];
                for (o, s) in dst.iter_mut().zip(from) {
                    *o += v * s;
                }
            }
        }
        Array2::from_shape_vec((self.dim(), d), out).expect("shape")
    }
}

/// One layer's linear part: `(I − εL)·X·W`.
pub fn gco_apply(kernel: &GcoKernel, x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.nrows() != kernel.dim() || x.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "kernel {0}×{0}, features {1}×{2}, weights {3}×{4}",
            kernel.dim(),
            x.nrows(),
            x.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(kernel.apply(x).dot(&w))
}

/// `X ← (I − εL)X` repeated `steps` times.
pub fn kernel_flow(kernel: &GcoKernel, x: ArrayView2<'_, f64>, steps: usize) -> Array2<f64> {
    let mut current = x.to_owned();
    for _ in 0..steps {
        current = kernel.apply(current.view());
    }
    current
}

/// Branch-`k` (1-based) flow on `x` with the given step size.
pub fn branch_flow(
    seq: &MDagSequence,
    k: usize,
    x: ArrayView2<'_, f64>,
    steps: usize,
    epsilon: f64,
) -> Result<Array2<f64>> {
    let m = seq
        .mdags()
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::invalid(format!("branch {k} out of 1..={}", seq.branches())))?;
    Ok(kernel_flow(&GcoKernel::from_mdag(m, epsilon), x, steps))
}

/// True iff `0 < ε ≤ 1/‖A_dag^k‖_∞` for every branch.
pub fn epsilon_admissible(seq: &MDagSequence, epsilon: f64) -> bool {
    epsilon > 0.0
        && seq
            .mdags()
            .iter()
            .all(|m| epsilon * m.infinity_norm() as f64 <= 1.0)
}
