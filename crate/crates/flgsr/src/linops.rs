//! The masked-sampling measurement operator, its adjoint, and the Euclidean
//! projection onto the feasible set { C : ‖A(C) − b‖₂ ≤ σ }.
//!
//! Because the sampling operator restricted to its mask coordinates is the
//! identity, the feasible set is a coordinate-subspace ℓ₂ ball and the
//! projection has a closed form: shrink the observed entries toward the data.

use crate::error::{FlgsrError, Result};
use ndarray::{Array2, ArrayView2};

/// A partial-observation problem: which entries of an m×n matrix are seen,
/// the observed values, and the noise level that defines the feasibility ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingProblem {
    rows: usize,
    cols: usize,
    mask: Vec<(usize, usize)>,
    b: Vec<f64>,
    sigma: f64,
}

impl SamplingProblem {
    /// Builds a problem from observed entries. The mask is stored row-major
    /// sorted; `values` are permuted alongside. Duplicate or out-of-bounds
    /// indices are rejected.
    pub fn new(
        rows: usize,
        cols: usize,
        mask: Vec<(usize, usize)>,
        values: Vec<f64>,
        sigma: f64,
    ) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(FlgsrError::shape(
                format!("{} observed values", mask.len()),
                format!("{}", values.len()),
            ));
        }
        if sigma < 0.0 {
            return Err(FlgsrError::domain(format!("sigma must be >= 0, got {sigma}")));
        }
        let mut pairs: Vec<((usize, usize), f64)> =
            mask.into_iter().zip(values.into_iter()).collect();
        pairs.sort_by_key(|&(idx, _)| idx);
        for window in pairs.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(FlgsrError::domain(format!(
                    "duplicate mask index {:?}",
                    window[0].0
                )));
            }
        }
        if let Some(&((r, c), _)) = pairs.iter().find(|&&((r, c), _)| r >= rows || c >= cols) {
            return Err(FlgsrError::domain(format!(
                "mask index ({r}, {c}) out of bounds for {rows}x{cols}"
            )));
        }
        let (mask, b) = pairs.into_iter().unzip();
        Ok(SamplingProblem {
            rows,
            cols,
            mask,
            b,
            sigma,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn num_observed(&self) -> usize {
        self.mask.len()
    }

    /// Row-major sorted observation indices.
    pub fn mask(&self) -> &[(usize, usize)] {
        &self.mask
    }

    /// Observed values in mask order.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn check_shape(&self, c: ArrayView2<f64>) -> Result<()> {
        if c.nrows() != self.rows || c.ncols() != self.cols {
            return Err(FlgsrError::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        Ok(())
    }

    /// A(C): read C at the mask indices, in mask order.
    pub fn apply(&self, c: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_shape(c)?;
        Ok(self.mask.iter().map(|&(r, col)| c[[r, col]]).collect())
    }

    /// A*(v): scatter v onto the mask positions, zero elsewhere.
    pub fn adjoint(&self, v: &[f64]) -> Result<Array2<f64>> {
        if v.len() != self.mask.len() {
            return Err(FlgsrError::shape(
                format!("vector of length {}", self.mask.len()),
                format!("{}", v.len()),
            ));
        }
        let mut out = Array2::zeros((self.rows, self.cols));
        for (&(r, c), &val) in self.mask.iter().zip(v.iter()) {
            out[[r, c]] = val;
        }
        Ok(out)
    }

    /// The zero-filled observed matrix A*(b).
    pub fn observed_matrix(&self) -> Array2<f64> {
        self.adjoint(&self.b).expect("b has mask length")
    }

    /// ‖A(C) − b‖₂.
    pub fn residual_norm(&self, c: ArrayView2<f64>) -> Result<f64> {
        let v = self.apply(c)?;
        Ok(v.iter()
            .zip(self.b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }

    /// Euclidean projection onto Θ, in place. Masked entries move toward the
    /// data just enough to satisfy ‖A(C) − b‖₂ ≤ σ; unobserved entries are
    /// untouched.
    pub fn project_theta_inplace(&self, z: &mut Array2<f64>) -> Result<()> {
        self.check_shape(z.view())?;
        let mut norm_sq = 0.0;
        for (&(r, c), &bk) in self.mask.iter().zip(self.b.iter()) {
            let d = z[[r, c]] - bk;
            norm_sq += d * d;
        }
        let norm = norm_sq.sqrt();
        if norm <= self.sigma {
            return Ok(());
        }
        let scale = if norm > 0.0 { self.sigma / norm } else { 0.0 };
        for (&(r, c), &bk) in self.mask.iter().zip(self.b.iter()) {
            let d = z[[r, c]] - bk;
            z[[r, c]] = bk + scale * d;
        }
        Ok(())
    }

    /// Euclidean projection onto Θ, returning a new matrix.
    pub fn project_theta(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = z.to_owned();
        self.project_theta_inplace(&mut out)?;
        Ok(out)
    }
}
