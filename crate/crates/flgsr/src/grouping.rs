//! Column partitions of factor matrices and the grouped penalties built on
//! them: group norms, the weighted zero-norm, the capped penalty, and the
//! group support set.

use crate::error::{FlgsrError, Result};
use crate::regularizer::CappedPhi;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};

/// Numerical threshold standing in for "exactly zero" group norms.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// A contiguous partition of `total` columns into groups of sizes n_1..n_s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    sizes: Vec<usize>,
    // offsets[i]..offsets[i+1] is the column range of group i; offsets[s] = total.
    offsets: Vec<usize>,
}

impl GroupPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(FlgsrError::domain("partition needs at least one group"));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(FlgsrError::domain("group sizes must be positive"));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &sizes {
            acc += n;
            offsets.push(acc);
        }
        Ok(GroupPartition { sizes, offsets })
    }

    /// Split `n` columns into `s` contiguous groups of size ⌊n/s⌋, the first
    /// `n mod s` groups one column larger.
    pub fn equal_split(n: usize, s: usize) -> Result<Self> {
        if s == 0 || s > n {
            return Err(FlgsrError::domain(format!(
                "cannot split {n} columns into {s} groups"
            )));
        }
        let base = n / s;
        let rem = n % s;
        let sizes = (0..s).map(|i| if i < rem { base + 1 } else { base }).collect();
        GroupPartition::new(sizes)
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// Standing alias for `GroupPartition::equal_split`.
pub fn make_partition(n: usize, s: usize) -> Result<GroupPartition> {
    GroupPartition::equal_split(n, s)
}

/// A matrix together with a contiguous column partition.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedFactor {
    pub data: Array2<f64>,
    pub partition: GroupPartition,
}

impl GroupedFactor {
    pub fn new(data: Array2<f64>, partition: GroupPartition) -> Result<Self> {
        if data.ncols() != partition.total() {
            return Err(FlgsrError::shape(
                format!("{} columns", partition.total()),
                format!("{} columns", data.ncols()),
            ));
        }
        Ok(GroupedFactor { data, partition })
    }

    pub fn block(&self, i: usize) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., self.partition.range(i)])
    }

    pub fn block_mut(&mut self, i: usize) -> ArrayViewMut2<'_, f64> {
        let r = self.partition.range(i);
        self.data.slice_mut(s![.., r])
    }

    /// Entrywise ℓ_p norm of each column block; p = 2 is the Frobenius norm.
    pub fn group_norms(&self, p: f64) -> Result<Vec<f64>> {
        if !(p > 0.0) {
            return Err(FlgsrError::domain(format!("p must be positive, got {p}")));
        }
        let s = self.partition.num_groups();
        let mut norms = Vec::with_capacity(s);
        for i in 0..s {
            let block = self.block(i);
            let n = if p == 2.0 {
                block.iter().map(|v| v * v).sum::<f64>().sqrt()
            } else {
                block.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
            };
            norms.push(n);
        }
        Ok(norms)
    }

    /// Weighted zero-norm: Σ n_i over groups with ‖X_i‖_p above `zero_tol`.
    pub fn lp0_norm(&self, p: f64, zero_tol: f64) -> Result<usize> {
        let norms = self.group_norms(p)?;
        Ok(norms
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > zero_tol)
            .map(|(i, _)| self.partition.size(i))
            .sum())
    }

    /// Capped penalty Σ n_i · phi(‖X_i‖_p).
    pub fn phi_penalty(&self, phi: &CappedPhi, p: f64) -> Result<f64> {
        let norms = self.group_norms(p)?;
        let mut acc = 0.0;
        for (i, &n) in norms.iter().enumerate() {
            acc += self.partition.size(i) as f64 * phi.eval(n)?;
        }
        Ok(acc)
    }

    /// Indices of groups with ‖X_i‖_p above `zero_tol`.
    pub fn group_support(&self, p: f64, zero_tol: f64) -> Result<Vec<usize>> {
        let norms = self.group_norms(p)?;
        Ok(norms
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > zero_tol)
            .map(|(i, _)| i)
            .collect())
    }
}
