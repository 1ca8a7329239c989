//! Capped folded concave functions and their proximal operators.
//!
//! A capped function here is continuous, increasing and concave on [0, ∞),
//! vanishes at 0, and saturates at 1 for arguments at or above a threshold
//! `nu`. Two members are provided: a capped absolute value (`CapL1`) and a
//! capped logarithm (`CapLog`). The scalar proximal operator is solved by
//! exact candidate enumeration; the matrix-block operator reduces to it
//! through the Frobenius norm.

use crate::error::{FlgsrError, Result};
use crate::linalg;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Which member of the capped family is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    CapL1,
    CapLog,
}

/// A capped folded concave function with threshold `nu`.
///
/// `theta` is the shape parameter of the logarithmic member and is ignored
/// by `CapL1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CappedPhi {
    pub kind: PhiKind,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_nu() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    0.1
}

impl Default for CappedPhi {
    fn default() -> Self {
        CappedPhi::cap_log(default_nu(), default_theta())
    }
}

impl CappedPhi {
    pub fn cap_l1(nu: f64) -> Self {
        CappedPhi {
            kind: PhiKind::CapL1,
            nu,
            theta: default_theta(),
        }
    }

    pub fn cap_log(nu: f64, theta: f64) -> Self {
        CappedPhi {
            kind: PhiKind::CapLog,
            nu,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(FlgsrError::domain(format!("nu must be positive, got {}", self.nu)));
        }
        if self.kind == PhiKind::CapLog && !(self.theta > 0.0) {
            return Err(FlgsrError::domain(format!(
                "theta must be positive for cap_log, got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// Normalizer log(1 + nu/theta) of the logarithmic member.
    fn log_scale(&self) -> f64 {
        (1.0 + self.nu / self.theta).ln()
    }

    /// Evaluate the function at `t >= 0`. Values lie in [0, 1].
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(FlgsrError::domain(format!("phi argument must be >= 0, got {t}")));
        }
        let v = match self.kind {
            PhiKind::CapL1 => t / self.nu,
            PhiKind::CapLog => (1.0 + t / self.theta).ln() / self.log_scale(),
        };
        Ok(v.min(1.0))
    }

    /// Left derivative at the cap threshold, strictly positive by construction.
    pub fn left_derivative_at_nu(&self) -> f64 {
        match self.kind {
            PhiKind::CapL1 => 1.0 / self.nu,
            PhiKind::CapLog => 1.0 / ((self.theta + self.nu) * self.log_scale()),
        }
    }

    /// Derivative on the smooth branch; zero on the capped region t >= nu.
    pub fn derivative(&self, t: f64) -> f64 {
        if t >= self.nu {
            return 0.0;
        }
        match self.kind {
            PhiKind::CapL1 => 1.0 / self.nu,
            PhiKind::CapLog => 1.0 / ((self.theta + t) * self.log_scale()),
        }
    }

    /// Right derivative at zero, used for subgradient bounds on zero groups.
    pub fn derivative_at_zero(&self) -> f64 {
        match self.kind {
            PhiKind::CapL1 => 1.0 / self.nu,
            PhiKind::CapLog => 1.0 / (self.theta * self.log_scale()),
        }
    }

    /// Global minimizer of x ↦ lambda·phi(x) + (x − z)²/2 over x >= 0.
    ///
    /// The minimum is attained at one of finitely many candidates: 0, z
    /// (constant region, when z >= nu), nu, or a stationary point of the
    /// smooth branch inside (0, nu). Ties within 1e-12 resolve to the
    /// smaller candidate, which favours group sparsity.
    pub fn scalar_prox(&self, lambda: f64, z: f64) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(FlgsrError::domain(format!("prox weight must be positive, got {lambda}")));
        }
        if z < 0.0 || !z.is_finite() {
            return Err(FlgsrError::domain(format!("prox point must be >= 0, got {z}")));
        }

        let obj = |x: f64| -> f64 {
            let d = x - z;
            lambda * self.eval(x).expect("candidate is nonnegative") + 0.5 * d * d
        };

        let mut candidates: Vec<f64> = vec![0.0, self.nu];
        if z >= self.nu {
            candidates.push(z);
        }
        match self.kind {
            PhiKind::CapL1 => {
                let x = z - lambda / self.nu;
                if x > 0.0 && x < self.nu {
                    candidates.push(x);
                }
            }
            PhiKind::CapLog => {
                // (x + theta)(x - z) + lambda / log(1 + nu/theta) = 0
                let b = self.theta - z;
                let c = lambda / self.log_scale() - self.theta * z;
                let disc = b * b - 4.0 * c;
                if disc >= 0.0 {
                    let root = disc.sqrt();
                    for x in [(-b - root) / 2.0, (-b + root) / 2.0] {
                        if x > 0.0 && x < self.nu {
                            candidates.push(x);
                        }
                    }
                }
            }
        }

        let mut best_x = 0.0;
        let mut best_obj = f64::INFINITY;
        for &x in &candidates {
            let v = obj(x);
            if v < best_obj - 1e-12 || (v <= best_obj + 1e-12 && x < best_x) {
                if v < best_obj {
                    best_obj = v;
                }
                best_x = x;
            }
        }
        Ok(best_x)
    }

    /// Block proximal operator: prox of lambda·phi(‖·‖_F) at Z.
    ///
    /// Returns `scalar_prox(lambda, ‖Z‖_F) · Z / ‖Z‖_F`, or zero for Z = 0.
    pub fn block_prox(&self, lambda: f64, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        let norm = linalg::fro_norm(z);
        if norm == 0.0 {
            return Ok(Array2::zeros(z.raw_dim()));
        }
        let psi = self.scalar_prox(lambda, norm)?;
        let scale = psi / norm;
        Ok(z.mapv(|v| v * scale))
    }
}
