//! Small dense linear-algebra helpers: Frobenius norms, a power-iteration
//! top eigenvalue for symmetric PSD matrices, and one-sided Jacobi singular
//! values for diagnostics and tests.

use ndarray::{Array2, ArrayView2};

pub fn fro_norm_sq(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn fro_norm(a: ArrayView2<f64>) -> f64 {
    fro_norm_sq(a).sqrt()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. For a Gram matrix YᵀY this is the squared spectral norm of Y.
pub fn sym_top_eig(g: ArrayView2<f64>) -> f64 {
    let k = g.nrows();
    debug_assert_eq!(k, g.ncols());
    if k == 0 {
        return 0.0;
    }
    if k == 1 {
        return g[[0, 0]].max(0.0);
    }
    // Deterministic start vector with a mild tilt so it is not orthogonal
    // to the top eigenvector of structured inputs.
    let mut v: Vec<f64> = (0..k).map(|j| 1.0 + 1e-3 * j as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut lambda = 0.0;
    let mut w = vec![0.0; k];
    for _ in 0..200 {
        for (i, wi) in w.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..k {
                acc += g[[i, j]] * v[j];
            }
            *wi = acc;
        }
        let new_lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if new_lambda <= f64::MIN_POSITIVE {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(w.iter()) {
            *vi = wi / new_lambda;
        }
        if (new_lambda - lambda).abs() <= 1e-13 * new_lambda {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

/// Singular values in nonincreasing order, by one-sided Jacobi rotations.
///
/// Accurate for the desk-scale matrices used in tests and diagnostics; not
/// intended for very large inputs.
pub fn singular_values(a: ArrayView2<f64>) -> Vec<f64> {
    // Work on the tall orientation so column rotations see m >= n.
    let mut u: Array2<f64> = if a.nrows() >= a.ncols() {
        a.to_owned()
    } else {
        a.t().to_owned()
    };
    let n = u.ncols();
    let eps = 1e-14;

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..u.nrows() {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    app += up * up;
                    aqq += uq * uq;
                    apq += up * uq;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u.nrows() {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..n)
        .map(|j| u.column(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Count of singular values above `tol * sigma_max`.
pub fn numerical_rank(a: ArrayView2<f64>, tol: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&s0) if s0 > 0.0 => sv.iter().filter(|&&s| s > tol * s0).count(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn top_eig_of_diagonal() {
        let g = array![[2.0, 0.0], [0.0, 5.0]];
        assert!((sym_top_eig(g.view()) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn singular_values_of_diag_rect() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let sv = singular_values(a.view());
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_of_outer_product() {
        let u = array![[1.0], [2.0], [-1.0]];
        let v = array![[2.0, 0.5, 1.0, -3.0]];
        let a = u.dot(&v);
        assert_eq!(numerical_rank(a.view(), 1e-9), 1);
    }
}
