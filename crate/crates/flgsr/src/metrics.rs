//! Recovery quality metrics: PSNR, single-scale SSIM, and relative error.

use crate::error::{FlgsrError, Result};
use crate::linalg;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// SSIM window width (11×11) and Gaussian standard deviation.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
/// SSIM stabilizers for peak 1: C1 = (0.01·peak)², C2 = (0.03·peak)².
const SSIM_C1: f64 = 1e-4;
const SSIM_C2: f64 = 9e-4;

/// Per-run quality summary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub rel_err: f64,
    pub wall_time_s: f64,
}

fn check_same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FlgsrError::shape(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; +inf for identical inputs.
pub fn psnr(reference: ArrayView2<f64>, recovered: ArrayView2<f64>, peak: f64) -> Result<f64> {
    check_same_shape(reference, recovered)?;
    if !(peak > 0.0) {
        return Err(FlgsrError::domain(format!("peak must be positive, got {peak}")));
    }
    let n = reference.len() as f64;
    let mse: f64 = reference
        .iter()
        .zip(recovered.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// ‖recovered − reference‖_F / ‖reference‖_F.
pub fn rel_error(reference: ArrayView2<f64>, recovered: ArrayView2<f64>) -> Result<f64> {
    check_same_shape(reference, recovered)?;
    let denom = linalg::fro_norm(reference);
    if denom == 0.0 {
        return Err(FlgsrError::domain("reference matrix is zero"));
    }
    let diff: f64 = reference
        .iter()
        .zip(recovered.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / denom)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable valid-mode Gaussian filter: rows then columns.
fn gauss_filter_valid(a: ArrayView2<f64>, k: &[f64; SSIM_WINDOW]) -> Array2<f64> {
    let (rows, cols) = a.dim();
    let w = SSIM_WINDOW;
    let mut tmp = Array2::zeros((rows, cols - w + 1));
    for r in 0..rows {
        for c in 0..cols - w + 1 {
            let mut acc = 0.0;
            for (j, &kj) in k.iter().enumerate() {
                acc += kj * a[[r, c + j]];
            }
            tmp[[r, c]] = acc;
        }
    }
    let mut out = Array2::zeros((rows - w + 1, cols - w + 1));
    for c in 0..cols - w + 1 {
        for r in 0..rows - w + 1 {
            let mut acc = 0.0;
            for (i, &ki) in k.iter().enumerate() {
                acc += ki * tmp[[r + i, c]];
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Mean structural similarity over all fully interior 11×11 windows, with a
/// Gaussian weighting of standard deviation 1.5 and peak 1. Inputs are
/// expected in [0, 1]. Windows never cross the image border.
pub fn ssim(reference: ArrayView2<f64>, recovered: ArrayView2<f64>) -> Result<f64> {
    check_same_shape(reference, recovered)?;
    let (rows, cols) = reference.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(FlgsrError::domain(format!(
            "image {rows}x{cols} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )));
    }
    let k = gaussian_kernel();
    let x = reference;
    let y = recovered;
    let xx = &x.mapv(|v| v * v);
    let yy = &y.mapv(|v| v * v);
    let xy = &(&x.to_owned() * &y);

    let mu_x = gauss_filter_valid(x, &k);
    let mu_y = gauss_filter_valid(y, &k);
    let m_xx = gauss_filter_valid(xx.view(), &k);
    let m_yy = gauss_filter_valid(yy.view(), &k);
    let m_xy = gauss_filter_valid(xy.view(), &k);

    let mut total = 0.0;
    for ((mx, my), ((sxx, syy), sxy)) in mu_x
        .iter()
        .zip(mu_y.iter())
        .zip(m_xx.iter().zip(m_yy.iter()).zip(m_xy.iter()))
    {
        let var_x = sxx - mx * mx;
        let var_y = syy - my * my;
        let cov = sxy - mx * my;
        let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct per-window recomputation of SSIM, independent of the separable
    /// filtering path.
    fn ssim_bruteforce(x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
        let k = gaussian_kernel();
        let (rows, cols) = x.dim();
        let w = SSIM_WINDOW;
        let mut total = 0.0;
        let mut count = 0usize;
        for r0 in 0..=rows - w {
            for c0 in 0..=cols - w {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..w {
                    for j in 0..w {
                        let wij = k[i] * k[j];
                        mx += wij * x[[r0 + i, c0 + j]];
                        my += wij * y[[r0 + i, c0 + j]];
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..w {
                    for j in 0..w {
                        let wij = k[i] * k[j];
                        let dx = x[[r0 + i, c0 + j]] - mx;
                        let dy = y[[r0 + i, c0 + j]] - my;
                        vx += wij * dx * dx;
                        vy += wij * dy * dy;
                        cov += wij * dx * dy;
                    }
                }
                let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
                total += num / den;
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn psnr_examples() {
        let a = Array2::from_elem((8, 8), 0.5);
        assert_eq!(psnr(a.view(), a.view(), 1.0).unwrap(), f64::INFINITY);

        let b = a.mapv(|v| v + 0.1);
        let p = psnr(a.view(), b.view(), 1.0).unwrap();
        assert!((p - 20.0).abs() < 1e-10);

        assert!(psnr(a.view(), Array2::zeros((4, 4)).view(), 1.0).is_err());
    }

    #[test]
    fn psnr_matches_hand_computed_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((5, 7), |_| rng.random_range(0.0..1.0));
        let b = Array2::from_shape_fn((5, 7), |_| rng.random_range(0.0..1.0));
        let mut mse = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            mse += (x - y) * (x - y);
        }
        mse /= 35.0;
        let expected = 10.0 * (1.0 / mse).log10();
        assert!((psnr(a.view(), b.view(), 1.0).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn psnr_shift_consistency() {
        let a = Array2::from_elem((6, 6), 0.3);
        let b = a.mapv(|v| v + 0.05);
        let p = psnr(a.view(), b.view(), 1.0).unwrap();
        assert!((p - 10.0 * (1.0 / (0.05_f64 * 0.05)).log10()).abs() < 1e-9);
    }

    #[test]
    fn ssim_identical_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_fn((16, 16), |_| rng.random_range(0.0..1.0));
        assert!((ssim(a.view(), a.view()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_images_reduce_to_luminance_term() {
        let (mu1, mu2) = (0.3, 0.8);
        let a = Array2::from_elem((12, 12), mu1);
        let b = Array2::from_elem((12, 12), mu2);
        let expected = (2.0 * mu1 * mu2 + SSIM_C1) / (mu1 * mu1 + mu2 * mu2 + SSIM_C1);
        assert!((ssim(a.view(), b.view()).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_bruteforce_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Array2::from_shape_fn((14, 17), |_| rng.random_range(0.0..1.0));
        let b = a.mapv(|v: f64| (v + 0.08 * (v * 40.0).sin()).clamp(0.0, 1.0));
        let fast = ssim(a.view(), b.view()).unwrap();
        let slow = ssim_bruteforce(a.view(), b.view());
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Array2::from_shape_fn((13, 13), |_| rng.random_range(0.0..1.0));
        let b = Array2::from_shape_fn((13, 13), |_| rng.random_range(0.0..1.0));
        let ab = ssim(a.view(), b.view()).unwrap();
        let ba = ssim(b.view(), a.view()).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab <= 1.0);
        assert!(ab < 1.0 - 1e-6, "different images should not reach 1");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Array2::zeros((8, 8));
        assert!(ssim(a.view(), a.view()).is_err());
    }

    #[test]
    fn rel_error_examples() {
        let a = Array2::from_elem((3, 3), 0.5);
        assert_eq!(rel_error(a.view(), a.view()).unwrap(), 0.0);
        let b = a.mapv(|v| 2.0 * v);
        assert!((rel_error(a.view(), b.view()).unwrap() - 1.0).abs() < 1e-12);
        assert!(rel_error(Array2::zeros((2, 2)).view(), a.slice(ndarray::s![..2, ..2])).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0));
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (a, b) in x.iter().zip(y.iter()) {
            num += (a - b) * (a - b);
            den += a * a;
        }
        let expected = (num / den).sqrt();
        assert!((rel_error(x.view(), y.view()).unwrap() - expected).abs() < 1e-12);
    }
}
