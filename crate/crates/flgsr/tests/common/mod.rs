//! Shared helpers for integration tests: a deterministic natural-looking
//! grayscale scene and problem builders.

use flgsr::data::{encode_pgm, parse_pgm, GrayImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A smooth synthetic scene: low-rank shading, two step bands, and weak
/// low-pass texture, quantized to 8 bits like a real photograph.
pub fn natural_scene(n: usize, seed: u64) -> GrayImage {
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut img = Array2::<f64>::zeros((n, n));
    let pi = std::f64::consts::PI;
    for r in 0..n {
        for c in 0..n {
            let (u, v) = (xs[r], xs[c]);
            let mut p = 0.35;
            p += 0.25 * (2.3 * pi * u + 0.4).sin() * (1.7 * pi * v).cos();
            p += 0.2
                * (-((u - 0.3) / 0.25) * ((u - 0.3) / 0.25)).exp()
                * (-((v - 0.6) / 0.3) * ((v - 0.6) / 0.3)).exp();
            p += 0.15 * (4.1 * pi * u).cos() * (3.3 * pi * v + 1.2).sin();
            p += 0.08 * (7.0 * pi * u).sin() * (6.0 * pi * v).sin();
            if u > 0.5 {
                p += 0.1;
            }
            if v > 0.35 && v < 0.7 {
                p += 0.06;
            }
            img[[r, c]] = p;
        }
    }

    // separable low-pass texture
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    let kernel: Vec<f64> = (-4..=4)
        .map(|k| (-(k as f64 * 0.55) * (k as f64 * 0.55)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let mut rows = Array2::<f64>::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let cc = (c + j).saturating_sub(4).min(n - 1);
                acc += w * noise[[r, cc]];
            }
            rows[[r, c]] = acc / ksum;
        }
    }
    let mut tex = Array2::<f64>::zeros((n, n));
    for c in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let rr = (r + j).saturating_sub(4).min(n - 1);
                acc += w * rows[[rr, c]];
            }
            tex[[r, c]] = acc / ksum;
        }
    }
    let std = (tex.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64).sqrt();
    if std > 0.0 {
        img.zip_mut_with(&tex, |p, &t| *p += 0.05 * t / std);
    }
    img.mapv_inplace(|v| v.clamp(0.0, 1.0));

    // quantize through the pgm codec so the scene behaves like a file
    let raw = GrayImage::from_matrix_clamped(img.view());
    parse_pgm(&encode_pgm(&raw)).expect("codec round trip")
}

#[allow(dead_code)]
pub fn elapsed_s(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64()
}
