//! Image I/O, observation-mask generation, synthetic low-rank instances, and
//! deterministic seeding.
//!
//! Images travel as binary PGM (P5, maxval 255) with a single
//! whitespace-delimited header; pixels map to [0, 1] on load and back to
//! 8-bit on save, so a save/load round trip of saved data is bit-exact.

use crate::error::{FlgsrError, Result};
use crate::linops::SamplingProblem;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::Path;

/// Margin applied to the expected noise norm when deriving the feasibility
/// radius from a per-entry noise level.
pub const SIGMA_INFLATION: f64 = 1.05;

/// A grayscale image with pixels in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(FlgsrError::domain("image dimensions must be positive"));
        }
        if pixels.len() != rows * cols {
            return Err(FlgsrError::shape(
                format!("{} pixels", rows * cols),
                format!("{}", pixels.len()),
            ));
        }
        if pixels.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FlgsrError::domain("pixels must lie in [0, 1]"));
        }
        Ok(GrayImage { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.rows, self.cols), self.pixels.clone())
            .expect("pixel count matches shape")
    }

    /// Builds an image from a matrix, clamping entries into [0, 1]. Recovered
    /// matrices can slightly overshoot the pixel range.
    pub fn from_matrix_clamped(m: ArrayView2<f64>) -> Self {
        GrayImage {
            rows: m.nrows(),
            cols: m.ncols(),
            pixels: m.iter().map(|&v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

// ── PGM (P5) ────────────────────────────────────────────────────────────────

struct PgmScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmScanner<'a> {
    fn err(&self, what: impl Into<String>) -> FlgsrError {
        FlgsrError::PgmParse {
            offset: self.pos,
            what: what.into(),
        }
    }

    /// Skips whitespace and `#` comment lines between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| self.err(format!("invalid {what}")))
    }
}

/// Decodes a binary PGM byte stream.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut sc = PgmScanner { bytes, pos: 0 };
    let magic = sc.token()?;
    if magic != b"P5" {
        return Err(FlgsrError::PgmParse {
            offset: 0,
            what: format!("wrong magic {:?}, expected \"P5\"", String::from_utf8_lossy(magic)),
        });
    }
    let cols = sc.number("width")?;
    let rows = sc.number("height")?;
    let maxval = sc.number("maxval")?;
    if maxval != 255 {
        return Err(sc.err(format!("unsupported maxval {maxval}, expected 255")));
    }
    if rows == 0 || cols == 0 {
        return Err(sc.err("zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the payload
    if sc.pos >= bytes.len() || !bytes[sc.pos].is_ascii_whitespace() {
        return Err(sc.err("missing whitespace before payload"));
    }
    sc.pos += 1;
    let need = rows * cols;
    if bytes.len() - sc.pos < need {
        return Err(FlgsrError::PgmParse {
            offset: bytes.len(),
            what: format!(
                "truncated payload: need {need} bytes, have {}",
                bytes.len() - sc.pos
            ),
        });
    }
    let pixels = bytes[sc.pos..sc.pos + need]
        .iter()
        .map(|&v| v as f64 / 255.0)
        .collect();
    Ok(GrayImage {
        rows,
        cols,
        pixels,
    })
}

/// Encodes an image as binary PGM with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols, img.rows).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes)
}

pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}

// ── Seeding and sampling ────────────────────────────────────────────────────

/// Seed of a run; identical seed and parameters give bit-identical masks and
/// synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunSeed(pub u64);

impl RunSeed {
    /// Derives an independent stream for a sweep entry, as seed XOR a stable
    /// 64-bit FNV-1a hash of the entry key.
    pub fn stream(&self, key: &str) -> u64 {
        self.0 ^ fnv1a64(key.as_bytes())
    }
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Draws exactly round(sr·m·n) distinct indices uniformly without
/// replacement, returned row-major sorted.
pub fn generate_mask(rows: usize, cols: usize, sr: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(FlgsrError::domain(format!("sampling rate must be in (0, 1], got {sr}")));
    }
    let total = rows * cols;
    let k = ((sr * total as f64).round() as usize).min(total);
    let mut idx: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher–Yates: only the first k positions are needed
    for i in 0..k {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    let mut mask: Vec<(usize, usize)> = idx[..k].iter().map(|&p| (p / cols, p % cols)).collect();
    mask.sort_unstable();
    Ok(mask)
}

/// A seeded rank-r matrix with entries in [0, 1].
///
/// A standard normal factor product of rank r−1 is rescaled by affine
/// min-max into [0, 1]; the rescale's rank-one shift supplies the r-th
/// component, so the result has rank exactly r. The rank-1 case uses a
/// positive outer product scaled by its maximum, which needs no shift.
pub fn synth_lowrank(m: usize, n: usize, r: usize, seed: u64) -> Result<Array2<f64>> {
    if r == 0 || r > m.min(n) {
        return Err(FlgsrError::domain(format!(
            "rank {r} out of range for a {m}x{n} matrix"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if r == 1 {
        let a = Array2::from_shape_fn((m, 1), |_| rng.sample::<f64, _>(StandardNormal).abs());
        let b = Array2::from_shape_fn((n, 1), |_| rng.sample::<f64, _>(StandardNormal).abs());
        let mut prod = a.dot(&b.t());
        let hi = prod.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        prod.mapv_inplace(|v| v / hi);
        return Ok(prod);
    }
    let a = Array2::from_shape_fn((m, r - 1), |_| rng.sample::<f64, _>(StandardNormal));
    let b = Array2::from_shape_fn((n, r - 1), |_| rng.sample::<f64, _>(StandardNormal));
    let mut prod = a.dot(&b.t());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in prod.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    prod.mapv_inplace(|v| (v - lo) / span);
    Ok(prod)
}

/// Observes a matrix on a mask with optional per-entry Gaussian noise. The
/// feasibility radius is noise_sigma·√p with a small margin.
pub fn observe(
    m: ArrayView2<f64>,
    mask: &[(usize, usize)],
    noise_sigma: f64,
    seed: u64,
) -> Result<SamplingProblem> {
    if noise_sigma < 0.0 {
        return Err(FlgsrError::domain("noise level must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = mask
        .iter()
        .map(|&(r, c)| {
            let noise = if noise_sigma > 0.0 {
                noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            m[[r, c]] + noise
        })
        .collect();
    let sigma = if noise_sigma > 0.0 {
        noise_sigma * (mask.len() as f64).sqrt() * SIGMA_INFLATION
    } else {
        0.0
    };
    SamplingProblem::new(m.nrows(), m.ncols(), mask.to_vec(), b, sigma)
}
