//! Experiment runner: configuration parsing and validation, single runs,
//! and the group-count / restart ablation sweeps, with CSV, manifest, and
//! recovered-image outputs.

use crate::data::{self, GrayImage, RunSeed};
use crate::error::{FlgsrError, Result};
use crate::iral::{iral_solve, IralConfig};
use crate::metrics::{self, MetricReport};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Experiment flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Recover one partially observed image.
    Inpaint,
    /// Recover a seeded synthetic low-rank matrix.
    Synthetic,
    /// One inpainting run per group count.
    AblateGroups,
    /// Paired runs with the restart branch on and forced off.
    AblateRestart,
}

/// Shape of the synthetic instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 60,
            cols: 60,
            rank: 3,
        }
    }
}

/// A full experiment description. Solver fields left out of the file take
/// the reference defaults, so an empty `[solver]` block reproduces them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Input image (PGM) for the image modes.
    pub image: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Sampling rate in (0, 1].
    pub sr: f64,
    pub seed: u64,
    /// Per-entry observation noise level.
    pub noise_sigma: f64,
    /// Group counts of the ablation sweep.
    pub group_counts: Option<Vec<usize>>,
    pub synthetic: SyntheticSpec,
    pub solver: IralConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Synthetic,
            image: None,
            out_dir: PathBuf::from("out"),
            sr: 0.7,
            seed: 0,
            noise_sigma: 0.0,
            group_counts: None,
            synthetic: SyntheticSpec::default(),
            solver: IralConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| FlgsrError::Config(format!("{e}")))
    }

    fn needs_image(&self) -> bool {
        !matches!(self.mode, Mode::Synthetic)
    }

    fn default_group_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut g = 1;
        while g <= n {
            counts.push(g);
            g *= 2;
        }
        counts
    }
}

/// Everything needed to bit-reproduce one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub entry: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub groups: usize,
    pub restart_enabled: bool,
    pub mask: Vec<(usize, usize)>,
    pub metrics: MetricReport,
    pub outer_iters: usize,
    pub restarts: usize,
}

/// Collects every config violation without running anything. An empty list
/// means the config is runnable.
pub fn validate(config_path: impl AsRef<Path>) -> Result<Vec<String>> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    let mut diags = Vec::new();

    if !(cfg.sr > 0.0 && cfg.sr <= 1.0) {
        diags.push(format!("sr = {} outside (0, 1]", cfg.sr));
    }
    if cfg.noise_sigma < 0.0 {
        diags.push(format!("noise_sigma = {} is negative", cfg.noise_sigma));
    }

    let mut cols = None;
    if cfg.needs_image() {
        match &cfg.image {
            None => diags.push("image path is required for image modes".into()),
            Some(path) if !path.exists() => {
                diags.push(format!("image file {} does not exist", path.display()))
            }
            Some(path) => match data::load_image(path) {
                Ok(img) => cols = Some(img.cols()),
                Err(e) => diags.push(format!("image {} unreadable: {e}", path.display())),
            },
        }
    } else {
        let syn = &cfg.synthetic;
        if syn.rows == 0 || syn.cols == 0 {
            diags.push("synthetic dimensions must be positive".into());
        }
        if syn.rank == 0 || syn.rank > syn.rows.min(syn.cols) {
            diags.push(format!(
                "synthetic rank {} out of range for {}x{}",
                syn.rank, syn.rows, syn.cols
            ));
        }
        cols = Some(syn.cols);
    }

    if let Err(e) = cfg.solver.validate() {
        diags.push(e.to_string());
    }
    if let Some(n) = cols {
        if cfg.solver.groups > n {
            diags.push(format!(
                "group count {} exceeds the {} matrix columns",
                cfg.solver.groups, n
            ));
        }
        if let Some(counts) = &cfg.group_counts {
            for &g in counts {
                if g == 0 || g > n {
                    diags.push(format!("ablation group count {g} out of range for {n} columns"));
                }
            }
        }
    }
    Ok(diags)
}

/// One sweep entry: a solver run with its own seed stream and outputs.
struct Entry {
    key: String,
    groups: usize,
    restart_enabled: bool,
}

/// One finished entry, ready to be written out.
struct EntryOutcome {
    key: String,
    image_name: String,
    groups: usize,
    restart_enabled: bool,
    metrics: MetricReport,
    outer_iters: usize,
    restarts: usize,
    mask: Vec<(usize, usize)>,
    seed: u64,
    recovered: GrayImage,
}

fn entries_for(cfg: &ExperimentConfig, n: usize) -> Vec<Entry> {
    match cfg.mode {
        Mode::Inpaint | Mode::Synthetic => vec![Entry {
            key: format!("groups={}", cfg.solver.groups),
            groups: cfg.solver.groups,
            restart_enabled: cfg.solver.restart_enabled,
        }],
        Mode::AblateGroups => {
            let counts = cfg
                .group_counts
                .clone()
                .unwrap_or_else(|| cfg.default_group_counts(n));
            counts
                .into_iter()
                .map(|g| Entry {
                    key: format!("groups={g:04}"),
                    groups: g,
                    restart_enabled: cfg.solver.restart_enabled,
                })
                .collect()
        }
        Mode::AblateRestart => vec![
            Entry {
                key: "restart=on".into(),
                groups: cfg.solver.groups,
                restart_enabled: true,
            },
            Entry {
                key: "restart=off".into(),
                groups: cfg.solver.groups,
                restart_enabled: false,
            },
        ],
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Inpaint => "inpaint",
        Mode::Synthetic => "synthetic",
        Mode::AblateGroups => "ablate_groups",
        Mode::AblateRestart => "ablate_restart",
    }
}

fn run_entry(
    cfg: &ExperimentConfig,
    entry: &Entry,
    reference: &Array2<f64>,
    image_name: &str,
) -> Result<EntryOutcome> {
    let seed = RunSeed(cfg.seed).stream(&entry.key);
    let (rows, cols) = (reference.nrows(), reference.ncols());
    let mask = data::generate_mask(rows, cols, cfg.sr, seed)?;
    let problem = data::observe(reference.view(), &mask, cfg.noise_sigma, seed ^ 0x9e3779b97f4a7c15)?;

    let mut solver = cfg.solver.clone();
    solver.groups = entry.groups;
    solver.restart_enabled = entry.restart_enabled;
    solver.seed = seed;

    let result = iral_solve(&problem, &solver)?;

    let recovered = GrayImage::from_matrix_clamped(result.c_hat.view());
    let recovered_mat = recovered.to_matrix();
    let report = MetricReport {
        psnr_db: metrics::psnr(reference.view(), recovered_mat.view(), 1.0)?,
        ssim: metrics::ssim(reference.view(), recovered_mat.view())?,
        rel_err: metrics::rel_error(reference.view(), recovered_mat.view())?,
        wall_time_s: result.wall_time_s,
    };

    Ok(EntryOutcome {
        key: entry.key.clone(),
        image_name: image_name.to_string(),
        groups: entry.groups,
        restart_enabled: entry.restart_enabled,
        metrics: report,
        outer_iters: result.outer_iters,
        restarts: result.restarts,
        mask,
        seed,
        recovered,
    })
}

pub const CSV_HEADER: &str =
    "image,mode,groups,restart_on,psnr_db,ssim,rel_err,wall_time_s,outer_iters,restarts";

fn csv_row(mode: Mode, o: &EntryOutcome) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        o.image_name,
        mode_name(mode),
        o.groups,
        o.restart_enabled,
        o.metrics.psnr_db,
        o.metrics.ssim,
        o.metrics.rel_err,
        o.metrics.wall_time_s,
        o.outer_iters,
        o.restarts
    )
}

fn sweep_threads() -> usize {
    std::env::var("FLGSR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs the configured experiment, writing results.csv, one manifest and one
/// recovered PGM per entry, into the output directory.
pub fn run(config_path: impl AsRef<Path>, out_override: Option<&Path>) -> Result<PathBuf> {
    let diags = validate(&config_path)?;
    if !diags.is_empty() {
        return Err(FlgsrError::Config(diags.join("; ")));
    }
    let mut cfg = ExperimentConfig::from_path(&config_path)?;
    if let Some(dir) = out_override {
        cfg.out_dir = dir.to_path_buf();
    }

    let (reference, image_name) = match cfg.mode {
        Mode::Synthetic => {
            let syn = cfg.synthetic;
            let m = data::synth_lowrank(syn.rows, syn.cols, syn.rank, cfg.seed)?;
            (m, format!("synthetic-{}x{}-r{}", syn.rows, syn.cols, syn.rank))
        }
        _ => {
            let path = cfg.image.clone().expect("validated above");
            let img = data::load_image(&path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            (img.to_matrix(), name)
        }
    };

    let entries = entries_for(&cfg, reference.ncols());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads().min(entries.len().max(1)))
        .build()
        .map_err(|e| FlgsrError::Config(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<EntryOutcome> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| run_entry(&cfg, entry, &reference, &image_name))
            .collect::<Result<Vec<_>>>()
    })?;
    outcomes.sort_by(|a, b| a.key.cmp(&b.key));

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = String::from(CSV_HEADER);
    for o in &outcomes {
        csv.push('\n');
        csv.push_str(&csv_row(cfg.mode, o));

        let stem = format!("{}_{}", o.image_name, o.key.replace('=', "-"));
        data::save_image(&o.recovered, cfg.out_dir.join(format!("recovered_{stem}.pgm")))?;

        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            entry: o.key.clone(),
            seed: o.seed,
            config: cfg.clone(),
            groups: o.groups,
            restart_enabled: o.restart_enabled,
            mask: o.mask.clone(),
            metrics: o.metrics,
            outer_iters: o.outer_iters,
            restarts: o.restarts,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| FlgsrError::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(cfg.out_dir.join(format!("manifest_{stem}.json")), json)?;
    }
    csv.push('\n');
    std::fs::write(cfg.out_dir.join("results.csv"), csv)?;
    Ok(cfg.out_dir.clone())
}
