//! Inexact restarted augmented Lagrangian outer loop.
//!
//! Each outer iteration warm-starts the inner solver from the previous
//! iterates. While the feasibility gap keeps shrinking geometrically the
//! multiplier is reset to zero and the penalty stays put (the restart
//! branch); once progress stalls the multiplier engages, the penalty
//! inflates by 1/ρ₂, and the inner tolerance tightens by ρ₃.

use crate::elam::{elam_solve, ElamConfig, SweepRecord};
use crate::error::{FlgsrError, Result};
use crate::grouping::{GroupPartition, GroupedFactor};
use crate::linalg;
use crate::linops::SamplingProblem;
use crate::regularizer::CappedPhi;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;

/// How the factor iterates are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    /// X0 = observed matrix, Y0 = identity, so X0·Y0ᵀ reproduces the
    /// zero-filled data exactly.
    DataIdentity,
    /// The same product split with balanced factor norms through the
    /// spectral norm of the observed matrix.
    SpectralWarm,
    /// Seeded standard normal factors at the given scale. The default:
    /// both data-exact variants start at a first-order stationary point of
    /// the first subproblem (feasibility gap zero, every group norm past the
    /// cap), from which no proximal sweep can make progress.
    Gaussian { scale: f64 },
    /// Seeded standard normal factors whose per-group scale decays
    /// geometrically, scale·decay^i for group i. The taper gives the
    /// sequential group updates a pecking order, so the culling wave crosses
    /// one group at a time as the penalty ladder climbs instead of deciding
    /// every group's fate in a single sweep.
    TaperedGaussian { scale: f64, decay: f64 },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::TaperedGaussian {
            scale: 1.0,
            decay: 0.9,
        }
    }
}

/// All tunables of the outer and inner loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IralConfig {
    /// Initial penalty η⁰.
    pub eta0: f64,
    /// Restart threshold on the feasibility gap.
    pub rho1: f64,
    /// Penalty escalation: η ← η/ρ₂.
    pub rho2: f64,
    /// Tolerance decay on the escalation branch.
    pub rho3: f64,
    /// Length ϑ of the gap history window.
    pub vartheta: usize,
    /// Initial inner tolerance ε₀.
    pub eps0: f64,
    pub max_outer: usize,
    /// Normalized feasibility gap at which the outer loop stops.
    pub outer_tol: f64,
    /// Number of column groups.
    pub groups: usize,
    pub elam: ElamConfig,
    pub phi: CappedPhi,
    pub init: InitStrategy,
    /// Forced off, every iteration takes the multiplier/escalation branch.
    pub restart_enabled: bool,
    /// Seed of the Gaussian initialization.
    pub seed: u64,
}

impl Default for IralConfig {
    fn default() -> Self {
        IralConfig {
            eta0: 1e-3,
            rho1: 0.999,
            rho2: 0.5,
            rho3: 0.5,
            vartheta: 10,
            eps0: 10.0,
            max_outer: 200,
            // tight enough that the absolute feasibility gap lands below
            // 1e-4 on desk-scale problems after the (1 + ‖C‖) normalization
            outer_tol: 2e-6,
            groups: 32,
            elam: ElamConfig::default(),
            phi: CappedPhi::default(),
            init: InitStrategy::default(),
            restart_enabled: true,
            seed: 0,
        }
    }
}

impl IralConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rho) in [("rho1", self.rho1), ("rho2", self.rho2), ("rho3", self.rho3)] {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(FlgsrError::domain(format!("{name} must lie in (0,1), got {rho}")));
            }
        }
        if !(self.eta0 > 0.0) {
            return Err(FlgsrError::domain(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.eps0 > 0.0) {
            return Err(FlgsrError::domain(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if self.vartheta == 0 {
            return Err(FlgsrError::domain("vartheta must be positive"));
        }
        if self.max_outer == 0 {
            return Err(FlgsrError::domain("max_outer must be positive"));
        }
        if !(self.outer_tol > 0.0) {
            return Err(FlgsrError::domain("outer_tol must be positive"));
        }
        if self.groups == 0 {
            return Err(FlgsrError::domain("groups must be positive"));
        }
        match self.init {
            InitStrategy::Gaussian { scale } if !(scale > 0.0) => {
                return Err(FlgsrError::domain("init scale must be positive"));
            }
            InitStrategy::TaperedGaussian { scale, decay }
                if !(scale > 0.0) || !(decay > 0.0 && decay <= 1.0) =>
            {
                return Err(FlgsrError::domain(
                    "tapered init needs scale > 0 and decay in (0, 1]",
                ));
            }
            _ => {}
        }
        self.elam.validate()?;
        self.phi.validate()
    }
}

/// Output of a recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Recovered matrix; always a projection output, hence feasible.
    pub c_hat: Array2<f64>,
    pub x: GroupedFactor,
    pub y: GroupedFactor,
    pub outer_iters: usize,
    /// Feasibility gap ‖XYᵀ − C‖_F after each outer iteration.
    pub residual_history: Vec<f64>,
    /// Times the restart branch fired after the warm-up window.
    pub restarts: usize,
    pub wall_time_s: f64,
    /// Subgradient-selection stationarity residual at the returned point.
    pub kkt_residual: f64,
    pub eta_final: f64,
    pub total_inner_sweeps: usize,
    pub converged: bool,
}

/// True iff the new gap clears ρ₁ times the best gap in the window.
pub fn restart_check(history: &[f64], new_residual: f64, rho1: f64) -> Result<bool> {
    if history.is_empty() {
        return Err(FlgsrError::domain(
            "restart_check requires a nonempty residual history",
        ));
    }
    let min = history.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(new_residual <= rho1 * min)
}

/// S ← S + η(XYᵀ − C); `product` is XYᵀ.
pub fn update_multiplier(
    s: &Array2<f64>,
    eta: f64,
    product: &Array2<f64>,
    c: &Array2<f64>,
) -> Array2<f64> {
    let mut out = product - c;
    out.mapv_inplace(|v| v * eta);
    out += s;
    out
}

/// Builds the starting iterates. `seed` feeds the Gaussian variant only.
pub fn initialize(
    problem: &SamplingProblem,
    groups: usize,
    init: &InitStrategy,
    seed: u64,
) -> Result<(GroupedFactor, GroupedFactor, Array2<f64>)> {
    use rand::{Rng, SeedableRng};
    let (m, n) = (problem.rows(), problem.cols());
    let partition = GroupPartition::equal_split(n, groups)?;
    let observed = problem.observed_matrix();
    let (x, y) = match init {
        InitStrategy::DataIdentity => (observed.clone(), Array2::eye(n)),
        InitStrategy::SpectralWarm => {
            let gram = observed.t().dot(&observed);
            let spectral = linalg::sym_top_eig(gram.view()).sqrt().max(f64::MIN_POSITIVE);
            let root = spectral.sqrt();
            (observed.mapv(|v| v / root), Array2::eye(n) * root)
        }
        InitStrategy::Gaussian { scale } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((m, n), |_| {
                scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let y = Array2::from_shape_fn((n, n), |_| {
                scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            (x, y)
        }
        InitStrategy::TaperedGaussian { scale, decay } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut col_scale = vec![0.0; n];
            for (i, factor) in (0..partition.num_groups())
                .map(|i| scale * decay.powi(i as i32))
                .enumerate()
            {
                for c in partition.range(i) {
                    col_scale[c] = factor;
                }
            }
            let x = Array2::from_shape_fn((m, n), |(_, c)| {
                col_scale[c] * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let y = Array2::from_shape_fn((n, n), |(_, c)| {
                col_scale[c] * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            (x, y)
        }
    };
    let x = GroupedFactor::new(x, partition.clone())?;
    let y = GroupedFactor::new(y, partition)?;
    let c = problem.project_theta(x.data.dot(&y.data.t()).view())?;
    Ok((x, y, c))
}

/// Stationarity surrogate at an outer iterate: the KKT residual with the
/// radial subgradient selection on live groups and the normal-cone distance
/// for the C block, using the implicit multiplier W = η(XYᵀ − C) + S.
pub fn kkt_residual(
    x: &GroupedFactor,
    y: &GroupedFactor,
    c: &Array2<f64>,
    s: &Array2<f64>,
    eta: f64,
    phi: &CappedPhi,
    problem: &SamplingProblem,
) -> Result<f64> {
    let product = x.data.dot(&y.data.t());
    let mut w = &product - c;
    w.mapv_inplace(|v| v * eta);
    w += s;
    crate::elam::kkt_residual_with(&w, x, y, c, phi, problem)
}

/// Runs the outer loop to convergence or the iteration cap.
pub fn iral_solve(problem: &SamplingProblem, cfg: &IralConfig) -> Result<RecoveryResult> {
    iral_solve_observed(problem, cfg, |_, _| {})
}

/// As `iral_solve`, reporting every inner sweep record to `observer`
/// together with its outer iteration index.
pub fn iral_solve_observed(
    problem: &SamplingProblem,
    cfg: &IralConfig,
    mut observer: impl FnMut(usize, &SweepRecord),
) -> Result<RecoveryResult> {
    cfg.validate()?;
    if problem.num_observed() == 0 {
        return Err(FlgsrError::domain("problem has an empty mask"));
    }
    let start = Instant::now();
    let debug = std::env::var("FLGSR_DEBUG").is_ok();

    let (mut x, mut y, mut c) = initialize(problem, cfg.groups, &cfg.init, cfg.seed)?;
    let (m, n) = (problem.rows(), problem.cols());
    let mut s = Array2::<f64>::zeros((m, n));
    let mut eta = cfg.eta0;
    let mut eps = cfg.eps0;

    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.vartheta);
    let mut history = Vec::new();
    let mut restarts = 0usize;
    let mut total_sweeps = 0usize;
    let mut converged = false;
    let mut outer_iters = 0usize;

    for k in 0..cfg.max_outer {
        outer_iters = k + 1;
        let mut inner_cfg = cfg.elam;
        inner_cfg.stat_tol = eps;

        let mut obs = |rec: &SweepRecord| observer(k, rec);
        let (nx, ny, nc, rep) = elam_solve(
            x,
            y,
            c,
            &s,
            eta,
            &cfg.phi,
            problem,
            &inner_cfg,
            Some(&mut obs),
        )
        .map_err(|e| e.at_outer(k))?;
        x = nx;
        y = ny;
        c = nc;
        total_sweeps += rep.sweeps;

        let product = x.data.dot(&y.data.t());
        let residual = linalg::fro_norm((&product - &c).view());
        if !residual.is_finite() {
            return Err(FlgsrError::numerical("non-finite feasibility gap").at_outer(k));
        }

        // Step 2: restart while young or while the gap keeps dropping;
        // otherwise engage the multiplier and escalate the penalty.
        let decision = outer_branch(k, window.make_contiguous(), residual, eta, eps, cfg)?;
        if decision.zero_multiplier {
            s.fill(0.0);
        } else {
            s = update_multiplier(&s, eta, &product, &c);
        }
        if decision.restarted {
            restarts += 1;
        }
        eta = decision.eta;
        eps = decision.eps;
        if !eta.is_finite() {
            return Err(FlgsrError::numerical("penalty parameter overflowed").at_outer(k));
        }

        if window.len() == cfg.vartheta {
            window.pop_front();
        }
        window.push_back(residual);
        history.push(residual);

        let c_norm = linalg::fro_norm(c.view());
        let normalized = residual / (1.0 + c_norm);
        if debug {
            let active = x
                .group_norms(2.0)
                .unwrap_or_default()
                .iter()
                .filter(|&&v| v > 1e-10)
                .count();
            eprintln!(
                "outer {k:3}: gap {residual:10.3e} (normalized {normalized:9.3e}) eta {eta:9.3e} eps {eps:9.3e} stat {:9.3e} sweeps {:3} active {active}",
                rep.final_stat, rep.sweeps
            );
        }
        if normalized <= cfg.outer_tol {
            converged = true;
            break;
        }
    }

    let kkt = kkt_residual(&x, &y, &c, &s, eta, &cfg.phi, problem)?;
    Ok(RecoveryResult {
        c_hat: c.clone(),
        x,
        y,
        outer_iters,
        residual_history: history,
        restarts,
        wall_time_s: start.elapsed().as_secs_f64(),
        kkt_residual: kkt,
        eta_final: eta,
        total_inner_sweeps: total_sweeps,
        converged,
    })
}

/// Outcome of one Step-2 decision of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterDecision {
    /// The multiplier resets to zero (warm-up or restart branch).
    pub zero_multiplier: bool,
    /// A restart past the warm-up window.
    pub restarted: bool,
    pub eta: f64,
    pub eps: f64,
}

/// One Step-2 decision: warm-up (k ≤ ϑ) keeps η and ε; a restart keeps η and
/// shrinks ε by √ρ₁; escalation inflates η by 1/ρ₂ and shrinks ε by ρ₃.
pub fn outer_branch(
    k: usize,
    window: &[f64],
    new_residual: f64,
    eta: f64,
    eps: f64,
    cfg: &IralConfig,
) -> Result<OuterDecision> {
    if cfg.restart_enabled && k <= cfg.vartheta {
        Ok(OuterDecision {
            zero_multiplier: true,
            restarted: false,
            eta,
            eps,
        })
    } else if cfg.restart_enabled && restart_check(window, new_residual, cfg.rho1)? {
        Ok(OuterDecision {
            zero_multiplier: true,
            restarted: true,
            eta,
            eps: eps * cfg.rho1.sqrt(),
        })
    } else {
        Ok(OuterDecision {
            zero_multiplier: false,
            restarted: false,
            eta: eta / cfg.rho2,
            eps: eps * cfg.rho3,
        })
    }
}
