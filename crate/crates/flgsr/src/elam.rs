//! Extrapolated linearized alternating minimization for the augmented
//! Lagrangian subproblem.
//!
//! One sweep visits the column groups in order. For each group the X block
//! and then the Y block take a proximal step on a linearization at a
//! momentum-extrapolated point; group i sees the already-updated groups
//! l < i of the same sweep. After the group loop, vanished groups are pruned
//! and C is refreshed by projecting XYᵀ + S/η onto the feasible set.
//!
//! The linearization residual R = XYᵀ − C + S/η is maintained with rank-n_i
//! corrections per block update and rebuilt from scratch once per sweep,
//! after the C step, to cap drift.

use crate::error::{FlgsrError, Result};
use crate::grouping::GroupedFactor;
use crate::linalg;
use crate::linops::SamplingProblem;
use crate::regularizer::CappedPhi;
use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Tunables of the inner solver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ElamConfig {
    /// Step-size inflation; the per-block step is 1/(gamma·‖block‖₂²).
    pub gamma: f64,
    /// Extrapolation safety factor in (0, 1).
    pub delta: f64,
    /// Floor of the step-size denominator, used when a paired block vanishes.
    pub eps_floor: f64,
    /// Sweep budget of one inner solve.
    pub max_inner: usize,
    /// Normalized iterate-change floor: sweeps stop once the largest block
    /// change falls below it even if the stationarity target is out of reach.
    pub inner_tol: f64,
    /// Stationarity target: the solve returns as soon as the subgradient
    /// residual of the subproblem is at or below this. The outer loop sets it
    /// to its current ε. Zero keeps sweeping until the change floor.
    pub stat_tol: f64,
    /// Groups whose X and Y blocks both fall below this norm are zeroed and
    /// skipped from then on.
    pub prune_tol: f64,
}

impl Default for ElamConfig {
    fn default() -> Self {
        ElamConfig {
            gamma: 3.0,
            delta: 0.99,
            eps_floor: 1e-8,
            max_inner: 60,
            inner_tol: 1e-9,
            stat_tol: 0.0,
            prune_tol: 1e-10,
        }
    }
}

impl ElamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(FlgsrError::domain(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(FlgsrError::domain(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.eps_floor > 0.0) {
            return Err(FlgsrError::domain("eps_floor must be positive"));
        }
        if self.max_inner == 0 {
            return Err(FlgsrError::domain("max_inner must be positive"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(FlgsrError::domain("inner_tol must be positive"));
        }
        if self.stat_tol < 0.0 {
            return Err(FlgsrError::domain("stat_tol must be >= 0"));
        }
        if self.prune_tol < 0.0 {
            return Err(FlgsrError::domain("prune_tol must be >= 0"));
        }
        Ok(())
    }

    /// Momentum ceiling δ(γ−1)/(2(γ+1)) of the step-ratio branch.
    pub fn weight_cap(&self) -> f64 {
        self.delta * (self.gamma - 1.0) / (2.0 * (self.gamma + 1.0))
    }
}

/// Next element of the momentum recursion t ← (1 + √(1 + 4t²))/2.
pub fn t_next(t_prev: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt())
}

/// Extrapolation weight: min of the momentum ratio (t_prev − 1)/t_cur and the
/// step-ratio safeguard δ(γ−1)/(2(γ+1))·√(τ_prev/τ_cur).
pub fn extrapolation_weight(
    t_prev: f64,
    t_cur: f64,
    tau_prev: f64,
    tau_cur: f64,
    cfg: &ElamConfig,
) -> f64 {
    let gamma_hat = (t_prev - 1.0) / t_cur;
    gamma_hat.min(cfg.weight_cap() * (tau_prev / tau_cur).sqrt())
}

/// Mutable state of one inner solve.
#[derive(Debug, Clone)]
pub struct ElamState {
    pub x: GroupedFactor,
    pub x_prev: Array2<f64>,
    pub y: GroupedFactor,
    pub y_prev: Array2<f64>,
    pub c: Array2<f64>,
    /// Maintained residual XYᵀ − C + S/η.
    pub r: Array2<f64>,
    /// Step-size denominators of the previous visit to each group.
    pub tau_x: Vec<f64>,
    pub tau_y: Vec<f64>,
    /// Current value of the momentum recursion.
    pub t_cur: f64,
    /// Groups still participating in sweeps.
    pub active: Vec<bool>,
}

impl ElamState {
    pub fn new(
        x: GroupedFactor,
        y: GroupedFactor,
        c: Array2<f64>,
        s: &Array2<f64>,
        eta: f64,
        prune_tol: f64,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(FlgsrError::domain(format!("eta must be positive, got {eta}")));
        }
        let (m, n) = (x.data.nrows(), x.data.ncols());
        if y.data.nrows() != n || y.data.ncols() != n {
            return Err(FlgsrError::shape(format!("{n}x{n} right factor"), format!("{}x{}", y.data.nrows(), y.data.ncols())));
        }
        if x.partition != y.partition {
            return Err(FlgsrError::domain("X and Y must share one partition"));
        }
        if c.dim() != (m, n) || s.dim() != (m, n) {
            return Err(FlgsrError::shape(format!("{m}x{n}"), format!("{:?} / {:?}", c.dim(), s.dim())));
        }
        let groups = x.partition.num_groups();
        let mut x = x;
        let mut y = y;
        let mut active = Vec::with_capacity(groups);
        for i in 0..groups {
            let live = linalg::fro_norm(x.block(i)) > prune_tol
                || linalg::fro_norm(y.block(i)) > prune_tol;
            if !live {
                // inactive groups hold exact zeros
                x.block_mut(i).fill(0.0);
                y.block_mut(i).fill(0.0);
            }
            active.push(live);
        }
        let mut state = ElamState {
            x_prev: x.data.clone(),
            y_prev: y.data.clone(),
            x,
            y,
            c,
            r: Array2::zeros((m, n)),
            tau_x: vec![1.0; groups],
            tau_y: vec![1.0; groups],
            t_cur: 1.0,
            active,
        };
        state.refresh_residual(s, eta);
        Ok(state)
    }

    /// Rebuilds R = XYᵀ − C + S/η from scratch.
    pub fn refresh_residual(&mut self, s: &Array2<f64>, eta: f64) {
        self.r.assign(&(s / eta));
        self.r -= &self.c;
        general_mat_mul(1.0, &self.x.data, &self.y.data.t(), 1.0, &mut self.r);
    }

    pub fn product(&self) -> Array2<f64> {
        self.x.data.dot(&self.y.data.t())
    }

    fn num_groups(&self) -> usize {
        self.x.partition.num_groups()
    }
}

/// Per-sweep instrumentation snapshot. Records with sweep index 0 describe
/// the state before the first sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub sweep: usize,
    /// Penalty parameter of this inner solve.
    pub eta: f64,
    /// Augmented Lagrangian value, recomputed from scratch.
    pub l_value: f64,
    /// ‖C_new − C_old‖²_F of this sweep's projection step.
    pub c_step_sq: f64,
    /// Step-size denominators used by this sweep, per group.
    pub tau_x: Vec<f64>,
    pub tau_y: Vec<f64>,
    /// Squared block step norms ‖X_i_new − X_i_old‖²_F of this sweep.
    pub dx_sq: Vec<f64>,
    pub dy_sq: Vec<f64>,
    /// Feasibility gap ‖XYᵀ − C‖_F after the sweep.
    pub feasibility: f64,
}

/// Subgradient-selection residual of the stationarity system given
/// W = η(XYᵀ − C) + S: the radial selection n_i·φ′(‖·‖)·(·)/‖·‖ on live
/// blocks, the subdifferential ball at zero blocks, and the normal-cone
/// distance of the C block. An upper bound on dist(0, ∂L).
pub fn kkt_residual_with(
    w: &Array2<f64>,
    x: &GroupedFactor,
    y: &GroupedFactor,
    c: &Array2<f64>,
    phi: &CappedPhi,
    problem: &SamplingProblem,
) -> Result<f64> {
    let mut acc = 0.0;
    let groups = x.partition.num_groups();
    for i in 0..groups {
        let ni = x.partition.size(i) as f64;

        let x_i = x.block(i);
        let wy = w.dot(&y.block(i));
        let nx = linalg::fro_norm(x_i);
        if nx > 0.0 {
            let coeff = ni * phi.derivative(nx) / nx;
            let mut res = x_i.to_owned();
            res.mapv_inplace(|v| v * coeff);
            res += &wy;
            acc += linalg::fro_norm_sq(res.view());
        } else {
            let slack = (linalg::fro_norm(wy.view()) - ni * phi.derivative_at_zero()).max(0.0);
            acc += slack * slack;
        }

        let y_i = y.block(i);
        let wx = w.t().dot(&x.block(i));
        let nyv = linalg::fro_norm(y_i);
        if nyv > 0.0 {
            let coeff = ni * phi.derivative(nyv) / nyv;
            let mut res = y_i.to_owned();
            res.mapv_inplace(|v| v * coeff);
            res += &wx;
            acc += linalg::fro_norm_sq(res.view());
        } else {
            let slack = (linalg::fro_norm(wx.view()) - ni * phi.derivative_at_zero()).max(0.0);
            acc += slack * slack;
        }
    }

    // C block: W must lie in the normal cone of Θ at C. Off the mask the
    // cone is {0}; on the mask it is {0} strictly inside the ball, the ray
    // through the residual on the boundary, and unconstrained when σ = 0.
    let w_obs = problem.apply(w.view())?;
    let mut unobs_sq = linalg::fro_norm_sq(w.view());
    for v in &w_obs {
        unobs_sq -= v * v;
    }
    acc += unobs_sq.max(0.0);
    if problem.sigma() > 0.0 {
        let r: Vec<f64> = problem
            .apply(c.view())?
            .iter()
            .zip(problem.b().iter())
            .map(|(a, b)| a - b)
            .collect();
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm < problem.sigma() * (1.0 - 1e-12) {
            acc += w_obs.iter().map(|v| v * v).sum::<f64>();
        } else {
            let t = (w_obs
                .iter()
                .zip(r.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (problem.sigma() * problem.sigma()))
            .max(0.0);
            acc += w_obs
                .iter()
                .zip(r.iter())
                .map(|(a, b)| (a - t * b) * (a - t * b))
                .sum::<f64>();
        }
    }
    Ok(acc.sqrt())
}

/// Stationarity surrogate of the current subproblem iterate, computed from
/// the maintained residual (W = η·R).
pub fn stationarity_residual(
    state: &ElamState,
    eta: f64,
    phi: &CappedPhi,
    problem: &SamplingProblem,
) -> Result<f64> {
    let w = state.r.mapv(|v| v * eta);
    kkt_residual_with(&w, &state.x, &state.y, &state.c, phi, problem)
}

/// Augmented Lagrangian Φ(X) + Φ̃(Y) + ⟨XYᵀ−C, S⟩ + η/2·‖XYᵀ−C‖²_F,
/// recomputed without the maintained residual. C is assumed feasible.
pub fn lagrangian_value(
    x: &GroupedFactor,
    y: &GroupedFactor,
    c: &Array2<f64>,
    s: &Array2<f64>,
    eta: f64,
    phi: &CappedPhi,
) -> Result<f64> {
    let gap = x.data.dot(&y.data.t()) - c;
    let quad = 0.5 * eta * linalg::fro_norm_sq(gap.view());
    let inner: f64 = gap.iter().zip(s.iter()).map(|(g, si)| g * si).sum();
    Ok(x.phi_penalty(phi, 2.0)? + y.phi_penalty(phi, 2.0)? + inner + quad)
}

/// Proximal update of the i-th X block at the extrapolated point. `gamma_hat`
/// is the momentum ratio shared by the X and Y updates of this group visit.
pub fn update_group_x(
    state: &mut ElamState,
    i: usize,
    phi: &CappedPhi,
    eta: f64,
    cfg: &ElamConfig,
    gamma_hat: f64,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(FlgsrError::domain(format!("eta must be positive, got {eta}")));
    }
    let ni = state.x.partition.size(i) as f64;
    let range = state.x.partition.range(i);

    let y_i = state.y.data.slice(ndarray::s![.., range.clone()]);
    let gram = y_i.t().dot(&y_i);
    let tau = (cfg.gamma * linalg::sym_top_eig(gram.view())).max(cfg.eps_floor);
    let w = gamma_hat.min(cfg.weight_cap() * (state.tau_x[i] / tau).sqrt());

    let x_old = state.x.data.slice(ndarray::s![.., range.clone()]).to_owned();
    let x_prev = state.x_prev.slice(ndarray::s![.., range.clone()]);
    // X̄ = X + w(X − X_prev); the prox argument is X̄ − (R·Y_i + (X̄−X)·YᵀY)/τ
    let mut xbar = &x_old * (1.0 + w);
    xbar.scaled_add(-w, &x_prev);
    let mut grad = state.r.dot(&y_i);
    if w != 0.0 {
        let d = &xbar - &x_old;
        general_mat_mul(1.0, &d, &gram, 1.0, &mut grad);
    }
    xbar.scaled_add(-1.0 / tau, &grad);

    let arg_norm = linalg::fro_norm(xbar.view());
    if !arg_norm.is_finite() {
        return Err(FlgsrError::numerical(format!("non-finite X prox argument in group {i}")));
    }
    let lambda = ni / (eta * tau);
    let x_new = phi.block_prox(lambda, xbar.view())?;

    // R ← R + (X_new − X_old)·Y_iᵀ
    let dx = &x_new - &x_old;
    general_mat_mul(1.0, &dx, &y_i.t(), 1.0, &mut state.r);
    let step_sq = linalg::fro_norm_sq(dx.view());

    state
        .x_prev
        .slice_mut(ndarray::s![.., range.clone()])
        .assign(&x_old);
    state
        .x
        .data
        .slice_mut(ndarray::s![.., range])
        .assign(&x_new);
    state.tau_x[i] = tau;
    Ok(step_sq)
}

/// Proximal update of the i-th Y block, mirroring `update_group_x` with the
/// freshly updated X block.
pub fn update_group_y(
    state: &mut ElamState,
    i: usize,
    phi: &CappedPhi,
    eta: f64,
    cfg: &ElamConfig,
    gamma_hat: f64,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(FlgsrError::domain(format!("eta must be positive, got {eta}")));
    }
    let ni = state.y.partition.size(i) as f64;
    let range = state.y.partition.range(i);

    let x_i = state.x.data.slice(ndarray::s![.., range.clone()]);
    let gram = x_i.t().dot(&x_i);
    let tau = (cfg.gamma * linalg::sym_top_eig(gram.view())).max(cfg.eps_floor);
    let w = gamma_hat.min(cfg.weight_cap() * (state.tau_y[i] / tau).sqrt());

    let y_old = state.y.data.slice(ndarray::s![.., range.clone()]).to_owned();
    let y_prev = state.y_prev.slice(ndarray::s![.., range.clone()]);
    let mut ybar = &y_old * (1.0 + w);
    ybar.scaled_add(-w, &y_prev);
    // prox argument: Ȳ − (Rᵀ·X_i + (Ȳ−Y)·XᵀX)/τ
    let mut grad = state.r.t().dot(&x_i);
    if w != 0.0 {
        let e = &ybar - &y_old;
        general_mat_mul(1.0, &e, &gram, 1.0, &mut grad);
    }
    ybar.scaled_add(-1.0 / tau, &grad);

    let arg_norm = linalg::fro_norm(ybar.view());
    if !arg_norm.is_finite() {
        return Err(FlgsrError::numerical(format!("non-finite Y prox argument in group {i}")));
    }
    let lambda = ni / (eta * tau);
    let y_new = phi.block_prox(lambda, ybar.view())?;

    // R ← R + X_i·(Y_new − Y_old)ᵀ
    let dy = &y_new - &y_old;
    general_mat_mul(1.0, &x_i, &dy.t(), 1.0, &mut state.r);
    let step_sq = linalg::fro_norm_sq(dy.view());

    state
        .y_prev
        .slice_mut(ndarray::s![.., range.clone()])
        .assign(&y_old);
    state
        .y
        .data
        .slice_mut(ndarray::s![.., range])
        .assign(&y_new);
    state.tau_y[i] = tau;
    Ok(step_sq)
}

/// Zeroes and deactivates every group whose X and Y blocks both lie at or
/// below the prune tolerance. Matrix shapes are preserved.
pub fn prune_zero_groups(state: &mut ElamState, cfg: &ElamConfig) {
    for i in 0..state.num_groups() {
        if !state.active[i] {
            continue;
        }
        let nx = linalg::fro_norm(state.x.block(i));
        let ny = linalg::fro_norm(state.y.block(i));
        if nx.max(ny) <= cfg.prune_tol {
            if nx > 0.0 || ny > 0.0 {
                // keep R faithful to the zeroed product
                let range = state.x.partition.range(i);
                let x_i = state.x.data.slice(ndarray::s![.., range.clone()]).to_owned();
                let y_i = state.y.data.slice(ndarray::s![.., range]);
                general_mat_mul(-1.0, &x_i, &y_i.t(), 1.0, &mut state.r);
            }
            state.x.block_mut(i).fill(0.0);
            state.y.block_mut(i).fill(0.0);
            let range = state.x.partition.range(i);
            state.x_prev.slice_mut(ndarray::s![.., range.clone()]).fill(0.0);
            state.y_prev.slice_mut(ndarray::s![.., range]).fill(0.0);
            state.active[i] = false;
        }
    }
}

/// C step: project XYᵀ + S/η onto Θ, then rebuild the maintained residual.
/// Returns ‖C_new − C_old‖²_F.
pub fn update_c(
    state: &mut ElamState,
    problem: &SamplingProblem,
    eta: f64,
    s: &Array2<f64>,
) -> Result<f64> {
    // XYᵀ + S/η = R + C by the residual invariant
    let mut c_new = &state.r + &state.c;
    problem.project_theta_inplace(&mut c_new)?;
    let step_sq = c_new
        .iter()
        .zip(state.c.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    state.c = c_new;
    state.refresh_residual(s, eta);
    Ok(step_sq)
}

/// Outcome of one inner solve.
#[derive(Debug, Clone, Copy)]
pub struct ElamReport {
    pub sweeps: usize,
    pub final_change: f64,
    /// Stationarity surrogate at the returned point.
    pub final_stat: f64,
}

/// Runs sweeps until the stationarity surrogate reaches `cfg.stat_tol`, the
/// normalized iterate change falls below `cfg.inner_tol`, or the sweep
/// budget is exhausted. A warm start that already meets the stationarity
/// target returns unchanged with zero sweeps.
#[allow(clippy::too_many_arguments)]
pub fn elam_solve(
    x0: GroupedFactor,
    y0: GroupedFactor,
    c0: Array2<f64>,
    s: &Array2<f64>,
    eta: f64,
    phi: &CappedPhi,
    problem: &SamplingProblem,
    cfg: &ElamConfig,
    mut observer: Option<&mut dyn FnMut(&SweepRecord)>,
) -> Result<(GroupedFactor, GroupedFactor, Array2<f64>, ElamReport)> {
    cfg.validate()?;
    phi.validate()?;
    let mut state = ElamState::new(x0, y0, c0, s, eta, cfg.prune_tol)?;
    let groups = state.num_groups();

    if let Some(obs) = observer.as_deref_mut() {
        let gap = state.product() - &state.c;
        obs(&SweepRecord {
            sweep: 0,
            eta,
            l_value: lagrangian_value(&state.x, &state.y, &state.c, s, eta, phi)?,
            c_step_sq: 0.0,
            tau_x: state.tau_x.clone(),
            tau_y: state.tau_y.clone(),
            dx_sq: vec![0.0; groups],
            dy_sq: vec![0.0; groups],
            feasibility: linalg::fro_norm(gap.view()),
        });
    }

    let mut report = ElamReport {
        sweeps: 0,
        final_change: f64::INFINITY,
        final_stat: f64::INFINITY,
    };

    // eq-style inexactness: a warm start that is already stationary enough
    // for the current target is returned as-is
    if cfg.stat_tol > 0.0 {
        let stat = stationarity_residual(&state, eta, phi, problem)?;
        if stat <= cfg.stat_tol {
            report.final_stat = stat;
            report.final_change = 0.0;
            let ElamState { x, y, c, .. } = state;
            return Ok((x, y, c, report));
        }
    }

    for sweep in 1..=cfg.max_inner {
        let c_before = state.c.clone();
        let mut dx_sq = vec![0.0; groups];
        let mut dy_sq = vec![0.0; groups];

        for i in 0..groups {
            if !state.active[i] {
                continue;
            }
            let t_new = t_next(state.t_cur);
            let gamma_hat = (state.t_cur - 1.0) / t_new;
            dx_sq[i] =
                update_group_x(&mut state, i, phi, eta, cfg, gamma_hat).map_err(|e| e.at_sweep(sweep))?;
            dy_sq[i] =
                update_group_y(&mut state, i, phi, eta, cfg, gamma_hat).map_err(|e| e.at_sweep(sweep))?;
            state.t_cur = t_new;
        }

        prune_zero_groups(&mut state, cfg);
        let c_step_sq = update_c(&mut state, problem, eta, s)?;

        let dx = dx_sq.iter().sum::<f64>().sqrt();
        let dy = dy_sq.iter().sum::<f64>().sqrt();
        let dc = state
            .c
            .iter()
            .zip(c_before.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let c_norm = linalg::fro_norm(state.c.view());
        let change = dx.max(dy).max(dc) / (1.0 + c_norm);
        if !change.is_finite() || !c_norm.is_finite() {
            return Err(FlgsrError::Numerical {
                sweep,
                outer: None,
                what: "non-finite iterate".into(),
            });
        }

        report.sweeps = sweep;
        report.final_change = change;
        report.final_stat = stationarity_residual(&state, eta, phi, problem)?;

        if let Some(obs) = observer.as_deref_mut() {
            let gap = state.product() - &state.c;
            obs(&SweepRecord {
                sweep,
                eta,
                l_value: lagrangian_value(&state.x, &state.y, &state.c, s, eta, phi)?,
                c_step_sq,
                tau_x: state.tau_x.clone(),
                tau_y: state.tau_y.clone(),
                dx_sq,
                dy_sq,
                feasibility: linalg::fro_norm(gap.view()),
            });
        }

        if (cfg.stat_tol > 0.0 && report.final_stat <= cfg.stat_tol) || change <= cfg.inner_tol {
            break;
        }
    }

    let ElamState { x, y, c, .. } = state;
    Ok((x, y, c, report))
}
