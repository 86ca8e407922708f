//! Alternating beamformer / artificial-noise ascent.
//!
//! Subproblem I updates each beamformer with the users' AN held fixed. The
//! weighted sum rate `Σ μ_k log₂(1 + M_k)` is lower-bounded by the Lagrangian
//! dual surrogate
//!
//! ```text
//! h(W, ζ) = Σ_k μ_k [ (1+ζ_k) M̂_k(W) + log₂(1+ζ_k) - ζ_k + c₀ ],   M̂_k = |e_k|² / (|e_k|² + B_k)
//! ```
//!
//! with `c₀ = 1/ln2 - 1 + log₂(ln2)`. The constant makes the bound tight
//! at its maximizer `1 + ζ_k = (1 + M_k)/ln2`; it has no effect on any update.
//! `M̂_k` is replaced by the quadratic transform `2Re{y_k* e_k} - |y_k|² B̂_k`
//! (tight at `y_k = e_k / B̂_k`). Expanding `B̂_k` gives a quadratic penalty
//! `w_kᴴ D w_k` with `D = Σ_i μ_i (1+ζ_i) |y_i|² h_iᴴ h_i`, which the
//! non-homogeneous bound `-wᴴDw ≥ -κ‖w‖² + 2Re{wᴴ(κI - D)z} - zᴴ(κI - D)z`
//! (for `κ ≥ λ_max(D)`) turns into an isotropic quadratic. Its maximizer is
//! the closed form `w* = z + (μ_k(1+ζ_k) h_kᴴ y_k - D z)/κ`, and maximizing
//! it over a convex set is exactly a Euclidean projection of `w*`.
//!
//! Subproblem II runs the same machinery on `n`. Because `n_eff` lives in
//! the null space of every `h_k`, `D̃_k` vanishes numerically and the update
//! is the identity up to rounding; the AN budget projection and the sensing
//! repair are what actually move `n`.

use std::f64::consts::{LN_2, LOG2_E};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, row_adjoint, row_dot, CMatrix, CVector, C64};
use crate::metrics::{self, ConstraintResiduals, DesignState, MetricsReport};
use crate::projections::{
    self, beamformer_caps, project_an, project_beamformer_with, sensing_feasibility_repair,
    shaped_an, spectral_upper_bound_with, LeakageCap, ProjectionOptions, QuadraticCap,
};
use crate::robust;
use crate::scenario::{Scenario, UserSet};

/// Constant that makes the dual surrogate tight: `1/ln2 - 1 + log₂(ln2)`.
pub fn dual_offset() -> f64 {
    LOG2_E - 1.0 + LN_2.log2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Outer iterations per weight phase.
    pub max_outer_iters: usize,
    pub inner_iters_per_subproblem: usize,
    /// Relative change of the weighted sum rate that ends a phase.
    pub convergence_tol: f64,
    /// Margin applied over the power-iteration estimate of `λ_max`.
    pub kappa_safety: f64,
    pub weight_adaptation: bool,
    pub weight_step: f64,
    pub max_adaptation_rounds: usize,
    /// Also cap beam leakage at `θ_j ± θ_0` during the beamformer projection.
    pub enforce_beamwidth: bool,
    /// Replace the nominal secrecy caps by the angular-uncertainty LMI.
    pub robust: bool,
    /// Ridge `δ = ridge_per_antenna · N_t` added before inverting the LMI matrix.
    pub ridge_per_antenna: f64,
    /// Steer the AN toward the targets (and uncertainty endpoints in robust
    /// mode) with zero gain at the beamwidth edges, when that loosens every
    /// beamformer cap.
    pub an_shaping: bool,
    /// Extra runs from random beamformers. A restart replaces the main run
    /// only if it converged to a higher weighted sum rate.
    pub restarts: usize,
    /// Maximum doublings of an accepted beamformer step; `0` disables.
    pub step_expansion: usize,
    /// Fraction of the AN budget used by the random initial AN.
    pub an_init_fraction: f64,
    pub projection_max_cycles: usize,
    pub projection_tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            inner_iters_per_subproblem: 1,
            convergence_tol: 1e-6,
            kappa_safety: projections::KAPPA_SAFETY,
            weight_adaptation: true,
            weight_step: 0.25,
            max_adaptation_rounds: 10,
            enforce_beamwidth: true,
            robust: false,
            ridge_per_antenna: 1e-6,
            an_shaping: true,
            restarts: 5,
            step_expansion: 8,
            an_init_fraction: 0.5,
            projection_max_cycles: 500,
            projection_tol: 1e-12,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.inner_iters_per_subproblem == 0 {
            return Err(Error::config("iteration counts must be positive"));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol < 1.0) {
            return Err(Error::config("convergence_tol must lie in (0, 1)"));
        }
        if !(self.kappa_safety >= 1.0) {
            return Err(Error::config("kappa_safety must be at least 1"));
        }
        if !(self.weight_step > 0.0) {
            return Err(Error::config("weight_step must be positive"));
        }
        if !(0.0..=1.0).contains(&self.an_init_fraction) {
            return Err(Error::config("an_init_fraction must lie in [0, 1]"));
        }
        if !(self.ridge_per_antenna > 0.0) {
            return Err(Error::config("ridge_per_antenna must be positive"));
        }
        if self.projection_max_cycles == 0 || !(self.projection_tol > 0.0) {
            return Err(Error::config("projection settings must be positive"));
        }
        Ok(())
    }

    pub fn projection(&self) -> ProjectionOptions {
        ProjectionOptions {
            max_cycles: self.projection_max_cycles,
            tolerance: self.projection_tol,
        }
    }
}

/// Quadratic-transform and dual-transform auxiliaries for both subproblems.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub y: Vec<C64>,
    pub zeta: Vec<f64>,
    /// Column `k` is the anchor `z_k`.
    pub z: CMatrix,
    pub y_tilde: Vec<C64>,
    pub zeta_tilde: Vec<f64>,
    pub z_an: CVector,
    /// Number of ζ updates that hit the nonpositive-denominator fallback.
    pub zeta_fallbacks: usize,
}

impl AuxState {
    pub fn new(num_antennas: usize, num_users: usize) -> Self {
        Self {
            y: vec![C64::default(); num_users],
            zeta: vec![0.0; num_users],
            z: CMatrix::zeros(num_antennas, num_users),
            y_tilde: vec![C64::default(); num_users],
            zeta_tilde: vec![0.0; num_users],
            z_an: CVector::zeros(num_antennas),
            zeta_fallbacks: 0,
        }
    }
}

/// `(e_k, B_k)` with `e_k = h_k w_k` and
/// `B_k = Σ_{i≠k} |h_k w_i|² + h_k R_n_eff h_kᴴ + σ_k²`.
pub fn assemble_ratio_terms(state: &DesignState, users: &UserSet, k: usize) -> (C64, f64) {
    let e = row_dot(&users.channels, k, &state.beamformer(k));
    let w = state.beamformers();
    let interference: f64 = (0..state.num_users())
        .filter(|&i| i != k)
        .map(|i| row_dot(&users.channels, k, &w.column(i).into_owned()).norm_sqr())
        .sum();
    let an = state.an_gain(&row_adjoint(&users.channels, k));
    (e, interference + an + users.noise_variances[k])
}

/// `y* = e / (|e|² + B)`.
pub fn update_y(e: C64, b: f64) -> C64 {
    e / (e.norm_sqr() + b)
}

/// Quadratic-transform value `2Re{y* e} - |y|² (|e|² + B)`; equals
/// `|e|²/(|e|² + B)` at `y = update_y(e, B)` and is below it elsewhere.
pub fn qt_value(y: C64, e: C64, b: f64) -> f64 {
    2.0 * (y.conj() * e).re - y.norm_sqr() * (e.norm_sqr() + b)
}

/// Outcome of a ζ update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaUpdate {
    pub zeta: f64,
    pub fallback: bool,
}

/// Stationary ζ of `(1+ζ) q + log₂(1+ζ) - ζ` where `q` is the quadratic-transform
/// value at `y`:
///
/// `ζ* = 1 / (ln2 · (1 + ñ + σ²|y|² - 2Re{y* e})) - 1`, with
/// `ñ = |y|² (|e|² + Σ_{i≠k}|h_k w_i|² + h_k R h_kᴴ)`, i.e. the bracket is `1 - q`.
/// A nonpositive bracket (only reachable through rounding) falls back to the
/// tight value `(1 + |e|²/B)/ln2 - 1`.
pub fn zeta_from_terms(e: C64, b: f64, y: C64) -> ZetaUpdate {
    let bracket = 1.0 - qt_value(y, e, b);
    if bracket > 0.0 && bracket.is_finite() {
        ZetaUpdate {
            zeta: 1.0 / (LN_2 * bracket) - 1.0,
            fallback: false,
        }
    } else {
        ZetaUpdate {
            zeta: (1.0 + e.norm_sqr() / b) * LOG2_E - 1.0,
            fallback: true,
        }
    }
}

/// Updates `ζ_k` from the current design and `aux.y[k]`.
pub fn update_zeta(state: &DesignState, users: &UserSet, aux: &AuxState, k: usize) -> ZetaUpdate {
    let (e, b) = assemble_ratio_terms(state, users, k);
    zeta_from_terms(e, b, aux.y[k])
}

/// Refreshes every `y_k` and `ζ_k` at the current design.
pub fn refresh_beam_aux(state: &DesignState, users: &UserSet, aux: &mut AuxState) {
    for k in 0..users.len() {
        let (e, b) = assemble_ratio_terms(state, users, k);
        aux.y[k] = update_y(e, b);
        let z = zeta_from_terms(e, b, aux.y[k]);
        aux.zeta[k] = z.zeta;
        aux.zeta_fallbacks += z.fallback as usize;
    }
}

/// `D = Σ_i μ_i (1+ζ_i) |y_i|² h_iᴴ h_i`, shared by every user's update.
pub fn assemble_d(users: &UserSet, weights: &[f64], aux: &AuxState) -> CMatrix {
    let n = users.channels.ncols();
    let mut d = CMatrix::zeros(n, n);
    for (i, &mu) in weights.iter().enumerate().take(users.len()) {
        let coef = mu * (1.0 + aux.zeta[i]) * aux.y[i].norm_sqr();
        if coef == 0.0 {
            continue;
        }
        let hi = row_adjoint(&users.channels, i);
        d += &hi * hi.adjoint() * c(coef, 0.0);
    }
    d
}

/// Unprojected non-homogeneous QT maximizer
/// `w* = z + (μ_k(1+ζ_k) h_kᴴ y_k - D z) / κ`.
pub fn update_w(
    users: &UserSet,
    weights: &[f64],
    aux: &AuxState,
    k: usize,
    kappa: f64,
    d: &CMatrix,
    z: &CVector,
) -> Result<CVector> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("κ must be positive, got {kappa}")));
    }
    let hk = row_adjoint(&users.channels, k);
    let linear = hk * (aux.y[k] * (weights[k] * (1.0 + aux.zeta[k])));
    Ok(z + (linear - d * z) / c(kappa, 0.0))
}

/// Dual surrogate with the quadratic transform, at the auxiliaries in `aux`.
pub fn dual_surrogate(
    state: &DesignState,
    users: &UserSet,
    weights: &[f64],
    aux: &AuxState,
) -> f64 {
    let offset = dual_offset();
    (0..users.len())
        .map(|k| {
            let (e, b) = assemble_ratio_terms(state, users, k);
            let z = aux.zeta[k];
            weights[k] * ((1.0 + z) * qt_value(aux.y[k], e, b) + (1.0 + z).log2() - z + offset)
        })
        .sum()
}

/// Dual surrogate with the exact `M̂_k`, at the given ζ.
pub fn dual_surrogate_exact(
    state: &DesignState,
    users: &UserSet,
    weights: &[f64],
    zeta: &[f64],
) -> f64 {
    let offset = dual_offset();
    (0..users.len())
        .map(|k| {
            let (e, b) = assemble_ratio_terms(state, users, k);
            let m_hat = e.norm_sqr() / (e.norm_sqr() + b);
            let z = zeta[k];
            weights[k] * ((1.0 + z) * m_hat + (1.0 + z).log2() - z + offset)
        })
        .sum()
}

/// Fully expanded non-homogeneous surrogate summed over users:
///
/// ```text
/// Σ_k μ_k [log₂(1+ζ_k) - ζ_k + c₀]
///   + Σ_k ( 2Re{μ_k(1+ζ_k) y_k* h_k w_k + w_kᴴ(κ_k I - D) z_k} + z_kᴴ(D - κ_k I) z_k
///           - κ_k ‖w_k‖² - μ_k(1+ζ_k) σ_k² |y_k|² - μ_k(1+ζ_k) |y_k|² |h_k P⊥ n|² )
/// ```
///
/// Anchors are the columns of `aux.z`. With `z = W` it equals
/// [`dual_surrogate`] for any `κ`.
pub fn expanded_surrogate(
    state: &DesignState,
    users: &UserSet,
    weights: &[f64],
    aux: &AuxState,
    kappas: &[f64],
) -> f64 {
    let d = assemble_d(users, weights, aux);
    let offset = dual_offset();
    let n_eff = state.effective_an();
    let mut total = 0.0;
    for k in 0..users.len() {
        let zk = aux.zeta[k];
        let coef = weights[k] * (1.0 + zk);
        let w = state.beamformer(k);
        let z = aux.z.column(k).into_owned();
        let kappa = kappas[k];
        let kd = CMatrix::identity(d.nrows(), d.ncols()) * c(kappa, 0.0) - &d;
        let e = row_dot(&users.channels, k, &w);
        let an_leak = row_dot(&users.channels, k, n_eff).norm_sqr();
        total += weights[k] * ((1.0 + zk).log2() - zk + offset);
        total += 2.0 * (aux.y[k].conj() * e * coef + w.dotc(&(&kd * &z))).re;
        total -= z.dotc(&(&kd * &z)).re;
        total -= kappa * w.norm_squared();
        total -= coef * users.noise_variances[k] * aux.y[k].norm_sqr();
        total -= coef * aux.y[k].norm_sqr() * an_leak;
    }
    total
}

/// `D̃_k = μ_k (1+ζ̃_k) |ỹ_k|² P⊥ h_kᴴ h_k P⊥`.
pub fn assemble_d_tilde(scenario: &Scenario, weights: &[f64], aux: &AuxState, k: usize) -> CMatrix {
    let p = scenario.projector.matrix();
    let g = p * row_adjoint(&scenario.users.channels, k);
    let coef = weights[k] * (1.0 + aux.zeta_tilde[k]) * aux.y_tilde[k].norm_sqr();
    &g * g.adjoint() * c(coef, 0.0)
}

/// Refreshes `ỹ_k` and `ζ̃_k` at the current design.
pub fn refresh_an_aux(state: &DesignState, users: &UserSet, aux: &mut AuxState) {
    for k in 0..users.len() {
        let (e, b) = assemble_ratio_terms(state, users, k);
        aux.y_tilde[k] = update_y(e, b);
        let z = zeta_from_terms(e, b, aux.y_tilde[k]);
        aux.zeta_tilde[k] = z.zeta;
        aux.zeta_fallbacks += z.fallback as usize;
    }
}

/// Unprojected AN update `n* = (Σ κ̃_k)⁻¹ Σ_k (κ̃_k I - D̃_k) n`.
///
/// Returns `n` unchanged if every `κ̃_k` is zero.
pub fn update_n(
    state: &DesignState,
    scenario: &Scenario,
    weights: &[f64],
    aux: &mut AuxState,
    kappa_safety: f64,
) -> Result<CVector> {
    let n = state.an_vector().clone();
    aux.z_an = n.clone();
    let mut kappa_sum = 0.0;
    let mut acc = CVector::zeros(n.len());
    for k in 0..scenario.num_users() {
        let dk = assemble_d_tilde(scenario, weights, aux, k);
        let kappa = spectral_upper_bound_with(&dk, kappa_safety)?;
        kappa_sum += kappa;
        acc += &n * c(kappa, 0.0) - dk * &n;
    }
    if kappa_sum <= 0.0 {
        return Ok(n);
    }
    Ok(acc / c(kappa_sum, 0.0))
}

/// Multiplies the weight of every user below its SINR threshold by
/// `1 + step`, then rescales so the weights sum to `K`. Unchanged if all
/// thresholds are met.
pub fn adapt_weights(weights: &[f64], sinrs: &[f64], thresholds: &[f64], step: f64) -> Vec<f64> {
    let violators: Vec<bool> = sinrs.iter().zip(thresholds).map(|(s, t)| s < t).collect();
    if !violators.iter().any(|&v| v) {
        return weights.to_vec();
    }
    let bumped: Vec<f64> = weights
        .iter()
        .zip(&violators)
        .map(|(&w, &v)| if v { w * (1.0 + step) } else { w })
        .collect();
    let total: f64 = bumped.iter().sum();
    let k = weights.len() as f64;
    bumped.iter().map(|w| w * k / total).collect()
}

/// Matched-filter beams at full per-user power and a random null-space AN
/// using `an_init_fraction` of the AN budget.
pub fn initial_state(scenario: &Scenario, options: &SolverOptions) -> DesignState {
    let users = &scenario.users;
    let nt = scenario.num_antennas();
    let mut w = CMatrix::zeros(nt, users.len());
    for k in 0..users.len() {
        let hk = row_adjoint(&users.channels, k);
        let scale = users.per_user_power[k].sqrt() / hk.norm();
        w.set_column(k, &(hk * c(scale, 0.0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(2);
    let raw = CVector::from_fn(nt, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re, im)
    });
    let eff_power = scenario.projector.apply(&raw).norm_squared();
    let target = options.an_init_fraction * scenario.an_power_budget();
    let n = if eff_power > 0.0 && target > 0.0 {
        raw * c((target / eff_power).sqrt(), 0.0)
    } else {
        CVector::zeros(nt)
    };
    DesignState::new(w, n, &scenario.projector)
}

/// Feasible-set projection of a beamformer for user `k` at the current AN.
pub struct BeamProjector {
    caps: Vec<LeakageCap>,
    lmi: Vec<robust::LmiBound>,
    power: Vec<f64>,
    options: ProjectionOptions,
}

impl BeamProjector {
    pub fn new(scenario: &Scenario, state: &DesignState, options: &SolverOptions) -> Result<Self> {
        let caps = beamformer_caps(scenario, state, !options.robust, options.enforce_beamwidth);
        let lmi = if options.robust {
            robust::robust_leakage_bounds(scenario, state, options.ridge_per_antenna)?
        } else {
            Vec::new()
        };
        Ok(Self {
            caps,
            lmi,
            power: scenario.users.per_user_power.clone(),
            options: options.projection(),
        })
    }

    pub fn caps(&self) -> &[LeakageCap] {
        &self.caps
    }

    /// Returns the projected vector and whether the feasible set was empty.
    pub fn project(&self, k: usize, w: &CVector) -> (CVector, bool) {
        let quads: Vec<QuadraticCap> = self
            .lmi
            .iter()
            .map(|b| QuadraticCap {
                matrix: b.matrix().clone(),
                cap: b.scale(),
            })
            .collect();
        let out = project_beamformer_with(w, self.power[k], &self.caps, &quads, self.options);
        let mut x = out.w;
        for bound in &self.lmi {
            x = bound.enforce(&x);
        }
        (x, out.infeasible)
    }

    pub fn is_feasible(&self, k: usize, w: &CVector) -> bool {
        let tol = 1e-9;
        w.norm_squared() <= self.power[k] * (1.0 + tol)
            && self
                .caps
                .iter()
                .all(|cap| cap.leakage(w) <= cap.cap * (1.0 + tol) + 1e-15)
            && self.lmi.iter().all(|b| b.scalar_form(w) <= 1.0 + tol)
    }
}

/// One outer iteration record.
#[derive(Debug, Clone, Copy, Default)]
struct IterationStats {
    surrogate: f64,
    repaired: bool,
    infeasible_projections: usize,
}

fn subproblem_one(
    scenario: &Scenario,
    state: &mut DesignState,
    weights: &[f64],
    aux: &mut AuxState,
    options: &SolverOptions,
) -> Result<IterationStats> {
    let users = &scenario.users;
    let projector = BeamProjector::new(scenario, state, options)?;
    let mut stats = IterationStats::default();
    for k in 0..users.len() {
        refresh_beam_aux(state, users, aux);
        let d = assemble_d(users, weights, aux);
        let kappa = spectral_upper_bound_with(&d, options.kappa_safety)?;
        let z = state.beamformer(k);
        aux.z.set_column(k, &z);
        let w_star = update_w(users, weights, aux, k, kappa, &d, &z)?;
        let (candidate, infeasible) = projector.project(k, &w_star);
        stats.infeasible_projections += infeasible as usize;
        // The surrogate in w_k is -κ‖w - w*‖² + const; keep the anchor if the
        // projected point is farther from w* (possible only when the set
        // projection is inexact).
        let accept = !projector.is_feasible(k, &z)
            || (&candidate - &w_star).norm() <= (&z - &w_star).norm() * (1.0 + 1e-12);
        if accept {
            state.set_beamformer(k, &candidate);
            if options.step_expansion > 0 {
                expand_step(
                    state, users, weights, &projector, k, &z, &candidate, options,
                );
            }
        }
    }
    stats.surrogate = dual_surrogate(state, users, weights, aux);
    Ok(stats)
}

/// Tries `z + 2^i (w - z)` for `i = 1, 2, ...` after an accepted update and
/// keeps the last projected point that still raises the weighted sum rate.
#[allow(clippy::too_many_arguments)]
fn expand_step(
    state: &mut DesignState,
    users: &UserSet,
    weights: &[f64],
    projector: &BeamProjector,
    k: usize,
    z: &CVector,
    w: &CVector,
    options: &SolverOptions,
) {
    let step = w - z;
    if step.norm() <= 1e-12 * z.norm().max(1.0) {
        return;
    }
    let mut best = metrics::weighted_sum_rate(state, users, weights);
    let mut kept = w.clone();
    let mut trial = state.clone();
    let mut scale = 1.0;
    for _ in 0..options.step_expansion {
        scale *= 2.0;
        let (x, infeasible) = projector.project(k, &(z + &step * c(scale, 0.0)));
        if infeasible || !projector.is_feasible(k, &x) {
            break;
        }
        trial.set_beamformer(k, &x);
        let value = metrics::weighted_sum_rate(&trial, users, weights);
        if !(value > best) {
            break;
        }
        best = value;
        kept = x;
    }
    state.set_beamformer(k, &kept);
}

/// Angles the shaped AN aims at: every target, plus both uncertainty
/// endpoints in robust mode.
fn aim_angles(scenario: &Scenario, options: &SolverOptions) -> Result<Vec<f64>> {
    let mut angles = Vec::new();
    for j in 0..scenario.num_targets() {
        let unc = robust::AngularUncertainty::of_target(&scenario.targets, j)?;
        angles.push(unc.nominal_deg);
        if options.robust && unc.half_width_deg > 0.0 {
            angles.extend(unc.endpoints());
        }
    }
    Ok(angles)
}

/// AN gain each beamwidth edge can take while every current beam stays
/// within its edge cap.
fn an_edge_room(scenario: &Scenario, state: &DesignState, options: &SolverOptions) -> Vec<f64> {
    let targets = &scenario.targets;
    let k = scenario.num_users();
    let mut room = Vec::new();
    for j in 0..targets.len() {
        let limit = targets.sensing_thresholds[j] / (2.0 * targets.path_gains[j].norm());
        for edge in targets.beamwidth_edges(j) {
            let a = scenario.steering(edge);
            let leaks = (0..k).map(|i| state.beamformer(i).dotc(&a).norm_sqr());
            let used = if options.enforce_beamwidth {
                k as f64 * leaks.fold(0.0, f64::max)
            } else {
                leaks.sum()
            };
            room.push(limit - used);
        }
    }
    room
}

/// Replaces the AN by [`shaped_an`] when every current beam stays feasible
/// under the caps the new AN induces, so the objective cannot drop.
fn shape_an(scenario: &Scenario, state: &mut DesignState, options: &SolverOptions) -> Result<()> {
    let room = an_edge_room(scenario, state, options);
    let Some(n) = shaped_an(scenario, &aim_angles(scenario, options)?, &room) else {
        return Ok(());
    };
    let mut candidate = state.clone();
    candidate.set_an(n, &scenario.projector);
    let projector = BeamProjector::new(scenario, &candidate, options)?;
    if (0..scenario.num_users()).all(|k| projector.is_feasible(k, &state.beamformer(k))) {
        *state = candidate;
    }
    Ok(())
}

fn subproblem_two(
    scenario: &Scenario,
    state: &mut DesignState,
    weights: &[f64],
    aux: &mut AuxState,
    options: &SolverOptions,
) -> Result<(bool, Vec<usize>)> {
    refresh_an_aux(state, &scenario.users, aux);
    let n_star = update_n(state, scenario, weights, aux, options.kappa_safety)?;
    let n = project_an(&n_star, &scenario.projector, scenario.an_power_budget())?;
    state.set_an(n, &scenario.projector);
    if options.an_shaping {
        shape_an(scenario, state, options)?;
    }
    let outcome = sensing_feasibility_repair(state, scenario);
    *state = outcome.state;
    Ok((outcome.fired, outcome.unrepaired))
}

/// Serializable copy of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSnapshot {
    /// `[k][m] = [re, im]` of `w_k`.
    pub beamformers: Vec<Vec<[f64; 2]>>,
    pub an_vector: Vec<[f64; 2]>,
}

impl From<&DesignState> for DesignSnapshot {
    fn from(state: &DesignState) -> Self {
        Self {
            beamformers: state
                .beamformers()
                .column_iter()
                .map(|w| w.iter().map(|x| [x.re, x.im]).collect())
                .collect(),
            an_vector: state.an_vector().iter().map(|x| [x.re, x.im]).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub seed: u64,
    /// Weighted sum rate after each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Sum secrecy rate after each outer iteration.
    pub secrecy_trace: Vec<f64>,
    /// Dual surrogate after each Subproblem I pass.
    pub surrogate_trace: Vec<f64>,
    /// Weight-phase index of each iteration.
    pub phase_trace: Vec<usize>,
    /// Whether the sensing repair changed the AN in each iteration.
    pub repair_trace: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub phase_converged: Vec<bool>,
    /// Weights used in each phase.
    pub weight_history: Vec<Vec<f64>>,
    pub residuals: ConstraintResiduals,
    pub final_metrics: MetricsReport,
    pub unrepaired_targets: Vec<usize>,
    pub infeasible_projections: usize,
    pub zeta_fallbacks: usize,
    pub design: DesignSnapshot,
    #[serde(skip)]
    pub final_state: DesignState,
}

impl SolverReport {
    /// Final weighted sum rate.
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }

    /// Largest decrease of the objective between consecutive iterations of
    /// the same phase, skipping iterations where the sensing repair fired.
    pub fn max_phase_decrease(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.objective_trace.len() {
            if self.phase_trace[i] != self.phase_trace[i - 1]
                || self.repair_trace[i]
                || self.repair_trace[i - 1]
            {
                continue;
            }
            worst = worst.max(self.objective_trace[i - 1] - self.objective_trace[i]);
        }
        worst
    }
}

/// Residuals with the robust LMI entries filled in when robust mode is on.
pub fn final_residuals(
    scenario: &Scenario,
    state: &DesignState,
    options: &SolverOptions,
) -> Result<ConstraintResiduals> {
    let mut residuals = metrics::check_constraints(state, scenario);
    if options.robust {
        residuals.lmi = Some(robust::lmi_residuals(
            scenario,
            state,
            options.ridge_per_antenna,
        )?);
    }
    Ok(residuals)
}

/// Runs the alternating ascent from [`initial_state`].
pub fn run_algorithm1(scenario: &Scenario, options: &SolverOptions) -> Result<SolverReport> {
    options.validate()?;
    let mut best = run_from(scenario, options, initial_state(scenario, options))?;
    for start in 1..=options.restarts {
        let report = run_from(scenario, options, random_start(scenario, options, start))?;
        if report.converged && start_score(scenario, &report) > start_score(scenario, &best) {
            best = report;
        }
    }
    Ok(best)
}

/// Weighted sum rate at the configured weights, used to rank starts.
fn start_score(scenario: &Scenario, report: &SolverReport) -> f64 {
    metrics::weighted_sum_rate(
        &report.final_state,
        &scenario.users,
        &scenario.users.weights,
    )
}

/// Start `index`: Gaussian beams at full per-user power and the usual
/// random AN, drawn from stream `2 + index` of the seed.
pub fn random_start(scenario: &Scenario, options: &SolverOptions, index: usize) -> DesignState {
    let users = &scenario.users;
    let nt = scenario.num_antennas();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(2 + index as u64);
    let mut draw = || {
        CVector::from_fn(nt, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c(re, im)
        })
    };
    let mut w = CMatrix::zeros(nt, users.len());
    for k in 0..users.len() {
        let g = draw();
        w.set_column(k, &(&g * c(users.per_user_power[k].sqrt() / g.norm(), 0.0)));
    }
    let raw = draw();
    let eff_power = scenario.projector.apply(&raw).norm_squared();
    let target = options.an_init_fraction * scenario.an_power_budget();
    let n = if eff_power > 0.0 && target > 0.0 {
        raw * c((target / eff_power).sqrt(), 0.0)
    } else {
        CVector::zeros(nt)
    };
    DesignState::new(w, n, &scenario.projector)
}

/// Runs the alternating ascent from a given design.
pub fn run_from(
    scenario: &Scenario,
    options: &SolverOptions,
    mut state: DesignState,
) -> Result<SolverReport> {
    options.validate()?;
    let users = &scenario.users;
    if users.channels.iter().all(|x| x.norm_sqr() == 0.0) {
        return Err(Error::config("all user channels are zero"));
    }
    let mut aux = AuxState::new(scenario.num_antennas(), users.len());
    let mut weights = users.weights.clone();
    let mut report = SolverReport {
        seed: options.seed,
        objective_trace: Vec::new(),
        secrecy_trace: Vec::new(),
        surrogate_trace: Vec::new(),
        phase_trace: Vec::new(),
        repair_trace: Vec::new(),
        iterations: 0,
        converged: false,
        phase_converged: Vec::new(),
        weight_history: vec![weights.clone()],
        residuals: metrics::check_constraints(&state, scenario),
        final_metrics: metrics::evaluate(&state, scenario),
        unrepaired_targets: Vec::new(),
        infeasible_projections: 0,
        zeta_fallbacks: 0,
        design: DesignSnapshot::from(&state),
        final_state: state.clone(),
    };

    let rounds = if options.weight_adaptation {
        options.max_adaptation_rounds
    } else {
        0
    };
    for phase in 0..=rounds {
        let mut previous = metrics::weighted_sum_rate(&state, users, &weights);
        let mut converged = false;
        for _ in 0..options.max_outer_iters {
            let mut stats = IterationStats::default();
            for _ in 0..options.inner_iters_per_subproblem {
                let s = subproblem_one(scenario, &mut state, &weights, &mut aux, options)?;
                stats.surrogate = s.surrogate;
                stats.infeasible_projections += s.infeasible_projections;
            }
            for _ in 0..options.inner_iters_per_subproblem {
                let (fired, unrepaired) =
                    subproblem_two(scenario, &mut state, &weights, &mut aux, options)?;
                stats.repaired |= fired;
                report.unrepaired_targets = unrepaired;
            }
            let objective = metrics::weighted_sum_rate(&state, users, &weights);
            let secrecy =
                metrics::sum_secrecy_rate(&state, users, &scenario.targets, &scenario.geometry)?;
            report.objective_trace.push(objective);
            report.secrecy_trace.push(secrecy);
            report.surrogate_trace.push(stats.surrogate);
            report.phase_trace.push(phase);
            report.repair_trace.push(stats.repaired);
            report.infeasible_projections += stats.infeasible_projections;
            report.iterations += 1;
            let change = (objective - previous).abs();
            previous = objective;
            if change <= options.convergence_tol * objective.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
        report.phase_converged.push(converged);
        if phase == rounds {
            break;
        }
        let sinrs: Vec<f64> = (0..users.len())
            .map(|k| metrics::user_sinr(&state, users, k))
            .collect::<Result<_>>()?;
        let next = adapt_weights(
            &weights,
            &sinrs,
            &users.sinr_thresholds,
            options.weight_step,
        );
        if next == weights {
            break;
        }
        weights = next;
        report.weight_history.push(weights.clone());
    }

    report.converged = report.phase_converged.iter().all(|&c| c);
    report.zeta_fallbacks = aux.zeta_fallbacks;
    report.residuals = final_residuals(scenario, &state, options)?;
    report.final_metrics = metrics::evaluate(&state, scenario);
    report.final_metrics.constraint_residuals = report.residuals.clone();
    report.design = DesignSnapshot::from(&state);
    report.final_state = state;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ratio_terms_single_user() {
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let users = UserSet::new(h, vec![1.0], vec![1.0], vec![4.0], vec![1.0]).unwrap();
        let w = CMatrix::from_column_slice(2, 1, &[c(2.0, 0.0), c(0.0, 0.0)]);
        let state = DesignState::without_an(w);
        let (e, b) = assemble_ratio_terms(&state, &users, 0);
        assert_eq!(e, c(2.0, 0.0));
        assert_eq!(b, 1.0);

        let zero = DesignState::zeros(2, 1);
        let (e, b) = assemble_ratio_terms(&zero, &users, 0);
        assert_eq!(e, c(0.0, 0.0));
        assert_eq!(e.norm_sqr() / b, 0.0);
    }

    #[test]
    fn y_update_examples() {
        assert_eq!(update_y(c(1.0, 0.0), 1.0), c(0.5, 0.0));
        assert_eq!(update_y(c(0.0, 0.0), 3.0), c(0.0, 0.0));
    }

    #[test]
    fn zeta_at_zero_design() {
        // q = 0 -> ζ* = 1/ln2 - 1
        let z = zeta_from_terms(c(0.0, 0.0), 1.0, c(0.0, 0.0));
        assert!(!z.fallback);
        assert_abs_diff_eq!(z.zeta, LOG2_E - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.zeta, 0.4427, epsilon = 1e-4);
    }

    #[test]
    fn zeta_fallback_on_bad_bracket() {
        // y chosen so that q > 1 is impossible for real B > 0; force it with B < 0.
        let z = zeta_from_terms(c(1.0, 0.0), -0.5, c(2.0, 0.0));
        assert!(z.fallback);
    }

    #[test]
    fn dual_offset_value() {
        // 1/ln2 - 1 + log2(ln2)
        assert_abs_diff_eq!(dual_offset(), -0.086071332, epsilon = 1e-9);
    }

    #[test]
    fn d_single_user() {
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let users = UserSet::new(h, vec![1.0], vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let mut aux = AuxState::new(2, 1);
        aux.y[0] = c(1.0, 0.0);
        aux.zeta[0] = 0.0;
        let d = assemble_d(&users, &[1.0], &aux);
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert_eq!(d, expect);
    }

    #[test]
    fn w_update_matched_filter_direction() {
        let h = CMatrix::from_row_slice(1, 3, &[c(0.3, 0.4), c(-1.0, 0.2), c(0.0, 0.7)]);
        let users = UserSet::new(h.clone(), vec![1.0], vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let mut aux = AuxState::new(3, 1);
        aux.y[0] = c(0.2, -0.1);
        aux.zeta[0] = 0.3;
        let d = CMatrix::zeros(3, 3);
        let w = update_w(
            &users,
            &[1.0],
            &aux,
            0,
            projections::KAPPA_FLOOR,
            &d,
            &CVector::zeros(3),
        )
        .unwrap();
        let dir = row_adjoint(&h, 0) * aux.y[0];
        let cos = w.dotc(&dir).norm() / (w.norm() * dir.norm());
        assert_abs_diff_eq!(cos, 1.0, epsilon = 1e-12);
        assert!(update_w(&users, &[1.0], &aux, 0, 0.0, &d, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn adapt_weights_examples() {
        assert_eq!(
            adapt_weights(&[1.0, 1.0], &[5.0, 5.0], &[1.0, 1.0], 0.5),
            vec![1.0, 1.0]
        );
        let w = adapt_weights(&[1.0, 1.0], &[0.5, 5.0], &[1.0, 1.0], 0.5);
        assert_abs_diff_eq!(w[0], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn adapt_weights_never_lowers_violator_share() {
        let w0 = [0.4, 1.1, 1.5];
        let w = adapt_weights(&w0, &[1.0, 9.0, 0.1], &[2.0, 2.0, 2.0], 0.25);
        let share = |v: &[f64], i: usize| v[i] / v.iter().sum::<f64>();
        assert!(share(&w, 0) > share(&w0, 0));
        assert!(share(&w, 2) > share(&w0, 2));
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 3.0, epsilon = 1e-12);
    }
}
