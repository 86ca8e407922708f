//! Secrecy under angular uncertainty of the eavesdropper directions.
//!
//! Each target direction is only known to lie in `[θ̂ - Δ, θ̂ + Δ]`. The
//! worst case is taken at the interval endpoints (exact to first order in
//! `Δ`), and the beamformer constraint is the rank-one matrix inequality
//! `w wᴴ ⪯ (β/|α|²)(a aᴴ + Δ² a′a′ᴴ + δI)⁻¹` with `a = a(θ̂)`, `a′` its
//! derivative per radian and a ridge `δ` that makes the inverse exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_form, CMatrix, CVector, C64};
use crate::metrics::{self, DesignState};
use crate::scenario::{
    steering_derivative, steering_vector, ArrayGeometry, Scenario, TargetSet, UserSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularUncertainty {
    pub nominal_deg: f64,
    pub half_width_deg: f64,
}

impl AngularUncertainty {
    pub fn new(nominal_deg: f64, half_width_deg: f64) -> Result<Self> {
        if !(half_width_deg >= 0.0) {
            return Err(Error::Domain(format!(
                "uncertainty half-width must be nonnegative, got {half_width_deg}"
            )));
        }
        for angle in [nominal_deg - half_width_deg, nominal_deg + half_width_deg] {
            if !(-90.0..=90.0).contains(&angle) {
                return Err(Error::AngleOutOfRange { angle_deg: angle });
            }
        }
        Ok(Self {
            nominal_deg,
            half_width_deg,
        })
    }

    /// Uncertainty of target `j`, with the interval clipped to `[-90°, 90°]`.
    pub fn of_target(targets: &TargetSet, j: usize) -> Result<Self> {
        Error::check_index("targets", j, targets.len())?;
        let nominal = targets.angles_deg[j];
        let room = (90.0 - nominal.abs()).max(0.0);
        Self::new(nominal, targets.angle_uncertainty_deg[j].min(room))
    }

    pub fn endpoints(&self) -> [f64; 2] {
        [
            self.nominal_deg - self.half_width_deg,
            self.nominal_deg + self.half_width_deg,
        ]
    }

    pub fn half_width_rad(&self) -> f64 {
        self.half_width_deg.to_radians()
    }
}

/// Larger of the eavesdropper SNRs at the two interval endpoints of target
/// `j`, with the angle attaining it. Ties go to the lower endpoint.
pub fn worst_case_eve_snr(
    state: &DesignState,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
    j: usize,
) -> Result<(f64, f64)> {
    let unc = AngularUncertainty::of_target(targets, j)?;
    if unc.half_width_deg == 0.0 {
        return Ok((
            metrics::eve_snr(state, targets, geometry, k, j)?,
            unc.nominal_deg,
        ));
    }
    let [lo, hi] = unc.endpoints();
    let a = metrics::eve_snr_at(state, targets, geometry, k, j, lo)?;
    let b = metrics::eve_snr_at(state, targets, geometry, k, j, hi)?;
    Ok(if b > a { (b, hi) } else { (a, lo) })
}

/// Secrecy rate of user `k` against the endpoint worst case of every target.
pub fn robust_secrecy_rate(
    state: &DesignState,
    users: &UserSet,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
) -> Result<f64> {
    let rho = metrics::user_sinr(state, users, k)?;
    let mut eves = Vec::with_capacity(2 * targets.len());
    for j in 0..targets.len() {
        // The nominal angle is kept so the robust rate never exceeds the
        // nominal one, even where the endpoint reduction is inexact.
        eves.push(metrics::eve_snr(state, targets, geometry, k, j)?);
        eves.push(worst_case_eve_snr(state, targets, geometry, k, j)?.0);
    }
    Ok(metrics::secrecy_from_snrs(rho, &eves))
}

pub fn robust_sum_secrecy_rate(
    state: &DesignState,
    users: &UserSet,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
) -> Result<f64> {
    (0..users.len())
        .map(|k| robust_secrecy_rate(state, users, targets, geometry, k))
        .sum()
}

/// `a aᴴ + Δ² a′a′ᴴ + δI` at the nominal angle, `Δ` in radians.
pub fn uncertainty_matrix(
    geometry: &ArrayGeometry,
    uncertainty: &AngularUncertainty,
    ridge: f64,
) -> Result<CMatrix> {
    if !(ridge > 0.0) {
        return Err(Error::Domain(format!(
            "ridge must be positive, got {ridge}"
        )));
    }
    let a = steering_vector(geometry, uncertainty.nominal_deg)?;
    let da = steering_derivative(geometry, uncertainty.nominal_deg)?;
    let d2 = uncertainty.half_width_rad().powi(2);
    let n = geometry.num_antennas;
    Ok(
        &a * a.adjoint()
            + &da * da.adjoint() * c(d2, 0.0)
            + CMatrix::identity(n, n) * c(ridge, 0.0),
    )
}

/// Right-hand side `(β/|α|²)(a aᴴ + Δ² a′a′ᴴ + δI)⁻¹` of the robust LMI.
pub fn lmi_bound_matrix(
    geometry: &ArrayGeometry,
    uncertainty: &AngularUncertainty,
    beta: f64,
    alpha: C64,
    ridge: f64,
) -> Result<CMatrix> {
    LmiBound::new(geometry, uncertainty, beta, alpha, ridge)?.rhs()
}

/// Robust LMI for one target, `w wᴴ ⪯ s M⁻¹` with `s = β/|α|²` and
/// `M = a aᴴ + Δ² a′a′ᴴ + δI`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBound {
    matrix: CMatrix,
    scale: f64,
}

impl LmiBound {
    pub fn new(
        geometry: &ArrayGeometry,
        uncertainty: &AngularUncertainty,
        beta: f64,
        alpha: C64,
        ridge: f64,
    ) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!(
                "LMI level β must be positive, got {beta}"
            )));
        }
        if !(alpha.norm() > 0.0) {
            return Err(Error::Domain("path gain must be nonzero".into()));
        }
        Ok(Self {
            matrix: uncertainty_matrix(geometry, uncertainty, ridge)?,
            scale: beta / alpha.norm_sqr(),
        })
    }

    /// `s`; grows with the eavesdropper noise-plus-AN floor.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `M`.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `RHS⁻¹ = M / s`.
    pub fn inverse(&self) -> CMatrix {
        &self.matrix / c(self.scale, 0.0)
    }

    pub fn rhs(&self) -> Result<CMatrix> {
        let chol = self.matrix.clone().cholesky().ok_or(Error::Singular {
            condition: f64::INFINITY,
            limit: f64::INFINITY,
        })?;
        Ok(chol.inverse() * c(self.scale, 0.0))
    }

    /// `wᴴ RHS⁻¹ w`; the LMI holds iff this is at most one.
    pub fn scalar_form(&self, w: &CVector) -> f64 {
        hermitian_form(w, &self.matrix) / self.scale
    }

    /// Scales `w` onto the LMI boundary if it violates it.
    pub fn enforce(&self, w: &CVector) -> CVector {
        scale_to_unit(w, self.scalar_form(w))
    }
}

fn scale_to_unit(w: &CVector, q: f64) -> CVector {
    if q <= 1.0 {
        w.clone()
    } else {
        w * c(1.0 / q.sqrt(), 0.0)
    }
}

/// Largest scaling of `w` with `w wᴴ ⪯ rhs`, using `wᴴ rhs⁻¹ w ≤ 1` for `rhs ≻ 0`.
pub fn enforce_robust_cap(w: &CVector, lmi_rhs: &CMatrix) -> Result<CVector> {
    let chol = lmi_rhs.clone().cholesky().ok_or(Error::Singular {
        condition: f64::INFINITY,
        limit: f64::INFINITY,
    })?;
    let x = chol.solve(w);
    Ok(scale_to_unit(w, w.dotc(&x).re))
}

/// `λ_min(rhs - w wᴴ)`.
pub fn lmi_margin(w: &CVector, lmi_rhs: &CMatrix) -> f64 {
    let m = lmi_rhs - w * w.adjoint();
    m.symmetric_eigenvalues().min()
}

/// Power-level LMI bound for target `j` at the current AN: the SNR cap
/// `2^β - 1` times the smallest eavesdropper noise-plus-AN power over the
/// nominal angle and both endpoints.
pub fn target_lmi_bound(
    scenario: &Scenario,
    state: &DesignState,
    j: usize,
    ridge_per_antenna: f64,
) -> Result<LmiBound> {
    let targets = &scenario.targets;
    let unc = AngularUncertainty::of_target(targets, j)?;
    let g2 = targets.gain_sq(j);
    let [lo, hi] = unc.endpoints();
    let floor = [lo, unc.nominal_deg, hi]
        .iter()
        .map(|&t| g2 * state.an_gain(&scenario.steering(t)) + targets.eve_noise_variance)
        .fold(f64::INFINITY, f64::min);
    LmiBound::new(
        &scenario.geometry,
        &unc,
        targets.snr_cap(j) * floor,
        targets.path_gains[j],
        ridge_per_antenna * scenario.num_antennas() as f64,
    )
}

pub fn robust_leakage_bounds(
    scenario: &Scenario,
    state: &DesignState,
    ridge_per_antenna: f64,
) -> Result<Vec<LmiBound>> {
    (0..scenario.num_targets())
        .map(|j| target_lmi_bound(scenario, state, j, ridge_per_antenna))
        .collect()
}

/// `[k][j]` residual `wᴴ RHS⁻¹ w - 1` (≤ 0 means satisfied).
pub fn lmi_residuals(
    scenario: &Scenario,
    state: &DesignState,
    ridge_per_antenna: f64,
) -> Result<Vec<Vec<f64>>> {
    let bounds = robust_leakage_bounds(scenario, state, ridge_per_antenna)?;
    Ok((0..scenario.num_users())
        .map(|k| {
            let w = state.beamformer(k);
            bounds.iter().map(|b| b.scalar_form(&w) - 1.0).collect()
        })
        .collect())
}
