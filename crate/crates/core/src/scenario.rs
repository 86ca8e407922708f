//! Physical setup: uniform linear array, users, radar targets, power budget.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::projections::NullSpaceProjector;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::config("array needs at least one antenna"));
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite()) {
            return Err(Error::config(format!(
                "antenna spacing must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing_over_wavelength,
        })
    }

    /// Half-wavelength array with `num_antennas` elements.
    pub fn half_wavelength(num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, 0.5)
    }
}

fn check_angle(angle_deg: f64) -> Result<f64> {
    if (-90.0..=90.0).contains(&angle_deg) {
        Ok(angle_deg.to_radians())
    } else {
        Err(Error::AngleOutOfRange { angle_deg })
    }
}

/// Array response toward `angle_deg`; element `m` is `exp(j 2π (d/λ) m sin θ)`.
pub fn steering_vector(geometry: &ArrayGeometry, angle_deg: f64) -> Result<CVector> {
    let theta = check_angle(angle_deg)?;
    let step = 2.0 * PI * geometry.spacing_over_wavelength * theta.sin();
    Ok(CVector::from_fn(geometry.num_antennas, |m, _| {
        C64::from_polar(1.0, step * m as f64)
    }))
}

/// Derivative of [`steering_vector`] with respect to the angle in radians.
pub fn steering_derivative(geometry: &ArrayGeometry, angle_deg: f64) -> Result<CVector> {
    let theta = check_angle(angle_deg)?;
    let k = 2.0 * PI * geometry.spacing_over_wavelength;
    let step = k * theta.sin();
    let slope = k * theta.cos();
    Ok(CVector::from_fn(geometry.num_antennas, |m, _| {
        let m = m as f64;
        c(0.0, slope * m) * C64::from_polar(1.0, step * m)
    }))
}

/// Draws a `K x N_t` matrix of i.i.d. CN(0, 1) entries.
///
/// Entries are filled row by row from a ChaCha8 stream seeded with `seed`,
/// so the first `K'` rows of a `K x N_t` draw equal the `K' x N_t` draw with
/// the same seed.
pub fn generate_channels(seed: u64, num_users: usize, num_antennas: usize) -> Result<CMatrix> {
    if num_users == 0 {
        return Err(Error::config("at least one user is required"));
    }
    if num_users >= num_antennas {
        return Err(Error::config(format!(
            "need K < N_t for a nontrivial null space (K = {num_users}, N_t = {num_antennas})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = CMatrix::zeros(num_users, num_antennas);
    for k in 0..num_users {
        for m in 0..num_antennas {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            h[(k, m)] = c(scale * re, scale * im);
        }
    }
    Ok(h)
}

/// Legitimate single-antenna users.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    /// Row `k` is `h_k`.
    pub channels: CMatrix,
    pub noise_variances: Vec<f64>,
    pub sinr_thresholds: Vec<f64>,
    /// Per-user transmit power limits (linear, mW).
    pub per_user_power: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UserSet {
    pub fn new(
        channels: CMatrix,
        noise_variances: Vec<f64>,
        sinr_thresholds: Vec<f64>,
        per_user_power: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let k = channels.nrows();
        if k == 0 {
            return Err(Error::config("at least one user is required"));
        }
        if k >= channels.ncols() {
            return Err(Error::config(format!(
                "need K < N_t (K = {k}, N_t = {})",
                channels.ncols()
            )));
        }
        for (name, v) in [
            ("noise_variances", &noise_variances),
            ("sinr_thresholds", &sinr_thresholds),
            ("per_user_power", &per_user_power),
            ("weights", &weights),
        ] {
            if v.len() != k {
                return Err(Error::config(format!(
                    "users.{name} has length {}, expected {k}",
                    v.len()
                )));
            }
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !positive(&noise_variances) || !positive(&sinr_thresholds) || !positive(&per_user_power)
        {
            return Err(Error::config(
                "user noise variances, SINR thresholds and powers must be positive",
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::config("user weights must be nonnegative"));
        }
        Ok(Self {
            channels,
            noise_variances,
            sinr_thresholds,
            per_user_power,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Radar targets, each a potential eavesdropper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub angles_deg: Vec<f64>,
    pub path_gains: Vec<C64>,
    pub eve_noise_variance: f64,
    /// Minimum radar power toward each target.
    pub sensing_thresholds: Vec<f64>,
    /// Per-target cap on the eavesdropper rate, bit/s/Hz.
    pub secrecy_caps: Vec<f64>,
    /// Half of the desired 3 dB beamwidth; zero disables the beamwidth check.
    pub beamwidth_halfangle_deg: f64,
    pub angle_uncertainty_deg: Vec<f64>,
}

impl TargetSet {
    pub fn validate(&self) -> Result<()> {
        let j = self.angles_deg.len();
        for (name, len) in [
            ("path_gains", self.path_gains.len()),
            ("sensing_thresholds", self.sensing_thresholds.len()),
            ("secrecy_caps", self.secrecy_caps.len()),
            ("angle_uncertainty_deg", self.angle_uncertainty_deg.len()),
        ] {
            if len != j {
                return Err(Error::config(format!(
                    "targets.{name} has length {len}, expected {j}"
                )));
            }
        }
        for &a in &self.angles_deg {
            check_angle(a)?;
        }
        if self.path_gains.iter().any(|g| !(g.norm() > 0.0)) {
            return Err(Error::config("path gains must be nonzero"));
        }
        if !(self.eve_noise_variance > 0.0) {
            return Err(Error::config(
                "eavesdropper noise variance must be positive",
            ));
        }
        if self.sensing_thresholds.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::config("sensing thresholds must be positive"));
        }
        if self.secrecy_caps.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::config("secrecy caps must be positive"));
        }
        if !(self.beamwidth_halfangle_deg >= 0.0) {
            return Err(Error::config("beamwidth half-angle must be nonnegative"));
        }
        if self.angle_uncertainty_deg.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::config("angle uncertainties must be nonnegative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    /// `|α_j|²`.
    pub fn gain_sq(&self, j: usize) -> f64 {
        self.path_gains[j].norm_sqr()
    }

    /// Eavesdropper SNR cap `2^{β_j} - 1` implied by the rate cap.
    pub fn snr_cap(&self, j: usize) -> f64 {
        self.secrecy_caps[j].exp2() - 1.0
    }

    /// Angles `θ_j ± θ_0` at which the beamwidth constraint is evaluated,
    /// clamped to the visible region. Empty when `θ_0 = 0`.
    pub fn beamwidth_edges(&self, j: usize) -> Vec<f64> {
        if self.beamwidth_halfangle_deg == 0.0 {
            return Vec::new();
        }
        let t = self.angles_deg[j];
        let w = self.beamwidth_halfangle_deg;
        vec![(t - w).max(-90.0), (t + w).min(90.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Total transmit power `P_A` (linear, mW).
    pub total_power: f64,
    pub bs_rx_noise_variance: f64,
}

/// A complete problem instance with its cached null-space projector.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub users: UserSet,
    pub targets: TargetSet,
    pub power: PowerBudget,
    pub projector: NullSpaceProjector,
}

impl Scenario {
    pub fn new(
        geometry: ArrayGeometry,
        users: UserSet,
        targets: TargetSet,
        power: PowerBudget,
    ) -> Result<Self> {
        if users.channels.ncols() != geometry.num_antennas {
            return Err(Error::config(format!(
                "channel matrix has {} columns but the array has {} antennas",
                users.channels.ncols(),
                geometry.num_antennas
            )));
        }
        targets.validate()?;
        if !(power.total_power > 0.0) || !(power.bs_rx_noise_variance > 0.0) {
            return Err(Error::config(
                "total power and BS noise variance must be positive",
            ));
        }
        let committed: f64 = users.per_user_power.iter().sum();
        if committed > power.total_power * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "sum of per-user powers {committed} exceeds total power {}",
                power.total_power
            )));
        }
        let projector = NullSpaceProjector::build(&users.channels)?;
        Ok(Self {
            geometry,
            users,
            targets,
            power,
            projector,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas
    }

    /// Power left for artificial noise, `P_A - Σ P_k`.
    pub fn an_power_budget(&self) -> f64 {
        (self.power.total_power - self.users.per_user_power.iter().sum::<f64>()).max(0.0)
    }

    pub fn steering(&self, angle_deg: f64) -> CVector {
        steering_vector(&self.geometry, angle_deg).expect("target angles are validated")
    }

    pub fn target_steering(&self, j: usize) -> CVector {
        self.steering(self.targets.angles_deg[j])
    }
}
