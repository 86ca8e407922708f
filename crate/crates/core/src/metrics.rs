//! Rates, powers, beam gains and constraint residuals for a design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_form, row_adjoint, row_dot, CMatrix, CVector};
use crate::projections::NullSpaceProjector;
use crate::scenario::{steering_vector, ArrayGeometry, Scenario, TargetSet, UserSet};

/// Beamformers `W = [w_1 … w_K]` and the artificial-noise vector `n`, with
/// the null-space projection `n_eff = P⊥ n` and `R_n_eff = n_eff n_effᴴ`
/// cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    beamformers: CMatrix,
    an_vector: CVector,
    effective_an: CVector,
    effective_an_covariance: CMatrix,
    /// Whether the covariance is the outer product of `effective_an`.
    rank_one: bool,
}

impl DesignState {
    pub fn new(beamformers: CMatrix, an_vector: CVector, projector: &NullSpaceProjector) -> Self {
        assert_eq!(beamformers.nrows(), an_vector.len());
        assert_eq!(projector.dim(), an_vector.len());
        let effective_an = projector.apply(&an_vector);
        let effective_an_covariance = &effective_an * effective_an.adjoint();
        Self {
            beamformers,
            an_vector,
            effective_an,
            effective_an_covariance,
            rank_one: true,
        }
    }

    /// Design with no artificial noise; skips the projector.
    pub fn without_an(beamformers: CMatrix) -> Self {
        let n = beamformers.nrows();
        Self {
            beamformers,
            an_vector: CVector::zeros(n),
            effective_an: CVector::zeros(n),
            effective_an_covariance: CMatrix::zeros(n, n),
            rank_one: true,
        }
    }

    /// Design with an explicitly given AN covariance (already effective).
    /// Used where a full-rank AN covariance is convenient; `an_vector` and
    /// `effective_an` are zero in that case.
    pub fn with_an_covariance(beamformers: CMatrix, covariance: CMatrix) -> Self {
        let n = beamformers.nrows();
        assert_eq!(covariance.shape(), (n, n));
        Self {
            beamformers,
            an_vector: CVector::zeros(n),
            effective_an: CVector::zeros(n),
            effective_an_covariance: covariance,
            rank_one: false,
        }
    }

    pub fn zeros(num_antennas: usize, num_users: usize) -> Self {
        Self::without_an(CMatrix::zeros(num_antennas, num_users))
    }

    pub fn beamformers(&self) -> &CMatrix {
        &self.beamformers
    }

    pub fn beamformer(&self, k: usize) -> CVector {
        self.beamformers.column(k).into_owned()
    }

    pub fn an_vector(&self) -> &CVector {
        &self.an_vector
    }

    pub fn effective_an(&self) -> &CVector {
        &self.effective_an
    }

    pub fn effective_an_covariance(&self) -> &CMatrix {
        &self.effective_an_covariance
    }

    pub fn num_antennas(&self) -> usize {
        self.beamformers.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beamformers.ncols()
    }

    pub fn set_beamformer(&mut self, k: usize, w: &CVector) {
        self.beamformers.set_column(k, w);
    }

    pub fn set_an(&mut self, an_vector: CVector, projector: &NullSpaceProjector) {
        *self = Self::new(std::mem::take(&mut self.beamformers), an_vector, projector);
    }

    /// `aᴴ R_n_eff a`, evaluated as `|aᴴ n_eff|²` when the covariance is
    /// rank one so that null-space leakage stays at rounding level.
    pub fn an_gain(&self, a: &CVector) -> f64 {
        if self.rank_one {
            return self.effective_an.dotc(a).norm_sqr();
        }
        hermitian_form(a, &self.effective_an_covariance)
    }

    /// `aᴴ (Σ_k w_k w_kᴴ + R_n_eff) a`.
    pub fn beam_gain(&self, a: &CVector) -> f64 {
        let beams: f64 = self
            .beamformers
            .column_iter()
            .map(|w| w.dotc(a).norm_sqr())
            .sum();
        beams + self.an_gain(a)
    }
}

/// Signed residuals, `≤ 0` meaning satisfied, for constraints (a)–(g).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// (a) `‖w_k‖² - P_k`, per user.
    pub per_user_power: Vec<f64>,
    /// (b) `tr(R_n_eff) + Σ P_k - P_A`.
    pub total_power: f64,
    /// (c) `η_j - α_j aᴴ W̃ a`, per target.
    pub detection: Vec<f64>,
    /// (d) `α_j aᴴ(θ_j ± θ_0) W̃ a(θ_j ± θ_0) - η_j / 2`, `[j][edge]`.
    pub beamwidth: Vec<Vec<f64>>,
    /// (e) `γ_k - ρ_k`, per user.
    pub sinr: Vec<f64>,
    /// (f) `log₂(1 + ρ^E_{k,j}) - β_j`, `[k][j]`.
    pub leakage: Vec<Vec<f64>>,
    /// (g) `‖P⊥ n‖² + Σ P_k - P_A`.
    pub an_budget: f64,
    /// Robust LMI residual `wᴴ RHS⁻¹ w - 1`, `[k][j]`, when robust mode is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmi: Option<Vec<Vec<f64>>>,
}

/// Constraint groups, for satisfaction bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    Lmi,
}

impl Constraint {
    pub const ALL: [Constraint; 8] = [
        Constraint::A,
        Constraint::B,
        Constraint::C,
        Constraint::D,
        Constraint::E,
        Constraint::F,
        Constraint::G,
        Constraint::Lmi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Constraint::A => "a",
            Constraint::B => "b",
            Constraint::C => "c",
            Constraint::D => "d",
            Constraint::E => "e",
            Constraint::F => "f",
            Constraint::G => "g",
            Constraint::Lmi => "lmi",
        }
    }
}

/// Residuals at or below this count as satisfied.
pub const RESIDUAL_TOL: f64 = 1e-6;

impl ConstraintResiduals {
    pub fn group(&self, which: Constraint) -> Vec<f64> {
        match which {
            Constraint::A => self.per_user_power.clone(),
            Constraint::B => vec![self.total_power],
            Constraint::C => self.detection.clone(),
            Constraint::D => self.beamwidth.iter().flatten().copied().collect(),
            Constraint::E => self.sinr.clone(),
            Constraint::F => self.leakage.iter().flatten().copied().collect(),
            Constraint::G => vec![self.an_budget],
            Constraint::Lmi => self.lmi.iter().flatten().flatten().copied().collect(),
        }
    }

    /// Largest residual in a group, `-inf` for an empty group.
    pub fn worst(&self, which: Constraint) -> f64 {
        self.group(which)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether every residual in the group is within [`RESIDUAL_TOL`].
    /// Empty groups count as satisfied.
    pub fn satisfied(&self, which: Constraint) -> bool {
        self.group(which).iter().all(|&r| r <= RESIDUAL_TOL)
    }

    /// Flat `(name, residual)` list, e.g. `("f[1,0]", -0.03)`.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (k, r) in self.per_user_power.iter().enumerate() {
            out.push((format!("a[{k}]"), *r));
        }
        out.push(("b".into(), self.total_power));
        for (j, r) in self.detection.iter().enumerate() {
            out.push((format!("c[{j}]"), *r));
        }
        for (j, edges) in self.beamwidth.iter().enumerate() {
            for (e, r) in edges.iter().enumerate() {
                let side = if e == 0 { "-" } else { "+" };
                out.push((format!("d[{j},{side}]"), *r));
            }
        }
        for (k, r) in self.sinr.iter().enumerate() {
            out.push((format!("e[{k}]"), *r));
        }
        for (k, row) in self.leakage.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                out.push((format!("f[{k},{j}]"), *r));
            }
        }
        out.push(("g".into(), self.an_budget));
        if let Some(lmi) = &self.lmi {
            for (k, row) in lmi.iter().enumerate() {
                for (j, r) in row.iter().enumerate() {
                    out.push((format!("lmi[{k},{j}]"), *r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub user_sinrs: Vec<f64>,
    /// `[k][j]`.
    pub eve_snrs: Vec<Vec<f64>>,
    pub secrecy_rates: Vec<f64>,
    pub sum_secrecy_rate: f64,
    pub radar_powers: Vec<f64>,
    pub constraint_residuals: ConstraintResiduals,
}

/// `Σ_{i≠k} |h_k w_i|² + h_k R_n_eff h_kᴴ + σ_k²`.
pub fn interference_plus_noise(state: &DesignState, users: &UserSet, k: usize) -> f64 {
    let w = state.beamformers();
    let leak: f64 = (0..state.num_users())
        .filter(|&i| i != k)
        .map(|i| row_dot(&users.channels, k, &w.column(i).into_owned()).norm_sqr())
        .sum();
    let hk = row_adjoint(&users.channels, k);
    leak + state.an_gain(&hk) + users.noise_variances[k]
}

pub fn user_sinr(state: &DesignState, users: &UserSet, k: usize) -> Result<f64> {
    Error::check_index("users", k, users.len())?;
    let signal = row_dot(&users.channels, k, &state.beamformer(k)).norm_sqr();
    Ok(signal / interference_plus_noise(state, users, k))
}

/// Eavesdropper SNR for user `k`'s stream at an arbitrary look angle, using
/// target `j`'s path gain.
pub fn eve_snr_at(
    state: &DesignState,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
    j: usize,
    angle_deg: f64,
) -> Result<f64> {
    Error::check_index("users", k, state.num_users())?;
    Error::check_index("targets", j, targets.len())?;
    let a = steering_vector(geometry, angle_deg)?;
    let g2 = targets.gain_sq(j);
    let leak = state.beamformers().column(k).dotc(&a).norm_sqr();
    Ok(g2 * leak / (g2 * state.an_gain(&a) + targets.eve_noise_variance))
}

pub fn eve_snr(
    state: &DesignState,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
    j: usize,
) -> Result<f64> {
    Error::check_index("targets", j, targets.len())?;
    eve_snr_at(state, targets, geometry, k, j, targets.angles_deg[j])
}

/// `[log₂(1 + ρ_user) - max_j log₂(1 + ρ_eve,j)]⁺`.
pub fn secrecy_from_snrs(user_sinr: f64, eve_snrs: &[f64]) -> f64 {
    let worst = eve_snrs.iter().copied().fold(0.0, f64::max);
    ((1.0 + user_sinr).log2() - (1.0 + worst).log2()).max(0.0)
}

pub fn secrecy_rate(
    state: &DesignState,
    users: &UserSet,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
) -> Result<f64> {
    let rho = user_sinr(state, users, k)?;
    let eves = (0..targets.len())
        .map(|j| eve_snr(state, targets, geometry, k, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(secrecy_from_snrs(rho, &eves))
}

pub fn sum_secrecy_rate(
    state: &DesignState,
    users: &UserSet,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
) -> Result<f64> {
    (0..users.len())
        .map(|k| secrecy_rate(state, users, targets, geometry, k))
        .sum()
}

/// Radar power at target `j`: `|α_j| aᴴ(θ_j)(Σ w_k w_kᴴ + R_n_eff) a(θ_j)`.
pub fn radar_power(
    state: &DesignState,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    j: usize,
) -> Result<f64> {
    Error::check_index("targets", j, targets.len())?;
    let a = steering_vector(geometry, targets.angles_deg[j])?;
    Ok(targets.path_gains[j].norm() * state.beam_gain(&a))
}

/// Transmit beam gain `aᴴ(θ) W̃ a(θ)` at each angle.
pub fn beam_gain_pattern(
    state: &DesignState,
    geometry: &ArrayGeometry,
    angles_deg: &[f64],
) -> Result<Vec<f64>> {
    angles_deg
        .iter()
        .map(|&t| Ok(state.beam_gain(&steering_vector(geometry, t)?)))
        .collect()
}

/// Weighted sum rate `Σ_k μ_k log₂(1 + ρ_k)`, the quantity the solver ascends.
pub fn weighted_sum_rate(state: &DesignState, users: &UserSet, weights: &[f64]) -> f64 {
    (0..users.len())
        .map(|k| {
            let rho = user_sinr(state, users, k).expect("k in range");
            weights[k] * (1.0 + rho).log2()
        })
        .sum()
}

pub fn check_constraints(state: &DesignState, scenario: &Scenario) -> ConstraintResiduals {
    let users = &scenario.users;
    let targets = &scenario.targets;
    let geometry = &scenario.geometry;
    let committed: f64 = users.per_user_power.iter().sum();
    let p_a = scenario.power.total_power;

    let per_user_power = (0..users.len())
        .map(|k| state.beamformers().column(k).norm_squared() - users.per_user_power[k])
        .collect();
    let an_trace: f64 = state
        .effective_an_covariance()
        .diagonal()
        .iter()
        .map(|x| x.re)
        .sum();
    let total_power = an_trace + committed - p_a;
    let an_budget = state.effective_an().norm_squared() + committed - p_a;

    let detection = (0..targets.len())
        .map(|j| {
            targets.sensing_thresholds[j]
                - radar_power(state, targets, geometry, j).expect("validated")
        })
        .collect();
    let beamwidth = (0..targets.len())
        .map(|j| {
            let alpha = targets.path_gains[j].norm();
            targets
                .beamwidth_edges(j)
                .into_iter()
                .map(|t| {
                    alpha * state.beam_gain(&scenario.steering(t))
                        - targets.sensing_thresholds[j] / 2.0
                })
                .collect()
        })
        .collect();
    let sinr = (0..users.len())
        .map(|k| users.sinr_thresholds[k] - user_sinr(state, users, k).expect("k in range"))
        .collect();
    let leakage = (0..users.len())
        .map(|k| {
            (0..targets.len())
                .map(|j| {
                    let rho = eve_snr(state, targets, geometry, k, j).expect("validated");
                    (1.0 + rho).log2() - targets.secrecy_caps[j]
                })
                .collect()
        })
        .collect();

    ConstraintResiduals {
        per_user_power,
        total_power,
        detection,
        beamwidth,
        sinr,
        leakage,
        an_budget,
        lmi: None,
    }
}

pub fn evaluate(state: &DesignState, scenario: &Scenario) -> MetricsReport {
    let users = &scenario.users;
    let targets = &scenario.targets;
    let geometry = &scenario.geometry;
    let user_sinrs: Vec<f64> = (0..users.len())
        .map(|k| user_sinr(state, users, k).expect("k in range"))
        .collect();
    let eve_snrs: Vec<Vec<f64>> = (0..users.len())
        .map(|k| {
            (0..targets.len())
                .map(|j| eve_snr(state, targets, geometry, k, j).expect("validated"))
                .collect()
        })
        .collect();
    let secrecy_rates: Vec<f64> = user_sinrs
        .iter()
        .zip(&eve_snrs)
        .map(|(&rho, eves)| secrecy_from_snrs(rho, eves))
        .collect();
    let sum_secrecy_rate = secrecy_rates.iter().sum();
    let radar_powers = (0..targets.len())
        .map(|j| radar_power(state, targets, geometry, j).expect("validated"))
        .collect();
    MetricsReport {
        user_sinrs,
        eve_snrs,
        secrecy_rates,
        sum_secrecy_rate,
        radar_powers,
        constraint_residuals: check_constraints(state, scenario),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::scenario::generate_channels;
    use approx::assert_abs_diff_eq;
    use nalgebra::Complex;

    fn users_from(h: CMatrix, noise: f64) -> UserSet {
        let k = h.nrows();
        UserSet::new(h, vec![noise; k], vec![1.0; k], vec![1.0; k], vec![1.0; k]).unwrap()
    }

    fn one_target(angle: f64, eve_noise: f64) -> TargetSet {
        TargetSet {
            angles_deg: vec![angle],
            path_gains: vec![c(1.0, 0.0)],
            eve_noise_variance: eve_noise,
            sensing_thresholds: vec![2.0],
            secrecy_caps: vec![0.1],
            beamwidth_halfangle_deg: 0.0,
            angle_uncertainty_deg: vec![0.0],
        }
    }

    #[test]
    fn sinr_without_interference() {
        // h = [1 0], w = [2 0]: |hw|^2 = 4, noise 1.
        let h = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let w = CMatrix::from_column_slice(2, 1, &[c(2.0, 0.0), c(0.0, 0.0)]);
        let state = DesignState::without_an(w);
        let users = users_from(h, 1.0);
        assert_abs_diff_eq!(user_sinr(&state, &users, 0).unwrap(), 4.0, epsilon = 1e-15);
        assert!(user_sinr(&state, &users, 1).is_err());
    }

    #[test]
    fn sinr_with_one_interferer() {
        let h = CMatrix::from_row_slice(
            2,
            3,
            &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        // h_1 w_1 = 1, h_1 w_2 = 1.
        let w = CMatrix::from_column_slice(
            3,
            2,
            &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        let state = DesignState::without_an(w);
        let users = users_from(h, 1.0);
        assert_abs_diff_eq!(user_sinr(&state, &users, 0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn null_space_an_does_not_leak() {
        let h = generate_channels(3, 2, 4).unwrap();
        let p = NullSpaceProjector::build(&h).unwrap();
        let n = CVector::from_fn(4, |i, _| c(1.0 + i as f64, -0.5 * i as f64));
        let w = CMatrix::from_fn(4, 2, |i, j| c((i + j) as f64, 1.0));
        let state = DesignState::new(w.clone(), n.clone(), &p);
        for k in 0..2 {
            let hk = row_adjoint(&h, k);
            let leak = state.an_gain(&hk);
            assert!(leak.abs() <= 1e-20 * n.norm_squared(), "leak {leak}");
        }
        let users = users_from(h, 1.0);
        let without = DesignState::without_an(w);
        for k in 0..2 {
            let a = user_sinr(&state, &users, k).unwrap();
            let b = user_sinr(&without, &users, k).unwrap();
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn eve_snr_matched_beam() {
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        let a = steering_vector(&g, 20.0).unwrap();
        let w = CMatrix::from_column_slice(4, 1, (&a / c(2.0, 0.0)).as_slice());
        let state = DesignState::without_an(w);
        let t = one_target(20.0, 1.0);
        assert_abs_diff_eq!(eve_snr(&state, &t, &g, 0, 0).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn eve_snr_orthogonal_beam_is_zero() {
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        // broadside a = ones; w = [1, -1, 0, 0] is orthogonal
        let w = CMatrix::from_column_slice(
            4,
            1,
            &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let state = DesignState::without_an(w);
        let t = one_target(0.0, 1.0);
        assert_abs_diff_eq!(eve_snr(&state, &t, &g, 0, 0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eve_snr_with_an_in_denominator() {
        // numerator aᴴWa = 4, aᴴRa = 3, σ_e² = 1 -> 1.0
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        let a = steering_vector(&g, 0.0).unwrap();
        let w = CMatrix::from_column_slice(4, 1, (&a / c(2.0, 0.0)).as_slice());
        let r = CMatrix::identity(4, 4) * c(0.75, 0.0);
        let state = DesignState::with_an_covariance(w, r);
        let t = one_target(0.0, 1.0);
        assert_abs_diff_eq!(eve_snr(&state, &t, &g, 0, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn secrecy_rate_cases() {
        assert_abs_diff_eq!(secrecy_from_snrs(3.0, &[1.0]), 1.0, epsilon = 1e-15);
        assert_eq!(secrecy_from_snrs(1.0, &[3.0]), 0.0);
        assert_eq!(secrecy_from_snrs(3.0, &[1.0, 3.0]), 0.0);
        // log base 2: ρ = 1 with no eavesdropper -> 1 bit
        assert_abs_diff_eq!(secrecy_from_snrs(1.0, &[]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn secrecy_is_monotone_in_snrs() {
        for &(u, e) in &[(0.5, 0.1), (10.0, 3.0), (2.0, 2.5)] {
            let base = secrecy_from_snrs(u, &[e]);
            assert!(secrecy_from_snrs(u + 0.1, &[e]) >= base);
            assert!(secrecy_from_snrs(u, &[e + 0.1]) <= base);
        }
    }

    #[test]
    fn zero_design_has_zero_secrecy() {
        let h = generate_channels(1, 2, 4).unwrap();
        let users = users_from(h, 1.0);
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        let state = DesignState::zeros(4, 2);
        let t = one_target(10.0, 1.0);
        assert_eq!(sum_secrecy_rate(&state, &users, &t, &g).unwrap(), 0.0);
    }

    #[test]
    fn sum_equals_per_user_sum() {
        let h = generate_channels(8, 2, 6).unwrap();
        let users = users_from(h, 0.5);
        let g = ArrayGeometry::half_wavelength(6).unwrap();
        let w = CMatrix::from_fn(6, 2, |i, j| Complex::from_polar(1.0, (i * 3 + j) as f64));
        let state = DesignState::without_an(w);
        let t = one_target(-40.0, 1.0);
        let total = sum_secrecy_rate(&state, &users, &t, &g).unwrap();
        let parts: f64 = (0..2)
            .map(|k| secrecy_rate(&state, &users, &t, &g, k).unwrap())
            .sum();
        assert_eq!(total, parts);
    }

    #[test]
    fn radar_power_examples() {
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        let state = DesignState::with_an_covariance(CMatrix::zeros(8, 1), CMatrix::identity(8, 8));
        let t = one_target(33.0, 1.0);
        assert_abs_diff_eq!(
            radar_power(&state, &t, &g, 0).unwrap(),
            8.0,
            epsilon = 1e-12
        );

        let g = ArrayGeometry::half_wavelength(16).unwrap();
        let a = steering_vector(&g, 33.0).unwrap();
        let w = CMatrix::from_column_slice(16, 1, (&a / c(4.0, 0.0)).as_slice());
        let state = DesignState::without_an(w);
        assert_abs_diff_eq!(
            radar_power(&state, &t, &g, 0).unwrap(),
            16.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn radar_power_matches_expansion() {
        let h = generate_channels(21, 2, 6).unwrap();
        let p = NullSpaceProjector::build(&h).unwrap();
        let g = ArrayGeometry::half_wavelength(6).unwrap();
        let w = CMatrix::from_fn(6, 2, |i, j| Complex::from_polar(0.3 + i as f64, j as f64));
        let n = CVector::from_fn(6, |i, _| c(0.2 * i as f64, 1.0));
        let state = DesignState::new(w.clone(), n, &p);
        let t = one_target(12.0, 1.0);
        let a = steering_vector(&g, 12.0).unwrap();
        let mut expect = 0.0;
        for k in 0..2 {
            let ahw: nalgebra::Complex<f64> = a
                .iter()
                .zip(w.column(k).iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            expect += ahw.norm_sqr();
        }
        let ahn: nalgebra::Complex<f64> = a
            .iter()
            .zip(state.effective_an().iter())
            .map(|(x, y)| x.conj() * y)
            .sum();
        expect += ahn.norm_sqr();
        let got = radar_power(&state, &t, &g, 0).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn beam_pattern_cases() {
        let g = ArrayGeometry::half_wavelength(16).unwrap();
        let zero = DesignState::zeros(16, 2);
        let angles: Vec<f64> = (-180..=180).map(|i| i as f64 * 0.5).collect();
        assert!(beam_gain_pattern(&zero, &g, &angles)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));

        let a = steering_vector(&g, 0.0).unwrap();
        let w = CMatrix::from_column_slice(16, 1, (&a / c(4.0, 0.0)).as_slice());
        let state = DesignState::without_an(w);
        let pattern = beam_gain_pattern(&state, &g, &angles).unwrap();
        let (imax, peak) =
            pattern.iter().enumerate().fold(
                (0, f64::MIN),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        assert_eq!(angles[imax], 0.0);
        assert_abs_diff_eq!(peak, 16.0, epsilon = 1e-12);
        assert!(pattern[0] < peak && pattern[pattern.len() - 1] < peak);

        let t = one_target(0.0, 1.0);
        let at_target = beam_gain_pattern(&state, &g, &[0.0]).unwrap()[0];
        assert_eq!(at_target, radar_power(&state, &t, &g, 0).unwrap());
    }
}
