//! Brute-force references for the solver and the robust module.
//!
//! Everything here is rebuilt from `metrics` and `projections`; nothing from
//! the solver is used.
//!
//! Gradients follow the convention `∂f/∂Re x_m + i ∂f/∂Im x_m`, which is
//! `2 ∂f/∂x̄_m` in Wirtinger terms. For `f = ‖x‖²` this gives `2x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, row_adjoint, CMatrix, CVector};
use crate::metrics::{self, DesignState};
use crate::projections::{
    beamformer_caps, project_an, project_beamformer, LeakageCap, ProjectionOptions,
};
use crate::scenario::{ArrayGeometry, Scenario, TargetSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub samples: usize,
    pub fd_step: f64,
    pub grid_step_deg: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            fd_step: 1e-6,
            grid_step_deg: 0.05,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || !(self.fd_step > 0.0) || !(self.grid_step_deg > 0.0) {
            return Err(Error::Oracle(
                "samples must be at least 1 and steps positive".into(),
            ));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// Caps that keep an AN sample in the users' null space and within the
/// beamwidth allowance `η_j / (2|α_j|)` at every edge `θ_j ± θ_0`.
/// Looser stopping rule than the solver's: samples only need to be
/// feasible, which the final radial shrink guarantees.
const ORACLE_PROJECTION: ProjectionOptions = ProjectionOptions {
    max_cycles: 50,
    tolerance: 1e-9,
};

fn an_caps(scenario: &Scenario) -> Vec<LeakageCap> {
    let users = &scenario.users;
    let targets = &scenario.targets;
    let mut caps: Vec<LeakageCap> = (0..users.len())
        .map(|k| LeakageCap {
            direction: row_adjoint(&users.channels, k),
            cap: 0.0,
        })
        .collect();
    for j in 0..targets.len() {
        let limit = targets.sensing_thresholds[j] / (2.0 * targets.path_gains[j].norm());
        for edge in targets.beamwidth_edges(j) {
            caps.push(LeakageCap {
                direction: scenario.steering(edge),
                cap: limit,
            });
        }
    }
    caps
}

/// Random feasible design number `index` of the stream `seed`.
///
/// The AN takes a uniform fraction of its budget and is projected onto the
/// null space and the beamwidth allowance at the edges; each beam is a Gaussian
/// direction with a uniform power fraction, pushed through the production
/// beamformer projection (power ball, secrecy caps and beamwidth caps at the
/// drawn AN).
pub fn random_feasible_design(scenario: &Scenario, seed: u64, index: u64) -> DesignState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let nt = scenario.num_antennas();
    let k = scenario.num_users();
    let budget = scenario.an_power_budget();

    let raw = scenario.projector.apply(&gaussian(&mut rng, nt));
    let eff = raw.norm_squared();
    let share: f64 = rng.random();
    let n = if eff > 0.0 && budget > 0.0 {
        let n = raw * c((share * budget / eff).sqrt(), 0.0);
        project_beamformer(&n, share * budget, &an_caps(scenario), ORACLE_PROJECTION).w
    } else {
        CVector::zeros(nt)
    };
    let n = project_an(&n, &scenario.projector, budget).expect("budget is nonnegative");

    let mut state = DesignState::new(CMatrix::zeros(nt, k), n, &scenario.projector);
    let caps = beamformer_caps(scenario, &state, true, true);
    for user in 0..k {
        let g = gaussian(&mut rng, nt);
        let frac: f64 = rng.random();
        let p = scenario.users.per_user_power[user];
        let w = &g * c((frac * p).sqrt() / g.norm(), 0.0);
        let projected = project_beamformer(&w, p, &caps, ORACLE_PROJECTION);
        state.set_beamformer(user, &projected.w);
    }
    state
}

fn sample_objective(scenario: &Scenario, seed: u64, index: u64) -> f64 {
    let state = random_feasible_design(scenario, seed, index);
    metrics::weighted_sum_rate(&state, &scenario.users, &scenario.users.weights)
}

/// Best weighted sum rate over `samples` random feasible designs.
///
/// Sample `i` depends only on `(seed, i)`, so a larger budget evaluates a
/// superset of designs and the result never decreases.
pub fn random_search_maximize(
    scenario: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<(DesignState, f64)> {
    if samples == 0 {
        return Err(Error::Oracle(
            "random search needs at least one sample".into(),
        ));
    }
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..samples as u64)
            .into_par_iter()
            .map(|i| sample_objective(scenario, seed, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = (0..samples as u64)
        .map(|i| sample_objective(scenario, seed, i))
        .collect();

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((
        random_feasible_design(scenario, seed, best as u64),
        values[best],
    ))
}

/// Central-difference gradient `∂f/∂Re x + i ∂f/∂Im x`.
pub fn finite_difference_gradient<F>(f: F, x: &CVector, step: f64) -> Result<CVector>
where
    F: Fn(&CVector) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::Oracle(format!("step must be positive, got {step}")));
    }
    let mut grad = CVector::zeros(x.len());
    for m in 0..x.len() {
        let mut parts = [0.0; 2];
        for (slot, dir) in [c(step, 0.0), c(0.0, step)].into_iter().enumerate() {
            let mut plus = x.clone();
            plus[m] += dir;
            let mut minus = x.clone();
            minus[m] -= dir;
            let (fp, fm) = (f(&plus), f(&minus));
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Oracle(format!(
                    "non-finite function value near coordinate {m}"
                )));
            }
            parts[slot] = (fp - fm) / (2.0 * step);
        }
        grad[m] = c(parts[0], parts[1]);
    }
    Ok(grad)
}

/// Dense scan of the eavesdropper SNR over `[θ̂ - Δ, θ̂ + Δ]` of target `j`.
///
/// Grid points are `θ̂ - Δ + i·step`; the endpoints and the nominal angle are
/// always included.
pub fn grid_worst_case(
    state: &DesignState,
    targets: &TargetSet,
    geometry: &ArrayGeometry,
    k: usize,
    j: usize,
    grid_step_deg: f64,
) -> Result<(f64, f64)> {
    if !(grid_step_deg > 0.0) {
        return Err(Error::Oracle(format!(
            "grid step must be positive, got {grid_step_deg}"
        )));
    }
    Error::check_index("targets", j, targets.len())?;
    let nominal = targets.angles_deg[j];
    let delta = targets.angle_uncertainty_deg[j];
    let lo = (nominal - delta).max(-90.0);
    let hi = (nominal + delta).min(90.0);
    let mut angles = vec![lo, nominal, hi];
    let steps = ((hi - lo) / grid_step_deg).floor() as usize;
    angles.extend(
        (1..=steps)
            .map(|i| lo + i as f64 * grid_step_deg)
            .filter(|&t| t < hi),
    );

    let mut best = (f64::NEG_INFINITY, nominal);
    for t in angles {
        let v = metrics::eve_snr_at(state, targets, geometry, k, j, t)?;
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gradient_of_squared_norm() {
        let mut x = CVector::zeros(3);
        x[0] = c(1.0, 0.0);
        let g = finite_difference_gradient(|v| v.norm_squared(), &x, 1e-6).unwrap();
        assert_abs_diff_eq!(g[0].re, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g[0].im, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1].norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn gradient_of_linear_function() {
        let b = CVector::from_vec(vec![c(0.3, -1.2), c(2.0, 0.5)]);
        let x = CVector::from_vec(vec![c(0.7, 0.1), c(-0.4, 0.9)]);
        // Re{bᴴx} has gradient b under this convention.
        let g = finite_difference_gradient(|v| b.dotc(v).re, &x, 1e-3).unwrap();
        assert!((g - &b).norm() <= 1e-12);
    }

    #[test]
    fn rejects_non_finite_values() {
        let x = CVector::zeros(1);
        assert!(finite_difference_gradient(|_| f64::NAN, &x, 1e-6).is_err());
    }
}
