#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use secrecy_isac::config::OneOrMany;
use secrecy_isac::linalg::c;
use secrecy_isac::{CMatrix, CVector, DesignState, Scenario, ScenarioConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

pub fn config(num_antennas: usize, users: usize, targets: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.array.num_antennas = num_antennas;
    cfg.users.count = users;
    cfg.targets.count = targets;
    cfg
}

pub fn robust_config(
    num_antennas: usize,
    users: usize,
    targets: usize,
    delta_deg: f64,
) -> ScenarioConfig {
    let mut cfg = config(num_antennas, users, targets);
    cfg.robust.enabled = true;
    cfg.robust.delta_deg = OneOrMany::One(delta_deg);
    cfg
}

pub fn scenario(num_antennas: usize, users: usize, targets: usize, seed: u64) -> Scenario {
    config(num_antennas, users, targets)
        .instantiate(seed)
        .unwrap()
}

/// Random beams at full per-user power and a null-space AN at a random share
/// of its budget.
pub fn random_state(scenario: &Scenario, rng: &mut ChaCha8Rng) -> DesignState {
    let nt = scenario.num_antennas();
    let k = scenario.num_users();
    let mut w = CMatrix::zeros(nt, k);
    for u in 0..k {
        let g = gaussian(rng, nt);
        w.set_column(
            u,
            &(&g * c(scenario.users.per_user_power[u].sqrt() / g.norm(), 0.0)),
        );
    }
    let raw = gaussian(rng, nt);
    let eff = scenario.projector.apply(&raw).norm_squared();
    let share: f64 = rand::Rng::random(rng);
    let n = raw * c((share * scenario.an_power_budget() / eff).sqrt(), 0.0);
    DesignState::new(w, n, &scenario.projector)
}
