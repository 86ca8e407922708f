//! Browser bindings for the secrecy-isac solver.
//!
//! Every export takes plain numbers or a JSON config string and returns a
//! JSON string, so the page needs no generated type glue. The `*_json`
//! functions are ordinary Rust and are exercised natively by the tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use secrecy_isac::config::OneOrMany;
use secrecy_isac::experiment::{angle_grid, emit_beampattern, solve_trial};
use secrecy_isac::metrics::{self, DesignState};
use secrecy_isac::robust;
use secrecy_isac::scenario::{steering_vector, ArrayGeometry};
use secrecy_isac::{CMatrix, Error, ScenarioConfig, C64};

const PATTERN_STEP_DEG: f64 = 0.5;

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub sum_secrecy_rate: f64,
    pub robust_sum_secrecy_rate: f64,
    pub secrecy_rates: Vec<f64>,
    pub user_sinrs_db: Vec<f64>,
    pub target_angles_deg: Vec<f64>,
    pub beamwidth_halfangle_deg: f64,
    pub objective_trace: Vec<f64>,
    pub secrecy_trace: Vec<f64>,
    pub angles_deg: Vec<f64>,
    pub gains: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PatternView {
    pub angles_deg: Vec<f64>,
    pub gains: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RobustPoint {
    pub delta_deg: f64,
    pub converged: bool,
    pub nominal_sum_secrecy_rate: f64,
    pub robust_sum_secrecy_rate: f64,
}

fn to_js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

fn parse_config(config_json: &str) -> Result<ScenarioConfig, Error> {
    if config_json.trim().is_empty() {
        Ok(ScenarioConfig::default())
    } else {
        ScenarioConfig::from_json_str(config_json)
    }
}

/// Solves one instance and returns the report, the beam pattern on a 0.5°
/// grid and the robust rate at the configured uncertainty.
pub fn solve_json(config_json: &str, seed: u64) -> Result<String, Error> {
    let cfg = parse_config(config_json)?;
    let (scenario, report) = solve_trial(&cfg, seed)?;
    let state = &report.final_state;
    let grid = angle_grid(PATTERN_STEP_DEG)?;
    let rows = emit_beampattern(state, &scenario.geometry, &grid)?;
    let robust_rate = robust::robust_sum_secrecy_rate(
        state,
        &scenario.users,
        &scenario.targets,
        &scenario.geometry,
    )?;
    let view = SolveView {
        seed,
        iterations: report.iterations,
        converged: report.converged,
        sum_secrecy_rate: report.final_metrics.sum_secrecy_rate,
        robust_sum_secrecy_rate: robust_rate,
        secrecy_rates: report.final_metrics.secrecy_rates.clone(),
        user_sinrs_db: report
            .final_metrics
            .user_sinrs
            .iter()
            .map(|s| 10.0 * s.max(f64::MIN_POSITIVE).log10())
            .collect(),
        target_angles_deg: scenario.targets.angles_deg.clone(),
        beamwidth_halfangle_deg: scenario.targets.beamwidth_halfangle_deg,
        objective_trace: report.objective_trace.clone(),
        secrecy_trace: report.secrecy_trace.clone(),
        angles_deg: rows.iter().map(|r| r.0).collect(),
        gains: rows.iter().map(|r| r.1).collect(),
    };
    to_json(&view)
}

/// Pattern of a single unit-power beam steered to `steer_deg`.
pub fn steered_pattern_json(num_antennas: usize, steer_deg: f64) -> Result<String, Error> {
    let geometry = ArrayGeometry::half_wavelength(num_antennas)?;
    let a = steering_vector(&geometry, steer_deg)?;
    let w = &a * C64::new(1.0 / (num_antennas as f64).sqrt(), 0.0);
    let state = DesignState::without_an(CMatrix::from_columns(&[w]));
    let grid = angle_grid(PATTERN_STEP_DEG)?;
    let gains = metrics::beam_gain_pattern(&state, &geometry, &grid)?;
    to_json(&PatternView {
        angles_deg: grid,
        gains,
    })
}

/// Re-solves the instance in robust mode for each half-width in
/// `deltas_deg` (0 solves the nominal problem) and reports both rates.
pub fn robust_scan_json(config_json: &str, seed: u64, deltas_deg: &[f64]) -> Result<String, Error> {
    let base = parse_config(config_json)?;
    let points = deltas_deg
        .iter()
        .map(|&delta| {
            let mut cfg = base.clone();
            cfg.robust.enabled = delta > 0.0;
            cfg.robust.delta_deg = OneOrMany::One(delta);
            let (scenario, report) = solve_trial(&cfg, seed)?;
            let robust_rate = robust::robust_sum_secrecy_rate(
                &report.final_state,
                &scenario.users,
                &scenario.targets,
                &scenario.geometry,
            )?;
            Ok(RobustPoint {
                delta_deg: delta,
                converged: report.converged,
                nominal_sum_secrecy_rate: report.final_metrics.sum_secrecy_rate,
                robust_sum_secrecy_rate: robust_rate,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    to_json(&points)
}

#[wasm_bindgen]
pub fn solve(config_json: &str, seed: u32) -> Result<String, JsValue> {
    solve_json(config_json, u64::from(seed)).map_err(to_js)
}

#[wasm_bindgen]
pub fn steered_pattern(num_antennas: usize, steer_deg: f64) -> Result<String, JsValue> {
    steered_pattern_json(num_antennas, steer_deg).map_err(to_js)
}

#[wasm_bindgen]
pub fn robust_scan(config_json: &str, seed: u32, deltas_deg: &[f64]) -> Result<String, JsValue> {
    robust_scan_json(config_json, u64::from(seed), deltas_deg).map_err(to_js)
}

/// The default configuration as pretty JSON, to seed the page's editor.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::to_string_pretty(&ScenarioConfig::default()).unwrap_or_default()
}
