//! Seeded Monte Carlo sweeps and CSV/JSON emission.
//!
//! Every CSV starts with a header row whose first column is
//! `schema_version`; the version is bumped whenever columns change.
//!
//! Trial `t` of a sweep uses the same seed at every axis value, so points
//! are compared on matched channels and target angles.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{OneOrMany, ScenarioConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::linalg::row_adjoint;
use crate::metrics::{self, Constraint, ConstraintResiduals, DesignState};
use crate::robust;
use crate::scenario::{ArrayGeometry, Scenario};
use crate::solver::{run_algorithm1, SolverReport};

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials_per_point: usize,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    /// Uses the config's `sweep` section, with an optional trial override.
    pub fn from_config(base: &ScenarioConfig, trials: Option<usize>) -> Result<Self> {
        let spec = Self {
            axis: base.sweep.axis,
            values: base.sweep.values.clone(),
            trials_per_point: trials.unwrap_or(base.sweep.trials),
            base: base.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sweep = self.base.sweep.clone();
        sweep.axis = self.axis;
        sweep.values = self.values.clone();
        sweep.trials = self.trials_per_point;
        sweep.validate()
    }
}

/// The base configuration with one axis set to `value`.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> ScenarioConfig {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Snr => {
            cfg.power.total_dbm = value;
            cfg.users.noise_dbm = OneOrMany::One(0.0);
            cfg.targets.noise_dbm = Some(0.0);
        }
        SweepAxis::NumUsers => cfg.users.count = value as usize,
        SweepAxis::NumTargets => cfg.targets.count = value as usize,
        SweepAxis::NumAntennas => cfg.array.num_antennas = value as usize,
        SweepAxis::DeltaTheta => cfg.robust.delta_deg = OneOrMany::One(value),
        SweepAxis::Theta0 => cfg.targets.beamwidth_halfangle_deg = value,
    }
    cfg
}

/// SplitMix64 finalizer; spreads consecutive integers over the seed space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `master`, shared by all axis values.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    mix(mix(master) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Error message if the trial could not be run.
    pub failure: Option<String>,
    pub sum_secrecy_rate: f64,
    pub robust_sum_secrecy_rate: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `|h_k P⊥ n|² / (‖n‖² ‖h_k‖²)` over users.
    pub an_leakage_ratio: f64,
    pub residuals: Option<ConstraintResiduals>,
}

impl TrialOutcome {
    fn failed(seed: u64, err: &Error) -> Self {
        Self {
            seed,
            failure: Some(err.to_string()),
            sum_secrecy_rate: f64::NAN,
            robust_sum_secrecy_rate: f64::NAN,
            objective: f64::NAN,
            iterations: 0,
            converged: false,
            an_leakage_ratio: f64::NAN,
            residuals: None,
        }
    }
}

/// `max_k |h_k P⊥ n|² / (‖n‖² ‖h_k‖²)`, zero when `n = 0`.
pub fn an_leakage_ratio(state: &DesignState, scenario: &Scenario) -> f64 {
    let n2 = state.an_vector().norm_squared();
    if n2 == 0.0 {
        return 0.0;
    }
    let n_eff = state.effective_an();
    (0..scenario.num_users())
        .map(|k| {
            let h = row_adjoint(&scenario.users.channels, k);
            h.dotc(n_eff).norm_sqr() / (n2 * h.norm_squared())
        })
        .fold(0.0, f64::max)
}

/// Instantiates and solves one trial.
pub fn solve_trial(cfg: &ScenarioConfig, seed: u64) -> Result<(Scenario, SolverReport)> {
    let scenario = cfg.instantiate(seed)?;
    let report = run_algorithm1(&scenario, &cfg.solver_options(seed))?;
    Ok((scenario, report))
}

pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> TrialOutcome {
    let run = || -> Result<TrialOutcome> {
        let (scenario, report) = solve_trial(cfg, seed)?;
        let state = &report.final_state;
        let robust_rate = robust::robust_sum_secrecy_rate(
            state,
            &scenario.users,
            &scenario.targets,
            &scenario.geometry,
        )?;
        Ok(TrialOutcome {
            seed,
            failure: None,
            sum_secrecy_rate: report.final_metrics.sum_secrecy_rate,
            robust_sum_secrecy_rate: robust_rate,
            objective: report.objective(),
            iterations: report.iterations,
            converged: report.converged,
            an_leakage_ratio: an_leakage_ratio(state, &scenario),
            residuals: Some(report.residuals.clone()),
        })
    };
    run().unwrap_or_else(|e| TrialOutcome::failed(seed, &e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub trials: usize,
    pub failed: usize,
    pub converged_fraction: f64,
    pub mean_secrecy: f64,
    pub stderr_secrecy: f64,
    pub mean_robust_secrecy: f64,
    pub stderr_robust_secrecy: f64,
    pub mean_iterations: f64,
    /// Fraction of successful trials satisfying each constraint group,
    /// keyed by its label.
    pub satisfaction: BTreeMap<String, f64>,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub axis: SweepAxis,
    pub master_seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Mean and standard error of the mean; NaN for an empty sample and zero
/// error for a single value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn summarize(value: f64, outcomes: Vec<TrialOutcome>) -> SweepPoint {
    let ok: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.failure.is_none()).collect();
    let secrecy: Vec<f64> = ok.iter().map(|o| o.sum_secrecy_rate).collect();
    let robust: Vec<f64> = ok.iter().map(|o| o.robust_sum_secrecy_rate).collect();
    let (mean_secrecy, stderr_secrecy) = mean_stderr(&secrecy);
    let (mean_robust_secrecy, stderr_robust_secrecy) = mean_stderr(&robust);
    let n_ok = ok.len() as f64;
    let mean_iterations = ok.iter().map(|o| o.iterations as f64).sum::<f64>() / n_ok;
    let converged_fraction = ok.iter().filter(|o| o.converged).count() as f64 / n_ok;
    let mut satisfaction = BTreeMap::new();
    for which in Constraint::ALL {
        let applicable: Vec<&ConstraintResiduals> = ok
            .iter()
            .filter_map(|o| o.residuals.as_ref())
            .filter(|r| which != Constraint::Lmi || r.lmi.is_some())
            .collect();
        let frac = if applicable.is_empty() {
            f64::NAN
        } else {
            applicable.iter().filter(|r| r.satisfied(which)).count() as f64
                / applicable.len() as f64
        };
        satisfaction.insert(which.label().to_string(), frac);
    }
    SweepPoint {
        value,
        trials: outcomes.len(),
        failed: outcomes.len() - ok.len(),
        converged_fraction,
        mean_secrecy,
        stderr_secrecy,
        mean_robust_secrecy,
        stderr_robust_secrecy,
        mean_iterations,
        satisfaction,
        outcomes,
    }
}

/// Runs every `(value, trial)` pair; trials run in parallel when the
/// `parallel` feature is on, and results are assembled in index order.
pub fn run_sweep(spec: &SweepSpec, seed: u64) -> Result<SweepResult> {
    spec.validate()?;
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| apply_axis(&spec.base, spec.axis, v))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|p| (0..spec.trials_per_point).map(move |t| (p, t)))
        .collect();
    let job = |&(p, t): &(usize, usize)| run_trial(&configs[p], trial_seed(seed, t));

    #[cfg(feature = "parallel")]
    let outcomes: Vec<TrialOutcome> = {
        use rayon::prelude::*;
        jobs.par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<TrialOutcome> = jobs.iter().map(job).collect();

    let mut iter = outcomes.into_iter();
    let points = spec
        .values
        .iter()
        .map(|&v| summarize(v, iter.by_ref().take(spec.trials_per_point).collect()))
        .collect();
    Ok(SweepResult {
        schema_version: CSV_SCHEMA_VERSION,
        axis: spec.axis,
        master_seed: seed,
        points,
    })
}

pub fn sweep_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "schema_version",
        "axis",
        "value",
        "trials",
        "failed",
        "converged_fraction",
        "mean_secrecy",
        "stderr_secrecy",
        "mean_robust_secrecy",
        "stderr_robust_secrecy",
        "mean_iterations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(Constraint::ALL.iter().map(|c| format!("sat_{}", c.label())));
    cols
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header())?;
    for p in &result.points {
        let mut row = vec![
            CSV_SCHEMA_VERSION.to_string(),
            result.axis.name().to_string(),
            p.value.to_string(),
            p.trials.to_string(),
            p.failed.to_string(),
            p.converged_fraction.to_string(),
            p.mean_secrecy.to_string(),
            p.stderr_secrecy.to_string(),
            p.mean_robust_secrecy.to_string(),
            p.stderr_robust_secrecy.to_string(),
            p.mean_iterations.to_string(),
        ];
        row.extend(
            Constraint::ALL
                .iter()
                .map(|c| p.satisfaction[c.label()].to_string()),
        );
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `n` equally spaced angles covering `[-90°, 90°]` at `step_deg`.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || 180.0 / step_deg > 1e7 {
        return Err(Error::config(format!("invalid angle step {step_deg}")));
    }
    let n = (180.0 / step_deg).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| -90.0 + i as f64 * step_deg).collect();
    if *grid.last().expect("nonempty") < 90.0 - 1e-9 {
        grid.push(90.0);
    }
    Ok(grid)
}

/// `(angle_deg, gain)` rows of the transmit beam pattern.
pub fn emit_beampattern(
    state: &DesignState,
    geometry: &ArrayGeometry,
    angles_deg: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let gains = metrics::beam_gain_pattern(state, geometry, angles_deg)?;
    Ok(angles_deg.iter().copied().zip(gains).collect())
}

pub fn write_beampattern_csv<W: Write>(rows: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "angle_deg", "gain"])?;
    for (a, g) in rows {
        w.write_record([CSV_SCHEMA_VERSION.to_string(), a.to_string(), g.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest gain over `[center - half, center + half]` divided by the
/// largest gain anywhere on the pattern.
pub fn mainlobe_flatness(rows: &[(f64, f64)], center_deg: f64, half_deg: f64) -> f64 {
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let lobe_min = rows
        .iter()
        .filter(|r| (r.0 - center_deg).abs() <= half_deg + 1e-9)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min);
    lobe_min / peak
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub phase: usize,
    pub objective: f64,
    pub secrecy_sum_rate: f64,
    pub surrogate: f64,
    pub repaired: bool,
}

pub fn emit_convergence(report: &SolverReport) -> Vec<ConvergenceRow> {
    (0..report.objective_trace.len())
        .map(|i| ConvergenceRow {
            iteration: i + 1,
            phase: report.phase_trace[i],
            objective: report.objective_trace[i],
            secrecy_sum_rate: report.secrecy_trace[i],
            surrogate: report.surrogate_trace[i],
            repaired: report.repair_trace[i],
        })
        .collect()
}

const CONVERGENCE_HEADER: [&str; 7] = [
    "schema_version",
    "iteration",
    "phase",
    "objective",
    "secrecy_sum_rate",
    "surrogate",
    "repaired",
];

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record([
            CSV_SCHEMA_VERSION.to_string(),
            r.iteration.to_string(),
            r.phase.to_string(),
            r.objective.to_string(),
            r.secrecy_sum_rate.to_string(),
            r.surrogate.to_string(),
            r.repaired.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_convergence_csv<R: Read>(input: R) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CONVERGENCE_HEADER {
        return Err(Error::config(format!(
            "unexpected convergence header {header:?}"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::config(format!("bad number {s:?} in convergence CSV")))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ConvergenceRow {
            iteration: parse(&rec[1])? as usize,
            phase: parse(&rec[2])? as usize,
            objective: parse(&rec[3])?,
            secrecy_sum_rate: parse(&rec[4])?,
            surrogate: parse(&rec[5])?,
            repaired: &rec[6] == "true",
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_361_points_at_half_degree() {
        let g = angle_grid(0.5).unwrap();
        assert_eq!(g.len(), 361);
        assert_eq!(g[0], -90.0);
        assert_eq!(g[360], 90.0);
    }

    #[test]
    fn trial_seeds_distinct_and_stable() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flatness_of_flat_pattern_is_one() {
        let rows: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0)).collect();
        assert_eq!(mainlobe_flatness(&rows, 2.0, 1.0), 1.0);
    }
}
