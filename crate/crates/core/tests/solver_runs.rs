mod common;

use common::{config, robust_config};
use secrecy_isac::experiment::{
    angle_grid, emit_beampattern, emit_convergence, read_convergence_csv, solve_trial,
    write_convergence_csv,
};
use secrecy_isac::metrics::{Constraint, RESIDUAL_TOL};
use secrecy_isac::solver::{initial_state, run_algorithm1, run_from};
use secrecy_isac::{CMatrix, Error};

#[test]
fn reference_runs_converge_monotonically_and_stay_feasible() {
    let cfg = config(8, 2, 1);
    for seed in 0..4 {
        let (scenario, report) = solve_trial(&cfg, seed).unwrap();
        assert!(
            report.iterations <= cfg.solver.max_outer_iters * report.phase_converged.len().max(1)
        );
        assert!(report.max_phase_decrease() <= 1e-9, "seed {seed}");
        for which in [Constraint::A, Constraint::B, Constraint::F, Constraint::G] {
            assert!(
                report.residuals.satisfied(which),
                "seed {seed} {}",
                which.label()
            );
        }
        for k in 0..2 {
            let leak = scenario.users.channels.row(k) * report.final_state.effective_an();
            assert!(leak[0].norm_sqr() < 1e-12, "seed {seed}");
        }
        assert_eq!(report.objective_trace.len(), report.secrecy_trace.len());
        assert!(report.objective() > 0.0);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(8, 2, 2);
    let (_, a) = solve_trial(&cfg, 17).unwrap();
    let (_, b) = solve_trial(&cfg, 17).unwrap();
    assert_eq!(a.objective_trace, b.objective_trace);
    assert_eq!(a.design, b.design);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn report_json_has_required_fields() {
    let (_, report) = solve_trial(&config(6, 2, 1), 3).unwrap();
    let value = serde_json::to_value(&report).unwrap();
    for field in [
        "objective_trace",
        "secrecy_trace",
        "residuals",
        "iterations",
        "seed",
    ] {
        assert!(value.get(field).is_some(), "missing {field}");
    }
    assert_eq!(value["seed"], 3);
}

#[test]
fn convergence_csv_round_trips() {
    let (_, report) = solve_trial(&config(8, 2, 1), 1).unwrap();
    let rows = emit_convergence(&report);
    assert_eq!(rows.len(), report.objective_trace.len());
    let mut buf = Vec::new();
    write_convergence_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("schema_version,iteration,"));
    assert_eq!(read_convergence_csv(buf.as_slice()).unwrap(), rows);
}

#[test]
fn beam_pattern_covers_half_degree_grid() {
    let (scenario, report) = solve_trial(&config(8, 2, 1), 2).unwrap();
    let grid = angle_grid(0.5).unwrap();
    let rows = emit_beampattern(&report.final_state, &scenario.geometry, &grid).unwrap();
    assert_eq!(rows.len(), 361);
    assert_eq!(rows[0].0, -90.0);
    assert_eq!(rows[360].0, 90.0);
    assert!(rows.iter().all(|r| r.1 >= 0.0 && r.1.is_finite()));
}

#[test]
fn zero_channels_are_rejected() {
    let cfg = config(6, 2, 1);
    let mut scenario = cfg.instantiate(0).unwrap();
    let options = cfg.solver_options(0);
    let start = initial_state(&scenario, &options);
    scenario.users.channels = CMatrix::zeros(2, 6);
    assert!(matches!(
        run_from(&scenario, &options, start),
        Err(Error::Config(_))
    ));
}

#[test]
fn invalid_options_are_rejected() {
    let cfg = config(6, 2, 1);
    let scenario = cfg.instantiate(0).unwrap();
    let mut options = cfg.solver_options(0);
    options.convergence_tol = 0.0;
    assert!(matches!(
        run_algorithm1(&scenario, &options),
        Err(Error::Config(_))
    ));
}

#[test]
fn robust_runs_satisfy_the_lmi() {
    let cfg = robust_config(8, 2, 1, 3.0);
    for seed in 0..3 {
        let (_, report) = solve_trial(&cfg, seed).unwrap();
        let lmi = report
            .residuals
            .lmi
            .as_ref()
            .expect("robust mode fills the LMI residuals");
        assert_eq!(lmi.len(), 2);
        assert!(
            report.residuals.worst(Constraint::Lmi) <= RESIDUAL_TOL,
            "seed {seed}"
        );
    }
}
