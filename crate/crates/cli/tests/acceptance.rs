//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails the test binary if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use secrecy_isac::config::{OneOrMany, ScenarioConfig, SweepAxis};
use secrecy_isac::experiment::{self, run_sweep, SweepSpec};
use secrecy_isac::linalg::{c, CMatrix, CVector, C64};
use secrecy_isac::metrics::{self, Constraint, DesignState};
use secrecy_isac::projections::spectral_upper_bound;
use secrecy_isac::solver::{self, AuxState};
use secrecy_isac::{oracle, robust, NullSpaceProjector, UserSet};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| gaussian(rng))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(r, cols, |_, _| gaussian(rng))
}

/// Random users and design with `N_t ≤ 8`, `K ≤ 4`.
fn random_instance(rng: &mut ChaCha8Rng) -> (UserSet, DesignState, Vec<f64>) {
    let nt = rng.random_range(2..=8);
    let k = rng.random_range(1..=4.min(nt - 1));
    let users = UserSet::new(
        random_matrix(rng, k, nt),
        (0..k).map(|_| rng.random_range(0.1..2.0)).collect(),
        vec![1.0; k],
        vec![10.0; k],
        (0..k).map(|_| rng.random_range(0.2..2.0)).collect(),
    )
    .expect("valid users");
    let projector = NullSpaceProjector::build(&users.channels).expect("generic channels");
    let w = random_matrix(rng, nt, k);
    let n = random_vector(rng, nt);
    let state = DesignState::new(w, n, &projector);
    let weights = users.weights.clone();
    (users, state, weights)
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = gaussian(&mut rng) * rng.random_range(0.01..10.0);
        let b: f64 = rng.random_range(1e-3..1e3);
        let y = solver::update_y(e, b);
        let exact = e.norm_sqr() / (e.norm_sqr() + b);
        let value = solver::qt_value(y, e, b);
        worst = worst.max((value - exact).abs() / exact);
    }
    verdict(
        worst <= 1e-10,
        format!("max relative gap {worst:.2e} over 1000 pairs"),
    )
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (users, state, weights) = random_instance(&mut rng);
        let mut aux = AuxState::new(state.num_antennas(), users.len());
        solver::refresh_beam_aux(&state, &users, &mut aux);
        let h = solver::dual_surrogate(&state, &users, &weights, &aux);
        let target = metrics::weighted_sum_rate(&state, &users, &weights);
        worst = worst.max((h - target).abs());
    }
    verdict(
        worst <= 1e-9,
        format!("max |h - Σμ log₂(1+M)| = {worst:.2e} over 100 instances"),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (users, mut state, weights) = random_instance(&mut rng);
        let k = rng.random_range(0..users.len());
        let mut aux = AuxState::new(state.num_antennas(), users.len());
        for i in 0..users.len() {
            aux.y[i] = gaussian(&mut rng) * 0.3;
            aux.zeta[i] = rng.random_range(0.0..3.0);
        }
        aux.z = state.beamformers().clone();
        let d = solver::assemble_d(&users, &weights, &aux);
        let kappa = spectral_upper_bound(&d).expect("hermitian");
        let kappas = vec![kappa; users.len()];
        let z = state.beamformer(k);
        let w_star = solver::update_w(&users, &weights, &aux, k, kappa, &d, &z).expect("κ > 0");

        let f = |x: &CVector| {
            let mut s = state.clone();
            s.set_beamformer(k, x);
            solver::expanded_surrogate(&s, &users, &weights, &aux, &kappas)
        };
        let g_star = oracle::finite_difference_gradient(f, &w_star, 1e-6).expect("finite");
        let g_anchor = oracle::finite_difference_gradient(f, &z, 1e-6).expect("finite");
        let rel = g_star.norm() / g_anchor.norm().max(1e-300);
        worst = worst.max(rel);
        state.set_beamformer(k, &w_star);
    }
    verdict(
        worst <= 1e-5,
        format!("max ‖∇f(w*)‖/‖∇f(z)‖ = {worst:.2e} over 100 instances"),
    )
}

struct ReferenceRuns {
    outcomes: Vec<(bool, f64, f64, secrecy_isac::ConstraintResiduals)>,
    elapsed: Duration,
}

/// 50 reference instances: (converged, max in-phase decrease, AN leakage ratio, residuals).
fn reference_runs() -> ReferenceRuns {
    let cfg = ScenarioConfig::default();
    let start = Instant::now();
    let outcomes = (0..50)
        .map(|seed| {
            let (scenario, report) = experiment::solve_trial(&cfg, seed).expect("solvable");
            let leak = experiment::an_leakage_ratio(&report.final_state, &scenario);
            (
                report.converged,
                report.max_phase_decrease(),
                leak,
                report.residuals,
            )
        })
        .collect();
    ReferenceRuns {
        outcomes,
        elapsed: start.elapsed(),
    }
}

fn criterion_4(runs: &ReferenceRuns) -> Verdict {
    let n = runs.outcomes.len();
    let converged = runs.outcomes.iter().filter(|o| o.0).count();
    let worst_drop = runs.outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    let pass = worst_drop <= 1e-9
        && converged as f64 >= 0.9 * n as f64
        && runs.elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "{converged}/{n} converged within 200 iterations per phase, max in-phase drop {worst_drop:.2e}, {:.1}s",
            runs.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5(runs: &ReferenceRuns) -> Verdict {
    let worst = runs.outcomes.iter().map(|o| o.2).fold(0.0, f64::max);
    verdict(
        worst <= 1e-20,
        format!(
            "max |h P⊥ n|² / (‖n‖²‖h‖²) = {worst:.2e} over {} runs",
            runs.outcomes.len()
        ),
    )
}

fn criterion_6(runs: &ReferenceRuns) -> Verdict {
    let converged: Vec<_> = runs.outcomes.iter().filter(|o| o.0).map(|o| &o.3).collect();
    let hard = [Constraint::A, Constraint::B, Constraint::F, Constraint::G];
    let hard_ok = converged
        .iter()
        .all(|r| hard.iter().all(|&c| r.satisfied(c)));
    let mut soft = Vec::new();
    let mut soft_ok = true;
    for which in [Constraint::C, Constraint::D, Constraint::E] {
        let frac = runs
            .outcomes
            .iter()
            .filter(|o| o.3.satisfied(which))
            .count() as f64
            / runs.outcomes.len() as f64;
        soft_ok &= frac >= 0.8;
        soft.push(format!("{} {:.0}%", which.label(), 100.0 * frac));
    }
    verdict(
        hard_ok && soft_ok,
        format!(
            "(a),(b),(f),(g) within 1e-6 on all {} converged runs: {hard_ok}; satisfaction {}",
            converged.len(),
            soft.join(", ")
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut cfg = ScenarioConfig::default();
    cfg.array.num_antennas = 4;
    cfg.users.count = 2;
    cfg.targets.count = 1;
    cfg.solver.weight_adaptation = false;
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for seed in 0..20 {
        let (scenario, report) = experiment::solve_trial(&cfg, seed).expect("solvable");
        let (_, best) = oracle::random_search_maximize(&scenario, 100_000, 1000 + seed)
            .expect("positive sample count");
        let margin = (report.objective() - best) / best.abs().max(1e-12);
        if margin < -0.01 {
            failures += 1;
        }
        worst = worst.min(margin);
    }
    let elapsed = start.elapsed();
    verdict(
        failures == 0 && elapsed < Duration::from_secs(300),
        format!(
            "worst (solver - oracle)/oracle = {:+.3}%, {failures} of 20 below -1%, {:.1}s",
            100.0 * worst,
            elapsed.as_secs_f64()
        ),
    )
}

/// One-sided paired t statistic of `b - a`.
fn paired_t(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let (mean, stderr) = experiment::mean_stderr(&diffs);
    (
        mean,
        if stderr > 0.0 {
            mean / stderr
        } else {
            f64::INFINITY * mean.signum()
        },
    )
}

/// Upper 5% point of Student's t with 99 degrees of freedom.
const T_CRIT_99: f64 = 1.6604;

fn secrecy_per_trial(cfg: &ScenarioConfig, trials: usize) -> Vec<f64> {
    let spec = SweepSpec {
        axis: SweepAxis::NumTargets,
        values: vec![cfg.targets.count as f64],
        trials_per_point: trials,
        base: cfg.clone(),
    };
    let result = run_sweep(&spec, 8).expect("valid sweep");
    result.points[0]
        .outcomes
        .iter()
        .map(|o| o.sum_secrecy_rate)
        .collect()
}

fn criterion_8() -> Verdict {
    let trials = 100;
    let mut base = ScenarioConfig::default();
    base.users.count = 4;
    base.array.num_antennas = 16;

    let mut j2 = base.clone();
    j2.targets.count = 2;
    let rate_j1 = secrecy_per_trial(&base, trials);
    let rate_j2 = secrecy_per_trial(&j2, trials);
    let (d_j, t_j) = paired_t(&rate_j1, &rate_j2);

    let mut by_nt = Vec::new();
    for nt in [8, 16, 18] {
        let mut cfg = base.clone();
        cfg.array.num_antennas = nt;
        by_nt.push(secrecy_per_trial(&cfg, trials));
    }
    let (d_a, t_a) = paired_t(&by_nt[0], &by_nt[1]);
    let (d_b, t_b) = paired_t(&by_nt[1], &by_nt[2]);
    let failed = rate_j1
        .iter()
        .chain(&rate_j2)
        .chain(by_nt.iter().flatten())
        .filter(|x| x.is_nan())
        .count();

    let pass = failed == 0 && -t_j > T_CRIT_99 && t_a > T_CRIT_99 && t_b > T_CRIT_99;
    verdict(
        pass,
        format!(
            "J 1→2: Δ {d_j:+.3} (t {t_j:.1}); N_t 8→16: Δ {d_a:+.3} (t {t_a:.1}); 16→18: Δ {d_b:+.3} (t {t_b:.1}); critical t {T_CRIT_99}; {failed} failed trials"
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut worst_gap: f64 = 0.0;
    // Diagnostic only: the endpoints plus the nominal angle.
    let mut three_point_gap: f64 = 0.0;
    let mut robust_above = 0;
    let mut checked = 0;
    for i in 0..100u64 {
        let mut cfg = ScenarioConfig::default();
        cfg.robust.enabled = true;
        let delta = [0.5, 1.0, 1.5, 2.0][i as usize % 4];
        cfg.robust.delta_deg = OneOrMany::One(delta);
        let scenario = cfg.instantiate(i).expect("valid");
        let state = oracle::random_feasible_design(&scenario, 77, i);
        for k in 0..scenario.num_users() {
            for j in 0..scenario.num_targets() {
                let (endpoint, _) =
                    robust::worst_case_eve_snr(&state, &scenario.targets, &scenario.geometry, k, j)
                        .expect("valid indices");
                let (grid, _) = oracle::grid_worst_case(
                    &state,
                    &scenario.targets,
                    &scenario.geometry,
                    k,
                    j,
                    0.05,
                )
                .expect("valid grid");
                worst_gap = worst_gap.max((grid - endpoint) / grid);
                let nominal = metrics::eve_snr(&state, &scenario.targets, &scenario.geometry, k, j)
                    .expect("valid indices");
                three_point_gap = three_point_gap.max((grid - endpoint.max(nominal)) / grid);
                checked += 1;
            }
            let nominal = metrics::secrecy_rate(
                &state,
                &scenario.users,
                &scenario.targets,
                &scenario.geometry,
                k,
            )
            .expect("valid index");
            let rob = robust::robust_secrecy_rate(
                &state,
                &scenario.users,
                &scenario.targets,
                &scenario.geometry,
                k,
            )
            .expect("valid index");
            if rob > nominal {
                robust_above += 1;
            }
        }
    }
    verdict(
        worst_gap <= 0.05 && robust_above == 0,
        format!(
            "max (grid - endpoint)/grid = {:.2}% over {checked} pairs, Δ ≤ 2° (with the nominal angle added: {:.2}%); robust > nominal in {robust_above} cases",
            100.0 * worst_gap,
            100.0 * three_point_gap
        ),
    )
}

/// Regime of the angular-variation experiment: N_t = 18, K = 4, J = 1.
fn criterion_10() -> Verdict {
    let mut base = ScenarioConfig::default();
    base.array.num_antennas = 18;
    base.users.count = 4;
    base.targets.count = 1;
    base.robust.enabled = true;
    let spec = SweepSpec {
        axis: SweepAxis::DeltaTheta,
        values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        trials_per_point: 20,
        base,
    };
    let result = run_sweep(&spec, 10).expect("valid sweep");
    let means: Vec<f64> = result
        .points
        .iter()
        .map(|p| p.mean_robust_secrecy)
        .collect();
    let reference = means[0];
    let spread = means
        .iter()
        .map(|m| (m - reference).abs() / reference)
        .fold(0.0, f64::max);
    let failed: usize = result.points.iter().map(|p| p.failed).sum();
    verdict(
        spread <= 0.25 && failed == 0,
        format!(
            "robust mean secrecy over Δθ 0..10°: {:?}; max deviation {:.1}% of Δθ=0",
            means
                .iter()
                .map(|m| (m * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            100.0 * spread
        ),
    )
}

fn run_cli_sweep(dir: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_secrecy-isac"))
        .args(["sweep", "--seed", "11", "--trials", "2", "--out-dir"])
        .arg(dir)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "sweep failed: {status:?}");
    std::fs::read(dir.join("sweep.csv")).expect("sweep.csv written")
}

fn criterion_11() -> Verdict {
    let root = std::env::temp_dir().join(format!("secrecy-isac-acceptance-{}", std::process::id()));
    let first = run_cli_sweep(&root.join("a"));
    let second = run_cli_sweep(&root.join("b"));
    let _ = std::fs::remove_dir_all(&root);
    verdict(
        first == second && !first.is_empty(),
        format!(
            "two sweep invocations, {} and {} bytes, identical: {}",
            first.len(),
            second.len(),
            first == second
        ),
    )
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, v: Verdict| {
        all_pass &= v.pass;
        println!(
            "criterion {id:>2} {} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    };
    report(1, "quadratic-transform tightness", criterion_1());
    report(2, "dual-transform tightness", criterion_2());
    report(3, "stationarity of the beamformer update", criterion_3());
    let runs = reference_runs();
    report(4, "monotone convergence", criterion_4(&runs));
    report(5, "null-space security", criterion_5(&runs));
    report(6, "feasibility", criterion_6(&runs));
    report(7, "oracle dominance", criterion_7());
    report(8, "trend reproduction", criterion_8());
    report(9, "robust endpoint accuracy", criterion_9());
    report(10, "stability under angular uncertainty", criterion_10());
    report(11, "determinism", criterion_11());
    if !all_pass {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
