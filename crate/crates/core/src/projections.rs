//! Null-space projector, feasible-set projections, sensing repair and
//! spectral upper bounds.

use crate::error::{Error, Result};
use crate::linalg::{c, ensure_hermitian, hermitian_form, CMatrix, CVector, C64};
use crate::metrics::DesignState;
use crate::scenario::Scenario;

/// Largest admissible condition number of `HHᴴ`.
pub const MAX_CONDITION: f64 = 1e8;

/// Orthogonal projector onto the null space of the user channels,
/// `P⊥ = I - Hᴴ(HHᴴ)⁻¹H`.
///
/// Built from the left singular vectors of `Hᴴ` rather than the explicit
/// inverse, which keeps the projector idempotent to machine precision even
/// for moderately conditioned channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceProjector {
    matrix: CMatrix,
}

impl NullSpaceProjector {
    pub fn build(channels: &CMatrix) -> Result<Self> {
        let (k, nt) = channels.shape();
        if k == 0 {
            return Ok(Self {
                matrix: CMatrix::identity(nt, nt),
            });
        }
        if k > nt {
            return Err(Error::config(format!(
                "more users ({k}) than antennas ({nt})"
            )));
        }
        let svd = channels.adjoint().svd(true, false);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 {
            (smax / smin).powi(2)
        } else {
            f64::INFINITY
        };
        if !(condition < MAX_CONDITION) {
            return Err(Error::Singular {
                condition,
                limit: MAX_CONDITION,
            });
        }
        let u = svd.u.expect("requested U");
        let matrix = CMatrix::identity(nt, nt) - &u * u.adjoint();
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }
}

/// Upper bound `|dᴴ w|² ≤ cap` on the leakage of a beamformer along `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageCap {
    pub direction: CVector,
    pub cap: f64,
}

impl LeakageCap {
    pub fn leakage(&self, w: &CVector) -> f64 {
        self.direction.dotc(w).norm_sqr()
    }

    /// Euclidean projection onto `{x : |dᴴx| ≤ √cap}`; only the component
    /// along `d` changes.
    fn project(&self, w: &CVector) -> CVector {
        let inner = self.direction.dotc(w);
        let mag = inner.norm();
        let radius = self.cap.max(0.0).sqrt();
        if mag <= radius {
            return w.clone();
        }
        let target = inner * (radius / mag);
        let shift = (inner - target) / self.direction.norm_squared();
        w - &self.direction * shift
    }
}

/// Upper bound `wᴴ M w ≤ cap` with `M` Hermitian positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCap {
    pub matrix: CMatrix,
    pub cap: f64,
}

impl QuadraticCap {
    pub fn load(&self, w: &CVector) -> f64 {
        hermitian_form(w, &self.matrix)
    }
}

/// Euclidean projection onto `{x ∈ V : xᴴMx ≤ cap}` for inputs in `V`,
/// from the eigenpairs of `P_V M P_V`.
struct EllipsoidProjector {
    vectors: CMatrix,
    values: Vec<f64>,
    cap: f64,
}

impl EllipsoidProjector {
    fn new(quad: &QuadraticCap, restrict: &ZeroCapSubspace) -> Self {
        let n = quad.matrix.nrows();
        let m = match &restrict.basis {
            None => quad.matrix.clone(),
            Some(q) => {
                let p = CMatrix::identity(n, n) - q * q.adjoint();
                &p * &quad.matrix * &p
            }
        };
        let m = (&m + m.adjoint()) * c(0.5, 0.0);
        let eig = m.symmetric_eigen();
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
            cap: quad.cap.max(0.0),
        }
    }

    fn project(&self, w: &CVector) -> CVector {
        let y = self.vectors.adjoint() * w;
        let weights: Vec<(f64, f64)> = y
            .iter()
            .zip(&self.values)
            .map(|(yi, &mu)| (mu, yi.norm_sqr()))
            .collect();
        let load = |lambda: f64| -> (f64, f64) {
            weights.iter().fold((0.0, 0.0), |(f, df), &(mu, y2)| {
                let d = 1.0 + lambda * mu;
                (f + mu * y2 / (d * d), df - 2.0 * mu * mu * y2 / (d * d * d))
            })
        };
        if load(0.0).0 <= self.cap {
            return w.clone();
        }
        // Newton on the convex, decreasing load from the left stays below
        // the root and converges monotonically.
        let mut lambda = 0.0;
        for _ in 0..100 {
            let (f, df) = load(lambda);
            if self.cap <= 0.0 {
                lambda = if lambda == 0.0 { 1.0 } else { lambda * 1e3 };
                if lambda > 1e300 {
                    break;
                }
                continue;
            }
            let step = (f - self.cap) / -df;
            if !(step.is_finite()) || step <= 1e-15 * lambda.max(f64::MIN_POSITIVE) {
                break;
            }
            lambda += step;
        }
        let hi = lambda;
        let shrunk = CVector::from_fn(y.len(), |i, _| y[i] / c(1.0 + hi * self.values[i], 0.0));
        &self.vectors * shrunk
    }
}

/// Stopping rule for the cyclic projection onto `{‖w‖² ≤ P} ∩ caps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub max_cycles: usize,
    pub tolerance: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            max_cycles: 500,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamProjection {
    pub w: CVector,
    /// A negative cap made the feasible set empty; `w` is zero.
    pub infeasible: bool,
    pub cycles: usize,
}

fn ball_project(w: &CVector, power: f64) -> CVector {
    let norm2 = w.norm_squared();
    if norm2 <= power {
        w.clone()
    } else {
        w * c((power / norm2).sqrt(), 0.0)
    }
}

fn is_feasible(
    w: &CVector,
    power: f64,
    caps: &[LeakageCap],
    quads: &[QuadraticCap],
    slack: f64,
) -> bool {
    w.norm_squared() <= power * (1.0 + slack)
        && caps
            .iter()
            .all(|cap| cap.leakage(w) <= cap.cap + slack * cap.cap.max(f64::MIN_POSITIVE))
        && quads
            .iter()
            .all(|q| q.load(w) <= q.cap + slack * q.cap.max(f64::MIN_POSITIVE))
}

/// Orthogonal complement of the directions whose cap is exactly zero.
struct ZeroCapSubspace {
    basis: Option<CMatrix>,
}

impl ZeroCapSubspace {
    fn new(caps: &[LeakageCap]) -> Self {
        let dirs: Vec<&CVector> = caps
            .iter()
            .filter(|cap| cap.cap == 0.0)
            .map(|cap| &cap.direction)
            .collect();
        if dirs.is_empty() {
            return Self { basis: None };
        }
        let a = CMatrix::from_columns(&dirs.iter().map(|d| (*d).clone()).collect::<Vec<_>>());
        let svd = a.svd(true, false);
        let u = svd.u.expect("requested U");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-12 * smax)
            .collect();
        if keep.is_empty() {
            return Self { basis: None };
        }
        Self {
            basis: Some(u.select_columns(&keep)),
        }
    }

    fn apply(&self, v: &CVector) -> CVector {
        match &self.basis {
            None => v.clone(),
            Some(q) => v - q * (q.adjoint() * v),
        }
    }
}

/// Projects `w` onto the power ball intersected with every leakage cap.
///
/// Uses Dykstra's cyclic projections (ball, then each cap), which converges
/// to the Euclidean projection onto the intersection. The result is then
/// shrunk radially, if needed, so every constraint holds up to rounding; all sets
/// are star-shaped about the origin so shrinking never breaks one.
pub fn project_beamformer(
    w: &CVector,
    user_power: f64,
    caps: &[LeakageCap],
    options: ProjectionOptions,
) -> BeamProjection {
    project_beamformer_with(w, user_power, caps, &[], options)
}

/// [`project_beamformer`] with additional quadratic caps `wᴴMw ≤ cap`,
/// each projected exactly inside the Dykstra cycle.
pub fn project_beamformer_with(
    w: &CVector,
    user_power: f64,
    caps: &[LeakageCap],
    quads: &[QuadraticCap],
    options: ProjectionOptions,
) -> BeamProjection {
    if caps.iter().any(|cap| cap.cap < 0.0) || quads.iter().any(|q| q.cap < 0.0) || user_power < 0.0
    {
        return BeamProjection {
            w: CVector::zeros(w.len()),
            infeasible: true,
            cycles: 0,
        };
    }
    if is_feasible(w, user_power, caps, quads, 0.0) {
        return BeamProjection {
            w: w.clone(),
            infeasible: false,
            cycles: 0,
        };
    }

    // Zero caps confine `x` to the orthogonal complement V of their
    // directions. Every remaining set keeps V invariant once its direction is
    // replaced by the part inside V, so Dykstra started from `P_V w` returns
    // the exact projection without iterating between near-parallel planes.
    let restrict = ZeroCapSubspace::new(caps);
    let reduced: Vec<LeakageCap> = caps
        .iter()
        .filter(|cap| cap.cap > 0.0)
        .map(|cap| LeakageCap {
            direction: restrict.apply(&cap.direction),
            cap: cap.cap,
        })
        .filter(|cap| cap.direction.norm() > 1e-12)
        .collect();
    let caps_all = caps;
    let caps = &reduced[..];
    let ellipsoids: Vec<EllipsoidProjector> = quads
        .iter()
        .map(|q| EllipsoidProjector::new(q, &restrict))
        .collect();

    let mut x = restrict.apply(w);
    let mut corrections = vec![CVector::zeros(w.len()); caps.len() + ellipsoids.len() + 1];
    let scale = w.norm().max(f64::MIN_POSITIVE);
    let mut cycles = 0;
    while cycles < options.max_cycles {
        cycles += 1;
        let start = x.clone();
        for (i, p) in corrections.iter_mut().enumerate() {
            let y = &x + &*p;
            let projected = if i == 0 {
                ball_project(&y, user_power)
            } else if i <= caps.len() {
                caps[i - 1].project(&y)
            } else {
                ellipsoids[i - 1 - caps.len()].project(&y)
            };
            *p = &y - &projected;
            x = projected;
        }
        if (&x - &start).norm() <= options.tolerance * scale
            && is_feasible(&x, user_power, caps, quads, 1e-9)
        {
            break;
        }
    }

    // Exact feasibility by radial shrink.
    let mut t: f64 = 1.0;
    let norm2 = x.norm_squared();
    if norm2 > user_power {
        t = t.min((user_power / norm2).sqrt());
    }
    let xnorm = x.norm();
    for cap in caps_all {
        let leak = cap.leakage(&x);
        // Leakage at rounding level of dᴴx counts as zero; otherwise a
        // zero cap would shrink the whole vector away.
        let floor = (1e-13 * cap.direction.norm() * xnorm).powi(2);
        if leak > cap.cap + floor {
            t = t.min((cap.cap / leak).sqrt());
        }
    }
    for q in quads {
        let load = q.load(&x);
        if load > q.cap {
            t = t.min((q.cap / load).sqrt());
        }
    }
    if t < 1.0 {
        x *= c(t, 0.0);
    }
    BeamProjection {
        w: x,
        infeasible: false,
        cycles,
    }
}

/// Leakage caps for user `k`'s beamformer given the current artificial noise.
///
/// * Secrecy cap per target: `|a(θ_j)ᴴ w|² ≤ (2^{β_j} - 1)(|α_j|² aᴴR a + σ_e²) / |α_j|²`,
///   which is the eavesdropper-rate cap rewritten at fixed AN.
/// * With `include_beamwidth`, a cap at each edge `θ_j ± θ_0` equal to
///   `(η_j / (2|α_j|) - aᴴR a)⁺ / K`, an equal split of the beamwidth budget.
pub fn beamformer_caps(
    scenario: &Scenario,
    state: &DesignState,
    include_secrecy: bool,
    include_beamwidth: bool,
) -> Vec<LeakageCap> {
    let targets = &scenario.targets;
    let mut caps = Vec::new();
    for j in 0..targets.len() {
        if include_secrecy {
            let a = scenario.target_steering(j);
            let g2 = targets.gain_sq(j);
            let cap =
                targets.snr_cap(j) * (g2 * state.an_gain(&a) + targets.eve_noise_variance) / g2;
            caps.push(LeakageCap { direction: a, cap });
        }
        if include_beamwidth {
            let alpha = targets.path_gains[j].norm();
            let share = scenario.num_users() as f64;
            for edge in targets.beamwidth_edges(j) {
                let a = scenario.steering(edge);
                let room = targets.sensing_thresholds[j] / (2.0 * alpha) - state.an_gain(&a);
                caps.push(LeakageCap {
                    direction: a,
                    cap: room.max(0.0) / share,
                });
            }
        }
    }
    caps
}

/// Scales the null-space component of `n` so that `‖P⊥ n‖² ≤ budget`.
pub fn project_an(n: &CVector, projector: &NullSpaceProjector, budget: f64) -> Result<CVector> {
    if !(budget >= 0.0) {
        return Err(Error::config(format!(
            "artificial-noise budget must be nonnegative, got {budget}"
        )));
    }
    let effective = projector.apply(n);
    let power = effective.norm_squared();
    if power <= budget {
        return Ok(n.clone());
    }
    let s = (budget / power).sqrt();
    Ok(n - &effective * c(1.0 - s, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub state: DesignState,
    /// Whether the AN was modified at all.
    pub fired: bool,
    /// Targets whose detection constraint is still violated.
    pub unrepaired: Vec<usize>,
}

/// Reshapes the artificial noise toward the sensing constraints.
///
/// Detection step, for each target `j` whose radar power is below `η_j`:
/// the effective AN is replaced by `(1-λ) n_eff + λ √E e^{jφ} u_j`, where
/// `E` is the AN budget, `φ` the phase of `aᴴ n_eff` and `u_j` the unit
/// part of `P⊥a(θ_j)` orthogonal to `P⊥a(θ_j ± θ_0)` (or `P⊥a(θ_j)` itself
/// when that part is too weak). `|aᴴ n|` is then linear in `λ` and the power
/// stays within `E`, so the smallest sufficient `λ` is closed form.
///
/// Beamwidth step: where the gain at `θ_j ± θ_0` exceeds `η_j/2` (relative
/// tolerance 10⁻⁹), `n_eff` is moved toward a point whose gain at those
/// edges is zero while its gain toward every target is unchanged (see
/// [`beamwidth_an_target`]), just far enough to restore the edges, and
/// shortened further if needed to stay within the AN budget.
///
/// Each detection step is also shortened (by bisection) if it would push a
/// secrecy-leakage residual above `max(previous, 0)`. The beamwidth step is
/// not guarded: when it falls back to radial shrinking or is cut to the
/// budget, the AN toward the targets drops and leakage can rise until the
/// next beamformer projection. SINR constraints are unaffected because the
/// AN stays in the null space.
pub fn sensing_feasibility_repair(state: &DesignState, scenario: &Scenario) -> RepairOutcome {
    let targets = &scenario.targets;
    let budget = scenario.an_power_budget();
    let projector = &scenario.projector;
    let mut current = state.clone();
    let mut fired = false;
    if budget <= 0.0 {
        return RepairOutcome {
            unrepaired: detection_violations(&current, scenario),
            state: current,
            fired,
        };
    }

    let not_worse = |before: &[f64], after: &[f64]| -> bool {
        after
            .iter()
            .zip(before)
            .all(|(&a, &b)| a <= b.max(0.0) + 1e-12)
    };
    let with_an = |base: &DesignState, n: CVector| -> DesignState {
        let mut s = base.clone();
        s.set_an(n, projector);
        s
    };
    // Largest λ ≤ λ_max (by bisection) for which `ok` holds at `at(λ)`.
    let shorten = |lambda_max: f64,
                   at: &dyn Fn(f64) -> DesignState,
                   ok: &dyn Fn(&DesignState) -> bool|
     -> f64 {
        if ok(&at(lambda_max)) {
            return lambda_max;
        }
        let (mut lo, mut hi) = (0.0, lambda_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };

    for _pass in 0..3 {
        let mut changed = false;

        for j in 0..targets.len() {
            let a = scenario.target_steering(j);
            let alpha = targets.path_gains[j].norm();
            let beams = beam_only_gain(&current, &a);
            let eta = targets.sensing_thresholds[j];
            if alpha * (beams + current.an_gain(&a)) >= eta {
                continue;
            }
            let n_eff = current.effective_an().clone();
            let inner = a.dotc(&n_eff);
            let g0 = inner.norm();
            let needed = ((eta / alpha - beams).max(0.0)).sqrt() * (1.0 + 1e-9);
            let Some((u, g1)) = sensing_direction(scenario, j, budget, needed) else {
                continue;
            };
            if g1 <= g0 {
                continue;
            }
            let lambda = ((needed - g0) / (g1 - g0)).clamp(0.0, 1.0);
            let phase = if g0 > 0.0 { inner / g0 } else { c(1.0, 0.0) };
            let direction: CVector = &u * (phase * budget.sqrt());

            let base = current.clone();
            let before = leakage_residuals(&base, scenario);
            let at = |l: f64| with_an(&base, &n_eff * c(1.0 - l, 0.0) + &direction * c(l, 0.0));
            let ok = |s: &DesignState| not_worse(&before, &leakage_residuals(s, scenario));
            let lambda = shorten(lambda, &at, &ok);
            if lambda * (&direction - &n_eff).norm() > 1e-9 * budget.sqrt() {
                current = at(lambda);
                changed = true;
            }
        }

        if let Some((target, needed)) = beamwidth_an_target(&current, scenario) {
            let n_eff = current.effective_an().clone();
            let base = current.clone();
            let at = |l: f64| with_an(&base, &n_eff * c(1.0 - l, 0.0) + &target * c(l, 0.0));
            let ok = |s: &DesignState| s.effective_an().norm_squared() <= budget * (1.0 + 1e-12);
            let lambda = shorten(needed, &at, &ok);
            let step = (&target - &n_eff).norm() * lambda;
            if step > 1e-9 * budget.sqrt() {
                current = at(lambda);
                changed = true;
            }
        }

        fired |= changed;
        if !changed {
            break;
        }
    }

    RepairOutcome {
        unrepaired: detection_violations(&current, scenario),
        state: current,
        fired,
    }
}

/// AN aimed at `aim_deg` within the AN budget, the users' null space and a
/// per-edge gain allowance `edge_room` (one entry per beamwidth edge, in
/// target order).
///
/// The aim direction `d` is the principal eigenvector of
/// `Σ_i P⊥a(θ_i) a(θ_i)ᴴP⊥ / ‖P⊥a(θ_i)‖²`. The AN maximizes `Re{dᴴn}` over
/// the convex set `{‖n‖² ≤ E, h_k n = 0, |a(edge)ᴴn|² ≤ room}`, computed as
/// the projection of a far point `t d` onto that set. `None` when the budget
/// is zero or no aim angle has a null-space component.
pub fn shaped_an(scenario: &Scenario, aim_deg: &[f64], edge_room: &[f64]) -> Option<CVector> {
    let budget = scenario.an_power_budget();
    if budget <= 0.0 || aim_deg.is_empty() {
        return None;
    }
    let projector = &scenario.projector;
    let nt = scenario.num_antennas();
    let mut gram = CMatrix::zeros(nt, nt);
    for &t in aim_deg {
        let g = projector.apply(&scenario.steering(t));
        let n2 = g.norm_squared();
        if n2 > 1e-12 * nt as f64 {
            gram += &g * g.adjoint() / c(n2, 0.0);
        }
    }
    let eig = gram.symmetric_eigen();
    let (top, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))?;
    if !(value > 1e-9) {
        return None;
    }
    let aim = eig.eigenvectors.column(top).into_owned();

    let users = &scenario.users;
    let mut caps: Vec<LeakageCap> = (0..users.len())
        .map(|k| LeakageCap {
            direction: crate::linalg::row_adjoint(&users.channels, k),
            cap: 0.0,
        })
        .collect();
    let edges = (0..scenario.num_targets()).flat_map(|j| scenario.targets.beamwidth_edges(j));
    for (edge, &room) in edges.zip(edge_room) {
        caps.push(LeakageCap {
            direction: scenario.steering(edge),
            cap: room.max(0.0),
        });
    }
    let far = aim * c(1e3 * budget.sqrt(), 0.0);
    let n = project_beamformer(&far, budget, &caps, ProjectionOptions::default()).w;
    let n = projector.apply(&n);
    (n.norm_squared() > 0.0).then_some(n)
}

fn beam_only_gain(state: &DesignState, a: &CVector) -> f64 {
    state
        .beamformers()
        .column_iter()
        .map(|w| w.dotc(a).norm_sqr())
        .sum()
}

/// Unit null-space direction for raising the gain at target `j`, with the
/// gain `√E |aᴴu|` it reaches at full AN power.
fn sensing_direction(
    scenario: &Scenario,
    j: usize,
    budget: f64,
    needed: f64,
) -> Option<(CVector, f64)> {
    let projector = &scenario.projector;
    let a = scenario.target_steering(j);
    let pa = projector.apply(&a);
    let pa_norm = pa.norm();
    if pa_norm == 0.0 {
        return None;
    }
    let plain = (&pa / c(pa_norm, 0.0), budget.sqrt() * pa_norm);

    let edges: Vec<CVector> = scenario
        .targets
        .beamwidth_edges(j)
        .into_iter()
        .map(|t| projector.apply(&scenario.steering(t)))
        .collect();
    if edges.is_empty() {
        return Some(plain);
    }
    // Orthogonalize P⊥a against the edge responses (modified Gram-Schmidt).
    let mut basis: Vec<CVector> = Vec::new();
    for e in edges {
        let mut v = e;
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > 1e-9 * pa_norm {
            basis.push(v / c(n, 0.0));
        }
    }
    let mut u = pa.clone();
    for b in &basis {
        let proj = b.dotc(&u);
        u -= b * proj;
    }
    let un = u.norm();
    if un <= 1e-3 * pa_norm {
        return Some(plain);
    }
    let u = u / c(un, 0.0);
    let gain = budget.sqrt() * a.dotc(&u).norm();
    if gain >= needed {
        Some((u, gain))
    } else {
        Some(plain)
    }
}

/// AN with zero gain at every violated beamwidth edge and unchanged gain
/// toward every target, with the smallest step `λ` toward it that brings
/// every violated edge back to `η_j / 2`.
///
/// The correction lies in the span of the edge responses `P⊥a(θ_j ± θ_0)`
/// made orthogonal to the target responses `P⊥a(θ_j)`, so detection power
/// and eavesdropper noise are untouched; only the AN power changes. When the
/// edges cannot all be cleared that way the target is zero instead, and a
/// target above the budget is scaled onto it; both lower the target gains.
fn beamwidth_an_target(state: &DesignState, scenario: &Scenario) -> Option<(CVector, f64)> {
    let targets = &scenario.targets;
    let projector = &scenario.projector;
    let mut violated = Vec::new();
    let mut lambda: f64 = 0.0;
    for j in 0..targets.len() {
        let alpha = targets.path_gains[j].norm();
        let limit = targets.sensing_thresholds[j] / (2.0 * alpha);
        for edge in targets.beamwidth_edges(j) {
            let a = scenario.steering(edge);
            let an = state.an_gain(&a);
            let beams = state.beam_gain(&a) - an;
            if beams + an > limit * (1.0 + 1e-9) && an > 0.0 {
                // The AN edge gain scales by (1-λ)² along the step.
                let keep = ((limit - beams).max(0.0) / an).sqrt();
                lambda = lambda.max(1.0 - keep);
                violated.push(a);
            }
        }
    }
    if violated.is_empty() {
        return None;
    }

    let mut keep: Vec<CVector> = Vec::new();
    for j in 0..targets.len() {
        let mut v = projector.apply(&scenario.target_steering(j));
        let scale = v.norm();
        for b in &keep {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            keep.push(v / c(n, 0.0));
        }
    }
    let free: Vec<CVector> = violated
        .iter()
        .map(|a| {
            let mut v = projector.apply(a);
            for b in &keep {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
            v
        })
        .collect();

    let n_eff = state.effective_an();
    let m = violated.len();
    let system = CMatrix::from_fn(m, m, |e, f| violated[e].dotc(&free[f]));
    let rhs = CVector::from_fn(m, |e, _| violated[e].dotc(n_eff));
    let coef = system.svd(true, true).solve(&rhs, 1e-10).ok()?;
    let mut target = n_eff.clone();
    for (f, v) in free.iter().enumerate() {
        target -= v * coef[f];
    }
    // Too few free dimensions to clear every edge: shrink the AN radially.
    let scale = n_eff.norm_squared().max(f64::MIN_POSITIVE);
    if violated
        .iter()
        .any(|a| a.dotc(&target).norm_sqr() > 1e-12 * scale * a.norm_squared())
    {
        target.fill(c(0.0, 0.0));
    }
    // Scaling keeps the edges cleared and puts the whole step inside the budget.
    let power = target.norm_squared();
    let budget = scenario.an_power_budget();
    if power > budget {
        target *= c((budget / power).sqrt(), 0.0);
    }
    target
        .iter()
        .all(|x| x.is_finite())
        .then_some((target, lambda.clamp(0.0, 1.0)))
}

fn detection_residuals(state: &DesignState, scenario: &Scenario) -> Vec<f64> {
    let targets = &scenario.targets;
    (0..targets.len())
        .map(|j| {
            let a = scenario.target_steering(j);
            targets.sensing_thresholds[j] - targets.path_gains[j].norm() * state.beam_gain(&a)
        })
        .collect()
}

fn detection_violations(state: &DesignState, scenario: &Scenario) -> Vec<usize> {
    detection_residuals(state, scenario)
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(j, _)| j)
        .collect()
}

fn leakage_residuals(state: &DesignState, scenario: &Scenario) -> Vec<f64> {
    let targets = &scenario.targets;
    let mut out = Vec::with_capacity(state.num_users() * targets.len());
    for k in 0..state.num_users() {
        for j in 0..targets.len() {
            let a = scenario.target_steering(j);
            let g2 = targets.gain_sq(j);
            let leak = state.beamformers().column(k).dotc(&a).norm_sqr();
            let rho = g2 * leak / (g2 * state.an_gain(&a) + targets.eve_noise_variance);
            out.push((1.0 + rho).log2() - targets.secrecy_caps[j]);
        }
    }
    out
}

/// Floor returned for (near-)zero matrices so that `1/κ` stays finite.
pub const KAPPA_FLOOR: f64 = 1e-12;
/// Multiplicative margin over the power-iteration estimate.
pub const KAPPA_SAFETY: f64 = 1.01;

/// `tr(D)`, an upper bound on `λ_max` for PSD `D`.
pub fn trace_upper_bound(d: &CMatrix) -> f64 {
    d.diagonal().iter().map(|x| x.re).sum()
}

/// Power-iteration estimate of `λ_max(D)` for Hermitian PSD `D`.
pub fn power_iteration(d: &CMatrix, rel_tol: f64, max_iters: usize) -> f64 {
    let n = d.nrows();
    if n == 0 {
        return 0.0;
    }
    // Start from the heaviest column plus a generic perturbation.
    let heaviest = (0..n)
        .max_by(|&i, &j| d.column(i).norm().total_cmp(&d.column(j).norm()))
        .unwrap_or(0);
    let mut x: CVector = d.column(heaviest).into_owned()
        + CVector::from_fn(n, |i, _| C64::from_polar(1e-3, 0.7 * i as f64 + 0.3));
    let norm = x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    x /= c(norm, 0.0);
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let y = d * &x;
        let next = x.dotc(&y).re;
        let ynorm = y.norm();
        if ynorm == 0.0 {
            return 0.0;
        }
        x = y / c(ynorm, 0.0);
        let converged = (next - estimate).abs() <= rel_tol * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// `κ ≥ λ_max(D)`: power iteration to relative tolerance 1e-6 times
/// [`KAPPA_SAFETY`], capped by the trace bound, floored at [`KAPPA_FLOOR`].
pub fn spectral_upper_bound(d: &CMatrix) -> Result<f64> {
    spectral_upper_bound_with(d, KAPPA_SAFETY)
}

/// [`spectral_upper_bound`] with a caller-chosen margin `safety ≥ 1`.
pub fn spectral_upper_bound_with(d: &CMatrix, safety: f64) -> Result<f64> {
    ensure_hermitian(d, 1e-8)?;
    let trace = trace_upper_bound(d);
    if trace <= KAPPA_FLOOR {
        return Ok(KAPPA_FLOOR);
    }
    let estimate = safety * power_iteration(d, 1e-6, 10_000);
    Ok(estimate.min(trace).max(KAPPA_FLOOR))
}

/// Rayleigh quotient `xᴴDx / xᴴx`.
pub fn rayleigh_quotient(d: &CMatrix, x: &CVector) -> f64 {
    hermitian_form(x, d) / x.norm_squared()
}
