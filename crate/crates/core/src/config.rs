//! JSON scenario configuration.
//!
//! Powers are given in dBm and noise levels in dBm; everything is converted
//! to linear milliwatts on load. Thresholds in dB are converted to linear
//! ratios. Sensing thresholds are linear (mW-scaled beam power). Every
//! section and field is optional; omitted values take the defaults of the
//! reference scenario (8 antennas, 2 users, 1 target, 20 dBm).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::scenario::{
    generate_channels, ArrayGeometry, PowerBudget, Scenario, TargetSet, UserSet,
};
use crate::solver::SolverOptions;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A scalar broadcast to every entry, or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn resolve(&self, len: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Self::One(x) => Ok(vec![*x; len]),
            Self::Many(v) if v.len() == len => Ok(v.clone()),
            Self::Many(v) if v.len() == 1 => Ok(vec![v[0]; len]),
            Self::Many(v) => Err(Error::config(format!(
                "{name} has {} entries, expected {len}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_antennas: usize,
    pub spacing_over_wavelength: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            num_antennas: 8,
            spacing_over_wavelength: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersConfig {
    pub count: usize,
    pub noise_dbm: OneOrMany,
    pub sinr_threshold_db: OneOrMany,
    /// Per-user power in dBm. When absent, `power.user_power_fraction` of
    /// the total power is split evenly.
    pub per_user_power_dbm: Option<OneOrMany>,
    pub weights: Option<OneOrMany>,
}

impl Default for UsersConfig {
    fn default() -> Self {
        Self {
            count: 2,
            noise_dbm: OneOrMany::One(0.0),
            sinr_threshold_db: OneOrMany::One(20.0),
            per_user_power_dbm: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsConfig {
    pub count: usize,
    /// Fixed angles; when absent they are drawn uniformly from `angle_range_deg`.
    pub angles_deg: Option<Vec<f64>>,
    pub angle_range_deg: [f64; 2],
    /// `[re, im]` per target; defaults to unit gains.
    pub path_gains: Option<Vec<[f64; 2]>>,
    /// Defaults to the first user's noise level.
    pub noise_dbm: Option<f64>,
    pub sensing_threshold: OneOrMany,
    /// Eavesdropper rate cap in bit/s/Hz.
    pub secrecy_cap: OneOrMany,
    pub beamwidth_halfangle_deg: f64,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        Self {
            count: 1,
            angles_deg: None,
            angle_range_deg: [-60.0, 60.0],
            path_gains: None,
            noise_dbm: None,
            sensing_threshold: OneOrMany::One(2.0),
            secrecy_cap: OneOrMany::One(0.1),
            beamwidth_halfangle_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub total_dbm: f64,
    pub bs_rx_noise_dbm: f64,
    /// Share of the total power split across users when per-user powers are
    /// not given; the rest is the artificial-noise budget.
    pub user_power_fraction: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            total_dbm: 20.0,
            bs_rx_noise_dbm: 0.0,
            user_power_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    pub enabled: bool,
    /// Angular half-width per target in degrees.
    pub delta_deg: OneOrMany,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            delta_deg: OneOrMany::One(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Total power in dBm with unit noise, i.e. the transmit SNR in dB.
    Snr,
    NumUsers,
    NumTargets,
    NumAntennas,
    DeltaTheta,
    Theta0,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::NumUsers => "num_users",
            Self::NumTargets => "num_targets",
            Self::NumAntennas => "num_antennas",
            Self::DeltaTheta => "delta_theta",
            Self::Theta0 => "theta0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::NumTargets,
            values: vec![1.0, 2.0],
            trials: 20,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("sweep.trials must be at least 1"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values must be finite"));
        }
        let integral = matches!(
            self.axis,
            SweepAxis::NumUsers | SweepAxis::NumTargets | SweepAxis::NumAntennas
        );
        if integral && self.values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::config(format!(
                "sweep axis {} takes nonnegative integers",
                self.axis.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub users: UsersConfig,
    pub targets: TargetsConfig,
    pub power: PowerConfig,
    pub solver: SolverOptions,
    pub robust: RobustConfig,
    pub sweep: SweepConfig,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Solver options with the run seed and the robust switch applied.
    pub fn solver_options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            seed,
            robust: self.robust.enabled,
            ..self.solver.clone()
        }
    }

    /// Builds a concrete instance. Channels and random target angles come
    /// from independent streams of `seed`, so adding a target keeps the
    /// angles of the existing ones.
    pub fn instantiate(&self, seed: u64) -> Result<Scenario> {
        self.solver.validate()?;
        let k = self.users.count;
        let j = self.targets.count;
        let nt = self.array.num_antennas;
        if k == 0 {
            return Err(Error::config("users.count must be at least 1"));
        }
        if k >= nt {
            return Err(Error::config(format!(
                "users.count ({k}) must be below array.num_antennas ({nt})"
            )));
        }
        let geometry = ArrayGeometry::new(nt, self.array.spacing_over_wavelength)?;

        let total = dbm_to_mw(self.power.total_dbm);
        let per_user_power = match &self.users.per_user_power_dbm {
            Some(p) => p
                .resolve(k, "users.per_user_power_dbm")?
                .into_iter()
                .map(dbm_to_mw)
                .collect(),
            None => {
                let f = self.power.user_power_fraction;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(
                        "power.user_power_fraction must lie in (0, 1]",
                    ));
                }
                vec![f * total / k as f64; k]
            }
        };
        let noise: Vec<f64> = self
            .users
            .noise_dbm
            .resolve(k, "users.noise_dbm")?
            .into_iter()
            .map(dbm_to_mw)
            .collect();
        let thresholds = self
            .users
            .sinr_threshold_db
            .resolve(k, "users.sinr_threshold_db")?
            .into_iter()
            .map(db_to_linear)
            .collect();
        let weights = match &self.users.weights {
            Some(w) => w.resolve(k, "users.weights")?,
            None => vec![1.0; k],
        };
        let channels = generate_channels(seed, k, nt)?;
        let users = UserSet::new(channels, noise.clone(), thresholds, per_user_power, weights)?;

        let angles = match &self.targets.angles_deg {
            Some(a) if a.len() == j => a.clone(),
            Some(a) => {
                return Err(Error::config(format!(
                    "targets.angles_deg has {} entries, expected {j}",
                    a.len()
                )))
            }
            None => {
                let [lo, hi] = self.targets.angle_range_deg;
                if !(lo <= hi && lo >= -90.0 && hi <= 90.0) {
                    return Err(Error::config(
                        "targets.angle_range_deg must be within [-90, 90]",
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                (0..j).map(|_| rng.random_range(lo..=hi)).collect()
            }
        };
        let path_gains: Vec<C64> = match &self.targets.path_gains {
            Some(g) if g.len() == j => g.iter().map(|&[re, im]| c(re, im)).collect(),
            Some(g) => {
                return Err(Error::config(format!(
                    "targets.path_gains has {} entries, expected {j}",
                    g.len()
                )))
            }
            None => vec![c(1.0, 0.0); j],
        };
        let uncertainty = if self.robust.enabled {
            self.robust.delta_deg.resolve(j, "robust.delta_deg")?
        } else {
            vec![0.0; j]
        };
        let targets = TargetSet {
            angles_deg: angles,
            path_gains,
            eve_noise_variance: self.targets.noise_dbm.map(dbm_to_mw).unwrap_or(noise[0]),
            sensing_thresholds: self
                .targets
                .sensing_threshold
                .resolve(j, "targets.sensing_threshold")?,
            secrecy_caps: self.targets.secrecy_cap.resolve(j, "targets.secrecy_cap")?,
            beamwidth_halfangle_deg: self.targets.beamwidth_halfangle_deg,
            angle_uncertainty_deg: uncertainty,
        };
        let power = PowerBudget {
            total_power: total,
            bs_rx_noise_variance: dbm_to_mw(self.power.bs_rx_noise_dbm),
        };
        Scenario::new(geometry, users, targets, power)
    }
}
