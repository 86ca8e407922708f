//! Joint beamforming and artificial-noise design for secure multi-user
//! integrated sensing and communication (ISAC).
//!
//! A multi-antenna base station serves `K` single-antenna users while
//! illuminating `J` radar targets that may also eavesdrop. The solver
//! maximizes a weighted sum rate under per-eavesdropper leakage caps using
//! a Lagrangian dual transform combined with a non-homogeneous quadratic
//! transform, so that every update is closed form followed by a projection.
//! Artificial noise is confined to the null space of the user channels, which
//! lets it jam eavesdroppers and boost radar returns without touching the
//! legitimate links.
//!
//! Module map:
//!
//! * [`scenario`]: array geometry, users, targets, seeded channel draws.
//! * [`config`]: JSON configuration with dBm/dB unit conversion.
//! * [`metrics`]: SINR, eavesdropper SNR, secrecy rates, radar power,
//!   constraint residuals.
//! * [`projections`]: null-space projector, feasible-set projections,
//!   sensing repair, spectral bounds.
//! * [`solver`]: the alternating two-subproblem ascent and weight adaptation.
//! * [`robust`]: worst-case eavesdropper SNR under angular uncertainty and
//!   the LMI leakage bound.
//! * [`oracle`]: slow, independent verifiers (random search, finite
//!   differences, dense angle grids).
//! * [`experiment`]: seeded Monte Carlo sweeps and CSV/JSON emission.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod projections;
pub mod robust;
pub mod scenario;
pub mod solver;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use metrics::{ConstraintResiduals, DesignState, MetricsReport};
pub use projections::NullSpaceProjector;
pub use scenario::{ArrayGeometry, PowerBudget, Scenario, TargetSet, UserSet};
pub use solver::{SolverOptions, SolverReport};
