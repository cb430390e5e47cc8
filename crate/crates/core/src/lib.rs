//! State estimation for a servo-hydraulic actuator driving a nonlinear
//! specimen.
//!
//! The crate simulates the actuator/specimen loop in controllable canonical
//! form, estimates its full state from noisy displacement (and force)
//! measurements with a linear Kalman filter or a bootstrap particle filter,
//! and scores the estimates by normalized RMS error.
//!
//! ```
//! use hydrapf::{chirp, Plant};
//!
//! let u = chirp(0.1, 20.0, 0.0234, 1.0, 1024.0).unwrap();
//! let traj = Plant::actual().simulate(&u, 1).unwrap();
//! assert_eq!(traj.states.len(), u.len());
//! ```

pub mod expm;
pub mod integrate;
pub mod kalman;
pub mod metrics;
pub mod model;
pub mod particle;
pub mod plants;
pub mod rng;
pub mod signals;

pub use integrate::{integrate_fixed, rk5_step, IntegrateError};
pub use kalman::{
    discretize_zoh, kf_run, servo_kalman_model, DiscreteLinearModel, KalmanError, KalmanEstimates,
    KalmanOptions,
};
pub use metrics::{ensemble_stats, interval_nrmse, nrmse, EnsembleStats, IntervalSpec, MetricsError};
pub use model::{
    canonical_coefficients, canonical_derivative, eval_h, eval_h_partials, specimen_force, ModelError,
    PlantState, SpecimenKind, SpecimenParams, TransferSystemParams,
};
pub use particle::{
    pf_run, LikelihoodSpec, ParticleEnsemble, PfConfig, PfError, PfEstimates, PriorSpec, ProcessNoiseSpec,
};
pub use plants::{
    simulate_actual, simulate_linear, simulate_nominal, synthesize_measurements, LinearModel, MeasurementSet,
    NoiseLevel, Plant, PlantError, PlantTrajectory,
};
pub use rng::RngStream;
pub use signals::{chirp, gaussian_noise, sinusoid, SignalError, TimeSeries};
