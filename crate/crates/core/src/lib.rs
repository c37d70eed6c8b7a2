//! Spatial birth–death dynamics with competition and dispersal: the
//! mesoscopic Vlasov equation, the truncated correlation hierarchy and an
//! exact individual-based simulator with its empirical estimators.

pub mod config_space;
pub mod error;
pub mod estimators;
pub mod field;
pub mod hierarchy;
pub mod ibm;
pub mod kernel;
pub mod params;
pub mod vlasov;

pub use config_space::{
    ConfigSpace, CorrelationFunction, GridConfiguration, QuasiObservable,
};
pub use error::{Error, Result};
pub use estimators::{
    empirical_density, epsilon_sweep, l2_error, pair_correlation, BinnedDensity,
    PairCorrelationEstimate, SweepRow, SweepSettings,
};
pub use field::Field;
pub use hierarchy::{HierarchyOps, OperatorId, Truncation};
pub use ibm::{run_ensemble, run_trajectory, EnsembleResult, ParticleState, SimEvent, Snapshot};
pub use kernel::{DiscreteKernel, Kernel, KernelFamily};
pub use params::{validate_params, ModelParams, ValidationReport};
pub use vlasov::{picard_solve, rk4_solve, PicardSettings, Trajectory, VlasovSystem};
