//! Real- and imaginary-time propagator matrix elements of generalized
//! Hubbard models, estimated as expectations over Poisson jump processes and
//! checked against exact diagonalization.
//!
//! ```
//! use hubbard_poisson::{estimate_element, FockConfiguration, LatticeModel, LinkTable, Sampling, TimeMode};
//!
//! let model = LatticeModel::chain(2, 1.0, 0.0).unwrap();
//! let table = LinkTable::new(&model, &model.default_rates()).unwrap();
//! let n: FockConfiguration = "10/00".parse().unwrap();
//! let r = estimate_element(&table, &n, &n, 1.0, TimeMode::RealTime, &Sampling::new(20_000, 1)).unwrap();
//! assert!((r.mean.re - 1f64.cos()).abs() < 5.0 * r.stderr_real);
//! ```

pub mod config;
pub mod estimator;
pub mod fock;
pub mod model;
pub mod oracle;
pub mod report;
pub mod trajectory;

pub use config::{ConfigError, ModelConfig};
pub use estimator::{
    combine_batches, element_batches, estimate_element, estimate_row, run_trajectory,
    run_trajectory_traced, BatchAccumulator, EstimatorError, EstimatorResult, Moments, Notice,
    RowAccumulator, Sampling, TimeMode, TraceRecord, TrajectoryWeight,
};
pub use fock::{FockConfiguration, FockError, Sector};
pub use model::{HoppingEntry, InteractionEntry, LatticeModel, Link, LinkSet, ModelError, RateTable, Spin};
pub use oracle::{
    brute_force_hamiltonian_check, brute_force_operator_check, build_hamiltonian,
    exact_propagator, ode_residual, DenseHermitian, OracleError, SectorBasis, Spectrum,
};
pub use report::{ComplexValue, ElementLabel, ElementRecord, ElementRow};
pub use trajectory::{stream_rng, ActiveLinkState, JumpEvent, LinkId, LinkTable, TrajectoryError};

pub use num_complex::Complex64;
