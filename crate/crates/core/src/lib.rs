//! Physics-informed echo state network (PI-ESN) for reconstructing the
//! hidden states of a chaotic dynamical system from partial, possibly
//! noisy, measurements plus knowledge of the governing equations.
//!
//! The reservoir is driven by the measured states (teacher forcing); only
//! the linear readout is trained, against a loss that combines the
//! measurement error with the one-step forward-Euler mismatch of the
//! governing equations evaluated on the network's full-state output. The hidden
//! components are never present in the training data — they are pinned down
//! entirely by the physics term.
//!
//! Modules:
//! - [`dynamics`]: physics models, explicit Euler integration, residuals.
//! - [`data`]: dataset generation, SNR-calibrated noise, CSV persistence.
//! - [`reservoir`]: fixed random input/recurrent matrices, state collection.
//! - [`training`]: ridge init, combined loss, analytic gradient, Adam loop.
//! - [`harness`]: seeded sweeps, RMSE evaluation, report emission.

pub mod config;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod model_io;
pub mod reservoir;
pub mod seeds;
pub mod training;

pub use data::{add_noise, generate_dataset, load_dataset, save_dataset, Dataset};
pub use dynamics::{
    euler_integrate, lorenz_rhs, physics_residual, Lorenz, LorenzConstants, PhysicsModel,
};
pub use error::{Error, Result};
pub use harness::{model_by_name, rmse, run_experiment, CellResult, EvalReport, ExperimentSpec};
pub use model_io::{load_model, save_model, TrainedModel};
pub use reservoir::{spectral_radius, Reservoir, ReservoirConfig};
pub use training::{
    build_features, evaluate_loss, init_readout, loss_gradient, predict, ridge_init, train,
    LossReport, Readout, TrainConfig, TrainOutcome,
};
