//! Periodic Kalman filtering and periodic Chandrasekhar-type recursions for
//! S-periodic linear state-space models.

pub mod bench;
pub mod chandrasekhar;
pub mod cli;
pub mod error;
pub mod filtering;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod random;

pub use error::{Error, Result};
pub use filtering::{filter_series, gaussian_loglik, Engine, FilterOptions, FilterOutput, Init};
pub use model::{ParModel, PeriodicModel};
