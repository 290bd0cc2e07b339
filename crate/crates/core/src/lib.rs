//! Model-based photoacoustic tomography in two dimensions.
//!
//! Time-domain and frequency-domain model matrices, Tikhonov-regularized
//! reconstruction, universal back-projection, and tools for measuring how
//! reconstructions degrade when detector positions are uncertain.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod forward_fd;
pub mod forward_td;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod operator;
pub mod recon;
pub mod seed;
pub mod uncertainty;

pub use error::{PatError, Result};
pub use forward_fd::{FdModel, FrequencyGrid, SpectralData};
pub use forward_td::{Sinogram, TdModel, TofWindow};
pub use geometry::{shepp_logan, AcousticConfig, GridSpec, ImageGrid, PerturbMode, SensorArray};
pub use recon::{backproject, tikhonov_solve, ForwardModel, Measurement, Method, ReconResult, SolverSettings};
