//! Driven-dissipative cavity/transmon simulator: mean-field branches, Lindblad
//! steady states and sweeps, diffusive quantum trajectories, Husimi Q
//! functions and the analytic Fokker–Planck first moment.

pub mod error;
pub mod cli;
pub mod fpe;
pub mod hilbert;
pub mod meanfield;
pub mod master;
pub mod models;
pub mod phasespace;
pub mod trajectory;

pub use error::{Error, Result};
