// SPDX-License-Identifier: Apache-2.0

pub mod ansatz;
pub mod config;
pub mod energy;
pub mod error;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod krylov;
pub mod optimize;
pub mod pipeline;
pub mod reduction;
pub mod spectral;
pub mod symmetry;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use grid::{pointwise, FractionalOrder, GridSpec, Pointwise, RealField, SpectralField};
pub use io::RunManifest;
pub use pipeline::Command;
pub use spectral::Spectral;
