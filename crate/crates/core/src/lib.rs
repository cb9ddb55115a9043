//! Hot Brownian motion of optically levitated nanodiamonds.
//!
//! Forward model: [`twobath`] gives the centre-of-mass temperature of a particle
//! whose surface re-emits gas hotter than the surroundings, and [`simulate`]
//! turns it into detector traces and NV spin-resonance spectra. Inverse model:
//! [`spectral`] fits trace PSDs, [`thermometry`] reads internal temperatures
//! from ESR spectra, and [`pipeline`] calibrates, extracts the coupling
//! constant K and runs whole campaigns.

pub mod domain;
pub mod error;
pub mod fit;
pub mod io;
pub mod pipeline;
pub mod simulate;
pub mod spectral;
pub mod thermometry;
pub mod twobath;

pub use error::{Error, Result};
