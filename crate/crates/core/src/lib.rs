//! Klein-Gordon-Zakharov system in two space dimensions: a pseudo-spectral
//! integrator on a periodic box, free-wave propagators, decay and Sobolev
//! diagnostics, the normal-form transform for the density, the modified
//! scattering toolkit for the electric field and the special functions
//! that the asymptotic analysis leans on.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod io;
pub mod jet;
pub mod propagators;
pub mod scattering;
pub mod spectral;
pub mod special;
pub mod transform;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
