//! Driven collective spins: exact Floquet spectra of the kicked top and the
//! ac-driven Lipkin-Meshkov-Glick model, effective Hamiltonians, quasienergy
//! landscapes, densities of quasienergy states and the magnetization protocol.
//!
//! All times are measured in units of the driving period, so every parameter
//! enters as a dimensionless product (`hT`, `K`, `GT`, `ΩT`) and every
//! quasienergy is reported as a phase `εT`.

extern crate openblas_src;

pub mod doqs;
pub mod effective;
pub mod error;
pub mod floquet;
pub mod io;
pub mod landscape;
pub mod linalg;
pub mod protocol;
pub mod spin;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
