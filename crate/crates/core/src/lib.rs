//! Partial-wave laboratory for explicit wave-operator formulas of
//! three-dimensional Schrödinger operators `H = -Δ + V` with central `V`.
//!
//! Every operator acts on one angular-momentum channel at a time. In the
//! spectral representation of `H0 = -Δ` the channel Hilbert space is
//! `L²(R+, dλ)`, sampled on a geometric [`grids::LogEnergyGrid`]; radial
//! functions live on a [`grids::RadialGrid`].

pub mod bessel;
pub mod cli_io;
pub mod dilation;
pub mod error;
pub mod grids;
pub mod levinson;
pub mod linalg;
pub mod lippmann_schwinger;
pub mod potentials;
pub mod radial_oracle;
pub mod spectral;
pub mod wave_operators;

pub use error::{LabError, Result};
