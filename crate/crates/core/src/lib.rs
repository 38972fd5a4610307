//! Kowalevski gyrostat in two constant fields: dynamics, first integrals,
//! canonical form of the force parameters, critical sets of the momentum map,
//! Lax pair and spectral curve, and iso-energetic bifurcation diagrams.

mod dop853_tableau;

pub mod bifurcation;
pub mod canonical;
pub mod cli;
pub mod critical;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod lax;
pub mod ode;
pub mod phase;
pub mod poly;
pub mod scalar;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use phase::{
    complexify, integrals, integrals_complex, realify, ComplexState, IntegralTriple, Params, PhaseState, ZCoords,
};
pub use scalar::{Complex64, Dual, Scalar};
