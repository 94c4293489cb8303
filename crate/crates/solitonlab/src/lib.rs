//! Numerical laboratory for solitary-wave dynamics of generalized nonlinear
//! Schrödinger equations in slowly varying external potentials: spectral
//! evolution, soliton profiles and tangent frames, linearized-operator
//! certification, skew-orthogonal modulation tracking, and the effective
//! Newtonian point-particle comparison.

pub mod config;
pub mod effective;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod linops;
pub mod model;
pub mod modulation;
pub mod profile;
pub mod radial;
pub mod soliton;

pub use error::{Error, Result};
