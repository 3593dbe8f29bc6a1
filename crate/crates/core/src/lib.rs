//! Simulation of two driven bosonic modes coupled by a cross-Kerr
//! interaction: displaced-frame dynamics, photon blockade, conditional cat
//! states and geometric Kerr gates, with closed-form cross-checks.

pub mod analytic;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod ode;
pub mod scenario;

pub use error::{Error, Result};
pub use linalg::C64;
