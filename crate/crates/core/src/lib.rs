//! Simulator for the attractive Bose-Hubbard model on a ring of Kerr-nonlinear
//! resonators.
//!
//! The crate covers truncated Fock bases, sparse Hamiltonians, exact
//! diagonalization within number sectors, Lindblad and closed-system time
//! integration, and the seven-step adiabatic protocol that spreads a single-site
//! input state into a W-type entangled state over the whole ring.
//!
//! Units: all frequencies are angular (rad/s) and all times are seconds. The
//! [`config`] module converts the MHz / ns / μs values used in run files.

pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod operators;
pub mod output;
pub mod protocol;
pub mod spectra;
pub mod state;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub use basis::{LatticeBasis, LatticeSpec};
pub use error::{Error, Result};
pub use operators::{Boundary, Controls, HamiltonianParams, SparseOperator};
pub use state::{InputState, QuantumState};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Angular frequency in rad/s for an ordinary frequency given in MHz.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f * 1e6
}
