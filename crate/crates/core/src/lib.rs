//! Simulation workbench for classical and quantum error correction.
//!
//! Everything is dense linear algebra on small Hilbert spaces. Qubit
//! registers are big-endian (qubit 1 is the most significant factor) and
//! oscillators use `hbar = 1` with `x = (a + a^dag)/sqrt 2`.

pub mod bosonic;
pub mod classical;
pub mod error;
pub mod gf2;
pub mod gkp;
pub mod json;
pub mod montecarlo;
pub mod quantum;
pub mod qubit_codes;
pub mod toric;
pub mod wigner;

pub use error::{Error, Result};
pub use quantum::{
    apply_channel, fidelity, measure_projector, tensor, unitary_rotation_from_basis_pairs, DensityMatrix,
    KrausChannel, Operator, StateVector, C64,
};
