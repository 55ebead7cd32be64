//! Relational ("timeless") dynamics toolkit.
//!
//! * [`quantum_pw`]: finite cyclic clocks, history states, conditional
//!   dynamics and partial traces.
//! * [`classical_liouville`]: Hamiltonian fields, symplectic flow, density
//!   transport and correlated system–clock densities.
//! * [`extended_hj`]: the extended phase space `H + p₀` and Hamilton–Jacobi
//!   time correlation between mirrored subsystems.
//! * [`generalized_constraints`]: states annihilated by total conserved
//!   generators other than energy.

pub mod classical_liouville;
pub mod error;
pub mod extended_hj;
pub mod generalized_constraints;
pub mod linalg;
pub mod quadrature;
pub mod quantum_pw;
pub mod ring;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
