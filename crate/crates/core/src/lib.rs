//! Construction and verification of function families in involution on
//! Poisson manifolds.
//!
//! Families are pulled back through Poisson maps (multiplications, actions,
//! realizations, leaf embeddings) and extended by the Casimirs of each factor.
//! Every structural claim (Jacobi identity, Casimir property, Poisson-map
//! property, involution, functional independence) is checked numerically at
//! seeded sample points, and the resulting Hamiltonian flows can be integrated
//! with conservation monitoring.

pub mod catalog;
pub mod construct;
pub mod dynamics;
pub mod expr;
pub mod poisson;
pub mod report;
pub mod sample;
pub mod tolerance;
