//! Legitimacy tests for one- and two-mode Wigner distributions.
//!
//! A candidate phase-space function is turned into its normally ordered
//! quasi-density operator, whose Fock-basis matrix is then tested for positive
//! semidefiniteness. Negative directions are reported as certificates. The
//! crate also provides the KLM matrix conditions, an elliptical-symmetry fast
//! path and a partial-transpose entanglement test.

pub mod charfn;
pub mod cli;
pub mod coeffs;
pub mod entangle;
pub mod error;
pub mod fock;
pub mod grid;
pub mod klm;
pub mod model;
pub mod quad;
pub mod report;
pub mod special;
pub mod specfile;
pub mod symmetry;

pub use error::{Error, Result};
