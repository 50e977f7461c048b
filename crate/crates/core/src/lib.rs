//! Exact construction and verification of real numbers that are simply normal
//! to a prescribed set of integer bases and not simply normal to the others.
//!
//! The crate is organised bottom-up:
//!
//! * [`residue`] builds integer sets with prescribed residue-class counts and
//!   the subset-sum oracles behind them.
//! * [`block`] holds digit blocks, chunk parsing, simple discrepancy and block
//!   equivalence.
//! * [`alphabet`] builds the restricted digit alphabets used per phase.
//! * [`certified`] and [`radix`] provide rigorous logarithm ceilings, exact
//!   adic rationals and digit extraction in arbitrary bases.
//! * [`expsum`] evaluates exponential sums and LeVeque's discrepancy bound.
//! * [`profile`] and [`engine`] run the stage recursion.
//! * [`analyzer`] re-verifies logs and measures digit statistics.

pub mod alphabet;
pub mod analyzer;
pub mod block;
pub mod certified;
pub mod engine;
pub mod error;
pub mod expsum;
pub mod profile;
pub mod radix;
pub mod ratio;
pub mod residue;

pub use error::{Error, Result};
