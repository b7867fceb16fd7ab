//! Entanglement purification over bosonic pure-loss channels.
//!
//! The crate is split by concern:
//!
//! - [`combinatorics`]: exact multiset counting, code words, herald probabilities.
//! - [`rates`]: analytic rates (PLOB, single-shot, iterative, repeater chains).
//! - [`fock_sim`]: truncated Fock-space simulation of the protocol and its
//!   linear-optics implementation, used as a brute-force oracle.
//! - [`gaussian`]: covariance-matrix layer for CV swapping and key rates.
//! - [`verify`]: the self-check suite behind `purify verify`.

pub mod combinatorics;
pub mod error;
pub mod fock_sim;
pub mod gaussian;
pub mod rates;
pub mod verify;

pub use error::{Error, Result};
