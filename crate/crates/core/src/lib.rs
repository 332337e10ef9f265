//! Optimal excitation and measurement allocation for identifying modules of
//! linear dynamic networks.
//!
//! The crate builds network models ([`netmodel`]), enumerates candidate
//! excitation/measurement patterns ([`emp`]), evaluates their asymptotic
//! information ([`infoengine`]) and checks the results against closed forms
//! ([`closedform`]) and simulation ([`simoracle`]). Randomized studies live
//! in [`montecarlo`] and the tabulated reference results in [`reproduce`].

pub mod closedform;
pub mod emp;
pub mod error;
pub mod infoengine;
pub mod linalg;
pub mod montecarlo;
pub mod netmodel;
pub mod reproduce;
pub mod simoracle;

pub use emp::Emp;
pub use error::{Error, Result};
pub use infoengine::{information_matrix, rank_emps, Evaluator, InfoResult, SignalConfig};
pub use netmodel::{EdgeId, NetworkModel};
