//! Secrecy energy efficiency (SEE) maximization for uplink networks aided
//! by a reconfigurable intelligent surface (RIS) with a passive
//! eavesdropper.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] draws network geometries and Rician-faded channels.
//! * [`model`] evaluates SINRs, the RIS power model, secrecy rate, SEE and
//!   the MMSE receive filters.
//! * [`fracprog`] is a generic Dinkelbach engine with a projected-gradient
//!   inner solver and the projections it needs.
//! * [`ris_opt`] and [`power_opt`] are the sequential (SCA) subproblem
//!   solvers for the RIS coefficients and the transmit powers.
//! * [`orchestrator`] alternates between them, and also hosts the baselines
//!   and a brute-force grid oracle for tiny instances.
//! * [`expcli`] is the Monte-Carlo sweep harness behind the `ris-see` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod expcli;
pub mod fracprog;
pub mod model;
pub mod orchestrator;
pub mod power_opt;
pub(crate) mod quadform;
pub mod ris_opt;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;
