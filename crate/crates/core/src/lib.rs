//! Random beamforming with a single-antenna RIS transmitter.
//!
//! The crate simulates multiuser random beamforming where a passive surface
//! next to one active antenna forms `L` orthonormal beams with random phases,
//! users report their best SINR, and the transmitter schedules the strongest
//! user per beam. On top of the simulator sit closed-form SINR statistics,
//! the asymptotic sum rate, the threshold feedback strategy, and an
//! alternating optimizer that picks the surface size and transmit power that
//! maximize energy efficiency.
//!
//! Module map:
//!
//! * [`sysconfig`]: power constants, system parameters, power and EE arithmetic.
//! * [`channel`]: seeds, user placement, path loss, Rayleigh channel draws.
//! * [`beamsim`]: random unitary beams, SINR tables, schedulers, Monte Carlo.
//! * [`analytic`]: SINR CDF, selected-user density, rate integrals, `EE` model.
//! * [`optimizer`]: the two 1-D subproblem solvers and the alternating loop.
//! * [`experiments`]: figure recipes and CSV output used by the `darb` binary.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod beamsim;
pub mod channel;
mod error;
pub mod experiments;
pub mod linalg;
pub mod optimizer;
pub mod quadrature;
pub mod stats;
pub mod sysconfig;

pub use error::{Error, Result};
