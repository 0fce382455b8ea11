//! Key-rate simulation for BB84, B92, BBM92 and dual-rail-encoded BB84 over
//! amplitude-damping and generalized amplitude-damping channels.
//!
//! Every closed-form error rate in [`protocols`] and [`dualrail`] has a
//! first-principles density-matrix counterpart built on [`qmat`] and
//! [`noise`]; the two are checked against each other in the test suites.

pub mod dualrail;
pub mod error;
pub mod montecarlo;
pub mod noise;
pub mod protocols;
pub mod qmat;

pub use error::{Error, Result};
