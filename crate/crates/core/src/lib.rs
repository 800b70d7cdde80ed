//! Storage capacity of classical and continuous-variable quantum perceptrons.
//!
//! The crate is organized around five pieces:
//!
//! - [`specfun`]: standard-normal CDF, quantile, inverse Mills ratio and
//!   quadrature rules for the standard-normal measure.
//! - [`capacity`]: the analytic side. Critical capacities `alpha_c(kappa)`,
//!   the effective stability of the homodyne-readout perceptron, and the
//!   replica-symmetric free energy with its saddle-point overlap.
//! - [`percep`]: random pattern sets, stabilities, the maximal-stability
//!   solver, homodyne-sampled classification and finite-size capacity
//!   estimates.
//! - [`qsim`]: a Gaussian (means + covariance) simulator of the
//!   squeeze/controlled-addition circuit that realizes the quantum perceptron.
//! - [`volume`]: Monte Carlo estimates of the fraction of the weight sphere
//!   that stores a given pattern set.

pub mod capacity;
pub mod error;
pub mod percep;
pub mod qsim;
pub mod rng;
pub mod specfun;
pub mod volume;

pub use error::{Error, Result};
