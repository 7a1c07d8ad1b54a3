//! Kac–Ornstein–Uhlenbeck processes: a mean-reverting process whose drift
//! coefficients switch with a two-state Markov chain.
//!
//! ```
//! use kacou::fpt::{laplace_fpt, FptQuery};
//! use kacou::{KacOuModel, State};
//!
//! let model = KacOuModel::from_params(0.8, 1.3, 0.0, 2.0, 0.0, 0.0, 1.0, 2.0)?;
//! let q = FptQuery::new(1.0, 0.2, 0.7, State::Zero)?;
//! let l = laplace_fpt(&q, &model)?;
//! assert!(l > 0.0 && l < 1.0);
//! # Ok::<(), kacou::KacError>(())
//! ```

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fpt;
pub mod invariant;
pub mod io;
pub mod model;
pub mod par;
pub mod quad;
pub mod rng;
pub mod scaling;
pub mod sim;
pub mod special;
pub mod stats;
pub mod validate;

pub use error::{KacError, Result};
pub use model::{
    classify_regime, hitting_time, hyper_args, pattern_phi, stationary_state_dist, transition_matrix, HittingTime,
    KacOuModel, Regime, State, StateCoeffs, SwitchRates,
};
pub use stats::McEstimate;
