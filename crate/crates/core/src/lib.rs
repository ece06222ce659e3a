//! Two-copy beam-splitter estimation of characteristic functions of
//! continuous-variable states, with sample-size planners, restricted
//! single-copy baselines and a truncated Fock-space oracle.

// NaN must fail these guards, so `!(a > b)` is intended
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod error;
pub mod fock_oracle;
pub mod phase_space;
pub mod protocols;
pub mod baselines;
pub mod stats;
pub mod sampling;
pub mod special;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use states::{PhasePoint, ReflectionSymmetry, StateModel, StateSpec};
