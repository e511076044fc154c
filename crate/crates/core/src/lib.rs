//! Free-group relation census, displacement-function minimax and an empirical
//! hyperbolic displacement bound for two-generator Schottky groups.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexity;
pub mod dispfun;
pub mod error;
pub mod freegroup;
pub mod golden;
pub mod hyperbolic;
pub mod minimax;
pub mod relations;
pub mod rng;
pub mod symmetry;

pub use error::{Error, Result};
