//! Fair maximal covering location.
//!
//! Place `p` facilities with coverage radius `R` so that the vector of demand
//! covered by each facility maximises an ordered-weighted / alpha-fair
//! welfare operator. The crate provides the geometric primitives, the
//! operator itself, exact solvers for discrete and planar continuous sites,
//! portable model export, fairness metrics and an experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod fairness;
pub mod geometry;
pub mod instance;
pub mod metrics;
pub mod model;
pub mod par;
pub mod solver;

pub use error::{FmclpError, Result};
pub use fairness::{fair_owa, owa_family, AlphaParam, ExtReal, FairnessSpec, OwaFamily, OwaWeights};
pub use geometry::{NormSpec, Point};
pub use instance::Instance;
pub use par::Exec;
