//! Persistent random walks on the double-infinite comb, their scaling
//! limits, and Monte Carlo checks of the limit theorems.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comb;
pub mod config;
pub mod error;
pub mod lamperti;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scaling;
pub mod special;
pub mod stable;
pub mod stats;
pub mod verify;
pub mod walk;

pub use comb::{
    Comb, CombSpec, Direction, GraftSpec, HazardFamily, PersistenceLaw, TailRule, TailShape,
};
pub use error::{Error, Result};
pub use walk::{simulate_prw, RescaledPath, Run, Skeleton, Trajectory};
