// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
mod codec;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod levelset;
pub mod metrics;
pub mod policy;
pub mod render;
pub mod sampling;
pub mod world;

pub use error::{Error, Result};
