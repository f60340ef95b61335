//! Restless multi-arm bandits with systematically noisy arms, where arms
//! learn whom to copy Q-parameters from.

pub mod analysis;
pub mod comm;
pub mod commq;
pub mod envs;
pub mod planner;
pub mod error;
pub mod harness;
pub mod qfunc;
pub mod rmab;
pub mod rng;

pub use error::{Error, Result};
