//! Compact piecewise-linear surrogates of the AC power flow equations.
//!
//! The crate learns low-rank ReLU corrections of a physics-based power flow
//! Jacobian, encodes the trained network exactly as mixed-integer linear
//! constraints, embeds it in unit commitment models and audits the resulting
//! commitment schedules against the full AC equations.
//!
//! Everything here is pure computation over `alloc` collections; file formats,
//! wall-clock budgets and the command-line driver live in the `pwlgrid` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acopf;
pub mod case;
pub mod compress;
pub mod data;
pub mod encode;
pub mod error;
pub mod grid;
pub mod instance;
pub mod jacobian;
pub mod linalg;
pub mod lp;
pub mod math;
pub mod nn;
pub mod schedule;
pub mod uc;

pub use error::{Error, Result};

/// Source of elapsed wall-clock time for budgeted solvers.
///
/// The core crate has no clock of its own; callers with `std` pass one in.
pub trait Stopwatch {
    /// Seconds elapsed since the budget started.
    fn elapsed_secs(&self) -> f64;
}

/// A clock that never advances; budgets then reduce to iteration/node limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Stopwatch for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}
