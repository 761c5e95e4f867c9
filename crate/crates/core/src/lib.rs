//! Periodic traveling waves of the Euler–Poisson system with Boltzmann
//! electrons, computed from the nonlocal equation G_c(f) + H⁻¹(f) = 0.
//!
//! All routines are generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod continuation;
pub mod elliptic;
pub mod error;
pub mod io;
pub mod linalg;
mod newton;
pub mod pressure;
pub mod scalar;
pub mod torus;
pub mod wave;

pub use error::{Error, Result};
pub use scalar::Real;

pub type TorusGrid64 = torus::TorusGrid<f64>;
pub type EvenField64 = torus::EvenField<f64>;
pub type PressureLaw64 = pressure::PressureLaw<f64>;
pub type WaveProblem64 = wave::WaveProblem<f64>;
pub type WaveState64 = wave::WaveState<f64>;
pub type ContinuationConfig64 = continuation::ContinuationConfig<f64>;
pub type Branch64 = continuation::Branch<f64>;
pub type Checkpoint64 = continuation::Checkpoint<f64>;
pub type LimitWave64 = continuation::LimitWave<f64>;
