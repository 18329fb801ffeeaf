//! Explicit solution operators for the 1-D Hermite heat equation
//! `∂ₜw = ∂ₓ²w − x²w` with boundary controls.
//!
//! The crate evaluates the Mehler kernel, the method-of-images input-to-state
//! maps on `(0, π)`, `(−L, L)` and the half-lines, the time reparameterization
//! that identifies the half-line map with the classical heat half-line map,
//! and a constructive control synthesis for holomorphic targets. A
//! Crank–Nicolson solver serves as an independent oracle and a small
//! expression language describes targets and controls.
//!
//! The crate is `no_std` and only needs `alloc`. Parallel drivers live in the
//! companion `hermite-reach` crate, which plugs in through [`Executor`].
#![cfg_attr(not(test), no_std)]
// `!(a > b)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bergman;
pub mod control;
mod error;
pub mod exec;
pub mod expr;
pub mod fd;
pub mod halfline;
pub mod hermite;
pub mod images;
pub mod math;
pub mod quad;
pub mod synth;

pub use control::{ControlSignal, Interpolation};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use expr::Expr;
pub use math::C64;
