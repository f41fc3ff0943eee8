// SPDX-License-Identifier: Apache-2.0

//! Limb-level arbitrary-precision multiplication modeled on a 2D vector
//! processor array, with its performance model, placement algorithm and two
//! applications (Montgomery RSA and fixed-point Mandelbrot).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod carry;
pub mod engine;
pub mod limb;
pub mod mandelbrot;
pub mod perf;
pub mod placement;
pub mod rsa;

pub use engine::{schoolbook_mul, ArrayConfig, Engine, EngineError, EngineStats, Scratch};
pub use limb::{LimbError, LimbVector, WeightedAcc};
