// SPDX-License-Identifier: Apache-2.0

//! File formats, multi-threaded drivers and run reports around `aim-core`.

pub mod formats;
pub mod parallel;
pub mod pgm;
pub mod report;

pub use aim_core as core;
