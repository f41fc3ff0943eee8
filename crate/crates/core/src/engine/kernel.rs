// SPDX-License-Identifier: Apache-2.0

//! The packed tile kernel and its cycle model.
//!
//! The kernel is output-stationary: each 8-lane accumulator of the incoming
//! stream receives every product of the tile that lands on its columns before
//! it moves on. For output group `w` and A segment `i`, the eight B lanes are
//! the sliding window `b[w - i .. w - i + 8]`, zero outside the tile.

use alloc::vec::Vec;
use core::ops::AddAssign;

use super::tiling::TileSpec;
use super::EngineError;
use crate::limb::{AccVector, LimbError, LANES, SEGMENT_MASK};

/// Work counters of one or more kernel invocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KernelStats {
    /// Segment products swept, lane padding included: `S0 * S1` per tile.
    pub products: u64,
    /// 8-lane multiply-accumulate instructions issued.
    pub mac_instructions: u64,
}

impl AddAssign for KernelStats {
    fn add_assign(&mut self, rhs: Self) {
        self.products += rhs.products;
        self.mac_instructions += rhs.mac_instructions;
    }
}

fn check_segments(segs: &[u32]) -> Result<(), EngineError> {
    match segs.iter().position(|&s| s > SEGMENT_MASK) {
        Some(index) => Err(LimbError::LimbInvariant {
            index,
            value: segs[index],
        }
        .into()),
        None => Ok(()),
    }
}

fn check_stream(tile: &TileSpec, stream: &[AccVector]) -> Result<(), EngineError> {
    let cols = tile.product_columns();
    let start = stream.first().map(AccVector::base_weight);
    let contiguous = stream
        .windows(2)
        .all(|w| w[1].base_weight() == w[0].base_weight() + LANES);
    let covers = match start {
        Some(s) => s <= cols.start && s + stream.len() * LANES >= cols.end,
        None => cols.is_empty(),
    };
    if contiguous && covers {
        Ok(())
    } else {
        Err(EngineError::StreamMismatch {
            row: tile.row,
            col: tile.col,
        })
    }
}

/// Runs one tile over `stream`, adding its products in place.
///
/// `a_segs` holds the tile's `S0` A segments and `b_segs` its real B segments
/// (at most `S1`); B is zero-padded to `S1` internally. The stream must be a
/// contiguous run of accumulators covering [`TileSpec::product_columns`].
pub fn tile_kernel(
    tile: &TileSpec,
    a_segs: &[u32],
    b_segs: &[u32],
    stream: &mut [AccVector],
) -> Result<KernelStats, EngineError> {
    check_segments(a_segs)?;
    check_segments(b_segs)?;
    let mut scratch = Vec::new();
    run_tile(tile, a_segs, b_segs, stream, &mut scratch)
}

/// Kernel body; segments must already be known to fit in 31 bits.
pub(crate) fn run_tile(
    tile: &TileSpec,
    a_segs: &[u32],
    b_segs: &[u32],
    stream: &mut [AccVector],
    b_ext: &mut Vec<u32>,
) -> Result<KernelStats, EngineError> {
    if a_segs.len() != tile.s0() || b_segs.len() > tile.s1 || b_segs.len() != tile.b_range.len()
    {
        return Err(EngineError::SegmentCount {
            row: tile.row,
            col: tile.col,
        });
    }
    check_stream(tile, stream)?;

    let s1 = tile.s1;
    let a_lo = tile.a_range.start;
    let a_hi = tile.a_range.end;
    let b_lo = tile.b_range.start;
    // LANES zeros on both sides let every sliding window be a plain slice
    b_ext.clear();
    b_ext.resize(LANES, 0);
    b_ext.extend_from_slice(b_segs);
    b_ext.resize(LANES + s1 + LANES, 0);

    let mut stats = KernelStats::default();
    for acc in stream.iter_mut() {
        let w0 = acc.base_weight();
        let i_lo = a_lo.max((w0 + 1).saturating_sub(b_lo + s1));
        let i_hi = a_hi.min((w0 + LANES).saturating_sub(b_lo));
        for i in i_lo..i_hi {
            // B index of lane 0, shifted by LANES into b_ext
            let idx = w0 + LANES - i - b_lo;
            acc.mac_unchecked_inputs(a_segs[i - a_lo], &b_ext[idx..idx + LANES])?;
            let j0 = idx as isize - LANES as isize;
            let first = (-j0).max(0);
            let last = (s1 as isize - j0).min(LANES as isize);
            stats.products += (last - first) as u64;
            stats.mac_instructions += 1;
        }
    }
    Ok(stats)
}

/// Cycle model of the packed kernel.
///
/// One cycle per packed 8-lane MAC, plus `row_overhead` cycles for every
/// 8 columns of B (accumulator read, operand loads, accumulator write) and a
/// fixed `prologue` for pipeline fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCycleModel {
    pub row_overhead: f64,
    pub prologue: f64,
}

impl Default for KernelCycleModel {
    fn default() -> Self {
        Self {
            row_overhead: 8.0,
            prologue: 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCycles {
    /// `S0 * S1 / 8`: cycles with every slot doing useful MACs.
    pub ideal: f64,
    /// Ideal cycles plus modeled overhead.
    pub modeled: f64,
    /// `modeled` rounded up.
    pub cycles: u64,
    /// `ideal / modeled`, in (0, 1].
    pub eff: f64,
}

impl KernelCycleModel {
    pub fn evaluate(&self, s0: usize, s1: usize) -> KernelCycles {
        let lanes = LANES as f64;
        let ideal = (s0 * s1) as f64 / lanes;
        let modeled = ideal + self.row_overhead * s1 as f64 / lanes + self.prologue;
        KernelCycles {
            ideal,
            modeled,
            cycles: modeled.ceil() as u64,
            eff: ideal / modeled,
        }
    }
}

/// [`KernelCycleModel::evaluate`] with the default overheads.
pub fn kernel_cycle_count(s0: usize, s1: usize) -> KernelCycles {
    KernelCycleModel::default().evaluate(s0, s1)
}
