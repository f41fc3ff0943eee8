// SPDX-License-Identifier: Apache-2.0

//! Uniform rectangular tiling of the partial-product grid.
//!
//! Operand A is cut into `p_intra0` row blocks of `s0` limbs and operand B into
//! `p_intra1` column blocks of `ceil(l1 / p_intra1)` limbs. Inside a tile the B
//! block is zero-padded up to `s1`, the next multiple of the SIMD width.
//! Tile `(r, c)` computes `A[r] x B[c]`. Tiles on the same anti-diagonal
//! `r + c = d` feed overlapping output columns and are chained through the
//! cascade stream in ascending `r` order.

use alloc::vec::Vec;
use core::ops::Range;

use super::EngineError;
use crate::limb::{AccVector, LANES};

/// Round `n` up to a multiple of the SIMD width.
pub const fn pad_to_lanes(n: usize) -> usize {
    n.div_ceil(LANES) * LANES
}

/// One tile of the partial-product grid.
///
/// `a_range` and `b_range` index real (end-padded) operand limbs; `s1` is the
/// lane-padded width of the B buffer the kernel sweeps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileSpec {
    pub row: usize,
    pub col: usize,
    pub a_range: Range<usize>,
    pub b_range: Range<usize>,
    pub s1: usize,
}

impl TileSpec {
    pub fn s0(&self) -> usize {
        self.a_range.len()
    }

    pub fn s1(&self) -> usize {
        self.s1
    }

    /// Columns the kernel sweeps, `[a_lo + b_lo, a_hi + b_lo + s1 - 1)`.
    pub fn product_columns(&self) -> Range<usize> {
        let lo = self.a_range.start + self.b_range.start;
        let hi = self.a_range.end + self.b_range.start + self.s1 - 1;
        lo..hi
    }

    /// Lane-aligned window that holds every product column of this tile.
    pub fn own_window(&self) -> Range<usize> {
        let cols = self.product_columns();
        cols.start..cols.start + pad_to_lanes(cols.len())
    }
}

/// One cascade chain: tiles in hand-off order plus the accumulator window the
/// chain streams through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub tiles: Vec<usize>,
    pub window: Range<usize>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// A zeroed accumulator stream covering this chain's window.
    pub fn fresh_stream(&self) -> Vec<AccVector> {
        fresh_stream(&self.window)
    }
}

pub fn fresh_stream(window: &Range<usize>) -> Vec<AccVector> {
    window.clone().step_by(LANES).map(AccVector::zeroed).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub l0: usize,
    pub l1: usize,
    /// A limbs per tile.
    pub s0: usize,
    /// Real B limbs per tile, before lane padding.
    pub b_block: usize,
    /// Lane-padded B width per tile.
    pub s1: usize,
    pub p_intra0: usize,
    pub p_intra1: usize,
    pub tiles: Vec<TileSpec>,
    pub chains: Vec<Chain>,
}

impl TileGrid {
    pub fn padded_l0(&self) -> usize {
        self.s0 * self.p_intra0
    }

    pub fn padded_l1(&self) -> usize {
        self.b_block * self.p_intra1
    }

    /// Column count of the merged result.
    pub fn output_columns(&self) -> usize {
        self.padded_l0() + self.padded_l1()
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn tile(&self, row: usize, col: usize) -> &TileSpec {
        &self.tiles[row * self.p_intra1 + col]
    }

    /// Segment products computed per multiplication: `S0 * S1` per tile.
    pub fn planned_products(&self) -> u64 {
        (self.s0 * self.s1 * self.tiles.len()) as u64
    }

    /// Chain lengths in chain order; the input to placement.
    pub fn chain_lengths(&self) -> Vec<usize> {
        self.chains.iter().map(Chain::len).collect()
    }
}

/// Plans a `p_intra0 x p_intra1` tiling for operands of `l0` and `l1` limbs.
pub fn plan_tiles(
    l0: usize,
    l1: usize,
    p_intra0: usize,
    p_intra1: usize,
) -> Result<TileGrid, EngineError> {
    if l0 == 0 || l1 == 0 {
        return Err(EngineError::EmptyOperand);
    }
    if p_intra0 == 0 || p_intra1 == 0 || p_intra0 > l0 || p_intra1 > l1 {
        return Err(EngineError::OverPartition {
            limbs: (l0, l1),
            parts: (p_intra0, p_intra1),
        });
    }
    let s0 = l0.div_ceil(p_intra0);
    let b_block = l1.div_ceil(p_intra1);
    let s1 = pad_to_lanes(b_block);
    let mut tiles = Vec::with_capacity(p_intra0 * p_intra1);
    for row in 0..p_intra0 {
        for col in 0..p_intra1 {
            tiles.push(TileSpec {
                row,
                col,
                a_range: row * s0..(row + 1) * s0,
                b_range: col * b_block..(col + 1) * b_block,
                s1,
            });
        }
    }
    let chains = (0..p_intra0 + p_intra1 - 1)
        .map(|d| {
            let rows = d.saturating_sub(p_intra1 - 1)..=d.min(p_intra0 - 1);
            let members: Vec<usize> = rows.map(|r| r * p_intra1 + (d - r)).collect();
            let lo = members
                .iter()
                .map(|&t| tiles[t].product_columns().start)
                .min()
                .unwrap_or(0);
            let hi = members
                .iter()
                .map(|&t| tiles[t].product_columns().end)
                .max()
                .unwrap_or(0);
            Chain {
                tiles: members,
                window: lo..lo + pad_to_lanes(hi - lo),
            }
        })
        .collect();
    Ok(TileGrid {
        l0,
        l1,
        s0,
        b_block,
        s1,
        p_intra0,
        p_intra1,
        tiles,
        chains,
    })
}
