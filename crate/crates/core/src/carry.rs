// SPDX-License-Identifier: Apache-2.0

//! Carry resolution for column sums.
//!
//! Two routes produce the same normalized limbs:
//!
//! * [`propagate_full`] ripples carries column by column. It is the reference.
//! * [`stage1_local_carry`] cuts the shifted column bit stream into 128-bit
//!   windows and reduces each window on its own, emitting a payload and a small
//!   carry count. [`stage2_merge`] then settles inter-window carries four
//!   windows (512 bits) at a time.
//!
//! Columns are summed products of unsigned segments, so they must be
//! non-negative.

use alloc::vec;
use alloc::vec::Vec;

use crate::limb::{LimbVector, WeightedAcc, ACC_BITS, SEGMENT_BITS, SEGMENT_MASK};

/// Width of one stage-1 window.
pub const CHUNK_BITS: u32 = 128;
/// Windows settled together in one stage-2 group (512 bits).
pub const GROUP_CHUNKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CarryError {
    #[error("column {column} is negative")]
    NegativeColumn { column: usize },
    #[error("carried value does not fit in {limbs} limbs")]
    Truncated { limbs: usize },
}

/// One 128-bit window after local carry reduction.
///
/// The window's final bits are `payload + carry_in` (mod 2^128), where
/// `carry_in` comes from the lower neighbour; `carry_out` counts the 2^128
/// overflows produced locally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CarryChunk {
    pub payload: u128,
    pub carry_out: u128,
}

/// Normalized limb count produced from `columns` column sums.
///
/// An 80-bit column at weight `2^(31 c)` reaches bit `31 c + 80`, so two limbs
/// past the last column always suffice.
pub const fn output_limbs(columns: usize) -> usize {
    columns + 2
}

/// Number of 128-bit windows touched by `columns` column sums.
pub const fn window_count(columns: usize) -> usize {
    if columns == 0 {
        return 0;
    }
    let top_bit = (columns - 1) * SEGMENT_BITS as usize + ACC_BITS as usize;
    top_bit.div_ceil(CHUNK_BITS as usize)
}

fn check_non_negative(columns: &[i128]) -> Result<(), CarryError> {
    match columns.iter().position(|&v| v < 0) {
        Some(column) => Err(CarryError::NegativeColumn { column }),
        None => Ok(()),
    }
}

/// Sequential ripple carry; the reference normalization.
pub fn propagate_full(w: &WeightedAcc) -> Result<LimbVector, CarryError> {
    let columns = w.columns();
    check_non_negative(columns)?;
    let mut limbs = Vec::with_capacity(output_limbs(columns.len()));
    let mut carry: u128 = 0;
    for &v in columns {
        let t = v as u128 + carry;
        limbs.push((t as u32) & SEGMENT_MASK);
        carry = t >> SEGMENT_BITS;
    }
    while limbs.len() < output_limbs(columns.len()) {
        limbs.push((carry as u32) & SEGMENT_MASK);
        carry >>= SEGMENT_BITS;
    }
    debug_assert_eq!(carry, 0);
    Ok(LimbVector::from_limbs(limbs).expect("masked limbs"))
}

/// Reduces window `index` of the column bit stream without looking at any
/// other window's result.
pub fn stage1_window(columns: &[i128], index: usize) -> Result<CarryChunk, CarryError> {
    let lo = index * CHUNK_BITS as usize;
    let hi = lo + CHUNK_BITS as usize;
    let seg = SEGMENT_BITS as usize;
    // columns whose bits [31k, 31k + 80) meet [lo, hi)
    let first = (lo + 1).saturating_sub(ACC_BITS as usize).div_ceil(seg);
    let last = hi.div_ceil(seg).min(columns.len());
    let mut payload: u128 = 0;
    let mut carry_out: u128 = 0;
    for (k, &v) in columns.iter().enumerate().take(last).skip(first) {
        if v < 0 {
            return Err(CarryError::NegativeColumn { column: k });
        }
        let at = k * seg;
        let piece = if at >= lo {
            (v as u128) << (at - lo)
        } else {
            (v as u128) >> (lo - at)
        };
        let (sum, wrapped) = payload.overflowing_add(piece);
        payload = sum;
        carry_out += u128::from(wrapped);
    }
    Ok(CarryChunk { payload, carry_out })
}

/// Stage 1 over every window. Windows are independent of each other.
pub fn stage1_local_carry(w: &WeightedAcc) -> Result<Vec<CarryChunk>, CarryError> {
    let mut out = Vec::new();
    stage1_into(w.columns(), &mut out)?;
    Ok(out)
}

pub(crate) fn stage1_into(columns: &[i128], out: &mut Vec<CarryChunk>) -> Result<(), CarryError> {
    out.clear();
    for index in 0..window_count(columns.len()) {
        out.push(stage1_window(columns, index)?);
    }
    Ok(())
}

/// Settles one 512-bit group given the carry entering its lowest window.
///
/// Returns the carry entering the next group.
pub fn merge_group(group: &[CarryChunk], carry_in: u128, out: &mut Vec<u128>) -> u128 {
    debug_assert!(group.len() <= GROUP_CHUNKS);
    let mut carry = carry_in;
    for chunk in group {
        let (word, wrapped) = chunk.payload.overflowing_add(carry);
        out.push(word);
        carry = chunk.carry_out + u128::from(wrapped);
    }
    carry
}

/// Stage 2: resolves inter-window carries group by group and emits exactly
/// `limb_count` normalized limbs.
pub fn stage2_merge(chunks: &[CarryChunk], limb_count: usize) -> Result<LimbVector, CarryError> {
    let mut words = Vec::new();
    let mut limbs = Vec::new();
    stage2_into(chunks, limb_count, &mut words, &mut limbs)?;
    Ok(LimbVector::from_limbs(limbs).expect("masked limbs"))
}

pub(crate) fn stage2_into(
    chunks: &[CarryChunk],
    limb_count: usize,
    words: &mut Vec<u128>,
    limbs: &mut Vec<u32>,
) -> Result<(), CarryError> {
    words.clear();
    let mut carry = 0;
    for group in chunks.chunks(GROUP_CHUNKS) {
        carry = merge_group(group, carry, words);
    }
    if carry != 0 {
        words.push(carry);
    }
    slice_words(words, limb_count, limbs)
}

/// Cuts 128-bit little-endian words into `count` 31-bit limbs; every bit past
/// the last limb must be zero.
fn slice_words(words: &[u128], count: usize, limbs: &mut Vec<u32>) -> Result<(), CarryError> {
    limbs.clear();
    limbs.resize(count, 0);
    let seg = SEGMENT_BITS as usize;
    let total = count * seg;
    for (i, &word) in words.iter().enumerate() {
        if word == 0 {
            continue;
        }
        let base = i * CHUNK_BITS as usize;
        let top = base + (CHUNK_BITS - word.leading_zeros()) as usize;
        if top > total {
            return Err(CarryError::Truncated { limbs: count });
        }
        let mut bit = 0usize;
        while bit < CHUNK_BITS as usize {
            let abs = base + bit;
            if abs >= total {
                break;
            }
            let (limb, off) = (abs / seg, abs % seg);
            let take = (seg - off).min(CHUNK_BITS as usize - bit);
            let part = ((word >> bit) as u32) & ((1u32 << take) - 1);
            limbs[limb] |= part << off;
            bit += take;
        }
    }
    Ok(())
}

/// `stage2_merge ∘ stage1_local_carry` at the normalized length.
pub fn carry_two_stage(w: &WeightedAcc) -> Result<LimbVector, CarryError> {
    let chunks = stage1_local_carry(w)?;
    stage2_merge(&chunks, output_limbs(w.len()))
}

/// Zero chunks for `columns` column sums; handy for building test inputs.
pub fn zero_chunks(columns: usize) -> Vec<CarryChunk> {
    vec![CarryChunk::default(); window_count(columns)]
}
