// SPDX-License-Identifier: Apache-2.0

//! 31-bit limb decomposition and the 8-lane, 80-bit accumulator arithmetic.
//!
//! Operands are sliced into 31-bit segments held in 32-bit containers with the
//! top bit cleared, so a segment can be fed to a signed 32-bit vector multiplier.
//! A product of two segments is at most `(2^31 - 1)^2 < 2^62`; an 80-bit signed
//! accumulator therefore absorbs `2^17` such products with one bit to spare.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

/// Width of one segment in bits.
pub const SEGMENT_BITS: u32 = 31;
/// Mask selecting the low [`SEGMENT_BITS`] of a word.
pub const SEGMENT_MASK: u32 = (1 << SEGMENT_BITS) - 1;
/// Lanes in one accumulator vector.
pub const LANES: usize = 8;
/// Width of one accumulator lane, sign bit included.
pub const ACC_BITS: u32 = 80;
/// Largest value an accumulator lane may hold.
pub const ACC_MAX: i128 = (1i128 << (ACC_BITS - 1)) - 1;
/// Smallest value an accumulator lane may hold.
pub const ACC_MIN: i128 = -(1i128 << (ACC_BITS - 1));
/// Number of maximal segment products one lane is guaranteed to absorb.
pub const SAFE_PRODUCTS_PER_LANE: u64 = 1 << 17;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LimbError {
    #[error("malformed hex integer: {0:?}")]
    Parse(String),
    #[error("value needs {needed} bits but the declared width is {bitwidth}")]
    Range { needed: u64, bitwidth: u32 },
    #[error("limb {index} holds {value:#x}, which does not fit in 31 bits")]
    LimbInvariant { index: usize, value: u32 },
    #[error("cannot pad {current} limbs down to {target}")]
    PadTarget { current: usize, target: usize },
    #[error("80-bit accumulator overflow at column {column}")]
    AccumulatorOverflow { column: usize },
    #[error("column {column} out of range for a {len}-column accumulator")]
    ColumnRange { column: usize, len: usize },
}

/// Number of 31-bit limbs needed to hold `bitwidth` bits.
pub const fn limb_count(bitwidth: u32) -> usize {
    bitwidth.div_ceil(SEGMENT_BITS) as usize
}

/// Parses a big-endian hex integer with an optional `0x`/`0X` prefix.
///
/// Underscores and surrounding whitespace are rejected rather than skipped;
/// operand files are expected to be machine-written.
pub fn parse_hex(text: &str) -> Result<BigUint, LimbError> {
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(LimbError::Parse(text.into()));
    }
    BigUint::parse_bytes(digits.as_bytes(), 16).ok_or_else(|| LimbError::Parse(text.into()))
}

/// Canonical hex rendering: `0x` followed by lowercase digits, no leading zeros.
pub fn to_hex(value: &BigUint) -> String {
    let mut out = String::from("0x");
    out.push_str(&value.to_str_radix(16));
    out
}

/// An unsigned integer stored as little-endian 31-bit limbs.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LimbVector {
    limbs: Vec<u32>,
    bitwidth: u32,
}

impl LimbVector {
    /// Slices `value` into `ceil(bitwidth / 31)` limbs.
    pub fn decompose(value: &BigUint, bitwidth: u32) -> Result<Self, LimbError> {
        let needed = value.bits();
        if needed > u64::from(bitwidth) {
            return Err(LimbError::Range { needed, bitwidth });
        }
        let words = value.to_u32_digits();
        let word = |i: usize| u64::from(words.get(i).copied().unwrap_or(0));
        let limbs = (0..limb_count(bitwidth))
            .map(|i| {
                let bit = i * SEGMENT_BITS as usize;
                let (w, off) = (bit / 32, bit % 32);
                let window = word(w) | (word(w + 1) << 32);
                ((window >> off) as u32) & SEGMENT_MASK
            })
            .collect();
        Ok(Self { limbs, bitwidth })
    }

    pub fn decompose_hex(text: &str, bitwidth: u32) -> Result<Self, LimbError> {
        Self::decompose(&parse_hex(text)?, bitwidth)
    }

    /// Wraps raw limbs, checking every limb fits in 31 bits.
    ///
    /// The declared width is the full limb capacity, `31 * limbs.len()`.
    pub fn from_limbs(limbs: Vec<u32>) -> Result<Self, LimbError> {
        check_limbs(&limbs)?;
        let bitwidth = SEGMENT_BITS * limbs.len() as u32;
        Ok(Self { limbs, bitwidth })
    }

    pub fn zero(bitwidth: u32) -> Self {
        Self {
            limbs: vec![0; limb_count(bitwidth)],
            bitwidth,
        }
    }

    pub fn limbs(&self) -> &[u32] {
        &self.limbs
    }

    pub fn len(&self) -> usize {
        self.limbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.limbs.is_empty()
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn to_biguint(&self) -> BigUint {
        pack_limbs(&self.limbs)
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.to_biguint())
    }

    /// Zero-extends at the high end to exactly `target` limbs.
    pub fn pad(&self, target: usize) -> Result<Self, LimbError> {
        let mut out = self.clone();
        out.pad_in_place(target)?;
        Ok(out)
    }

    pub fn pad_in_place(&mut self, target: usize) -> Result<(), LimbError> {
        if target < self.limbs.len() {
            return Err(LimbError::PadTarget {
                current: self.limbs.len(),
                target,
            });
        }
        self.limbs.resize(target, 0);
        Ok(())
    }

    pub fn into_limbs(self) -> Vec<u32> {
        self.limbs
    }
}

impl fmt::Debug for LimbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimbVector")
            .field("bitwidth", &self.bitwidth)
            .field("limbs", &self.limbs)
            .finish()
    }
}

fn check_limbs(limbs: &[u32]) -> Result<(), LimbError> {
    match limbs.iter().position(|&l| l > SEGMENT_MASK) {
        Some(index) => Err(LimbError::LimbInvariant {
            index,
            value: limbs[index],
        }),
        None => Ok(()),
    }
}

fn pack_limbs(limbs: &[u32]) -> BigUint {
    let mut words = Vec::with_capacity(limbs.len());
    let mut buf: u64 = 0;
    let mut held = 0u32;
    for &limb in limbs {
        buf |= u64::from(limb) << held;
        held += SEGMENT_BITS;
        if held >= 32 {
            words.push(buf as u32);
            buf >>= 32;
            held -= 32;
        }
    }
    if held > 0 {
        words.push(buf as u32);
    }
    BigUint::new(words)
}

/// Recomposes `Σ limbs[i] · 2^(31 i)`, rejecting limbs of 2^31 or more.
pub fn recompose(limbs: &[u32]) -> Result<BigUint, LimbError> {
    check_limbs(limbs)?;
    Ok(pack_limbs(limbs))
}

/// Hex form of [`recompose`].
pub fn recompose_hex(limbs: &[u32]) -> Result<String, LimbError> {
    recompose(limbs).map(|v| to_hex(&v))
}

fn lane_in_range(v: i128) -> bool {
    (ACC_MIN..=ACC_MAX).contains(&v)
}

/// Eight 80-bit signed accumulator lanes covering consecutive column weights.
///
/// Lane `k` sums products of weight `2^(31 (base_weight + k))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccVector {
    lanes: [i128; LANES],
    base_weight: usize,
}

impl AccVector {
    pub const fn zeroed(base_weight: usize) -> Self {
        Self {
            lanes: [0; LANES],
            base_weight,
        }
    }

    pub fn from_lanes(lanes: [i128; LANES], base_weight: usize) -> Result<Self, LimbError> {
        match lanes.iter().position(|&v| !lane_in_range(v)) {
            Some(k) => Err(LimbError::AccumulatorOverflow {
                column: base_weight + k,
            }),
            None => Ok(Self { lanes, base_weight }),
        }
    }

    pub fn lanes(&self) -> &[i128; LANES] {
        &self.lanes
    }

    pub fn base_weight(&self) -> usize {
        self.base_weight
    }

    /// `lane[k] += a · b[k]` for all eight lanes.
    ///
    /// Either every lane is updated or, on overflow, none is.
    pub fn mac(&mut self, a: u32, b: &[u32; LANES]) -> Result<(), LimbError> {
        if a > SEGMENT_MASK {
            return Err(LimbError::LimbInvariant { index: 0, value: a });
        }
        if let Some(k) = b.iter().position(|&x| x > SEGMENT_MASK) {
            return Err(LimbError::LimbInvariant { index: k, value: b[k] });
        }
        let mut next = self.lanes;
        for (k, lane) in next.iter_mut().enumerate() {
            *lane += i128::from(u64::from(a) * u64::from(b[k]));
            if *lane > ACC_MAX {
                return Err(LimbError::AccumulatorOverflow {
                    column: self.base_weight + k,
                });
            }
        }
        self.lanes = next;
        Ok(())
    }

    /// MAC on pre-validated segments; used by the tile kernel's inner loop.
    #[inline]
    pub(crate) fn mac_unchecked_inputs(&mut self, a: u32, b: &[u32]) -> Result<(), LimbError> {
        debug_assert!(a <= SEGMENT_MASK && b.len() == LANES);
        let a = u64::from(a);
        let mut over = false;
        let mut next = self.lanes;
        for (lane, &bk) in next.iter_mut().zip(b) {
            *lane += i128::from(a * u64::from(bk));
            over |= *lane > ACC_MAX;
        }
        if over {
            let k = next.iter().position(|&v| v > ACC_MAX).unwrap_or(0);
            return Err(LimbError::AccumulatorOverflow {
                column: self.base_weight + k,
            });
        }
        self.lanes = next;
        Ok(())
    }
}

/// Value-style form of [`AccVector::mac`].
pub fn acc_mac(mut acc: AccVector, a: u32, b: &[u32; LANES]) -> Result<AccVector, LimbError> {
    acc.mac(a, b)?;
    Ok(acc)
}

/// Column sums at 31-bit weight pitch: column `c` has weight `2^(31 c)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedAcc {
    columns: Vec<i128>,
}

impl WeightedAcc {
    pub fn new(len: usize) -> Self {
        Self {
            columns: vec![0; len],
        }
    }

    pub fn from_columns(columns: Vec<i128>) -> Result<Self, LimbError> {
        match columns.iter().position(|&v| !lane_in_range(v)) {
            Some(column) => Err(LimbError::AccumulatorOverflow { column }),
            None => Ok(Self { columns }),
        }
    }

    pub fn columns(&self) -> &[i128] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Adds `value` to column `column`, keeping it inside the 80-bit range.
    pub fn add(&mut self, column: usize, value: i128) -> Result<(), LimbError> {
        let len = self.columns.len();
        let slot = self
            .columns
            .get_mut(column)
            .ok_or(LimbError::ColumnRange { column, len })?;
        let sum = *slot + value;
        if !lane_in_range(sum) {
            return Err(LimbError::AccumulatorOverflow { column });
        }
        *slot = sum;
        Ok(())
    }

    /// Adds every lane of an accumulator stream at its own weight.
    ///
    /// Lanes landing past the last column must be zero.
    pub fn absorb(&mut self, stream: &[AccVector]) -> Result<(), LimbError> {
        for acc in stream {
            for (k, &v) in acc.lanes.iter().enumerate() {
                let column = acc.base_weight + k;
                if column >= self.columns.len() {
                    if v != 0 {
                        return Err(LimbError::ColumnRange {
                            column,
                            len: self.columns.len(),
                        });
                    }
                    continue;
                }
                self.add(column, v)?;
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(Zero::is_zero)
    }
}
