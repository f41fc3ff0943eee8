// SPDX-License-Identifier: Apache-2.0

//! Fixed-point Mandelbrot divergence testing on the multiplication engine.
//!
//! Coordinates are signed fixed-point numbers with a chosen number of
//! fractional bits and [`INT_BITS`] integer bits. Products are formed on the
//! magnitudes by the engine and truncated toward zero.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Signed, Zero};

use crate::engine::{ArrayConfig, Engine, EngineError, Scratch};

/// Integer bits available to every fixed-point value: magnitudes stay below 16.
pub const INT_BITS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixedError {
    #[error("malformed decimal number: {0:?}")]
    Parse(alloc::string::String),
    #[error("precision mismatch: {0} vs {1} fractional bits")]
    Precision(u32, u32),
    #[error("engine multiplies {bits}-bit operands but {need} bits are needed")]
    EngineWidth { bits: u32, need: u32 },
    #[error("viewport must have positive size and scale")]
    ViewPort,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `raw / 2^frac_bits`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    raw: BigInt,
    frac_bits: u32,
}

impl fmt::Debug for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedPoint({} / 2^{})", self.raw, self.frac_bits)
    }
}

impl FixedPoint {
    pub fn from_raw(raw: BigInt, frac_bits: u32) -> Self {
        Self { raw, frac_bits }
    }

    pub fn zero(frac_bits: u32) -> Self {
        Self::from_raw(BigInt::zero(), frac_bits)
    }

    pub fn from_int(v: i64, frac_bits: u32) -> Self {
        Self::from_raw(BigInt::from(v) << frac_bits, frac_bits)
    }

    pub fn raw(&self) -> &BigInt {
        &self.raw
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Nearest-below `f64` view; exact while the value fits a double.
    pub fn to_f64(&self) -> f64 {
        let (sign, mag) = self.raw.clone().into_parts();
        let bits = mag.bits();
        let shift = bits.saturating_sub(60);
        let top = mag >> shift;
        let top = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
        let exp = shift as i32 - self.frac_bits as i32;
        let v = top * pow2(exp);
        if sign == Sign::Minus {
            -v
        } else {
            v
        }
    }

    /// Same value at another precision, truncating toward zero.
    pub fn rescale(&self, frac_bits: u32) -> Self {
        let raw = if frac_bits >= self.frac_bits {
            &self.raw << (frac_bits - self.frac_bits)
        } else {
            shr_toward_zero(&self.raw, self.frac_bits - frac_bits)
        };
        Self::from_raw(raw, frac_bits)
    }

    /// `|self| < 2^INT_BITS`.
    pub fn in_range(&self) -> bool {
        self.raw.magnitude().bits() <= u64::from(self.frac_bits + INT_BITS)
    }

    fn check(&self, other: &Self) -> Result<(), FixedError> {
        if self.frac_bits == other.frac_bits {
            Ok(())
        } else {
            Err(FixedError::Precision(self.frac_bits, other.frac_bits))
        }
    }
}

fn pow2(e: i32) -> f64 {
    let mut v = 1.0;
    if e >= 0 {
        for _ in 0..e {
            v *= 2.0;
        }
    } else {
        for _ in 0..-e {
            v *= 0.5;
        }
    }
    v
}

fn shr_toward_zero(v: &BigInt, n: u32) -> BigInt {
    let mag = v.magnitude() >> n;
    BigInt::from_biguint(v.sign(), mag)
}

/// Parses `[+-]digits[.digits][e[+-]digits]` into a fixed-point value,
/// truncating toward zero.
pub fn fp_from_decimal(text: &str, frac_bits: u32) -> Result<FixedPoint, FixedError> {
    let err = || FixedError::Parse(text.into());
    let t = text.trim();
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = body[i + 1..].parse().map_err(|_| err())?;
            (&body[..i], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int_part.len() + frac_part.len() == 0 || !all_digits(int_part) || !all_digits(frac_part) {
        return Err(err());
    }
    let mut digits = alloc::string::String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    let d = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(err)?;
    let scale = exp - frac_part.len() as i64;
    if scale.unsigned_abs() > 100_000 {
        return Err(err());
    }
    let ten = BigUint::from(10u32);
    let shifted = d << frac_bits;
    let mag = if scale >= 0 {
        shifted * num_traits::pow(ten, scale as usize)
    } else {
        shifted / num_traits::pow(ten, (-scale) as usize)
    };
    let sign = if neg { Sign::Minus } else { Sign::Plus };
    Ok(FixedPoint::from_raw(BigInt::from_biguint(sign, mag), frac_bits))
}

/// Engine plus scratch buffers for fixed-point products at one precision.
#[derive(Debug)]
pub struct FixedMul<'e> {
    engine: &'e Engine,
    scratch: Scratch,
    frac_bits: u32,
}

impl<'e> FixedMul<'e> {
    pub fn new(engine: &'e Engine, frac_bits: u32) -> Result<Self, FixedError> {
        let need = frac_bits + INT_BITS;
        if engine.config().bits != need {
            return Err(FixedError::EngineWidth {
                bits: engine.config().bits,
                need,
            });
        }
        Ok(Self {
            engine,
            scratch: Scratch::new(),
            frac_bits,
        })
    }

    /// `a * b` truncated toward zero; both operands must be in range.
    pub fn mul(&mut self, a: &FixedPoint, b: &FixedPoint) -> Result<FixedPoint, FixedError> {
        a.check(b)?;
        let p = self
            .engine
            .multiply_with(a.raw.magnitude(), b.raw.magnitude(), &mut self.scratch)?;
        let mag = p >> self.frac_bits;
        let sign = if a.raw.sign() == b.raw.sign() || mag.is_zero() {
            Sign::Plus
        } else {
            Sign::Minus
        };
        Ok(FixedPoint::from_raw(BigInt::from_biguint(sign, mag), self.frac_bits))
    }
}

/// Engine sized for products at `frac_bits` of precision.
pub fn engine_for(frac_bits: u32) -> Result<Engine, FixedError> {
    Ok(Engine::new(ArrayConfig::single(frac_bits + INT_BITS))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivergenceOutcome {
    /// Escape iteration, or `max_iter` for points that stayed bounded.
    pub count: u32,
    /// Iterations that performed their three products.
    pub iterations_run: u32,
}

/// Iterates `z <- z^2 + c` from `z = c`.
///
/// Every iteration forms `re^2`, `im^2` and `re * im`, then escapes if
/// `re^2 + im^2 > 4`. An update leaving the integer-bit budget also counts as
/// escaping, one iteration later.
pub fn divergence_test(
    c_re: &FixedPoint,
    c_im: &FixedPoint,
    max_iter: u32,
    fm: &mut FixedMul<'_>,
) -> Result<DivergenceOutcome, FixedError> {
    c_re.check(c_im)?;
    if !(c_re.in_range() && c_im.in_range()) {
        return Ok(DivergenceOutcome {
            count: 0,
            iterations_run: 0,
        });
    }
    let four = BigInt::from(4) << c_re.frac_bits;
    let mut re = c_re.clone();
    let mut im = c_im.clone();
    for i in 0..max_iter {
        let rr = fm.mul(&re, &re)?;
        let ii = fm.mul(&im, &im)?;
        let ri = fm.mul(&re, &im)?;
        if &rr.raw + &ii.raw > four {
            return Ok(DivergenceOutcome {
                count: i,
                iterations_run: i + 1,
            });
        }
        re.raw = rr.raw - ii.raw + &c_re.raw;
        im.raw = (ri.raw << 1u32) + &c_im.raw;
        if !(re.in_range() && im.in_range()) {
            return Ok(DivergenceOutcome {
                count: i + 1,
                iterations_run: i + 1,
            });
        }
    }
    Ok(DivergenceOutcome {
        count: max_iter,
        iterations_run: max_iter,
    })
}

/// A view of the complex plane: `scale` is the half-width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewPort {
    pub center_re: FixedPoint,
    pub center_im: FixedPoint,
    pub scale: FixedPoint,
    pub width: usize,
    pub height: usize,
}

impl ViewPort {
    pub fn validate(&self) -> Result<(), FixedError> {
        if self.width == 0 || self.height == 0 || !self.scale.raw.is_positive() {
            return Err(FixedError::ViewPort);
        }
        Ok(())
    }

    /// Pixel-center coordinate at `frac_bits`, row 0 at the top. Pixels are
    /// square; the vertical extent follows from the aspect ratio.
    pub fn pixel(&self, x: usize, y: usize, frac_bits: u32) -> (FixedPoint, FixedPoint) {
        let w = BigInt::from(self.width as u64);
        let scale = self.scale.rescale(frac_bits).raw;
        let off = |k: usize, n: usize| -> BigInt {
            let num = &scale * (BigInt::from(2 * k as u64 + 1) - BigInt::from(n as u64));
            num / &w
        };
        let re = self.center_re.rescale(frac_bits).raw + off(x, self.width);
        let im = self.center_im.rescale(frac_bits).raw - off(y, self.height);
        (
            FixedPoint::from_raw(re, frac_bits),
            FixedPoint::from_raw(im, frac_bits),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationMap {
    pub width: usize,
    pub height: usize,
    pub max_iter: u32,
    /// Row-major, top row first.
    pub counts: Vec<u32>,
}

impl IterationMap {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    /// 8-bit gray per pixel, `floor(255 * count / max_iter)`.
    pub fn gray(&self) -> Vec<u8> {
        self.counts
            .iter()
            .map(|&c| (255 * u64::from(c) / u64::from(self.max_iter.max(1))) as u8)
            .collect()
    }

    pub fn differing_pixels(&self, other: &Self) -> usize {
        self.counts
            .iter()
            .zip(&other.counts)
            .filter(|(a, b)| a != b)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderStats {
    pub multiplications: u64,
    pub iterations: u64,
    /// Logical time until the last test slot went idle, one unit per iteration.
    pub makespan: u64,
}

/// Renders with `scheduler_width` logical test slots fed from one work
/// queue: each slot takes the next pixel as soon as it finishes its current
/// one. The map does not depend on the width; the makespan does.
pub fn render(
    vp: &ViewPort,
    frac_bits: u32,
    max_iter: u32,
    scheduler_width: usize,
) -> Result<(IterationMap, RenderStats), FixedError> {
    vp.validate()?;
    let engine = engine_for(frac_bits)?;
    let mut fm = FixedMul::new(&engine, frac_bits)?;
    let n = vp.width * vp.height;
    let mut counts = vec![0u32; n];
    let mut slots: BinaryHeap<Reverse<(u64, usize)>> =
        (0..scheduler_width.max(1)).map(|s| Reverse((0, s))).collect();
    let mut iterations = 0u64;
    let mut makespan = 0u64;
    for (idx, count) in counts.iter_mut().enumerate() {
        let Reverse((free, slot)) = slots.pop().expect("at least one slot");
        let (re, im) = vp.pixel(idx % vp.width, idx / vp.width, frac_bits);
        let out = divergence_test(&re, &im, max_iter, &mut fm)?;
        *count = out.count;
        let run = u64::from(out.iterations_run);
        iterations += run;
        let done = free + run.max(1);
        makespan = makespan.max(done);
        slots.push(Reverse((done, slot)));
    }
    let map = IterationMap {
        width: vp.width,
        height: vp.height,
        max_iter,
        counts,
    };
    let stats = RenderStats {
        multiplications: engine.stats().multiplications,
        iterations,
        makespan,
    };
    Ok((map, stats))
}
