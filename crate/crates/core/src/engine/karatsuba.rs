// SPDX-License-Identifier: Apache-2.0

//! Karatsuba multiplication on 64-bit words, kept apart from the tiled engine
//! so the two can check each other.
//!
//! Each level splits both operands at `h` words and forms three half-size
//! products: `lo*lo`, `hi*hi` and `(lo+hi)(lo+hi)`. Recursion stops at single
//! words, multiplied natively in 128 bits.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::limb::{self, LimbError};

/// Adds `src` into `dst` starting at word `at`, propagating the carry.
fn add_at(dst: &mut [u64], src: &[u64], at: usize) {
    let mut carry = false;
    let mut i = 0;
    while i < src.len() || carry {
        let (s, c1) = dst[at + i].overflowing_add(src.get(i).copied().unwrap_or(0));
        let (s, c2) = s.overflowing_add(u64::from(carry));
        dst[at + i] = s;
        carry = c1 || c2;
        i += 1;
    }
}

/// `dst -= src`; the caller guarantees `dst >= src`.
fn sub_in_place(dst: &mut [u64], src: &[u64]) {
    let mut borrow = false;
    for (i, slot) in dst.iter_mut().enumerate() {
        let (d, b1) = slot.overflowing_sub(src.get(i).copied().unwrap_or(0));
        let (d, b2) = d.overflowing_sub(u64::from(borrow));
        *slot = d;
        borrow = b1 || b2;
    }
    debug_assert!(!borrow);
}

/// `lo + hi` over `m` words plus the carry out of the top word.
fn half_sum(lo: &[u64], hi: &[u64], m: usize) -> (Vec<u64>, bool) {
    let mut s = vec![0u64; m + 1];
    s[..lo.len()].copy_from_slice(lo);
    add_at(&mut s, hi, 0);
    let top = s.pop() == Some(1);
    (s, top)
}

/// Product of two `n`-word operands, `2n` words.
fn kmul(a: &[u64], b: &[u64]) -> Vec<u64> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    if n == 1 {
        let p = u128::from(a[0]) * u128::from(b[0]);
        return vec![p as u64, (p >> 64) as u64];
    }
    let h = n / 2;
    let m = n - h;
    let (a_lo, a_hi) = a.split_at(h);
    let (b_lo, b_hi) = b.split_at(h);

    let mut a_lo_m = a_lo.to_vec();
    a_lo_m.resize(m, 0);
    let mut b_lo_m = b_lo.to_vec();
    b_lo_m.resize(m, 0);

    let z0 = kmul(&a_lo_m, &b_lo_m);
    let z2 = kmul(a_hi, b_hi);

    // (sa + ca W^m)(sb + cb W^m) with single-bit carries ca, cb
    let (sa, ca) = half_sum(&a_lo_m, a_hi, m);
    let (sb, cb) = half_sum(&b_lo_m, b_hi, m);
    let mut mid = vec![0u64; 2 * m + 2];
    add_at(&mut mid, &kmul(&sa, &sb), 0);
    if ca {
        add_at(&mut mid, &sb, m);
    }
    if cb {
        add_at(&mut mid, &sa, m);
    }
    if ca && cb {
        add_at(&mut mid, &[1], 2 * m);
    }
    sub_in_place(&mut mid, &z0);
    sub_in_place(&mut mid, &z2);

    let mut out = vec![0u64; 2 * n + 2];
    add_at(&mut out, &z0, 0);
    add_at(&mut out, &z2, 2 * h);
    add_at(&mut out, &mid, h);
    out.truncate(2 * n);
    out
}

fn words(v: &BigUint, n: usize) -> Vec<u64> {
    let mut w = v.to_u64_digits();
    w.resize(n, 0);
    w
}

/// `a * b` by Karatsuba recursion.
pub fn karatsuba_mul(a: &BigUint, b: &BigUint) -> BigUint {
    let n = a.to_u64_digits().len().max(b.to_u64_digits().len()).max(1);
    let p = kmul(&words(a, n), &words(b, n));
    let bytes: Vec<u32> = p
        .iter()
        .flat_map(|&w| [w as u32, (w >> 32) as u32])
        .collect();
    BigUint::new(bytes)
}

/// `a * b` for hex operands below `2^bits`, as canonical hex.
pub fn karatsuba_oracle(a: &str, b: &str, bits: u32) -> Result<String, LimbError> {
    let a = limb::parse_hex(a)?;
    let b = limb::parse_hex(b)?;
    for v in [&a, &b] {
        if v.bits() > u64::from(bits) {
            return Err(LimbError::Range {
                needed: v.bits(),
                bitwidth: bits,
            });
        }
    }
    Ok(limb::to_hex(&karatsuba_mul(&a, &b)))
}
