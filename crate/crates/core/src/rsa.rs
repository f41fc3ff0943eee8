// SPDX-License-Identifier: Apache-2.0

//! RSA on the multiplication engine.
//!
//! Every big multiplication goes through an [`Engine`] sized to the
//! Montgomery radix, so the engine's counters give the exact number of
//! multiplications a computation needed. Exponentiation scans the exponent
//! from its least significant bit and performs the same two Montgomery
//! multiplications per bit whatever the bit's value.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::engine::{ArrayConfig, Engine, EngineError};
use crate::perf::{aie_cycles, padded_segments, PerfError, ProfileData};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RsaError {
    #[error("modulus must be odd")]
    EvenModulus,
    #[error("radix 2^{k} does not exceed the modulus")]
    RadixTooSmall { k: u32 },
    #[error("operand is not reduced modulo M")]
    OperandRange,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("key check failed: {0}")]
    Key(KeyViolation),
}

/// Montgomery constants for an odd modulus `M` and radix `R = 2^k`.
#[derive(Debug)]
pub struct MontgomeryContext {
    modulus: BigUint,
    k: u32,
    n_prime: BigUint,
    r_mod: BigUint,
    r2_mod: BigUint,
    mask: BigUint,
    engine: Engine,
}

impl MontgomeryContext {
    /// Context with a single-tile engine.
    pub fn new(modulus: BigUint, k: u32) -> Result<Self, RsaError> {
        Self::with_array(modulus, k, 1, 1)
    }

    /// Context whose engine tiles each multiplication `p_intra0 x p_intra1`.
    pub fn with_array(
        modulus: BigUint,
        k: u32,
        p_intra0: usize,
        p_intra1: usize,
    ) -> Result<Self, RsaError> {
        if modulus.is_even() {
            return Err(RsaError::EvenModulus);
        }
        if modulus.bits() > u64::from(k) {
            return Err(RsaError::RadixTooSmall { k });
        }
        let cfg = ArrayConfig::new(k, 1, p_intra0, p_intra1)?;
        let engine = Engine::new(cfg)?;
        let r = BigUint::one() << k;
        let mask = &r - 1u32;
        // Newton iteration for M^-1 mod 2^k; each round doubles the correct bits
        let mut inv = BigUint::one();
        let mut good = 1u32;
        while good < k {
            let t = (&modulus * &inv) & &mask;
            inv = (&inv * ((BigUint::from(2u32) + &r - t) & &mask)) & &mask;
            good *= 2;
        }
        let n_prime = (&r - inv) & &mask;
        let r_mod = &r % &modulus;
        let r2_mod = (&r_mod * &r_mod) % &modulus;
        let ctx = Self {
            modulus,
            k,
            n_prime,
            r_mod,
            r2_mod,
            mask,
            engine,
        };
        debug_assert_eq!((&ctx.modulus * &ctx.n_prime) & &ctx.mask, ctx.mask.clone());
        Ok(ctx)
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n_prime(&self) -> &BigUint {
        &self.n_prime
    }

    pub fn r_mod(&self) -> &BigUint {
        &self.r_mod
    }

    pub fn r2_mod(&self) -> &BigUint {
        &self.r2_mod
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Engine multiplications performed so far through this context.
    pub fn multiplications(&self) -> u64 {
        self.engine.stats().multiplications
    }

    /// `am * bm * R^-1 mod M` with three engine multiplications.
    pub fn mont_mul(&self, am: &BigUint, bm: &BigUint) -> Result<BigUint, RsaError> {
        if am >= &self.modulus || bm >= &self.modulus {
            return Err(RsaError::OperandRange);
        }
        let d = self.engine.multiply(am, bm)?;
        let c = self.engine.multiply(&self.n_prime, &(&d & &self.mask))?;
        let f = self.engine.multiply(&(&c & &self.mask), &self.modulus)?;
        let g = (f + d) >> self.k;
        Ok(if g >= self.modulus { g - &self.modulus } else { g })
    }

    pub fn to_mont(&self, a: &BigUint) -> Result<BigUint, RsaError> {
        self.mont_mul(a, &self.r2_mod)
    }

    pub fn from_mont(&self, am: &BigUint) -> Result<BigUint, RsaError> {
        if am >= &self.modulus {
            return Err(RsaError::OperandRange);
        }
        if self.modulus.is_one() {
            return Ok(BigUint::zero());
        }
        self.mont_mul(am, &BigUint::one())
    }
}

/// Montgomery multiplications used by [`mod_exp_const_time`] for an exponent
/// of `exp_bits` bits: two per bit plus entry and exit.
pub const fn mont_muls_for(exp_bits: u64) -> u64 {
    2 * exp_bits + 2
}

/// `base^exponent mod M`, always two Montgomery multiplications per
/// exponent bit.
pub fn mod_exp_const_time(
    base: &BigUint,
    exponent: &BigUint,
    ctx: &MontgomeryContext,
) -> Result<BigUint, RsaError> {
    if base >= ctx.modulus() {
        return Err(RsaError::OperandRange);
    }
    let one_m = ctx.r_mod() % ctx.modulus();
    let mut x = ctx.to_mont(base)?;
    let mut acc = one_m;
    for i in 0..exponent.bits() {
        // M0 squares the running power, M1 multiplies it in; both always run
        let sq = ctx.mont_mul(&x, &x)?;
        let prod = ctx.mont_mul(&acc, &x)?;
        if exponent.bit(i) {
            acc = prod;
        }
        x = sq;
    }
    ctx.from_mont(&acc)
}

/// Plain square-and-multiply with `%` reduction.
pub fn mod_exp_reference(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> BigUint {
    let mut result = BigUint::one() % modulus;
    let mut b = base % modulus;
    for i in 0..exponent.bits() {
        if exponent.bit(i) {
            result = (&result * &b) % modulus;
        }
        b = (&b * &b) % modulus;
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyViolation {
    /// `p` or `q` below 2.
    FactorTooSmall,
    /// `1 < e_prv < phi` fails.
    PrivateExponentRange,
    /// `gcd(e_prv, phi) = 1` fails.
    NotCoprime,
    /// `1 < e_pub < e_prv` fails.
    PublicExponentRange,
    /// `e_pub * e_prv mod phi = 1` fails.
    NotInverse,
}

impl fmt::Display for KeyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeyViolation::FactorTooSmall => "p and q must be at least 2",
            KeyViolation::PrivateExponentRange => "1 < e_prv < phi",
            KeyViolation::NotCoprime => "gcd(e_prv, phi) = 1",
            KeyViolation::PublicExponentRange => "1 < e_pub < e_prv",
            KeyViolation::NotInverse => "e_pub * e_prv mod phi = 1",
        })
    }
}

/// Checks the key conditions in order and reports the first that fails.
pub fn keygen_check(
    p: &BigUint,
    q: &BigUint,
    e_pub: &BigUint,
    e_prv: &BigUint,
) -> Result<(), KeyViolation> {
    let one = BigUint::one();
    if p <= &one || q <= &one {
        return Err(KeyViolation::FactorTooSmall);
    }
    let phi = (p - 1u32) * (q - 1u32);
    if !(e_prv > &one && e_prv < &phi) {
        return Err(KeyViolation::PrivateExponentRange);
    }
    if !e_prv.gcd(&phi).is_one() {
        return Err(KeyViolation::NotCoprime);
    }
    if !(e_pub > &one && e_pub < e_prv) {
        return Err(KeyViolation::PublicExponentRange);
    }
    if !((e_pub * e_prv) % &phi).is_one() {
        return Err(KeyViolation::NotInverse);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaKeySet {
    pub p: BigUint,
    pub q: BigUint,
    pub modulus: BigUint,
    pub phi: BigUint,
    pub e_pub: BigUint,
    pub e_prv: BigUint,
}

impl RsaKeySet {
    pub fn new(p: BigUint, q: BigUint, e_pub: BigUint, e_prv: BigUint) -> Result<Self, RsaError> {
        keygen_check(&p, &q, &e_pub, &e_prv).map_err(RsaError::Key)?;
        Ok(Self {
            modulus: &p * &q,
            phi: (&p - 1u32) * (&q - 1u32),
            p,
            q,
            e_pub,
            e_prv,
        })
    }

    /// Derives `e_prv` as the inverse of `e_pub` modulo phi.
    pub fn from_primes(p: BigUint, q: BigUint, e_pub: BigUint) -> Result<Self, RsaError> {
        let phi = (&p - 1u32) * (&q - 1u32);
        let e_prv = mod_inverse(&e_pub, &phi).ok_or(RsaError::Key(KeyViolation::NotCoprime))?;
        Self::new(p, q, e_pub, e_prv)
    }

    pub fn modulus_bits(&self) -> u32 {
        self.modulus.bits() as u32
    }
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let (mut r0, mut r1) = (BigInt::from(m.clone()), BigInt::from(a % m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = core::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = core::mem::replace(&mut t1, t2);
    }
    if !r0.is_one() {
        return None;
    }
    let m = BigInt::from(m.clone());
    (((t0 % &m) + &m) % &m).to_biguint()
}

/// `m^e_pub mod M` and `c^e_prv mod M` through one Montgomery context.
#[derive(Debug)]
pub struct Rsa {
    key: RsaKeySet,
    ctx: MontgomeryContext,
}

impl Rsa {
    pub fn new(key: RsaKeySet) -> Result<Self, RsaError> {
        let ctx = MontgomeryContext::new(key.modulus.clone(), key.modulus_bits())?;
        Ok(Self { key, ctx })
    }

    pub fn with_context(key: RsaKeySet, ctx: MontgomeryContext) -> Result<Self, RsaError> {
        if ctx.modulus() != &key.modulus {
            return Err(RsaError::OperandRange);
        }
        Ok(Self { key, ctx })
    }

    pub fn key(&self) -> &RsaKeySet {
        &self.key
    }

    pub fn context(&self) -> &MontgomeryContext {
        &self.ctx
    }

    pub fn encrypt(&self, message: &BigUint) -> Result<BigUint, RsaError> {
        mod_exp_const_time(message, &self.key.e_pub, &self.ctx)
    }

    pub fn decrypt(&self, cipher: &BigUint) -> Result<BigUint, RsaError> {
        mod_exp_const_time(cipher, &self.key.e_prv, &self.ctx)
    }
}

/// Which Montgomery multiplication of a task an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MontTag {
    /// Conversion into Montgomery form.
    Enter,
    /// Squaring in iteration `I`.
    M0,
    /// Multiplication in iteration `I`.
    M1,
    /// Conversion out of Montgomery form.
    Exit,
    /// Kernel 1 loading a task.
    Load,
    /// Kernel 5 writing a result.
    Store,
}

impl fmt::Display for MontTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MontTag::Enter => "enter",
            MontTag::M0 => "M0",
            MontTag::M1 => "M1",
            MontTag::Exit => "exit",
            MontTag::Load => "load",
            MontTag::Store => "store",
        })
    }
}

/// One occupied interval of a pipeline kernel.
///
/// Kernels: 1 task loader, 2 multiplication sender, 3 multiplier array,
/// 4 result collector, 5 task writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub kernel: u8,
    pub task: usize,
    pub iteration: Option<u64>,
    pub mont: MontTag,
    pub step: Option<u8>,
    pub start: u64,
    pub end: u64,
}

impl TraceEvent {
    /// `T0I0M0S0`-style label; entry and exit use `E`/`X` for the iteration.
    pub fn label(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = write!(s, "T{}", self.task);
        match self.mont {
            MontTag::M0 | MontTag::M1 => {
                let _ = write!(s, "I{}{}", self.iteration.unwrap_or(0), self.mont);
            }
            other => {
                let _ = write!(s, "{other}");
            }
        }
        if let Some(step) = self.step {
            let _ = write!(s, "S{step}");
        }
        s
    }
}

/// Slot lengths of the pipeline stages, in abstract time units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineTiming {
    /// Prepare, collect, load and store time of the PL kernels.
    pub pl_slots: u64,
    /// One multiplication on the array.
    pub aie_slots: u64,
}

impl Default for PipelineTiming {
    fn default() -> Self {
        Self {
            pl_slots: 1,
            aie_slots: 1,
        }
    }
}

impl PipelineTiming {
    /// Slot lengths in AIE cycles from a calibration profile: the array's
    /// cycle count for `cfg`, and the sender latency rescaled to the AIE clock.
    pub fn from_profile(cfg: &ArrayConfig, prof: &ProfileData) -> Result<Self, PerfError> {
        let (s0, s1) = padded_segments(cfg.bits, cfg.p_intra0, cfg.p_intra1);
        let aie = aie_cycles(s0, s1, prof.eff(s0, s1)?)?;
        let pl = (prof.sender_cycles(cfg.bits) * prof.aie_freq_hz / prof.pl_freq_hz).ceil();
        Ok(Self {
            pl_slots: (pl as u64).max(1),
            aie_slots: aie.max(1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineTrace {
    pub events: Vec<TraceEvent>,
    pub span: u64,
    pub multiplier_busy: u64,
}

impl PipelineTrace {
    pub fn busy_fraction(&self) -> f64 {
        if self.span == 0 {
            0.0
        } else {
            self.multiplier_busy as f64 / self.span as f64
        }
    }

    pub fn kernel(&self, k: u8) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kernel == k)
    }
}

/// Multiplication sequence of one exponentiation, in dependency order.
fn op_sequence(exp_bits: u64) -> Vec<(Option<u64>, MontTag, u8)> {
    let mut ops = Vec::with_capacity(3 * mont_muls_for(exp_bits) as usize);
    let mut mont = |it: Option<u64>, tag: MontTag| {
        for s in 0..3 {
            ops.push((it, tag, s));
        }
    };
    mont(None, MontTag::Enter);
    for i in 0..exp_bits {
        mont(Some(i), MontTag::M0);
        mont(Some(i), MontTag::M1);
    }
    mont(None, MontTag::Exit);
    ops
}

/// Schedules `tasks` exponentiations of `exp_bits`-bit exponents.
///
/// A task's multiplications run in order. Kernel 2 prepares one
/// multiplication per PL slot as soon as its input is available (task
/// loaded, or the previous result leaving the array); kernel 3 runs prepared
/// multiplications one at a time in preparation order, while kernel 4
/// collects the previous result. Ready work is served earliest first, lower
/// task index on ties.
pub fn schedule_pipeline(tasks: usize, exp_bits: u64, timing: PipelineTiming) -> PipelineTrace {
    let ops = op_sequence(exp_bits);
    let pl = timing.pl_slots;
    let aie = timing.aie_slots;
    let mut events = Vec::new();
    let mut next = alloc::vec![0usize; tasks];
    // (ready time, task)
    let mut ready: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for t in 0..tasks {
        let (start, end) = (t as u64 * pl, (t as u64 + 1) * pl);
        events.push(TraceEvent {
            kernel: 1,
            task: t,
            iteration: None,
            mont: MontTag::Load,
            step: None,
            start,
            end,
        });
        ready.push(Reverse((end, t)));
    }
    let (mut k2_free, mut k3_free, mut k4_free, mut k5_free) = (0u64, 0u64, 0u64, 0u64);
    let mut busy = 0u64;
    let mut span = 0u64;
    while let Some(Reverse((at, t))) = ready.pop() {
        let (iteration, mont, step) = ops[next[t]];
        let ev = |kernel, start, end| TraceEvent {
            kernel,
            task: t,
            iteration,
            mont,
            step: Some(step),
            start,
            end,
        };
        let prep = at.max(k2_free);
        k2_free = prep + pl;
        events.push(ev(2, prep, prep + pl));
        let run = (prep + pl).max(k3_free);
        k3_free = run + aie;
        busy += aie;
        events.push(ev(3, run, run + aie));
        let collect = (run + aie).max(k4_free);
        k4_free = collect + pl;
        events.push(ev(4, collect, collect + pl));
        span = span.max(collect + pl);
        next[t] += 1;
        if next[t] < ops.len() {
            ready.push(Reverse((run + aie, t)));
        } else {
            let store = (collect + pl).max(k5_free);
            k5_free = store + pl;
            events.push(TraceEvent {
                kernel: 5,
                task: t,
                iteration: None,
                mont: MontTag::Store,
                step: None,
                start: store,
                end: store + pl,
            });
            span = span.max(store + pl);
        }
    }
    PipelineTrace {
        events,
        span,
        multiplier_busy: busy,
    }
}

/// Result of a simulated batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub outputs: Vec<BigUint>,
    pub trace: PipelineTrace,
}

/// Exponentiates every input with the same exponent and schedules the batch
/// on the five-kernel pipeline.
pub fn rsa_pipeline_sim(
    inputs: &[BigUint],
    exponent: &BigUint,
    ctx: &MontgomeryContext,
    timing: PipelineTiming,
) -> Result<PipelineRun, RsaError> {
    let outputs = inputs
        .iter()
        .map(|m| mod_exp_const_time(m, exponent, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = schedule_pipeline(inputs.len(), exponent.bits(), timing);
    Ok(PipelineRun { outputs, trace })
}
