// SPDX-License-Identifier: Apache-2.0

//! Tiled schoolbook multiplication on a logical processor array.
//!
//! An [`Engine`] owns the tile plan for one [`ArrayConfig`]. A multiplication
//! decomposes both operands, runs every cascade chain through the tile kernel,
//! merges the chain streams into column sums and resolves carries with the
//! two-stage pipeline.

pub mod karatsuba;
pub mod kernel;
pub mod tiling;

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;

use crate::carry::{self, CarryChunk, CarryError};
use crate::limb::{self, AccVector, LimbError, LimbVector, WeightedAcc, LANES, SEGMENT_BITS};

pub use karatsuba::{karatsuba_mul, karatsuba_oracle};
pub use kernel::{kernel_cycle_count, tile_kernel, KernelCycleModel, KernelCycles, KernelStats};
pub use tiling::{fresh_stream, pad_to_lanes, plan_tiles, Chain, TileGrid, TileSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Limb(#[from] LimbError),
    #[error(transparent)]
    Carry(#[from] CarryError),
    #[error("operands must have at least one limb")]
    EmptyOperand,
    #[error("cannot split {limbs:?} limbs into {parts:?} tiles")]
    OverPartition {
        limbs: (usize, usize),
        parts: (usize, usize),
    },
    #[error("tile ({row}, {col}) received the wrong number of segments")]
    SegmentCount { row: usize, col: usize },
    #[error("accumulator stream does not cover tile ({row}, {col})")]
    StreamMismatch { row: usize, col: usize },
    #[error("invalid array configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("expected {expected} limbs, got {found}")]
    OperandLength { expected: usize, found: usize },
}

/// Operand width plus inter- and intra-task parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayConfig {
    pub bits: u32,
    pub p_inter: usize,
    pub p_intra0: usize,
    pub p_intra1: usize,
}

impl ArrayConfig {
    pub fn new(
        bits: u32,
        p_inter: usize,
        p_intra0: usize,
        p_intra1: usize,
    ) -> Result<Self, EngineError> {
        if bits == 0 {
            return Err(EngineError::InvalidConfig("bit width must be positive"));
        }
        if p_inter == 0 || p_intra0 == 0 || p_intra1 == 0 {
            return Err(EngineError::InvalidConfig("parallelism must be at least 1"));
        }
        Ok(Self {
            bits,
            p_inter,
            p_intra0,
            p_intra1,
        })
    }

    /// One task on one tile.
    pub fn single(bits: u32) -> Self {
        Self {
            bits,
            p_inter: 1,
            p_intra0: 1,
            p_intra1: 1,
        }
    }

    pub fn p_intra(&self) -> usize {
        self.p_intra0 * self.p_intra1
    }

    /// Cells used by all replicas.
    pub fn cells(&self) -> usize {
        self.p_intra() * self.p_inter
    }

    /// Limbs per operand.
    pub fn limbs(&self) -> usize {
        limb::limb_count(self.bits)
    }

    /// Limbs of a full-width product, `ceil(2N / 31)`.
    pub fn product_limbs(&self) -> usize {
        (2 * u64::from(self.bits)).div_ceil(u64::from(SEGMENT_BITS)) as usize
    }
}

/// Snapshot of an engine's work counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineStats {
    pub multiplications: u64,
    pub products: u64,
    pub mac_instructions: u64,
}

/// Reusable buffers for repeated multiplications on one thread.
#[derive(Debug, Default)]
pub struct Scratch {
    a: Vec<u32>,
    b: Vec<u32>,
    b_ext: Vec<u32>,
    stream: Vec<AccVector>,
    columns: Vec<i128>,
    chunks: Vec<CarryChunk>,
    words: Vec<u128>,
    limbs: Vec<u32>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Multiplication engine for one array configuration.
///
/// Counters are atomic so one engine can be shared by worker threads.
#[derive(Debug)]
pub struct Engine {
    cfg: ArrayConfig,
    grid: TileGrid,
    column_span: usize,
    multiplications: AtomicU64,
    products: AtomicU64,
    mac_instructions: AtomicU64,
}

impl Clone for Engine {
    fn clone(&self) -> Self {
        let e = Self {
            cfg: self.cfg,
            grid: self.grid.clone(),
            column_span: self.column_span,
            multiplications: AtomicU64::new(0),
            products: AtomicU64::new(0),
            mac_instructions: AtomicU64::new(0),
        };
        e.record(self.stats());
        e
    }
}

impl Engine {
    pub fn new(cfg: ArrayConfig) -> Result<Self, EngineError> {
        let l = cfg.limbs();
        let grid = plan_tiles(l, l, cfg.p_intra0, cfg.p_intra1)?;
        let column_span = grid
            .chains
            .iter()
            .map(|c| c.window.end)
            .max()
            .unwrap_or(0)
            .max(grid.output_columns());
        Ok(Self {
            cfg,
            grid,
            column_span,
            multiplications: AtomicU64::new(0),
            products: AtomicU64::new(0),
            mac_instructions: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            multiplications: self.multiplications.load(Ordering::Relaxed),
            products: self.products.load(Ordering::Relaxed),
            mac_instructions: self.mac_instructions.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        self.multiplications.store(0, Ordering::Relaxed);
        self.products.store(0, Ordering::Relaxed);
        self.mac_instructions.store(0, Ordering::Relaxed);
    }

    fn record(&self, s: EngineStats) {
        self.multiplications
            .fetch_add(s.multiplications, Ordering::Relaxed);
        self.products.fetch_add(s.products, Ordering::Relaxed);
        self.mac_instructions
            .fetch_add(s.mac_instructions, Ordering::Relaxed);
    }

    fn load(&self, value: &BigUint, padded: usize, out: &mut Vec<u32>) -> Result<(), EngineError> {
        let lv = LimbVector::decompose(value, self.cfg.bits)?;
        out.clear();
        out.extend_from_slice(lv.limbs());
        out.resize(padded, 0);
        Ok(())
    }

    fn load_limbs(&self, limbs: &[u32], padded: usize, out: &mut Vec<u32>) -> Result<(), EngineError> {
        if limbs.len() > self.cfg.limbs() {
            return Err(EngineError::OperandLength {
                expected: self.cfg.limbs(),
                found: limbs.len(),
            });
        }
        if let Some(index) = limbs.iter().position(|&v| v > limb::SEGMENT_MASK) {
            return Err(LimbError::LimbInvariant {
                index,
                value: limbs[index],
            }
            .into());
        }
        out.clear();
        out.extend_from_slice(limbs);
        out.resize(padded, 0);
        Ok(())
    }

    /// Decomposes and end-pads both operands to the grid's padded lengths.
    pub fn prepare_operands(
        &self,
        a: &BigUint,
        b: &BigUint,
    ) -> Result<(Vec<u32>, Vec<u32>), EngineError> {
        let (mut pa, mut pb) = (Vec::new(), Vec::new());
        self.load(a, self.grid.padded_l0(), &mut pa)?;
        self.load(b, self.grid.padded_l1(), &mut pb)?;
        Ok((pa, pb))
    }

    /// Runs every chain and returns the merged column sums.
    pub fn run_array(&self, a: &LimbVector, b: &LimbVector) -> Result<WeightedAcc, EngineError> {
        let mut s = Scratch::new();
        self.load_limbs(a.limbs(), self.grid.padded_l0(), &mut s.a)?;
        self.load_limbs(b.limbs(), self.grid.padded_l1(), &mut s.b)?;
        let mut acc = WeightedAcc::new(self.grid.output_columns());
        let mut stats = KernelStats::default();
        for chain in &self.grid.chains {
            stats += run_chain(&self.grid, chain, &s.a, &s.b, &mut s.stream, &mut s.b_ext)?;
            acc.absorb(&s.stream)?;
        }
        self.record(EngineStats {
            multiplications: 1,
            products: stats.products,
            mac_instructions: stats.mac_instructions,
        });
        Ok(acc)
    }

    /// Full multiplication of two `N`-bit operands.
    pub fn multiply(&self, a: &BigUint, b: &BigUint) -> Result<BigUint, EngineError> {
        self.multiply_with(a, b, &mut Scratch::new())
    }

    pub fn multiply_with(
        &self,
        a: &BigUint,
        b: &BigUint,
        s: &mut Scratch,
    ) -> Result<BigUint, EngineError> {
        let mut a_buf = core::mem::take(&mut s.a);
        let mut b_buf = core::mem::take(&mut s.b);
        let res = self
            .load(a, self.grid.padded_l0(), &mut a_buf)
            .and_then(|_| self.load(b, self.grid.padded_l1(), &mut b_buf))
            .and_then(|_| self.product_into(&a_buf, &b_buf, s));
        s.a = a_buf;
        s.b = b_buf;
        res?;
        Ok(limb::recompose(&s.limbs)?)
    }

    /// Multiplies raw limb slices (at most `ceil(N/31)` limbs each) and
    /// returns the `ceil(2N/31)` product limbs held in `s`.
    pub fn multiply_limbs_with<'s>(
        &self,
        a: &[u32],
        b: &[u32],
        s: &'s mut Scratch,
    ) -> Result<&'s [u32], EngineError> {
        let mut a_buf = core::mem::take(&mut s.a);
        let mut b_buf = core::mem::take(&mut s.b);
        let res = self
            .load_limbs(a, self.grid.padded_l0(), &mut a_buf)
            .and_then(|_| self.load_limbs(b, self.grid.padded_l1(), &mut b_buf))
            .and_then(|_| self.product_into(&a_buf, &b_buf, s));
        s.a = a_buf;
        s.b = b_buf;
        res?;
        Ok(&s.limbs)
    }

    fn product_into(&self, a: &[u32], b: &[u32], s: &mut Scratch) -> Result<(), EngineError> {
        s.columns.clear();
        s.columns.resize(self.column_span, 0);
        let mut stats = KernelStats::default();
        for chain in &self.grid.chains {
            stats += run_chain(&self.grid, chain, a, b, &mut s.stream, &mut s.b_ext)?;
            absorb_columns(&mut s.columns, &s.stream)?;
        }
        self.resolve(s)?;
        self.record(EngineStats {
            multiplications: 1,
            products: stats.products,
            mac_instructions: stats.mac_instructions,
        });
        Ok(())
    }

    fn resolve(&self, s: &mut Scratch) -> Result<(), EngineError> {
        carry::stage1_into(&s.columns, &mut s.chunks)?;
        carry::stage2_into(&s.chunks, self.cfg.product_limbs(), &mut s.words, &mut s.limbs)?;
        Ok(())
    }

    /// Merges chain outputs produced by [`execute_chain`] (in any order) and
    /// resolves carries. Counts as one multiplication.
    pub fn finish<I>(&self, outputs: I) -> Result<BigUint, EngineError>
    where
        I: IntoIterator<Item = (Vec<AccVector>, KernelStats)>,
    {
        let mut s = Scratch::new();
        s.columns.resize(self.column_span, 0);
        let mut stats = KernelStats::default();
        for (stream, st) in outputs {
            absorb_columns(&mut s.columns, &stream)?;
            stats += st;
        }
        self.resolve(&mut s)?;
        self.record(EngineStats {
            multiplications: 1,
            products: stats.products,
            mac_instructions: stats.mac_instructions,
        });
        Ok(limb::recompose(&s.limbs)?)
    }
}

fn absorb_columns(columns: &mut [i128], stream: &[AccVector]) -> Result<(), EngineError> {
    for acc in stream {
        let base = acc.base_weight();
        for (k, &v) in acc.lanes().iter().enumerate() {
            let slot = &mut columns[base + k];
            let sum = *slot + v;
            if sum > limb::ACC_MAX {
                return Err(LimbError::AccumulatorOverflow { column: base + k }.into());
            }
            *slot = sum;
        }
    }
    Ok(())
}

fn run_chain(
    grid: &TileGrid,
    chain: &Chain,
    a: &[u32],
    b: &[u32],
    stream: &mut Vec<AccVector>,
    b_ext: &mut Vec<u32>,
) -> Result<KernelStats, EngineError> {
    stream.clear();
    stream.extend(chain.window.clone().step_by(LANES).map(AccVector::zeroed));
    let mut stats = KernelStats::default();
    for &t in &chain.tiles {
        let tile = &grid.tiles[t];
        let cols = tile.product_columns();
        let first = (cols.start - chain.window.start) / LANES;
        let last = (cols.end - chain.window.start).div_ceil(LANES);
        stats += kernel::run_tile(
            tile,
            &a[tile.a_range.clone()],
            &b[tile.b_range.clone()],
            &mut stream[first..last],
            b_ext,
        )?;
    }
    Ok(stats)
}

/// Runs one cascade chain on end-padded operands from
/// [`Engine::prepare_operands`], returning its accumulator stream.
pub fn execute_chain(
    grid: &TileGrid,
    chain: &Chain,
    a: &[u32],
    b: &[u32],
) -> Result<(Vec<AccVector>, KernelStats), EngineError> {
    if a.len() != grid.padded_l0() {
        return Err(EngineError::OperandLength {
            expected: grid.padded_l0(),
            found: a.len(),
        });
    }
    if b.len() != grid.padded_l1() {
        return Err(EngineError::OperandLength {
            expected: grid.padded_l1(),
            found: b.len(),
        });
    }
    let mut stream = Vec::new();
    let stats = run_chain(grid, chain, a, b, &mut stream, &mut Vec::new())?;
    Ok((stream, stats))
}

/// Column sums of `a * b` with the given tiling; operand lengths may differ.
pub fn run_array(
    a: &LimbVector,
    b: &LimbVector,
    p_intra0: usize,
    p_intra1: usize,
) -> Result<WeightedAcc, EngineError> {
    let grid = plan_tiles(a.len(), b.len(), p_intra0, p_intra1)?;
    let mut pa = a.limbs().to_vec();
    pa.resize(grid.padded_l0(), 0);
    let mut pb = b.limbs().to_vec();
    pb.resize(grid.padded_l1(), 0);
    let mut acc = WeightedAcc::new(grid.output_columns());
    let (mut stream, mut b_ext) = (Vec::new(), Vec::new());
    for chain in &grid.chains {
        run_chain(&grid, chain, &pa, &pb, &mut stream, &mut b_ext)?;
        acc.absorb(&stream)?;
    }
    Ok(acc)
}

/// `a * b` for hex operands below `2^cfg.bits`, as canonical hex.
pub fn schoolbook_mul(a: &str, b: &str, cfg: &ArrayConfig) -> Result<String, EngineError> {
    let a = limb::parse_hex(a)?;
    let b = limb::parse_hex(b)?;
    let p = Engine::new(*cfg)?.multiply(&a, &b)?;
    Ok(limb::to_hex(&p))
}
