// SPDX-License-Identifier: Apache-2.0

//! Analytical throughput and resource models and the design-space search.
//!
//! A task passes through three pipelined stages: the PL sender, the AIE array
//! and the PL carry module. Each stage's cycle count is converted to seconds
//! in its own clock domain; the slowest stage sets the per-replica rate and
//! replicas add up.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::engine::{pad_to_lanes, ArrayConfig, KernelCycleModel};
use crate::limb::{limb_count, LANES};
use crate::placement::plan_broadcast;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PerfError {
    #[error("kernel efficiency {0} is outside (0, 1]")]
    InvalidEff(f64),
    #[error("no profiled efficiency for S0={s0}, S1={s1}")]
    MissingEff { s0: usize, s1: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(&'static str),
    #[error("no configuration satisfies the resource caps")]
    NoFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceCaps {
    /// LUT budget, as a fraction of the device (1.0 = all of it).
    pub lut: f64,
    pub bram: f64,
    pub plio: usize,
    pub aie: usize,
}

impl Default for ResourceCaps {
    fn default() -> Self {
        Self {
            lut: 1.0,
            bram: 1.0,
            plio: 150,
            aie: 400,
        }
    }
}

/// Per-task cycle count of a PL stage as a function of operand width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CycleModel {
    /// The built-in model for the stage.
    Default,
    Fixed(f64),
    /// `base + per_bit * N`.
    Linear { base: f64, per_bit: f64 },
}

/// `ceil(2N/512)` DDR beats plus `ceil(N/128)` PLIO beats.
pub fn default_sender_cycles(bits: u32) -> f64 {
    let n = u64::from(bits);
    ((2 * n).div_ceil(512) + n.div_ceil(128)) as f64
}

/// `ceil(2N/128)` local-carry beats plus `ceil(2N/512)` merge beats.
pub fn default_carry_cycles(bits: u32) -> f64 {
    let n = u64::from(bits);
    ((2 * n).div_ceil(128) + (2 * n).div_ceil(512)) as f64
}

impl CycleModel {
    fn eval(&self, bits: u32, default: fn(u32) -> f64) -> f64 {
        match *self {
            CycleModel::Default => default(bits),
            CycleModel::Fixed(c) => c,
            CycleModel::Linear { base, per_bit } => base + per_bit * f64::from(bits),
        }
    }
}

/// Where kernel efficiency comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffMode {
    /// The micro cycle model only.
    Model,
    /// Profiled table only; shapes without an entry are not evaluated.
    Table,
    /// Table entry when present, otherwise the model.
    TableOrModel,
}

impl fmt::Display for EffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffMode::Model => "model",
            EffMode::Table => "table",
            EffMode::TableOrModel => "table_or_model",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileData {
    /// LUT fraction used by one replica's PL modules.
    pub lut_per_task: f64,
    pub bram_per_task: f64,
    pub sender: CycleModel,
    pub carry: CycleModel,
    pub pl_freq_hz: f64,
    pub aie_freq_hz: f64,
    pub eff_mode: EffMode,
    /// Kernel efficiency keyed by `(S0, lane-padded S1)`.
    pub eff_table: BTreeMap<(usize, usize), f64>,
    pub kernel_model: KernelCycleModel,
}

impl Default for ProfileData {
    fn default() -> Self {
        Self {
            lut_per_task: 0.781 / 7.0,
            bram_per_task: 0.167 / 7.0,
            sender: CycleModel::Default,
            carry: CycleModel::Default,
            pl_freq_hz: 200e6,
            aie_freq_hz: 1e9,
            eff_mode: EffMode::Model,
            eff_table: BTreeMap::new(),
            kernel_model: KernelCycleModel::default(),
        }
    }
}

impl ProfileData {
    pub fn validate(&self) -> Result<(), PerfError> {
        if !(self.pl_freq_hz > 0.0 && self.aie_freq_hz > 0.0) {
            return Err(PerfError::InvalidProfile("frequencies must be positive"));
        }
        if !(self.lut_per_task >= 0.0 && self.bram_per_task >= 0.0) {
            return Err(PerfError::InvalidProfile("resource costs must be non-negative"));
        }
        if let Some(&e) = self.eff_table.values().find(|&&e| !eff_in_range(e)) {
            return Err(PerfError::InvalidEff(e));
        }
        Ok(())
    }

    /// Kernel efficiency for a tile of `s0` by lane-padded `s1` segments.
    pub fn eff(&self, s0: usize, s1: usize) -> Result<f64, PerfError> {
        let table = self.eff_table.get(&(s0, s1)).copied();
        match (self.eff_mode, table) {
            (EffMode::Table | EffMode::TableOrModel, Some(e)) => Ok(e),
            (EffMode::Table, None) => Err(PerfError::MissingEff { s0, s1 }),
            _ => Ok(self.kernel_model.evaluate(s0, s1).eff),
        }
    }

    pub fn sender_cycles(&self, bits: u32) -> f64 {
        self.sender.eval(bits, default_sender_cycles)
    }

    pub fn carry_cycles(&self, bits: u32) -> f64 {
        self.carry.eval(bits, default_carry_cycles)
    }
}

fn eff_in_range(e: f64) -> bool {
    e > 0.0 && e <= 1.0
}

/// `(ceil(L / P_intra0), ceil(L / P_intra1))` with `L = ceil(N / 31)`.
pub fn segments_per_aie(bits: u32, p_intra0: usize, p_intra1: usize) -> (usize, usize) {
    let l = limb_count(bits);
    (l.div_ceil(p_intra0), l.div_ceil(p_intra1))
}

/// Segments actually swept by a tile: S1 rounded up to the SIMD width.
pub fn padded_segments(bits: u32, p_intra0: usize, p_intra1: usize) -> (usize, usize) {
    let (s0, s1) = segments_per_aie(bits, p_intra0, p_intra1);
    (s0, pad_to_lanes(s1))
}

/// Operand bits held per AIE: the A share rounded up to the SIMD width.
pub fn bits_per_aie(bits: u32, p_intra0: usize) -> u64 {
    let (s0, _) = segments_per_aie(bits, p_intra0, 1);
    31 * pad_to_lanes(s0) as u64
}

/// `ceil(S0 * S1 / (8 * eff))`. Values within rounding noise of an integer
/// are not bumped to the next one.
pub fn aie_cycles(s0: usize, s1: usize, eff: f64) -> Result<u64, PerfError> {
    if !eff_in_range(eff) {
        return Err(PerfError::InvalidEff(eff));
    }
    let x = (s0 * s1) as f64 / (LANES as f64 * eff);
    let near = x.round();
    if (x - near).abs() <= 1e-9 * near.max(1.0) {
        Ok(near as u64)
    } else {
        Ok(x.ceil() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Sender,
    Carry,
    Aie,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Sender => "sender",
            Stage::Carry => "carry",
            Stage::Aie => "aie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputEstimate {
    pub tasks_per_second: f64,
    pub bottleneck: Stage,
    pub sender_seconds: f64,
    pub carry_seconds: f64,
    pub aie_seconds: f64,
    pub aie_cycles: u64,
    pub eff: f64,
}

impl ThroughputEstimate {
    pub fn stage_seconds(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Sender => self.sender_seconds,
            Stage::Carry => self.carry_seconds,
            Stage::Aie => self.aie_seconds,
        }
    }
}

/// Throughput from per-stage latencies already in seconds.
pub fn throughput_from_seconds(p_inter: usize, sender: f64, carry: f64, aie: f64) -> (f64, Stage) {
    let mut bottleneck = Stage::Sender;
    let mut worst = sender;
    for (stage, t) in [(Stage::Carry, carry), (Stage::Aie, aie)] {
        if t > worst {
            worst = t;
            bottleneck = stage;
        }
    }
    (p_inter as f64 / worst, bottleneck)
}

pub fn estimate_throughput(
    cfg: &ArrayConfig,
    prof: &ProfileData,
) -> Result<ThroughputEstimate, PerfError> {
    let (s0, s1) = padded_segments(cfg.bits, cfg.p_intra0, cfg.p_intra1);
    let eff = prof.eff(s0, s1)?;
    let cycles = aie_cycles(s0, s1, eff)?;
    let sender_seconds = prof.sender_cycles(cfg.bits) / prof.pl_freq_hz;
    let carry_seconds = prof.carry_cycles(cfg.bits) / prof.pl_freq_hz;
    let aie_seconds = cycles as f64 / prof.aie_freq_hz;
    let (tasks_per_second, bottleneck) =
        throughput_from_seconds(cfg.p_inter, sender_seconds, carry_seconds, aie_seconds);
    Ok(ThroughputEstimate {
        tasks_per_second,
        bottleneck,
        sender_seconds,
        carry_seconds,
        aie_seconds,
        aie_cycles: cycles,
        eff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceUse {
    pub lut: f64,
    pub bram: f64,
    pub plio: usize,
    pub aie: usize,
}

/// Remaining budget per resource; negative means over the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    pub lut: f64,
    pub bram: f64,
    pub plio: i64,
    pub aie: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub feasible: bool,
    pub usage: ResourceUse,
    pub slack: Slack,
}

pub fn resource_use(cfg: &ArrayConfig, prof: &ProfileData) -> ResourceUse {
    let tasks = cfg.p_inter as f64;
    ResourceUse {
        lut: prof.lut_per_task * tasks,
        bram: prof.bram_per_task * tasks,
        plio: plan_broadcast(cfg).total_plio,
        aie: cfg.cells(),
    }
}

pub fn check_constraints(cfg: &ArrayConfig, caps: &ResourceCaps, prof: &ProfileData) -> Verdict {
    let usage = resource_use(cfg, prof);
    let slack = Slack {
        lut: caps.lut - usage.lut,
        bram: caps.bram - usage.bram,
        plio: caps.plio as i64 - usage.plio as i64,
        aie: caps.aie as i64 - usage.aie as i64,
    };
    // tolerate float noise in fractional budgets
    let eps = 1e-12;
    let feasible = slack.lut >= -eps && slack.bram >= -eps && slack.plio >= 0 && slack.aie >= 0;
    Verdict {
        feasible,
        usage,
        slack,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub cfg: ArrayConfig,
    pub s0: usize,
    /// Lane-padded S1.
    pub s1: usize,
    pub estimate: ThroughputEstimate,
    pub usage: ResourceUse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseResult {
    /// Feasible candidates, best first.
    pub ranked: Vec<Candidate>,
}

impl DseResult {
    pub fn best(&self) -> Option<&Candidate> {
        self.ranked.first()
    }
}

/// Ranking order: higher throughput, then fewer tiles per task, fewer
/// replicas, fewer tile rows.
pub fn rank_order(x: &Candidate, y: &Candidate) -> Ordering {
    y.estimate
        .tasks_per_second
        .total_cmp(&x.estimate.tasks_per_second)
        .then(x.cfg.p_intra().cmp(&y.cfg.p_intra()))
        .then(x.cfg.p_inter.cmp(&y.cfg.p_inter))
        .then(x.cfg.p_intra0.cmp(&y.cfg.p_intra0))
}

/// Exhaustive search over every tile shape with `P0 * P1 <= C_AIE` and every
/// replica count up to `C_AIE`.
pub fn dse_search(bits: u32, caps: &ResourceCaps, prof: &ProfileData) -> Result<DseResult, PerfError> {
    let l = limb_count(bits);
    let mut shapes = Vec::new();
    for p0 in 1..=l.min(caps.aie) {
        for p1 in 1..=l.min(caps.aie / p0) {
            shapes.push((p0, p1));
        }
    }
    dse_search_shapes(bits, caps, prof, &shapes)
}

/// Search restricted to the given `(P_intra0, P_intra1)` shapes.
pub fn dse_search_shapes(
    bits: u32,
    caps: &ResourceCaps,
    prof: &ProfileData,
    shapes: &[(usize, usize)],
) -> Result<DseResult, PerfError> {
    prof.validate()?;
    if bits == 0 {
        return Err(PerfError::InvalidProfile("bit width must be positive"));
    }
    let l = limb_count(bits);
    let mut ranked = Vec::new();
    for &(p0, p1) in shapes {
        if p0 == 0 || p1 == 0 || p0 > l || p1 > l {
            continue;
        }
        let (s0, s1) = padded_segments(bits, p0, p1);
        if prof.eff_mode == EffMode::Table && !prof.eff_table.contains_key(&(s0, s1)) {
            continue;
        }
        for p_inter in 1..=caps.aie.max(1) {
            let cfg = ArrayConfig {
                bits,
                p_inter,
                p_intra0: p0,
                p_intra1: p1,
            };
            let verdict = check_constraints(&cfg, caps, prof);
            if !verdict.feasible {
                if verdict.slack.aie < 0 {
                    break;
                }
                continue;
            }
            let estimate = estimate_throughput(&cfg, prof)?;
            ranked.push(Candidate {
                cfg,
                s0,
                s1,
                estimate,
                usage: verdict.usage,
            });
        }
    }
    if ranked.is_empty() {
        return Err(PerfError::NoFeasible);
    }
    ranked.sort_by(rank_order);
    Ok(DseResult { ranked })
}
