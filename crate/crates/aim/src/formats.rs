// SPDX-License-Identifier: Apache-2.0

//! Text file formats: operand lists, calibration profiles, resource caps,
//! RSA keys and the CSV exports.

use std::io::Write;
use std::path::Path;
use std::{fs, io};

use aim_core::limb::{parse_hex, to_hex, LimbError};
use aim_core::perf::{CycleModel, DseResult, EffMode, ProfileData, ResourceCaps};
use aim_core::placement::{PlacementResult, Slot};
use aim_core::rsa::PipelineTrace;
use num_bigint::BigUint;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Lines that carry content: trimmed, blank lines and `#` comments dropped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One hex integer per line.
pub fn parse_operands(text: &str) -> Result<Vec<BigUint>, FormatError> {
    content_lines(text)
        .map(|(n, l)| parse_hex(l).map_err(|e: LimbError| parse_err(n, e.to_string())))
        .collect()
}

pub fn read_operands(path: &Path) -> Result<Vec<BigUint>, FormatError> {
    parse_operands(&read_text(path)?)
}

/// Canonical hex, one value per line.
pub fn format_operands(values: &[BigUint]) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&to_hex(v));
        out.push('\n');
    }
    out
}

/// `key = value` pairs followed by optional `[section]` blocks of raw lines.
struct KeyValueDoc<'a> {
    pairs: Vec<(usize, &'a str, &'a str)>,
    sections: Vec<(&'a str, Vec<(usize, &'a str)>)>,
}

fn parse_kv(text: &str) -> Result<KeyValueDoc<'_>, FormatError> {
    let mut doc = KeyValueDoc {
        pairs: Vec::new(),
        sections: Vec::new(),
    };
    for (n, line) in content_lines(text) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            doc.sections.push((name.trim(), Vec::new()));
        } else if let Some((_, rows)) = doc.sections.last_mut() {
            rows.push((n, line));
        } else {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(n, "expected key = value"))?;
            doc.pairs.push((n, k.trim(), v.trim()));
        }
    }
    Ok(doc)
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, FormatError> {
    v.parse()
        .map_err(|_| parse_err(line, format!("{key}: cannot parse {v:?}")))
}

fn cycle_model(line: usize, key: &str, v: &str) -> Result<CycleModel, FormatError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    match parts.as_slice() {
        ["default"] => Ok(CycleModel::Default),
        ["linear", base, per_bit] => Ok(CycleModel::Linear {
            base: num(line, key, base)?,
            per_bit: num(line, key, per_bit)?,
        }),
        [c] => Ok(CycleModel::Fixed(num(line, key, c)?)),
        _ => Err(parse_err(line, format!("{key}: expected default, <cycles> or linear <base> <per_bit>"))),
    }
}

fn format_cycle_model(m: &CycleModel) -> String {
    match m {
        CycleModel::Default => "default".into(),
        CycleModel::Fixed(c) => format!("{c}"),
        CycleModel::Linear { base, per_bit } => format!("linear {base} {per_bit}"),
    }
}

/// Parses a calibration profile. Unset keys keep their defaults.
///
/// ```text
/// pl_freq_hz = 175e6
/// sender_cycles = 256          # or: default | linear <base> <per_bit>
/// eff_mode = table             # model | table | table_or_model
/// [eff]
/// 193 184 0.67                 # S0, lane-padded S1, efficiency
/// ```
pub fn parse_profile(text: &str) -> Result<ProfileData, FormatError> {
    let doc = parse_kv(text)?;
    let mut p = ProfileData::default();
    for &(n, k, v) in &doc.pairs {
        match k {
            "lut_per_task" => p.lut_per_task = num(n, k, v)?,
            "bram_per_task" => p.bram_per_task = num(n, k, v)?,
            "pl_freq_hz" => p.pl_freq_hz = num(n, k, v)?,
            "aie_freq_hz" => p.aie_freq_hz = num(n, k, v)?,
            "sender_cycles" => p.sender = cycle_model(n, k, v)?,
            "carry_cycles" => p.carry = cycle_model(n, k, v)?,
            "row_overhead" => p.kernel_model.row_overhead = num(n, k, v)?,
            "prologue" => p.kernel_model.prologue = num(n, k, v)?,
            "eff_mode" => {
                p.eff_mode = match v {
                    "model" => EffMode::Model,
                    "table" => EffMode::Table,
                    "table_or_model" => EffMode::TableOrModel,
                    _ => return Err(parse_err(n, format!("unknown eff_mode {v:?}"))),
                }
            }
            _ => return Err(parse_err(n, format!("unknown key {k:?}"))),
        }
    }
    for (name, rows) in &doc.sections {
        if *name != "eff" {
            let line = rows.first().map_or(0, |r| r.0);
            return Err(parse_err(line, format!("unknown section [{name}]")));
        }
        for &(n, row) in rows {
            let cols: Vec<&str> = row.split_whitespace().collect();
            let [s0, s1, eff] = cols.as_slice() else {
                return Err(parse_err(n, "expected: S0 S1 eff"));
            };
            let key = (num(n, "S0", s0)?, num(n, "S1", s1)?);
            let eff: f64 = num(n, "eff", eff)?;
            if !(eff > 0.0 && eff <= 1.0) {
                return Err(parse_err(n, format!("efficiency {eff} outside (0, 1]")));
            }
            p.eff_table.insert(key, eff);
        }
    }
    p.validate().map_err(|e| parse_err(0, e.to_string()))?;
    Ok(p)
}

pub fn format_profile(p: &ProfileData) -> String {
    let mut s = String::new();
    s.push_str(&format!("lut_per_task = {}\n", p.lut_per_task));
    s.push_str(&format!("bram_per_task = {}\n", p.bram_per_task));
    s.push_str(&format!("pl_freq_hz = {}\n", p.pl_freq_hz));
    s.push_str(&format!("aie_freq_hz = {}\n", p.aie_freq_hz));
    s.push_str(&format!("sender_cycles = {}\n", format_cycle_model(&p.sender)));
    s.push_str(&format!("carry_cycles = {}\n", format_cycle_model(&p.carry)));
    s.push_str(&format!("row_overhead = {}\n", p.kernel_model.row_overhead));
    s.push_str(&format!("prologue = {}\n", p.kernel_model.prologue));
    s.push_str(&format!("eff_mode = {}\n", p.eff_mode));
    if !p.eff_table.is_empty() {
        s.push_str("\n[eff]\n");
        for ((s0, s1), e) in &p.eff_table {
            s.push_str(&format!("{s0} {s1} {e}\n"));
        }
    }
    s
}

/// `lut`, `bram`, `plio`, `aie` budgets; unset keys keep their defaults.
pub fn parse_caps(text: &str) -> Result<ResourceCaps, FormatError> {
    let doc = parse_kv(text)?;
    if let Some((_, rows)) = doc.sections.first() {
        return Err(parse_err(rows.first().map_or(0, |r| r.0), "caps files have no sections"));
    }
    let mut c = ResourceCaps::default();
    for &(n, k, v) in &doc.pairs {
        match k {
            "lut" => c.lut = num(n, k, v)?,
            "bram" => c.bram = num(n, k, v)?,
            "plio" => c.plio = num(n, k, v)?,
            "aie" => c.aie = num(n, k, v)?,
            _ => return Err(parse_err(n, format!("unknown key {k:?}"))),
        }
    }
    if !(c.lut > 0.0 && c.bram > 0.0 && c.plio > 0 && c.aie > 0) {
        return Err(parse_err(0, "every budget must be positive"));
    }
    Ok(c)
}

/// RSA key material; `p` and `q` are optional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFile {
    pub modulus: BigUint,
    pub e_pub: Option<BigUint>,
    pub e_prv: Option<BigUint>,
    pub p: Option<BigUint>,
    pub q: Option<BigUint>,
}

/// `modulus`, `e_pub`, `e_prv`, `p`, `q` as `key = hex` lines.
pub fn parse_key(text: &str) -> Result<KeyFile, FormatError> {
    let doc = parse_kv(text)?;
    let mut modulus = None;
    let (mut e_pub, mut e_prv, mut p, mut q) = (None, None, None, None);
    for &(n, k, v) in &doc.pairs {
        let val = parse_hex(v).map_err(|e| parse_err(n, e.to_string()))?;
        match k {
            "modulus" => modulus = Some(val),
            "e_pub" => e_pub = Some(val),
            "e_prv" => e_prv = Some(val),
            "p" => p = Some(val),
            "q" => q = Some(val),
            _ => return Err(parse_err(n, format!("unknown key {k:?}"))),
        }
    }
    Ok(KeyFile {
        modulus: modulus.ok_or_else(|| parse_err(0, "missing modulus"))?,
        e_pub,
        e_prv,
        p,
        q,
    })
}

pub fn format_key(k: &KeyFile) -> String {
    let mut s = format!("modulus = {}\n", to_hex(&k.modulus));
    for (name, v) in [("e_pub", &k.e_pub), ("e_prv", &k.e_prv), ("p", &k.p), ("q", &k.q)] {
        if let Some(v) = v {
            s.push_str(&format!("{name} = {}\n", to_hex(v)));
        }
    }
    s
}

/// DSE ranking, best first.
pub fn write_dse_csv<W: Write>(out: W, result: &DseResult) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "P_intra0",
        "P_intra1",
        "P_inter",
        "S0",
        "S1",
        "bottleneck",
        "tasks_per_s",
        "lut",
        "bram",
        "plio",
        "aie",
    ])?;
    for c in &result.ranked {
        w.write_record([
            c.cfg.p_intra0.to_string(),
            c.cfg.p_intra1.to_string(),
            c.cfg.p_inter.to_string(),
            c.s0.to_string(),
            c.s1.to_string(),
            c.estimate.bottleneck.to_string(),
            format!("{:.1}", c.estimate.tasks_per_second),
            format!("{:.4}", c.usage.lut),
            format!("{:.4}", c.usage.bram),
            c.usage.plio.to_string(),
            c.usage.aie.to_string(),
        ])?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

/// One row per occupied cell: `task,chain,pos,row,col`, where `chain` is the
/// equal-length link after step 1. Pass-through cells carry `kind=pass`.
pub fn write_placement_csv<W: Write>(out: W, p: &PlacementResult) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "chain", "pos", "row", "col", "kind"])?;
    for a in &p.assignments {
        let kind = match a.slot {
            Slot::Chain { .. } => "tile",
            Slot::PassThrough => "pass",
        };
        w.write_record([
            a.task.to_string(),
            a.link.to_string(),
            a.pos.to_string(),
            a.row.to_string(),
            a.col.to_string(),
            kind.to_string(),
        ])?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

/// `kernel,task,iteration,mont,step,start,end`; empty fields where a column
/// does not apply.
pub fn write_trace_csv<W: Write>(out: W, t: &PipelineTrace) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kernel", "task", "iteration", "mont", "step", "start", "end"])?;
    for e in &t.events {
        w.write_record([
            e.kernel.to_string(),
            e.task.to_string(),
            e.iteration.map(|i| i.to_string()).unwrap_or_default(),
            e.mont.to_string(),
            e.step.map(|s| s.to_string()).unwrap_or_default(),
            e.start.to_string(),
            e.end.to_string(),
        ])?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}
