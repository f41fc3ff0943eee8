// SPDX-License-Identifier: Apache-2.0

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aim::formats::{self, KeyFile};
use aim::parallel::{multiply_parallel, render_threaded};
use aim::pgm::encode_pgm;
use aim::report::RunReport;
use aim_core::engine::karatsuba::karatsuba_mul;
use aim_core::mandelbrot::{fp_from_decimal, render, ViewPort};
use aim_core::perf::{dse_search, PerfError, ProfileData, ResourceCaps};
use aim_core::placement::{
    place, plan_broadcast, validate_placement, LogicalArray, PhysicalGrid, PlacementError,
};
use aim_core::rsa::{
    keygen_check, mod_exp_const_time, rsa_pipeline_sim, MontgomeryContext, PipelineTiming,
};
use aim_core::{ArrayConfig, Engine, Scratch};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "aim", version, about = "Tiled arbitrary-precision multiplication")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply operand files line by line.
    Mul(MulArgs),
    /// Time the engine on seeded random operands.
    Bench(BenchArgs),
    /// Rank array configurations under resource caps.
    Dse(DseArgs),
    /// Map cascade chains onto the physical tile grid.
    Place(PlaceArgs),
    /// Modular exponentiation with a key file.
    Rsa(RsaArgs),
    /// Render a fixed-point Mandelbrot view to PGM.
    Mandelbrot(MandelArgs),
}

#[derive(Args)]
struct Tiling {
    #[arg(long, default_value_t = 1)]
    intra0: usize,
    #[arg(long, default_value_t = 1)]
    intra1: usize,
}

#[derive(Args)]
struct MulArgs {
    #[arg(long)]
    bits: u32,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    tiling: Tiling,
    #[arg(long)]
    out: PathBuf,
    /// Cross-check every product against the Karatsuba oracle.
    #[arg(long)]
    verify: bool,
    /// Run the cascade chains of each product on the thread pool.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    bits: u32,
    #[arg(long, default_value_t = 100)]
    tasks: usize,
    #[command(flatten)]
    tiling: Tiling,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct DseArgs {
    #[arg(long)]
    bits: u32,
    #[arg(long)]
    caps: Option<PathBuf>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlaceArgs {
    /// Uniform chains: how many per task.
    #[arg(long, requires = "length", conflicts_with = "bits")]
    chains: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    /// Chains of a real tiling: operand width.
    #[arg(long)]
    bits: Option<u32>,
    #[command(flatten)]
    tiling: Tiling,
    #[arg(long, default_value_t = 1)]
    tasks: usize,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    cols: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Text picture of the occupied grid.
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct RsaArgs {
    #[arg(value_parser = ["encrypt", "decrypt"])]
    op: String,
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tiling: Tiling,
    /// Kernel timeline of the batch as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Calibration profile for trace slot lengths; unit slots otherwise.
    #[arg(long, requires = "trace")]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct MandelArgs {
    #[arg(long, allow_hyphen_values = true)]
    center_re: String,
    #[arg(long, allow_hyphen_values = true)]
    center_im: String,
    #[arg(long)]
    scale: String,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    frac_bits: u32,
    #[arg(long, default_value_t = 100)]
    max_iter: u32,
    #[arg(long)]
    out: PathBuf,
    /// Logical divergence-test slots for the makespan figure.
    #[arg(long, default_value_t = 1)]
    slots: usize,
    /// Worker threads; above 1 the makespan is not reported.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

enum Failure {
    Input(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }
}

fn input<E: Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

type Outcome = Result<RunReport, Failure>;

fn write_out(path: &Path, bytes: &[u8], name: &str, rep: &mut RunReport) -> Result<(), Failure> {
    formats::write_bytes(path, bytes).map_err(input)?;
    rep.checksum(name, bytes);
    Ok(())
}

fn engine(bits: u32, t: &Tiling) -> Result<Engine, Failure> {
    let cfg = ArrayConfig::new(bits, 1, t.intra0, t.intra1).map_err(input)?;
    Engine::new(cfg).map_err(input)
}

fn cmd_mul(args: MulArgs) -> Outcome {
    let a = formats::read_operands(&args.a).map_err(input)?;
    let b = formats::read_operands(&args.b).map_err(input)?;
    if a.len() != b.len() {
        return Err(Failure::Input(format!(
            "operand files hold {} and {} values",
            a.len(),
            b.len()
        )));
    }
    let e = engine(args.bits, &args.tiling)?;
    let mut scratch = Scratch::new();
    let mut products = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(&b) {
        let p = if args.parallel {
            multiply_parallel(&e, x, y)
        } else {
            e.multiply_with(x, y, &mut scratch)
        }
        .map_err(input)?;
        if args.verify && p != karatsuba_mul(x, y) {
            return Err(Failure::Input("product disagrees with the oracle".into()));
        }
        products.push(p);
    }
    let mut rep = RunReport::new("mul");
    rep.param("bits", args.bits)
        .param("intra0", args.tiling.intra0)
        .param("intra1", args.tiling.intra1)
        .param("verify", args.verify);
    let s = e.stats();
    rep.counter("multiplications", s.multiplications)
        .counter("products", s.products)
        .counter("mac_instructions", s.mac_instructions);
    write_out(&args.out, formats::format_operands(&products).as_bytes(), "out", &mut rep)?;
    Ok(rep)
}

fn random_operand(rng: &mut ChaCha8Rng, bits: u32) -> BigUint {
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    BigUint::from_bytes_le(&bytes) % (BigUint::from(1u32) << bits)
}

fn cmd_bench(args: BenchArgs) -> Outcome {
    let e = engine(args.bits, &args.tiling)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pairs: Vec<_> = (0..args.tasks)
        .map(|_| (random_operand(&mut rng, args.bits), random_operand(&mut rng, args.bits)))
        .collect();
    let mut scratch = Scratch::new();
    let mut digest = Vec::new();
    let start = Instant::now();
    for (x, y) in &pairs {
        let p = e.multiply_with(x, y, &mut scratch).map_err(input)?;
        digest.extend(p.to_bytes_le());
    }
    let secs = start.elapsed().as_secs_f64();
    let mut rep = RunReport::new("bench");
    rep.param("bits", args.bits)
        .param("tasks", args.tasks)
        .param("intra0", args.tiling.intra0)
        .param("intra1", args.tiling.intra1)
        .param("seed", args.seed);
    let s = e.stats();
    rep.counter("multiplications", s.multiplications)
        .counter("products", s.products)
        .counter("planned_products_per_task", e.grid().planned_products())
        .counter("mac_instructions", s.mac_instructions)
        .note("tasks_per_s", format!("{:.3}", args.tasks as f64 / secs.max(1e-12)))
        .checksum("products", &digest);
    Ok(rep)
}

fn cmd_dse(args: DseArgs) -> Outcome {
    let caps = match &args.caps {
        Some(p) => formats::parse_caps(&formats::read_text(p).map_err(input)?).map_err(input)?,
        None => ResourceCaps::default(),
    };
    let prof = match &args.profile {
        Some(p) => formats::parse_profile(&formats::read_text(p).map_err(input)?).map_err(input)?,
        None => ProfileData::default(),
    };
    let result = match dse_search(args.bits, &caps, &prof) {
        Ok(r) => r,
        Err(PerfError::NoFeasible) => {
            return Err(Failure::Infeasible(PerfError::NoFeasible.to_string()))
        }
        Err(e) => return Err(input(e)),
    };
    let Some(best) = result.best() else {
        return Err(Failure::Infeasible(PerfError::NoFeasible.to_string()));
    };
    let mut rep = RunReport::new("dse");
    rep.param("bits", args.bits)
        .param("eff_mode", prof.eff_mode)
        .param("caps", format!("lut={} bram={} plio={} aie={}", caps.lut, caps.bram, caps.plio, caps.aie))
        .counter("candidates", result.ranked.len() as u64)
        .note(
            "best",
            format!(
                "P_intra={}x{} P_inter={} tasks_per_s={:.1} bottleneck={}",
                best.cfg.p_intra0,
                best.cfg.p_intra1,
                best.cfg.p_inter,
                best.estimate.tasks_per_second,
                best.estimate.bottleneck
            ),
        );
    let mut csv = Vec::new();
    formats::write_dse_csv(&mut csv, &result).map_err(input)?;
    write_out(&args.out, &csv, "csv", &mut rep)?;
    Ok(rep)
}

fn cmd_place(args: PlaceArgs) -> Outcome {
    let mut rep = RunReport::new("place");
    let logical = match (args.chains, args.length, args.bits) {
        (Some(c), Some(l), None) => {
            rep.param("chains", c).param("length", l);
            LogicalArray::uniform(c, l, args.tasks)
        }
        (None, None, Some(bits)) => {
            let e = engine(bits, &args.tiling)?;
            rep.param("bits", bits)
                .param("intra0", args.tiling.intra0)
                .param("intra1", args.tiling.intra1);
            let cfg = ArrayConfig::new(bits, args.tasks, args.tiling.intra0, args.tiling.intra1)
                .map_err(input)?;
            let plio = plan_broadcast(&cfg);
            rep.counter("plio", plio.total_plio as u64);
            LogicalArray::from_grid(e.grid(), args.tasks)
        }
        _ => return Err(Failure::Input("give --chains and --length, or --bits".into())),
    };
    rep.param("tasks", args.tasks)
        .param("grid", format!("{}x{}", args.rows, args.cols));
    let grid = PhysicalGrid::new(args.rows, args.cols);
    let placed = match place(&logical, &grid) {
        Ok(p) => p,
        Err(e @ PlacementError::Empty) => return Err(input(e)),
        Err(e) => return Err(Failure::Infeasible(e.to_string())),
    };
    let violations = validate_placement(&placed, &grid);
    rep.counter("cells", placed.occupied_count() as u64)
        .counter("link_length", placed.link_length as u64)
        .counter("links_per_task", placed.links_per_task as u64)
        .counter("violations", violations.len() as u64)
        .note("layout", format!("{:?}", placed.layout));
    if let Some(path) = &args.out {
        let mut csv = Vec::new();
        formats::write_placement_csv(&mut csv, &placed).map_err(input)?;
        write_out(path, &csv, "csv", &mut rep)?;
    }
    if let Some(path) = &args.grid {
        write_out(path, placed.to_text_grid(&grid).as_bytes(), "grid", &mut rep)?;
    }
    Ok(rep)
}

fn check_key(key: &KeyFile) -> Result<(), Failure> {
    let (Some(p), Some(q)) = (&key.p, &key.q) else {
        return Ok(());
    };
    if p * q != key.modulus {
        return Err(Failure::Infeasible("key check failed: p * q != modulus".into()));
    }
    if let (Some(e_pub), Some(e_prv)) = (&key.e_pub, &key.e_prv) {
        keygen_check(p, q, e_pub, e_prv)
            .map_err(|v| Failure::Infeasible(format!("key check failed: {v}")))?;
    }
    Ok(())
}

fn cmd_rsa(args: RsaArgs) -> Outcome {
    let key = formats::parse_key(&formats::read_text(&args.key).map_err(input)?).map_err(input)?;
    check_key(&key)?;
    let (exponent, name) = if args.op == "encrypt" {
        (key.e_pub.as_ref(), "e_pub")
    } else {
        (key.e_prv.as_ref(), "e_prv")
    };
    let exponent = exponent.ok_or_else(|| Failure::Input(format!("key file has no {name}")))?;
    let inputs = formats::read_operands(&args.input).map_err(input)?;
    let k = key.modulus.bits() as u32;
    let ctx = MontgomeryContext::with_array(key.modulus.clone(), k, args.tiling.intra0, args.tiling.intra1)
        .map_err(input)?;
    let mut rep = RunReport::new("rsa");
    rep.param("op", &args.op)
        .param("modulus_bits", k)
        .param("intra0", args.tiling.intra0)
        .param("intra1", args.tiling.intra1)
        .counter("messages", inputs.len() as u64);
    let outputs = if let Some(trace_path) = &args.trace {
        let timing = match &args.profile {
            Some(p) => {
                let prof = formats::parse_profile(&formats::read_text(p).map_err(input)?)
                    .map_err(input)?;
                PipelineTiming::from_profile(ctx.engine().config(), &prof).map_err(input)?
            }
            None => PipelineTiming::default(),
        };
        let run = rsa_pipeline_sim(&inputs, exponent, &ctx, timing).map_err(input)?;
        rep.counter("trace_span", run.trace.span)
            .note("multiplier_busy", format!("{:.4}", run.trace.busy_fraction()));
        let mut csv = Vec::new();
        formats::write_trace_csv(&mut csv, &run.trace).map_err(input)?;
        write_out(trace_path, &csv, "trace", &mut rep)?;
        run.outputs
    } else {
        inputs
            .iter()
            .map(|m| mod_exp_const_time(m, exponent, &ctx))
            .collect::<Result<Vec<_>, _>>()
            .map_err(input)?
    };
    rep.counter("mont_muls", ctx.multiplications() / 3)
        .counter("engine_multiplications", ctx.multiplications());
    write_out(&args.out, formats::format_operands(&outputs).as_bytes(), "out", &mut rep)?;
    Ok(rep)
}

fn cmd_mandelbrot(args: MandelArgs) -> Outcome {
    let f = args.frac_bits;
    let vp = ViewPort {
        center_re: fp_from_decimal(&args.center_re, f).map_err(input)?,
        center_im: fp_from_decimal(&args.center_im, f).map_err(input)?,
        scale: fp_from_decimal(&args.scale, f).map_err(input)?,
        width: args.width,
        height: args.height,
    };
    let (map, stats) = if args.threads > 1 {
        render_threaded(&vp, f, args.max_iter, args.threads)
    } else {
        render(&vp, f, args.max_iter, args.slots)
    }
    .map_err(input)?;
    let mut rep = RunReport::new("mandelbrot");
    rep.param("center_re", &args.center_re)
        .param("center_im", &args.center_im)
        .param("scale", &args.scale)
        .param("size", format!("{}x{}", args.width, args.height))
        .param("frac_bits", f)
        .param("max_iter", args.max_iter)
        .param("threads", args.threads)
        .param("slots", args.slots)
        .counter("multiplications", stats.multiplications)
        .counter("iterations", stats.iterations);
    if args.threads <= 1 {
        rep.counter("makespan", stats.makespan);
    }
    write_out(&args.out, &encode_pgm(&map), "pgm", &mut rep)?;
    Ok(rep)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match cli.cmd {
        Command::Mul(a) => cmd_mul(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Dse(a) => cmd_dse(a),
        Command::Place(a) => cmd_place(a),
        Command::Rsa(a) => cmd_rsa(a),
        Command::Mandelbrot(a) => cmd_mandelbrot(a),
    };
    match result {
        Ok(mut rep) => {
            rep.wall_time_s = start.elapsed().as_secs_f64();
            print!("{}", rep.to_toml());
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (Failure::Input(msg) | Failure::Infeasible(msg)) = &f;
            eprintln!("aim: {msg}");
            ExitCode::from(f.code())
        }
    }
}
