//! Argument parsing and dispatch for the `polarlab` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use polarlab_core::exec::Executor;

use crate::exec::{resolve_threads, Pool};
use crate::formats::{AppError, AppResult};
use crate::runners;

pub const DEFAULT_SEED: u64 = 0xC0DE;

/// Accepts decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => t.parse::<u64>(),
    };
    r.map_err(|e| format!("bad seed {s:?}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "polarlab", version, about = "Polar-coding laboratory: channels, kernels, codes, regions and rate splitting")]
pub struct Cli {
    /// Seed for every Monte Carlo stream (decimal or 0x-hex).
    #[arg(long, global = true, value_parser = parse_seed, default_value = "0xC0DE")]
    pub seed: u64,
    /// Worker threads; falls back to POLARLAB_THREADS, then the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameters and tolls of a channel file.
    Channel(ChannelArgs),
    /// One kernel step: the synthetic channels of a channel file.
    Transform(TransformArgs),
    /// Kernel analysis and random kernels.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Polarization process statistics per depth (CSV).
    Process(ProcessArgs),
    /// Build a code description, or sweep pruned constructions (CSV).
    Construct(ConstructArgs),
    /// Monte Carlo frame error rate of a code (CSV).
    Sim(SimArgs),
    /// Moderate-deviation region boundary (CSV).
    Region(RegionArgs),
    /// Erasure scaling exponent of a kernel.
    Scaling(ScalingArgs),
    /// Rate-splitting tools for multiterminal sources.
    #[command(subcommand)]
    Sw(SwCmd),
}

#[derive(Debug, Clone, Args)]
pub struct MergeCap {
    /// Output-alphabet cap for degrading merges; 0 disables merging.
    #[arg(long = "merge-cap", default_value_t = 512)]
    pub merge_cap: usize,
}

impl MergeCap {
    pub fn cap(&self) -> Option<usize> {
        (self.merge_cap > 0).then_some(self.merge_cap)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    pub file: String,
    #[command(flatten)]
    pub merge: MergeCap,
    /// Replace the channel by its symmetrized version first.
    #[arg(long)]
    pub symmetrize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    pub file: String,
    /// Kernel file or built-in name (arikan, g_ye, g_barg).
    #[arg(long)]
    pub kernel: String,
    #[command(flatten)]
    pub merge: MergeCap,
}

#[derive(Debug, Clone, Subcommand)]
pub enum KernelCmd {
    /// Distances, enumerators, ergodicity and distance statistics.
    Analyze {
        /// Kernel file or built-in name.
        kernel: String,
    },
    /// A uniformly random invertible kernel.
    Sample {
        #[arg(long)]
        size: usize,
        /// Field order.
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ProcessArgs {
    pub channel: String,
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub depth: usize,
    /// Sampled paths; exact enumeration when absent.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Stop paths at Z or S below theta.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Track the input law as a second channel (stopped mode).
    #[arg(long = "asym-q")]
    pub asym_q: bool,
    #[command(flatten)]
    pub merge: MergeCap,
}

#[derive(Debug, Clone, Args)]
pub struct ConstructArgs {
    pub channel: String,
    #[arg(long)]
    pub kernel: String,
    #[arg(long, required_unless_present = "sweep")]
    pub depth: Option<usize>,
    /// Pruned code with this stopping threshold (default 1/(3 q N^2)).
    #[arg(long, conflicts_with_all = ["top_k", "threshold"])]
    pub theta: Option<f64>,
    /// Full code with the K best positions.
    #[arg(long = "top-k", conflicts_with = "threshold")]
    pub top_k: Option<usize>,
    /// Full code keeping positions with Z below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Asymmetric pruned construction against the channel's input law.
    #[arg(long = "asym-q", conflicts_with_all = ["top_k", "threshold"])]
    pub asym_q: bool,
    /// Depth list for a pruned tradeoff sweep, e.g. "2,4,6" or "2..6".
    #[arg(long)]
    pub sweep: Option<String>,
    /// Theta family for sweeps: pow4, exp:TAU, elpin:PI or default.
    #[arg(long, default_value = "default")]
    pub family: String,
    #[command(flatten)]
    pub merge: MergeCap,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub channel: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Trials per reported block.
    #[arg(long, default_value_t = 1000)]
    pub block: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub rho0: f64,
    /// Binary-profile Cramér function.
    #[arg(long, conflicts_with = "profile")]
    pub binary: bool,
    /// Kernel file (its coset distances) or "binary".
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[arg(long)]
    pub kernel: String,
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SwCmd {
    /// Compressor duties of a knob distribution.
    Duty {
        #[arg(long)]
        source: String,
        /// Two sources: P{Q = 2}.
        #[arg(long, conflicts_with_all = ["row", "weights"])]
        p2: Option<f64>,
        /// Three sources: a deterministic table row (123, 132, 312a, ...).
        #[arg(long, conflicts_with = "weights")]
        row: Option<String>,
        /// Three sources: eight comma-separated row weights.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Knob distribution reaching a target rate tuple on the dominant face.
    Solve {
        #[arg(long)]
        source: String,
        /// Comma-separated rates, one per source.
        #[arg(long, allow_negative_numbers = true)]
        target: String,
    },
    /// Region membership of a rate tuple.
    Check {
        #[arg(long)]
        source: String,
        #[arg(long, allow_negative_numbers = true)]
        rates: String,
        /// Helper description {"channel": [[...]], "rate": R}.
        #[arg(long)]
        helper: Option<String>,
    },
}

/// Primary output of `command`.
pub fn execute<E: Executor>(command: &Command, seed: u64, exec: &E) -> AppResult<String> {
    match command {
        Command::Channel(a) => runners::channel(a, seed),
        Command::Transform(a) => runners::transform(a, seed),
        Command::Kernel(KernelCmd::Analyze { kernel }) => runners::kernel_analyze(kernel, seed),
        Command::Kernel(KernelCmd::Sample { size, q, index }) => runners::kernel_sample(*size, *q, *index, seed),
        Command::Process(a) => runners::process(a, seed, exec),
        Command::Construct(a) => runners::construct(a, seed, exec),
        Command::Sim(a) => runners::sim(a, seed, exec),
        Command::Region(a) => runners::region(a, seed),
        Command::Scaling(a) => runners::scaling(a, seed),
        Command::Sw(c) => runners::sw(c, seed),
    }
}

fn progress_label(c: &Command) -> Option<&'static str> {
    match c {
        Command::Process(_) => Some("process"),
        Command::Construct(_) => Some("construct"),
        Command::Sim(_) => Some("sim"),
        _ => None,
    }
}

/// Parses `args` (program name first), runs, writes output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("polarlab: {e}");
            e.exit_code()
        }
    }
}

fn run_cli(cli: &Cli) -> AppResult<()> {
    let threads = resolve_threads(cli.threads).map_err(AppError::Input)?;
    let mut pool = Pool::new(threads).map_err(AppError::Compute)?;
    if let Some(label) = progress_label(&cli.command) {
        pool = pool.with_progress(label);
    }
    let text = execute(&cli.command, cli.seed, &pool)?;
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| AppError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| AppError::Compute(e.to_string()))
        }
    }
}
