use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use preimage_core::bench::{bench, rows_to_text};
use preimage_core::network::{parse_model, Activation, Network};
use preimage_core::preimage::{compute_preimage, compute_symbolic_preimage, BranchBudget, EngineOptions, Preimage};
use preimage_core::random::parse_shape;
use preimage_core::rational::{parse_rational, Rational};
use preimage_core::report;
use preimage_core::verify::{verify, GridSpec, VerificationReport, VerifyOptions};

const EXIT_ERROR: u8 = 1;
const EXIT_EMPTY: u8 = 2;

/// Exact preimages of piecewise-linear networks.
#[derive(Parser)]
#[command(name = "preimage", version)]
struct Cli {
    /// Worker threads for branch resolution (does not affect output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the preimage of a target output.
    Preimage(RunArgs),
    /// Compute the preimage and check it against the network.
    Verify(RunArgs),
    /// Measure branch growth on seeded random networks.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    None,
    Roundtrip,
    Grid,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated rationals, e.g. `3,-1/2,0.25`.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    /// Keep the target symbolic as output variables y0, y1, ...
    #[arg(long, conflicts_with = "target")]
    symbolic: bool,
    /// Check a previously written preimage document instead of computing one.
    #[arg(long, conflicts_with_all = ["target", "symbolic"])]
    preimage: Option<PathBuf>,
    /// Maximum live branches; enumeration stops early and the result is marked partial.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_branches: Option<u64>,
    /// Maximum layer systems solved in total.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_forks: Option<u64>,
    /// Fail instead of returning a partial result when a budget is hit.
    #[arg(long)]
    strict: bool,
    /// Checks to run; `verify` defaults to `roundtrip`, `preimage` to `none`.
    #[arg(long, value_enum)]
    verify: Option<VerifyMode>,
    /// Samples per branch for the round-trip check.
    #[arg(long, default_value_t = 8)]
    samples: usize,
    /// Grid for the completeness check, as `lo:hi:step`.
    #[arg(long, allow_hyphen_values = true, default_value = "-3:3:1/4")]
    grid: String,
    /// Also cross-check every branch's feasibility with the face-enumeration oracle.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Layer shapes such as `2-6-1`; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    shapes: Vec<String>,
    /// Single-hidden-layer shapes `2-w-1` for each width, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    hidden_widths: Vec<usize>,
    /// Hidden activation: `relu`, `prelu:<alpha>` or `identity`.
    #[arg(long, default_value = "relu")]
    activation: String,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_target(text: &str) -> Result<Vec<Rational>> {
    text.split(',')
        .map(|t| {
            let t = t.trim().replace('\u{2212}', "-");
            parse_rational(&t).with_context(|| format!("invalid target component `{t}`"))
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("grid must be `lo:hi:step`, got `{text}`");
    };
    let value = |s: &str| parse_rational(s.trim()).with_context(|| format!("invalid grid bound `{s}`"));
    let grid = GridSpec { lo: value(lo)?, hi: value(hi)?, step: value(step)? };
    if grid.step <= Rational::from_integer(0.into()) || grid.lo > grid.hi {
        bail!("grid `{text}` needs lo <= hi and a positive step");
    }
    Ok(grid)
}

fn parse_activation(text: &str) -> Result<Activation> {
    Ok(match text {
        "relu" => Activation::Relu,
        "identity" => Activation::Identity,
        _ => match text.strip_prefix("prelu:") {
            Some(alpha) => Activation::PRelu { alpha: parse_rational(alpha).context("invalid PReLU alpha")? },
            None => bail!("unknown activation `{text}`"),
        },
    })
}

fn load_model(path: &PathBuf) -> Result<Network> {
    let bytes = fs::read(path).with_context(|| format!("cannot read model {}", path.display()))?;
    parse_model(&bytes).with_context(|| format!("invalid model {}", path.display()))
}

fn emit(output: &OutputArgs, mut text: String) -> Result<()> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn engine_options(args: &RunArgs) -> EngineOptions {
    EngineOptions {
        budget: BranchBudget {
            max_branches: args.max_branches.map(|n| n as usize),
            max_forks: args.max_forks.map(|n| n as usize),
            strict: args.strict,
        },
        ..Default::default()
    }
}

fn compute(args: &RunArgs) -> Result<(Network, Preimage)> {
    let net = load_model(&args.model)?;
    let options = engine_options(args);
    let pre = if let Some(path) = &args.preimage {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        report::parse_preimage(&text, &net)?
    } else if args.symbolic {
        compute_symbolic_preimage(&net, &options)?
    } else {
        let Some(target) = &args.target else {
            bail!("one of --target, --symbolic or --preimage is required");
        };
        compute_preimage(&net, &parse_target(target)?, &options)?
    };
    Ok((net, pre))
}

fn run_checks(args: &RunArgs, mode: VerifyMode, net: &Network, pre: &Preimage) -> Result<VerificationReport> {
    let options = VerifyOptions {
        samples_per_branch: if mode == VerifyMode::None { 0 } else { args.samples },
        seed: args.output.seed,
        grid: (mode == VerifyMode::Grid).then(|| parse_grid(&args.grid)).transpose()?,
        oracle: args.oracle,
        ..Default::default()
    };
    Ok(verify(net, pre, &options))
}

fn cmd_run(args: &RunArgs, default_mode: VerifyMode) -> Result<u8> {
    let mode = args.verify.unwrap_or(default_mode);
    let (net, pre) = compute(args)?;
    let checks = mode != VerifyMode::None || args.oracle;
    let report = checks.then(|| run_checks(args, mode, &net, &pre)).transpose()?;
    let text = match (args.output.format, &report) {
        (Format::Json, None) => report::to_json(&pre),
        (Format::Json, Some(r)) => report::to_json_with_report(&pre, r),
        (Format::Text, None) => report::to_text(&pre),
        (Format::Text, Some(r)) => format!("{}\n{}", report::to_text(&pre), report::report_to_text(r)),
    };
    emit(&args.output, text)?;
    if report.as_ref().is_some_and(|r| !r.passed()) {
        log::error!("verification failed");
        return Ok(EXIT_ERROR);
    }
    // `verify` reports success on an empty preimage when every check passed
    if pre.is_empty() && default_mode == VerifyMode::None {
        return Ok(EXIT_EMPTY);
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let mut shapes = Vec::new();
    for s in &args.shapes {
        shapes.push(parse_shape(s).with_context(|| format!("invalid shape `{s}`"))?);
    }
    shapes.extend(args.hidden_widths.iter().map(|&w| vec![2, w, 1]));
    if shapes.is_empty() {
        bail!("provide --shapes or --hidden-widths");
    }
    let rows = bench(&shapes, args.output.seed, parse_activation(&args.activation)?, &EngineOptions::default())?;
    let text = match args.output.format {
        Format::Json => serde_json::to_string_pretty(&rows)?,
        Format::Text => rows_to_text(&rows),
    };
    emit(&args.output, text)?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PREIMAGE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let result = match &cli.command {
        Command::Preimage(args) => cmd_run(args, VerifyMode::None),
        Command::Verify(args) => cmd_run(args, VerifyMode::Roundtrip),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
