use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ristrainlab::experiments::{self, ConfigFile, ExperimentSpec, Protocol, PRESET_IDS};
use ristrainlab::numerics::RngStream;
use ristrainlab::theory;

const THREADS_ENV: &str = "RISTRAINLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "ristrainlab",
    version,
    about = "RIS channel training experiments and closed-form laws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write one CSV row per trial.
    Run(RunArgs),
    /// Evaluate a closed-form law over a range of Q.
    Theory(TheoryArgs),
    /// List the figure presets.
    ListPresets,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Figure preset, e.g. fig12.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the preset's protocol.
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; RISTRAINLAB_THREADS takes precedence.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryOp {
    /// E[max of Q cosines of uniform phases].
    G,
    /// Mean cosine of the best equi-partition period.
    Equipartition,
    /// Monte Carlo estimate of g(Q) with its 3σ half-width.
    Oracle,
}

#[derive(clap::Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    op: TheoryOp,
    /// A single Q, a list `1,2,4` or an inclusive range `1..16`.
    #[arg(long)]
    q: String,
    /// Samples per Q for the oracle.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_q(text: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range {text}");
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad Q value {s:?}"))
        })
        .collect()
}

fn threads(flag: usize) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}={v:?} is not a count")),
        Err(_) => Ok(flag),
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match (&args.preset, &args.config) {
        (Some(id), None) => experiments::preset(id)?,
        (None, Some(path)) => ConfigFile::load(path)
            .and_then(|c| c.to_spec())
            .with_context(|| format!("reading {}", path.display()))?,
        _ => bail!("give either --preset or --config"),
    };
    if let Some(p) = args.protocol {
        spec.protocol = p;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(args: RunArgs) -> Result<()> {
    let spec = build_spec(&args)?;
    let records = experiments::run_experiment(&spec, threads(args.threads)?)?;
    let name = spec.sweep.var.name();
    match &args.out {
        Some(path) => experiments::emit_csv(&records, name, path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => experiments::write_csv(&records, name, std::io::stdout().lock())?,
    }
    let infeasible = records.iter().filter(|r| !r.feasible).count();
    if infeasible > 0 {
        eprintln!("{infeasible} of {} trials infeasible", records.len());
    }
    Ok(())
}

fn theory_cmd(args: TheoryArgs) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match args.op {
        TheoryOp::Oracle => writeln!(out, "q,value,halfwidth")?,
        _ => writeln!(out, "q,value")?,
    }
    for q in parse_q(&args.q)? {
        match args.op {
            TheoryOp::G => writeln!(out, "{q},{:.12}", theory::g_of_q(q)?)?,
            TheoryOp::Equipartition => {
                writeln!(out, "{q},{:.12}", theory::equipartition_mean_cos(q)?)?
            }
            TheoryOp::Oracle => {
                let mut rng = RngStream::for_purpose(args.seed, q as u64, "oracle");
                let (mean, hw) = theory::mean_max_cos_oracle(q, args.samples, &mut rng)?;
                writeln!(out, "{q},{mean:.9},{hw:.3e}")?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Theory(args) => theory_cmd(args),
        Command::ListPresets => {
            for id in PRESET_IDS {
                println!("{id:<6} {}", experiments::describe(id)?);
            }
            Ok(())
        }
    }
}
