//! `retrowpt`: parameter sweeps to CSV, the validation suite, and a few
//! inspection helpers.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or configuration
//! error.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use retrowpt_core::experiments::{
    run_sweep, to_csv, validate, PathSelection, SweepSpec, SweepVariable,
};
use retrowpt_core::{
    gen_balanced_pattern, gen_msequence, gen_pn, load_config_file, walsh_hadamard_row,
    BalancedPattern, InterferenceReference, RunOptions, Scenario, SegmentWalker, Substream,
    SystemParams, TrialSeed,
};

#[derive(Parser, Debug)]
#[command(
    name = "retrowpt",
    version,
    about = "Retrodirective power transfer with ambient-backscatter training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep one parameter and write a CSV of average harvested power.
    Sweep(SweepArgs),
    /// Run the self-check suite.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Repeat with this many consecutive seeds.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Flip one chip of every balanced sequence in the cancellation check.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Print a training sequence as one CSV row of +1/-1.
    DumpSequence(DumpArgs),
    /// Print the breakpoint partition used by the waveform correlator.
    Breakpoints {
        #[arg(long)]
        nc: usize,
        /// Chip duration (s).
        #[arg(long)]
        tc: f64,
        /// Actual symbol duration (s).
        #[arg(long)]
        ts: f64,
        /// Replica lag (s).
        #[arg(long, default_value_t = 0.0)]
        t_off: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variable {
    Tb,
    Ps,
    M,
    Offset,
    Mismatch,
    #[value(name = "interference_db")]
    InterferenceDb,
}

impl From<Variable> for SweepVariable {
    fn from(v: Variable) -> Self {
        match v {
            Variable::Tb => SweepVariable::Tb,
            Variable::Ps => SweepVariable::Ps,
            Variable::M => SweepVariable::M,
            Variable::Offset => SweepVariable::Offset,
            Variable::Mismatch => SweepVariable::Mismatch,
            Variable::InterferenceDb => SweepVariable::InterferenceDb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    Pn,
    Balanced,
    Offset,
    Interference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PathArg {
    Exact,
    Asymptotic,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceArg {
    #[value(name = "direct_link")]
    DirectLink,
    #[value(name = "backscatter_link")]
    BackscatterLink,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    variable: Variable,
    /// Base parameters; without it a default deployment for the sweep is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, value_enum, default_value_t = PathArg::Both)]
    path: PathArg,
    /// Scenario for tb, ps and m sweeps; the others imply their own.
    #[arg(long, value_enum, default_value_t = ScenarioArg::Balanced)]
    scenario: ScenarioArg,
    /// Comma-separated sweep values in SI units (dB for interference_db).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Re-derive nc and tc so every symbol spans this many chips.
    #[arg(long)]
    chips_per_symbol: Option<usize>,
    /// Power the interference ratio is measured against.
    #[arg(long, value_enum, default_value_t = ReferenceArg::BackscatterLink)]
    interference_reference: ReferenceArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SequenceArg {
    Pn,
    Balanced,
    Alternating,
    Hadamard,
    Msequence,
}

#[derive(clap::Args, Debug)]
struct DumpArgs {
    #[arg(long, value_enum, default_value_t = SequenceArg::Balanced)]
    kind: SequenceArg,
    /// Symbols per backscatter phase (balanced kinds).
    #[arg(long, default_value_t = 1)]
    ns: usize,
    #[arg(long, default_value_t = 2)]
    chips_per_symbol: usize,
    /// Chip count (pn, msequence) or order (hadamard).
    #[arg(long, default_value_t = 16)]
    nc: usize,
    /// Hadamard row.
    #[arg(long, default_value_t = 1)]
    row: usize,
    /// LFSR degree.
    #[arg(long, default_value_t = 4)]
    degree: u32,
    /// Seed and trial index for pn chips.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn balanced_base(ns: usize, k: usize, ts: f64) -> SystemParams {
    let mut p = SystemParams::with_defaults(ns, ns * k);
    p.ts = ts;
    p.tc = ts / k as f64;
    p
}

/// Default deployment and grid for each sweep when no config or values are given.
fn defaults(variable: Variable, scenario: ScenarioArg) -> (SystemParams, Vec<f64>) {
    let us = |n: f64| n * 1e-6;
    match variable {
        Variable::Tb => {
            let base = match scenario {
                ScenarioArg::Pn => SystemParams::with_defaults(1, 10),
                _ => balanced_base(1, 2, 5e-6),
            };
            (base, (1..=40).map(|n| us(5.0 * n as f64)).collect())
        }
        Variable::Ps => (
            balanced_base(4, 2, 5e-6),
            vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
        ),
        Variable::M => (
            balanced_base(4, 2, 5e-6),
            vec![50.0, 100.0, 200.0, 500.0, 1000.0],
        ),
        Variable::Offset => {
            let base = balanced_base(4, 2, 5e-6);
            let tc = base.tc;
            (base, (0..16).map(|i| i as f64 * tc / 8.0).collect())
        }
        Variable::Mismatch => (
            balanced_base(10, 2, 20e-6),
            (6..=15).map(f64::from).collect(),
        ),
        Variable::InterferenceDb => (
            balanced_base(4, 2, 20e-6),
            (0..=6).map(|i| 20.0 + 5.0 * i as f64).collect(),
        ),
    }
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing to stdout"),
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let (default_base, default_values) = defaults(args.variable, args.scenario);
    let (base, harvester) = match &args.config {
        Some(path) => {
            load_config_file(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => (default_base, Default::default()),
    };
    let mut spec = SweepSpec::new(
        args.variable.into(),
        args.values.clone().unwrap_or(default_values),
        base,
    );
    spec.harvester = harvester;
    spec.scenario = match args.scenario {
        ScenarioArg::Pn => Scenario::Pn,
        ScenarioArg::Balanced => Scenario::Balanced,
        ScenarioArg::Offset => Scenario::Offset,
        ScenarioArg::Interference => Scenario::Interference,
    };
    spec.paths = match args.path {
        PathArg::Exact => PathSelection::Exact,
        PathArg::Asymptotic => PathSelection::Asymptotic,
        PathArg::Both => PathSelection::Both,
    };
    spec.trials = args.trials;
    spec.seed = args.seed;
    spec.chips_per_symbol = args.chips_per_symbol;
    spec.interference_reference = match args.interference_reference {
        ReferenceArg::DirectLink => InterferenceReference::DirectLink,
        ReferenceArg::BackscatterLink => InterferenceReference::BackscatterLink,
    };
    let rows = run_sweep(
        &spec,
        &RunOptions {
            workers: args.workers,
            noise_free: false,
        },
    )?;
    write_out(args.out.as_ref(), &to_csv(&spec, &rows))
}

fn dump(args: &DumpArgs) -> Result<()> {
    let tc = 1.0;
    let seq = match args.kind {
        SequenceArg::Pn => gen_pn(
            args.nc,
            tc,
            &mut TrialSeed::new(args.seed, args.trial).stream(Substream::Chips),
        )?,
        SequenceArg::Balanced => gen_balanced_pattern(
            args.ns,
            args.chips_per_symbol,
            tc,
            BalancedPattern::ContiguousHalves,
        )?,
        SequenceArg::Alternating => gen_balanced_pattern(
            args.ns,
            args.chips_per_symbol,
            tc,
            BalancedPattern::Alternating,
        )?,
        SequenceArg::Hadamard => walsh_hadamard_row(args.nc, args.row, tc)?,
        SequenceArg::Msequence => gen_msequence(args.degree, args.nc, tc)?,
    };
    write_out(args.out.as_ref(), &seq.to_csv_row())
}

fn breakpoints(nc: usize, tc: f64, ts: f64, t_off: f64) -> Result<()> {
    let mut out = String::from("start_s,end_s,chip,replica_chip,symbol\n");
    for s in SegmentWalker::new(nc, tc, t_off, ts)? {
        out.push_str(&format!(
            "{:.8e},{:.8e},{},{},{}\n",
            s.start, s.end, s.chip, s.replica_chip, s.symbol
        ));
    }
    write_out(None, &out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep(args) => sweep(&args)?,
        Command::Validate {
            seed,
            seeds,
            inject_fault,
        } => {
            if seeds == 0 {
                bail!("--seeds must be >= 1");
            }
            let mut all_passed = true;
            for s in seed..seed + seeds {
                let report = validate(s, inject_fault);
                println!("# seed {s}");
                print!("{report}");
                all_passed &= report.passed();
            }
            println!(
                "{}",
                if all_passed {
                    "validation passed"
                } else {
                    "validation FAILED"
                }
            );
            if !all_passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::DumpSequence(args) => dump(&args)?,
        Command::Breakpoints { nc, tc, ts, t_off } => breakpoints(nc, tc, ts, t_off)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
