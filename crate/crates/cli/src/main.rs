use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use litmus_axiom::catdsl::{parse_model, ModelDef};
use litmus_axiom::checker::{allowed, CheckConfig, CheckReport, ProgramVerdict, DEFAULT_CANDIDATE_CAP, WORKERS_ENV};
use litmus_axiom::experiment::{bench, generate_sb, write_csv, BenchConfig};
use litmus_axiom::frontend::{parse_litmus_with, EnumConfig, ParseOptions, DEFAULT_UNROLL};
use litmus_axiom::models::{get_model, ModelOptions, BUILTIN_MODELS};
use litmus_axiom::oracle::{run_oracle, OracleConfig, RandomCandidateSpec};

#[derive(Parser)]
#[command(name = "litmus-axiom", version, about = "Axiomatic C11/OpenCL memory-model simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a litmus test against a model.
    Run(RunArgs),
    /// Time N-threaded store buffering and print CSV.
    Bench(BenchArgs),
    /// Check the SC-axiom equivalences on random candidates.
    Oracle(OracleArgs),
    /// Print the N-threaded store-buffering test.
    GenSb {
        #[arg(value_parser = clap::value_parser!(u32).range(2..=10))]
        n: u32,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("which").required(true).args(["model", "cat"]))]
struct RunArgs {
    /// Built-in model name.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_MODELS))]
    model: Option<String>,
    /// Model file in the relational DSL.
    #[arg(long, value_name = "PATH")]
    cat: Option<PathBuf>,
    litmus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_UNROLL)]
    unroll: usize,
    /// Candidate cap per basic execution.
    #[arg(long, default_value_t = DEFAULT_CANDIDATE_CAP)]
    max_candidates: u64,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// One-sided scope inclusion (OpenCL built-ins).
    #[arg(long)]
    new_incl: bool,
    /// Stop at the first faulty candidate.
    #[arg(long)]
    fast: bool,
    #[arg(long)]
    no_prune: bool,
    /// Accept work-item scope.
    #[arg(long)]
    allow_wi: bool,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = ["c11_orig".to_string(), "c11_simp".to_string()])]
    models: Vec<String>,
    #[arg(long, default_value_t = 2)]
    from: usize,
    #[arg(long, default_value_t = 6)]
    to: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Seconds per run.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Enumerate SC orders without shortcuts.
    #[arg(long)]
    no_prune: bool,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 10_000)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Including initial writes.
    #[arg(long, default_value_t = 6)]
    max_events: usize,
    #[arg(long, default_value_t = 5)]
    max_sc: usize,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("bad timeout {s}"))
}

fn load_model(args: &RunArgs) -> Result<ModelDef> {
    let options = ModelOptions { new_incl: args.new_incl };
    match (&args.model, &args.cat) {
        (Some(name), None) => Ok(get_model(name, options)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_model(&text).with_context(|| format!("in {}", path.display()))
        }
        _ => bail!("give exactly one of --model and --cat"),
    }
}

fn csv_report(r: &CheckReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test", "model", "undefined", "outcome", "candidates", "truncated"])?;
    let undefined = (r.verdict == ProgramVerdict::Undefined).to_string();
    let truncated = r.truncated.to_string();
    for (o, n) in &r.outcomes {
        w.write_record([&r.test, &r.model, &undefined, &o.to_string(), &n.to_string(), &truncated])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let m = load_model(&args)?;
    let text = fs::read_to_string(&args.litmus).with_context(|| format!("reading {}", args.litmus.display()))?;
    let p = parse_litmus_with(&text, ParseOptions { allow_wi: args.allow_wi })
        .with_context(|| format!("in {}", args.litmus.display()))?;
    let mut cfg = CheckConfig {
        enumeration: EnumConfig { unroll: args.unroll, ..EnumConfig::default() },
        max_candidates: args.max_candidates,
        fast: args.fast,
        prune: !args.no_prune,
        workers: args.workers,
        deadline: None,
    };
    if let Some(t) = args.timeout {
        cfg = cfg.with_timeout(seconds(t)?);
    }
    let report = allowed(&p, &m, &cfg)?;
    let out = match args.format {
        Format::Text => report.render(),
        Format::Csv => csv_report(&report)?,
    };
    io::stdout().write_all(out.as_bytes())?;
    if report.timed_out {
        eprintln!("timed out; results are partial");
    }
    Ok(match report.verdict {
        ProgramVerdict::Defined => ExitCode::SUCCESS,
        ProgramVerdict::Undefined => ExitCode::from(2),
    })
}

fn run_bench(args: BenchArgs) -> Result<ExitCode> {
    if args.from > args.to {
        bail!("empty thread range {}..={}", args.from, args.to);
    }
    let cfg = BenchConfig {
        models: args.models,
        threads: (args.from..=args.to).collect(),
        repeats: args.repeats,
        timeout: seconds(args.timeout)?,
        prune: !args.no_prune,
        workers: args.workers,
    };
    let rows = bench(&cfg)?;
    match args.output {
        Some(path) => write_csv(&rows, fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run_oracle_cmd(args: OracleArgs) -> Result<ExitCode> {
    let cfg = OracleConfig {
        seeds: args.seeds,
        first_seed: args.first_seed,
        spec: RandomCandidateSpec {
            max_events: args.max_events,
            max_sc: args.max_sc,
            ..RandomCandidateSpec::default()
        },
        workers: args.workers,
    };
    let s = run_oracle(&cfg)?;
    println!("instances {}", s.instances);
    println!("lemma1 violations {}", s.lemma1_violations);
    println!("thm1 violations {}", s.thm1_violations);
    println!("thm2 violations {} (premise held on {})", s.thm2_violations, s.thm2_applicable);
    println!("transcription violations {}", s.transcription_violations);
    println!("violations {}", s.violations());
    println!("throughput {:.1} instances/s", s.throughput());
    let failed: Vec<String> = s.first_failures.iter().flatten().map(u64::to_string).collect();
    if !failed.is_empty() {
        println!("failing seeds {}", failed.join(" "));
    }
    Ok(if s.violations() == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => run_bench(a),
        Command::Oracle(a) => run_oracle_cmd(a),
        Command::GenSb { n } => generate_sb(n as usize)
            .map_err(Into::into)
            .and_then(|t| Ok(io::stdout().write_all(t.as_bytes())?))
            .map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
