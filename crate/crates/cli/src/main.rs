//! `qka`: run single sessions, the two-bit collusion demonstration, and
//! Monte Carlo sweeps.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 session aborted,
//! 3 attack infeasible under the chosen schedule, 4 demonstration mismatch,
//! 5 session completed without key agreement.

mod demo;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qka_core::adversary::{AdversaryConfig, CollusionMode};
use qka_core::experiment::{run_experiment, ExperimentError, ExperimentSpec, ExperimentSummary, Sweep};
use qka_core::protocol::{
    run_session, AnnounceOrder, PartyId, PartySecrets, PerParty, SessionConfig, SessionError, SessionStatus,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_ABORT: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;
pub const EXIT_DISAGREEMENT: u8 = 5;

pub const CSV_HEADER: [&str; 8] = [
    "n",
    "adversary",
    "trials",
    "aborts",
    "abort_rate",
    "attack_successes",
    "agreement_rate",
    "mean_decoy_failure_rate",
];

#[derive(Debug, Parser)]
#[command(name = "qka", version, about = "Three-party Bell-state key agreement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one session and print its transcript as JSON.
    Run(RunArgs),
    /// Replay the two-bit collusion example and check every intermediate value.
    AttackDemo(DemoArgs),
    /// Run many seeded sessions per grid point and print summary statistics.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Base RNG seed.
    #[arg(long, env = "QKA_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest tolerated fraction of failed decoy pairs per hop.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    /// Decoy pairs per hop (default n/2).
    #[arg(long)]
    decoy_pairs: Option<usize>,
    /// `none`, `eve`, `collusion`, `collusion-delta`, or a JSON adversary object.
    #[arg(long, default_value = "none")]
    adversary: String,
    /// `default`, `simultaneous`, or batches such as `R_B,R_A,R_C,P_A+P_B+P_C`.
    #[arg(long, default_value = "default")]
    announce_order: String,
    /// Write output here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Message length in bits; must be even.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Exact secrets as `KA:RA,KB:RB,KC:RC`, e.g. `11:00,10:01,00:11`.
    #[arg(long)]
    force_secrets: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Key the colluders force onto Bob.
    #[arg(long, default_value = "11")]
    target: String,
    #[arg(long, env = "QKA_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the session transcript JSON here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    /// Message lengths, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Intercept-resend fractions to sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    fraction: Option<Vec<f64>>,
    /// Tolerances to sweep, comma-separated.
    #[arg(long = "tolerances", value_delimiter = ',')]
    tolerances: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::AttackInfeasible(_) => Failure {
                code: EXIT_INFEASIBLE,
                message: e.to_string(),
            },
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Trial { source, .. } => source.into(),
            invalid => Failure::usage(invalid.to_string()),
        }
    }
}

fn parse_adversary(spec: &str) -> Result<AdversaryConfig, Failure> {
    match spec.trim() {
        "none" => Ok(AdversaryConfig::None),
        "eve" => Ok(AdversaryConfig::intercept(PartyId::A, 0, 1.0)),
        "collusion" => Ok(AdversaryConfig::collusion(CollusionMode::Absolute { target_key: None })),
        "collusion-delta" => Ok(AdversaryConfig::collusion(CollusionMode::Delta { key_offset: None })),
        json if json.starts_with('{') => {
            serde_json::from_str(json).map_err(|e| Failure::usage(format!("bad adversary JSON: {e}")))
        }
        other => Err(Failure::usage(format!("unknown adversary preset {other:?}"))),
    }
}

fn parse_secrets(spec: &str) -> Result<PerParty<PartySecrets>, Failure> {
    let bad = || Failure::usage(format!("--force-secrets expects KA:RA,KB:RB,KC:RC, got {spec:?}"));
    let parts: Vec<PartySecrets> = spec
        .split(',')
        .map(|p| {
            let (k, r) = p.split_once(':').ok_or_else(bad)?;
            Ok(PartySecrets {
                k: k.trim().parse().map_err(|_| bad())?,
                r: r.trim().parse().map_err(|_| bad())?,
            })
        })
        .collect::<Result<_, Failure>>()?;
    let [a, b, c]: [PartySecrets; 3] = parts.try_into().map_err(|_| bad())?;
    Ok(PerParty { a, b, c })
}

fn base_config(n: usize, common: &CommonArgs) -> Result<SessionConfig, Failure> {
    let mut cfg = SessionConfig::new(n, common.seed)
        .with_tolerance(common.tolerance)
        .with_adversary(parse_adversary(&common.adversary)?)
        .with_announce_order(
            common
                .announce_order
                .parse::<AnnounceOrder>()
                .map_err(|e| Failure::usage(e.to_string()))?,
        );
    if let Some(d) = common.decoy_pairs {
        cfg.decoy_pairs_per_hop = d;
    }
    Ok(cfg)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let mut cfg = base_config(args.n, &args.common)?;
    if let Some(spec) = &args.force_secrets {
        cfg.forced_secrets = Some(parse_secrets(spec)?);
    }
    let result = run_session(&cfg)?;
    emit(&args.common.output, &(result.to_json() + "\n"))?;
    Ok(match result.outcome.status {
        SessionStatus::Abort => EXIT_ABORT,
        SessionStatus::Ok if result.agreed() => EXIT_OK,
        SessionStatus::Ok => EXIT_DISAGREEMENT,
    })
}

fn summary_csv(summary: &ExperimentSummary) -> Result<String, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::usage(e.to_string());
    writer.write_record(CSV_HEADER).map_err(io)?;
    for row in &summary.rows {
        writer
            .write_record([
                row.n.to_string(),
                row.adversary.clone(),
                row.trials.to_string(),
                row.aborts.to_string(),
                format!("{:.6}", row.abort_rate),
                row.attack_successes.to_string(),
                format!("{:.6}", row.agreement_rate),
                format!("{:.6}", row.mean_decoy_failure_rate),
            ])
            .map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_montecarlo(args: MonteCarloArgs) -> Result<u8, Failure> {
    let first_n = *args.n.first().ok_or_else(|| Failure::usage("empty n grid"))?;
    let base = base_config(first_n, &args.common)?;
    let spec = ExperimentSpec {
        base,
        trials: args.trials,
        sweep: Sweep {
            n: Some(args.n),
            fraction: args.fraction,
            tolerance: args.tolerances,
        },
    };
    let summary = run_experiment(&spec)?;
    let text = match args.format {
        Format::Csv => summary_csv(&summary)?,
        Format::Json => serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    };
    emit(&args.common.output, &text)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::AttackDemo(args) => demo::cmd_attack_demo(&args.target, args.seed, args.output.as_ref()),
        Command::Montecarlo(args) => cmd_montecarlo(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            if code == EXIT_USAGE {
                eprintln!("\nFor more information, try '--help'.");
            }
            ExitCode::from(code)
        }
    }
}
