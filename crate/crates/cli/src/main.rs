mod commands;
mod error;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, ErrorReport};

#[derive(Parser)]
#[command(name = "chsc", version, about = "Chameleon signcryption avatar authentication toolkit")]
pub struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, default_value = "chsc-workspace")]
    pub workspace: PathBuf,

    /// Seed for a deterministic ChaCha20 RNG; system entropy when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Parameter profile.
    #[arg(long, global = true, default_value = chsc_core::group::PROFILE_NAME)]
    pub profile: String,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
pub enum Command {
    /// Create a workspace: parameters, mock IDP key, contract key, empty store.
    Setup {
        /// Security parameter in bits.
        #[arg(long, default_value_t = 128)]
        security: u32,
        /// Overwrite an existing workspace.
        #[arg(long)]
        force: bool,
    },
    /// Generate a standalone chameleon key pair.
    Keygen {
        /// Write the key pair (including the secret) to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enroll a participant: key pair, MIT issued and stored, avatar.
    Register(RegisterArgs),
    /// Replace a participant's avatar with a new visible identity.
    AvatarCreate {
        name: String,
        #[arg(long)]
        visible: String,
    },
    /// Mutual authentication between two participants.
    Meet(MeetArgs),
    /// Run an adversary scenario against a fresh in-memory world.
    Attack(AttackArgs),
    /// Measure operation timings, meeting latency or storage growth.
    Bench(BenchArgs),
    /// Re-check every stored signature and chameleon relation.
    VerifyWorkspace,
    /// Inspect the ledger.
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
}

#[derive(Args)]
pub struct RegisterArgs {
    pub name: String,
    /// Full 23-digit Mid.
    #[arg(long, conflicts_with_all = ["country", "district", "date", "psn"])]
    pub mid: Option<String>,
    #[arg(long, requires_all = ["district", "date", "psn"])]
    pub country: Option<u32>,
    #[arg(long)]
    pub district: Option<u32>,
    /// YYYYMMDD.
    #[arg(long)]
    pub date: Option<u32>,
    #[arg(long)]
    pub psn: Option<u32>,
    /// Seed of the mock iris; random when absent.
    #[arg(long)]
    pub iris_seed: Option<u64>,
    /// Visible identity `M_a`; defaults to a description derived from the name.
    #[arg(long)]
    pub visible: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TamperPoint {
    ZBitFlip,
    KBitFlip,
    RBitFlip,
}

#[derive(Args)]
pub struct MeetArgs {
    pub a: String,
    pub b: String,
    /// Scene A hands to B on a first meeting; the bundled sample otherwise.
    #[arg(long)]
    pub scene_a: Option<PathBuf>,
    #[arg(long)]
    pub scene_b: Option<PathBuf>,
    /// Flip one bit of the first avatar response on the wire.
    #[arg(long, value_enum)]
    pub tamper: Option<TamperPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Replacing,
    Forging,
    Disguise,
    Privacy,
    All,
}

#[derive(Args)]
pub struct AttackArgs {
    #[arg(value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Run concurrently against one shared world.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Include every outcome in the report, not just the summary.
    #[arg(long)]
    pub outcomes: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Ops,
    Meet,
    Storage,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    /// Friend counts for the storage suite.
    #[arg(long, value_delimiter = ',', default_values_t = [20usize, 40, 60, 80, 100])]
    pub friends: Vec<usize>,
}

#[derive(Subcommand)]
pub enum LedgerAction {
    /// Print entries as `hexkey -> hexvalue` lines.
    Dump,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = cli.report;
    match commands::run(cli) {
        Ok(out) => {
            match format {
                ReportFormat::Text => print!("{}", out.text),
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("json")),
            }
            ExitCode::from(out.exit_code)
        }
        Err(err) => {
            match format {
                ReportFormat::Text => eprintln!("error: {err}"),
                ReportFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&ErrorReport {
                        error: err.kind(),
                        message: err.to_string(),
                        exit_code: err.exit_code(),
                    })
                    .expect("json")
                ),
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
