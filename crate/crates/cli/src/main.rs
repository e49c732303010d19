//! Command-line front end for learning, auditing and evaluating auctions.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mechlearn", version, about = "Learn up-to-epsilon optimal auctions from samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Instance config (JSON); an experiment config's instance also works.
    #[arg(long)]
    pub config: PathBuf,
    /// Samples per (bidder, parameter) cell, drawn from the instance prior.
    #[arg(long, conflicts_with = "samples_file", required_unless_present = "samples_file")]
    pub samples: Option<usize>,
    /// Read samples from a CSV (bidder,parameter,sample_index,value) instead of drawing them.
    #[arg(long)]
    pub samples_file: Option<PathBuf>,
    /// Seed for all randomness.
    #[arg(long)]
    pub seed: u64,
    /// Where to write the learned mechanism (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Write the oracle's linear program in LP text format.
    #[arg(long)]
    pub lp_dump: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    Bic,
    Dsic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a BIC mechanism from samples.
    LearnBic(SampleArgs),
    /// Learn a DSIC mechanism from samples (weakly downward closed spaces only).
    LearnDsic(SampleArgs),
    /// Learn a single-parameter Myerson auction from samples.
    LearnSingle(SampleArgs),
    /// Solve for the optimal mechanism of the instance's rounded prior.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "bic")]
        mode: OracleMode,
        /// Ex-post slack for DSIC mode.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Solve in exact rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lp_dump: Option<PathBuf>,
    },
    /// Iron the rounded prior and build the Myerson auction.
    Myerson {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-bidder ironing tables (CSV).
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Comma-separated real bids to run through the auction.
        #[arg(long, value_delimiter = ',')]
        bids: Option<Vec<f64>>,
        /// Do not allocate on exact zero virtual-welfare ties.
        #[arg(long)]
        no_allocate_ties: bool,
    },
    /// Turn a single-bidder eps-IC mechanism into an exactly IC one.
    Nudge {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sample-complexity sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare empirical and true expectations over repeated sampling.
    Concentrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Revenue of a mechanism on the instance's true prior.
    Eval {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Monte-Carlo draws (0 skips the estimate).
        #[arg(long, default_value_t = 0)]
        mc_samples: usize,
        /// Seed for the Monte-Carlo draws; required with --mc-samples.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit a mechanism's incentive and participation guarantees.
    Verify {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long, alias = "prior")]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::LearnBic(args) => commands::learn(&args, commands::LearnKind::Bic),
        Command::LearnDsic(args) => commands::learn(&args, commands::LearnKind::Dsic),
        Command::LearnSingle(args) => commands::learn(&args, commands::LearnKind::Single),
        Command::Oracle { config, mode, eta, exact, out, lp_dump } => {
            commands::oracle(&config, mode, eta, exact, &out, lp_dump.as_deref())
        }
        Command::Myerson { config, out, csv_dir, bids, no_allocate_ties } => {
            commands::myerson(&config, out.as_deref(), csv_dir.as_deref(), bids.as_deref(), !no_allocate_ties)
        }
        Command::Nudge { mech, config, epsilon, out } => commands::nudge(&mech, &config, epsilon, &out),
        Command::Sweep { config, out_dir } => commands::sweep(&config, &out_dir),
        Command::Concentrate { config, seed, out } => commands::concentrate(&config, seed, out.as_deref()),
        Command::Eval { mech, config, mc_samples, seed } => commands::eval(&mech, &config, mc_samples, seed),
        Command::Verify { mech, config } => commands::verify(&mech, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
