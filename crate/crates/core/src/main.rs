use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cesig::harness::{self, Command, Format, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "cesig",
    version,
    about = "Simulate and check signed Wi-Fi connection establishment"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bit error rate per SNR and codec.
    BerSweep(Common),
    /// Signature success rate per SNR and codec.
    SrSweep(Common),
    /// Benign and relayed inter-frame gaps per location.
    RelaySim(Common),
    /// Train and evaluate the relay detector.
    Detect(Common),
    /// Model-check the station FSM against adversary actions.
    FsmCheck(Common),
    /// PCA over preamble signatures with per-AP and CE classification.
    Pca(Common),
    /// One end-to-end connection establishment.
    CeRun {
        #[command(flatten)]
        common: Common,
        /// Also time this build's sign and verify and print them to stderr.
        #[arg(long)]
        bench: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON scenario config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; relative paths resolve against $CESIG_OUT_DIR if set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

fn run(cmd: Command, common: &Common) -> ExitCode {
    let mut cfg = match &common.config {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let format = match common.format {
        Some(OutFormat::Csv) => Format::Csv,
        Some(OutFormat::Json) => Format::Json,
        None => cmd.default_format(),
    };
    let out = match harness::run_command(cmd, &cfg, format) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match &common.out {
        Some(path) => {
            if let Err(e) = harness::write_output(path, &out.body) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{}", out.body),
    }
    if out.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::BerSweep(c) => run(Command::BerSweep, c),
        Cmd::SrSweep(c) => run(Command::SrSweep, c),
        Cmd::RelaySim(c) => run(Command::RelaySim, c),
        Cmd::Detect(c) => run(Command::Detect, c),
        Cmd::FsmCheck(c) => run(Command::FsmCheck, c),
        Cmd::Pca(c) => run(Command::Pca, c),
        Cmd::CeRun { common, bench } => {
            if *bench {
                let t = harness::crypto_timings(1000);
                eprintln!(
                    "bench {}: sign {:.6} ms, verify {:.6} ms over {} iterations",
                    t.scheme, t.sign_ms, t.verify_ms, t.iterations
                );
            }
            run(Command::CeRun, common)
        }
    }
}
