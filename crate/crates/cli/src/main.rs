use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use occuscan::{
    cmd_analyze, cmd_calibrate, cmd_eval, cmd_report, cmd_simulate, CliError, Scenario,
};
use occuscan_core::fmt::sig;

#[derive(Parser)]
#[command(
    name = "occuscan",
    version,
    about = "Spectrum occupancy scanner and detector evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Occupancy bin length in seconds.
    #[arg(long)]
    bins: Option<f64>,
    /// Worker threads (default: one per core). Outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario, CliError> {
        let path = self
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::Usage("--scenario is required".into()))?;
        let s = Scenario::load(path)?;
        Ok(match self.seed {
            Some(seed) => s.with_seed(seed),
            None => s,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the reference vector and thresholds.
    Calibrate(Common),
    /// Sweep the synthetic channel plan and write records and truth labels.
    Simulate(Common),
    /// Scan an IQ recording on one channel.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Raw interleaved little-endian f32 IQ payload.
        #[arg(long)]
        iq: PathBuf,
        /// Metadata file of the recording.
        #[arg(long)]
        meta: PathBuf,
        /// Channel center in MHz (default: the recording's center frequency).
        #[arg(long = "center-mhz")]
        center_mhz: Option<f64>,
        /// Also write per-frame normalized and raw correlation distances.
        #[arg(long)]
        verbose: bool,
    },
    /// Bin a record CSV into occupancy ratios and plot data.
    Report {
        #[command(flatten)]
        common: Common,
        /// Record CSV written by `simulate` or `analyze`.
        #[arg(long)]
        records: PathBuf,
    },
    /// Monte Carlo detection and false-alarm rates.
    Eval(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Calibrate(c) => {
            let cal = cmd_calibrate(&c.scenario()?, &c.out, c.workers)?;
            println!("lambda_ed={}", sig(cal.lambda_ed, 9));
            println!("lambda_acf={}", sig(cal.lambda_acf, 9));
            println!("gamma={}", sig(cal.gamma, 9));
            println!("target_pfa={}", sig(cal.target_pfa, 9));
            println!(
                "reference={}",
                c.out.join(occuscan::commands::REFERENCE_FILE).display()
            );
        }
        Command::Simulate(c) => {
            let summary = cmd_simulate(&c.scenario()?, &c.out, c.workers)?;
            println!(
                "channels={} scans={} records={}",
                summary.channels, summary.scans, summary.records
            );
        }
        Command::Analyze {
            common,
            iq,
            meta,
            center_mhz,
            verbose,
        } => {
            let n = cmd_analyze(
                &common.scenario()?,
                &iq,
                &meta,
                center_mhz,
                &common.out,
                verbose,
            )?;
            println!("records={n}");
        }
        Command::Report { common, records } => {
            let bins = match (common.bins, &common.scenario) {
                (Some(b), _) => b,
                (None, Some(_)) => common.scenario()?.bin_len_s,
                (None, None) => 3600.0,
            };
            let summary = cmd_report(&records, bins, &common.out)?;
            println!("cells={} plots={}", summary.cells, summary.plot_files.len());
        }
        Command::Eval(c) => {
            let rows = cmd_eval(&c.scenario()?, &c.out, c.workers)?;
            println!("rows={}", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
