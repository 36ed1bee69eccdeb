//! Command implementations behind the `occuscan` binary.
//!
//! Every command takes a validated [`Scenario`] (or plain file inputs) and
//! writes CSV artifacts into an output directory. Randomness flows from the
//! scenario's `master_seed` only.

pub mod commands;
pub mod scenario;

use std::path::PathBuf;

use thiserror::Error;

use occuscan_core::detectors::DetectorError;
use occuscan_core::eval_harness::EvalError;
use occuscan_core::iq_model::IqError;
use occuscan_core::occupancy_report::ReportError;
use occuscan_core::scan_engine::ScanError;
use occuscan_core::signal_synth::SynthError;

pub use commands::{
    cmd_analyze, cmd_calibrate, cmd_eval, cmd_report, cmd_simulate, resolve_config, Calibration,
    ReportSummary, SimulateSummary,
};
pub use scenario::{ChannelSetup, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {field}: {message}", path.display())]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("no channel of the plan covers {center_mhz} MHz")]
    NoChannel { center_mhz: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Iq(#[from] IqError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
