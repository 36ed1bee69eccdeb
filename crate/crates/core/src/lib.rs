//! Spectrum occupancy scanning.
//!
//! Three sensing detectors run side by side over every captured frame:
//!
//! * fixed-threshold energy detection ([`detectors::energy_statistic`]),
//! * the normalized lag-1 autocorrelation coefficient ([`detectors::acf1_statistic`]),
//! * correlation distance between an observed autocorrelation profile and a
//!   calibrated reference profile ([`detectors::correlation_distance`]).
//!
//! A channel plan ([`scan_engine`]) drives the sweep, decisions are logged as
//! [`scan_engine::ScanRecord`]s and folded into time-binned occupancy ratios
//! ([`occupancy_report`]). Since there is no radio front end here, a seeded
//! baseband generator ([`signal_synth`]) produces frames with known ground
//! truth, and [`eval_harness`] measures Pd/Pfa against it.

pub mod detectors;
pub mod eval_harness;
pub mod iq_model;
pub mod occupancy_report;
pub mod scan_engine;
pub mod signal_synth;

pub mod fmt;

pub use detectors::{AcfVector, Decision, DetectorConfig, DetectorKind};
pub use iq_model::{ComplexFrame, ComplexSample, FrameMeta, RecordingMeta};
pub use occupancy_report::OccupancyCell;
pub use scan_engine::{BandSpec, Channel, ScanRecord};
pub use signal_synth::{NoiseSpec, OccupancySchedule, SignalSpec, Waveform};
