//! Scenario files: a TOML document describing the plan, the synthetic
//! channels, the detectors and the evaluation sweep.
//!
//! Parse errors carry the line of the offending token; validation errors
//! name the field in dotted form (`channel.schedule.on`, `override[2].band`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use occuscan_core::detectors::MIN_CALIBRATION_FRAMES;
use occuscan_core::scan_engine::{build_channel_plan, builtin_table1_plan, BandSpec, Channel};
use occuscan_core::signal_synth::{snr_scale, NoiseSpec, OccupancySchedule, SignalSpec, Waveform};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    master_seed: u64,
    frame_len: usize,
    frame_interval_s: f64,
    total_s: f64,
    #[serde(default)]
    start_time_unix: f64,
    #[serde(default = "default_sample_rate")]
    sample_rate_hz: f64,
    #[serde(default = "default_bin_len")]
    bin_len_s: f64,
    #[serde(default = "default_plan")]
    plan: String,
    #[serde(default)]
    bands: Vec<RawBand>,
    #[serde(default)]
    detector: RawDetector,
    #[serde(default)]
    calibration: RawCalibration,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default, rename = "override")]
    overrides: Vec<RawOverride>,
    #[serde(default)]
    eval: RawEval,
}

fn default_sample_rate() -> f64 {
    1e6
}

fn default_bin_len() -> f64 {
    3600.0
}

fn default_plan() -> String {
    "table1".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBand {
    name: String,
    start_mhz: f64,
    stop_mhz: f64,
    spacing_mhz: Vec<f64>,
    channels: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    #[serde(default = "default_lags")]
    acf_lags: usize,
    lambda_ed: Option<f64>,
    lambda_acf: Option<f64>,
    gamma: Option<f64>,
    reference: Option<PathBuf>,
}

fn default_lags() -> usize {
    8
}

impl Default for RawDetector {
    fn default() -> Self {
        Self {
            acf_lags: default_lags(),
            lambda_ed: None,
            lambda_acf: None,
            gamma: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    waveform: String,
    freq: Option<f64>,
    samples_per_symbol: Option<usize>,
    #[serde(default = "one")]
    amplitude: f64,
    #[serde(default)]
    phase: f64,
}

fn one() -> f64 {
    1.0
}

impl RawSignal {
    fn default_tone() -> Self {
        Self {
            waveform: "tone".into(),
            freq: Some(0.05),
            samples_per_symbol: None,
            amplitude: 1.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    #[serde(default = "RawSignal::default_tone")]
    signal: RawSignal,
    #[serde(default = "default_cal_snr")]
    snr_db: f64,
    #[serde(default = "one")]
    noise_power: f64,
    #[serde(default = "default_training")]
    training_frames: usize,
    #[serde(default = "default_noise_frames")]
    noise_frames: usize,
    #[serde(default = "default_pfa")]
    target_pfa: f64,
}

fn default_cal_snr() -> f64 {
    20.0
}

fn default_training() -> usize {
    100
}

fn default_noise_frames() -> usize {
    10_000
}

fn default_pfa() -> f64 {
    0.05
}

impl Default for RawCalibration {
    fn default() -> Self {
        Self {
            signal: RawSignal::default_tone(),
            snr_db: default_cal_snr(),
            noise_power: 1.0,
            training_frames: default_training(),
            noise_frames: default_noise_frames(),
            target_pfa: default_pfa(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    period_s: f64,
    #[serde(default)]
    on: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    signal: Option<RawSignal>,
    noise_power: Option<f64>,
    snr_db: Option<f64>,
    schedule: Option<RawSchedule>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    band: String,
    index: usize,
    signal: Option<RawSignal>,
    noise_power: Option<f64>,
    snr_db: Option<f64>,
    schedule: Option<RawSchedule>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    #[serde(default = "default_eval_snr")]
    snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_pfa")]
    target_pfa: f64,
    #[serde(default = "default_roc_points")]
    roc_points: usize,
    signal: Option<RawSignal>,
    noise_power: Option<f64>,
}

fn default_eval_snr() -> Vec<f64> {
    vec![0.0, 5.0, 10.0]
}

fn default_trials() -> usize {
    1000
}

fn default_roc_points() -> usize {
    21
}

impl Default for RawEval {
    fn default() -> Self {
        Self {
            snr_db: default_eval_snr(),
            trials: default_trials(),
            target_pfa: default_pfa(),
            roc_points: default_roc_points(),
            signal: None,
            noise_power: None,
        }
    }
}

/// What one synthetic channel transmits and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSetup {
    pub signal: SignalSpec,
    pub noise_power: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSection {
    pub acf_lags: usize,
    pub lambda_ed: Option<f64>,
    pub lambda_acf: Option<f64>,
    pub gamma: Option<f64>,
    /// Resolved against the scenario file's directory.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSection {
    pub signal: SignalSpec,
    pub snr_db: f64,
    pub noise_power: f64,
    pub training_frames: usize,
    pub noise_frames: usize,
    pub target_pfa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub target_pfa: f64,
    pub roc_points: usize,
    pub signal: SignalSpec,
    pub noise_power: f64,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub path: PathBuf,
    pub master_seed: u64,
    pub frame_len: usize,
    pub frame_interval_s: f64,
    pub total_s: f64,
    pub start_time_unix: f64,
    pub sample_rate_hz: f64,
    pub bin_len_s: f64,
    pub plan: Vec<Channel>,
    /// Parallel to `plan`.
    pub channels: Vec<(ChannelSetup, OccupancySchedule)>,
    pub detector: DetectorSection,
    pub calibration: CalibrationSection,
    pub eval: EvalSection,
}

struct Checker<'a> {
    path: &'a Path,
}

impl Checker<'_> {
    fn err(&self, field: impl Into<String>, message: impl ToString) -> CliError {
        CliError::Field {
            path: self.path.to_path_buf(),
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn require(&self, ok: bool, field: &str, message: impl ToString) -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(self.err(field, message))
        }
    }

    fn signal(&self, raw: &RawSignal, field: &str) -> Result<SignalSpec, CliError> {
        let waveform = match raw.waveform.as_str() {
            "tone" => Waveform::Tone {
                normalized_freq: raw
                    .freq
                    .ok_or_else(|| self.err(format!("{field}.freq"), "required for a tone"))?,
            },
            "bpsk" => Waveform::Bpsk {
                samples_per_symbol: raw.samples_per_symbol.ok_or_else(|| {
                    self.err(format!("{field}.samples_per_symbol"), "required for bpsk")
                })?,
            },
            "none" => return Ok(SignalSpec::none()),
            other => {
                return Err(self.err(
                    format!("{field}.waveform"),
                    format!("unknown waveform `{other}` (expected tone, bpsk or none)"),
                ))
            }
        };
        SignalSpec::new(waveform, raw.amplitude, raw.phase, 0).map_err(|e| self.err(field, e))
    }

    fn noise_power(&self, p: f64, field: &str) -> Result<f64, CliError> {
        NoiseSpec::new(p, 0).map_err(|e| self.err(field, e))?;
        Ok(p)
    }

    fn snr(
        &self,
        signal: &SignalSpec,
        noise_power: f64,
        snr_db: f64,
        field: &str,
    ) -> Result<f64, CliError> {
        if signal.nominal_power() > 0.0 {
            snr_scale(signal.nominal_power(), noise_power, snr_db)
                .map_err(|e| self.err(field, e))?;
        } else {
            self.require(!snr_db.is_nan(), field, "must be a number")?;
        }
        Ok(snr_db)
    }

    fn schedule(&self, raw: &RawSchedule, field: &str) -> Result<OccupancySchedule, CliError> {
        let on = raw.on.iter().map(|&[s, e]| (s, e)).collect();
        OccupancySchedule::new(raw.period_s, on).map_err(|e| self.err(field, e))
    }
}

/// Line (1-based) of byte `offset` in `text`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Parses and validates `text`; `path` is used for messages and to
    /// resolve relative file references.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim_end().to_string(),
        })?;
        let c = Checker { path };

        c.require(raw.frame_len >= 1, "frame_len", "must be >= 1")?;
        c.require(
            raw.frame_interval_s.is_finite() && raw.frame_interval_s > 0.0,
            "frame_interval_s",
            "must be finite and > 0",
        )?;
        c.require(
            raw.total_s.is_finite() && raw.total_s >= 0.0,
            "total_s",
            "must be finite and >= 0",
        )?;
        c.require(
            raw.start_time_unix.is_finite(),
            "start_time_unix",
            "must be finite",
        )?;
        c.require(
            raw.sample_rate_hz.is_finite() && raw.sample_rate_hz > 0.0,
            "sample_rate_hz",
            "must be finite and > 0",
        )?;
        c.require(
            raw.bin_len_s.is_finite() && raw.bin_len_s > 0.0,
            "bin_len_s",
            "must be finite and > 0",
        )?;

        let plan = match raw.plan.as_str() {
            "table1" => {
                c.require(
                    raw.bands.is_empty(),
                    "bands",
                    "only allowed with plan = \"custom\"",
                )?;
                builtin_table1_plan()
            }
            "custom" => {
                c.require(
                    !raw.bands.is_empty(),
                    "bands",
                    "plan = \"custom\" needs at least one [[bands]] entry",
                )?;
                let specs: Vec<BandSpec> = raw
                    .bands
                    .iter()
                    .map(|b| {
                        BandSpec::new(&b.name, b.start_mhz, b.stop_mhz, &b.spacing_mhz, b.channels)
                    })
                    .collect();
                build_channel_plan(&specs).map_err(|e| c.err("bands", e))?
            }
            other => {
                return Err(c.err(
                    "plan",
                    format!("unknown plan `{other}` (expected table1 or custom)"),
                ))
            }
        };

        let d = &raw.detector;
        c.require(d.acf_lags >= 2, "detector.acf_lags", "must be >= 2")?;
        c.require(
            raw.frame_len >= d.acf_lags,
            "frame_len",
            format!("must be >= detector.acf_lags ({})", d.acf_lags),
        )?;
        for (name, v) in [
            ("lambda_ed", d.lambda_ed),
            ("lambda_acf", d.lambda_acf),
            ("gamma", d.gamma),
        ] {
            if let Some(v) = v {
                c.require(
                    v.is_finite() && v > 0.0,
                    &format!("detector.{name}"),
                    "must be finite and > 0",
                )?;
            }
        }
        if let Some(g) = d.gamma {
            c.require(g < 1.0, "detector.gamma", "must be < 1")?;
        }
        if let Some(l) = d.lambda_acf {
            c.require(l < 1.0, "detector.lambda_acf", "must be < 1")?;
        }
        let base = path.parent().unwrap_or(Path::new(""));
        let detector = DetectorSection {
            acf_lags: d.acf_lags,
            lambda_ed: d.lambda_ed,
            lambda_acf: d.lambda_acf,
            gamma: d.gamma,
            reference: d.reference.as_ref().map(|r| base.join(r)),
        };

        let cal = &raw.calibration;
        let cal_signal = c.signal(&cal.signal, "calibration.signal")?;
        c.require(
            cal_signal.nominal_power() > 0.0,
            "calibration.signal",
            "must transmit (nonzero amplitude, waveform other than none)",
        )?;
        let cal_noise = c.noise_power(cal.noise_power, "calibration.noise_power")?;
        let cal_snr = c.snr(&cal_signal, cal_noise, cal.snr_db, "calibration.snr_db")?;
        c.require(
            cal.training_frames >= 1,
            "calibration.training_frames",
            "must be >= 1",
        )?;
        c.require(
            cal.noise_frames >= MIN_CALIBRATION_FRAMES,
            "calibration.noise_frames",
            format!("must be >= {MIN_CALIBRATION_FRAMES}"),
        )?;
        c.require(
            cal.target_pfa > 0.0 && cal.target_pfa < 1.0,
            "calibration.target_pfa",
            "must lie in (0, 1)",
        )?;
        let calibration = CalibrationSection {
            signal: cal_signal,
            snr_db: cal_snr,
            noise_power: cal_noise,
            training_frames: cal.training_frames,
            noise_frames: cal.noise_frames,
            target_pfa: cal.target_pfa,
        };

        let ch = &raw.channel;
        let default_signal = match &ch.signal {
            Some(s) => c.signal(s, "channel.signal")?,
            None => SignalSpec::none(),
        };
        let default_noise = c.noise_power(ch.noise_power.unwrap_or(1.0), "channel.noise_power")?;
        let default_setup = ChannelSetup {
            signal: default_signal,
            noise_power: default_noise,
            snr_db: c.snr(
                &default_signal,
                default_noise,
                ch.snr_db.unwrap_or(0.0),
                "channel.snr_db",
            )?,
        };
        let default_schedule = match &ch.schedule {
            Some(s) => c.schedule(s, "channel.schedule")?,
            None => OccupancySchedule::always_off(1.0).expect("valid period"),
        };
        let mut channels = vec![(default_setup, default_schedule); plan.len()];

        for (i, o) in raw.overrides.iter().enumerate() {
            let field = |f: &str| format!("override[{i}].{f}");
            let slot = plan
                .iter()
                .position(|p| *p.band == *o.band && p.index_in_band == o.index)
                .ok_or_else(|| {
                    c.err(
                        field("band"),
                        format!("no channel {} in band `{}` of the plan", o.index, o.band),
                    )
                })?;
            let (base_setup, base_schedule) = channels[slot].clone();
            let signal = match &o.signal {
                Some(s) => c.signal(s, &field("signal"))?,
                None => base_setup.signal,
            };
            let noise_power = match o.noise_power {
                Some(p) => c.noise_power(p, &field("noise_power"))?,
                None => base_setup.noise_power,
            };
            let snr_db = c.snr(
                &signal,
                noise_power,
                o.snr_db.unwrap_or(base_setup.snr_db),
                &field("snr_db"),
            )?;
            let schedule = match &o.schedule {
                Some(s) => c.schedule(s, &field("schedule"))?,
                None => base_schedule,
            };
            channels[slot] = (
                ChannelSetup {
                    signal,
                    noise_power,
                    snr_db,
                },
                schedule,
            );
        }

        let ev = &raw.eval;
        c.require(
            !ev.snr_db.is_empty(),
            "eval.snr_db",
            "needs at least one value",
        )?;
        c.require(ev.trials >= 1, "eval.trials", "must be >= 1")?;
        c.require(
            ev.target_pfa > 0.0 && ev.target_pfa < 1.0,
            "eval.target_pfa",
            "must lie in (0, 1)",
        )?;
        c.require(ev.roc_points >= 2, "eval.roc_points", "must be >= 2")?;
        let eval_signal = match &ev.signal {
            Some(s) => c.signal(s, "eval.signal")?,
            None => cal_signal,
        };
        let eval_noise = match ev.noise_power {
            Some(p) => c.noise_power(p, "eval.noise_power")?,
            None => cal_noise,
        };
        for (i, &snr) in ev.snr_db.iter().enumerate() {
            c.snr(&eval_signal, eval_noise, snr, &format!("eval.snr_db[{i}]"))?;
        }
        let eval = EvalSection {
            snr_db: ev.snr_db.clone(),
            trials: ev.trials,
            target_pfa: ev.target_pfa,
            roc_points: ev.roc_points,
            signal: eval_signal,
            noise_power: eval_noise,
        };

        Ok(Scenario {
            path: path.to_path_buf(),
            master_seed: raw.master_seed,
            frame_len: raw.frame_len,
            frame_interval_s: raw.frame_interval_s,
            total_s: raw.total_s,
            start_time_unix: raw.start_time_unix,
            sample_rate_hz: raw.sample_rate_hz,
            bin_len_s: raw.bin_len_s,
            plan,
            channels,
            detector,
            calibration,
            eval,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}
