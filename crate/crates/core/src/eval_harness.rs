//! Monte Carlo Pd/Pfa, ROC curves and occupancy recovery.
//!
//! A [`TrialSet`] draws `trials` signal-plus-noise frames and `trials`
//! independent noise-only frames once, and keeps every detector's statistic
//! for each. Operating points at any threshold are then counts over that
//! shared set (common random numbers), so ROC curves are monotone by
//! construction and detectors are compared on identical draws.
//!
//! Seeds: trial `i` uses stream `i` of seeds derived from the scenario seed
//! with the purposes `h1-noise`, `h0-noise` and `signal`. Trials may run on
//! any number of workers without changing a single bit of the result.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::detectors::{AcfVector, DetectorConfig, DetectorError, DetectorKind, FrameStatistics};
use crate::fmt::sig;
use crate::signal_synth::{
    derive_seed, gen_channel_timeline, gen_noise_frame, gen_signal_frame, mix_at_snr, NoiseSpec,
    OccupancySchedule, SignalSpec, SynthError, TimelineSpec,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub detector: DetectorKind,
    /// `-inf` when no signal is present in either hypothesis.
    pub snr_db: f64,
    pub threshold: f64,
    pub pd: f64,
    pub pfa: f64,
    pub trials: usize,
}

/// What a [`TrialSet`] is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScenario {
    pub signal: SignalSpec,
    pub noise_power: f64,
    pub snr_db: f64,
    pub frame_len: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    scenario: TrialScenario,
    /// Per detector (indexed like [`DetectorKind::ALL`]), per trial.
    h1: [Vec<Option<f64>>; 3],
    h0: [Vec<Option<f64>>; 3],
}

fn split_stats(per_trial: Vec<FrameStatistics>) -> [Vec<Option<f64>>; 3] {
    DetectorKind::ALL.map(|k| per_trial.iter().map(|s| s.statistic(k)).collect())
}

impl TrialSet {
    /// Draws the trials, in parallel on the current rayon pool.
    pub fn generate(scenario: TrialScenario, reference: &AcfVector) -> Result<Self, EvalError> {
        if scenario.trials == 0 {
            return Err(EvalError::Config("trials must be at least 1".into()));
        }
        if scenario.frame_len < reference.len() {
            return Err(EvalError::Config(format!(
                "frame_len {} is shorter than the {} reference lags",
                scenario.frame_len,
                reference.len()
            )));
        }
        let n = scenario.frame_len;
        let h1_noise = NoiseSpec::new(
            scenario.noise_power,
            derive_seed(scenario.seed, "h1-noise", 0),
        )?;
        let h0_noise = h1_noise.with_seed(derive_seed(scenario.seed, "h0-noise", 0));
        let signal = scenario
            .signal
            .with_seed(derive_seed(scenario.seed, "signal", 0));
        let snr_db = if signal.nominal_power() > 0.0 {
            scenario.snr_db
        } else {
            f64::NEG_INFINITY
        };
        // Validate the mixing scale once so per-trial errors cannot occur.
        crate::signal_synth::snr_scale(signal.nominal_power(), scenario.noise_power, snr_db)?;

        let trial = |i: usize| -> Result<(FrameStatistics, FrameStatistics), EvalError> {
            let i = i as u64;
            let noise = gen_noise_frame(n, &h1_noise, i)?;
            let present = mix_at_snr(
                &gen_signal_frame(n, &signal, i)?,
                signal.nominal_power(),
                &noise,
                scenario.noise_power,
                snr_db,
            )?;
            let absent = gen_noise_frame(n, &h0_noise, i)?;
            Ok((
                FrameStatistics::compute(&present, reference)?,
                FrameStatistics::compute(&absent, reference)?,
            ))
        };
        let (h1, h0): (Vec<_>, Vec<_>) = (0..scenario.trials)
            .into_par_iter()
            .map(trial)
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();

        Ok(Self {
            scenario: TrialScenario { snr_db, ..scenario },
            h1: split_stats(h1),
            h0: split_stats(h0),
        })
    }

    pub fn scenario(&self) -> &TrialScenario {
        &self.scenario
    }

    pub fn trials(&self) -> usize {
        self.scenario.trials
    }

    /// Signal-present statistics of `kind`; `None` entries are degenerate.
    pub fn h1(&self, kind: DetectorKind) -> &[Option<f64>] {
        &self.h1[kind as usize]
    }

    pub fn h0(&self, kind: DetectorKind) -> &[Option<f64>] {
        &self.h0[kind as usize]
    }

    fn fraction_present(stats: &[Option<f64>], kind: DetectorKind, threshold: f64) -> f64 {
        let hits = stats
            .iter()
            .filter(|s| s.is_some_and(|s| kind.decide(s, threshold).present))
            .count();
        hits as f64 / stats.len() as f64
    }

    pub fn operating_point(&self, kind: DetectorKind, threshold: f64) -> OperatingPoint {
        OperatingPoint {
            detector: kind,
            snr_db: self.scenario.snr_db,
            threshold,
            pd: Self::fraction_present(self.h1(kind), kind, threshold),
            pfa: Self::fraction_present(self.h0(kind), kind, threshold),
            trials: self.scenario.trials,
        }
    }

    /// Threshold at which `kind` has an empirical false-alarm rate of about
    /// `target_pfa` on this set's noise-only trials.
    pub fn threshold_for_pfa(&self, kind: DetectorKind, target_pfa: f64) -> Result<f64, EvalError> {
        if !(target_pfa > 0.0 && target_pfa < 1.0) {
            return Err(EvalError::Argument(format!(
                "target_pfa must lie in (0, 1), got {target_pfa}"
            )));
        }
        let h0: Vec<f64> = self.h0(kind).iter().flatten().copied().collect();
        Ok(kind.threshold_for_pfa(&h0, target_pfa)?)
    }

    /// Smallest and largest statistic of `kind` over both hypotheses.
    pub fn statistic_range(&self, kind: DetectorKind) -> Option<(f64, f64)> {
        self.h1(kind)
            .iter()
            .chain(self.h0(kind))
            .flatten()
            .fold(None, |acc, &s| match acc {
                None => Some((s, s)),
                Some((lo, hi)) => Some((f64::min(lo, s), f64::max(hi, s))),
            })
    }
}

/// Pd and Pfa of `kind` at the threshold held in `config`.
pub fn measure_pd_pfa(
    kind: DetectorKind,
    config: &DetectorConfig,
    scenario: TrialScenario,
) -> Result<OperatingPoint, EvalError> {
    let set = TrialSet::generate(scenario, &config.reference)?;
    Ok(set.operating_point(kind, kind.threshold(config)))
}

/// Operating points of `kind` over ascending `thresholds`, all on `set`.
pub fn roc_curve(
    set: &TrialSet,
    kind: DetectorKind,
    thresholds: &[f64],
) -> Result<Vec<OperatingPoint>, EvalError> {
    if thresholds.len() < 2 {
        return Err(EvalError::Argument(format!(
            "a ROC curve needs at least 2 thresholds, got {}",
            thresholds.len()
        )));
    }
    if thresholds.iter().any(|t| t.is_nan()) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(EvalError::Argument(
            "thresholds must be sorted ascending".into(),
        ));
    }
    Ok(thresholds
        .iter()
        .map(|&t| set.operating_point(kind, t))
        .collect())
}

/// Threshold that admits every frame: `λ → 0⁺` for `ed`/`acf1`, `γ → 1⁻`
/// for `cdist`.
pub fn admit_all_threshold(kind: DetectorKind) -> f64 {
    match kind {
        DetectorKind::Ed | DetectorKind::Acf1 => f64::MIN_POSITIVE,
        DetectorKind::Cdist => 1.0 - f64::EPSILON,
    }
}

/// Threshold that rejects every frame.
pub fn reject_all_threshold(kind: DetectorKind) -> f64 {
    match kind {
        DetectorKind::Ed => f64::MAX,
        DetectorKind::Acf1 => 1.0 - f64::EPSILON,
        DetectorKind::Cdist => f64::MIN_POSITIVE,
    }
}

pub const MIN_RECOVERY_SCANS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryScenario {
    pub signal: SignalSpec,
    pub noise_power: f64,
    pub snr_db: f64,
    pub timeline: TimelineSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    /// Fraction of scans whose ground-truth label is present.
    pub true_duty: f64,
    /// Detections over scans.
    pub measured_occupancy: f64,
    pub abs_error: f64,
    pub scans: u64,
}

/// Runs one detector over a synthetic on/off channel and compares its
/// average occupancy with the ground-truth duty.
pub fn occupancy_recovery(
    schedule: &OccupancySchedule,
    kind: DetectorKind,
    config: &DetectorConfig,
    scenario: &RecoveryScenario,
) -> Result<Recovery, EvalError> {
    let scans = scenario.timeline.frame_count();
    if scans < MIN_RECOVERY_SCANS {
        return Err(EvalError::Config(format!(
            "occupancy recovery needs at least {MIN_RECOVERY_SCANS} scans, scenario yields {scans}"
        )));
    }
    let noise = NoiseSpec::new(scenario.noise_power, derive_seed(scenario.seed, "noise", 0))?;
    let signal = scenario
        .signal
        .with_seed(derive_seed(scenario.seed, "signal", 0));
    let threshold = kind.threshold(config);

    let outcomes = gen_channel_timeline(
        schedule,
        &signal,
        &noise,
        scenario.snr_db,
        scenario.timeline,
    )?
    .par_bridge()
    .map(|tf| {
        let detected = FrameStatistics::compute(&tf.frame, &config.reference)?
            .statistic(kind)
            .is_some_and(|s| kind.decide(s, threshold).present);
        Ok((tf.present, detected))
    })
    .collect::<Result<Vec<_>, EvalError>>()?;

    let n = outcomes.len() as f64;
    let true_duty = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let measured_occupancy = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    Ok(Recovery {
        true_duty,
        measured_occupancy,
        abs_error: (measured_occupancy - true_duty).abs(),
        scans,
    })
}

/// A row of the eval CSV: an operating point tagged with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub scenario: String,
    pub point: OperatingPoint,
}

pub const EVAL_HEADER: [&str; 7] = [
    "detector",
    "scenario",
    "snr_db",
    "threshold",
    "trials",
    "pd",
    "pfa",
];

/// Writes rows under [`EVAL_HEADER`]. Thresholds use the shortest text that
/// parses back to the same f64; rates and SNR use 9 significant digits.
pub fn write_eval_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVAL_HEADER)?;
    for r in rows {
        let p = &r.point;
        w.write_record([
            p.detector.to_string(),
            r.scenario.clone(),
            sig(p.snr_db, 9),
            format!("{:?}", p.threshold),
            p.trials.to_string(),
            sig(p.pd, 9),
            sig(p.pfa, 9),
        ])?;
    }
    w.flush()?;
    Ok(())
}
