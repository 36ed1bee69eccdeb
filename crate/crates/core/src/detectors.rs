//! The three sensing statistics and their decision rules.
//!
//! | detector | statistic                               | present when      |
//! |----------|-----------------------------------------|-------------------|
//! | `ed`     | mean power `(1/N) Σ |y(n)|²`            | statistic > λ_ED  |
//! | `acf1`   | `|R(1)| / R(0)`                         | statistic > λ_ACF |
//! | `cdist`  | normalized distance to a reference ACF  | statistic < γ     |
//!
//! `R(l) = Σ_{m=l}^{N-1} x(m) x*(m-l)` is the linear (non-circular)
//! autocorrelation: terms reaching before the start of the frame are
//! omitted. Every tie resolves to absent.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::iq_model::ComplexFrame;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("lag {lag} out of range for a frame of {len} samples")]
    Range { lag: usize, len: usize },
    #[error("zero-energy frame: autocorrelation ratio undefined")]
    Degenerate,
    #[error("vector length mismatch: reference {reference}, observed {observed}")]
    Dimension { reference: usize, observed: usize },
    #[error("invalid autocorrelation vector: {0}")]
    InvalidAcf(String),
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("{path}: line {line}: {message}")]
    ReferenceFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorKind {
    Ed,
    Acf1,
    Cdist,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Ed, DetectorKind::Acf1, DetectorKind::Cdist];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Ed => "ed",
            DetectorKind::Acf1 => "acf1",
            DetectorKind::Cdist => "cdist",
        }
    }

    /// True when larger statistics mean "more signal".
    pub fn present_above(self) -> bool {
        !matches!(self, DetectorKind::Cdist)
    }

    pub fn decide(self, statistic: f64, threshold: f64) -> Decision {
        match self {
            DetectorKind::Ed => energy_decide(statistic, threshold),
            DetectorKind::Acf1 => acf1_decide(statistic, threshold),
            DetectorKind::Cdist => distance_decide(statistic, threshold),
        }
    }

    pub fn threshold(self, config: &DetectorConfig) -> f64 {
        match self {
            DetectorKind::Ed => config.lambda_ed,
            DetectorKind::Acf1 => config.lambda_acf,
            DetectorKind::Cdist => config.gamma,
        }
    }

    /// Threshold giving an empirical false-alarm rate of `target_pfa` on
    /// the noise-only statistics `h0`: the upper `target_pfa` quantile for
    /// `ed`/`acf1`, the lower one for `cdist`.
    pub fn threshold_for_pfa(self, h0: &[f64], target_pfa: f64) -> Result<f64, DetectorError> {
        let p = if self.present_above() {
            1.0 - target_pfa
        } else {
            target_pfa
        };
        empirical_quantile(h0, p)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed" => Ok(DetectorKind::Ed),
            "acf1" => Ok(DetectorKind::Acf1),
            "cdist" => Ok(DetectorKind::Cdist),
            other => Err(format!(
                "unknown detector `{other}` (expected ed, acf1 or cdist)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub statistic: f64,
    pub threshold: f64,
    pub present: bool,
}

/// Magnitude autocorrelation normalized by lag 0, at lags `0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfVector {
    values: Vec<f64>,
}

impl AcfVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DetectorError> {
        if values.len() < 2 {
            return Err(DetectorError::InvalidAcf(format!(
                "need at least 2 lags, got {}",
                values.len()
            )));
        }
        if values[0] != 1.0 {
            return Err(DetectorError::InvalidAcf(format!(
                "values[0] must be exactly 1, got {}",
                values[0]
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(DetectorError::InvalidAcf(format!(
                "values[{i}] = {v} is outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    /// Noise-free ACF of a constant-modulus tone over `frame_len` samples:
    /// `(N - l) / N`.
    pub fn tone(frame_len: usize, lags: usize) -> Result<Self, DetectorError> {
        if lags > frame_len {
            return Err(DetectorError::Range {
                lag: lags.saturating_sub(1),
                len: frame_len,
            });
        }
        let n = frame_len as f64;
        Self::new((0..lags).map(|l| (n - l as f64) / n).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reference file text: `lags=<L>` then one value per line.
    pub fn render(&self) -> String {
        let mut out = format!("lags={}\n", self.values.len());
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, DetectorError> {
        let err = |line: usize, message: String| DetectorError::ReferenceFormat {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| err(1, "empty reference file".into()))?;
        let lags: usize = header
            .trim()
            .strip_prefix("lags=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(1, format!("expected `lags=<L>`, got `{}`", header.trim())))?;
        let values = lines
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| err(i + 1, format!("invalid value `{}`", l.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != lags {
            return Err(err(
                1,
                format!(
                    "header declares {lags} lags but {} values follow",
                    values.len()
                ),
            ));
        }
        Self::new(values).map_err(|e| err(2, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, DetectorError> {
        let text = fs::read_to_string(path).map_err(|source| DetectorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<(), DetectorError> {
        fs::write(path, self.render()).map_err(|source| DetectorError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Thresholds plus the correlation-distance reference profile. The number
/// of lags is the reference length.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub lambda_ed: f64,
    pub lambda_acf: f64,
    pub gamma: f64,
    pub reference: AcfVector,
}

impl DetectorConfig {
    pub fn new(
        lambda_ed: f64,
        lambda_acf: f64,
        gamma: f64,
        reference: AcfVector,
    ) -> Result<Self, DetectorError> {
        if !(lambda_ed.is_finite() && lambda_ed > 0.0) {
            return Err(DetectorError::Config(format!(
                "lambda_ed must be > 0, got {lambda_ed}"
            )));
        }
        if !(lambda_acf > 0.0 && lambda_acf < 1.0) {
            return Err(DetectorError::Config(format!(
                "lambda_acf must lie in (0, 1), got {lambda_acf}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(DetectorError::Config(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(Self {
            lambda_ed,
            lambda_acf,
            gamma,
            reference,
        })
    }

    pub fn acf_lags(&self) -> usize {
        self.reference.len()
    }

    /// Copy with one detector's threshold replaced.
    pub fn with_threshold(
        &self,
        kind: DetectorKind,
        threshold: f64,
    ) -> Result<Self, DetectorError> {
        let mut c = self.clone();
        match kind {
            DetectorKind::Ed => c.lambda_ed = threshold,
            DetectorKind::Acf1 => c.lambda_acf = threshold,
            DetectorKind::Cdist => c.gamma = threshold,
        }
        Self::new(c.lambda_ed, c.lambda_acf, c.gamma, c.reference)
    }
}

pub fn energy_statistic(frame: &ComplexFrame) -> f64 {
    frame.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / frame.len() as f64
}

pub fn energy_decide(statistic: f64, lambda_ed: f64) -> Decision {
    Decision {
        statistic,
        threshold: lambda_ed,
        present: statistic > lambda_ed,
    }
}

pub fn acf(frame: &ComplexFrame, lag: usize) -> Result<Complex64, DetectorError> {
    let x = frame.samples();
    if lag >= x.len() {
        return Err(DetectorError::Range { lag, len: x.len() });
    }
    Ok(x[lag..]
        .iter()
        .zip(x)
        .map(|(late, early)| late * early.conj())
        .sum())
}

fn lag_zero(frame: &ComplexFrame) -> Result<f64, DetectorError> {
    let r0: f64 = frame.samples().iter().map(|s| s.norm_sqr()).sum();
    if r0 > 0.0 {
        Ok(r0)
    } else {
        Err(DetectorError::Degenerate)
    }
}

pub fn acf1_statistic(frame: &ComplexFrame) -> Result<f64, DetectorError> {
    let r0 = lag_zero(frame)?;
    Ok((acf(frame, 1)?.norm() / r0).min(1.0))
}

pub fn acf1_decide(statistic: f64, lambda_acf: f64) -> Decision {
    Decision {
        statistic,
        threshold: lambda_acf,
        present: statistic > lambda_acf,
    }
}

/// `values[l] = |R(l)| / R(0)` for `l` in `0..lags`.
pub fn acf_vector(frame: &ComplexFrame, lags: usize) -> Result<AcfVector, DetectorError> {
    if lags < 2 {
        return Err(DetectorError::InvalidAcf(format!(
            "need at least 2 lags, got {lags}"
        )));
    }
    if lags > frame.len() {
        return Err(DetectorError::Range {
            lag: lags - 1,
            len: frame.len(),
        });
    }
    let r0 = lag_zero(frame)?;
    let mut values = Vec::with_capacity(lags);
    values.push(1.0);
    for l in 1..lags {
        // Cauchy-Schwarz bounds the ratio by 1; min() only absorbs rounding.
        values.push((acf(frame, l)?.norm() / r0).min(1.0));
    }
    AcfVector::new(values)
}

/// Entry-wise mean of the training frames' ACF vectors, lag 0 pinned to 1.
pub fn calibrate_reference(
    training: &[ComplexFrame],
    lags: usize,
) -> Result<AcfVector, DetectorError> {
    if training.is_empty() {
        return Err(DetectorError::Calibration(
            "reference training set is empty".into(),
        ));
    }
    let mut sum = vec![0.0; lags];
    for frame in training {
        for (acc, v) in sum.iter_mut().zip(acf_vector(frame, lags)?.values()) {
            *acc += v;
        }
    }
    let k = training.len() as f64;
    let mut values: Vec<f64> = sum.into_iter().map(|s| (s / k).clamp(0.0, 1.0)).collect();
    values[0] = 1.0;
    AcfVector::new(values)
}

/// Euclidean distance between two ACF profiles, without normalization.
pub fn raw_correlation_distance(
    reference: &AcfVector,
    observed: &AcfVector,
) -> Result<f64, DetectorError> {
    if reference.len() != observed.len() {
        return Err(DetectorError::Dimension {
            reference: reference.len(),
            observed: observed.len(),
        });
    }
    Ok(reference
        .values()
        .iter()
        .zip(observed.values())
        .map(|(r, o)| (r - o) * (r - o))
        .sum::<f64>()
        .sqrt())
}

/// [`raw_correlation_distance`] divided by `√L`, which keeps it in `[0, 1]`.
pub fn correlation_distance(
    reference: &AcfVector,
    observed: &AcfVector,
) -> Result<f64, DetectorError> {
    let raw = raw_correlation_distance(reference, observed)?;
    Ok((raw / (reference.len() as f64).sqrt()).min(1.0))
}

pub fn distance_decide(d: f64, gamma: f64) -> Decision {
    Decision {
        statistic: d,
        threshold: gamma,
        present: d < gamma,
    }
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n-1)p`, the default in most numeric libraries).
pub fn empirical_quantile(values: &[f64], p: f64) -> Result<f64, DetectorError> {
    if values.is_empty() {
        return Err(DetectorError::Calibration(
            "no samples to take a quantile of".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(DetectorError::Calibration(format!(
            "quantile level {p} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub const MIN_CALIBRATION_FRAMES: usize = 100;

fn check_calibration_input(frames: &[ComplexFrame], target_pfa: f64) -> Result<(), DetectorError> {
    if frames.len() < MIN_CALIBRATION_FRAMES {
        return Err(DetectorError::Calibration(format!(
            "need at least {MIN_CALIBRATION_FRAMES} noise frames, got {}",
            frames.len()
        )));
    }
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(DetectorError::Calibration(format!(
            "target_pfa must lie in (0, 1), got {target_pfa}"
        )));
    }
    Ok(())
}

/// Energy threshold at the empirical `1 - target_pfa` quantile of noise-only
/// frames.
pub fn calibrate_ed_threshold(
    noise_frames: &[ComplexFrame],
    target_pfa: f64,
) -> Result<f64, DetectorError> {
    check_calibration_input(noise_frames, target_pfa)?;
    let stats: Vec<f64> = noise_frames.iter().map(energy_statistic).collect();
    DetectorKind::Ed.threshold_for_pfa(&stats, target_pfa)
}

pub fn calibrate_acf1_threshold(
    noise_frames: &[ComplexFrame],
    target_pfa: f64,
) -> Result<f64, DetectorError> {
    check_calibration_input(noise_frames, target_pfa)?;
    let stats = noise_frames
        .iter()
        .map(acf1_statistic)
        .collect::<Result<Vec<_>, _>>()?;
    DetectorKind::Acf1.threshold_for_pfa(&stats, target_pfa)
}

/// γ at the empirical `target_pfa` quantile of noise-only distances.
pub fn calibrate_distance_threshold(
    noise_frames: &[ComplexFrame],
    reference: &AcfVector,
    target_pfa: f64,
) -> Result<f64, DetectorError> {
    check_calibration_input(noise_frames, target_pfa)?;
    let stats = noise_frames
        .iter()
        .map(|f| correlation_distance(reference, &acf_vector(f, reference.len())?))
        .collect::<Result<Vec<_>, _>>()?;
    DetectorKind::Cdist.threshold_for_pfa(&stats, target_pfa)
}

/// All three statistics of one frame, computed from a single ACF pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStatistics {
    pub energy: f64,
    /// `None` for a zero-energy frame.
    pub acf: Option<AcfVector>,
    pub distance: Option<f64>,
    pub raw_distance: Option<f64>,
}

impl FrameStatistics {
    pub fn compute(frame: &ComplexFrame, reference: &AcfVector) -> Result<Self, DetectorError> {
        let energy = energy_statistic(frame);
        let acf = match acf_vector(frame, reference.len()) {
            Ok(v) => Some(v),
            Err(DetectorError::Degenerate) => None,
            Err(e) => return Err(e),
        };
        let (distance, raw_distance) = match &acf {
            Some(v) => (
                Some(correlation_distance(reference, v)?),
                Some(raw_correlation_distance(reference, v)?),
            ),
            None => (None, None),
        };
        Ok(Self {
            energy,
            acf,
            distance,
            raw_distance,
        })
    }

    /// The statistic `kind` compares against its threshold; `None` when the
    /// frame is degenerate for that detector.
    pub fn statistic(&self, kind: DetectorKind) -> Option<f64> {
        match kind {
            DetectorKind::Ed => Some(self.energy),
            DetectorKind::Acf1 => self.acf.as_ref().map(|v| v.values()[1]),
            DetectorKind::Cdist => self.distance,
        }
    }
}
