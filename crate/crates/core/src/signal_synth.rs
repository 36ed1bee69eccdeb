//! Seeded synthetic baseband: AWGN, tones, BPSK, SNR mixing and on/off
//! channel timelines with ground-truth labels.
//!
//! Every generator is a pure function of its arguments. Frame `k` of a
//! stream seeded with `s` is drawn from ChaCha8 seeded with `s` on stream `k`,
//! so any single frame can be regenerated without replaying its
//! predecessors and parallel workers never share RNG state.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::iq_model::{ComplexFrame, ComplexSample, FrameMeta, IqError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("frame length must be at least 1")]
    EmptyFrame,
    #[error("noise total_power must be finite and > 0, got {0}")]
    NoisePower(f64),
    #[error("invalid signal spec: {0}")]
    Signal(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid timeline: {0}")]
    Timeline(String),
    #[error("frame lengths differ: signal {signal}, noise {noise}")]
    LengthMismatch { signal: usize, noise: usize },
    #[error("cannot scale a zero-power signal to {snr_db} dB SNR")]
    UndefinedScale { snr_db: f64 },
    #[error(transparent)]
    Frame(#[from] IqError),
}

/// Derives an independent 64-bit seed for `(master, purpose, index)`.
///
/// `purpose` is hashed with FNV-1a, combined with `master`, then mixed with
/// `index` through two SplitMix64 finalizer rounds.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(splitmix(master ^ h).wrapping_add(index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

/// Circularly symmetric complex white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    total_power: f64,
    seed: u64,
}

impl NoiseSpec {
    /// `total_power` is E[|y|²] per complex sample.
    pub fn new(total_power: f64, seed: u64) -> Result<Self, SynthError> {
        if !(total_power.is_finite() && total_power > 0.0) {
            return Err(SynthError::NoisePower(total_power));
        }
        Ok(Self { total_power, seed })
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    /// Complex exponential at `normalized_freq` cycles/sample, in (-0.5, 0.5).
    Tone { normalized_freq: f64 },
    /// Random ±1 symbols, each held for `samples_per_symbol` samples.
    Bpsk { samples_per_symbol: usize },
    /// No transmitter.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    waveform: Waveform,
    amplitude: f64,
    phase: f64,
    seed: u64,
}

impl SignalSpec {
    pub fn new(
        waveform: Waveform,
        amplitude: f64,
        phase: f64,
        seed: u64,
    ) -> Result<Self, SynthError> {
        match waveform {
            Waveform::Tone { normalized_freq }
                if !(normalized_freq > -0.5 && normalized_freq < 0.5) =>
            {
                return Err(SynthError::Signal(format!(
                    "tone normalized_freq must lie in (-0.5, 0.5), got {normalized_freq}"
                )));
            }
            Waveform::Bpsk {
                samples_per_symbol: 0,
            } => {
                return Err(SynthError::Signal(
                    "bpsk samples_per_symbol must be >= 1".into(),
                ));
            }
            _ => {}
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(SynthError::Signal(format!(
                "amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !phase.is_finite() {
            return Err(SynthError::Signal("phase must be finite".into()));
        }
        Ok(Self {
            waveform,
            amplitude,
            phase,
            seed,
        })
    }

    pub fn tone(normalized_freq: f64, amplitude: f64) -> Result<Self, SynthError> {
        Self::new(Waveform::Tone { normalized_freq }, amplitude, 0.0, 0)
    }

    pub fn none() -> Self {
        Self {
            waveform: Waveform::None,
            amplitude: 0.0,
            phase: 0.0,
            seed: 0,
        }
    }

    pub fn waveform(&self) -> Waveform {
        self.waveform
    }

    /// Amplitude actually emitted; always 0 for [`Waveform::None`].
    pub fn amplitude(&self) -> f64 {
        match self.waveform {
            Waveform::None => 0.0,
            _ => self.amplitude,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    /// Mean power per sample. Both waveforms are constant-modulus, so this is
    /// exact for every frame, not just in expectation.
    pub fn nominal_power(&self) -> f64 {
        self.amplitude() * self.amplitude()
    }
}

/// Periodic on/off pattern of a synthetic transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySchedule {
    period_s: f64,
    on_intervals: Vec<(f64, f64)>,
}

impl OccupancySchedule {
    /// Intervals are half-open `[start, end)` offsets within one period;
    /// they must be sorted, disjoint and inside `[0, period_s]`.
    pub fn new(period_s: f64, on_intervals: Vec<(f64, f64)>) -> Result<Self, SynthError> {
        if !(period_s.is_finite() && period_s > 0.0) {
            return Err(SynthError::Schedule(format!(
                "period_s must be finite and > 0, got {period_s}"
            )));
        }
        let mut prev_end = 0.0;
        for (i, &(start, end)) in on_intervals.iter().enumerate() {
            if !(start.is_finite() && end.is_finite())
                || start < 0.0
                || end > period_s
                || start >= end
            {
                return Err(SynthError::Schedule(format!(
                    "interval {i} [{start}, {end}) must satisfy 0 <= start < end <= period_s ({period_s})"
                )));
            }
            if start < prev_end {
                return Err(SynthError::Schedule(format!(
                    "interval {i} starts at {start}, before the previous interval ends ({prev_end})"
                )));
            }
            prev_end = end;
        }
        Ok(Self {
            period_s,
            on_intervals,
        })
    }

    pub fn always_on(period_s: f64) -> Result<Self, SynthError> {
        Self::new(period_s, vec![(0.0, period_s)])
    }

    pub fn always_off(period_s: f64) -> Result<Self, SynthError> {
        Self::new(period_s, Vec::new())
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn on_intervals(&self) -> &[(f64, f64)] {
        &self.on_intervals
    }

    pub fn duty_cycle(&self) -> f64 {
        self.on_intervals.iter().map(|(s, e)| e - s).sum::<f64>() / self.period_s
    }

    /// Whether the transmitter is on at absolute time `t`.
    pub fn is_on(&self, t: f64) -> bool {
        let phase = t.rem_euclid(self.period_s);
        self.on_intervals
            .iter()
            .any(|&(s, e)| s <= phase && phase < e)
    }
}

pub fn gen_noise_frame(
    n: usize,
    spec: &NoiseSpec,
    frame_index: u64,
) -> Result<ComplexFrame, SynthError> {
    if n == 0 {
        return Err(SynthError::EmptyFrame);
    }
    let sigma = (spec.total_power / 2.0).sqrt();
    let mut rng = frame_rng(spec.seed, frame_index);
    let samples = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            ComplexSample::new(sigma * re, sigma * im)
        })
        .collect();
    Ok(ComplexFrame::new(samples, FrameMeta::default())?)
}

/// `tone`: `amplitude · e^{j(2π f m + phase)}`.
/// `bpsk`: `amplitude · e^{j phase} · (±1)` with symbols drawn per frame.
/// `none`: all zeros.
pub fn gen_signal_frame(
    n: usize,
    spec: &SignalSpec,
    frame_index: u64,
) -> Result<ComplexFrame, SynthError> {
    if n == 0 {
        return Err(SynthError::EmptyFrame);
    }
    let a = spec.amplitude();
    let samples = match spec.waveform {
        Waveform::Tone { normalized_freq } => (0..n)
            .map(|m| Complex64::from_polar(a, 2.0 * PI * normalized_freq * m as f64 + spec.phase))
            .collect(),
        Waveform::Bpsk { samples_per_symbol } => {
            let carrier = Complex64::from_polar(a, spec.phase);
            let mut rng = frame_rng(spec.seed, frame_index);
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let symbol = if rng.random::<bool>() {
                    carrier
                } else {
                    -carrier
                };
                let hold = samples_per_symbol.min(n - out.len());
                out.extend(std::iter::repeat_n(symbol, hold));
            }
            out
        }
        Waveform::None => vec![ComplexSample::new(0.0, 0.0); n],
    };
    Ok(ComplexFrame::new(samples, FrameMeta::default())?)
}

/// Scale α such that `α² · signal_power / noise_power = 10^(snr_db/10)`.
///
/// `snr_db = -inf` means no signal and yields 0.
pub fn snr_scale(signal_power: f64, noise_power: f64, snr_db: f64) -> Result<f64, SynthError> {
    if snr_db == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if !snr_db.is_finite()
        || signal_power.is_nan()
        || signal_power <= 0.0
        || noise_power.is_nan()
        || noise_power <= 0.0
    {
        return Err(SynthError::UndefinedScale { snr_db });
    }
    Ok((noise_power / signal_power * 10f64.powf(snr_db / 10.0)).sqrt())
}

/// `α · signal + noise` using nominal powers; the result carries the noise
/// frame's metadata.
pub fn mix_at_snr(
    signal: &ComplexFrame,
    signal_power: f64,
    noise: &ComplexFrame,
    noise_power: f64,
    snr_db: f64,
) -> Result<ComplexFrame, SynthError> {
    if signal.len() != noise.len() {
        return Err(SynthError::LengthMismatch {
            signal: signal.len(),
            noise: noise.len(),
        });
    }
    let alpha = snr_scale(signal_power, noise_power, snr_db)?;
    if alpha == 0.0 {
        return Ok(noise.clone());
    }
    let samples = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(s, w)| s * alpha + w)
        .collect();
    Ok(ComplexFrame::new(samples, noise.meta())?)
}

/// Cadence and capture metadata of a synthetic channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineSpec {
    pub frame_len: usize,
    pub frame_interval_s: f64,
    pub total_s: f64,
    pub start_time: f64,
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
}

impl TimelineSpec {
    /// Number of frames: one per whole interval in `total_s`.
    pub fn frame_count(&self) -> u64 {
        // The epsilon absorbs ratios like 0.3/0.1 landing just below an integer.
        (self.total_s / self.frame_interval_s + 1e-9).floor() as u64
    }
}

#[derive(Debug, Clone)]
pub struct TimelineFrame {
    pub frame: ComplexFrame,
    /// Ground truth: the transmitter was on at capture time.
    pub present: bool,
}

/// Lazily generated frames of one synthetic channel.
#[derive(Debug, Clone)]
pub struct Timeline {
    schedule: OccupancySchedule,
    signal: SignalSpec,
    noise: NoiseSpec,
    snr_db: f64,
    spec: TimelineSpec,
    next: u64,
    count: u64,
}

impl Iterator for Timeline {
    type Item = TimelineFrame;

    fn next(&mut self) -> Option<TimelineFrame> {
        if self.next >= self.count {
            return None;
        }
        let k = self.next;
        self.next += 1;
        Some(self.frame_at(k))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Timeline {}

impl Timeline {
    fn frame_at(&self, k: u64) -> TimelineFrame {
        let meta = FrameMeta {
            sample_rate_hz: self.spec.sample_rate_hz,
            center_freq_hz: self.spec.center_freq_hz,
            capture_time: self.spec.start_time + k as f64 * self.spec.frame_interval_s,
        };
        let present = self.schedule.is_on(meta.capture_time);
        // All inputs were validated when the timeline was built.
        let noise = gen_noise_frame(self.spec.frame_len, &self.noise, k)
            .and_then(|f| Ok(f.with_meta(meta)?))
            .expect("validated timeline");
        let frame = if present && self.signal.nominal_power() > 0.0 {
            let signal =
                gen_signal_frame(self.spec.frame_len, &self.signal, k).expect("validated timeline");
            mix_at_snr(
                &signal,
                self.signal.nominal_power(),
                &noise,
                self.noise.total_power,
                self.snr_db,
            )
            .expect("validated timeline")
        } else {
            noise
        };
        TimelineFrame { frame, present }
    }
}

/// One frame per `frame_interval_s`, labelled present iff the capture time
/// falls inside an on-interval of `schedule`. Present frames are signal plus
/// noise at `snr_db`; absent frames are noise alone. Frame `k` uses stream
/// `k` of both the noise and the signal seed.
pub fn gen_channel_timeline(
    schedule: &OccupancySchedule,
    signal: &SignalSpec,
    noise: &NoiseSpec,
    snr_db: f64,
    spec: TimelineSpec,
) -> Result<Timeline, SynthError> {
    if spec.frame_len == 0 {
        return Err(SynthError::EmptyFrame);
    }
    if !(spec.frame_interval_s.is_finite() && spec.frame_interval_s > 0.0) {
        return Err(SynthError::Timeline(format!(
            "frame_interval_s must be finite and > 0, got {}",
            spec.frame_interval_s
        )));
    }
    if !(spec.total_s.is_finite() && spec.total_s >= 0.0) {
        return Err(SynthError::Timeline(format!(
            "total_s must be finite and >= 0, got {}",
            spec.total_s
        )));
    }
    if !(snr_db.is_finite() || snr_db == f64::NEG_INFINITY) {
        return Err(SynthError::Timeline(format!(
            "snr_db must be finite or -inf, got {snr_db}"
        )));
    }
    FrameMeta {
        sample_rate_hz: spec.sample_rate_hz,
        center_freq_hz: spec.center_freq_hz,
        capture_time: spec.start_time,
    }
    .validate()
    .map_err(SynthError::Frame)?;

    Ok(Timeline {
        schedule: schedule.clone(),
        signal: *signal,
        noise: *noise,
        snr_db,
        spec,
        next: 0,
        count: spec.frame_count(),
    })
}
