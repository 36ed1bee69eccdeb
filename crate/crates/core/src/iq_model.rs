//! Complex baseband frames and the raw IQ recording format.
//!
//! A recording is a pair of files:
//!
//! * `<name>.iq`: interleaved little-endian `f32` pairs, I before Q;
//! * `<name>.iq.meta`: UTF-8 `key=value` lines with the keys
//!   `sample_rate_hz`, `center_freq_hz`, `start_time_unix` and `num_samples`.
//!
//! Frames hold `f64` samples so detector math runs at full precision. The
//! payload stores `f32`, so writing rounds each component to the nearest
//! `f32`; anything read back from a payload survives a further write/read
//! cycle bit-exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// One complex baseband sample.
pub type ComplexSample = Complex64;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("frame must contain at least one sample")]
    EmptyFrame,
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("invalid frame metadata: {0}")]
    InvalidMeta(String),
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: missing meta key `{key}`")]
    MissingKey { path: PathBuf, key: &'static str },
    #[error("{path}: payload length {bytes} bytes is not a multiple of 8")]
    Truncated { path: PathBuf, bytes: u64 },
    #[error("{path}: meta declares {declared} samples but payload holds {actual}")]
    LengthMismatch {
        path: PathBuf,
        declared: u64,
        actual: u64,
    },
    #[error("non-finite sample at index {index} in {path}")]
    Data { path: PathBuf, index: usize },
    #[error("frame {index} has metadata inconsistent with frame 0 ({what})")]
    Consistency { index: usize, what: &'static str },
    #[error("frame length must be at least 1")]
    ZeroFrameLength,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Capture metadata attached to every frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    /// Seconds since the Unix epoch (UTC).
    pub capture_time: f64,
}

impl Default for FrameMeta {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1.0,
            center_freq_hz: 1.0,
            capture_time: 0.0,
        }
    }
}

impl FrameMeta {
    pub(crate) fn validate(&self) -> Result<(), IqError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(IqError::InvalidMeta(format!(
                "sample_rate_hz must be finite and > 0, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.center_freq_hz.is_finite() && self.center_freq_hz > 0.0) {
            return Err(IqError::InvalidMeta(format!(
                "center_freq_hz must be finite and > 0, got {}",
                self.center_freq_hz
            )));
        }
        if !self.capture_time.is_finite() {
            return Err(IqError::InvalidMeta("capture_time must be finite".into()));
        }
        Ok(())
    }
}

/// A fixed-length, immutable block of complex samples: one detection cycle.
///
/// Cloning is cheap; the sample buffer is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFrame {
    samples: Arc<[ComplexSample]>,
    meta: FrameMeta,
}

impl ComplexFrame {
    pub fn new(samples: Vec<ComplexSample>, meta: FrameMeta) -> Result<Self, IqError> {
        if samples.is_empty() {
            return Err(IqError::EmptyFrame);
        }
        if let Some(index) = samples
            .iter()
            .position(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(IqError::NonFinite { index });
        }
        meta.validate()?;
        Ok(Self {
            samples: samples.into(),
            meta,
        })
    }

    pub fn samples(&self) -> &[ComplexSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; frames hold at least one sample.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn meta(&self) -> FrameMeta {
        self.meta
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.meta.sample_rate_hz
    }

    pub fn center_freq_hz(&self) -> f64 {
        self.meta.center_freq_hz
    }

    pub fn capture_time(&self) -> f64 {
        self.meta.capture_time
    }

    /// Same samples under different capture metadata.
    pub fn with_meta(&self, meta: FrameMeta) -> Result<Self, IqError> {
        meta.validate()?;
        Ok(Self {
            samples: Arc::clone(&self.samples),
            meta,
        })
    }

    /// A new frame with every sample multiplied by `c`.
    pub fn scaled(&self, c: ComplexSample) -> Result<Self, IqError> {
        Self::new(self.samples.iter().map(|s| s * c).collect(), self.meta)
    }
}

/// Contents of a `.iq.meta` sidecar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingMeta {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    pub start_time: f64,
    pub num_samples: u64,
}

impl RecordingMeta {
    const KEYS: [&'static str; 4] = [
        "sample_rate_hz",
        "center_freq_hz",
        "start_time_unix",
        "num_samples",
    ];

    pub fn parse(text: &str, path: &Path) -> Result<Self, IqError> {
        let mut values: [Option<&str>; 4] = [None; 4];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IqError::Format {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            if let Some(slot) = Self::KEYS.iter().position(|k| *k == key.trim()) {
                values[slot] = Some(value.trim());
            }
        }

        let fetch = |slot: usize| {
            values[slot].ok_or(IqError::MissingKey {
                path: path.to_path_buf(),
                key: Self::KEYS[slot],
            })
        };
        let bad = |key: &str, value: &str| IqError::Format {
            path: path.to_path_buf(),
            line: line_of(text, key),
            message: format!("invalid value `{value}` for `{key}`"),
        };
        let real = |slot: usize| -> Result<f64, IqError> {
            let v = fetch(slot)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(Self::KEYS[slot], v))
        };

        let meta = RecordingMeta {
            sample_rate_hz: real(0)?,
            center_freq_hz: real(1)?,
            start_time: real(2)?,
            num_samples: {
                let v = fetch(3)?;
                v.parse().map_err(|_| bad(Self::KEYS[3], v))?
            },
        };
        if meta.sample_rate_hz <= 0.0 {
            return Err(bad("sample_rate_hz", fetch(0)?));
        }
        if meta.center_freq_hz <= 0.0 {
            return Err(bad("center_freq_hz", fetch(1)?));
        }
        Ok(meta)
    }

    pub fn render(&self) -> String {
        format!(
            "sample_rate_hz={:?}\ncenter_freq_hz={:?}\nstart_time_unix={:?}\nnum_samples={}\n",
            self.sample_rate_hz, self.center_freq_hz, self.start_time, self.num_samples
        )
    }
}

fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key))
        .map_or(0, |i| i + 1)
}

/// Frames cut from a recording, plus the tail that did not fill a frame.
#[derive(Debug, Clone)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub frames: Vec<ComplexFrame>,
    pub discarded_samples: usize,
}

/// Reads a recording and slices it into frames of `frame_len` samples.
///
/// Frame `k` gets capture time `start_time + k * frame_len / sample_rate_hz`.
/// A trailing partial block is dropped and counted in `discarded_samples`.
pub fn read_recording(
    payload_path: &Path,
    meta_path: &Path,
    frame_len: usize,
) -> Result<Recording, IqError> {
    if frame_len == 0 {
        return Err(IqError::ZeroFrameLength);
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IqError::Io { path, source }
    };
    let meta_text = fs::read_to_string(meta_path).map_err(io_err(meta_path))?;
    let meta = RecordingMeta::parse(&meta_text, meta_path)?;
    let bytes = fs::read(payload_path).map_err(io_err(payload_path))?;

    if bytes.len() % 8 != 0 {
        return Err(IqError::Truncated {
            path: payload_path.to_path_buf(),
            bytes: bytes.len() as u64,
        });
    }
    let actual = (bytes.len() / 8) as u64;
    if actual != meta.num_samples {
        return Err(IqError::LengthMismatch {
            path: meta_path.to_path_buf(),
            declared: meta.num_samples,
            actual,
        });
    }

    let samples = decode_payload(&bytes).map_err(|index| IqError::Data {
        path: payload_path.to_path_buf(),
        index,
    })?;

    let n_frames = samples.len() / frame_len;
    let discarded_samples = samples.len() - n_frames * frame_len;
    let frame_duration = frame_len as f64 / meta.sample_rate_hz;
    let frames = samples
        .chunks_exact(frame_len)
        .enumerate()
        .map(|(k, block)| {
            ComplexFrame::new(
                block.to_vec(),
                FrameMeta {
                    sample_rate_hz: meta.sample_rate_hz,
                    center_freq_hz: meta.center_freq_hz,
                    capture_time: meta.start_time + k as f64 * frame_duration,
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Recording {
        meta,
        frames,
        discarded_samples,
    })
}

/// Writes frames back to back as one recording.
///
/// All frames must share sample rate and center frequency. The meta file
/// takes its start time from the first frame; an empty sequence writes an
/// empty payload with default metadata.
pub fn write_recording(
    frames: &[ComplexFrame],
    payload_path: &Path,
    meta_path: &Path,
) -> Result<RecordingMeta, IqError> {
    let first = frames.first().map(ComplexFrame::meta).unwrap_or_default();
    for (index, f) in frames.iter().enumerate().skip(1) {
        if f.sample_rate_hz() != first.sample_rate_hz {
            return Err(IqError::Consistency {
                index,
                what: "sample_rate_hz",
            });
        }
        if f.center_freq_hz() != first.center_freq_hz {
            return Err(IqError::Consistency {
                index,
                what: "center_freq_hz",
            });
        }
    }

    let num_samples: usize = frames.iter().map(ComplexFrame::len).sum();
    let mut payload = Vec::with_capacity(num_samples * 8);
    for s in frames.iter().flat_map(|f| f.samples()) {
        payload.extend_from_slice(&(s.re as f32).to_le_bytes());
        payload.extend_from_slice(&(s.im as f32).to_le_bytes());
    }

    let meta = RecordingMeta {
        sample_rate_hz: first.sample_rate_hz,
        center_freq_hz: first.center_freq_hz,
        start_time: first.capture_time,
        num_samples: num_samples as u64,
    };
    write_file(payload_path, &payload)?;
    write_file(meta_path, meta.render().as_bytes())?;
    Ok(meta)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), IqError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(contents))
        .map_err(|source| IqError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Decodes interleaved LE f32 pairs. On a non-finite component returns the
/// index of the offending sample.
fn decode_payload(bytes: &[u8]) -> Result<Vec<ComplexSample>, usize> {
    bytes
        .chunks_exact(8)
        .enumerate()
        .map(|(index, pair)| {
            let re = f32::from_le_bytes(pair[..4].try_into().unwrap());
            let im = f32::from_le_bytes(pair[4..].try_into().unwrap());
            if re.is_finite() && im.is_finite() {
                Ok(ComplexSample::new(re as f64, im as f64))
            } else {
                Err(index)
            }
        })
        .collect()
}
