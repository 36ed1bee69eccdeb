//! Channel plans and the three-detector sweep.
//!
//! A sweep applies `ed`, `acf1` and `cdist` to the same frame of every
//! channel and logs one [`ScanRecord`] per detector. Channels are
//! independent, so the sweep fans out across the ambient rayon pool and
//! merges per-channel logs by the canonical record order; the result does
//! not depend on the worker count.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::detectors::{DetectorConfig, DetectorError, DetectorKind, FrameStatistics};
use crate::fmt::sig;
use crate::iq_model::ComplexFrame;
use crate::signal_synth::TimelineFrame;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("band `{band}`: {message}")]
    Plan { band: String, message: String },
    #[error(
        "frame at {frame_mhz} MHz does not belong to {band} channel {index} ({channel_mhz} MHz, tolerance {tolerance_mhz} MHz)"
    )]
    Routing {
        band: String,
        index: usize,
        channel_mhz: f64,
        frame_mhz: f64,
        tolerance_mhz: f64,
    },
    #[error("no frame source for {band} channel {index}")]
    MissingSource { band: String, index: usize },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of a channel-plan table.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub name: String,
    pub start_mhz: f64,
    pub stop_mhz: f64,
    /// Steps applied cyclically: `[3, 2]` means +3, +2, +3, +2, ...
    pub spacing_mhz: Vec<f64>,
    pub expected_channels: usize,
}

impl BandSpec {
    pub fn new(
        name: &str,
        start_mhz: f64,
        stop_mhz: f64,
        spacing_mhz: &[f64],
        expected_channels: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            start_mhz,
            stop_mhz,
            spacing_mhz: spacing_mhz.to_vec(),
            expected_channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub band: Arc<str>,
    pub index_in_band: usize,
    pub center_freq_mhz: f64,
    /// Distance to the nearest neighbour in the same band; half of it is
    /// the routing tolerance.
    pub local_spacing_mhz: f64,
}

impl Channel {
    pub fn routing_tolerance_mhz(&self) -> f64 {
        self.local_spacing_mhz / 2.0
    }

    pub fn same_channel(&self, other: &Channel) -> bool {
        self.band == other.band && self.index_in_band == other.index_in_band
    }
}

pub const STOP_TOLERANCE_MHZ: f64 = 1e-9;

pub fn build_channel_plan(specs: &[BandSpec]) -> Result<Vec<Channel>, ScanError> {
    let mut plan = Vec::new();
    for spec in specs {
        let fail = |message: String| ScanError::Plan {
            band: spec.name.clone(),
            message,
        };
        if spec.expected_channels == 0 {
            return Err(fail("expected_channels must be at least 1".into()));
        }
        if spec.spacing_mhz.is_empty()
            || spec
                .spacing_mhz
                .iter()
                .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(fail(format!(
                "spacing must be a non-empty list of positive steps, got {:?}",
                spec.spacing_mhz
            )));
        }

        let mut freqs = Vec::with_capacity(spec.expected_channels);
        let mut f = spec.start_mhz;
        freqs.push(f);
        for step in spec
            .spacing_mhz
            .iter()
            .cycle()
            .take(spec.expected_channels - 1)
        {
            f += step;
            freqs.push(f);
        }

        let last = *freqs.last().expect("at least one channel");
        if (last - spec.stop_mhz).abs() > STOP_TOLERANCE_MHZ {
            return Err(fail(format!(
                "{} channels from {} MHz end at {last} MHz, expected {} MHz",
                spec.expected_channels, spec.start_mhz, spec.stop_mhz
            )));
        }

        let band: Arc<str> = Arc::from(spec.name.as_str());
        for (i, &freq) in freqs.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| freq - freqs[j]);
            let next = freqs.get(i + 1).map(|n| n - freq);
            let local = match (prev, next) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => spec.spacing_mhz[0],
            };
            plan.push(Channel {
                band: Arc::clone(&band),
                index_in_band: i,
                center_freq_mhz: freq,
                local_spacing_mhz: local,
            });
        }
    }
    Ok(plan)
}

/// The six bands of the reference campaign (GSM-850/1900 up- and downlink,
/// 2.4 GHz and 5.8 GHz ISM), 123 channels.
///
/// The GSM "3, 2" spacing alternates 3 MHz and 2 MHz steps starting with 3.
pub fn table1_bands() -> Vec<BandSpec> {
    vec![
        BandSpec::new("GSM-850 (U/L)", 824.0, 849.0, &[3.0, 2.0], 11),
        BandSpec::new("GSM-850 (D/L)", 869.0, 894.0, &[3.0, 2.0], 11),
        BandSpec::new("GSM-1900 (U/L)", 1850.0, 1910.0, &[3.0, 2.0], 25),
        BandSpec::new("GSM-1900 (D/L)", 1930.0, 1990.0, &[3.0, 2.0], 25),
        BandSpec::new("2.4 GHz", 2402.0, 2497.0, &[5.0], 20),
        BandSpec::new("5.8 GHz", 5725.0, 5875.0, &[5.0], 31),
    ]
}

pub fn builtin_table1_plan() -> Vec<Channel> {
    build_channel_plan(&table1_bands()).expect("built-in plan is consistent")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub capture_time: f64,
    pub channel: Channel,
    pub detector: DetectorKind,
    /// `None` marks a frame the detector could not evaluate (zero energy);
    /// such records are always absent.
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub present: bool,
}

impl ScanRecord {
    pub fn is_degenerate(&self) -> bool {
        self.statistic.is_none()
    }
}

/// Canonical order: capture time, band, index in band, detector.
pub fn canonical_order(a: &ScanRecord, b: &ScanRecord) -> Ordering {
    a.capture_time
        .total_cmp(&b.capture_time)
        .then_with(|| a.channel.band.cmp(&b.channel.band))
        .then_with(|| a.channel.index_in_band.cmp(&b.channel.index_in_band))
        .then_with(|| a.detector.cmp(&b.detector))
}

/// Runs all three detectors on one frame.
pub fn scan_channel(
    frame: &ComplexFrame,
    channel: &Channel,
    config: &DetectorConfig,
) -> Result<[ScanRecord; 3], ScanError> {
    let frame_mhz = frame.center_freq_hz() / 1e6;
    let tolerance_mhz = channel.routing_tolerance_mhz();
    if (frame_mhz - channel.center_freq_mhz).abs() > tolerance_mhz {
        return Err(ScanError::Routing {
            band: channel.band.to_string(),
            index: channel.index_in_band,
            channel_mhz: channel.center_freq_mhz,
            frame_mhz,
            tolerance_mhz,
        });
    }

    let stats = FrameStatistics::compute(frame, &config.reference)?;
    Ok(DetectorKind::ALL.map(|kind| {
        let threshold = kind.threshold(config);
        let statistic = stats.statistic(kind);
        ScanRecord {
            capture_time: frame.capture_time(),
            channel: channel.clone(),
            detector: kind,
            statistic,
            threshold,
            present: statistic.is_some_and(|s| kind.decide(s, threshold).present),
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub capture_time: f64,
    pub channel: Channel,
    pub present: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepLog {
    pub records: Vec<ScanRecord>,
    pub truth: Vec<TruthRecord>,
}

impl SweepLog {
    pub fn scans(&self) -> usize {
        self.truth.len()
    }
}

/// Sweeps every channel of `plan`, pulling frames from `source(channel)`.
///
/// Records come back in canonical order and truth labels are sorted by
/// (time, band, index). Channels run in parallel on the current rayon pool.
pub fn run_sweep<F, S>(
    plan: &[Channel],
    source: F,
    config: &DetectorConfig,
) -> Result<SweepLog, ScanError>
where
    F: Fn(&Channel) -> Option<S> + Sync,
    S: Iterator<Item = TimelineFrame>,
{
    let per_channel = plan
        .par_iter()
        .map(|channel| {
            let frames = source(channel).ok_or_else(|| ScanError::MissingSource {
                band: channel.band.to_string(),
                index: channel.index_in_band,
            })?;
            let mut log = SweepLog::default();
            for tf in frames {
                log.records
                    .extend(scan_channel(&tf.frame, channel, config)?);
                log.truth.push(TruthRecord {
                    capture_time: tf.frame.capture_time(),
                    channel: channel.clone(),
                    present: tf.present,
                });
            }
            Ok(log)
        })
        .collect::<Result<Vec<_>, ScanError>>()?;

    let mut log = SweepLog::default();
    for part in per_channel {
        log.records.extend(part.records);
        log.truth.extend(part.truth);
    }
    log.records.par_sort_by(canonical_order);
    log.truth.par_sort_by(|a, b| {
        a.capture_time
            .total_cmp(&b.capture_time)
            .then_with(|| a.channel.band.cmp(&b.channel.band))
            .then_with(|| a.channel.index_in_band.cmp(&b.channel.index_in_band))
    });
    Ok(log)
}

pub const RECORD_HEADER: [&str; 8] = [
    "time_unix",
    "band",
    "channel_index",
    "center_freq_mhz",
    "detector",
    "statistic",
    "threshold",
    "present",
];

pub const TRUTH_HEADER: [&str; 5] = [
    "time_unix",
    "band",
    "channel_index",
    "center_freq_mhz",
    "present",
];

pub const PLAN_HEADER: [&str; 3] = ["band", "channel_index", "center_freq_mhz"];

/// One row per record. Statistics and thresholds carry 9 significant
/// digits; a degenerate record's statistic is written as `nan`.
pub fn write_records_csv<W: Write>(records: &[ScanRecord], out: W) -> Result<(), ScanError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.capture_time.to_string(),
            r.channel.band.to_string(),
            r.channel.index_in_band.to_string(),
            r.channel.center_freq_mhz.to_string(),
            r.detector.to_string(),
            r.statistic.map_or_else(|| "nan".to_string(), |s| sig(s, 9)),
            sig(r.threshold, 9),
            u8::from(r.present).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth_csv<W: Write>(truth: &[TruthRecord], out: W) -> Result<(), ScanError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_HEADER)?;
    for t in truth {
        w.write_record([
            t.capture_time.to_string(),
            t.channel.band.to_string(),
            t.channel.index_in_band.to_string(),
            t.channel.center_freq_mhz.to_string(),
            u8::from(t.present).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plan_csv<W: Write>(plan: &[Channel], out: W) -> Result<(), ScanError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLAN_HEADER)?;
    for c in plan {
        w.write_record([
            c.band.to_string(),
            c.index_in_band.to_string(),
            c.center_freq_mhz.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a record CSV written by [`write_records_csv`]. Channels are
/// rebuilt from the band/index/frequency columns with an unknown local
/// spacing (0). Errors carry the 1-based line number.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<ScanRecord>, ScanError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(ScanError::Parse {
            line: 1,
            message: format!("expected header `{}`", RECORD_HEADER.join(",")),
        });
    }

    let mut bands: Vec<Arc<str>> = Vec::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| ScanError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |col: usize, what: &str| ScanError::Parse {
            line,
            message: format!("invalid {} `{}`", RECORD_HEADER[col], what),
        };
        let real = |col: usize| -> Result<f64, ScanError> {
            let v = &row[col];
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(col, v))
        };

        let band = match bands.iter().find(|b| ***b == row[1]) {
            Some(b) => Arc::clone(b),
            None => {
                let b: Arc<str> = Arc::from(&row[1]);
                bands.push(Arc::clone(&b));
                b
            }
        };
        let statistic = match &row[5] {
            "nan" => None,
            _ => Some(real(5)?),
        };
        let present = match &row[7] {
            "1" => true,
            "0" => false,
            other => return Err(bad(7, other)),
        };
        records.push(ScanRecord {
            capture_time: real(0)?,
            channel: Channel {
                band,
                index_in_band: row[2].parse().map_err(|_| bad(2, &row[2]))?,
                center_freq_mhz: real(3)?,
                local_spacing_mhz: 0.0,
            },
            detector: row[4].parse().map_err(|_| bad(4, &row[4]))?,
            statistic,
            threshold: real(6)?,
            present,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::AcfVector;
    use crate::iq_model::{ComplexSample, FrameMeta};
    use crate::signal_synth::{
        gen_channel_timeline, gen_noise_frame, NoiseSpec, OccupancySchedule, SignalSpec,
        TimelineSpec,
    };

    fn freqs(plan: &[Channel], band: &str) -> Vec<f64> {
        plan.iter()
            .filter(|c| &*c.band == band)
            .map(|c| c.center_freq_mhz)
            .collect()
    }

    fn config(lambda_ed: f64) -> DetectorConfig {
        DetectorConfig::new(lambda_ed, 0.5, 0.5, AcfVector::tone(64, 8).unwrap()).unwrap()
    }

    fn frame_at(mhz: f64, samples: Vec<ComplexSample>, t: f64) -> ComplexFrame {
        ComplexFrame::new(
            samples,
            FrameMeta {
                sample_rate_hz: 1e6,
                center_freq_hz: mhz * 1e6,
                capture_time: t,
            },
        )
        .unwrap()
    }

    #[test]
    fn gsm850_uplink_alternates_three_and_two() {
        let plan = build_channel_plan(&[BandSpec::new(
            "GSM-850 (U/L)",
            824.0,
            849.0,
            &[3.0, 2.0],
            11,
        )])
        .unwrap();
        assert_eq!(
            freqs(&plan, "GSM-850 (U/L)"),
            vec![824.0, 827.0, 829.0, 832.0, 834.0, 837.0, 839.0, 842.0, 844.0, 847.0, 849.0]
        );
    }

    #[test]
    fn ism_bands_end_on_their_stop_frequencies() {
        let plan = build_channel_plan(&[
            BandSpec::new("2.4 GHz", 2402.0, 2497.0, &[5.0], 20),
            BandSpec::new("5.8 GHz", 5725.0, 5875.0, &[5.0], 31),
        ])
        .unwrap();
        assert_eq!(*freqs(&plan, "2.4 GHz").last().unwrap(), 2497.0);
        let hi = freqs(&plan, "5.8 GHz");
        assert_eq!(*hi.last().unwrap(), 5875.0);
        assert!(hi.contains(&5765.0));
    }

    #[test]
    fn builtin_plan_counts() {
        let plan = builtin_table1_plan();
        assert_eq!(plan.len(), 123);
        let d = freqs(&plan, "GSM-1900 (D/L)");
        assert_eq!((d[0], *d.last().unwrap()), (1930.0, 1990.0));
        assert!(freqs(&plan, "GSM-850 (D/L)").contains(&882.0));
        for band in table1_bands() {
            let f = freqs(&plan, &band.name);
            assert_eq!(f.len(), band.expected_channels);
            assert!(f.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn inconsistent_band_names_itself() {
        let err = build_channel_plan(&[BandSpec::new("broken", 824.0, 850.0, &[3.0, 2.0], 11)])
            .unwrap_err();
        assert!(
            matches!(&err, ScanError::Plan { band, .. } if band == "broken"),
            "{err}"
        );
        assert!(build_channel_plan(&[BandSpec::new("x", 1.0, 1.0, &[], 1)]).is_err());
        assert!(build_channel_plan(&[BandSpec::new("x", 1.0, 1.0, &[1.0], 0)]).is_err());
        let single = build_channel_plan(&[BandSpec::new("one", 100.0, 100.0, &[2.0], 1)]).unwrap();
        assert_eq!(single[0].local_spacing_mhz, 2.0);
    }

    #[test]
    fn local_spacing_is_the_nearest_gap() {
        let plan = builtin_table1_plan();
        let ul: Vec<_> = plan
            .iter()
            .filter(|c| &*c.band == "GSM-850 (U/L)")
            .collect();
        assert_eq!(ul[0].local_spacing_mhz, 3.0);
        assert_eq!(ul[1].local_spacing_mhz, 2.0);
        assert_eq!(ul[10].local_spacing_mhz, 2.0);
    }

    #[test]
    fn zero_frame_is_degenerate_for_acf_detectors() {
        let ch = &builtin_table1_plan()[0];
        let f = frame_at(824.0, vec![ComplexSample::new(0.0, 0.0); 64], 5.0);
        let [ed, acf1, cdist] = scan_channel(&f, ch, &config(0.5)).unwrap();
        assert_eq!(ed.statistic, Some(0.0));
        assert!(!ed.present && !ed.is_degenerate());
        for r in [acf1, cdist] {
            assert!(r.is_degenerate() && !r.present);
            assert_eq!(r.capture_time, 5.0);
        }
    }

    #[test]
    fn low_energy_threshold_fires_on_noise() {
        let ch = &builtin_table1_plan()[0];
        let noise = gen_noise_frame(1024, &NoiseSpec::new(1.0, 3).unwrap(), 0).unwrap();
        let f = frame_at(824.0, noise.samples().to_vec(), 0.0);
        let cfg = DetectorConfig::new(0.5, 0.5, 0.5, AcfVector::tone(1024, 8).unwrap()).unwrap();
        let [ed, acf1, cdist] = scan_channel(&f, ch, &cfg).unwrap();
        assert!(ed.present);
        assert!(!acf1.present && !cdist.present);
        assert_eq!(
            [ed.detector, acf1.detector, cdist.detector],
            [DetectorKind::Ed, DetectorKind::Acf1, DetectorKind::Cdist]
        );
    }

    #[test]
    fn off_channel_frame_is_a_routing_error() {
        let ch = &builtin_table1_plan()[1]; // 827 MHz, neighbours 3 and 2 MHz away
        let ok = frame_at(827.9, vec![ComplexSample::new(1.0, 0.0); 16], 0.0);
        assert!(scan_channel(&ok, ch, &config(0.5)).is_ok());
        let bad = frame_at(828.1, vec![ComplexSample::new(1.0, 0.0); 16], 0.0);
        assert!(matches!(
            scan_channel(&bad, ch, &config(0.5)),
            Err(ScanError::Routing { .. })
        ));
    }

    fn timeline_source(
        seed: u64,
        frames: f64,
    ) -> impl Fn(&Channel) -> Option<crate::signal_synth::Timeline> + Sync {
        move |ch: &Channel| {
            let sched = OccupancySchedule::new(10.0, vec![(0.0, 5.0)]).unwrap();
            let noise = NoiseSpec::new(1.0, seed ^ ch.index_in_band as u64).unwrap();
            let spec = TimelineSpec {
                frame_len: 64,
                frame_interval_s: 1.0,
                total_s: frames,
                start_time: 0.0,
                sample_rate_hz: 1e6,
                center_freq_hz: ch.center_freq_mhz * 1e6,
            };
            gen_channel_timeline(
                &sched,
                &SignalSpec::tone(0.1, 1.0).unwrap(),
                &noise,
                10.0,
                spec,
            )
            .ok()
        }
    }

    #[test]
    fn sweep_counts_and_order() {
        let plan: Vec<_> = builtin_table1_plan().into_iter().take(10).collect();
        let log = run_sweep(&plan, timeline_source(1, 100.0), &config(1.5)).unwrap();
        assert_eq!(log.records.len(), 3000);
        assert_eq!(log.scans(), 1000);
        assert!(log
            .records
            .windows(2)
            .all(|w| canonical_order(&w[0], &w[1]) == Ordering::Less));
    }

    #[test]
    fn empty_plan_gives_empty_log() {
        let log = run_sweep(&[], timeline_source(1, 10.0), &config(1.0)).unwrap();
        assert!(log.records.is_empty() && log.truth.is_empty());
    }

    #[test]
    fn missing_source_is_reported() {
        let plan = builtin_table1_plan();
        let source = |ch: &Channel| (ch.index_in_band != 3).then(std::iter::empty::<TimelineFrame>);
        assert!(matches!(
            run_sweep(&plan, source, &config(1.0)),
            Err(ScanError::MissingSource { index: 3, .. })
        ));
    }

    #[test]
    fn sweep_is_independent_of_worker_count() {
        let plan: Vec<_> = builtin_table1_plan()
            .into_iter()
            .skip(40)
            .take(12)
            .collect();
        let run = |workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(|| run_sweep(&plan, timeline_source(9, 20.0), &config(1.2)).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(1));
    }
    #[test]
    fn record_csv_round_trip() {
        let plan: Vec<_> = builtin_table1_plan().into_iter().take(3).collect();
        let log = run_sweep(&plan, timeline_source(4, 5.0), &config(1.1)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&log.records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "time_unix,band,channel_index,center_freq_mhz,detector,statistic,threshold,present\n"
        ));
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), log.records.len());
        for (a, b) in back.iter().zip(&log.records) {
            assert_eq!(a.capture_time, b.capture_time);
            assert!(
                a.channel.band == b.channel.band
                    && a.channel.index_in_band == b.channel.index_in_band
            );
            assert_eq!(a.detector, b.detector);
            assert_eq!(a.present, b.present);
            let (x, y) = (a.statistic.unwrap(), b.statistic.unwrap());
            assert!((x - y).abs() <= 1e-8 * y.abs());
        }
    }

    #[test]
    fn degenerate_statistic_is_nan_in_csv() {
        let ch = &builtin_table1_plan()[0];
        let f = frame_at(824.0, vec![ComplexSample::new(0.0, 0.0); 64], 0.0);
        let records = scan_channel(&f, ch, &config(0.5)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.contains("0,GSM-850 (U/L),0,824,ed,0,0.5,0\n"),
            "{text}"
        );
        assert!(
            text.contains("0,GSM-850 (U/L),0,824,acf1,nan,0.5,0\n"),
            "{text}"
        );
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert!(back[1].is_degenerate() && back[2].is_degenerate());
    }

    #[test]
    fn malformed_rows_cite_line_numbers() {
        let header = RECORD_HEADER.join(",");
        let text = format!("{header}\n0,b,0,824,ed,1.5,1,1\n1,b,0,824,xx,1.5,1,1\n");
        match read_records_csv(text.as_bytes()) {
            Err(ScanError::Parse { line: 3, message }) => assert!(message.contains("detector")),
            other => panic!("{other:?}"),
        }
        let text = format!("{header}\n0,b,0,824,ed,1.5,1,yes\n");
        assert!(matches!(
            read_records_csv(text.as_bytes()),
            Err(ScanError::Parse { line: 2, .. })
        ));
        let text = format!("{header}\n0,b,0\n");
        assert!(matches!(
            read_records_csv(text.as_bytes()),
            Err(ScanError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_records_csv("a,b\n".as_bytes()),
            Err(ScanError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn plan_csv_layout() {
        let plan = builtin_table1_plan();
        let mut buf = Vec::new();
        write_plan_csv(&plan, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 124);
        assert_eq!(text.lines().nth(1), Some("GSM-850 (U/L),0,824"));
    }
}
