//! Time-binned average occupancy: detections over scans per
//! (channel, detector, bin).
//!
//! Bins are half-open `[k·len, (k+1)·len)` intervals aligned to the Unix
//! epoch. Bins without scans are omitted, not reported as zero.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::detectors::DetectorKind;
use crate::fmt::sig;
use crate::scan_engine::{Channel, ScanRecord};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bin length must be finite and > 0, got {0}")]
    BinLength(f64),
    #[error("unknown channel: {band} #{index}")]
    UnknownChannel { band: String, index: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyCell {
    pub channel: Channel,
    pub detector: DetectorKind,
    /// Bin number: the cell covers `[bin·len, (bin+1)·len)`.
    pub bin: i64,
    pub bin_start: f64,
    pub bin_len_s: f64,
    pub n_detected: u64,
    pub n_total: u64,
    pub occupancy: f64,
}

type CellKey = (Arc<str>, usize, DetectorKind, i64);

/// Index of the bin containing `t`.
pub fn bin_index(t: f64, bin_len_s: f64) -> i64 {
    (t / bin_len_s).floor() as i64
}

pub fn aggregate(
    records: &[ScanRecord],
    bin_len_s: f64,
) -> Result<Vec<OccupancyCell>, ReportError> {
    if !(bin_len_s.is_finite() && bin_len_s > 0.0) {
        return Err(ReportError::BinLength(bin_len_s));
    }
    let mut counts: BTreeMap<CellKey, (&Channel, u64, u64)> = BTreeMap::new();
    for r in records {
        let key = (
            Arc::clone(&r.channel.band),
            r.channel.index_in_band,
            r.detector,
            bin_index(r.capture_time, bin_len_s),
        );
        let entry = counts.entry(key).or_insert((&r.channel, 0, 0));
        entry.1 += u64::from(r.present);
        entry.2 += 1;
    }
    Ok(counts
        .into_iter()
        .map(
            |((_, _, detector, bin), (channel, n_detected, n_total))| OccupancyCell {
                channel: channel.clone(),
                detector,
                bin,
                bin_start: bin as f64 * bin_len_s,
                bin_len_s,
                n_detected,
                n_total,
                occupancy: n_detected as f64 / n_total as f64,
            },
        )
        .collect())
}

/// Aligned per-detector series for one channel, in the layout of a
/// three-panel occupancy figure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMatrix {
    pub channel: Channel,
    pub bin_starts: Vec<f64>,
    /// Indexed like [`DetectorKind::ALL`]; `None` marks a bin with no scans
    /// for that detector.
    pub series: [Vec<Option<f64>>; 3],
}

impl ReportMatrix {
    pub fn is_empty(&self) -> bool {
        self.bin_starts.is_empty()
    }

    pub fn series(&self, kind: DetectorKind) -> &[Option<f64>] {
        &self.series[kind as usize]
    }

    /// Mean of the non-missing entries of one series.
    pub fn mean(&self, kind: DetectorKind) -> Option<f64> {
        let vals: Vec<f64> = self.series(kind).iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Whitespace-delimited `bin_start ed acf1 cdist` table; gaps are `nan`.
    pub fn write_plot_data<W: Write>(&self, mut out: W) -> Result<(), ReportError> {
        writeln!(
            out,
            "# band={} channel_index={} center_freq_mhz={}",
            self.channel.band, self.channel.index_in_band, self.channel.center_freq_mhz
        )?;
        writeln!(out, "# bin_start ed acf1 cdist")?;
        for (i, start) in self.bin_starts.iter().enumerate() {
            write!(out, "{start}")?;
            for s in &self.series {
                write!(
                    out,
                    " {}",
                    s[i].map_or_else(|| "nan".to_string(), |v| sig(v, 9))
                )?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Series for `channel`. `known` is the channel universe (usually the plan);
/// a channel outside it is an error, a known channel without cells yields an
/// empty matrix.
pub fn report_matrix(
    cells: &[OccupancyCell],
    known: &[Channel],
    channel: &Channel,
) -> Result<ReportMatrix, ReportError> {
    let channel = known
        .iter()
        .find(|c| c.same_channel(channel))
        .ok_or_else(|| ReportError::UnknownChannel {
            band: channel.band.to_string(),
            index: channel.index_in_band,
        })?;
    let mine: Vec<&OccupancyCell> = cells
        .iter()
        .filter(|c| c.channel.same_channel(channel))
        .collect();

    let mut bin_starts: Vec<f64> = mine.iter().map(|c| c.bin_start).collect();
    bin_starts.sort_by(f64::total_cmp);
    bin_starts.dedup();

    let mut series: [Vec<Option<f64>>; 3] = std::array::from_fn(|_| vec![None; bin_starts.len()]);
    for c in mine {
        let i = bin_starts
            .binary_search_by(|b| b.total_cmp(&c.bin_start))
            .expect("bin collected above");
        series[c.detector as usize][i] = Some(c.occupancy);
    }
    Ok(ReportMatrix {
        channel: channel.clone(),
        bin_starts,
        series,
    })
}

pub const OCCUPANCY_HEADER: [&str; 9] = [
    "band",
    "channel_index",
    "center_freq_mhz",
    "detector",
    "bin_start_unix",
    "bin_len_s",
    "n_detected",
    "n_total",
    "occupancy",
];

pub fn write_occupancy_csv<W: Write>(cells: &[OccupancyCell], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OCCUPANCY_HEADER)?;
    for c in cells {
        w.write_record([
            c.channel.band.to_string(),
            c.channel.index_in_band.to_string(),
            c.channel.center_freq_mhz.to_string(),
            c.detector.to_string(),
            c.bin_start.to_string(),
            c.bin_len_s.to_string(),
            c.n_detected.to_string(),
            c.n_total.to_string(),
            sig(c.occupancy, 9),
        ])?;
    }
    w.flush()?;
    Ok(())
}
