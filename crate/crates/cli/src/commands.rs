use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use occuscan_core::fmt::sig;

use occuscan_core::detectors::{
    calibrate_reference, AcfVector, DetectorConfig, DetectorKind, FrameStatistics,
};
use occuscan_core::eval_harness::{
    admit_all_threshold, reject_all_threshold, roc_curve, write_eval_csv, EvalRow, TrialScenario,
    TrialSet,
};
use occuscan_core::iq_model::read_recording;
use occuscan_core::occupancy_report::{aggregate, report_matrix, write_occupancy_csv};
use occuscan_core::scan_engine::{
    read_records_csv, run_sweep, scan_channel, write_plan_csv, write_records_csv, write_truth_csv,
    Channel,
};
use occuscan_core::signal_synth::{
    derive_seed, gen_channel_timeline, gen_noise_frame, gen_signal_frame, mix_at_snr, NoiseSpec,
    TimelineSpec,
};

use crate::{CliError, Scenario};

pub const REFERENCE_FILE: &str = "reference.txt";
pub const RECORDS_FILE: &str = "records.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const PLAN_FILE: &str = "plan.csv";
pub const OCCUPANCY_FILE: &str = "occupancy.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const PLOT_DIR: &str = "plots";
pub const DISTANCE_FILE: &str = "distance.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--workers must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub reference: AcfVector,
    pub lambda_ed: f64,
    pub lambda_acf: f64,
    pub gamma: f64,
    pub target_pfa: f64,
}

fn training_reference(s: &Scenario) -> Result<AcfVector, CliError> {
    let cal = &s.calibration;
    let signal = cal
        .signal
        .with_seed(derive_seed(s.master_seed, "calibration-signal", 0));
    let noise = NoiseSpec::new(
        cal.noise_power,
        derive_seed(s.master_seed, "calibration-training", 0),
    )?;
    let frames = (0..cal.training_frames as u64)
        .map(|k| {
            let sig = gen_signal_frame(s.frame_len, &signal, k)?;
            let n = gen_noise_frame(s.frame_len, &noise, k)?;
            mix_at_snr(
                &sig,
                signal.nominal_power(),
                &n,
                cal.noise_power,
                cal.snr_db,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(calibrate_reference(&frames, s.detector.acf_lags)?)
}

/// Thresholds `[ed, acf1, cdist]` at the calibration target pfa, from
/// noise-only frames scored against `reference`.
fn noise_thresholds(s: &Scenario, reference: &AcfVector) -> Result<[f64; 3], CliError> {
    let cal = &s.calibration;
    let noise = NoiseSpec::new(
        cal.noise_power,
        derive_seed(s.master_seed, "calibration-noise", 0),
    )?;
    let stats = (0..cal.noise_frames as u64)
        .into_par_iter()
        .map(|k| {
            Ok(FrameStatistics::compute(
                &gen_noise_frame(s.frame_len, &noise, k)?,
                reference,
            )?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = [0.0; 3];
    for kind in DetectorKind::ALL {
        let h0: Vec<f64> = stats.iter().filter_map(|st| st.statistic(kind)).collect();
        out[kind as usize] = kind.threshold_for_pfa(&h0, cal.target_pfa)?;
    }
    Ok(out)
}

/// Derives the reference vector from strong training frames and the three
/// thresholds from noise-only frames.
pub fn calibrate(s: &Scenario) -> Result<Calibration, CliError> {
    let reference = training_reference(s)?;
    let [lambda_ed, lambda_acf, gamma] = noise_thresholds(s, &reference)?;
    Ok(Calibration {
        reference,
        lambda_ed,
        lambda_acf,
        gamma,
        target_pfa: s.calibration.target_pfa,
    })
}

/// Writes the reference file into `out` and returns the calibration.
pub fn cmd_calibrate(
    s: &Scenario,
    out: &Path,
    workers: Option<usize>,
) -> Result<Calibration, CliError> {
    let cal = with_workers(workers, || calibrate(s))??;
    fs::create_dir_all(out).map_err(io_err(out))?;
    cal.reference.write(&out.join(REFERENCE_FILE))?;
    Ok(cal)
}

/// Detector configuration of a scenario. The reference comes from the
/// configured file or from training; thresholds left unset are calibrated.
pub fn resolve_config(s: &Scenario) -> Result<DetectorConfig, CliError> {
    let d = &s.detector;
    let reference = match &d.reference {
        Some(path) => {
            let r = AcfVector::read(path)?;
            if r.len() != d.acf_lags {
                return Err(CliError::Field {
                    path: s.path.clone(),
                    field: "detector.acf_lags".into(),
                    message: format!(
                        "is {} but {} holds {} lags",
                        d.acf_lags,
                        path.display(),
                        r.len()
                    ),
                });
            }
            r
        }
        None => training_reference(s)?,
    };
    let calibrated = match (d.lambda_ed, d.lambda_acf, d.gamma) {
        (Some(_), Some(_), Some(_)) => None,
        _ => Some(noise_thresholds(s, &reference)?),
    };
    let pick = |fixed: Option<f64>, kind: DetectorKind| {
        fixed.unwrap_or_else(|| calibrated.expect("computed above")[kind as usize])
    };
    Ok(DetectorConfig::new(
        pick(d.lambda_ed, DetectorKind::Ed),
        pick(d.lambda_acf, DetectorKind::Acf1),
        pick(d.gamma, DetectorKind::Cdist),
        reference,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateSummary {
    pub channels: usize,
    pub scans: usize,
    pub records: usize,
}

/// Sweeps every channel of the plan over the scenario's timeline and
/// writes records, truth labels and the plan.
pub fn cmd_simulate(
    s: &Scenario,
    out: &Path,
    workers: Option<usize>,
) -> Result<SimulateSummary, CliError> {
    let log = with_workers(workers, || -> Result<_, CliError> {
        let config = resolve_config(s)?;
        let timelines = s
            .plan
            .iter()
            .zip(&s.channels)
            .enumerate()
            .map(|(slot, (ch, (setup, schedule)))| {
                let noise = NoiseSpec::new(
                    setup.noise_power,
                    derive_seed(s.master_seed, "channel-noise", slot as u64),
                )?;
                let signal = setup.signal.with_seed(derive_seed(
                    s.master_seed,
                    "channel-signal",
                    slot as u64,
                ));
                let spec = TimelineSpec {
                    frame_len: s.frame_len,
                    frame_interval_s: s.frame_interval_s,
                    total_s: s.total_s,
                    start_time: s.start_time_unix,
                    sample_rate_hz: s.sample_rate_hz,
                    center_freq_hz: ch.center_freq_mhz * 1e6,
                };
                gen_channel_timeline(schedule, &signal, &noise, setup.snr_db, spec)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let source = |ch: &Channel| {
            let slot = s.plan.iter().position(|p| p.same_channel(ch))?;
            Some(timelines[slot].clone())
        };
        Ok(run_sweep(&s.plan, source, &config)?)
    })??;

    let (path, mut w) = create(out, RECORDS_FILE)?;
    write_records_csv(&log.records, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    let (path, mut w) = create(out, TRUTH_FILE)?;
    write_truth_csv(&log.truth, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    let (path, mut w) = create(out, PLAN_FILE)?;
    write_plan_csv(&s.plan, &mut w)?;
    w.flush().map_err(io_err(&path))?;

    Ok(SimulateSummary {
        channels: s.plan.len(),
        scans: log.scans(),
        records: log.records.len(),
    })
}

/// Plan channel whose routing window contains `center_mhz`; the nearest
/// one if windows touch.
pub fn channel_for(plan: &[Channel], center_mhz: f64) -> Result<&Channel, CliError> {
    plan.iter()
        .filter(|c| (c.center_freq_mhz - center_mhz).abs() <= c.routing_tolerance_mhz())
        .min_by(|a, b| {
            (a.center_freq_mhz - center_mhz)
                .abs()
                .total_cmp(&(b.center_freq_mhz - center_mhz).abs())
        })
        .ok_or(CliError::NoChannel { center_mhz })
}

/// Scans a recorded IQ capture on one channel and writes its records.
/// The channel is looked up from `center_mhz`, or from the recording's
/// own center frequency when absent. With `verbose`, per-frame normalized
/// and raw correlation distances go to a separate CSV. Returns the number
/// of records.
pub fn cmd_analyze(
    s: &Scenario,
    iq: &Path,
    meta: &Path,
    center_mhz: Option<f64>,
    out: &Path,
    verbose: bool,
) -> Result<usize, CliError> {
    let recording = read_recording(iq, meta, s.frame_len)?;
    let channel = channel_for(
        &s.plan,
        center_mhz.unwrap_or(recording.meta.center_freq_hz / 1e6),
    )?;
    let config = resolve_config(s)?;
    let records: Vec<_> = recording
        .frames
        .par_iter()
        .map(|f| scan_channel(f, channel, &config))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let (path, mut w) = create(out, RECORDS_FILE)?;
    write_records_csv(&records, &mut w)?;
    w.flush().map_err(io_err(&path))?;

    if verbose {
        let stats = recording
            .frames
            .par_iter()
            .map(|f| FrameStatistics::compute(f, &config.reference))
            .collect::<Result<Vec<_>, _>>()?;
        let (path, mut w) = create(out, DISTANCE_FILE)?;
        let mut text = String::from("time_unix,distance,raw_distance\n");
        for (f, st) in recording.frames.iter().zip(&stats) {
            let show = |v: Option<f64>| sig(v.unwrap_or(f64::NAN), 9);
            text += &format!(
                "{},{},{}\n",
                f.capture_time(),
                show(st.distance),
                show(st.raw_distance)
            );
        }
        w.write_all(text.as_bytes()).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
    }
    Ok(records.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSummary {
    pub cells: usize,
    pub plot_files: Vec<PathBuf>,
}

fn plot_file_name(c: &Channel) -> String {
    let band: String = c
        .band
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' {
                ch
            } else {
                '_'
            }
        })
        .collect();
    format!("{band}_{}.dat", c.index_in_band)
}

/// Bins a record CSV into occupancy cells and writes the occupancy CSV
/// plus one plot-data file per channel.
pub fn cmd_report(
    records_csv: &Path,
    bin_len_s: f64,
    out: &Path,
) -> Result<ReportSummary, CliError> {
    let file = File::open(records_csv).map_err(io_err(records_csv))?;
    let records = read_records_csv(std::io::BufReader::new(file))?;
    let cells = aggregate(&records, bin_len_s)?;

    let (path, mut w) = create(out, OCCUPANCY_FILE)?;
    write_occupancy_csv(&cells, &mut w)?;
    w.flush().map_err(io_err(&path))?;

    let mut known: BTreeMap<(String, usize), Channel> = BTreeMap::new();
    for r in &records {
        known
            .entry((r.channel.band.to_string(), r.channel.index_in_band))
            .or_insert_with(|| r.channel.clone());
    }
    let known: Vec<Channel> = known.into_values().collect();
    let plot_dir = out.join(PLOT_DIR);
    let mut plot_files = Vec::with_capacity(known.len());
    for channel in &known {
        let matrix = report_matrix(&cells, &known, channel)?;
        let (path, mut w) = create(&plot_dir, &plot_file_name(channel))?;
        matrix.write_plot_data(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        plot_files.push(path);
    }
    Ok(ReportSummary {
        cells: cells.len(),
        plot_files,
    })
}

fn eval_rows(s: &Scenario) -> Result<Vec<EvalRow>, CliError> {
    let config = resolve_config(s)?;
    let ev = &s.eval;
    let mut rows = Vec::new();
    for (i, &snr_db) in ev.snr_db.iter().enumerate() {
        let set = TrialSet::generate(
            TrialScenario {
                signal: ev.signal,
                noise_power: ev.noise_power,
                snr_db,
                frame_len: s.frame_len,
                trials: ev.trials,
                seed: derive_seed(s.master_seed, "eval", i as u64),
            },
            &config.reference,
        )?;
        for kind in DetectorKind::ALL {
            let mut push = |scenario: &str, threshold: f64| {
                rows.push(EvalRow {
                    scenario: scenario.into(),
                    point: set.operating_point(kind, threshold),
                });
            };
            push("config", kind.threshold(&config));
            push("matched_pfa", set.threshold_for_pfa(kind, ev.target_pfa)?);
            push("admit_all", admit_all_threshold(kind));
            push("reject_all", reject_all_threshold(kind));
            if let Some((lo, hi)) = set.statistic_range(kind) {
                let steps = (ev.roc_points - 1) as f64;
                let grid: Vec<f64> = (0..ev.roc_points)
                    .map(|j| lo + (hi - lo) * j as f64 / steps)
                    .filter(|&t| t > 0.0)
                    .collect();
                if grid.len() >= 2 {
                    rows.extend(
                        roc_curve(&set, kind, &grid)?
                            .into_iter()
                            .map(|point| EvalRow {
                                scenario: "roc".into(),
                                point,
                            }),
                    );
                }
            }
        }
    }
    Ok(rows)
}

/// Monte Carlo operating points for every detector and SNR of the eval
/// section: the configured threshold, the threshold matching the target
/// pfa, the two degenerate endpoints and an evenly spaced ROC sweep.
pub fn cmd_eval(
    s: &Scenario,
    out: &Path,
    workers: Option<usize>,
) -> Result<Vec<EvalRow>, CliError> {
    let rows = with_workers(workers, || eval_rows(s))??;
    let (path, mut w) = create(out, EVAL_FILE)?;
    write_eval_csv(&rows, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    Ok(rows)
}
