//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use statrs::distribution::{ContinuousCDF, Gamma};

use occuscan::{cmd_eval, cmd_simulate, Scenario};
use occuscan_core::detectors::{
    acf, acf1_statistic, acf_vector, calibrate_ed_threshold, calibrate_reference,
    correlation_distance, energy_statistic, AcfVector, DetectorConfig, DetectorKind,
};
use occuscan_core::eval_harness::{measure_pd_pfa, TrialScenario, TrialSet};
use occuscan_core::iq_model::{ComplexFrame, FrameMeta};
use occuscan_core::occupancy_report::aggregate;
use occuscan_core::scan_engine::{
    builtin_table1_plan, read_records_csv, run_sweep, Channel, ScanRecord,
};
use occuscan_core::signal_synth::{
    gen_channel_timeline, gen_noise_frame, gen_signal_frame, mix_at_snr, NoiseSpec,
    OccupancySchedule, SignalSpec, TimelineSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const N: usize = 1024;
const LAGS: usize = 8;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn frame(samples: Vec<Complex64>) -> ComplexFrame {
    ComplexFrame::new(samples, FrameMeta::default()).unwrap()
}

fn tone_reference(seed: u64) -> AcfVector {
    let tone = SignalSpec::tone(0.05, 1.0).unwrap();
    let noise = NoiseSpec::new(1.0, seed).unwrap();
    let training: Vec<ComplexFrame> = (0..100)
        .map(|k| {
            mix_at_snr(
                &gen_signal_frame(N, &tone, k).unwrap(),
                1.0,
                &gen_noise_frame(N, &noise, k).unwrap(),
                1.0,
                20.0,
            )
            .unwrap()
        })
        .collect();
    calibrate_reference(&training, LAGS).unwrap()
}

fn plan_exactness() -> Outcome {
    let plan = builtin_table1_plan();
    let expected = [
        ("GSM-850 (U/L)", 11, 849.0),
        ("GSM-850 (D/L)", 11, 894.0),
        ("GSM-1900 (U/L)", 25, 1910.0),
        ("GSM-1900 (D/L)", 25, 1990.0),
        ("2.4 GHz", 20, 2497.0),
        ("5.8 GHz", 31, 5875.0),
    ];
    let mut problems = Vec::new();
    for (band, count, stop) in expected {
        let chans: Vec<&Channel> = plan.iter().filter(|c| &*c.band == band).collect();
        let last = chans.last().map(|c| c.center_freq_mhz);
        if chans.len() != count || last != Some(stop) {
            problems.push(format!(
                "{band}: {} channels ending at {last:?}",
                chans.len()
            ));
        }
    }
    for f in [837.0, 882.0, 1880.0, 1960.0, 2412.0, 2437.0, 2462.0, 5765.0] {
        if !plan.iter().any(|c| c.center_freq_mhz == f) {
            problems.push(format!("{f} MHz missing"));
        }
    }
    if plan.len() != 123 {
        problems.push(format!("{} channels in total", plan.len()));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "123 channels, 11/11/25/25/20/31, stops exact, named frequencies present".into()
        } else {
            problems.join("; ")
        },
    )
}

fn unit_values() -> Outcome {
    let c = Complex64::new;
    let e = energy_statistic(&frame(vec![
        c(1.0, 1.0),
        c(1.0, -1.0),
        c(2.0, 0.0),
        c(0.0, 2.0),
    ]));
    let r = acf(&frame(vec![c(1.0, 0.0); 4]), 1).unwrap();
    let d = correlation_distance(
        &AcfVector::new(vec![1.0; 4]).unwrap(),
        &AcfVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
    )
    .unwrap();
    let ok = e == 3.0 && r == c(3.0, 0.0) && (d - 3f64.sqrt() / 2.0).abs() <= 1e-12;
    check(ok, format!("energy={e} acf1={r} distance={d:.15}"))
}

fn arb_frame() -> impl Strategy<Value = ComplexFrame> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 16..128).prop_filter_map(
        "nonzero frame",
        |v| {
            let f = frame(
                v.into_iter()
                    .map(|(re, im)| Complex64::new(re, im))
                    .collect(),
            );
            (energy_statistic(&f) > 1e-6).then_some(f)
        },
    )
}

fn arb_scale() -> impl Strategy<Value = Complex64> {
    (1e-3..1e3f64, -std::f64::consts::PI..std::f64::consts::PI)
        .prop_map(|(m, p)| Complex64::from_polar(m, p))
}

fn arb_acf() -> impl Strategy<Value = AcfVector> {
    prop::collection::vec(0.0..=1.0f64, 1..16).prop_map(|mut v| {
        v.insert(0, 1.0);
        AcfVector::new(v).unwrap()
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-15
}

fn note<T: std::fmt::Debug>(failures: &mut Vec<String>, name: &str, r: Result<(), TestError<T>>) {
    if let Err(e) = r {
        failures.push(format!("{name}: {e}"));
    }
}

fn invariance_suite() -> Outcome {
    const CASES: u32 = 1000;
    let runner = || {
        TestRunner::new(Config {
            failure_persistence: None,
            ..Config::with_cases(CASES)
        })
    };
    let plan = builtin_table1_plan();
    let mut failures = Vec::new();

    note(
        &mut failures,
        "acf1 scale/phase invariance",
        runner().run(&(arb_frame(), arb_scale()), |(f, c)| {
            let a = acf1_statistic(&f).unwrap();
            let b = acf1_statistic(&f.scaled(c).unwrap()).unwrap();
            prop_assert!(close(a, b), "{a} vs {b}");
            Ok(())
        }),
    );
    note(
        &mut failures,
        "acf_vector scale/phase invariance",
        runner().run(&(arb_frame(), arb_scale(), 2..12usize), |(f, c, l)| {
            let a = acf_vector(&f, l).unwrap();
            let b = acf_vector(&f.scaled(c).unwrap(), l).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(close(*x, *y), "{x} vs {y}");
            }
            Ok(())
        }),
    );
    note(
        &mut failures,
        "energy scale equivariance",
        runner().run(
            &(arb_frame(), arb_scale(), -8..8i32, 0..4u8),
            |(f, c, k, quarter)| {
                let e = energy_statistic(&f);
                let scaled = energy_statistic(&f.scaled(c).unwrap());
                prop_assert!(
                    close(scaled, c.norm_sqr() * e),
                    "{scaled} vs {}",
                    c.norm_sqr() * e
                );
                // power-of-two scalings along the axes are exact in binary floating point
                let p = 2f64.powi(k);
                let exact = [
                    Complex64::new(p, 0.0),
                    Complex64::new(0.0, p),
                    Complex64::new(-p, 0.0),
                    Complex64::new(0.0, -p),
                ][quarter as usize];
                prop_assert_eq!(energy_statistic(&f.scaled(exact).unwrap()), p * p * e);
                Ok(())
            },
        ),
    );
    note(
        &mut failures,
        "distance bound",
        runner().run(&(arb_acf(), arb_acf(), arb_frame()), |(a, b, f)| {
            let l = a.len().min(b.len());
            let trim = |v: &AcfVector| AcfVector::new(v.values()[..l.max(2)].to_vec());
            if let (Ok(a), Ok(b)) = (trim(&a), trim(&b)) {
                let d = correlation_distance(&a, &b).unwrap();
                prop_assert!((0.0..=1.0).contains(&d), "{d}");
            }
            let obs = acf_vector(&f, a.len().min(f.len()))
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            if obs.len() == a.len() {
                let d = correlation_distance(&a, &obs).unwrap();
                prop_assert!((0.0..=1.0).contains(&d), "{d}");
            }
            let a1 = acf1_statistic(&f).unwrap();
            prop_assert!((0.0..=1.0).contains(&a1), "{a1}");
            Ok(())
        }),
    );

    let records = || {
        prop::collection::vec(
            (
                0.0..5000.0f64,
                0..plan.len(),
                0..3usize,
                any::<bool>(),
                any::<bool>(),
            ),
            0..300,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(t, ch, det, present, degenerate)| ScanRecord {
                    capture_time: t,
                    channel: plan[ch].clone(),
                    detector: DetectorKind::ALL[det],
                    statistic: (!degenerate).then_some(0.5),
                    threshold: 0.5,
                    present: present && !degenerate,
                })
                .collect::<Vec<_>>()
        })
    };
    note(
        &mut failures,
        "occupancy bound",
        runner().run(&(records(), 1.0..2000.0f64), |(recs, bin)| {
            for cell in aggregate(&recs, bin).unwrap() {
                prop_assert!((0.0..=1.0).contains(&cell.occupancy), "{cell:?}");
                prop_assert!(cell.n_detected <= cell.n_total && cell.n_total > 0);
            }
            Ok(())
        }),
    );
    note(
        &mut failures,
        "partition conservation",
        runner().run(&(records(), 1.0..2000.0f64), |(recs, bin)| {
            let mut expected: HashMap<(String, usize, DetectorKind), (u64, u64)> = HashMap::new();
            for r in &recs {
                let e = expected
                    .entry((
                        r.channel.band.to_string(),
                        r.channel.index_in_band,
                        r.detector,
                    ))
                    .or_default();
                e.0 += 1;
                e.1 += r.present as u64;
            }
            let mut got: HashMap<(String, usize, DetectorKind), (u64, u64)> = HashMap::new();
            for c in aggregate(&recs, bin).unwrap() {
                let g = got
                    .entry((
                        c.channel.band.to_string(),
                        c.channel.index_in_band,
                        c.detector,
                    ))
                    .or_default();
                g.0 += c.n_total;
                g.1 += c.n_detected;
            }
            prop_assert_eq!(got, expected);
            Ok(())
        }),
    );

    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("6 properties x {CASES} cases")
        } else {
            failures.join("; ")
        },
    )
}

fn ed_calibration() -> Outcome {
    let noise = NoiseSpec::new(1.0, 0x5eed).unwrap();
    let frames: Vec<ComplexFrame> = (0..10_000)
        .map(|k| gen_noise_frame(N, &noise, k).unwrap())
        .collect();
    let lambda = calibrate_ed_threshold(&frames, 0.05).unwrap();
    drop(frames);
    let oracle = Gamma::new(N as f64, N as f64).unwrap().inverse_cdf(0.95);

    let cfg = DetectorConfig::new(lambda, 0.5, 0.5, AcfVector::tone(N, LAGS).unwrap()).unwrap();
    let point = measure_pd_pfa(
        DetectorKind::Ed,
        &cfg,
        TrialScenario {
            signal: SignalSpec::none(),
            noise_power: 1.0,
            snr_db: f64::NEG_INFINITY,
            frame_len: N,
            trials: 10_000,
            seed: 0xf4e5,
        },
    )
    .unwrap();
    check(
        (1.04..=1.06).contains(&lambda) && (0.04..=0.06).contains(&point.pfa),
        format!(
            "lambda_ed={lambda:.6} (Gamma oracle {oracle:.6}), pfa={} over 10^4 fresh trials",
            point.pfa
        ),
    )
}

fn single_channel() -> Channel {
    builtin_table1_plan()
        .into_iter()
        .find(|c| c.center_freq_mhz == 2412.0)
        .unwrap()
}

fn timeline_spec(channel: &Channel) -> TimelineSpec {
    TimelineSpec {
        frame_len: N,
        frame_interval_s: 1.0,
        total_s: 1000.0,
        start_time: 0.0,
        sample_rate_hz: 1e6,
        center_freq_hz: channel.center_freq_mhz * 1e6,
    }
}

fn fixed_lambda_saturation() -> Outcome {
    let channel = single_channel();
    let cfg = DetectorConfig::new(0.5, 0.5, 0.5, AcfVector::tone(N, LAGS).unwrap()).unwrap();
    let off = OccupancySchedule::always_off(10.0).unwrap();
    let noise = NoiseSpec::new(1.0, 0xa11).unwrap();
    let source = |c: &Channel| {
        gen_channel_timeline(
            &off,
            &SignalSpec::none(),
            &noise,
            f64::NEG_INFINITY,
            timeline_spec(c),
        )
        .ok()
    };
    let log = run_sweep(std::slice::from_ref(&channel), source, &cfg).unwrap();
    let cells = aggregate(&log.records, 1000.0).unwrap();
    let ed = cells
        .iter()
        .find(|c| c.detector == DetectorKind::Ed)
        .unwrap();
    check(
        ed.n_total == 1000 && ed.occupancy >= 0.999,
        format!(
            "ed occupancy {} over {} noise-only scans",
            ed.occupancy, ed.n_total
        ),
    )
}

const DUTY30: &str = r#"
master_seed = 30
frame_len = 1024
frame_interval_s = 1.0
total_s = 1000.0
bin_len_s = 1000.0
plan = "custom"

[[bands]]
name = "2.4 GHz"
start_mhz = 2412.0
stop_mhz = 2412.0
spacing_mhz = [5.0]
channels = 1

[detector]
acf_lags = 8
lambda_ed = 0.5

[calibration]
signal = { waveform = "tone", freq = 0.05 }
snr_db = 20.0
noise_frames = 10000
target_pfa = 0.01

[channel]
signal = { waveform = "tone", freq = 0.05 }
snr_db = 10.0
schedule = { period_s = 10.0, on = [[0.0, 3.0]] }
"#;

fn duty_cycle_tracking() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("duty30.toml");
    fs::write(&path, DUTY30).unwrap();
    let scenario = Scenario::load(&path).unwrap();
    let out = dir.path().join("out");
    cmd_simulate(&scenario, &out, None).unwrap();
    let records = read_records_csv(fs::File::open(out.join("records.csv")).unwrap()).unwrap();
    let cells = aggregate(&records, scenario.bin_len_s).unwrap();
    let occ = |k: DetectorKind| {
        cells
            .iter()
            .find(|c| c.detector == k)
            .map(|c| (c.occupancy, c.n_total))
            .unwrap()
    };
    let (cdist, n) = occ(DetectorKind::Cdist);
    let (ed, _) = occ(DetectorKind::Ed);
    let gamma = records
        .iter()
        .find(|r| r.detector == DetectorKind::Cdist)
        .unwrap()
        .threshold;
    check(
        n == 1000 && (cdist - 0.30).abs() <= 0.05 && ed >= 0.95,
        format!("cdist occupancy {cdist} (gamma={gamma:.4}), ed occupancy {ed} at lambda_ed=0.5, {n} scans"),
    )
}

fn cdist_vs_acf1() -> Outcome {
    let set = TrialSet::generate(
        TrialScenario {
            signal: SignalSpec::tone(0.05, 1.0).unwrap(),
            noise_power: 1.0,
            snr_db: 5.0,
            frame_len: N,
            trials: 10_000,
            seed: 0xd0d0,
        },
        &tone_reference(0x7e57),
    )
    .unwrap();
    let at = |k| set.operating_point(k, set.threshold_for_pfa(k, 0.05).unwrap());
    let (c, a) = (at(DetectorKind::Cdist), at(DetectorKind::Acf1));
    check(
        c.pd >= a.pd,
        format!(
            "pd(cdist)={} pfa={}; pd(acf1)={} pfa={}; 10^4 shared trials",
            c.pd, c.pfa, a.pd, a.pfa
        ),
    )
}

const DETERMINISM: &str = r#"
master_seed = 8
frame_len = 256
frame_interval_s = 1.0
total_s = 30.0

[calibration]
noise_frames = 1000

[channel]
signal = { waveform = "bpsk", samples_per_symbol = 4 }
snr_db = 3.0
schedule = { period_s = 7.0, on = [[0.0, 2.0], [4.0, 5.5]] }

[[override]]
band = "GSM-850 (D/L)"
index = 2
snr_db = -inf

[eval]
snr_db = [-3.0, 0.0, 6.0]
trials = 2000
roc_points = 15
"#;

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("det.toml");
    fs::write(&path, DETERMINISM).unwrap();
    let scenario = Scenario::load(&path).unwrap();
    let files = ["records.csv", "truth.csv", "plan.csv", "eval.csv"];
    let run = |tag: &str, workers: Option<usize>| -> Vec<Vec<u8>> {
        let out = dir.path().join(tag);
        cmd_simulate(&scenario, &out, workers).unwrap();
        cmd_eval(&scenario, &out, workers).unwrap();
        files
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect()
    };
    let baseline = run("a", None);
    let mut mismatches = Vec::new();
    for (tag, workers) in [
        ("b", None),
        ("w1", Some(1)),
        ("w3", Some(3)),
        ("w8", Some(8)),
    ] {
        for (f, (x, y)) in files.iter().zip(baseline.iter().zip(run(tag, workers))) {
            if *x != y {
                mismatches.push(format!("{f} differs for run {tag}"));
            }
        }
    }
    let sizes: Vec<String> = files
        .iter()
        .zip(&baseline)
        .map(|(f, b)| format!("{f}={}B", b.len()))
        .collect();
    check(
        mismatches.is_empty() && baseline.iter().all(|b| !b.is_empty()),
        if mismatches.is_empty() {
            format!("repeat + 1/3/8 workers identical ({})", sizes.join(", "))
        } else {
            mismatches.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("channel-plan exactness", plan_exactness),
        ("detector unit values", unit_values),
        ("invariance suite", invariance_suite),
        ("ed threshold calibration", ed_calibration),
        (
            "fixed low energy threshold saturates",
            fixed_lambda_saturation,
        ),
        ("duty-cycle tracking", duty_cycle_tracking),
        ("cdist vs acf1 at matched pfa", cdist_vs_acf1),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
