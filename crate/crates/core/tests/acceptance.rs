//! Acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test -p neuromatch --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use common::*;
use neuromatch::bench::BenchmarkResult;
use neuromatch::cli::{cmd_bench, Cli, Command};
use neuromatch::matcher::{extract_network, score_components, MatchReport};
use neuromatch::metrics::{self, Metric, MetricKind, Offset, Template};
use neuromatch::nifti::{self, swap_header_bytes, NiftiHeader, HEADER_SIZE};
use neuromatch::pardata::ExecutionConfig;
use neuromatch::report;
use neuromatch::synth::{self, SynthSpec};
use neuromatch::Volume;
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

const REL_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-12;

fn ac1_oracle_equivalence() -> Outcome {
    let mut r = rng(0xAC1);
    let instances = 200;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for instance in 0..instances {
        let n = r.random_range(8..=84);
        let dims = random_dims(&mut r, 16);
        let comps: Vec<Volume> = (0..n)
            .map(|i| random_volume(&mut r, dims, &format!("c{i}")))
            .collect();
        let t = random_volume(&mut r, dims, "t");
        let (f_thr, t_thr) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let template = Template::new(t.clone(), t_thr).unwrap();
        let cfg = ExecutionConfig::new(1 + instance % 8)
            .unwrap()
            .with_partitions(1 + (instance / 8) % 8)
            .unwrap();
        for kind in [MetricKind::Ssd, MetricKind::Ncc, MetricKind::Dice] {
            let metric = Metric::new(kind, f_thr);
            let scores = score_components(&comps, &template, metric, &cfg)
                .map_err(|e| format!("instance {instance} {kind}: {e}"))?;
            let oracle: Vec<f64> = comps
                .iter()
                .map(|c| score_loop(kind, c, &t, f_thr, t_thr))
                .collect();
            for (s, &o) in scores.iter().zip(&oracle) {
                let rel = if s.value == o {
                    0.0
                } else {
                    (s.value - o).abs() / s.value.abs().max(o.abs())
                };
                worst = worst.max(rel);
                ensure!(
                    rel <= REL_TOL,
                    "instance {instance} {kind} component {}: {} vs oracle {o}",
                    s.component_index,
                    s.value
                );
            }
            let (report, _) =
                extract_network(&comps, &template, metric, &cfg).map_err(|e| e.to_string())?;
            ensure!(
                report.selected == best_index(kind, &oracle),
                "instance {instance} {kind}: selected {} but brute force picks {}",
                report.selected,
                best_index(kind, &oracle)
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{instances} instances x 3 metrics ({checked} selections), worst relative error {worst:.2e}"
    ))
}

fn without_timing(mut report: MatchReport) -> MatchReport {
    report.elapsed_seconds = 0.0;
    report.workers = 0;
    report.partitions = 0;
    report
}

fn ac2_determinism() -> Outcome {
    let spec = SynthSpec {
        seed: 42,
        n_components: 84,
        dims: [64, 64, 64],
        planted_index: Some(17),
        ..Default::default()
    };
    let (comps, template) = synth::generate(&spec).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for metric in [Metric::ssd(), Metric::ncc(), Metric::dice(0.0)] {
        let mut reference: Option<(MatchReport, Vec<u8>)> = None;
        for workers in [1, 2, 4, 8] {
            for partitions in [1, 2, 4, 8] {
                let cfg = ExecutionConfig::new(workers)
                    .unwrap()
                    .with_partitions(partitions)
                    .unwrap();
                let (report, _) =
                    extract_network(&comps, &template, metric, &cfg).map_err(|e| e.to_string())?;
                let csv = report::csv_bytes(&report);
                let report = without_timing(report);
                runs += 1;
                match &reference {
                    None => reference = Some((report, csv)),
                    Some((r, c)) => {
                        ensure!(
                            *r == report,
                            "{} report differs at workers={workers} partitions={partitions}",
                            metric.kind()
                        );
                        ensure!(
                            *c == csv,
                            "{} CSV differs at workers={workers} partitions={partitions}",
                            metric.kind()
                        );
                    }
                }
            }
        }
    }
    Ok(format!(
        "{runs} runs over 84x64^3, reports and CSV bytes identical"
    ))
}

enum Speedup {
    Measured(Outcome),
    NotApplicable(String),
}

fn ac3_speedup() -> Speedup {
    const MIN_SPEEDUP: f64 = 1.5;
    const MIN_CPUS: usize = 4;
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cli = Cli::try_parse_from([
        "neuromatch",
        "bench",
        "--seed",
        "42",
        "--n-components",
        "84",
        "--dims",
        "64,64,64",
        "--planted-index",
        "17",
        "--metric",
        "ssd",
        "--workers",
        "4",
        "--reps",
        "5",
    ])
    .expect("valid bench arguments");
    let Command::Bench(args) = cli.command else {
        unreachable!("parsed a bench command")
    };
    let outcome = cmd_bench(&args).map_err(|e| e.message().to_owned());
    let result = match outcome {
        Ok(r) => r,
        Err(e) => return Speedup::Measured(Err(e)),
    };
    let summary = format!(
        "serial median {:.4}s, 4-worker median {:.4}s, speedup {:.3}x",
        result.serial_seconds, result.parallel_seconds, result.speedup
    );
    if cpus < MIN_CPUS {
        return Speedup::NotApplicable(format!(
            "host has {cpus} logical CPU(s), criterion requires >= {MIN_CPUS}; measured {summary}"
        ));
    }
    Speedup::Measured(if result.speedup >= MIN_SPEEDUP {
        Ok(summary)
    } else {
        Err(format!("{summary} < {MIN_SPEEDUP}x"))
    })
}

fn ac4_planted_recovery() -> Outcome {
    let seeds = 50u64;
    let mut worst_margin = f64::INFINITY;
    for sigma in [0.5, 0.25, 0.1] {
        for seed in 0..seeds {
            let planted = (seed as usize * 31 + 5) % 84;
            let spec = SynthSpec {
                seed,
                n_components: 84,
                dims: [32, 32, 32],
                noise_sigma: sigma,
                planted_index: Some(planted),
                ..Default::default()
            };
            let (comps, template) = synth::generate(&spec).map_err(|e| e.to_string())?;
            let (report, _) = extract_network(
                &comps,
                &template,
                Metric::ssd(),
                &ExecutionConfig::default(),
            )
            .map_err(|e| e.to_string())?;
            ensure!(
                report.selected == planted,
                "sigma {sigma} seed {seed}: selected {} instead of {planted}",
                report.selected
            );
            worst_margin = worst_margin.min(report.scores[1].value / report.scores[0].value);
        }
    }
    for seed in 0..seeds {
        let spec = SynthSpec {
            seed,
            n_components: 84,
            dims: [32, 32, 32],
            noise_sigma: 0.0,
            planted_index: Some(seed as usize % 84),
            ..Default::default()
        };
        let (comps, template) = synth::generate(&spec).map_err(|e| e.to_string())?;
        let (report, _) = extract_network(
            &comps,
            &template,
            Metric::ssd(),
            &ExecutionConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            report.selected == seed as usize % 84 && report.best().value == 0.0,
            "sigma 0 seed {seed}: selected {} with SSD {}",
            report.selected,
            report.best().value
        );
    }
    Ok(format!(
        "{seeds}/{seeds} recovered at sigma 0.5, 0.25, 0.1 (min runner-up/winner SSD ratio {worst_margin:.2}); sigma 0 wins with SSD 0.0 in {seeds}/{seeds}"
    ))
}

fn swap_file(bytes: &[u8]) -> Vec<u8> {
    let header: [u8; HEADER_SIZE] = bytes[..HEADER_SIZE].try_into().unwrap();
    let mut out = swap_header_bytes(&header).to_vec();
    out.extend_from_slice(&bytes[HEADER_SIZE..352]);
    for word in bytes[352..].chunks(8) {
        out.extend(word.iter().rev());
    }
    out
}

fn ac5_nifti_round_trip() -> Outcome {
    let mut r = rng(0xAC5);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..100 {
        let dims = [
            r.random_range(1..=32),
            r.random_range(1..=32),
            r.random_range(1..=32),
        ];
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|_| match r.random_range(0..4) {
                0 => 0.0,
                1 => f64::from_bits(r.random_range(1..(1u64 << 52))), // subnormal
                2 => r.random_range(-1e6..1e6),
                _ => -r.random::<f64>() * 1e-300,
            })
            .collect();
        let spacing = [r.random_range(0.5..4.0), 2.0, 0.75];
        let v = Volume::new(dims, spacing, data, "v").unwrap();
        let name = if i % 2 == 0 { "v.nii.gz" } else { "v.nii" };
        let path = dir.path().join(name);
        nifti::write_volume_file(&path, &v, None).map_err(|e| e.to_string())?;
        let loaded = nifti::load(&path).map_err(|e| e.to_string())?;
        ensure!(
            loaded.volumes.len() == 1,
            "volume {i}: {} volumes",
            loaded.volumes.len()
        );
        let back = &loaded.volumes[0];
        ensure!(back.dims() == dims, "volume {i}: dims {:?}", back.dims());
        let bits_equal = back
            .data()
            .iter()
            .zip(v.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(bits_equal, "volume {i}: data not bit-identical");
        let h = &loaded.header;
        let expected_dim = [
            3,
            dims[0] as i16,
            dims[1] as i16,
            dims[2] as i16,
            1,
            1,
            1,
            1,
        ];
        ensure!(h.dim == expected_dim, "volume {i}: dim {:?}", h.dim);
        ensure!(
            h.datatype_code == 64
                && h.bitpix == 64
                && h.vox_offset == 352.0
                && h.magic == *b"n+1\0",
            "volume {i}: header contract violated"
        );
        let raw = nifti::write_volume(&v, None).map_err(|e| e.to_string())?;
        let swapped = nifti::decode(&swap_file(&raw), "v").map_err(|e| e.to_string())?;
        let native = nifti::decode(&raw, "v").map_err(|e| e.to_string())?;
        ensure!(
            swapped.volumes == native.volumes
                && NiftiHeader {
                    byte_order: nifti::ByteOrder::Native,
                    ..swapped.header
                } == native.header,
            "volume {i}: byte-swapped fixture differs"
        );
    }
    Ok("100 volumes (1^3..32^3, gz and plain) bit-identical; swapped fixtures match".into())
}

fn ac6_metric_identities() -> Outcome {
    let mut r = rng(0xAC6);
    let cases = 1000;
    let mut worst_ncc = 0.0f64;
    let mut empty_pairs = 0;
    for case in 0..cases {
        let dims = random_dims(&mut r, 8);
        let f = random_volume(&mut r, dims, "f");
        let g = random_volume(&mut r, dims, "g");
        let tf = Template::new(f.clone(), 0.0).unwrap();
        let tg = Template::new(g.clone(), r.random_range(-4.0..4.0)).unwrap();
        ensure!(
            metrics::ssd(&f, &tf).unwrap() == 0.0,
            "case {case}: ssd(f,f) != 0"
        );
        ensure!(
            metrics::ssd_at_offset(&f, &tg, Offset::ZERO).unwrap()
                == metrics::ssd(&f, &tg).unwrap(),
            "case {case}: zero-offset ssd differs"
        );
        let neg = f.map_values(|x| -x).unwrap();
        let self_corr = metrics::ncc(&f, &tf).unwrap();
        let anti_corr = metrics::ncc(&neg, &tf).unwrap();
        worst_ncc = worst_ncc
            .max((self_corr - 1.0).abs())
            .max((anti_corr + 1.0).abs());
        ensure!(
            (self_corr - 1.0).abs() <= IDENTITY_TOL && (anti_corr + 1.0).abs() <= IDENTITY_TOL,
            "case {case}: ncc(f,f) = {self_corr}, ncc(-f,f) = {anti_corr}"
        );
        let thr = r.random_range(-4.0..4.0);
        let d = metrics::dice(&f, &tg, thr).unwrap();
        ensure!(
            (0.0..=1.0).contains(&d),
            "case {case}: dice {d} out of bounds"
        );
        // thresholds above every voxel give two empty masks
        let empty = Template::new(g.clone(), 10.0).unwrap();
        ensure!(
            metrics::dice(&f, &empty, 10.0).unwrap() == 1.0,
            "case {case}: empty/empty dice != 1"
        );
        empty_pairs += 1;
    }
    Ok(format!(
        "{cases} cases per identity, worst ncc deviation {worst_ncc:.1e}, {empty_pairs} empty/empty dice = 1.0"
    ))
}

fn ac7_reference_speedup_arithmetic() -> Outcome {
    let serial = 23.86625409;
    let parallel = 6.437999964;
    let result =
        BenchmarkResult::from_times(serial, parallel, 1, 84, [64, 64, 64], 1, MetricKind::Ssd)
            .map_err(|e| e.to_string())?;
    ensure!(
        (result.speedup - 3.7070).abs() <= 1e-3,
        "speedup {} not within 1e-3 of 3.7070",
        result.speedup
    );
    ensure!(
        (result.speedup - serial / parallel).abs() <= 1e-9,
        "speedup inconsistent with times"
    );
    Ok(format!("23.86625409 / 6.437999964 = {:.6}", result.speedup))
}

enum Verdict {
    Pass(String),
    Fail(String),
    NotApplicable(String),
}

fn timed(budget: Duration, run: impl FnOnce() -> Outcome) -> (Verdict, Duration) {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let verdict = match outcome {
        Ok(msg) if elapsed > budget => Verdict::Fail(format!(
            "{msg}; took {:.1}s, budget {}s",
            elapsed.as_secs_f64(),
            budget.as_secs()
        )),
        Ok(msg) => Verdict::Pass(msg),
        Err(msg) => Verdict::Fail(msg),
    };
    (verdict, elapsed)
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        (
            "AC1",
            "oracle equivalence",
            timed(secs(60), ac1_oracle_equivalence),
        ),
        ("AC2", "determinism", timed(secs(120), ac2_determinism)),
        ("AC3", "speedup", {
            let start = Instant::now();
            match ac3_speedup() {
                Speedup::NotApplicable(msg) => (Verdict::NotApplicable(msg), start.elapsed()),
                Speedup::Measured(outcome) => {
                    timed(secs(300) - start.elapsed().min(secs(300)), || outcome)
                }
            }
        }),
        (
            "AC4",
            "planted-template recovery",
            timed(secs(120), ac4_planted_recovery),
        ),
        (
            "AC5",
            "NIfTI round trip",
            timed(secs(30), ac5_nifti_round_trip),
        ),
        (
            "AC6",
            "metric identities",
            timed(secs(30), ac6_metric_identities),
        ),
        (
            "AC7",
            "reference speedup arithmetic",
            timed(secs(1), ac7_reference_speedup_arithmetic),
        ),
    ];
    let mut failed = 0;
    for (id, name, (verdict, elapsed)) in results {
        let (tag, msg) = match verdict {
            Verdict::Pass(m) => ("PASS", m),
            Verdict::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Verdict::NotApplicable(m) => ("N/A ", m),
        };
        println!("[{tag}] {id} {name}: {msg} ({:.2}s)", elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
