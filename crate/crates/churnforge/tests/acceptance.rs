//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use churnforge::ingest::{parse_events, serialize_log, Format};
use churnforge::report::read_bins;
use churnforge_core::analysis::{
    bin_dropout_correlation, bin_success_rates, degree_correlation, pearson,
};
use churnforge_core::classify::{FeatureVector, GnbModel, KnnModel, Scaling};
use churnforge_core::eval::{split_sweep, DEFAULT_RATIOS};
use churnforge_core::label::{inter_arrival, label_by_rule, label_dataset, split_cut_time};
use churnforge_core::network::features_from_log;
use churnforge_core::synth::{default_config, generate_market, MarketConfig};
use churnforge_core::DropoutLabel::{self, Active, Dropout};
use churnforge_core::{finalize_log, ArrivalEvent, EventLog, LabelRule};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || {
        format!("{what} took {took:.2?}, limit {limit:?}")
    })
}

// 1 ------------------------------------------------------------------------

fn reference_bin_correlation() -> Check {
    let started = Instant::now();
    let path = format!("{}/tests/fixtures/bins.csv", env!("CARGO_MANIFEST_DIR"));
    let table = read_bins(std::fs::File::open(path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let lower = bin_dropout_correlation(&table, true).map_err(|e| e.to_string())?;
    let all = bin_dropout_correlation(&table, false).map_err(|e| e.to_string())?;
    ensure(lower.n_points == 9, || {
        format!("{} points used", lower.n_points)
    })?;
    ensure((lower.rho - -0.73).abs() <= 0.02, || {
        format!("rho {:.4} outside -0.73 +/- 0.02", lower.rho)
    })?;
    ensure(all.rho < 0.0, || {
        format!("ten-row rho {:.4} is not negative", all.rho)
    })?;
    within_time(started, Duration::from_secs(1), "table correlation")?;
    Ok(format!(
        "rho = {:.4} (nine rows), {:.4} (ten rows)",
        lower.rho, all.rho
    ))
}

// 2 ------------------------------------------------------------------------

fn oracle_knn(
    train: &[(FeatureVector, DropoutLabel)],
    k: usize,
    x: &FeatureVector,
) -> DropoutLabel {
    let n = train.len() as f64;
    let mut mean = [0.0; 3];
    let mut sd = [0.0; 3];
    for j in 0..3 {
        mean[j] = train.iter().map(|t| t.0[j]).sum::<f64>() / n;
        let var = train
            .iter()
            .map(|t| (t.0[j] - mean[j]).powi(2))
            .sum::<f64>()
            / n;
        sd[j] = var.sqrt().max(1e-9);
    }
    let z =
        |v: &FeatureVector| -> FeatureVector { std::array::from_fn(|j| (v[j] - mean[j]) / sd[j]) };
    let q = z(x);
    let mut scan: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = z(&t.0);
            let mut d = 0.0;
            for j in 0..3 {
                d += (q[j] - p[j]) * (q[j] - p[j]);
            }
            (d, i)
        })
        .collect();
    scan.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let dropouts = scan[..k]
        .iter()
        .filter(|(_, i)| train[*i].1 == Dropout)
        .count();
    if 2 * dropouts > k {
        Dropout
    } else {
        Active
    }
}

/// Class density times prior, evaluated directly. `None` when the two class
/// densities are too close to order.
fn oracle_gnb(train: &[(FeatureVector, DropoutLabel)], x: &FeatureVector) -> Option<DropoutLabel> {
    let n = train.len() as f64;
    let pooled_max = (0..3)
        .map(|j| {
            let mu = train.iter().map(|t| t.0[j]).sum::<f64>() / n;
            train.iter().map(|t| (t.0[j] - mu).powi(2)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    let floor = (1e-9 * pooled_max).max(1e-12);
    let density = |label: DropoutLabel| {
        let members: Vec<&FeatureVector> = train
            .iter()
            .filter(|t| t.1 == label)
            .map(|t| &t.0)
            .collect();
        let m = members.len() as f64;
        let mut p = m / n;
        for j in 0..3 {
            let mu = members.iter().map(|v| v[j]).sum::<f64>() / m;
            let var = (members.iter().map(|v| (v[j] - mu).powi(2)).sum::<f64>() / m).max(floor);
            p *= (-(x[j] - mu).powi(2) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt();
        }
        p
    };
    let (d, a) = (density(Dropout), density(Active));
    if (d - a).abs() <= 1e-9 * d.max(a) {
        None
    } else if d > a {
        Some(Dropout)
    } else {
        Some(Active)
    }
}

/// Degree-shaped vectors `(p, w, w/p)`, which repeat often and so exercise
/// distance ties.
fn degree_vector(rng: &mut ChaCha8Rng) -> FeatureVector {
    let p = rng.random_range(1..=12u32);
    let w = rng.random_range(0..=p);
    [f64::from(p), f64::from(w), f64::from(w) / f64::from(p)]
}

fn continuous_vector(rng: &mut ChaCha8Rng) -> FeatureVector {
    [
        rng.random_range(0.0..30.0),
        rng.random_range(0.0..10.0),
        rng.random_range(0.0..1.0),
    ]
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    draw: fn(&mut ChaCha8Rng) -> FeatureVector,
) -> Vec<(FeatureVector, DropoutLabel)> {
    let n = rng.random_range(4..=50);
    let mut train: Vec<(FeatureVector, DropoutLabel)> = (0..n)
        .map(|_| {
            (
                draw(rng),
                if rng.random_bool(0.5) {
                    Dropout
                } else {
                    Active
                },
            )
        })
        .collect();
    train[0].1 = Dropout;
    train[1].1 = Active;
    train
}

fn classifier_oracles() -> Check {
    let started = Instant::now();
    let (mut knn_checked, mut gnb_checked, mut gnb_close) = (0usize, 0usize, 0usize);
    for instance in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC1A5 + instance);
        let draw = if instance % 2 == 0 {
            degree_vector
        } else {
            continuous_vector
        };
        let train = random_instance(&mut rng, draw);
        let queries: Vec<FeatureVector> = (0..25).map(|_| draw(&mut rng)).collect();

        for k in [1, 3] {
            let model = KnnModel::fit_vectors(&train, k, Scaling::Standardized)
                .map_err(|e| e.to_string())?;
            for q in &queries {
                let (got, want) = (model.predict_vector(q), oracle_knn(&train, k, q));
                ensure(got == want, || {
                    format!("instance {instance}, k={k}, x={q:?}: {got} vs oracle {want}")
                })?;
                knn_checked += 1;
            }
        }

        let gnb_train = if instance % 2 == 0 {
            random_instance(&mut rng, continuous_vector)
        } else {
            train
        };
        let model = GnbModel::fit_vectors(&gnb_train).map_err(|e| e.to_string())?;
        for _ in 0..25 {
            let q = continuous_vector(&mut rng);
            match oracle_gnb(&gnb_train, &q) {
                Some(want) => {
                    let got = model.predict_vector(&q);
                    ensure(got == want, || {
                        format!("instance {instance}, x={q:?}: gnb {got} vs oracle {want}")
                    })?;
                    gnb_checked += 1;
                }
                None => gnb_close += 1,
            }
        }
    }
    within_time(started, Duration::from_secs(10), "oracle comparison")?;
    Ok(format!(
        "{knn_checked} k-NN and {gnb_checked} naive Bayes predictions agree ({gnb_close} density near-ties skipped)"
    ))
}

// 3 ------------------------------------------------------------------------

fn pearson_fixtures() -> Check {
    let fixtures: [(&[f64], &[f64], f64); 7] = [
        (
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, 3.0, 2.0, 5.0],
            5.5 / 43.75f64.sqrt(),
        ),
        (&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0], 0.5),
        (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0], 0.8),
        (&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 0.0, 1.0], 0.0),
        (&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0], 1.0),
        (&[-2.0, 0.5, 7.0], &[6.0, -1.5, -21.0], -1.0),
        // mean-shifted far from zero: same as the second fixture
        (&[1e8 + 1.0, 1e8 + 2.0, 1e8 + 3.0], &[1.0, 3.0, 2.0], 0.5),
    ];
    for (i, (xs, ys, want)) in fixtures.iter().enumerate() {
        let got = pearson(xs, ys)
            .map_err(|e| format!("fixture {i}: {e}"))?
            .rho;
        ensure((got - want).abs() <= 1e-9, || {
            format!("fixture {i}: {got} vs {want}")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xAFF1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(3..=60);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
        let scale = |rng: &mut ChaCha8Rng| {
            let m = rng.random_range(0.1..10.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        };
        let (a, c) = (scale(&mut rng), scale(&mut rng));
        let (b, d) = (
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
        );
        let base = pearson(&xs, &ys).map_err(|e| e.to_string())?.rho;
        let xs2: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
        let moved = pearson(&xs2, &ys2).map_err(|e| e.to_string())?.rho;
        let err = (moved - (a * c).signum() * base).abs();
        ensure(err <= 1e-9, || format!("affine case {case}: error {err:e}"))?;
        worst = worst.max(err);
    }
    Ok(format!(
        "{} closed-form fixtures; 100 affine cases, worst error {worst:.1e}",
        fixtures.len()
    ))
}

// 4 ------------------------------------------------------------------------

const HORIZON: (i64, i64) = (0, 20_000);

fn random_history(rng: &mut ChaCha8Rng) -> EventLog {
    let workers = rng.random_range(2..=10);
    let tasks = rng.random_range(2..=25);
    let mut events = Vec::new();
    for t in 0..tasks {
        let start = rng.random_range(0..19_000);
        let mut entrants: Vec<usize> = (0..workers).filter(|_| rng.random_bool(0.4)).collect();
        if entrants.is_empty() {
            entrants.push(rng.random_range(0..workers));
        }
        let winner = rng.random_range(0..=entrants.len());
        for (i, w) in entrants.into_iter().enumerate() {
            let ts = start + rng.random_range(0..500);
            events.push(
                ArrivalEvent::new(format!("w{w}"), format!("t{t:02}"), ts, i == winner).unwrap(),
            );
        }
    }
    finalize_log(events, Some(HORIZON)).unwrap().log
}

fn features_of(log: &EventLog, cut: i64) -> Vec<churnforge_core::WorkerFeatures> {
    label_dataset(log, cut)
        .into_iter()
        .map(|l| l.features)
        .collect()
}

fn label_properties() -> Check {
    let psis = [0u64, 50, 300, 1_000, 4_000, 10_000, 30_000];
    let mut rules_checked = 0usize;
    for history in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1ABE1 + history);
        let log = random_history(&mut rng);

        for (worker, times) in log.arrival_times() {
            let gaps = inter_arrival(&times).map_err(|e| e.to_string())?;
            let total: i64 = gaps.iter().sum();
            ensure(total == times[times.len() - 1] - times[0], || {
                format!("history {history}, {worker}: gaps sum to {total}")
            })?;
        }

        for make in [
            (|psi| LabelRule::ThresholdLastGap { psi }) as fn(u64) -> LabelRule,
            |psi| LabelRule::ThresholdAbsence { psi },
        ] {
            let runs: Vec<Vec<DropoutLabel>> = psis
                .iter()
                .map(|&psi| {
                    label_by_rule(&log, make(psi)).map(|v| v.into_iter().map(|l| l.label).collect())
                })
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            for pair in runs.windows(2) {
                for (strict, loose) in pair[0].iter().zip(&pair[1]) {
                    ensure(!(*strict == Active && *loose == Dropout), || {
                        format!(
                            "history {history}: {:?} turned a worker into a dropout",
                            make(0)
                        )
                    })?;
                    rules_checked += 1;
                }
            }
        }

        let frac = rng.random_range(0.2..0.8);
        let cut = split_cut_time(&log, frac).map_err(|e| e.to_string())?;
        let want = features_of(&log, cut);
        let (before, after): (Vec<ArrivalEvent>, Vec<ArrivalEvent>) = log
            .events()
            .iter()
            .cloned()
            .partition(|e| e.timestamp() <= cut);

        let mut thinned = before.clone();
        thinned.extend(after.iter().filter(|_| rng.random_bool(0.5)).cloned());
        let thinned = finalize_log(thinned, Some(HORIZON))
            .map_err(|e| e.to_string())?
            .log;
        ensure(features_of(&thinned, cut) == want, || {
            format!("history {history}: deletion after the cut leaked")
        })?;

        let mut stamps: Vec<i64> = after.iter().map(|e| e.timestamp()).collect();
        stamps.shuffle(&mut rng);
        let mut permuted = before;
        for (e, ts) in after.iter().zip(stamps) {
            permuted
                .push(ArrivalEvent::new(e.worker_id(), e.task_id(), ts, e.is_winner()).unwrap());
        }
        let permuted = finalize_log(permuted, Some(HORIZON))
            .map_err(|e| e.to_string())?
            .log;
        ensure(features_of(&permuted, cut) == want, || {
            format!("history {history}: permutation after the cut leaked")
        })?;
    }
    Ok(format!(
        "100 histories: telescoping, psi monotonicity ({rules_checked} label pairs), no leakage"
    ))
}

// 5 ------------------------------------------------------------------------

fn synthetic_reproduction() -> Check {
    let mut lines = Vec::new();
    for seed in 1..=5u64 {
        let started = Instant::now();
        let log = generate_market(&default_config(seed)).map_err(|e| e.to_string())?;
        let degree = degree_correlation(&features_from_log(&log))
            .map_err(|e| e.to_string())?
            .rho;
        let cut = split_cut_time(&log, 2.0 / 3.0).map_err(|e| e.to_string())?;
        let labeled = label_dataset(&log, cut);
        let dropouts: Vec<_> = labeled
            .iter()
            .filter(|l| l.label == Dropout)
            .map(|l| l.features.clone())
            .collect();
        let bins = bin_dropout_correlation(&bin_success_rates(&dropouts), true)
            .map_err(|e| format!("seed {seed}: {e}"))?
            .rho;
        let sweep = split_sweep(&labeled, &DEFAULT_RATIOS, seed).map_err(|e| e.to_string())?;
        let worst = sweep
            .iter()
            .flat_map(|r| [r.acc_knn1, r.acc_knn3, r.acc_gnb])
            .fold(f64::INFINITY, f64::min);
        within_time(started, Duration::from_secs(10), &format!("seed {seed}"))?;
        ensure(degree >= 0.80, || {
            format!("seed {seed}: degree rho {degree:.4} < 0.80")
        })?;
        ensure(bins <= -0.50, || {
            format!("seed {seed}: bin rho {bins:.4} > -0.50")
        })?;
        ensure(worst >= 65.0, || {
            format!("seed {seed}: sweep cell {worst:.2} < 65.00")
        })?;
        lines.push(format!("seed {seed}: {degree:.3}/{bins:.3}/{worst:.1}"));
    }
    Ok(format!(
        "degree rho / bin rho / worst cell: {}",
        lines.join(", ")
    ))
}

// 6 ------------------------------------------------------------------------

fn run_pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_churnforge");
    let events = dir.join("events.csv");
    let events = events.to_str().ok_or("non-utf8 temp path")?;
    let steps: [&[&str]; 3] = [
        &["simulate", "--seed", "9"],
        &["analyze", "--events", events, "--seed", "9"],
        &["evaluate", "--events", events, "--seed", "9"],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(args)
            .arg("--out-dir")
            .arg(dir)
            .arg("--quiet")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!(
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn rerun_determinism() -> Check {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_pipeline(first.path())?;
    let b = run_pipeline(second.path())?;
    ensure(a.len() == 6, || {
        format!("expected 6 CSV outputs, found {:?}", a.keys())
    })?;
    for (name, bytes) in &a {
        ensure(b.get(name) == Some(bytes), || {
            format!("{name} differs between runs")
        })?;
    }
    Ok(format!("{} CSV files identical across two runs", a.len()))
}

// 7 ------------------------------------------------------------------------

fn round_trip() -> Check {
    let mut events_total = 0usize;
    for i in 0..50u64 {
        let config = MarketConfig {
            n_workers: 20 + (i as usize % 5) * 15,
            n_tasks: 200 + (i as usize % 7) * 50,
            horizon_days: 60,
            task_rate: 8.0,
            seed: 0x7E57 + i,
            ..default_config(0)
        };
        let log = generate_market(&config).map_err(|e| e.to_string())?;
        for format in [Format::Csv, Format::Jsonl] {
            let bytes = serialize_log(&log, format);
            let (events, report) =
                parse_events(bytes.as_slice(), format).map_err(|e| e.to_string())?;
            ensure(report.events_rejected == 0, || {
                format!("log {i} {format:?}: {report}")
            })?;
            let back = finalize_log(events, Some((log.horizon_start(), log.horizon_end())))
                .map_err(|e| e.to_string())?;
            ensure(back.collapsed.is_empty() && back.log == log, || {
                format!("log {i} {format:?}: round trip changed the log")
            })?;
        }
        events_total += log.len();
    }
    Ok(format!(
        "50 logs ({events_total} events) survive CSV and JSONL round trips"
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("reference bin correlation", reference_bin_correlation),
        ("classifier oracle equivalence", classifier_oracles),
        ("pearson correctness", pearson_fixtures),
        ("labeling properties", label_properties),
        ("synthetic qualitative reproduction", synthetic_reproduction),
        ("rerun determinism", rerun_determinism),
        ("ingestion round trip", round_trip),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {} {name} [{took:.2?}]: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name} [{took:.2?}]: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
