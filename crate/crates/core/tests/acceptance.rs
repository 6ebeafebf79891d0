//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::channel_checks::{empirical_snr_db, noiseless_roundtrip_err, rayleigh_gain_stats, SNR_TARGETS};
use common::grad_cases::{cases, worst, TOL};
use common::{brute_accuracy, brute_macro_f1};
use scgir_core::augment::{solarize, solarize_value, Image};
use scgir_core::channel::{ChannelConfig, ChannelModel};
use scgir_core::encoder::{covariance, scgir_loss, CrossCorrMatrix};
use scgir_core::goai::{accuracy, cross_entropy, f1_score, Averaging};
use scgir_core::harness::idx::{parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels};
use scgir_core::harness::pipeline::{
    evaluate_points, prepare_data, run_pipeline, sha256_hex, train_encoder_stage, train_goai_stage, EncoderStage,
    EvalPoint, PreparedData, Streams, METRICS_FILE,
};
use scgir_core::harness::{ExperimentConfig, MetricsRecord};
use scgir_core::numeric::{Rng, Tensor};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(n: usize, title: &str, started: Instant, o: &Outcome, failures: &mut Vec<usize>) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({title}): {verdict} [{:.1}s] {}", started.elapsed().as_secs_f64(), o.detail);
    if !o.pass {
        failures.push(n);
    }
}

fn within_time(o: Outcome, started: Instant, budget: Duration) -> Outcome {
    let t = started.elapsed();
    if t > budget {
        outcome(false, format!("{}; runtime {:.1}s over {:.0}s budget", o.detail, t.as_secs_f64(), budget.as_secs_f64()))
    } else {
        o
    }
}

fn formulas() -> Outcome {
    let mut bad = Vec::new();
    let id = CrossCorrMatrix::new(Tensor::identity(4)).unwrap();
    let l0 = scgir_loss(&id, 5e-4).total;
    if l0 != 0.0 {
        bad.push(format!("loss(I) = {l0:e}"));
    }
    let c = CrossCorrMatrix::new(Tensor::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()).unwrap();
    let l = scgir_loss(&c, 5e-4).total;
    if (l - 2.5e-4).abs() > 1e-12 {
        bad.push(format!("hand case loss {l:e}"));
    }
    for classes in [2usize, 3, 10] {
        let logits = Tensor::zeros(&[3, classes]);
        let ce = cross_entropy(&logits, &[0, 1, classes - 1]).unwrap();
        if (ce - (classes as f64).ln()).abs() > 1e-12 {
            bad.push(format!("uniform CE with {classes} classes = {ce}"));
        }
    }
    let grid: Vec<f64> = (0..256).map(|i| i as f64 / 255.0).collect();
    let img = solarize(&Image::new(1, 16, 16, grid.clone()).unwrap());
    for (i, &x) in grid.iter().enumerate() {
        let want = if x < 0.5 { x } else { 1.0 - x };
        if solarize_value(x) != want || img.data[i] != want {
            bad.push(format!("solarize({x})"));
            break;
        }
    }
    let cov = covariance(&Tensor::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap()).unwrap();
    if cov.data() != [2.0, 0.0, 0.0, 0.0] {
        bad.push(format!("covariance hand case {:?}", cov.data()));
    }
    outcome(bad.is_empty(), if bad.is_empty() { "all hand cases exact".into() } else { bad.join("; ") })
}

fn gradients() -> Outcome {
    let mut max = 0.0f64;
    let mut bad = Vec::new();
    let all = cases();
    for (name, case) in &all {
        let e = worst(*case);
        max = max.max(e);
        if !(e < TOL) {
            bad.push(format!("{name} {e:e}"));
        }
    }
    let detail = format!("{} cases, max relative error {max:.2e}", all.len());
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { format!("{detail}; failing: {}", bad.join(", ")) })
}

fn channel_stats() -> Outcome {
    let mut rng = Rng::seed(2024);
    let mut bad = Vec::new();
    let mut worst_db = 0.0f64;
    for t in SNR_TARGETS {
        let got = empirical_snr_db(t, &mut rng);
        worst_db = worst_db.max((got - t).abs());
        if (got - t).abs() > 0.2 {
            bad.push(format!("SNR {t} dB measured {got:.3}"));
        }
    }
    let (power, p) = rayleigh_gain_stats(&mut rng);
    if (power - 1.0).abs() > 0.02 {
        bad.push(format!("E|h|^2 = {power:.4}"));
    }
    if !(p > 0.01) {
        bad.push(format!("KS p = {p:.4}"));
    }
    let rt = noiseless_roundtrip_err(200, &mut rng);
    if !(rt < 1e-9) {
        bad.push(format!("round trip error {rt:e}"));
    }
    let detail = format!("worst SNR offset {worst_db:.3} dB, E|h|^2 {power:.4}, KS p {p:.3}, round trip {rt:.1e}");
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join("; ")) })
}

fn windowed_cosine(epochs: &[&MetricsRecord], window: usize) -> (f64, f64) {
    let mean = |s: &[&MetricsRecord]| s.iter().map(|r| r.cosine_sim.unwrap()).sum::<f64>() / s.len() as f64;
    let w = window.min(epochs.len());
    (mean(&epochs[..w]), mean(&epochs[epochs.len() - w..]))
}

fn encoder_trend(cfg: &ExperimentConfig, data: &PreparedData) -> (Outcome, Option<EncoderStage>) {
    let mut records = Vec::new();
    let enc = match train_encoder_stage(cfg, data, &mut records) {
        Ok(e) => e,
        Err(e) => return (outcome(false, format!("training failed: {e}")), None),
    };
    let epochs: Vec<&MetricsRecord> = records.iter().filter(|r| r.phase == "encoder").collect();
    let first = epochs[0].loss_total.unwrap();
    let last = epochs.last().unwrap().loss_total.unwrap();
    let diag = enc.post.diag_mean();
    let off = enc.post.offdiag_abs_mean();
    let (cos_start, cos_end) = windowed_cosine(&epochs, 10);
    let checks = [
        (last < 0.5 * first, format!("loss {first:.2} -> {last:.2}")),
        (diag >= 0.9, format!("diag mean {diag:.3}")),
        (off <= 0.1, format!("|off-diag| mean {off:.3}")),
        (cos_end >= cos_start + 0.2, format!("cosine window {cos_start:.3} -> {cos_end:.3}")),
        (cos_end >= 0.8, format!("final cosine {cos_end:.3}")),
    ];
    let detail = checks
        .iter()
        .map(|(ok, s)| if *ok { s.clone() } else { format!("{s} (miss)") })
        .collect::<Vec<_>>()
        .join(", ");
    (outcome(checks.iter().all(|c| c.0), format!("{} epochs: {detail}", epochs.len())), Some(enc))
}

/// Mean test accuracy per point over `SEEDS`; each seed trains its own classifiers.
fn seed_means(
    cfg: &ExperimentConfig,
    enc: &EncoderStage,
    data: &PreparedData,
    ratios: &[f64],
    points: &[EvalPoint],
) -> Result<Vec<f64>, String> {
    let mut sums = vec![0.0; points.len()];
    for seed in SEEDS {
        let mut c = cfg.clone();
        c.seed = seed;
        let goais = train_goai_stage(&c, &enc.model, data, ratios, &mut Vec::new()).map_err(|e| e.to_string())?;
        let mut rng = Streams::new(seed).eval;
        let recs = evaluate_points(&c, "acceptance", &enc.model, &goais, data, points, &mut rng)
            .map_err(|e| e.to_string())?;
        for (s, r) in sums.iter_mut().zip(&recs) {
            *s += r.accuracy.unwrap();
        }
    }
    Ok(sums.into_iter().map(|s| s / SEEDS.len() as f64).collect())
}

fn noise_monotonicity(cfg: &ExperimentConfig, enc: &EncoderStage, data: &PreparedData) -> Outcome {
    let ratio = cfg.sweep_ratio;
    let levels = [0.001, 0.01, 0.1, 0.0];
    let points: Vec<EvalPoint> = levels
        .iter()
        .map(|&nv| EvalPoint {
            ratio,
            channel: ChannelConfig::from_noise_var(cfg.channel, nv),
        })
        .collect();
    let acc = match seed_means(cfg, enc, data, &[ratio], &points) {
        Ok(a) => a,
        Err(e) => return outcome(false, e),
    };
    let monotone = acc[0] >= acc[1] && acc[1] >= acc[2];
    let clean = acc[3];
    outcome(
        monotone && clean >= 0.99,
        format!(
            "{} k/n {ratio}: accuracy at sigma_n2 0.001/0.01/0.1 = {:.4}/{:.4}/{:.4}{}, clean {clean:.4}{}",
            cfg.channel.name(),
            acc[0],
            acc[1],
            acc[2],
            if monotone { "" } else { " (not non-increasing)" },
            if clean >= 0.99 { "" } else { " (below 0.99)" },
        ),
    )
}

fn compression_monotonicity(cfg: &ExperimentConfig, enc: &EncoderStage, data: &PreparedData) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for model in [ChannelModel::Awgn, ChannelModel::Rayleigh] {
        let mut c = cfg.clone();
        c.channel = model;
        c.eval_draws = 20;
        let points: Vec<EvalPoint> = [0.1, 0.6]
            .iter()
            .map(|&ratio| EvalPoint {
                ratio,
                channel: ChannelConfig::from_snr_db(model, 5.0),
            })
            .collect();
        match seed_means(&c, enc, data, &[0.1, 0.6], &points) {
            Ok(a) => {
                pass &= a[1] >= a[0];
                parts.push(format!("{} 5 dB: k/n 0.1 {:.4}, 0.6 {:.4}", model.name(), a[0], a[1]));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", model.name()));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn metric_oracles() -> Outcome {
    let mut rng = Rng::seed(77);
    let mut mismatches = 0;
    for _ in 0..100 {
        let classes = 2 + rng.below(7);
        let n = 1 + rng.below(60);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let preds: Vec<usize> = (0..n)
            .map(|i| if rng.bernoulli(0.5) { labels[i] } else { rng.below(classes) })
            .collect();
        let acc = accuracy(&preds, &labels).unwrap();
        let f1 = f1_score(&preds, &labels, Averaging::Macro).unwrap();
        let micro = f1_score(&preds, &labels, Averaging::Micro).unwrap();
        let want_acc = brute_accuracy(&preds, &labels, classes);
        if acc != want_acc || micro != want_acc || f1 != brute_macro_f1(&preds, &labels, classes) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("100 random cases, {mismatches} mismatches"))
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("encoder.epochs", "4"),
        ("goai.epochs", "4"),
        ("eval.draws", "3"),
        ("eval.snr_db", "0,10"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let mut c = cfg.clone();
        c.out_dir = root.path().join(name);
        match run_pipeline(&c) {
            Ok(s) => runs.push(s),
            Err(e) => return outcome(false, format!("run {name} failed: {e}")),
        }
    }
    let csv = |d: &Path| std::fs::read(d.join(METRICS_FILE)).unwrap();
    let same_csv = csv(&runs[0].dir) == csv(&runs[1].dir);
    let ckpts: Vec<&String> = runs[0].files.keys().filter(|f| f.ends_with(".ckpt")).collect();
    let same_ckpt = ckpts.iter().all(|f| {
        let a = sha256_hex(&std::fs::read(runs[0].dir.join(f)).unwrap());
        let b = sha256_hex(&std::fs::read(runs[1].dir.join(f)).unwrap());
        a == b && runs[1].files.get(*f) == runs[0].files.get(*f)
    });
    let same_files = runs[0].files == runs[1].files;
    outcome(
        same_csv && same_ckpt && same_files && !ckpts.is_empty(),
        format!(
            "metrics csv identical: {same_csv}, {} checkpoint digests identical: {same_ckpt}, manifests agree: {same_files}",
            ckpts.len()
        ),
    )
}

fn scgir(args: &[&str]) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_scgir")).args(args).output().ok()?.status.code()
}

fn idx_parsing() -> Outcome {
    let mut bad = Vec::new();
    let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3];
    let pixels = [0u8, 1, 127, 128, 254, 255, 9, 200, 33, 0, 255, 77];
    images.extend(pixels);
    let labels = vec![0u8, 0, 8, 1, 0, 0, 0, 2, 4, 1];
    let parsed = parse_idx_images(&images).unwrap();
    if (parsed.n, parsed.c, parsed.h, parsed.w) != (2, 1, 2, 3)
        || parsed.data.iter().zip(pixels).any(|(&v, p)| v != p as f64 / 255.0)
    {
        bad.push("image values".to_string());
    }
    if write_idx_images(&parsed).unwrap() != images {
        bad.push("image bytes do not round-trip".into());
    }
    let lab = parse_idx_labels(&labels).unwrap();
    if lab.labels != [4, 1] || write_idx_labels(&lab).unwrap() != labels {
        bad.push("label round trip".into());
    }
    let mut bad_magic = images.clone();
    bad_magic[3] = 0x04;
    let truncated = &images[..images.len() - 1];
    for (what, bytes) in [("bad magic", &bad_magic[..]), ("truncated", truncated), ("short header", &images[..6])] {
        match parse_idx_images(bytes) {
            Err(e) if e.exit_code() == 3 => {}
            other => bad.push(format!("{what}: {other:?}")),
        }
    }
    match parse_idx_labels(&labels[..9]) {
        Err(e) if e.exit_code() == 3 => {}
        other => bad.push(format!("truncated labels: {other:?}")),
    }

    let dir = tempfile::tempdir().unwrap();
    let cli = |img: &[u8], name: &str| -> Option<i32> {
        let ip = dir.path().join(format!("{name}-images.idx"));
        let lp = dir.path().join(format!("{name}-labels.idx"));
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, &labels).unwrap();
        let cfg = dir.path().join(format!("{name}.cfg"));
        let text = format!(
            "data.idx_images = {}\ndata.idx_labels = {}\ndataset = idx\nout_dir = {}\n",
            ip.display(),
            lp.display(),
            dir.path().join(format!("{name}-out")).display()
        );
        std::fs::write(&cfg, text).unwrap();
        scgir(&["--config", cfg.to_str().unwrap(), "eval"])
    };
    for (what, bytes, want) in [("bad magic", &bad_magic[..], 3), ("truncated", truncated, 3)] {
        let got = cli(bytes, &what.replace(' ', "_"));
        if got != Some(want) {
            bad.push(format!("cli {what}: exit {got:?}, want {want}"));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "fixtures round-trip; malformed input exits 3".into() } else { bad.join("; ") })
}

fn main() {
    let mut failures = Vec::new();
    let secs = Duration::from_secs;

    let t = Instant::now();
    report(1, "formula exactness", t, &within_time(formulas(), t, secs(1)), &mut failures);
    let t = Instant::now();
    report(2, "gradient suite", t, &within_time(gradients(), t, secs(30)), &mut failures);
    let t = Instant::now();
    report(3, "channel statistics", t, &within_time(channel_stats(), t, secs(30)), &mut failures);

    let cfg = ExperimentConfig::default();
    let data = prepare_data(&cfg).expect("default dataset");
    let t = Instant::now();
    let (o, enc) = encoder_trend(&cfg, &data);
    report(4, "encoder training trend", t, &within_time(o, t, secs(300)), &mut failures);
    match enc {
        Some(enc) => {
            let t = Instant::now();
            let o = noise_monotonicity(&cfg, &enc, &data);
            report(5, "classifier noise monotonicity", t, &within_time(o, t, secs(300)), &mut failures);
            let t = Instant::now();
            let o = compression_monotonicity(&cfg, &enc, &data);
            report(6, "compression monotonicity", t, &within_time(o, t, secs(300)), &mut failures);
        }
        None => {
            let none = outcome(false, "no trained encoder".into());
            report(5, "classifier noise monotonicity", Instant::now(), &none, &mut failures);
            report(6, "compression monotonicity", Instant::now(), &none, &mut failures);
        }
    }

    let t = Instant::now();
    report(7, "metric oracles", t, &metric_oracles(), &mut failures);
    let t = Instant::now();
    report(8, "reproducibility", t, &reproducibility(), &mut failures);
    let t = Instant::now();
    report(9, "IDX parsing", t, &idx_parsing(), &mut failures);

    if failures.is_empty() {
        println!("acceptance: all 9 criteria PASS");
    } else {
        println!("acceptance: FAIL on criteria {failures:?}");
        std::process::exit(1);
    }
}
