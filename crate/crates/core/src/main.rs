use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use scgir_core::harness::idx::{write_idx_images, write_idx_labels};
use scgir_core::harness::pipeline::{
    encoder_checkpoint_bytes, evaluate_points, goai_checkpoint_bytes, goai_ckpt_name, grid_points, heatmap_csv,
    heatmaps, load_encoder, load_goais, prepare_data, run_pipeline, sweep, train_encoder_stage, train_goai_stage,
    trained_ratios, RunWriter, Streams, SweepAxis, ENCODER_CKPT, HEATMAP_POST, HEATMAP_PRE, METRICS_FILE,
};
use scgir_core::harness::{gen_synthetic, metrics_csv, DatasetSource, ExperimentConfig, MetricsRecord, METRICS_HEADER};
use scgir_core::{Result, ScgirError};

#[derive(Parser)]
#[command(name = "scgir", version, about = "Goal-oriented semantic communication lab")]
struct Cli {
    /// Config file of `key = value` lines; unset keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full run: encoder, classifiers, evaluation grid, manifest.
    Run,
    /// Self-supervised encoder training; writes the checkpoint and heatmaps.
    TrainEncoder,
    /// Classifier training on top of the saved encoder, one per compression ratio.
    TrainGoai,
    /// Evaluates the SNR × compression-ratio grid from saved checkpoints.
    Eval,
    /// Evaluates saved checkpoints along one axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Regenerates an artifact in the output directory.
    Export {
        #[arg(long, value_enum)]
        what: What,
    },
    /// Writes the configured synthetic dataset as IDX files.
    GenData,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Snr,
    Ratio,
    Sigma,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Metrics,
    Heatmap,
    Manifest,
}

const STAGE_FILES: [&str; 3] = ["encoder_metrics.csv", "goai_metrics.csv", "eval_metrics.csv"];

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            ScgirError::Io(io) => ScgirError::Config(format!("cannot read config {}: {io}", p.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes the stage's CSV and refreshes the manifest, even when the stage failed.
fn finish_stage(
    cfg: &ExperimentConfig,
    w: &mut RunWriter,
    csv_name: &str,
    records: &[MetricsRecord],
    outcome: Result<()>,
) -> Result<()> {
    let written = w.write(csv_name, metrics_csv(records, &cfg.digest()).as_bytes()).map(|_| ());
    let failure = outcome.and(written).err();
    w.register_existing()?;
    w.finish(cfg, failure.as_ref())?;
    failure.map_or(Ok(()), Err)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let digest = cfg.digest();
    match &cli.command {
        Command::Run => {
            let s = run_pipeline(&cfg)?;
            println!("run complete: {} ({} files)", s.dir.display(), s.files.len());
        }
        Command::TrainEncoder => {
            let mut w = RunWriter::create(&cfg.out_dir)?;
            let mut records = Vec::new();
            let outcome = (|| {
                let data = prepare_data(&cfg)?;
                let enc = train_encoder_stage(&cfg, &data, &mut records)?;
                w.write(ENCODER_CKPT, &encoder_checkpoint_bytes(&enc.model))?;
                w.write(HEATMAP_PRE, heatmap_csv(&enc.pre, &digest).as_bytes())?;
                w.write(HEATMAP_POST, heatmap_csv(&enc.post, &digest).as_bytes())?;
                Ok(())
            })();
            finish_stage(&cfg, &mut w, STAGE_FILES[0], &records, outcome)?;
        }
        Command::TrainGoai => {
            let mut w = RunWriter::create(&cfg.out_dir)?;
            let mut records = Vec::new();
            let outcome = (|| {
                let data = prepare_data(&cfg)?;
                let encoder = load_encoder(&cfg, &data)?;
                for (r, m) in train_goai_stage(&cfg, &encoder, &data, &trained_ratios(&cfg), &mut records)? {
                    w.write(&goai_ckpt_name(r), &goai_checkpoint_bytes(&m))?;
                }
                Ok(())
            })();
            finish_stage(&cfg, &mut w, STAGE_FILES[1], &records, outcome)?;
        }
        Command::Eval => {
            let mut w = RunWriter::create(&cfg.out_dir)?;
            let mut records = Vec::new();
            let outcome = (|| {
                let data = prepare_data(&cfg)?;
                let encoder = load_encoder(&cfg, &data)?;
                let goais = load_goais(&cfg, encoder.config().latent_dim(), data.train_y.classes, &cfg.ratio_grid)?;
                let mut rng = Streams::new(cfg.seed).eval;
                records = evaluate_points(&cfg, "eval", &encoder, &goais, &data, &grid_points(&cfg), &mut rng)?;
                Ok(())
            })();
            finish_stage(&cfg, &mut w, STAGE_FILES[2], &records, outcome)?;
        }
        Command::Sweep { axis } => {
            let axis = match axis {
                Axis::Snr => SweepAxis::Snr,
                Axis::Ratio => SweepAxis::Ratio,
                Axis::Sigma => SweepAxis::Sigma,
            };
            let records = sweep(&cfg, axis)?;
            for r in &records {
                println!(
                    "{} snr_db={} ratio={} sigma_n2={} accuracy={}±{} f1={}±{}",
                    r.phase,
                    r.snr_db.unwrap_or(f64::NAN),
                    r.compression_ratio.unwrap_or(f64::NAN),
                    r.sigma_n2.unwrap_or(f64::NAN),
                    r.accuracy.unwrap_or(f64::NAN),
                    r.accuracy_std.unwrap_or(f64::NAN),
                    r.f1.unwrap_or(f64::NAN),
                    r.f1_std.unwrap_or(f64::NAN),
                );
            }
            let mut w = RunWriter::create(&cfg.out_dir)?;
            finish_stage(&cfg, &mut w, &format!("sweep_{}.csv", axis.name()), &records, Ok(()))?;
        }
        Command::Export { what } => {
            let mut w = RunWriter::create(&cfg.out_dir)?;
            match what {
                What::Metrics => {
                    let mut body = String::new();
                    let mut sources: Vec<String> = STAGE_FILES.iter().map(|s| s.to_string()).collect();
                    sources.extend(["snr", "ratio", "sigma"].map(|a| format!("sweep_{a}.csv")));
                    for name in sources {
                        let path = cfg.out_dir.join(&name);
                        if !path.exists() {
                            continue;
                        }
                        let text = std::fs::read_to_string(&path)?;
                        for line in text.lines().filter(|l| !l.starts_with('#') && *l != METRICS_HEADER) {
                            body.push_str(line);
                            body.push('\n');
                        }
                    }
                    let text = metrics_csv(&[], &digest) + &body;
                    w.write(METRICS_FILE, text.as_bytes())?;
                }
                What::Heatmap => {
                    let data = prepare_data(&cfg)?;
                    let encoder = load_encoder(&cfg, &data)?;
                    let (pre, post) = heatmaps(&cfg, &data, &encoder)?;
                    w.write(HEATMAP_PRE, heatmap_csv(&pre, &digest).as_bytes())?;
                    w.write(HEATMAP_POST, heatmap_csv(&post, &digest).as_bytes())?;
                }
                What::Manifest => {}
            }
            w.register_existing()?;
            let path = w.finish(&cfg, None)?;
            println!("{}", path.display());
        }
        Command::GenData => {
            let DatasetSource::Synthetic(spec) = &cfg.dataset else {
                return Err(ScgirError::Config("gen-data needs dataset = synthetic".into()));
            };
            let ds = gen_synthetic(spec, &mut Streams::new(cfg.seed).data)?;
            let mut w = RunWriter::create(&cfg.out_dir)?;
            w.write("synthetic-images.idx3-ubyte", &write_idx_images(&ds.images)?)?;
            w.write("synthetic-labels.idx1-ubyte", &write_idx_labels(&ds.labels)?)?;
            w.register_existing()?;
            w.finish(&cfg, None)?;
            println!(
                "{} samples, separable after {} perceptron epochs (noise threshold {})",
                ds.images.n, ds.perceptron_epochs, ds.noise_threshold
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scgir: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
