use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use binpick::eval::{
    approx_effect_experiment, evaluate_records, timing_benchmark, BenchConfig, BenchRow, ConfusionMatrix, SweepConfig,
};
use binpick::geometry::{build_approx_model, load_mesh};
use binpick::grasp::{
    enumerate_candidates, find_best_grasp, overlay_gray, overlay_rgb, InputConfig, NetScorer, RecordSource, ScanConfig,
};
use binpick::nn::{load_params, save_params, train, NetConfig, Network, SampleSource, TrainConfig};
use binpick::render::{write_pgm8, write_ppm, DepthImage};
use binpick::trials::{collect, load_dataset, CollectConfig, Split, Symmetry};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

mod error;

use error::CliError;

/// Settings shared by every subcommand, read from one JSON file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    /// Master seed; when set it replaces the collection, training and sweep seeds.
    seed: Option<u64>,
    collect: CollectConfig,
    net: NetConfig,
    train: TrainConfig,
    input: InputConfig,
    /// Symmetries applied to training records; empty means the default six.
    augment: Vec<Symmetry>,
    scan: ScanConfig,
    bench: BenchConfig,
    sweep: SweepConfig,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut config: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("reading {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        if let Some(seed) = config.seed {
            config.collect.seed = seed;
            config.train.seed = seed;
            config.sweep.collect.seed = seed;
            config.sweep.train.seed = seed;
            config.bench.seed = seed;
        }
        if config.augment.is_empty() {
            config.augment = Symmetry::default_set();
        }
        config.collect.validate()?;
        config.train.validate()?;
        config.net.layer_specs()?;
        config.scan.validate()?;
        config.sweep.validate()?;
        if config.input.crop != config.net.input {
            return Err(CliError::Config(format!(
                "input crop {} differs from the network input {}",
                config.input.crop, config.net.input
            )));
        }
        Ok(config)
    }
}

#[derive(Parser)]
#[command(name = "binpick", version, about = "Simulation-trained bin picking pipeline")]
struct Cli {
    /// JSON run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log level for progress messages on standard error.
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an approximate box model to a mesh.
    Approx {
        /// Wavefront OBJ mesh.
        #[arg(long)]
        mesh: PathBuf,
        /// Maximum number of boxes.
        #[arg(long, default_value_t = 10)]
        parts: usize,
        /// Output JSON model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate pick trials and write a balanced dataset.
    Collect {
        /// Number of success records (and of failure records).
        #[arg(long)]
        successes: usize,
        /// Simulation threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a dataset's training split.
    Train {
        /// Dataset directory written by `collect`.
        #[arg(long)]
        data: PathBuf,
        /// Output parameter file.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report with the loss curve.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Threads for gradient evaluation; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Confusion matrix and precision, recall and F-value.
    Eval {
        /// JSON confusion matrix `{"tp", "fp", "fn", "tn"}`; skips the network.
        #[arg(long, conflicts_with_all = ["params", "data"])]
        matrix: Option<PathBuf>,
        /// Parameter file written by `train`.
        #[arg(long, requires = "data")]
        params: Option<PathBuf>,
        /// Dataset directory; its verify split is evaluated.
        #[arg(long, requires = "params")]
        data: Option<PathBuf>,
        /// Optional JSON report with per-record scores.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Raster-scan a depth image for the best grasp.
    Detect {
        #[arg(long)]
        params: PathBuf,
        /// Raw little-endian f32 depth image sized per the camera configuration.
        #[arg(long)]
        image: PathBuf,
        /// Overlay image; `.pgm` gives grayscale, anything else color PPM.
        #[arg(long)]
        out: PathBuf,
        /// JSON report listing every candidate and its score.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Time pile simulation for several collision part counts.
    Bench {
        /// Mesh to benchmark; defaults to the configured asset.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Comma-separated part counts, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        parts: Option<Vec<usize>>,
        /// Repetitions per part count, overriding the configuration.
        #[arg(long)]
        runs: Option<usize>,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train at several approximation rates and score the probe grasps.
    Sweep {
        /// Working directory for the two datasets.
        #[arg(long)]
        out: PathBuf,
        /// JSON report.
        #[arg(long)]
        report: PathBuf,
        /// Simulation threads, overriding the configuration.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::Data(format!("writing {}: {e}", path.display())))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Other(e.to_string()))
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    params: &'a Path,
    train_records: usize,
    train_samples: usize,
    verify_records: usize,
    report: &'a binpick::nn::TrainReport,
}

#[derive(Serialize)]
struct DetectReport<'a> {
    best: usize,
    best_succeeds: bool,
    good: &'a [usize],
    candidates: Vec<DetectRow>,
}

#[derive(Serialize)]
struct DetectRow {
    index: usize,
    x: f64,
    y: f64,
    theta: f64,
    opening: f64,
    score: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Approx { mesh, parts, out } => {
            let mesh = load_mesh(&mesh)?;
            let model = build_approx_model(&mesh, parts)?;
            fs::write(&out, model.to_json()).map_err(|e| CliError::Data(format!("writing {}: {e}", out.display())))?;
            println!("{} boxes, volume {:.6e} m^3 (mesh {:.6e})", model.part_count(), model.total_volume(), mesh.volume());
        }
        Command::Collect { successes, workers, out } => {
            let summary = collect(&config.collect, successes, workers, &out)?;
            if summary.partial {
                log::warn!("scene budget ran out; the dataset is partial");
            }
            write_json(&out.join("summary.json"), &summary)?;
            println!("{} records, manifest sha256 {}", summary.records, summary.manifest_sha256);
        }
        Command::Train {
            data,
            out,
            report,
            workers,
        } => {
            let dataset = load_dataset(&data)?;
            let train_set = RecordSource::from_dataset(&dataset, Split::Train, config.augment.clone(), config.input.clone())?;
            let verify_set = RecordSource::from_dataset(&dataset, Split::Verify, vec![Symmetry::IDENTITY], config.input.clone())?;
            let mut net = Network::<f32>::new(config.net.clone(), config.train.seed)?;
            let verify = (!verify_set.is_empty()).then_some(&verify_set as &dyn SampleSource);
            let train_config = TrainConfig {
                checkpoint: config.train.checkpoint.clone().or(Some(out.clone())),
                ..config.train.clone()
            };
            let result = pool(workers)?.install(|| train(&mut net, &train_set, verify, &train_config))?;
            save_params(&net, &out)?;
            if let Some(path) = report {
                write_json(
                    &path,
                    &TrainOutput {
                        params: &out,
                        train_records: train_set.records(),
                        train_samples: train_set.len(),
                        verify_records: verify_set.records(),
                        report: &result,
                    },
                )?;
            }
            if let Some(last) = result.epochs.last() {
                println!("{} epochs, final train loss {:.4}", result.epochs.len(), last.train_loss);
            }
        }
        Command::Eval {
            matrix,
            params,
            data,
            out,
            workers,
        } => {
            let (m, report) = if let Some(path) = matrix {
                let text = fs::read_to_string(&path).map_err(|e| CliError::Data(format!("reading {}: {e}", path.display())))?;
                let m: ConfusionMatrix =
                    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                (m, None)
            } else if let (Some(params), Some(data)) = (params, data) {
                let net: Network<f32> = load_params(&config.net, &params)?;
                let dataset = load_dataset(&data)?;
                let scorer = NetScorer {
                    net: &net,
                    input: config.input.clone(),
                };
                let report = pool(workers)?.install(|| evaluate_records(&scorer, &dataset, Split::Verify))?;
                (report.matrix, Some(report))
            } else {
                return Err(CliError::Config("eval needs --matrix or both --params and --data".into()));
            };
            println!("tp {} fp {} fn {} tn {}", m.tp, m.fp, m.fn_, m.tn);
            if let (Some(path), Some(r)) = (&out, &report) {
                write_json(path, r)?;
            }
            let metrics = m.metrics()?;
            println!(
                "precision {:.3} recall {:.3} f_value {:.3}",
                metrics.precision, metrics.recall, metrics.f_value
            );
            if let (Some(path), None) = (&out, &report) {
                write_json(path, &metrics)?;
            }
        }
        Command::Detect {
            params,
            image,
            out,
            report,
            workers,
        } => {
            let net: Network<f32> = load_params(&config.net, &params)?;
            let bytes = fs::read(&image).map_err(|e| CliError::Data(format!("reading {}: {e}", image.display())))?;
            let depth = DepthImage::from_le_bytes(&config.collect.camera, &bytes)?;
            let candidates = enumerate_candidates(&depth.grid, &config.collect.scene.tray, &config.scan)?;
            let scorer = NetScorer {
                net: &net,
                input: config.input.clone(),
            };
            let result = pool(workers)?.install(|| find_best_grasp(&scorer, &depth, candidates, &config.scan))?;
            let range = config.input.height_range;
            if out.extension().is_some_and(|e| e == "pgm") {
                write_pgm8(&out, depth.width(), depth.height(), &overlay_gray(&depth, &result, range)?)?;
            } else {
                write_ppm(&out, depth.width(), depth.height(), &overlay_rgb(&depth, &result, range)?)?;
            }
            let rows = result
                .candidates
                .iter()
                .map(|c| DetectRow {
                    index: c.index,
                    x: c.pose.x,
                    y: c.pose.y,
                    theta: c.pose.theta,
                    opening: c.pose.opening,
                    score: c.score.unwrap_or(f64::NAN),
                })
                .collect();
            write_json(
                &report,
                &DetectReport {
                    best: result.best,
                    best_succeeds: result.best_succeeds,
                    good: &result.good,
                    candidates: rows,
                },
            )?;
            let best = result.best();
            println!(
                "best candidate {} at ({:.4}, {:.4}) yaw {:.4}: score {:.4}, {} good",
                best.index,
                best.pose.x,
                best.pose.y,
                best.pose.theta,
                best.score.unwrap_or(f64::NAN),
                result.good.len()
            );
        }
        Command::Bench { mesh, parts, runs, out } => {
            let mut bench = config.bench.clone();
            if let Some(p) = parts {
                bench.parts = p;
            }
            if let Some(r) = runs {
                bench.runs = r;
            }
            let mesh = load_mesh(mesh.as_ref().unwrap_or(&bench.scene.asset))?;
            let rows = timing_benchmark(&mesh, &bench)?;
            let mut csv = String::from(BenchRow::CSV_HEADER);
            csv.push('\n');
            for r in &rows {
                csv.push_str(&r.csv());
                csv.push('\n');
            }
            fs::write(&out, &csv).map_err(|e| CliError::Data(format!("writing {}: {e}", out.display())))?;
            print!("{csv}");
        }
        Command::Sweep { out, report, workers } => {
            let mut sweep = config.sweep.clone();
            if let Some(w) = workers {
                sweep.workers = w;
            }
            let result = pool(sweep.workers)?.install(|| approx_effect_experiment(&sweep, &out))?;
            write_json(&report, &result)?;
            print!("{}", result.csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp_secs().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
