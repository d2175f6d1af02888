use std::fs;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use airpad_core::dataset::{build_dataset, class_counts, load_dataset, save_dataset, SynthConfig};
use airpad_core::gesture::SegmenterConfig;
use airpad_core::nn::gradcheck::run_suite;
use airpad_core::nn::{confusion_csv, load_model, metrics_csv, save_model, train, Recipe, TrainConfig};
use airpad_core::pipeline::{capture, trace_to_image};
use airpad_core::sensing::io::{load_trajectory, write_frames_csv};
use airpad_core::sensing::{ElectrodeLayout, SensorConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::server::{self, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "airpad", version, about = "Touchless 3D pad simulator: datasets, training, replay and live sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a labeled gesture dataset (train/test splits plus manifests).
    Synth {
        #[arg(long, default_value_t = 1000)]
        per_class: usize,
        #[arg(long, env = "AIRPAD_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one of the four classifier recipes on a dataset directory.
    Train {
        /// cnn-aug, cnn, mlp or rnn
        #[arg(long)]
        model: Recipe,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Defaults to 64 for the CNNs and 32 otherwise.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, env = "AIRPAD_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Evaluate a model on the test split of a dataset directory.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Replay a trajectory file through the sensing and gesture pipeline.
    Simulate {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long, requires = "model")]
        classify: bool,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, env = "AIRPAD_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of every layer's gradients.
    Gradcheck {
        #[arg(long, env = "AIRPAD_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API and live WebSocket sessions.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory served at `/` (the web UI build).
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        idle_timeout_secs: u64,
        #[arg(long, env = "AIRPAD_SEED", default_value_t = 0)]
        seed: u64,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { per_class, seed, out } => synth(per_class, seed, out),
        Command::Train { model, data, epochs, batch, lr, seed, out, metrics } => {
            let cfg = TrainConfig { epochs, lr, batch_size: batch.unwrap_or(model.config(seed).batch_size), ..model.config(seed) };
            train_cmd(model, data, cfg, out, metrics)
        }
        Command::Eval { model, data, confusion } => eval(model, data, confusion),
        Command::Simulate { traj, frames, classify, model, seed } => simulate(traj, frames, classify.then_some(model).flatten(), seed),
        Command::Gradcheck { seed } => gradcheck(seed),
        Command::Serve { port, host, model, static_dir, idle_timeout_secs, seed } => {
            let model = model.map(|p| load_model(&p).with_context(|| format!("loading {}", p.display()))).transpose()?;
            let cfg = ServerConfig {
                model: model.map(Arc::new),
                static_dir,
                idle_timeout: Duration::from_secs(idle_timeout_secs),
                sensor: SensorConfig { seed, ..Default::default() },
                ..Default::default()
            };
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                server::serve(listener, cfg).await?;
                Ok(())
            })
        }
    }
}

fn synth(per_class: usize, seed: u64, out: PathBuf) -> Result<()> {
    let cfg = SynthConfig { per_class, seed, ..Default::default() };
    let (ds, stats) = build_dataset(&cfg, &SensorConfig::default())?;
    save_dataset(&out, &ds)?;
    println!(
        "wrote {} train / {} test images to {} ({} trajectories, {} retried)",
        ds.train.len(),
        ds.test.len(),
        out.display(),
        stats.trajectories,
        stats.failures
    );
    Ok(())
}

fn train_cmd(recipe: Recipe, data: PathBuf, cfg: TrainConfig, out: PathBuf, metrics: Option<PathBuf>) -> Result<()> {
    let ds = load_dataset(&data).with_context(|| format!("loading dataset from {}", data.display()))?;
    let (bundle, report) = train(recipe.spec(), &ds.train, &ds.test, &cfg, recipe.name(), |m| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        )
    })?;
    save_model(&bundle, &out)?;
    if let Some(path) = metrics {
        fs::write(&path, metrics_csv(&report))?;
    }
    println!("saved {recipe} to {} after {} epochs in {:.1}s", out.display(), report.epochs.len(), report.wall_time_s);
    Ok(())
}

fn eval(model: PathBuf, data: PathBuf, confusion: Option<PathBuf>) -> Result<()> {
    let bundle = load_model(&model).with_context(|| format!("loading {}", model.display()))?;
    let ds = load_dataset(&data).with_context(|| format!("loading dataset from {}", data.display()))?;
    let ev = bundle.evaluate(&ds.test)?;
    println!("accuracy {:.4}  loss {:.4}  ({} images)", ev.accuracy, ev.loss, ds.test.len());
    let counts = class_counts(&ds.test);
    for (digit, row) in ev.confusion.0.iter().enumerate() {
        if counts[digit] > 0 {
            println!("  digit {digit}: {:.3} ({}/{})", row[digit] as f64 / counts[digit] as f64, row[digit], counts[digit]);
        }
    }
    if let Some(path) = confusion {
        fs::write(&path, confusion_csv(&ev.confusion))?;
    }
    Ok(())
}

fn simulate(traj: PathBuf, frames: Option<PathBuf>, model: Option<PathBuf>, seed: u64) -> Result<()> {
    let trajectory = load_trajectory(&traj).with_context(|| format!("loading {}", traj.display()))?;
    let bundle = model.map(|p| load_model(&p).with_context(|| format!("loading {}", p.display()))).transpose()?;
    let sensor = SensorConfig { seed, ..Default::default() };
    let cap = capture(&trajectory, &sensor, &ElectrodeLayout::default(), &SegmenterConfig::default())?;
    if let Some(path) = frames {
        write_frames_csv(BufWriter::new(fs::File::create(&path)?), &cap.frames)?;
    }
    println!("{} frames, {} gesture(s), {} discarded", cap.frames.len(), cap.gestures.len(), cap.discarded);
    for (i, g) in cap.gestures.iter().enumerate() {
        print!("gesture {i}: {:.3}..{:.3} s, {} points", g.start_t, g.end_t, g.points.len());
        if let Some(b) = &bundle {
            let p = b.predict(&trace_to_image(g, None)?.quantized())?;
            print!(", digit {} ({:.1}%)", p.digit, 100.0 * p.confidence);
        }
        println!();
    }
    Ok(())
}

fn gradcheck(seed: u64) -> Result<()> {
    let reports = run_suite(seed)?;
    let mut failed = 0;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status}  {:<26} max rel err {:.3e} (tol {:.0e}, {} checks)", r.name, r.max_rel_error, r.tolerance, r.checked);
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        bail!("{failed} gradient check(s) failed");
    }
    Ok(())
}
