use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gaze_aoi::commands;
use gaze_aoi::config::RunConfig;
use gaze_aoi::par;
use gaze_aoi::Result;

#[derive(Parser)]
#[command(
    name = "gaze-aoi",
    version,
    about = "Gaze-to-AOI annotation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Code every frame from pose keypoints and gaze.
    Annotate(Common),
    /// PR curves, F1 and AP of detections against box truth.
    Evaluate(Common),
    /// Agreement statistics between two frame codings.
    Reliability(Common),
    /// Summarize prior outputs into a report and plot-ready tables.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest JSON from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the AOI margin fraction.
    #[arg(long)]
    margin: Option<f64>,
    /// Override the IoU matching threshold.
    #[arg(long)]
    iou: Option<f64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                let mut c = RunConfig::default();
                c.resolve_paths(&std::env::current_dir().unwrap_or_default());
                c
            }
        };
        if let Some(m) = self.margin {
            cfg.margin = m;
        }
        if let Some(i) = self.iou {
            cfg.iou_thresh = i;
        }
        if let Some(o) = &self.out {
            cfg.out = std::env::current_dir().unwrap_or_default().join(o);
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Annotate(c) => {
            let a = commands::annotate(&c.config()?)?;
            println!(
                "annotated {} frames into {} segments",
                a.labels.len(),
                a.segments.len()
            );
        }
        Command::Evaluate(c) => {
            let s = commands::evaluate(&c.config()?)?;
            for (cat, cs) in &s.categories {
                match (cs.ap, cs.best_f1) {
                    (Some(ap), Some(f1)) => println!("{cat}: ap {ap:.4} best_f1 {f1:.4}"),
                    _ => println!("{cat}: no truth"),
                }
            }
        }
        Command::Reliability(c) => print!("{}", commands::reliability(&c.config()?)?.to_json()),
        Command::Report(c) => print!("{}", commands::report(&c.config()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match par::with_thread_cap(par::thread_cap_from_env(), || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaze-aoi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
