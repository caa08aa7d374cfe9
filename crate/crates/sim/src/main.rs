use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;

use breakout_core::{generate, ConversationModel, SegmenterConfig};
use breakout_sim::{drive, read_matrix, write_samples, write_truth, DriveOptions};

/// Synthetic meeting generator.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(long)]
    participants: usize,
    #[arg(long)]
    duration_min: f64,
    #[arg(long)]
    seed: u64,
    /// JSON array of rows; defaults to uniform off-diagonal.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Server base URL, e.g. http://127.0.0.1:8080
    #[arg(long)]
    server: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long, env = "BREAKOUT_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    overlap_prob: f64,
}

async fn run(args: Args) -> anyhow::Result<()> {
    let mut model = ConversationModel::uniform_off_diagonal(args.participants, args.seed);
    if let Some(path) = &args.matrix {
        model.matrix = read_matrix(path)?;
        if model.matrix.len() != args.participants {
            bail!("matrix has {} rows but --participants is {}", model.matrix.len(), args.participants);
        }
    }
    model.overlap_prob = args.overlap_prob;
    let cfg = SegmenterConfig::default();
    if let Err(errs) = model.validate(&cfg) {
        bail!("invalid model: {}", errs.join("; "));
    }
    if args.duration_min.is_nan() || args.duration_min <= 0.0 {
        bail!("--duration-min must be positive");
    }
    let duration_ms = (args.duration_min * 60_000.0).round() as u64;

    if args.server.is_none() && args.out.is_none() && args.truth.is_none() {
        bail!("nothing to do: pass --server and/or --out/--truth");
    }

    if let Some(out) = &args.out {
        let generated = generate(&model, duration_ms, &cfg);
        write_samples(out, &generated.samples)?;
        if args.server.is_none() {
            if let Some(truth) = &args.truth {
                write_truth(truth, &generated.truth_turns)?;
            }
        }
    } else if args.server.is_none() {
        let truth = args.truth.as_ref().expect("checked above");
        write_truth(truth, &generate(&model, duration_ms, &cfg).truth_turns)?;
    }

    if let Some(server) = &args.server {
        let token = args.token.clone().context("a token is required: set BREAKOUT_TOKEN or pass --token")?;
        let report = drive(&model, duration_ms, &cfg, &DriveOptions::new(server, token, args.speed)).await?;
        let truth = args.truth.clone().unwrap_or_else(|| PathBuf::from("truth.jsonl"));
        write_truth(&truth, &report.truth_turns)?;
        println!(
            "session {} posted {} samples ({} accepted, {} dropped) in {:.1}s; truth in {}",
            report.session_id,
            report.posted,
            report.accepted,
            report.dropped,
            report.wall.as_secs_f64(),
            truth.display()
        );
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    match run(Args::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("breakout-sim: {e:#}");
            ExitCode::FAILURE
        }
    }
}
