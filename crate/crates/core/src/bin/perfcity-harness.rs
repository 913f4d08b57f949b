use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use perfcity::harness::{generate_workload, random_model, replay, Burst, HotClass, TraceFile, WorkloadSpec};
use perfcity::model::{class_order, validate_model};

/// Synthetic workloads and trace replay for the perfcity server.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a trace from a workload spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trace against a server's ingest address.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7070")]
        target: String,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Write a workload spec over a random model, with one hot class and one burst.
    ExampleSpec {
        #[arg(long, default_value_t = 50)]
        classes: usize,
        #[arg(long, default_value_t = 60_000)]
        duration_ms: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Args::parse().command {
        Cmd::Gen { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let trace = generate_workload(&WorkloadSpec::from_json(&text)?)?;
            std::fs::write(&out, trace.to_text()).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} events to {}", trace.events.len(), out.display());
        }
        Cmd::Replay { trace, target, speed } => {
            let text = std::fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let report = replay(&TraceFile::parse(&text)?, &target, speed)?;
            println!("records sent: {}", report.records_sent);
            println!("wall time: {:.3} s", report.wall_time.as_secs_f64());
        }
        Cmd::ExampleSpec { classes, duration_ms, seed, out } => {
            let model = random_model(classes.max(2), 4, seed);
            let order = class_order(&validate_model(&model)?);
            let spec = WorkloadSpec {
                model,
                duration_ms,
                seed,
                hot_classes: vec![HotClass { class_id: order[0].clone(), mean_calls_per_second: 200.0 }],
                baseline_calls_per_second: 5.0,
                burst: Some(Burst {
                    start_ms: duration_ms / 2,
                    end_ms: duration_ms / 2 + duration_ms / 10,
                    class_id: order[order.len() / 2].clone(),
                    multiplier: 40.0,
                }),
            };
            std::fs::write(&out, serde_json::to_string_pretty(&spec)?)?;
            eprintln!("wrote spec to {}", out.display());
        }
    }
    Ok(())
}
