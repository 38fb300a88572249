//! `rlnc`: simulations, sweeps, multiplier benchmarks and packet tools.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 internal
//! invariant violation.

mod config;
mod packet;

use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rlnc_core::codec::CodecError;
use rlnc_core::simnet::{self, RunMetrics, SimError, METRIC_COLUMNS};
use rlnc_core::GfContext;
use serde_json::{json, Value};

use config::{ExperimentConfig, Format, Overrides, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "rlnc", version, about = "Random linear network coding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One simulation of the configured chain.
    Run,
    /// Every grid cell for every seed, plus per-cell means.
    Sweep,
    /// Times peasant against log/antilog multiplication.
    Bench,
    /// Converts between packet hex and packet fields.
    Packet {
        #[command(subcommand)]
        action: PacketAction,
    },
}

#[derive(Debug, Subcommand)]
enum PacketAction {
    /// Hex to fields (`field,value` CSV, or JSON with --format json).
    Decode {
        /// Hex bytes; whitespace is ignored. Reads --input or stdin when absent.
        hex: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fields (JSON or `field,value` CSV) to hex.
    Encode {
        /// Field document. Reads --input or stdin when absent.
        fields: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Config(_) | SimError::Codec(CodecError::InvalidParams(_)) => Failure::Input(e.into()),
        other => Failure::Internal(other.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let cfg = ExperimentConfig::resolve(&cli.overrides, std::env::var(SEED_ENV).ok())?;
    match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Bench => cmd_bench(&cfg),
        Command::Packet { action } => cmd_packet(&cfg, action),
    }
}

/// Writes the artifact to `--out` or stdout, and the summary to whichever
/// stream the artifact does not use.
fn emit(cfg: &ExperimentConfig, artifact: &str, summary: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, artifact).with_context(|| format!("cannot write {}", path.display()))?;
            println!("{summary}");
        }
        None => {
            io::stdout().write_all(artifact.as_bytes())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn csv_preamble(command: &str, cfg: &ExperimentConfig) -> String {
    let mut out = format!("# rlnc {command} {}\n", env!("CARGO_PKG_VERSION"));
    for line in cfg.to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes to JSON")
}

fn metrics_json(m: &RunMetrics) -> Value {
    let mut v = serde_json::to_value(m).expect("metrics serialize");
    v["switch_drop_rate"] = json!(m.switch_drop_rate());
    v
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let cell = cfg.cell();
    let (topology, switches, mut sender) = simnet::cell_setup(&cfg.sweep_base(), &cell).map_err(sim_failure)?;
    sender.redundancy = cfg.redundancy;
    let metrics = simnet::run(&topology, &switches, &sender, cfg.seed).map_err(sim_failure)?;

    let artifact = match cfg.format {
        Format::Csv => format!(
            "{}{}\n{}\n",
            csv_preamble("run", cfg),
            simnet::csv_header(),
            simnet::run_csv_row(&cell, cfg.seed, &Ok(metrics.clone()))
        ),
        Format::Json => {
            let doc = json!({ "command": "run", "config": config_json(cfg), "metrics": metrics_json(&metrics) });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    let summary = format!(
        "decoded {}/{} generations, switch drop rate {:.4}, {} multiplications, {} redundant packets",
        metrics.generations_decoded,
        metrics.generations_attempted,
        metrics.switch_drop_rate(),
        metrics.mul_operation_count,
        metrics.redundant_packets_received
    );
    emit(cfg, &artifact, &summary)?;
    if metrics.decode_errors > 0 {
        return Err(Failure::Internal(anyhow!(
            "{} generations decoded to data differing from the sources",
            metrics.decode_errors
        )));
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let grid = cfg.grid();
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Failure::Input(anyhow!(
            "sweep grid is empty: grid_generation_sizes, grid_symbols_per_packet, grid_modes and grid_losses all need values"
        )));
    }
    let seeds = cfg.seed_list()?;
    let base = cfg.sweep_base();
    for cell in &cells {
        let (topology, ..) = simnet::cell_setup(&base, cell).map_err(sim_failure)?;
        topology.validate().map_err(sim_failure)?;
    }
    let table = simnet::sweep(&grid, &base, &seeds).map_err(sim_failure)?;

    let artifact = match cfg.format {
        Format::Csv => format!("{}{}", csv_preamble("sweep", cfg), table.to_csv()),
        Format::Json => {
            let runs: Vec<Value> = table
                .runs
                .iter()
                .map(|r| {
                    let mut v = json!({ "cell": r.cell, "seed": r.seed });
                    match &r.result {
                        Ok(m) => v["metrics"] = metrics_json(m),
                        Err(e) => v["error"] = json!(e.to_string()),
                    }
                    v
                })
                .collect();
            let summaries: Vec<Value> = table
                .summaries
                .iter()
                .map(|s| {
                    let means: serde_json::Map<String, Value> = METRIC_COLUMNS
                        .iter()
                        .zip(&s.means)
                        .map(|(k, v)| (k.to_string(), json!(v)))
                        .collect();
                    json!({ "cell": s.cell, "runs": s.runs, "failures": s.failures, "means": means })
                })
                .collect();
            let doc = json!({ "command": "sweep", "config": config_json(cfg), "runs": runs, "summaries": summaries });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };

    let mut summary = format!("{} cells x {} seeds; mean switch drop rate:", cells.len(), seeds.len());
    for s in &table.summaries {
        summary.push_str(&format!(
            "\n  G{} S{} {:<5} loss {}: {:.4}",
            s.cell.generation_size,
            s.cell.symbols_per_packet,
            simnet::mode_label(s.cell.mode),
            s.cell.loss,
            s.mean_drop_rate()
        ));
    }
    emit(cfg, &artifact, &summary)?;

    let failed: Vec<String> = table
        .runs
        .iter()
        .filter_map(|r| match &r.result {
            Err(e) => Some(format!("{:?} seed {}: {e}", r.cell, r.seed)),
            Ok(m) if m.decode_errors > 0 => Some(format!("{:?} seed {}: {} decode errors", r.cell, r.seed, m.decode_errors)),
            Ok(_) => None,
        })
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Internal(anyhow!("{} runs failed; first: {}", failed.len(), failed[0])));
    }
    Ok(())
}

fn cmd_bench(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cfg.iterations == 0 {
        return Err(Failure::Input(anyhow!("iterations must be at least 1")));
    }
    let ctx = GfContext::default_gf256();
    let report = simnet::bench_mul_backends(&ctx, cfg.iterations).map_err(sim_failure)?;
    let doc = json!({
        "command": "bench",
        "config": { "iterations": cfg.iterations, "mul_algorithms": ["peasant", "log_table"] },
        "report": report,
    });
    let artifact = format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"));
    let summary = format!(
        "peasant {:.6} s, log_table {:.6} s over {} multiplications: peasant/log_table ratio {:.3}",
        report.peasant_seconds, report.log_table_seconds, report.iterations, report.ratio
    );
    emit(cfg, &artifact, &summary)?;
    if !report.products_identical {
        return Err(Failure::Internal(anyhow!("backends produced different products")));
    }
    Ok(())
}

fn read_input(inline: Option<String>, path: Option<PathBuf>) -> Result<String> {
    match (inline, path) {
        (Some(_), Some(_)) => bail!("give either an inline argument or --input, not both"),
        (Some(s), None) => Ok(s),
        (None, Some(p)) => std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display())),
        (None, None) => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            Ok(s)
        }
    }
}

fn cmd_packet(cfg: &ExperimentConfig, action: PacketAction) -> Result<(), Failure> {
    let output = match action {
        PacketAction::Decode { hex, input } => {
            let text = read_input(hex, input)?;
            let text: String = text.lines().filter(|l| !l.trim_start().starts_with('#')).collect::<Vec<_>>().join("\n");
            let (_, fields) = packet::decode_hex(&text)?;
            match cfg.format {
                Format::Csv => fields.to_csv(),
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&fields).expect("json")),
            }
        }
        PacketAction::Encode { fields, input } => {
            let text = read_input(fields, input)?;
            format!("{}\n", packet::encode_fields(&packet::PacketFields::parse(&text)?)?)
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, output).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(())
}
