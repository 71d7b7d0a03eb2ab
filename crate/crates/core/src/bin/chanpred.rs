use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanpred::coherence::{default_max_lag, horizon_table, DEFAULT_THRESHOLDS};
use chanpred::experiment::{
    emit_report, evaluate_model, load_source, parse_override, prepare, profile_training, sweep, train_models,
    ExperimentConfig, PlotAxis, ResultRow,
};
use chanpred::models::Model;
use chanpred::signal::write_trace_csv;
use chanpred::{Error, Result};

#[derive(Parser)]
#[command(name = "chanpred", version, about = "Short-horizon channel prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file with [sections]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; repeats use seed, seed + 1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override a configuration key, e.g. --set model.family=lstm
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the raw source trace
    Simulate(Common),
    /// Write the downsampled small-scale fading trace
    Preprocess(Common),
    /// Coherence times and output lengths of the preprocessed trace
    Coherence(Common),
    /// Train the configured model once per seed and save it
    Train(Common),
    /// Evaluate a saved model on the configured test split
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the configured grid
    Sweep(Common),
    /// Time LSTM and GRU training per output length
    Profile(Common),
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut overrides = c.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    if let Some(seed) = c.seed {
        overrides.push(("experiment.seed".into(), seed.to_string()));
    }
    ExperimentConfig::load(c.config.as_deref(), &overrides)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn report(rows: &[ResultRow], out: &Path, name: &str, axis: PlotAxis) -> Result<ExitCode> {
    for row in rows {
        match row.report() {
            Some(r) => println!(
                "{} {} tx={} ty={} seed={} rmse={:.6} mae={:.6} time={:.2}s",
                row.environment,
                row.series(),
                row.descriptor.input_len,
                row.descriptor.output_len,
                row.seed,
                r.rmse_mean,
                r.mae_mean,
                row.train_time_s
            ),
            None => println!(
                "{} {} tx={} ty={} seed={} {}",
                row.environment,
                row.series(),
                row.descriptor.input_len,
                row.descriptor.output_len,
                row.seed,
                row.status()
            ),
        }
    }
    let paths = emit_report(rows, out, name, axis)?;
    println!("results: {}", paths.main.display());
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", rows.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_config(&c)?;
            let trace = load_source(&cfg)?;
            ensure_dir(&c.out)?;
            let path = c.out.join("trace.csv");
            write_trace_csv(&trace, &path)?;
            println!("{} samples at {} Hz -> {}", trace.len(), trace.sample_rate_hz(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Preprocess(c) => {
            let cfg = load_config(&c)?;
            let prepared = prepare(&cfg)?;
            ensure_dir(&c.out)?;
            let path = c.out.join("small_scale.csv");
            write_trace_csv(&prepared.small_scale, &path)?;
            if let Some(f) = prepared.doppler_hz {
                println!("doppler {f:.4} Hz");
            }
            println!(
                "{} samples at {} Hz -> {}",
                prepared.small_scale.len(),
                prepared.small_scale.sample_rate_hz(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Coherence(c) => {
            let cfg = load_config(&c)?;
            let prepared = prepare(&cfg)?;
            let trace = &prepared.small_scale;
            let table = horizon_table(trace, &DEFAULT_THRESHOLDS, default_max_lag(trace.len()))?;
            ensure_dir(&c.out)?;
            let path = c.out.join("coherence.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            table.write_csv(file).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            for row in &table.rows {
                println!(
                    "threshold {:.1}: {:.3} ms -> {} samples",
                    row.threshold,
                    row.coherence_time_s * 1e3,
                    row.output_length_samples
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let outputs = train_models(&cfg)?;
            ensure_dir(&c.out)?;
            for o in &outputs {
                let path = c.out.join(format!("model_{}_seed{}.txt", o.row.series(), o.row.seed));
                o.model.save(&path)?;
                println!("model: {}", path.display());
            }
            let rows: Vec<ResultRow> = outputs.into_iter().map(|o| o.row).collect();
            report(&rows, &c.out, "train", cfg.sweep.axis)
        }
        Command::Evaluate { common, model } => {
            let cfg = load_config(&common)?;
            let model = Model::load(&model)?;
            let row = evaluate_model(&cfg, &model)?;
            report(&[row], &common.out, "evaluate", cfg.sweep.axis)
        }
        Command::Sweep(c) => {
            let cfg = load_config(&c)?;
            let rows = sweep(&cfg, c.jobs)?;
            report(&rows, &c.out, "sweep", cfg.sweep.axis)
        }
        Command::Profile(c) => {
            let cfg = load_config(&c)?;
            let rows = profile_training(&cfg, c.jobs)?;
            report(&rows, &c.out, "profile", PlotAxis::OutputLen)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
