//! End-to-end experiments: trace source, preprocessing, split, scaling,
//! windowing, training and evaluation, run once per seed or over a grid.

mod config;
mod report;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

pub use config::{
    parse_override, CsvSource, DopplerSpec, Environment, ExperimentConfig, GridPoint, ModelSpec, PlotAxis,
    PreprocessConfig, SimulationConfig, SourceConfig, SweepGrid, WindowSpec, DEFAULT_CONFIG, ENVIRONMENTS,
    TABLE_INPUT_LENGTHS,
};
pub use report::{
    emit_report, resolve_axis, strip_timing, summarize, write_main_csv, write_per_step_csv, write_plot_csv,
    write_summary_csv, ReportPaths, ResultRow, SummaryRow, MAIN_HEADER, PER_STEP_HEADER, PLOT_HEADER, SUMMARY_HEADER,
    TIMING_COLUMNS,
};

use crate::coherence::{autocorrelation, coherence_time};
use crate::error::{Error, Result, StageExt};
use crate::evaluation::aggregate_report;
use crate::models::{build_model, fit_linear_closed_form, train, Family, Model, ModelDescriptor, TrainConfig};
use crate::preprocess::{downsample_mean, extract_small_scale, fit_minmax, Scaler};
use crate::signal::{
    apply_shadowing, doppler_for_power_coherence, load_trace_csv, simulate_clarke, ClarkeConfig, ShadowConfig,
    SignalTrace,
};
use crate::windowing::{chronological_split, SplitTraces, WindowedDataset};

pub const STAGE_SOURCE: &str = "signal_source";
pub const STAGE_PREPROCESS: &str = "preprocess";
pub const STAGE_WINDOWING: &str = "windowing";
pub const STAGE_MODELS: &str = "models";
pub const STAGE_EVALUATION: &str = "evaluation";

/// Longest simulated stretch used while calibrating the Doppler frequency.
const CALIBRATION_SPAN_S: f64 = 30.0;
const CALIBRATION_STEPS: usize = 12;

/// Simulates a trace with an explicit Doppler frequency, then applies
/// shadowing and measurement noise.
pub fn simulate_source(sim: &SimulationConfig, doppler_hz: f64) -> Result<SignalTrace> {
    let clarke = ClarkeConfig { doppler_hz, ..sim.clarke.clone() };
    let mut trace = simulate_clarke(&clarke)?;
    if sim.shadow_sigma_db > 0.0 {
        trace = apply_shadowing(
            &trace,
            &ShadowConfig {
                sigma_db: sim.shadow_sigma_db,
                correlation_length_samples: sim.shadow_correlation_samples,
                seed: clarke.seed.wrapping_add(1),
            },
        )?;
    }
    if sim.noise_db > 0.0 {
        // White log-normal error, i.e. Gaussian error on the dB reading.
        trace = apply_shadowing(
            &trace,
            &ShadowConfig { sigma_db: sim.noise_db, correlation_length_samples: 1, seed: clarke.seed.wrapping_add(2) },
        )?;
    }
    Ok(trace)
}

/// Downsampling by block means, then division by the local mean.
pub fn preprocess_trace(raw: &SignalTrace, pp: &PreprocessConfig) -> Result<SignalTrace> {
    let down = downsample_mean(raw, pp.downsample)?;
    if pp.local_mean_window == 0 {
        Ok(down)
    } else {
        extract_small_scale(&down, pp.local_mean_window)
    }
}

/// Searches the Doppler frequency at which the preprocessed simulated
/// trace first decorrelates to `threshold` after `coherence_s`.
///
/// Starts from the closed-form value for an unprocessed Rayleigh channel
/// and bisects on a log scale; the simulation seed is held fixed so the
/// result is deterministic.
pub fn calibrate_doppler(
    sim: &SimulationConfig,
    pp: &PreprocessConfig,
    coherence_s: f64,
    threshold: f64,
) -> Result<f64> {
    let guess = doppler_for_power_coherence(coherence_s, threshold)?;
    let mut probe = sim.clone();
    probe.clarke.duration_s = sim.clarke.duration_s.min(CALIBRATION_SPAN_S);
    let measure = |doppler: f64| -> Result<f64> {
        let trace = preprocess_trace(&simulate_source(&probe, doppler)?, pp)?;
        let max_lag = ((8.0 * coherence_s * trace.sample_rate_hz()).ceil() as usize).clamp(4, trace.len() / 2);
        match coherence_time(&autocorrelation(&trace, max_lag)?, threshold) {
            Ok(t) => Ok(t),
            Err(Error::NoCrossing { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    // Very low Doppler pushes the fading into the local mean, where it is
    // removed, so coherence is not monotone over the whole range. Step
    // outwards from the guess to bracket the crossing nearest to it.
    let limit = sim.clarke.sample_rate_hz / 2.0 * 0.99;
    let (mut lo, mut hi) = (guess.min(limit), guess.min(limit));
    if measure(lo)? >= coherence_s {
        for _ in 0..=CALIBRATION_STEPS {
            if hi >= limit {
                return Err(Error::Config(format!("cannot reach a {coherence_s} s coherence time below Nyquist")));
            }
            hi = (hi * 1.25).min(limit);
            if measure(hi)? < coherence_s {
                break;
            }
            lo = hi;
        }
    } else {
        for step in 0..=CALIBRATION_STEPS {
            if step == CALIBRATION_STEPS {
                return Err(Error::Config(format!("cannot reach a {coherence_s} s coherence time near {guess:.3} Hz")));
            }
            lo /= 1.25;
            if measure(lo)? >= coherence_s {
                break;
            }
            hi = lo;
        }
    }
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if measure(mid)? > coherence_s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-6 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Doppler frequency the configured simulation will use.
pub fn resolve_doppler(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    match &cfg.source {
        SourceConfig::Csv(_) => Ok(None),
        SourceConfig::Simulate(sim) => match sim.doppler {
            DopplerSpec::Fixed(f) => Ok(Some(f)),
            DopplerSpec::Calibrated { coherence_s, threshold } => {
                calibrate_doppler(sim, &cfg.preprocess, coherence_s, threshold).map(Some)
            }
        },
    }
}

/// The unprocessed trace, simulated or read from file.
pub fn load_source(cfg: &ExperimentConfig) -> Result<SignalTrace> {
    load_source_with(cfg, None)
}

fn load_source_with(cfg: &ExperimentConfig, doppler: Option<f64>) -> Result<SignalTrace> {
    let out = match &cfg.source {
        SourceConfig::Csv(c) => load_trace_csv(&c.path, &c.column, c.sample_rate_hz, c.unit),
        SourceConfig::Simulate(sim) => {
            let doppler = match doppler {
                Some(d) => d,
                None => resolve_doppler(cfg)?.expect("simulated source has a Doppler frequency"),
            };
            simulate_source(sim, doppler)
        }
    };
    out.stage(STAGE_SOURCE)
}

/// Preprocessed trace split chronologically, with a scaler fitted on the
/// training segment only.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub environment: String,
    pub doppler_hz: Option<f64>,
    pub small_scale: SignalTrace,
    /// Unscaled segments.
    pub splits: SplitTraces,
    pub scaler: Scaler,
    pub scaled: SplitTraces,
}

impl PreparedData {
    pub fn scale_with(&self, scaler: &Scaler) -> Result<SplitTraces> {
        self.splits.map(|t| SignalTrace::new(scaler.apply_slice(t.samples()).values, t.sample_rate_hz(), t.label.clone()))
    }

    /// Scaled windows; test windows are shifted by `test_stride` or, by
    /// default, by the output length.
    pub fn dataset(&self, input_len: usize, output_len: usize, test_stride: Option<usize>) -> Result<WindowedDataset> {
        WindowedDataset::from_splits(&self.scaled, input_len, output_len, test_stride.unwrap_or(output_len))
            .stage(STAGE_WINDOWING)
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let doppler_hz = resolve_doppler(cfg).stage(STAGE_SOURCE)?;
    let raw = load_source_with(cfg, doppler_hz)?;
    let small_scale = preprocess_trace(&raw, &cfg.preprocess).stage(STAGE_PREPROCESS)?;
    let splits = chronological_split(&small_scale, cfg.window.fractions).stage(STAGE_WINDOWING)?;
    let scaler =
        fit_minmax(splits.train.samples(), cfg.preprocess.scale_min, cfg.preprocess.scale_max).stage(STAGE_PREPROCESS)?;
    let mut prepared = PreparedData {
        environment: cfg.environment.clone(),
        doppler_hz,
        small_scale,
        scaled: splits.clone(),
        splits,
        scaler,
    };
    prepared.scaled = prepared.scale_with(&scaler).stage(STAGE_PREPROCESS)?;
    Ok(prepared)
}

/// A trained model and its result row.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub model: Model,
}

fn fit(cfg: &ExperimentConfig, descriptor: &ModelDescriptor, data: &WindowedDataset, seed: u64) -> Result<(Model, f64, usize, usize)> {
    let start = Instant::now();
    if descriptor.family == Family::Linear && cfg.closed_form_linear {
        let model = fit_linear_closed_form(data)?;
        return Ok((model, start.elapsed().as_secs_f64(), 0, 0));
    }
    let initial = build_model(descriptor, seed)?;
    let (model, report) = train(&initial, data, &TrainConfig { seed, ..cfg.train })?;
    Ok((model, report.wall_time_s, report.stopped_epoch, report.best_epoch))
}

/// Trains and evaluates one grid point with one seed.
pub fn run_point(prepared: &PreparedData, cfg: &ExperimentConfig, point: &GridPoint, seed: u64) -> Result<RunOutput> {
    let descriptor = cfg.model.descriptor(point.family, point.layers, point.input_len, point.output_len);
    descriptor.validate().stage(STAGE_MODELS)?;
    let data = prepared.dataset(point.input_len, point.output_len, cfg.window.test_stride)?;
    let (mut model, train_time_s, stopped_epoch, best_epoch) = fit(cfg, &descriptor, &data, seed).stage(STAGE_MODELS)?;
    model.scaler = Some(prepared.scaler);
    let report = evaluate_on(&model, &data, seed, train_time_s).stage(STAGE_EVALUATION)?;
    Ok(RunOutput {
        row: ResultRow {
            environment: prepared.environment.clone(),
            descriptor,
            seed,
            outcome: Ok(report),
            train_time_s,
            stopped_epoch,
            best_epoch,
        },
        model,
    })
}

fn evaluate_on(model: &Model, data: &WindowedDataset, seed: u64, train_time_s: f64) -> Result<crate::evaluation::EvalReport> {
    let (x, y) = data.split_matrices(crate::windowing::Split::Test);
    let pred = model.predict(&x)?;
    aggregate_report(&pred, &y, &model.descriptor, seed, train_time_s)
}

/// Runs the single configured point once per seed, keeping the models.
pub fn train_models(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    let prepared = prepare(cfg)?;
    let point = cfg.single_point();
    cfg.seeds().into_iter().map(|seed| run_point(&prepared, cfg, &point, seed)).collect()
}

/// One result row per seed for the single configured point.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(train_models(cfg)?.into_iter().map(|r| r.row).collect())
}

/// Evaluates a saved model on the configured test split. The model's own
/// scaler is used when it carries one.
pub fn evaluate_model(cfg: &ExperimentConfig, model: &Model) -> Result<ResultRow> {
    let prepared = prepare(cfg)?;
    let d = model.descriptor;
    let mut scaled = prepared.clone();
    if let Some(s) = &model.scaler {
        scaled.scaled = prepared.scale_with(s).stage(STAGE_PREPROCESS)?;
    }
    let data = scaled.dataset(d.input_len, d.output_len, cfg.window.test_stride)?;
    let report = evaluate_on(model, &data, cfg.seed, 0.0).stage(STAGE_EVALUATION)?;
    Ok(ResultRow {
        environment: prepared.environment,
        descriptor: d,
        seed: cfg.seed,
        outcome: Ok(report),
        train_time_s: 0.0,
        stopped_epoch: 0,
        best_epoch: 0,
    })
}

/// Runs every grid point with every seed on one prepared trace. Failing
/// points become failed rows and the sweep continues. Rows come back in
/// grid order regardless of `jobs`.
pub fn sweep_grid(cfg: &ExperimentConfig, grid: &SweepGrid, jobs: usize) -> Result<Vec<ResultRow>> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let prepared = prepare(cfg)?;
    let tasks: Vec<(GridPoint, u64)> =
        points.iter().flat_map(|p| cfg.seeds().into_iter().map(move |s| (*p, s))).collect();
    let run = |(point, seed): &(GridPoint, u64)| match run_point(&prepared, cfg, point, *seed) {
        Ok(out) => out.row,
        Err(e) => {
            let d = cfg.model.descriptor(point.family, point.layers, point.input_len, point.output_len);
            ResultRow::failed(&prepared.environment, d, *seed, &e)
        }
    };

    let jobs = jobs.clamp(1, tasks.len());
    if jobs == 1 {
        return Ok(tasks.iter().map(run).collect());
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut rows: Vec<Option<ResultRow>> = vec![None; tasks.len()];
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, tasks, run) = (&next, &tasks, &run);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                if tx.send((i, run(&tasks[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, row) in rx {
            rows[i] = Some(row);
        }
    });
    Ok(rows.into_iter().map(|r| r.expect("every task reports")).collect())
}

/// [`sweep_grid`] over the configured `[sweep]` grid.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    sweep_grid(cfg, &cfg.sweep, jobs)
}

/// Training time of the recurrent families at the configured input length
/// for every output length of the sweep grid. Run with one job for
/// undisturbed timings.
pub fn profile_training(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    let grid = SweepGrid {
        families: vec![Family::Lstm, Family::Gru],
        layers: cfg.sweep.layers.clone(),
        input_lens: vec![cfg.window.input_len],
        output_lens: cfg.sweep.output_lens.clone(),
        axis: PlotAxis::OutputLen,
    };
    sweep_grid(cfg, &grid, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(extra: &[(&str, &str)]) -> ExperimentConfig {
        let mut o: Vec<(String, String)> = [
            ("signal.duration_s", "3"),
            ("signal.doppler_hz", "10"),
            ("train.epochs", "2"),
            ("model.hidden_units", "4"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        o.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        ExperimentConfig::from_ini_str("", &o).unwrap()
    }

    #[test]
    fn default_config_text_matches_default() {
        let d = ExperimentConfig::default();
        assert_eq!(d, ExperimentConfig::from_ini_str("", &[]).unwrap());
        assert_eq!(d.window.output_len, 11);
        assert_eq!(d.train, TrainConfig::default());
        assert!(matches!(&d.source, SourceConfig::Simulate(s) if s.doppler == DopplerSpec::Calibrated { coherence_s: 0.011, threshold: 0.5 }));
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::from_ini_str("[model]\nfamliy = gru\n", &[]).is_err());
        assert!(ExperimentConfig::from_ini_str("stray = 1\n", &[]).is_err());
        assert!(ExperimentConfig::from_ini_str("[experiment]\nenvironment = lab\n", &[]).is_err());
        assert!(ExperimentConfig::from_ini_str("[signal]\nsource = csv\n", &[]).is_err());
        assert!(ExperimentConfig::from_ini_str("[train]\ndropout = 1.5\n", &[]).is_err());
        assert!(parse_override("model.family").is_err());
        assert!(parse_override("family=gru").is_err());
    }

    #[test]
    fn overrides_and_table_lists() {
        let cfg = ExperimentConfig::from_ini_str(
            "[sweep]\ninput_lens = table\noutput_lens = table\nfamilies = linear, gru\n",
            &[parse_override("experiment.environment=outdoor-los").unwrap()],
        )
        .unwrap();
        assert_eq!(cfg.sweep.input_lens, TABLE_INPUT_LENGTHS.to_vec());
        assert_eq!(cfg.sweep.output_lens, vec![5, 10, 14, 19, 23]);
        assert_eq!(cfg.window.output_len, 14);
        assert_eq!(cfg.sweep.families, vec![Family::Linear, Family::Gru]);
    }

    #[test]
    fn grid_skips_stacked_linear() {
        let grid = SweepGrid {
            families: vec![Family::Linear, Family::Gru],
            layers: vec![1, 2],
            input_lens: vec![5, 10],
            output_lens: vec![3],
            axis: PlotAxis::Auto,
        };
        assert_eq!(grid.points().len(), 2 + 4);
    }

    #[test]
    fn missing_csv_is_tagged_with_source_stage() {
        let cfg = ExperimentConfig::from_ini_str("[signal]\nsource = csv\npath = /nonexistent/trace.csv\n", &[]).unwrap();
        let err = run_experiment(&cfg).unwrap_err();
        assert_eq!(err.stage(), Some(STAGE_SOURCE));
        assert!(err.to_string().starts_with("signal_source: "));
    }

    #[test]
    fn sweep_isolates_failures_and_keeps_order() {
        let cfg = small(&[("sweep.families", "linear,cnn1d"), ("sweep.input_lens", "3,8"), ("sweep.output_lens", "2")]);
        let rows = sweep(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 4);
        let order: Vec<(Family, usize)> = rows.iter().map(|r| (r.descriptor.family, r.descriptor.input_len)).collect();
        assert_eq!(order, vec![(Family::Linear, 3), (Family::Linear, 8), (Family::Cnn1d, 3), (Family::Cnn1d, 8)]);
        assert!(rows[0].is_ok() && rows[1].is_ok() && rows[3].is_ok());
        assert!(rows[2].status().starts_with("failed: models: "));
        let csv = |rows: &[ResultRow]| {
            let mut buf = Vec::new();
            write_main_csv(rows, &mut buf).unwrap();
            strip_timing(&String::from_utf8(buf).unwrap()).unwrap()
        };
        assert_eq!(csv(&rows), csv(&sweep(&cfg, 1).unwrap()));
    }

    #[test]
    fn empty_grid_is_an_error() {
        let cfg = small(&[("sweep.families", ",")]);
        assert!(matches!(sweep(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn calibration_hits_target_coherence() {
        let cfg = small(&[]);
        let SourceConfig::Simulate(sim) = &cfg.source else { panic!() };
        let mut sim = sim.clone();
        sim.clarke.duration_s = 20.0;
        let f = calibrate_doppler(&sim, &cfg.preprocess, 0.011, 0.5).unwrap();
        let trace = preprocess_trace(&simulate_source(&sim, f).unwrap(), &cfg.preprocess).unwrap();
        let t = coherence_time(&autocorrelation(&trace, 200).unwrap(), 0.5).unwrap();
        assert!((t - 0.011).abs() < 1e-4, "{t}");
        // Preprocessing shortens coherence, so the simulator needs a lower
        // Doppler than the closed form suggests.
        assert!(f < doppler_for_power_coherence(0.011, 0.5).unwrap());
    }
}
