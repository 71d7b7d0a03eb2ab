//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any failed or overran its time budget.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use chanpred::coherence::output_length_for;
use chanpred::experiment::{
    emit_report, prepare, run_point, strip_timing, sweep_grid, ExperimentConfig, GridPoint, PlotAxis, PreparedData,
    SweepGrid, ENVIRONMENTS,
};
use chanpred::models::{build_model, train_with_validator, Family, ModelDescriptor, TrainConfig};
use chanpred::preprocess::{downsample_mean, extract_small_scale, fit_minmax};
use chanpred::signal::SignalTrace;
use chanpred::windowing::{batches, chronological_split, BatchPlan, Split, WindowedDataset};
use chanpred::Matrix;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Calibrated 11 ms indoor trace with 2 dB measurement noise, shortened to
/// 12 s, trained on the reduced budget.
fn synthetic_config() -> ExperimentConfig {
    let overrides: Vec<(String, String)> = [
        ("experiment.environment", "indoor-los"),
        ("signal.coherence_ms", "11"),
        ("signal.calibration_threshold", "0.5"),
        ("signal.noise_db", "2"),
        ("signal.duration_s", "12"),
        ("train.epochs", "40"),
        ("train.patience", "10"),
        ("experiment.repeats", "3"),
        ("model.hidden_units", "25"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    ExperimentConfig::load(None, &overrides).expect("acceptance config")
}

/// Trained results on the shared trace, with the wall time each cost.
struct Runs {
    cfg: ExperimentConfig,
    prepared: PreparedData,
    prepare_s: f64,
    cache: HashMap<(Family, usize, usize), (Vec<f64>, f64)>,
}

impl Runs {
    fn new() -> Result<Self, String> {
        let start = Instant::now();
        let cfg = synthetic_config();
        let prepared = prepare(&cfg).map_err(|e| e.to_string())?;
        Ok(Self { cfg, prepared, prepare_s: start.elapsed().as_secs_f64(), cache: HashMap::new() })
    }

    /// Test RMSE per seed and the seconds spent, training on first use.
    fn rmse(&mut self, family: Family, input_len: usize, output_len: usize) -> Result<(Vec<f64>, f64), String> {
        if let Some(hit) = self.cache.get(&(family, input_len, output_len)) {
            return Ok(hit.clone());
        }
        let start = Instant::now();
        let point = GridPoint { family, layers: 1, input_len, output_len };
        let mut values = Vec::new();
        for seed in self.cfg.seeds() {
            let out = run_point(&self.prepared, &self.cfg, &point, seed).map_err(|e| e.to_string())?;
            values.push(out.row.rmse_mean().ok_or("run failed")?);
        }
        let hit = (values, start.elapsed().as_secs_f64());
        self.cache.insert((family, input_len, output_len), hit.clone());
        Ok(hit)
    }
}

fn criterion_1() -> Check {
    // Published coherence times (ms) per environment and threshold, with
    // the horizons they imply at 1 kHz.
    let published: [(&str, [f64; 5], [usize; 5]); 4] = [
        ("indoor-los", [17.0, 14.0, 11.0, 8.0, 4.0], [17, 14, 11, 8, 4]),
        ("indoor-nlos", [18.0, 15.0, 12.0, 8.0, 4.0], [18, 15, 12, 8, 4]),
        ("outdoor-los", [23.0, 19.0, 14.0, 10.0, 5.0], [23, 19, 14, 10, 5]),
        ("outdoor-nlos", [16.0, 14.0, 11.0, 8.0, 4.0], [16, 14, 11, 8, 4]),
    ];
    let mut matched = 0;
    for (name, times_ms, lengths) in published {
        for (t, want) in times_ms.iter().zip(lengths) {
            let got = output_length_for(t / 1e3, 1000.0);
            ensure(got == want, format!("{name} {t} ms -> {got}, want {want}"))?;
            matched += 1;
        }
        let env = ENVIRONMENTS.iter().find(|e| e.name == name).ok_or(format!("no preset {name}"))?;
        let mut want: Vec<usize> = lengths.to_vec();
        want.sort_unstable();
        ensure(env.horizons(1000.0) == want, format!("{name} preset horizons {:?}", env.horizons(1000.0)))?;
    }
    Ok(format!("{matched}/20 output lengths"))
}

fn criterion_2() -> Check {
    let results = common::gradient_grid();
    let (worst_name, worst) = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, e)| (n.clone(), *e))
        .ok_or("empty grid")?;
    ensure(results.iter().all(|(_, e)| *e < common::GRAD_TOLERANCE), format!("{worst_name}: {worst:.3e}"))?;
    Ok(format!("{} checks, max rel error {worst:.2e} ({worst_name})", results.len()))
}

fn criterion_3() -> Check {
    let f = common::simulator_fidelity(7);
    ensure(f.max_acf_error < 0.05, format!("ACF error {:.4}", f.max_acf_error))?;
    ensure((0.95..=1.05).contains(&f.mean_power), format!("mean power {:.4}", f.mean_power))?;
    Ok(format!("max ACF error {:.4} over {} lags, mean power {:.4}", f.max_acf_error, f.lags_checked, f.mean_power))
}

fn criterion_4(runs: &mut Runs) -> Result<(String, f64), String> {
    let (lin, t_lin) = runs.rmse(Family::Linear, 25, 11)?;
    let (gru, t_gru) = runs.rmse(Family::Gru, 25, 11)?;
    let (lstm, t_lstm) = runs.rmse(Family::Lstm, 25, 11)?;
    let (l, g, s) = (median(lin), median(gru), median(lstm));
    let detail = format!(
        "doppler {:.3} Hz, median RMSE linear {l:.5} gru {g:.5} lstm {s:.5}",
        runs.prepared.doppler_hz.unwrap_or(f64::NAN)
    );
    ensure(g <= l && s <= l, detail.clone())?;
    Ok((detail, runs.prepare_s + t_lin + t_gru + t_lstm))
}

fn criterion_5(runs: &mut Runs) -> Result<(String, f64), String> {
    let (short, t_short) = runs.rmse(Family::Gru, 25, 11)?;
    let (long, t_long) = runs.rmse(Family::Gru, 100, 11)?;
    let ratio = median(short) / median(long);
    let detail = format!("gru median RMSE ratio T_x 25 / 100 = {ratio:.4}");
    ensure(ratio <= 1.10, detail.clone())?;
    Ok((detail, t_short + t_long))
}

fn criterion_6(runs: &mut Runs) -> Result<(String, f64), String> {
    let mut parts = Vec::new();
    let mut failed = false;
    let mut spent = 0.0;
    for family in [Family::Linear, Family::Gru, Family::Lstm] {
        let (near, t4) = runs.rmse(family, 25, 4)?;
        let (far, t17) = runs.rmse(family, 25, 17)?;
        spent += t4 + t17;
        let (a, b) = (median(near), median(far));
        failed |= b < a;
        parts.push(format!("{family} {a:.5} -> {b:.5}"));
    }
    let detail = format!("median RMSE T_y 4 -> 17: {}", parts.join(", "));
    ensure(!failed, detail.clone())?;
    Ok((detail, spent))
}

fn criterion_7() -> Check {
    let values: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.731).sin() * 37.5 - 12.0).collect();
    let scaler = fit_minmax(&values, -1.0, 1.0).map_err(|e| e.to_string())?;
    let back = scaler.invert_slice(&scaler.apply_slice(&values).values);
    let err = values.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-12, format!("round trip error {err:e}"))?;

    let ramp = SignalTrace::new((1..=10).map(f64::from).collect(), 1000.0, "ramp").map_err(|e| e.to_string())?;
    let down = downsample_mean(&ramp, 10).map_err(|e| e.to_string())?;
    ensure(down.samples() == [5.5], format!("downsample {:?}", down.samples()))?;

    let flat = SignalTrace::new(vec![3.7; 500], 1000.0, "flat").map_err(|e| e.to_string())?;
    let small = extract_small_scale(&flat, 50).map_err(|e| e.to_string())?;
    ensure(small.samples().iter().all(|&v| v == 1.0), "small scale of a constant is not all ones")?;
    Ok(format!("round trip error {err:.1e}, [1..10] -> [5.5], constant -> ones"))
}

fn criterion_8() -> Check {
    let n = 300;
    let xs: Vec<f64> = (0..n * 4).map(|i| (i as f64 * 0.17).sin()).collect();
    let ys: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).cos()).collect();
    let data = WindowedDataset {
        inputs: Matrix::from_vec(n, 4, xs).map_err(|e| e.to_string())?,
        targets: Matrix::from_vec(n, 1, ys).map_err(|e| e.to_string())?,
        splits: (0..n).map(|i| if i < 200 { Split::Train } else { Split::Validation }).collect(),
        input_len: 4,
        output_len: 1,
    };
    let model = build_model(&ModelDescriptor::new(Family::Linear, 1, 4, 1), 0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: 150, patience: 15, ..Default::default() };
    let (_, report) =
        train_with_validator(&model, &data, &cfg, |_, epoch| Ok(epoch as f64)).map_err(|e| e.to_string())?;
    ensure(report.stopped_epoch == 16 && report.best_epoch == 1, format!("stopped at {}", report.stopped_epoch))?;

    let trace = SignalTrace::new(vec![1.0; 62_300], 1000.0, "flat").map_err(|e| e.to_string())?;
    let s = chronological_split(&trace, (0.7, 0.2, 0.1)).map_err(|e| e.to_string())?;
    let lens = [s.train.len(), s.validation.len(), s.test.len()];
    ensure(lens == [43_610, 12_460, 6_230], format!("split {lens:?}"))?;

    let hundred = WindowedDataset {
        inputs: Matrix::zeros(100, 2),
        targets: Matrix::zeros(100, 1),
        splits: vec![Split::Train; 100],
        input_len: 2,
        output_len: 1,
    };
    let plan = BatchPlan { batch_size: 32, ..Default::default() };
    let sizes: Vec<usize> =
        batches(&hundred, Split::Train, &plan, 0).map_err(|e| e.to_string())?.iter().map(|b| b.inputs.rows()).collect();
    ensure(sizes == [32, 32, 32, 4], format!("batches {sizes:?}"))?;
    Ok("stop at epoch 16, split 43610/12460/6230, batches 32/32/32/4".into())
}

fn criterion_9() -> Check {
    let mut cfg = synthetic_config();
    cfg.train.epochs = 4;
    cfg.repeats = 2;
    let grid = SweepGrid {
        families: vec![Family::Linear, Family::Gru, Family::Lstm],
        layers: vec![1],
        input_lens: vec![25],
        output_lens: vec![4, 11],
        axis: PlotAxis::OutputLen,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (run, jobs) in [(0, 1), (1, 2)] {
        let rows = sweep_grid(&cfg, &grid, jobs).map_err(|e| e.to_string())?;
        ensure(rows.iter().all(|r| r.is_ok()), "a sweep row failed")?;
        let paths =
            emit_report(&rows, &dir.path().join(format!("run{run}")), "sweep", grid.axis).map_err(|e| e.to_string())?;
        let read = |p: &std::path::Path| std::fs::read_to_string(p).map_err(|e| e.to_string());
        let main = strip_timing(&read(&paths.main)?).map_err(|e| e.to_string())?;
        outputs.push((rows.len(), main, read(&paths.per_step)?, read(&paths.plot)?));
    }
    ensure(outputs[0] == outputs[1], "sweep outputs differ between runs")?;
    Ok(format!("{} rows, main/per-step/plot CSVs identical (1 and 2 jobs)", outputs[0].0))
}

struct Line {
    id: usize,
    name: &'static str,
    budget_s: f64,
}

fn report(line: &Line, outcome: Result<String, String>, elapsed_s: f64) -> bool {
    let over = elapsed_s > line.budget_s;
    let ok = outcome.is_ok() && !over;
    let detail = match outcome {
        Ok(d) if over => format!("{d}; over the {:.0} s budget", line.budget_s),
        Ok(d) => d,
        Err(e) => e,
    };
    println!(
        "{} criterion {} {} ({:.2} s): {}",
        if ok { "PASS" } else { "FAIL" },
        line.id,
        line.name,
        elapsed_s,
        detail
    );
    ok
}

fn timed(f: impl FnOnce() -> Check) -> (Check, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut all = true;
    let quick: [(Line, fn() -> Check); 3] = [
        (Line { id: 1, name: "horizon table mapping", budget_s: 1.0 }, criterion_1),
        (Line { id: 2, name: "gradient correctness", budget_s: 60.0 }, criterion_2),
        (Line { id: 3, name: "simulator fidelity", budget_s: 30.0 }, criterion_3),
    ];
    for (line, f) in quick {
        let (out, t) = timed(f);
        all &= report(&line, out, t);
    }

    let trained: [(Line, fn(&mut Runs) -> Result<(String, f64), String>); 3] = [
        (Line { id: 4, name: "recurrent models beat linear", budget_s: 600.0 }, criterion_4),
        (Line { id: 5, name: "input length saturation", budget_s: 600.0 }, criterion_5),
        (Line { id: 6, name: "errors grow with horizon", budget_s: 900.0 }, criterion_6),
    ];
    match Runs::new() {
        Ok(mut runs) => {
            for (line, f) in trained {
                // Charged time includes cached training reused from earlier criteria.
                let (out, spent) = match f(&mut runs) {
                    Ok((d, s)) => (Ok(d), s),
                    Err(e) => (Err(e), 0.0),
                };
                all &= report(&line, out, spent);
            }
        }
        Err(e) => {
            for (line, _) in trained {
                all &= report(&line, Err(format!("preparing trace: {e}")), 0.0);
            }
        }
    }

    let rest: [(Line, fn() -> Check); 3] = [
        (Line { id: 7, name: "preprocessing exactness", budget_s: 1.0 }, criterion_7),
        (Line { id: 8, name: "protocol mechanics", budget_s: 1.0 }, criterion_8),
        (Line { id: 9, name: "sweep determinism", budget_s: 300.0 }, criterion_9),
    ];
    for (line, f) in rest {
        let (out, t) = timed(f);
        all &= report(&line, out, t);
    }

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
