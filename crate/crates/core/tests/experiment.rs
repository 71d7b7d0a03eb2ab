use std::collections::HashSet;

use chanpred::experiment::{
    emit_report, run_experiment, strip_timing, sweep, write_main_csv, ExperimentConfig, PlotAxis, MAIN_HEADER,
    PER_STEP_HEADER, PLOT_HEADER, SUMMARY_HEADER, TABLE_INPUT_LENGTHS,
};

fn config(extra: &[(&str, &str)]) -> ExperimentConfig {
    let base = [
        ("signal.doppler_hz", "10"),
        ("signal.duration_s", "2"),
        ("train.epochs", "2"),
        ("train.patience", "2"),
        ("model.hidden_units", "4"),
        ("model.num_kernels", "3"),
        ("model.kernel_size", "1"),
    ];
    let overrides: Vec<(String, String)> =
        base.iter().chain(extra).map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::load(None, &overrides).unwrap()
}

fn main_csv(rows: &[chanpred::experiment::ResultRow]) -> String {
    let mut buf = Vec::new();
    write_main_csv(rows, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn single_gru_run_gives_one_finite_row() {
    let cfg = config(&[("window.output_len", "11")]);
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    let r = rows[0].report().unwrap();
    assert!(r.rmse_mean.is_finite() && r.mae_mean.is_finite());
    assert_eq!(r.rmse_per_step.len(), 11);
    assert_eq!(rows[0].descriptor.input_len, 25);

    let again = run_experiment(&cfg).unwrap();
    assert_eq!(strip_timing(&main_csv(&rows)).unwrap(), strip_timing(&main_csv(&again)).unwrap());
}

#[test]
fn table_input_length_sweep_emits_consistent_reports() {
    let cfg = config(&[
        ("sweep.families", "linear,ffn,lstm,gru,cnn1d"),
        ("sweep.layers", "1"),
        ("sweep.input_lens", "table"),
        ("sweep.output_lens", "4"),
        ("train.epochs", "1"),
    ]);
    let rows = sweep(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.is_ok()), "{:?}", rows.iter().map(|r| r.status()).collect::<Vec<_>>());
    let grid: HashSet<usize> = TABLE_INPUT_LENGTHS.into_iter().collect();
    assert!(rows.iter().all(|r| grid.contains(&r.descriptor.input_len) && r.descriptor.output_len == 4));

    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&rows, dir.path(), "sweep", PlotAxis::Auto).unwrap();
    let read = |p: &std::path::Path| std::fs::read_to_string(p).unwrap();
    let lines = |p: &std::path::Path| read(p).lines().count() - 1;
    assert_eq!(lines(&paths.main), 60);
    assert_eq!(lines(&paths.per_step), 60 * 4);
    assert_eq!(lines(&paths.plot), 60);
    assert_eq!(lines(&paths.summary), 60);

    let header = |p: &std::path::Path| read(p).lines().next().unwrap().to_string();
    assert_eq!(header(&paths.main), MAIN_HEADER.join(","));
    assert_eq!(header(&paths.per_step), PER_STEP_HEADER.join(","));
    assert_eq!(header(&paths.plot), PLOT_HEADER.join(","));
    assert_eq!(header(&paths.summary), SUMMARY_HEADER.join(","));
    assert!(read(&paths.plot).lines().skip(1).all(|l| l.starts_with("input_len,")));

    let first: Vec<String> = [&paths.main, &paths.per_step, &paths.plot, &paths.summary].iter().map(|p| read(p)).collect();
    let again = emit_report(&rows, dir.path(), "sweep", PlotAxis::Auto).unwrap();
    let second: Vec<String> = [&again.main, &again.per_step, &again.plot, &again.summary].iter().map(|p| read(p)).collect();
    assert_eq!(first, second);
}

#[test]
fn horizon_sweep_uses_environment_output_lengths() {
    let cfg = config(&[
        ("sweep.families", "linear"),
        ("sweep.input_lens", "25"),
        ("sweep.output_lens", "table"),
        ("experiment.repeats", "2"),
    ]);
    let rows = sweep(&cfg, 2).unwrap();
    let lens: Vec<usize> = rows.iter().map(|r| r.descriptor.output_len).collect();
    assert_eq!(lens, vec![4, 4, 8, 8, 11, 11, 14, 14, 17, 17]);
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
}
