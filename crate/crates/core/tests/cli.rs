use std::path::Path;
use std::process::{Command, Output};

use chanpred::experiment::MAIN_HEADER;

const SMALL: [&str; 8] = [
    "--set",
    "signal.doppler_hz=10",
    "--set",
    "signal.duration_s=2",
    "--set",
    "train.epochs=1",
    "--set",
    "model.hidden_units=3",
];

fn chanpred(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanpred"))
        .args(args)
        .args(SMALL)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn simulate_preprocess_and_coherence_write_traces() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file, header) in [
        ("simulate", "trace.csv", "index,time_s,value"),
        ("preprocess", "small_scale.csv", "index,time_s,value"),
        ("coherence", "coherence.csv", "threshold,coherence_ms,output_samples,max_lag"),
    ] {
        let out = chanpred(&[cmd], dir.path());
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(first_line(&dir.path().join(file)), header);
    }
    let raw = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(raw.lines().count(), 20_001);
    let small = std::fs::read_to_string(dir.path().join("small_scale.csv")).unwrap();
    assert_eq!(small.lines().count(), 2_001);
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanpred(&["train", "--seed", "3", "--set", "window.output_len=4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let model = dir.path().join("model_gru_seed3.txt");
    assert!(model.exists());
    assert_eq!(first_line(&dir.path().join("train.csv")), MAIN_HEADER.join(","));

    let eval = chanpred(&["evaluate", "--model", model.to_str().unwrap()], dir.path());
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    // Same scaler, same test windows, so the same errors as after training.
    let rmse = |name: &str| -> String {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines().nth(1).unwrap().split(',').nth(10).unwrap().to_string()
    };
    assert_eq!(rmse("train.csv"), rmse("evaluate.csv"));
}

#[test]
fn sweep_with_failing_point_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanpred(
        &[
            "sweep",
            "--jobs",
            "2",
            "--set",
            "sweep.families=linear,cnn1d",
            "--set",
            "sweep.input_lens=3,6",
            "--set",
            "sweep.output_lens=2",
            "--set",
            "model.num_kernels=2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let main = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(main.lines().next().unwrap(), MAIN_HEADER.join(","));
    assert_eq!(main.lines().count(), 5);
    assert_eq!(main.lines().filter(|l| l.contains("failed: models:")).count(), 1);
    for f in ["sweep_per_step.csv", "sweep_plot.csv", "sweep_summary.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn profile_records_positive_times_for_both_recurrent_families() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanpred(&["profile", "--set", "sweep.output_lens=4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let main = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let rows: Vec<Vec<&str>> = main.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][1], rows[1][1]), ("lstm", "gru"));
    assert!(rows.iter().all(|r| r[12].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = chanpred(&["simulate", "--set", "signal.bogus=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "[model]\nfamily = transformer\n").unwrap();
    let out = chanpred(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = chanpred(&["simulate", "--set", "signal.source=csv", "--set", "signal.path=/nonexistent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("signal_source"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    std::fs::write(&cfg, "[model]\nfamily = lstm\n[window]\noutput_len = 3\n").unwrap();
    let out = chanpred(&["train", "--config", cfg.to_str().unwrap(), "--set", "model.family=linear"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model_linear_seed0.txt").exists());
    let row = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(row.lines().nth(1).unwrap().split(',').nth(7), Some("3"));
}
