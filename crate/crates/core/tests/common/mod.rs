#![allow(dead_code)]

use chanpred::nn::{
    gradient_check, Activation, Conv1dParams, DenseParams, GradientCheck, GruParams, Layer, LstmParams, Network,
};
use chanpred::signal::{simulate_clarke_envelope, theoretical_acf_clarke, ClarkeConfig};
use chanpred::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIZES: [usize; 3] = [1, 3, 5];
pub const UNROLLS: [usize; 3] = [1, 3, 6];
pub const GRAD_TOLERANCE: f64 = 1e-4;

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Random biases so relu kinks and zero-bias symmetries do not hide errors.
fn jitter(layer: &mut Layer, rng: &mut ChaCha8Rng) {
    for m in layer.tensors_mut() {
        for v in m.as_mut_slice() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
}

/// Max relative gradient error for every layer kind over the small shape
/// grid. `unroll` is the sequence length for recurrent layers and the
/// signal length for convolutions; dense layers see `unroll` batch rows.
pub fn gradient_grid() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = GradientCheck::default();
    for &inputs in &SIZES {
        for &hidden in &SIZES {
            for &unroll in &UNROLLS {
                let n = 4;
                let mut cases: Vec<(String, Layer, Matrix, usize)> = vec![
                    (
                        "dense-relu".into(),
                        Layer::Dense(DenseParams::glorot(inputs, hidden, Activation::Relu, &mut rng)),
                        uniform(n + unroll, inputs, &mut rng),
                        hidden,
                    ),
                    (
                        "dense".into(),
                        Layer::Dense(DenseParams::glorot(inputs, hidden, Activation::Identity, &mut rng)),
                        uniform(n + unroll, inputs, &mut rng),
                        hidden,
                    ),
                    (
                        "lstm".into(),
                        Layer::Lstm(LstmParams::glorot(inputs, hidden, &mut rng)),
                        uniform(n, inputs * unroll, &mut rng),
                        hidden,
                    ),
                    (
                        "gru".into(),
                        Layer::Gru(GruParams::glorot(inputs, hidden, &mut rng)),
                        uniform(n, inputs * unroll, &mut rng),
                        hidden,
                    ),
                ];
                let ks = unroll.min(3);
                cases.push((
                    "conv1d-relu".into(),
                    Layer::Conv1d(Conv1dParams::glorot(inputs, hidden, ks, Activation::Relu, &mut rng)),
                    uniform(n, inputs * unroll, &mut rng),
                    hidden * (unroll - ks + 1),
                ));
                for (kind, mut layer, x, out_cols) in cases {
                    jitter(&mut layer, &mut rng);
                    let net = Network::new(vec![layer], 0.0).unwrap();
                    let y = uniform(x.rows(), out_cols, &mut rng);
                    let report = gradient_check(&net, &x, &y, &opts).unwrap();
                    out.push((format!("{kind} in={inputs} h={hidden} unroll={unroll}"), report.max_rel_error));
                }
            }
        }
    }

    // Stacked pieces exercise the sequence and flatten adapters.
    let stacks: Vec<(&str, Vec<Layer>, usize)> = vec![
        (
            "gru-gru-dense",
            vec![
                Layer::Gru(GruParams::glorot(1, 3, &mut rng)),
                Layer::Gru(GruParams::glorot(3, 3, &mut rng)),
                Layer::Dense(DenseParams::glorot(3, 2, Activation::Identity, &mut rng)),
            ],
            6,
        ),
        (
            "lstm-lstm-dense",
            vec![
                Layer::Lstm(LstmParams::glorot(1, 3, &mut rng)),
                Layer::Lstm(LstmParams::glorot(3, 3, &mut rng)),
                Layer::Dense(DenseParams::glorot(3, 2, Activation::Identity, &mut rng)),
            ],
            6,
        ),
        (
            "conv-conv-dense-dense",
            vec![
                Layer::Conv1d(Conv1dParams::glorot(1, 3, 2, Activation::Relu, &mut rng)),
                Layer::Conv1d(Conv1dParams::glorot(3, 2, 2, Activation::Relu, &mut rng)),
                Layer::Dense(DenseParams::glorot(8, 2, Activation::Relu, &mut rng)),
                Layer::Dense(DenseParams::glorot(2, 2, Activation::Identity, &mut rng)),
            ],
            6,
        ),
    ];
    for (name, mut layers, len) in stacks {
        for l in &mut layers {
            jitter(l, &mut rng);
        }
        let net = Network::new(layers, 0.0).unwrap();
        let x = uniform(4, len, &mut rng);
        let y = uniform(4, 2, &mut rng);
        let report = gradient_check(&net, &x, &y, &opts).unwrap();
        out.push((name.to_string(), report.max_rel_error));
    }
    out
}

pub struct SimulatorFidelity {
    pub max_acf_error: f64,
    pub lags_checked: usize,
    pub mean_power: f64,
}

/// In-phase correlation of a 10^5-sample Rayleigh trace against J0 up to
/// the first zero, plus its mean power.
pub fn simulator_fidelity(seed: u64) -> SimulatorFidelity {
    let cfg = ClarkeConfig { doppler_hz: 10.0, duration_s: 100.0, sample_rate_hz: 1000.0, seed, ..Default::default() };
    let env = simulate_clarke_envelope(&cfg).unwrap();
    let x = &env.in_phase;
    let n = x.len();
    assert_eq!(n, 100_000);
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    let first_zero_s = 2.404_825_557_695_773 / (2.0 * std::f64::consts::PI * cfg.doppler_hz);
    let max_lag = (first_zero_s * cfg.sample_rate_hz).floor() as usize;
    let mut max_err: f64 = 0.0;
    for lag in 0..=max_lag {
        let r = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0;
        let theory = theoretical_acf_clarke(cfg.doppler_hz, lag as f64 / cfg.sample_rate_hz).unwrap();
        max_err = max_err.max((r - theory).abs());
    }
    let power = env.power();
    SimulatorFidelity {
        max_acf_error: max_err,
        lags_checked: max_lag + 1,
        mean_power: power.iter().sum::<f64>() / power.len() as f64,
    }
}
