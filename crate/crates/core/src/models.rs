//! The five predictor families, the closed-form linear baseline and the
//! training protocol with early stopping.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, AdamState, Conv1dParams, DenseParams, GruParams, Layer, LstmParams, Mode, Network, ParameterSet};
use crate::preprocess::Scaler;
use crate::windowing::{batches, BatchPlan, Split, WindowedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Linear,
    Ffn,
    Lstm,
    Gru,
    Cnn1d,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Linear, Family::Ffn, Family::Lstm, Family::Gru, Family::Cnn1d];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Ffn => "ffn",
            Family::Lstm => "lstm",
            Family::Gru => "gru",
            Family::Cnn1d => "cnn1d",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Family::Linear),
            "ffn" | "dense" => Ok(Family::Ffn),
            "lstm" => Ok(Family::Lstm),
            "gru" => Ok(Family::Gru),
            "cnn1d" | "cnn" | "1dcnn" => Ok(Family::Cnn1d),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelDescriptor {
    pub family: Family,
    pub layers: usize,
    pub hidden_units: usize,
    pub num_kernels: usize,
    pub kernel_size: usize,
    pub input_len: usize,
    pub output_len: usize,
}

impl ModelDescriptor {
    /// Default sizes: 25 hidden units (5 per layer for a two-layer FFN),
    /// 128 kernels (64 for two convolution layers), kernel size 5.
    pub fn new(family: Family, layers: usize, input_len: usize, output_len: usize) -> Self {
        Self {
            family,
            layers,
            hidden_units: if family == Family::Ffn && layers == 2 { 5 } else { 25 },
            num_kernels: if layers == 2 { 64 } else { 128 },
            kernel_size: 5,
            input_len,
            output_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 || self.output_len == 0 {
            return Err(Error::Config("input_len and output_len must be at least 1".into()));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(Error::Config(format!("layers must be 1 or 2, got {}", self.layers)));
        }
        if self.hidden_units == 0 || self.num_kernels == 0 || self.kernel_size == 0 {
            return Err(Error::Config("hidden_units, num_kernels and kernel_size must be positive".into()));
        }
        if self.family == Family::Cnn1d {
            let needed = self.layers * (self.kernel_size - 1) + 1;
            if self.input_len < needed {
                return Err(Error::Config(format!(
                    "input length {} is too short for {} convolution(s) of size {}",
                    self.input_len, self.layers, self.kernel_size
                )));
            }
        }
        Ok(())
    }

    /// `key=value` pairs, space separated.
    pub fn to_header(&self) -> String {
        format!(
            "family={} layers={} hidden_units={} num_kernels={} kernel_size={} input_len={} output_len={}",
            self.family, self.layers, self.hidden_units, self.num_kernels, self.kernel_size, self.input_len, self.output_len
        )
    }

    pub fn from_header(line: &str) -> Result<Self> {
        let mut d = ModelDescriptor::new(Family::Linear, 1, 0, 0);
        let mut seen_family = false;
        for pair in line.split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| Error::Format(format!("bad descriptor field `{pair}`")))?;
            let num = || v.parse::<usize>().map_err(|_| Error::Format(format!("bad value for `{k}`: `{v}`")));
            match k {
                "family" => {
                    d.family = v.parse()?;
                    seen_family = true;
                }
                "layers" => d.layers = num()?,
                "hidden_units" => d.hidden_units = num()?,
                "num_kernels" => d.num_kernels = num()?,
                "kernel_size" => d.kernel_size = num()?,
                "input_len" => d.input_len = num()?,
                "output_len" => d.output_len = num()?,
                other => return Err(Error::Format(format!("unknown descriptor field `{other}`"))),
            }
        }
        if !seen_family {
            return Err(Error::Format("descriptor has no family".into()));
        }
        d.validate()?;
        Ok(d)
    }
}

/// A network together with the descriptor it was built from and,
/// optionally, the scaler its inputs were normalized with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub descriptor: ModelDescriptor,
    pub network: Network,
    pub scaler: Option<Scaler>,
}

/// Builds a freshly initialized model: Glorot-uniform weights, zero biases.
pub fn build_model(descriptor: &ModelDescriptor, seed: u64) -> Result<Model> {
    descriptor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = descriptor;
    let h = d.hidden_units;
    let mut layers = Vec::new();
    match d.family {
        Family::Linear => {
            layers.push(Layer::Dense(DenseParams::glorot(d.input_len, d.output_len, Activation::Identity, &mut rng)));
        }
        Family::Ffn => {
            layers.push(Layer::Dense(DenseParams::glorot(d.input_len, h, Activation::Relu, &mut rng)));
            if d.layers == 2 {
                layers.push(Layer::Dense(DenseParams::glorot(h, h, Activation::Relu, &mut rng)));
            }
            layers.push(Layer::Dense(DenseParams::glorot(h, d.output_len, Activation::Identity, &mut rng)));
        }
        Family::Lstm => {
            layers.push(Layer::Lstm(LstmParams::glorot(1, h, &mut rng)));
            if d.layers == 2 {
                layers.push(Layer::Lstm(LstmParams::glorot(h, h, &mut rng)));
            }
            layers.push(Layer::Dense(DenseParams::glorot(h, d.output_len, Activation::Identity, &mut rng)));
        }
        Family::Gru => {
            layers.push(Layer::Gru(GruParams::glorot(1, h, &mut rng)));
            if d.layers == 2 {
                layers.push(Layer::Gru(GruParams::glorot(h, h, &mut rng)));
            }
            layers.push(Layer::Dense(DenseParams::glorot(h, d.output_len, Activation::Identity, &mut rng)));
        }
        Family::Cnn1d => {
            let k = d.num_kernels;
            let mut len = d.input_len;
            let mut channels = 1;
            for _ in 0..d.layers {
                layers.push(Layer::Conv1d(Conv1dParams::glorot(channels, k, d.kernel_size, Activation::Relu, &mut rng)));
                len = len - d.kernel_size + 1;
                channels = k;
            }
            let flat = channels * len;
            layers.push(Layer::Dense(DenseParams::glorot(flat, d.output_len, Activation::Relu, &mut rng)));
            layers.push(Layer::Dense(DenseParams::glorot(d.output_len, d.output_len, Activation::Identity, &mut rng)));
        }
    }
    Ok(Model { descriptor: *descriptor, network: Network::new(layers, 0.0)?, scaler: None })
}

impl Model {
    pub fn parameter_count(&self) -> usize {
        self.network.parameter_count()
    }

    /// Emits all `T_y` steps at once for every input row; dropout is off.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        inputs.ensure_shape(inputs.rows(), self.descriptor.input_len, "model input")?;
        let mut out = Matrix::zeros(0, self.descriptor.output_len);
        let mut chunks = Vec::new();
        for start in (0..inputs.rows()).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(inputs.rows());
            let idx: Vec<usize> = (start..end).collect();
            chunks.push(self.network.predict(&inputs.select_rows(&idx))?);
        }
        if !chunks.is_empty() {
            let data: Vec<f64> = chunks.into_iter().flat_map(Matrix::into_vec).collect();
            out = Matrix::from_vec(inputs.rows(), self.descriptor.output_len, data)?;
        }
        Ok(out)
    }

    /// Mean squared error over all entries of one split.
    pub fn split_mse(&self, dataset: &WindowedDataset, split: Split) -> Result<f64> {
        let (x, y) = dataset.split_matrices(split);
        mse(&self.predict(&x)?, &y)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_MAGIC} {MODEL_VERSION}\n{}\n", self.descriptor.to_header());
        if let Some(sc) = &self.scaler {
            s.push_str(&format!("scaler {:?} {:?} {:?} {:?}\n", sc.x_min, sc.x_max, sc.new_min, sc.new_max));
        }
        s.push_str(&self.network.parameter_set().to_text());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        match lines.next() {
            Some((_, l)) if l.trim() == format!("{MODEL_MAGIC} {MODEL_VERSION}") => {}
            _ => return Err(Error::Format(format!("missing `{MODEL_MAGIC} {MODEL_VERSION}` header"))),
        }
        let (_, header) = lines.next().ok_or_else(|| Error::Format("missing descriptor".into()))?;
        let descriptor = ModelDescriptor::from_header(header)?;
        let mut scaler = None;
        if let Some((n, l)) = lines.peek().copied() {
            if let Some(rest) = l.strip_prefix("scaler ") {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::Format(format!("line {n}: bad scaler value `{t}`"))))
                    .collect::<Result<_>>()?;
                let [a, b, c, d] = v[..] else {
                    return Err(Error::Format(format!("line {n}: scaler needs four values")));
                };
                scaler = Some(Scaler::new(a, b, c, d)?);
                lines.next();
            }
        }
        let set = ParameterSet::parse_lines(&mut lines)?;
        let mut model = build_model(&descriptor, 0)?;
        model.network.load_parameter_set(&set)?;
        model.scaler = scaler;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub const MODEL_MAGIC: &str = "chanpred-model";
pub const MODEL_VERSION: u32 = 1;

const EVAL_CHUNK: usize = 1024;

pub(crate) fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    Ok(crate::nn::mse_loss(pred, target)?.0)
}

pub const LINEAR_RIDGE: f64 = 1e-8;

/// Least-squares linear baseline fitted on the training split through the
/// normal equations with a small ridge term.
pub fn fit_linear_closed_form(dataset: &WindowedDataset) -> Result<Model> {
    let (x, y) = dataset.split_matrices(Split::Train);
    let (n, tx) = x.shape();
    if n < tx + 1 {
        return Err(Error::Trace(format!("{n} training examples cannot determine {} coefficients", tx + 1)));
    }
    // Augment with a bias column.
    let p = tx + 1;
    let mut a = Matrix::zeros(n, p);
    for r in 0..n {
        a.row_mut(r)[..tx].copy_from_slice(x.row(r));
        a.row_mut(r)[tx] = 1.0;
    }
    let mut gram = Matrix::zeros(p, p);
    a.t_matmul_acc(&a, &mut gram);
    let scale = (0..p).map(|i| gram[(i, i)]).fold(0.0, f64::max).max(1.0);
    for i in 0..p {
        gram[(i, i)] += LINEAR_RIDGE * scale;
    }
    let mut rhs = Matrix::zeros(p, y.cols());
    a.t_matmul_acc(&y, &mut rhs);
    let solution = cholesky_solve(&gram, &rhs)?;

    let mut model = build_model(&ModelDescriptor::new(Family::Linear, 1, tx, y.cols()), 0)?;
    let Layer::Dense(dense) = &mut model.network.layers[0] else { unreachable!() };
    dense.w = solution.column_block(0, y.cols()).select_rows(&(0..tx).collect::<Vec<_>>());
    dense.b = Matrix::row_vector(solution.row(tx));
    Ok(model)
}

/// Solves `A X = B` for symmetric positive definite `A`.
fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            let diag: Vec<f64> = (0..j).map(|i| l[(i, i)] * l[(i, i)]).collect();
            let hi = diag.iter().cloned().fold(a[(0, 0)].abs(), f64::max);
            return Err(Error::RankDeficient(hi / d.abs().max(f64::MIN_POSITIVE)));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub patience: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 150, batch_size: 32, dropout_rate: 0.3, patience: 15, step_size: 0.001, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// Last epoch run, counted from 1.
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept, counted from 1.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub wall_time_s: f64,
}

/// Patience-based stopping on a validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

/// Minimum decrease that counts as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, since_best: 0 }
    }

    /// Records one epoch's loss. Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best - MIN_IMPROVEMENT {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            (true, false)
        } else {
            self.since_best += 1;
            (false, self.since_best >= self.patience.max(1))
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

fn mix_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    // splitmix64 finalizer over the combined counters.
    let mut z = seed ^ ((epoch as u64) << 32) ^ batch as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adam on MSE over shuffled training batches with early stopping on the
/// validation split. The returned model holds the best-epoch parameters.
pub fn train(model: &Model, dataset: &WindowedDataset, config: &TrainConfig) -> Result<(Model, TrainReport)> {
    train_with_validator(model, dataset, config, |m, _| m.split_mse(dataset, Split::Validation))
}

/// [`train`] with a caller-supplied validation loss, called once per epoch
/// with the current model and the 1-based epoch number.
pub fn train_with_validator(
    model: &Model,
    dataset: &WindowedDataset,
    config: &TrainConfig,
    mut validate: impl FnMut(&Model, usize) -> Result<f64>,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    let d = &model.descriptor;
    if dataset.input_len != d.input_len || dataset.output_len != d.output_len {
        return Err(Error::Shape(format!(
            "model expects {}→{} windows, dataset has {}→{}",
            d.input_len, d.output_len, dataset.input_len, dataset.output_len
        )));
    }
    let start = Instant::now();
    let mut current = model.clone();
    current.network.dropout_rate = config.dropout_rate;
    let names: Vec<String> = current.network.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut adam = AdamState::new(config.step_size, &current.network.shapes());
    let plan = BatchPlan { batch_size: config.batch_size, shuffle_seed: config.seed, drop_last: false };
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = current.clone();
    let mut report = TrainReport {
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        wall_time_s: 0.0,
    };

    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for (b, batch) in batches(dataset, Split::Train, &plan, epoch - 1)?.into_iter().enumerate() {
            let mode = Mode::Train { dropout_seed: mix_seed(config.seed, epoch, b) };
            let (loss, grads) = current
                .network
                .loss_and_gradients(&batch.inputs, &batch.targets, mode)
                .map_err(|e| if let Error::Diverged(_) = e { Error::Diverged(epoch) } else { e })?;
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            let grad_refs = grads.tensors();
            adam.update(&mut current.network.tensors_mut(), &grad_refs, &names)?;
            loss_sum += loss * batch.inputs.rows() as f64;
            count += batch.inputs.rows();
        }
        let val = validate(&current, epoch).map_err(|e| if let Error::Diverged(_) = e { Error::Diverged(epoch) } else { e })?;
        if !val.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        report.train_losses.push(loss_sum / count as f64);
        report.val_losses.push(val);
        report.stopped_epoch = epoch;
        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best = current.clone();
        }
        if stop {
            break;
        }
    }
    report.best_epoch = stopper.best_epoch();
    report.best_val_loss = stopper.best();
    report.wall_time_s = start.elapsed().as_secs_f64();
    best.network.dropout_rate = config.dropout_rate;
    Ok((best, report))
}
