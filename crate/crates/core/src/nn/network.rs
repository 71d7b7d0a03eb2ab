use super::conv::Conv1dParams;
use super::dense::DenseParams;
use super::dropout::dropout_mask;
use super::gru::{GruParams, GruStep};
use super::loss::mse_loss;
use super::lstm::{LstmParams, LstmStep};
use super::params::{NamedTensor, ParameterSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseParams),
    Lstm(LstmParams),
    Gru(GruParams),
    Conv1d(Conv1dParams),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Lstm(_) => "lstm",
            Layer::Gru(_) => "gru",
            Layer::Conv1d(_) => "conv1d",
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            Layer::Dense(p) => vec![("W", &p.w), ("b", &p.b)],
            Layer::Lstm(p) => p.tensors().to_vec(),
            Layer::Gru(p) => p.tensors().to_vec(),
            Layer::Conv1d(p) => vec![("kernels", &p.kernels), ("biases", &p.biases)],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Layer::Dense(p) => vec![&mut p.w, &mut p.b],
            Layer::Lstm(p) => p.tensors_mut().into_iter().collect(),
            Layer::Gru(p) => p.tensors_mut().into_iter().collect(),
            Layer::Conv1d(p) => vec![&mut p.kernels, &mut p.biases],
        }
    }

    fn zeros_like(&self) -> Layer {
        match self {
            Layer::Dense(p) => Layer::Dense(p.zeros_like()),
            Layer::Lstm(p) => Layer::Lstm(LstmParams::zeros(p.inputs(), p.hidden())),
            Layer::Gru(p) => Layer::Gru(GruParams::zeros(p.inputs(), p.hidden())),
            Layer::Conv1d(p) => Layer::Conv1d(p.zeros_like()),
        }
    }
}

/// Whether dropout is active, and the seed of its mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

enum Act {
    Flat(Matrix),
    Seq(Vec<Matrix>),
}

/// How the previous layer's output was adapted to this layer's input.
#[derive(Debug, Clone, Copy)]
enum Adapter {
    None,
    /// Flat `N x (steps * features)` split into `steps` matrices.
    Split { features: usize },
    /// Only the final hidden state of a sequence of `steps` was used.
    Last { steps: usize },
}

#[derive(Debug, Clone)]
enum LayerCache {
    Flat { input: Matrix, output: Matrix },
    Lstm(Vec<LstmStep>),
    Gru(Vec<GruStep>),
}

/// Activations kept by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    adapters: Vec<Adapter>,
    dropout: Option<Matrix>,
}

/// Parameter gradients, one entry per layer with the layer's own shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| l.tensors().into_iter().map(|(_, m)| m)).collect()
    }
}

/// A feed-forward chain of layers with optional dropout in front of the
/// last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub dropout_rate: f64,
}

impl Network {
    pub fn new(layers: Vec<Layer>, dropout_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {dropout_rate}")));
        }
        Ok(Self { layers, dropout_rate })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(Layer::tensors).map(|(_, m)| m.len()).sum()
    }

    /// `(name, tensor)` pairs named `layer{i}.{tensor}`.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.tensors().into_iter().map(move |(n, m)| (format!("layer{i}.{n}"), m)))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.named_tensors().iter().map(|(_, m)| m.shape()).collect()
    }

    pub fn forward(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        let last = self.layers.len() - 1;
        let mut act = Act::Flat(x.clone());
        let mut cache = ForwardCache { layers: Vec::new(), adapters: Vec::new(), dropout: None };
        for (i, layer) in self.layers.iter().enumerate() {
            let (input, adapter) = adapt(act, layer)?;
            cache.adapters.push(adapter);
            let input = match (input, mode) {
                (Act::Flat(m), Mode::Train { dropout_seed }) if i == last && last > 0 && self.dropout_rate > 0.0 => {
                    let mask = dropout_mask(m.rows(), m.cols(), self.dropout_rate, dropout_seed)?;
                    let dropped = m.zip_map(&mask, |a, b| a * b);
                    cache.dropout = Some(mask);
                    Act::Flat(dropped)
                }
                (other, _) => other,
            };
            act = match (layer, input) {
                (Layer::Dense(p), Act::Flat(m)) => {
                    let out = p.forward(&m)?;
                    cache.layers.push(LayerCache::Flat { input: m, output: out.clone() });
                    Act::Flat(out)
                }
                (Layer::Conv1d(p), Act::Flat(m)) => {
                    let out = p.forward(&m)?;
                    cache.layers.push(LayerCache::Flat { input: m, output: out.clone() });
                    Act::Flat(out)
                }
                (Layer::Lstm(p), Act::Seq(xs)) => {
                    let (hs, steps) = p.forward_seq(&xs)?;
                    cache.layers.push(LayerCache::Lstm(steps));
                    Act::Seq(hs)
                }
                (Layer::Gru(p), Act::Seq(xs)) => {
                    let (hs, steps) = p.forward_seq(&xs)?;
                    cache.layers.push(LayerCache::Gru(steps));
                    Act::Seq(hs)
                }
                _ => unreachable!("adapt() matches the layer's input kind"),
            };
        }
        let out = match act {
            Act::Flat(m) => m,
            Act::Seq(mut hs) => hs.pop().ok_or_else(|| Error::Shape("empty sequence".into()))?,
        };
        if !out.all_finite() {
            return Err(Error::Diverged(0));
        }
        Ok((out, cache))
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x, Mode::Eval)?.0)
    }

    /// Gradients of the loss with respect to every parameter, given the loss
    /// gradient at the network output.
    pub fn backward(&self, cache: &ForwardCache, dout: &Matrix) -> Result<Gradients> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Shape("forward cache does not belong to this network".into()));
        }
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let last = self.layers.len() - 1;
        // A recurrent output layer emits its final state only.
        let mut d = match &cache.layers[last] {
            LayerCache::Lstm(s) => Act::Seq(last_only(dout, s.len())),
            LayerCache::Gru(s) => Act::Seq(last_only(dout, s.len())),
            LayerCache::Flat { .. } => Act::Flat(dout.clone()),
        };
        for i in (0..self.layers.len()).rev() {
            let need_dx = i > 0;
            let d_input = match (&self.layers[i], &cache.layers[i], d, &mut grads[i]) {
                (Layer::Dense(p), LayerCache::Flat { input, output }, Act::Flat(g), Layer::Dense(gp)) => {
                    p.backward(input, output, &g, gp, need_dx).map(Act::Flat)
                }
                (Layer::Conv1d(p), LayerCache::Flat { input, output }, Act::Flat(g), Layer::Conv1d(gp)) => {
                    p.backward(input, output, &g, gp, need_dx).map(Act::Flat)
                }
                (Layer::Lstm(p), LayerCache::Lstm(steps), Act::Seq(g), Layer::Lstm(gp)) => {
                    Some(Act::Seq(p.backward_seq(steps, &g, gp, need_dx))).filter(|_| need_dx)
                }
                (Layer::Gru(p), LayerCache::Gru(steps), Act::Seq(g), Layer::Gru(gp)) => {
                    Some(Act::Seq(p.backward_seq(steps, &g, gp, need_dx))).filter(|_| need_dx)
                }
                _ => return Err(Error::Shape(format!("forward cache does not match layer {i}"))),
            };
            let Some(mut d_input) = d_input else { break };
            if i == last {
                if let (Some(mask), Act::Flat(g)) = (&cache.dropout, &mut d_input) {
                    *g = g.zip_map(mask, |a, b| a * b);
                }
            }
            d = unadapt(d_input, cache.adapters[i]);
        }
        Ok(Gradients { layers: grads })
    }

    /// MSE loss of a forward pass and the matching parameter gradients.
    pub fn loss_and_gradients(&self, x: &Matrix, y: &Matrix, mode: Mode) -> Result<(f64, Gradients)> {
        let (pred, cache) = self.forward(x, mode)?;
        let (loss, dout) = mse_loss(&pred, y)?;
        Ok((loss, self.backward(&cache, &dout)?))
    }

    pub fn parameter_set(&self) -> ParameterSet {
        ParameterSet {
            tensors: self
                .named_tensors()
                .into_iter()
                .map(|(name, m)| NamedTensor { name, rows: m.rows(), cols: m.cols(), values: m.as_slice().to_vec() })
                .collect(),
        }
    }

    /// Overwrites all parameters; names and shapes must match exactly.
    pub fn load_parameter_set(&mut self, set: &ParameterSet) -> Result<()> {
        let names: Vec<(String, (usize, usize))> =
            self.named_tensors().into_iter().map(|(n, m)| (n, m.shape())).collect();
        if names.len() != set.tensors.len() {
            return Err(Error::Format(format!("expected {} tensors, found {}", names.len(), set.tensors.len())));
        }
        for ((name, shape), t) in names.iter().zip(&set.tensors) {
            if *name != t.name || *shape != (t.rows, t.cols) {
                return Err(Error::Format(format!(
                    "tensor `{}` {}x{} does not match `{name}` {}x{}",
                    t.name, t.rows, t.cols, shape.0, shape.1
                )));
            }
        }
        for (m, t) in self.tensors_mut().into_iter().zip(&set.tensors) {
            m.as_mut_slice().copy_from_slice(&t.values);
        }
        Ok(())
    }
}

fn last_only(dout: &Matrix, steps: usize) -> Vec<Matrix> {
    let mut v: Vec<Matrix> = (0..steps).map(|_| Matrix::zeros(dout.rows(), dout.cols())).collect();
    if let Some(l) = v.last_mut() {
        *l = dout.clone();
    }
    v
}

fn adapt(act: Act, layer: &Layer) -> Result<(Act, Adapter)> {
    match (layer, act) {
        (Layer::Dense(_) | Layer::Conv1d(_), Act::Flat(m)) => Ok((Act::Flat(m), Adapter::None)),
        (Layer::Dense(_), Act::Seq(mut hs)) => {
            let steps = hs.len();
            let last = hs.pop().ok_or_else(|| Error::Shape("empty sequence".into()))?;
            Ok((Act::Flat(last), Adapter::Last { steps }))
        }
        (Layer::Conv1d(_), Act::Seq(_)) => Err(Error::Config("a convolution cannot follow a recurrent layer".into())),
        (Layer::Lstm(_) | Layer::Gru(_), Act::Seq(xs)) => Ok((Act::Seq(xs), Adapter::None)),
        (Layer::Lstm(p), Act::Flat(m)) => split_steps(&m, p.inputs()),
        (Layer::Gru(p), Act::Flat(m)) => split_steps(&m, p.inputs()),
    }
}

fn split_steps(m: &Matrix, features: usize) -> Result<(Act, Adapter)> {
    if features == 0 || m.cols() % features != 0 || m.cols() == 0 {
        return Err(Error::Shape(format!("{} columns do not form steps of {features} features", m.cols())));
    }
    let steps = m.cols() / features;
    let xs = (0..steps).map(|t| m.column_block(t * features, (t + 1) * features)).collect();
    Ok((Act::Seq(xs), Adapter::Split { features }))
}

fn unadapt(d: Act, adapter: Adapter) -> Act {
    match (adapter, d) {
        (Adapter::None, d) => d,
        (Adapter::Last { steps }, Act::Flat(g)) => Act::Seq(last_only(&g, steps)),
        (Adapter::Split { features }, Act::Seq(gs)) => {
            let n = gs.first().map_or(0, Matrix::rows);
            let mut out = Matrix::zeros(n, gs.len() * features);
            for (t, g) in gs.iter().enumerate() {
                for r in 0..n {
                    out.row_mut(r)[t * features..(t + 1) * features].copy_from_slice(g.row(r));
                }
            }
            Act::Flat(out)
        }
        (_, d) => d,
    }
}
