//! Experiment configuration in a flat `key = value` file with one
//! `[section]` per pipeline stage. Every key is optional; `--set
//! section.key=value` overrides take precedence over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::coherence::{output_length_for, DEFAULT_THRESHOLDS};
use crate::error::{Error, Result};
use crate::models::{Family, ModelDescriptor, TrainConfig};
use crate::signal::{ClarkeConfig, SampleUnit};

/// Documented defaults; parsing this text yields `ExperimentConfig::default()`.
pub const DEFAULT_CONFIG: &str = "\
[experiment]
environment = indoor-los
seed = 0
repeats = 1
# Fit the linear family by least squares instead of Adam.
closed_form_linear = true

[signal]
# simulate | csv
source = simulate
# A number, or `auto` to calibrate the simulator so the preprocessed
# trace reaches `coherence_ms` at `calibration_threshold`.
doppler_hz = auto
# `auto` takes the environment preset.
coherence_ms = auto
calibration_threshold = 0.5
num_sinusoids = 64
duration_s = 62.3
sample_rate_hz = 10000
rician_k = 0
seed = 1
shadow_sigma_db = 0
shadow_correlation_samples = 1000
# Gaussian error on each raw sample in dB.
noise_db = 0
# csv source only
path =
column = rss
unit = linear

[preprocess]
# 1 disables downsampling, 0 disables small-scale extraction.
downsample = 10
local_mean_window = 50
scale_min = -1
scale_max = 1

[window]
input_len = 25
# `auto` takes the environment horizon at threshold 0.5.
output_len = auto
# `auto` shifts test windows by output_len.
test_stride = auto
train_fraction = 0.7
validation_fraction = 0.2
test_fraction = 0.1

[model]
family = gru
layers = 1
hidden_units = auto
num_kernels = auto
kernel_size = 5

[train]
epochs = 150
batch_size = 32
dropout = 0.3
patience = 15
step_size = 0.001

[sweep]
# Comma separated lists; empty entries fall back to the single-run values.
# `table` expands input_lens to the published grid and output_lens to the
# environment's horizons.
families =
layers =
input_lens =
output_lens =
# input_len | output_len | auto
axis = auto
";

/// Input lengths swept in the published parameter grid.
pub const TABLE_INPUT_LENGTHS: [usize; 12] = [1, 4, 8, 11, 14, 17, 23, 25, 35, 50, 75, 100];

/// A measurement environment and its published coherence times in
/// milliseconds, one per threshold in `DEFAULT_THRESHOLDS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub name: &'static str,
    pub coherence_ms: [f64; 5],
}

pub const ENVIRONMENTS: [Environment; 4] = [
    Environment { name: "indoor-los", coherence_ms: [17.0, 14.0, 11.0, 8.0, 4.0] },
    Environment { name: "indoor-nlos", coherence_ms: [18.0, 15.0, 12.0, 8.0, 4.0] },
    Environment { name: "outdoor-los", coherence_ms: [23.0, 19.0, 14.0, 10.0, 5.0] },
    Environment { name: "outdoor-nlos", coherence_ms: [16.0, 14.0, 11.0, 8.0, 4.0] },
];

impl Environment {
    pub fn find(name: &str) -> Option<&'static Environment> {
        ENVIRONMENTS.iter().find(|e| e.name == name)
    }

    /// Coherence time at one of the default thresholds.
    pub fn coherence_s(&self, threshold: f64) -> Option<f64> {
        DEFAULT_THRESHOLDS.iter().position(|&t| (t - threshold).abs() < 1e-12).map(|i| self.coherence_ms[i] / 1e3)
    }

    /// Output lengths at `sample_rate_hz`, shortest first.
    pub fn horizons(&self, sample_rate_hz: f64) -> Vec<usize> {
        let mut v: Vec<usize> = self.coherence_ms.iter().map(|ms| output_length_for(ms / 1e3, sample_rate_hz)).collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DopplerSpec {
    Fixed(f64),
    /// Solved so that the preprocessed trace has this coherence time.
    Calibrated { coherence_s: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// `doppler_hz` is ignored when `doppler` is calibrated.
    pub clarke: ClarkeConfig,
    pub doppler: DopplerSpec,
    pub shadow_sigma_db: f64,
    pub shadow_correlation_samples: usize,
    pub noise_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSource {
    pub path: PathBuf,
    pub column: String,
    pub sample_rate_hz: f64,
    pub unit: SampleUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    Simulate(SimulationConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub downsample: usize,
    pub local_mean_window: usize,
    pub scale_min: f64,
    pub scale_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub input_len: usize,
    pub output_len: usize,
    pub test_stride: Option<usize>,
    pub fractions: (f64, f64, f64),
}

/// Architecture settings shared by every point of a sweep; `None` sizes
/// take the per-family defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub layers: usize,
    pub hidden_units: Option<usize>,
    pub num_kernels: Option<usize>,
    pub kernel_size: usize,
}

impl ModelSpec {
    pub fn descriptor(&self, family: Family, layers: usize, input_len: usize, output_len: usize) -> ModelDescriptor {
        let mut d = ModelDescriptor::new(family, layers, input_len, output_len);
        if let Some(h) = self.hidden_units {
            d.hidden_units = h;
        }
        if let Some(k) = self.num_kernels {
            d.num_kernels = k;
        }
        d.kernel_size = self.kernel_size;
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotAxis {
    InputLen,
    OutputLen,
    Auto,
}

impl FromStr for PlotAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input_len" => Ok(PlotAxis::InputLen),
            "output_len" => Ok(PlotAxis::OutputLen),
            "auto" => Ok(PlotAxis::Auto),
            other => Err(Error::Config(format!("unknown plot axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub families: Vec<Family>,
    pub layers: Vec<usize>,
    pub input_lens: Vec<usize>,
    pub output_lens: Vec<usize>,
    pub axis: PlotAxis,
}

impl SweepGrid {
    /// Points in family, layers, input length, output length order. The
    /// linear family is a single affine map, so it only appears with one
    /// layer.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &layers in &self.layers {
                if family == Family::Linear && layers != 1 {
                    continue;
                }
                for &input_len in &self.input_lens {
                    for &output_len in &self.output_lens {
                        out.push(GridPoint { family, layers, input_len, output_len });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub family: Family,
    pub layers: usize,
    pub input_len: usize,
    pub output_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: String,
    pub seed: u64,
    pub repeats: usize,
    pub closed_form_linear: bool,
    pub source: SourceConfig,
    pub preprocess: PreprocessConfig,
    pub window: WindowSpec,
    pub model: ModelSpec,
    /// The seed field is replaced per run.
    pub train: TrainConfig,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_ini_str(DEFAULT_CONFIG, &[]).expect("default configuration parses")
    }
}

/// Splits `section.key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let k = k.trim();
    if !k.contains('.') {
        return Err(Error::Config(format!("override key `{k}` must be section.key")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.0.remove(key).filter(|v| !v.is_empty())
    }

    fn auto(&mut self, key: &str) -> Option<String> {
        self.raw(key).filter(|v| v != "auto")
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn parse_auto<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.auto(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))))
            .transpose()
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key).map(|v| parse_list(key, &v)).transpose()
    }

    fn finish(self) -> Result<()> {
        match self.0.into_keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{t}`"))))
        .collect()
}

impl ExperimentConfig {
    /// Reads an optional file and applies overrides on top of it.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_ini_str(&text, overrides)
    }

    pub fn from_ini_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut map = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{s}.{k}"),
                    None => return Err(Error::Config(format!("key `{k}` is outside any section"))),
                };
                map.insert(key, v.trim().to_string());
            }
        }
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_keys(Keys(map))
    }

    fn from_keys(mut k: Keys) -> Result<Self> {
        let environment = k.raw("experiment.environment").unwrap_or_else(|| "indoor-los".into());
        let preset = Environment::find(&environment);
        let seed = k.parse("experiment.seed", 0u64)?;
        let repeats = k.parse("experiment.repeats", 1usize)?;
        let closed_form_linear = k.parse("experiment.closed_form_linear", true)?;

        let sample_rate_hz = k.parse("signal.sample_rate_hz", 10_000.0)?;
        let source_kind = k.raw("signal.source").unwrap_or_else(|| "simulate".into());
        let threshold = k.parse("signal.calibration_threshold", 0.5)?;
        let doppler_fixed: Option<f64> = k.parse_auto("signal.doppler_hz")?;
        let coherence_ms: Option<f64> = k.parse_auto("signal.coherence_ms")?;
        let clarke = ClarkeConfig {
            doppler_hz: doppler_fixed.unwrap_or(0.0),
            num_sinusoids: k.parse("signal.num_sinusoids", 64)?,
            duration_s: k.parse("signal.duration_s", 62.3)?,
            sample_rate_hz,
            rician_k: k.parse("signal.rician_k", 0.0)?,
            seed: k.parse("signal.seed", 1)?,
        };
        let shadow_sigma_db = k.parse("signal.shadow_sigma_db", 0.0)?;
        let shadow_correlation_samples = k.parse("signal.shadow_correlation_samples", 1000)?;
        let noise_db = k.parse("signal.noise_db", 0.0)?;
        let path = k.raw("signal.path");
        let column = k.raw("signal.column").unwrap_or_else(|| "rss".into());
        let unit: SampleUnit = k.parse("signal.unit", SampleUnit::Linear)?;

        let source = match source_kind.as_str() {
            "simulate" => {
                let doppler = match (doppler_fixed, coherence_ms) {
                    (Some(f), _) => DopplerSpec::Fixed(f),
                    (None, Some(ms)) => DopplerSpec::Calibrated { coherence_s: ms / 1e3, threshold },
                    (None, None) => {
                        let env = preset.ok_or_else(|| {
                            Error::Config(format!(
                                "environment `{environment}` has no preset; set signal.doppler_hz or signal.coherence_ms"
                            ))
                        })?;
                        let coherence_s = env.coherence_s(threshold).ok_or_else(|| {
                            Error::Config(format!("no published coherence time at threshold {threshold}"))
                        })?;
                        DopplerSpec::Calibrated { coherence_s, threshold }
                    }
                };
                SourceConfig::Simulate(SimulationConfig { clarke, doppler, shadow_sigma_db, shadow_correlation_samples, noise_db })
            }
            "csv" => SourceConfig::Csv(CsvSource {
                path: path.ok_or_else(|| Error::Config("signal.path is required for a csv source".into()))?.into(),
                column,
                sample_rate_hz,
                unit,
            }),
            other => return Err(Error::Config(format!("unknown source `{other}`"))),
        };

        let preprocess = PreprocessConfig {
            downsample: k.parse("preprocess.downsample", 10)?,
            local_mean_window: k.parse("preprocess.local_mean_window", 50)?,
            scale_min: k.parse("preprocess.scale_min", -1.0)?,
            scale_max: k.parse("preprocess.scale_max", 1.0)?,
        };
        let processed_rate = sample_rate_hz / preprocess.downsample.max(1) as f64;
        let horizons = preset.map(|e| e.horizons(processed_rate));

        let output_len = match k.parse_auto::<usize>("window.output_len")? {
            Some(v) => v,
            None => preset
                .and_then(|e| e.coherence_s(0.5))
                .map(|s| output_length_for(s, processed_rate))
                .ok_or_else(|| Error::Config(format!("environment `{environment}` has no preset; set window.output_len")))?,
        };
        let window = WindowSpec {
            input_len: k.parse("window.input_len", 25)?,
            output_len,
            test_stride: k.parse_auto("window.test_stride")?,
            fractions: (
                k.parse("window.train_fraction", 0.7)?,
                k.parse("window.validation_fraction", 0.2)?,
                k.parse("window.test_fraction", 0.1)?,
            ),
        };
        let model = ModelSpec {
            family: k.parse("model.family", Family::Gru)?,
            layers: k.parse("model.layers", 1)?,
            hidden_units: k.parse_auto("model.hidden_units")?,
            num_kernels: k.parse_auto("model.num_kernels")?,
            kernel_size: k.parse("model.kernel_size", 5)?,
        };
        let train = TrainConfig {
            epochs: k.parse("train.epochs", 150)?,
            batch_size: k.parse("train.batch_size", 32)?,
            dropout_rate: k.parse("train.dropout", 0.3)?,
            patience: k.parse("train.patience", 15)?,
            step_size: k.parse("train.step_size", 0.001)?,
            seed: 0,
        };

        let input_lens = match k.raw("sweep.input_lens") {
            Some(v) if v == "table" => TABLE_INPUT_LENGTHS.to_vec(),
            Some(v) => parse_list("sweep.input_lens", &v)?,
            None => vec![window.input_len],
        };
        let output_lens = match k.raw("sweep.output_lens") {
            Some(v) if v == "table" => horizons.ok_or_else(|| {
                Error::Config(format!("environment `{environment}` has no published horizons"))
            })?,
            Some(v) => parse_list("sweep.output_lens", &v)?,
            None => vec![window.output_len],
        };
        let sweep = SweepGrid {
            families: k.list("sweep.families")?.unwrap_or_else(|| vec![model.family]),
            layers: k.list("sweep.layers")?.unwrap_or_else(|| vec![model.layers]),
            input_lens,
            output_lens,
            axis: k.parse("sweep.axis", PlotAxis::Auto)?,
        };
        let cfg = Self {
            environment,
            seed,
            repeats,
            closed_form_linear,
            source,
            preprocess,
            window,
            model,
            train,
            sweep,
        };
        k.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("experiment.repeats must be at least 1".into()));
        }
        if self.preprocess.downsample < 1 {
            return Err(Error::Config("preprocess.downsample must be at least 1".into()));
        }
        if !(self.preprocess.scale_max > self.preprocess.scale_min) {
            return Err(Error::Config("preprocess.scale_max must exceed scale_min".into()));
        }
        if let SourceConfig::Simulate(sim) = &self.source {
            if !(sim.noise_db >= 0.0) || !(sim.shadow_sigma_db >= 0.0) {
                return Err(Error::Config("noise_db and shadow_sigma_db must be non-negative".into()));
            }
        }
        let mut train = self.train;
        train.seed = 0;
        train.validate()?;
        Ok(())
    }

    /// Seeds of the repeated runs.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.seed + r).collect()
    }

    /// Sample rate after downsampling.
    pub fn processed_rate_hz(&self) -> f64 {
        let raw = match &self.source {
            SourceConfig::Simulate(s) => s.clarke.sample_rate_hz,
            SourceConfig::Csv(c) => c.sample_rate_hz,
        };
        raw / self.preprocess.downsample as f64
    }

    /// The single-run point described by the `[window]` and `[model]` sections.
    pub fn single_point(&self) -> GridPoint {
        GridPoint {
            family: self.model.family,
            layers: self.model.layers,
            input_len: self.window.input_len,
            output_len: self.window.output_len,
        }
    }
}
