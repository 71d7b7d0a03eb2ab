//! Fading trace sources: a Clarke sum-of-sinusoids simulator, correlated
//! log-normal shadowing and CSV ingestion of measured RSS series.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::{bessel_j0, J0_FIRST_ZERO};

/// Uniformly sampled real-valued series with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    pub label: String,
}

impl SignalTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Trace(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Trace(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate_hz, label: label.into() })
    }

    /// Like [`SignalTrace::new`], additionally requiring strictly positive
    /// samples as linear power must be.
    pub fn linear_power(samples: Vec<f64>, sample_rate_hz: f64, label: impl Into<String>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|&x| x <= 0.0) {
            return Err(Error::Trace(format!("linear power must be positive (index {i})")));
        }
        Self::new(samples, sample_rate_hz, label)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Same rate and label, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz, self.label.clone())
    }

    /// Contiguous sub-range `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::Trace(format!(
                "cannot slice {start}..{end} from a trace of {} samples",
                self.samples.len()
            )));
        }
        self.with_samples(self.samples[start..end].to_vec())
    }

    /// Samples converted to dB (`10·log10`), for presentation.
    pub fn to_db(&self) -> Vec<f64> {
        self.samples.iter().map(|x| 10.0 * x.log10()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClarkeConfig {
    pub doppler_hz: f64,
    pub num_sinusoids: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Ratio of line-of-sight to scattered power; 0 gives Rayleigh fading.
    pub rician_k: f64,
    pub seed: u64,
}

impl Default for ClarkeConfig {
    fn default() -> Self {
        Self {
            doppler_hz: 10.0,
            num_sinusoids: 64,
            duration_s: 10.0,
            sample_rate_hz: 1000.0,
            rician_k: 0.0,
            seed: 0,
        }
    }
}

impl ClarkeConfig {
    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("doppler_hz", self.doppler_hz),
            ("duration_s", self.duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("rician_k", self.rician_k),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{name} must be finite, got {v}")));
        }
        if self.doppler_hz <= 0.0 {
            return Err(Error::Config("doppler_hz must be positive".into()));
        }
        if self.duration_s <= 0.0 || self.sample_rate_hz <= 0.0 {
            return Err(Error::Config("duration_s and sample_rate_hz must be positive".into()));
        }
        if self.sample_rate_hz <= 2.0 * self.doppler_hz {
            return Err(Error::Config(format!(
                "sample rate {} Hz aliases a {} Hz Doppler spread",
                self.sample_rate_hz, self.doppler_hz
            )));
        }
        if self.num_sinusoids < 8 {
            return Err(Error::Config("num_sinusoids must be at least 8".into()));
        }
        if self.rician_k < 0.0 {
            return Err(Error::Config("rician_k must be non-negative".into()));
        }
        if self.num_samples() < 2 {
            return Err(Error::Config("duration and rate give fewer than 2 samples".into()));
        }
        Ok(())
    }
}

/// In-phase and quadrature components of a simulated complex gain.
#[derive(Debug, Clone)]
pub struct FadingEnvelope {
    pub in_phase: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl FadingEnvelope {
    pub fn power(&self) -> Vec<f64> {
        self.in_phase.iter().zip(&self.quadrature).map(|(i, q)| i * i + q * q).collect()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.in_phase.iter().zip(&self.quadrature).map(|(i, q)| i.hypot(*q)).collect()
    }
}

/// Complex gain `g(t)` of a sum-of-sinusoids Rayleigh (or Rician) channel
/// with unit mean scattered power.
///
/// The in-phase and quadrature branches are separate sums over arrival
/// angles `π(2n - 1) / (4N)` in the first quadrant (exact Doppler spread).
/// The quadrature branch gets one extra sinusoid when the split is even, so
/// no frequency appears in both branches and neither branch repeats one.
/// Without that, a single realization's time correlation can stray far from
/// J₀ when two oscillators share a frequency with unrelated phases.
pub fn simulate_clarke_envelope(config: &ClarkeConfig) -> Result<FadingEnvelope> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_i = config.num_sinusoids / 2;
    let n_q = if config.num_sinusoids - n_i == n_i { n_i + 1 } else { config.num_sinusoids - n_i };
    let mut branch = |n: usize| -> Vec<(f64, f64)> {
        (1..=n)
            .map(|k| {
                let alpha = PI * (2 * k - 1) as f64 / (4 * n) as f64;
                (2.0 * PI * config.doppler_hz * alpha.cos(), rng.gen_range(-PI..PI))
            })
            .collect()
    };
    let osc_i = branch(n_i);
    let osc_q = branch(n_q);
    let los_angle: f64 = rng.gen_range(-PI..PI);
    let los_phase: f64 = rng.gen_range(-PI..PI);
    let los_omega = 2.0 * PI * config.doppler_hz * los_angle.cos();

    let k = config.rician_k;
    // Each branch carries half of the scattered power 1 / (k + 1).
    let gain_i = (1.0 / (n_i as f64 * (k + 1.0))).sqrt();
    let gain_q = (1.0 / (n_q as f64 * (k + 1.0))).sqrt();
    let los_gain = (k / (k + 1.0)).sqrt();

    let len = config.num_samples();
    let dt = 1.0 / config.sample_rate_hz;
    let sum = |osc: &[(f64, f64)], t: f64| osc.iter().map(|&(omega, phase)| (omega * t + phase).cos()).sum::<f64>();
    let mut in_phase = Vec::with_capacity(len);
    let mut quadrature = Vec::with_capacity(len);
    for s in 0..len {
        let t = s as f64 * dt;
        let mut re = gain_i * sum(&osc_i, t);
        let mut im = gain_q * sum(&osc_q, t);
        if k > 0.0 {
            let (sin, cos) = (los_omega * t + los_phase).sin_cos();
            re += los_gain * cos;
            im += los_gain * sin;
        }
        in_phase.push(re);
        quadrature.push(im);
    }
    Ok(FadingEnvelope { in_phase, quadrature, sample_rate_hz: config.sample_rate_hz })
}

/// Linear power `|g|²` of a simulated fading channel.
pub fn simulate_clarke(config: &ClarkeConfig) -> Result<SignalTrace> {
    let env = simulate_clarke_envelope(config)?;
    let label = if config.rician_k > 0.0 { "rician-synthetic" } else { "rayleigh-synthetic" };
    // An exact zero is possible only in principle; floor it to keep the
    // power strictly positive.
    let power = env.power().into_iter().map(|p| p.max(f64::MIN_POSITIVE)).collect();
    SignalTrace::linear_power(power, config.sample_rate_hz, label)
}

/// Normalized autocorrelation of the isotropic-scattering model, `J₀(2π f_D τ)`.
pub fn theoretical_acf_clarke(doppler_hz: f64, lag_s: f64) -> Result<f64> {
    if !(lag_s >= 0.0) {
        return Err(Error::Config(format!("lag must be non-negative, got {lag_s}")));
    }
    if !(doppler_hz > 0.0) || !doppler_hz.is_finite() {
        return Err(Error::Config(format!("doppler must be positive, got {doppler_hz}")));
    }
    Ok(bessel_j0(2.0 * PI * doppler_hz * lag_s))
}

/// Doppler at which the power correlation `J₀(2π f_D τ)²` of a Rayleigh
/// channel first falls to `threshold` at lag `coherence_s`.
pub fn doppler_for_power_coherence(coherence_s: f64, threshold: f64) -> Result<f64> {
    if !(coherence_s > 0.0) || !coherence_s.is_finite() {
        return Err(Error::Config(format!("coherence time must be positive, got {coherence_s}")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    // J₀² falls monotonically from 1 to 0 on [0, first zero].
    let (mut lo, mut hi) = (0.0, J0_FIRST_ZERO);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid).powi(2) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / (2.0 * PI * coherence_s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowConfig {
    pub sigma_db: f64,
    pub correlation_length_samples: usize,
    pub seed: u64,
}

/// Multiplies the trace by a log-normal gain whose dB value follows a
/// stationary AR(1) process with standard deviation `sigma_db`.
///
/// The AR coefficient is `1 - 1/L` for correlation length `L`, so `L = 1`
/// gives independent gains and large `L` approaches `exp(-1/L)`.
pub fn apply_shadowing(trace: &SignalTrace, config: &ShadowConfig) -> Result<SignalTrace> {
    if !config.sigma_db.is_finite() || config.sigma_db < 0.0 {
        return Err(Error::Config(format!("sigma_db must be finite and non-negative, got {}", config.sigma_db)));
    }
    if config.correlation_length_samples < 1 {
        return Err(Error::Config("correlation_length_samples must be at least 1".into()));
    }
    if config.sigma_db == 0.0 {
        return Ok(trace.clone());
    }
    let rho = 1.0 - 1.0 / config.correlation_length_samples as f64;
    let innovation = (1.0 - rho * rho).sqrt() * config.sigma_db;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state_db = config.sigma_db * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(trace.len());
    for (i, &x) in trace.samples().iter().enumerate() {
        if i > 0 {
            state_db = rho * state_db + innovation * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(x * 10f64.powf(state_db / 10.0));
    }
    trace.with_samples(out)
}

/// How values in an ingested file are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleUnit {
    /// Linear power; must be strictly positive.
    #[default]
    Linear,
    /// Decibels (dBm or dB); converted to linear power on load.
    Decibel,
    /// Any finite value, used as is.
    Raw,
}

impl std::str::FromStr for SampleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "db" | "dbm" => Ok(Self::Decibel),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Config(format!("unknown sample unit `{other}` (linear, db, raw)"))),
        }
    }
}

/// Reads one column of a headed CSV file as a trace, in row order.
///
/// Row numbers in errors count data rows from 1, excluding the header.
pub fn load_trace_csv(
    path: impl AsRef<Path>,
    column: &str,
    sample_rate_hz: f64,
    unit: SampleUnit,
) -> Result<SignalTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = record.get(col).unwrap_or("");
        let value: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::BadCell { row, value: cell.to_string() })?;
        let value = match unit {
            SampleUnit::Linear if value <= 0.0 => {
                return Err(Error::BadCell { row, value: cell.to_string() });
            }
            SampleUnit::Decibel => 10f64.powf(value / 10.0),
            _ => value,
        };
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    SignalTrace::new(samples, sample_rate_hz, label)
}

/// Writes `index,time_s,value` rows readable by [`load_trace_csv`].
pub fn write_trace_csv(trace: &SignalTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "time_s", "value"])?;
    let dt = 1.0 / trace.sample_rate_hz();
    for (i, v) in trace.samples().iter().enumerate() {
        w.write_record([i.to_string(), format!("{:?}", i as f64 * dt), format!("{v:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
