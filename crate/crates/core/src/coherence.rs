//! Time correlation of a fading trace and the coherence-time horizons
//! derived from it.

use std::io::Write;

use crate::error::{Error, Result};
use crate::signal::SignalTrace;

/// Thresholds swept by default, from loosest to strictest.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Normalized autocorrelation by lag, lag 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfCurve {
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl AcfCurve {
    pub fn new(values: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if values.first() != Some(&1.0) {
            return Err(Error::Trace("correlation curve must start at 1".into()));
        }
        if values.iter().any(|v| !(v.abs() <= 1.0 + 1e-9)) {
            return Err(Error::Trace("correlation values must lie in [-1, 1]".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::Trace("sample rate must be positive".into()));
        }
        Ok(Self { values, sample_rate_hz })
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }
}

/// `min(len / 4, 1000)`, at least 1.
pub fn default_max_lag(len: usize) -> usize {
    (len / 4).clamp(1, 1000)
}

/// Biased (1/N) autocorrelation of the mean-removed trace, normalized to 1
/// at lag 0.
pub fn autocorrelation(trace: &SignalTrace, max_lag: usize) -> Result<AcfCurve> {
    autocorrelation_of(trace.samples(), trace.sample_rate_hz(), max_lag)
}

pub(crate) fn autocorrelation_of(samples: &[f64], sample_rate_hz: f64, max_lag: usize) -> Result<AcfCurve> {
    let n = samples.len();
    if max_lag >= n {
        return Err(Error::Config(format!("max_lag {max_lag} must be below the trace length {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let c0: f64 = centered.iter().map(|x| x * x).sum();
    if !(c0 > 0.0) || c0 < 1e-24 * mean.abs().max(1.0).powi(2) * n as f64 {
        return Err(Error::ZeroVariance);
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for lag in 1..=max_lag {
        let c: f64 = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
        values.push((c / c0).clamp(-1.0, 1.0));
    }
    Ok(AcfCurve { values, sample_rate_hz })
}

/// Time, in seconds, at which the correlation first drops below
/// `threshold`, interpolated linearly between the bracketing lags.
pub fn coherence_time(acf: &AcfCurve, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must be in (0, 1), got {threshold}")));
    }
    let crossing = acf.values.windows(2).position(|w| w[1] < threshold).ok_or(Error::NoCrossing {
        threshold,
        max_lag: acf.max_lag(),
    })?;
    let (hi, lo) = (acf.values[crossing], acf.values[crossing + 1]);
    let lag = crossing as f64 + (hi - threshold) / (hi - lo);
    Ok(lag / acf.sample_rate_hz)
}

/// Whole samples covered by a coherence time, never less than one.
pub fn output_length_for(coherence_time_s: f64, sample_rate_hz: f64) -> usize {
    ((coherence_time_s * sample_rate_hz).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonRow {
    pub threshold: f64,
    pub coherence_time_s: f64,
    pub output_length_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonTable {
    pub rows: Vec<HorizonRow>,
    /// Lag window the correlation was estimated over.
    pub max_lag: usize,
}

impl HorizonTable {
    /// Builds a table from already known coherence times.
    pub fn from_coherence_times(pairs: &[(f64, f64)], sample_rate_hz: f64, max_lag: usize) -> Self {
        let rows = pairs
            .iter()
            .map(|&(threshold, t)| HorizonRow {
                threshold,
                coherence_time_s: t,
                output_length_samples: output_length_for(t, sample_rate_hz),
            })
            .collect();
        Self { rows, max_lag }
    }

    pub fn output_lengths(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.output_length_samples).collect()
    }

    /// CSV with columns `threshold,coherence_ms,output_samples,max_lag`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "threshold,coherence_ms,output_samples,max_lag")?;
        for r in &self.rows {
            writeln!(out, "{},{:.6},{},{}", r.threshold, r.coherence_time_s * 1e3, r.output_length_samples, self.max_lag)?;
        }
        Ok(())
    }
}

/// One row per threshold, using the trace's correlation up to `max_lag`.
pub fn horizon_table(trace: &SignalTrace, thresholds: &[f64], max_lag: usize) -> Result<HorizonTable> {
    let acf = autocorrelation(trace, max_lag)?;
    let rows = thresholds
        .iter()
        .map(|&threshold| {
            let t = coherence_time(&acf, threshold)?;
            Ok(HorizonRow {
                threshold,
                coherence_time_s: t,
                output_length_samples: output_length_for(t, trace.sample_rate_hz()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonTable { rows, max_lag })
}
