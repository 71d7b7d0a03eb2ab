//! Trace conditioning: block averaging, local-mean removal and min-max
//! scaling.

use crate::error::{Error, Result};
use crate::signal::SignalTrace;

/// Averages consecutive blocks of `factor` samples. A trailing partial
/// block is dropped.
pub fn downsample_mean(trace: &SignalTrace, factor: usize) -> Result<SignalTrace> {
    if factor < 1 {
        return Err(Error::Config("downsample factor must be at least 1".into()));
    }
    if trace.len() < factor {
        return Err(Error::Trace(format!("{} samples cannot be averaged in blocks of {factor}", trace.len())));
    }
    let samples = trace
        .samples()
        .chunks_exact(factor)
        .map(|block| block.iter().sum::<f64>() / factor as f64)
        .collect();
    SignalTrace::new(samples, trace.sample_rate_hz() / factor as f64, trace.label.clone())
}

/// Centered moving average. Windows are truncated at both ends so the output
/// has the input's length.
///
/// Sample `k` averages indices `k - (window-1)/2 ..= k + window/2`.
pub fn local_mean(trace: &SignalTrace, window: usize) -> Result<SignalTrace> {
    let x = trace.samples();
    if window < 1 || window > x.len() {
        return Err(Error::Config(format!("smoothing window {window} must be in 1..={}", x.len())));
    }
    // Sums of deviations from the first sample: a constant trace gives its
    // own value back exactly, and long traces keep small partial sums.
    let reference = x[0];
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v - reference;
        prefix.push(acc);
    }
    let before = (window - 1) / 2;
    let after = window / 2;
    let n = x.len();
    let out = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(before);
            let hi = (k + after + 1).min(n);
            reference + (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    trace.with_samples(out)
}

/// Divides the trace by its local mean, leaving the small-scale fading.
pub fn extract_small_scale(trace: &SignalTrace, window: usize) -> Result<SignalTrace> {
    let mean = local_mean(trace, window)?;
    if let Some(i) = mean.samples().iter().position(|&m| m <= 0.0) {
        return Err(Error::NonPositiveLocalMean(i));
    }
    // A zero sample with a positive local mean would give a zero output,
    // which is not valid linear power downstream.
    if let Some(i) = trace.samples().iter().position(|&v| v <= 0.0) {
        return Err(Error::NonPositiveLocalMean(i));
    }
    let out = trace.samples().iter().zip(mean.samples()).map(|(x, m)| x / m).collect();
    trace.with_samples(out)
}

/// Fitted min-max transform onto `[new_min, new_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaler {
    pub x_min: f64,
    pub x_max: f64,
    pub new_min: f64,
    pub new_max: f64,
}

/// Scaled values with the number of inputs that fell outside the fitted
/// range and were extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub values: Vec<f64>,
    pub extrapolated: usize,
}

impl Scaler {
    pub fn new(x_min: f64, x_max: f64, new_min: f64, new_max: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::DegenerateRange(x_min));
        }
        if !(new_max > new_min) {
            return Err(Error::Config(format!("target range [{new_min}, {new_max}] is empty")));
        }
        Ok(Self { x_min, x_max, new_min, new_max })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if self.new_min == -1.0 && self.new_max == 1.0 {
            2.0 * (v - self.x_min) / (self.x_max - self.x_min) - 1.0
        } else {
            (v - self.x_min) / (self.x_max - self.x_min) * (self.new_max - self.new_min) + self.new_min
        }
    }

    pub fn invert(&self, scaled: f64) -> f64 {
        (scaled - self.new_min) / (self.new_max - self.new_min) * (self.x_max - self.x_min) + self.x_min
    }

    pub fn apply_slice(&self, values: &[f64]) -> Scaled {
        let extrapolated = values.iter().filter(|&&v| v < self.x_min || v > self.x_max).count();
        Scaled { values: values.iter().map(|&v| self.apply(v)).collect(), extrapolated }
    }

    pub fn invert_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert(v)).collect()
    }

    /// Physical units per scaled unit; an error of `e` in scaled space is
    /// `e * slope` in the original units.
    pub fn inverse_slope(&self) -> f64 {
        (self.x_max - self.x_min) / (self.new_max - self.new_min)
    }
}

/// Fits a scaler to the extremes of `values`.
pub fn fit_minmax(values: &[f64], new_min: f64, new_max: f64) -> Result<Scaler> {
    if values.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == lo {
        return Err(Error::DegenerateRange(lo));
    }
    Scaler::new(lo, hi, new_min, new_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(v: Vec<f64>) -> SignalTrace {
        SignalTrace::new(v, 1000.0, "t").unwrap()
    }

    #[test]
    fn block_average() {
        let t = SignalTrace::new((1..=10).map(f64::from).collect(), 10_000.0, "t").unwrap();
        let d = downsample_mean(&t, 10).unwrap();
        assert_eq!(d.samples(), &[5.5]);
        assert_eq!(d.sample_rate_hz(), 1000.0);
        assert_eq!(downsample_mean(&t, 1).unwrap(), t);
        let t25 = trace((0..25).map(f64::from).collect());
        assert_eq!(downsample_mean(&t25, 10).unwrap().len(), 2);
        assert!(downsample_mean(&t25, 0).is_err());
        assert!(downsample_mean(&t25, 26).is_err());
    }

    #[test]
    fn moving_average_edges() {
        let t = trace(vec![1.0, 2.0, 3.0]);
        assert_eq!(local_mean(&t, 3).unwrap().samples(), &[1.5, 2.0, 2.5]);
        assert_eq!(local_mean(&t, 1).unwrap(), t);
        assert!(local_mean(&t, 4).is_err());
        let c = trace(vec![2.5; 200]);
        assert!(local_mean(&c, 50).unwrap().samples().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn small_scale_of_constant_is_one() {
        for level in [7.0, 3.7, 1e-9, 0.1] {
            let c = trace(vec![level; 120]);
            assert!(extract_small_scale(&c, 50).unwrap().samples().iter().all(|&v| v == 1.0), "{level}");
        }
        let mut v = vec![1.0; 10];
        v[4] = 0.0;
        assert!(matches!(extract_small_scale(&trace(v), 3), Err(Error::NonPositiveLocalMean(4))));
    }

    #[test]
    fn small_scale_recovers_ripple_from_ramp() {
        let n = 4000;
        let ripple: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * k as f64 / 10.0).sin()).collect();
        let x: Vec<f64> = (0..n).map(|k| (1.0 + k as f64 / n as f64) * ripple[k]).collect();
        let out = extract_small_scale(&trace(x), 200).unwrap();
        let r = correlation(out.samples(), &ripple);
        assert!(r > 0.99, "correlation {r}");
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn minmax_fit_and_apply() {
        let s = fit_minmax(&[-10.0, 0.0, 10.0], -1.0, 1.0).unwrap();
        assert_eq!((s.x_min, s.x_max), (-10.0, 10.0));
        assert_eq!(s.apply(0.0), 0.0);
        assert_eq!(s.apply(10.0), 1.0);
        assert_eq!(s.apply(-10.0), -1.0);
        assert!(matches!(fit_minmax(&[5.0, 5.0, 5.0], -1.0, 1.0), Err(Error::DegenerateRange(_))));

        let id = fit_minmax(&[0.0, 1.0], 0.0, 1.0).unwrap();
        for v in [0.0, 0.3, 1.0] {
            assert_eq!(id.apply(v), v);
        }
        let s04 = Scaler::new(0.0, 4.0, 0.0, 1.0).unwrap();
        assert_eq!(s04.apply(1.0), 0.25);

        let out = s.apply_slice(&[-20.0, 0.0, 15.0]);
        assert_eq!(out.extrapolated, 2);
        assert_eq!(out.values, vec![-2.0, 0.0, 1.5]);
    }

    #[test]
    fn minmax_inverse() {
        let s = Scaler::new(-10.0, 10.0, -1.0, 1.0).unwrap();
        for v in [-10.0, -3.7, 10.0] {
            assert!((s.invert(s.apply(v)) - v).abs() < 1e-12);
        }
        assert_eq!(s.invert(1.0), 10.0);
        let s = Scaler::new(2.0, 8.0, -1.0, 1.0).unwrap();
        assert_eq!(s.invert(0.0), 5.0);
    }

    proptest! {
        #[test]
        fn scaler_round_trips_and_is_monotone(
            lo in -1e3f64..1e3, span in 1e-3f64..1e3,
            a in -2e3f64..2e3, b in -2e3f64..2e3,
            target in prop_oneof![Just((-1.0, 1.0)), Just((0.0, 1.0)), Just((-5.0, 3.0))],
        ) {
            let s = Scaler::new(lo, lo + span, target.0, target.1).unwrap();
            for v in [a, b] {
                let back = s.invert(s.apply(v));
                prop_assert!((back - v).abs() <= 4e-12 * (v.abs() + lo.abs() + span));
                let fwd = s.apply(s.invert(v));
                prop_assert!((fwd - v).abs() <= 1e-12 * (v.abs() + 8.0) * (1.0 + lo.abs() / span));
            }
            if a < b {
                prop_assert!(s.apply(a) < s.apply(b));
            }
        }

        #[test]
        fn downsample_composes(a in 1usize..6, b in 1usize..6, blocks in 1usize..8, seed in 0u64..1000) {
            let n = a * b * blocks;
            let v: Vec<f64> = (0..n).map(|k| ((k as u64 * 2654435761 + seed) % 1000) as f64 / 7.0).collect();
            let t = trace(v);
            let once = downsample_mean(&t, a * b).unwrap();
            let twice = downsample_mean(&downsample_mean(&t, a).unwrap(), b).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (x, y) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn small_scale_has_unit_local_mean_for_window_periodic_fading(
            level in 0.01f64..100.0, period in prop_oneof![Just(5usize), Just(10), Just(25)], reps in 6usize..20,
        ) {
            let window = 50;
            let n = window * reps;
            let x: Vec<f64> = (0..n)
                .map(|k| level * (1.2 + (2.0 * std::f64::consts::PI * (k % period) as f64 / period as f64).cos()))
                .collect();
            let out = extract_small_scale(&trace(x), window).unwrap();
            let lm = local_mean(&out, window).unwrap();
            for k in window..n - window {
                prop_assert!((lm.samples()[k] - 1.0).abs() < 1e-9);
            }
        }
    }
}
