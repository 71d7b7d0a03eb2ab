//! Sliding-window framing of a trace into supervised (input, target) pairs,
//! chronological splitting and mini-batch planning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::SignalTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Samples seen by the model (`T_x`).
    pub input_len: usize,
    /// Samples predicted in one shot (`T_y`).
    pub output_len: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(input_len: usize, output_len: usize, stride: usize) -> Result<Self> {
        if input_len == 0 || output_len == 0 || stride == 0 {
            return Err(Error::Config("window lengths and stride must be positive".into()));
        }
        Ok(Self { input_len, output_len, stride })
    }

    pub fn span(&self) -> usize {
        self.input_len + self.output_len
    }

    /// Number of windows that fit in `len` samples.
    pub fn count(&self, len: usize) -> usize {
        if len < self.span() {
            0
        } else {
            (len - self.span()) / self.stride + 1
        }
    }
}

/// Input and target matrices, one row per window.
pub fn make_windows(samples: &[f64], config: &WindowConfig) -> Result<(Matrix, Matrix)> {
    let count = config.count(samples.len());
    if count == 0 {
        return Err(Error::Trace(format!(
            "{} samples cannot hold a window of {} inputs and {} targets",
            samples.len(),
            config.input_len,
            config.output_len
        )));
    }
    let mut inputs = Vec::with_capacity(count * config.input_len);
    let mut targets = Vec::with_capacity(count * config.output_len);
    for w in 0..count {
        let start = w * config.stride;
        let split = start + config.input_len;
        inputs.extend_from_slice(&samples[start..split]);
        targets.extend_from_slice(&samples[split..split + config.output_len]);
    }
    Ok((
        Matrix::from_vec(count, config.input_len, inputs)?,
        Matrix::from_vec(count, config.output_len, targets)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Contiguous, time-ordered train / validation / test segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTraces {
    pub train: SignalTrace,
    pub validation: SignalTrace,
    pub test: SignalTrace,
}

impl SplitTraces {
    pub fn get(&self, split: Split) -> &SignalTrace {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn map(&self, mut f: impl FnMut(&SignalTrace) -> Result<SignalTrace>) -> Result<Self> {
        Ok(Self { train: f(&self.train)?, validation: f(&self.validation)?, test: f(&self.test)? })
    }
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.7, 0.2, 0.1);

/// Splits a trace in time order. Train and validation get `floor(f·L)`
/// samples, the test segment takes the remainder.
pub fn chronological_split(trace: &SignalTrace, fractions: (f64, f64, f64)) -> Result<SplitTraces> {
    let (ft, fv, fe) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fe > 0.0) || ((ft + fv + fe) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let len = trace.len();
    // The epsilon absorbs representation error such as 0.7 * 10 = 7.000…1.
    let n_train = (ft * len as f64 + 1e-9).floor() as usize;
    let n_val = (fv * len as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= len {
        return Err(Error::Trace(format!("{len} samples are too few for a three-way split")));
    }
    Ok(SplitTraces {
        train: trace.slice(0, n_train)?,
        validation: trace.slice(n_train, n_train + n_val)?,
        test: trace.slice(n_train + n_val, len)?,
    })
}

/// Windows of all three splits with their labels.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub splits: Vec<Split>,
    pub input_len: usize,
    pub output_len: usize,
}

impl WindowedDataset {
    /// Windows each segment on its own, so no example straddles a split
    /// boundary. Train and validation use stride 1, test uses `test_stride`.
    pub fn from_splits(segments: &SplitTraces, input_len: usize, output_len: usize, test_stride: usize) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        let mut splits = Vec::new();
        for split in Split::ALL {
            let stride = if split == Split::Test { test_stride } else { 1 };
            let cfg = WindowConfig::new(input_len, output_len, stride)?;
            let (x, y) = make_windows(segments.get(split).samples(), &cfg)
                .map_err(|e| Error::Trace(format!("{} segment: {e}", split.as_str())))?;
            splits.extend(std::iter::repeat(split).take(x.rows()));
            inputs.extend(x.into_vec());
            targets.extend(y.into_vec());
        }
        let n = splits.len();
        Ok(Self {
            inputs: Matrix::from_vec(n, input_len, inputs)?,
            targets: Matrix::from_vec(n, output_len, targets)?,
            splits,
            input_len,
            output_len,
        })
    }

    /// Single-split dataset, mostly for tests and closed-form fits.
    pub fn from_matrices(inputs: Matrix, targets: Matrix, split: Split) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!("{} inputs but {} targets", inputs.rows(), targets.rows())));
        }
        let (input_len, output_len) = (inputs.cols(), targets.cols());
        Ok(Self { splits: vec![split; inputs.rows()], inputs, targets, input_len, output_len })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits.iter().enumerate().filter(|(_, s)| **s == split).map(|(i, _)| i).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.iter().filter(|s| **s == split).count()
    }

    /// Inputs and targets of one split, in time order.
    pub fn split_matrices(&self, split: Split) -> (Matrix, Matrix) {
        let idx = self.indices(split);
        (self.inputs.select_rows(&idx), self.targets.select_rows(&idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub drop_last: bool,
}

impl Default for BatchPlan {
    fn default() -> Self {
        Self { batch_size: 32, shuffle_seed: 0, drop_last: false }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

/// Mini-batches of one split. The training split is shuffled with seed
/// `shuffle_seed + epoch`; the other splits keep time order.
pub fn batches(dataset: &WindowedDataset, split: Split, plan: &BatchPlan, epoch: usize) -> Result<Vec<Batch>> {
    if plan.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::Trace(format!("{} split has no examples", split.as_str())));
    }
    if split == Split::Train {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.shuffle_seed.wrapping_add(epoch as u64));
        idx.shuffle(&mut rng);
    }
    Ok(idx
        .chunks(plan.batch_size)
        .filter(|c| !plan.drop_last || c.len() == plan.batch_size)
        .map(|c| Batch { inputs: dataset.inputs.select_rows(c), targets: dataset.targets.select_rows(c) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64).collect()
    }

    #[test]
    fn window_counts() {
        let x = ramp(10);
        let (i, t) = make_windows(&x, &WindowConfig::new(3, 2, 1).unwrap()).unwrap();
        assert_eq!((i.rows(), t.rows()), (6, 6));
        assert_eq!(i.row(2), &[2.0, 3.0, 4.0]);
        assert_eq!(t.row(2), &[5.0, 6.0]);
        let (i, _) = make_windows(&x, &WindowConfig::new(3, 2, 5).unwrap()).unwrap();
        assert_eq!(i.rows(), 2);
        assert!(make_windows(&ramp(4), &WindowConfig::new(3, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn split_lengths() {
        let t = SignalTrace::new(ramp(62_300), 1000.0, "t").unwrap();
        let s = chronological_split(&t, DEFAULT_FRACTIONS).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (43_610, 12_460, 6_230));
        let t = SignalTrace::new(ramp(10), 1000.0, "t").unwrap();
        let s = chronological_split(&t, DEFAULT_FRACTIONS).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 2, 1));
        assert_eq!(s.validation.samples(), &[7.0, 8.0]);
        assert!(chronological_split(&t, (0.5, 0.5, 0.5)).is_err());
    }

    fn dataset(n: usize) -> WindowedDataset {
        let x = Matrix::from_vec(n, 1, ramp(n)).unwrap();
        WindowedDataset::from_matrices(x.clone(), x, Split::Train).unwrap()
    }

    #[test]
    fn batch_sizes_and_determinism() {
        let ds = dataset(100);
        let plan = BatchPlan { batch_size: 32, shuffle_seed: 4, drop_last: false };
        let b = batches(&ds, Split::Train, &plan, 0).unwrap();
        assert_eq!(b.iter().map(|b| b.inputs.rows()).collect::<Vec<_>>(), vec![32, 32, 32, 4]);
        let again = batches(&ds, Split::Train, &plan, 0).unwrap();
        assert!(b.iter().zip(&again).all(|(a, b)| a.inputs == b.inputs));
        let next_epoch = batches(&ds, Split::Train, &plan, 1).unwrap();
        assert_ne!(b[0].inputs, next_epoch[0].inputs);

        let ones = BatchPlan { batch_size: 1, ..plan };
        assert_eq!(batches(&ds, Split::Train, &ones, 0).unwrap().len(), 100);
        let dropped = BatchPlan { drop_last: true, ..plan };
        assert_eq!(batches(&ds, Split::Train, &dropped, 0).unwrap().len(), 3);
        assert!(batches(&ds, Split::Test, &plan, 0).is_err());
    }

    #[test]
    fn evaluation_splits_keep_time_order() {
        let x = Matrix::from_vec(10, 1, ramp(10)).unwrap();
        let ds = WindowedDataset::from_matrices(x.clone(), x, Split::Validation).unwrap();
        let b = batches(&ds, Split::Validation, &BatchPlan { batch_size: 4, ..Default::default() }, 3).unwrap();
        assert_eq!(b[0].inputs.as_slice(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn splits_do_not_leak() {
        let t = SignalTrace::new(ramp(1000), 1000.0, "t").unwrap();
        let s = chronological_split(&t, DEFAULT_FRACTIONS).unwrap();
        let ds = WindowedDataset::from_splits(&s, 25, 11, 11).unwrap();
        let (_, train_y) = ds.split_matrices(Split::Train);
        let (test_x, _) = ds.split_matrices(Split::Test);
        let last_train = train_y.as_slice().iter().cloned().fold(f64::MIN, f64::max);
        let first_test = test_x.as_slice().iter().cloned().fold(f64::MAX, f64::min);
        assert!(first_test > last_train);
        assert_eq!(ds.count(Split::Test), (100 - 36) / 11 + 1);
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(len in 1usize..=50, tx in 1usize..12, ty in 1usize..12, stride in 1usize..8) {
            let cfg = WindowConfig::new(tx, ty, stride).unwrap();
            let brute = (0..len).step_by(stride).filter(|&s| s + tx + ty <= len).count();
            prop_assert_eq!(cfg.count(len), brute);
            let x = ramp(len);
            match make_windows(&x, &cfg) {
                Ok((i, t)) => {
                    prop_assert_eq!(i.rows(), brute);
                    for r in 0..i.rows() {
                        prop_assert_eq!(t.row(r)[0], i.row(r)[tx - 1] + 1.0);
                    }
                }
                Err(_) => prop_assert_eq!(brute, 0),
            }
        }

        #[test]
        fn stride_ty_targets_reconstruct_segment(tx in 1usize..10, ty in 1usize..10, extra in 0usize..40) {
            let len = tx + ty * (1 + extra / ty.max(1)) ;
            let x = ramp(len);
            let cfg = WindowConfig::new(tx, ty, ty).unwrap();
            let (_, t) = make_windows(&x, &cfg).unwrap();
            let covered = t.rows() * ty;
            prop_assert_eq!(t.as_slice(), &x[tx..tx + covered]);
        }
    }
}
