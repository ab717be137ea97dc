use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::series::RawSeries;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Z-score scaling fitted on the training portion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    /// Population mean and standard deviation of `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("cannot fit a normalizer on no values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::Data(format!(
                "training data has zero or undefined variance (std = {std})"
            )));
        }
        Ok(Normalizer { mean, std })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Normalized `T_in×N×1`.
    pub input: Tensor,
    /// Original units, `τ×N`.
    pub target: Tensor,
    /// `τ×N`, `true` where the target was observed in the source.
    pub observed: Vec<bool>,
    /// Absolute row of the first input step.
    pub start: usize,
}

/// A chronological portion of the series and its windows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub rows: Range<usize>,
    pub windows: Vec<Window>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" | "validation" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
    pub normalizer: Normalizer,
    pub nodes: usize,
    pub lookback: usize,
    pub horizon: usize,
}

impl Dataset {
    pub fn split(&self, name: SplitName) -> &Split {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    /// Checks that no window reaches outside the rows of its own portion and
    /// that portions are ordered and disjoint.
    pub fn audit(&self) -> Result<()> {
        let span = self.lookback + self.horizon;
        let splits = [("train", &self.train), ("val", &self.val), ("test", &self.test)];
        for pair in splits.windows(2) {
            if pair[0].1.rows.end > pair[1].1.rows.start {
                return Err(Error::Data(format!("{} overlaps {}", pair[0].0, pair[1].0)));
            }
        }
        for (name, split) in splits {
            for w in &split.windows {
                if w.start < split.rows.start || w.start + span > split.rows.end {
                    return Err(Error::Data(format!(
                        "{name} window at row {} leaves rows {:?}",
                        w.start, split.rows
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Row boundaries for chronological fractions; the first two boundaries are
/// floored.
pub fn split_rows(total: usize, ratios: (f64, f64, f64)) -> Result<[Range<usize>; 3]> {
    let (a, b, c) = ratios;
    let sum = a + b + c;
    if a <= 0.0 || b < 0.0 || c < 0.0 || !sum.is_finite() {
        return Err(Error::Config(format!("invalid split ratios {ratios:?}")));
    }
    // The epsilon absorbs representation error so that exact products such
    // as 0.6 * 100 floor to 60.
    let cut = |f: f64| ((total as f64) * f / sum + 1e-9).floor() as usize;
    let b1 = cut(a).min(total);
    let b2 = cut(a + b).clamp(b1, total);
    Ok([0..b1, b1..b2, b2..total])
}

/// Splits chronologically, fits the normalizer on the training rows, and cuts
/// stride-1 windows inside each portion. Inputs are normalized; targets keep
/// their original units.
pub fn split_and_window(
    s: &RawSeries,
    ratios: (f64, f64, f64),
    lookback: usize,
    horizon: usize,
) -> Result<Dataset> {
    split_and_window_with(s, ratios, lookback, horizon, None)
}

/// As [`split_and_window`], but scales inputs with `fixed` when given instead
/// of fitting on the training rows.
pub fn split_and_window_with(
    s: &RawSeries,
    ratios: (f64, f64, f64),
    lookback: usize,
    horizon: usize,
    fixed: Option<Normalizer>,
) -> Result<Dataset> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::Config("lookback and horizon must be positive".into()));
    }
    let n = s.nodes();
    let ranges = split_rows(s.steps(), ratios)?;
    let span = lookback + horizon;
    for (name, r) in ["train", "val", "test"].iter().zip(&ranges) {
        if r.len() < span {
            return Err(Error::Data(format!(
                "{name} portion has {} rows, fewer than lookback + horizon = {span}",
                r.len()
            )));
        }
    }
    let train_vals = &s.values.data()[ranges[0].start * n..ranges[0].end * n];
    let normalizer = match fixed {
        Some(n) => n,
        None => Normalizer::fit(train_vals)?,
    };

    let make = |rows: &Range<usize>| -> Result<Split> {
        let count = rows.len() + 1 - span;
        let mut windows = Vec::with_capacity(count);
        for k in 0..count {
            let start = rows.start + k;
            let input: Vec<f64> = s.values.data()[start * n..(start + lookback) * n]
                .iter()
                .map(|&v| normalizer.normalize(v))
                .collect();
            let t0 = start + lookback;
            let target = s.values.data()[t0 * n..(t0 + horizon) * n].to_vec();
            let observed = s.missing[t0 * n..(t0 + horizon) * n].iter().map(|m| !m).collect();
            windows.push(Window {
                input: Tensor::new(&[lookback, n, 1], input)?,
                target: Tensor::new(&[horizon, n], target)?,
                observed,
                start,
            });
        }
        Ok(Split {
            rows: rows.clone(),
            windows,
        })
    };
    let [r0, r1, r2] = &ranges;
    let ds = Dataset {
        train: make(r0)?,
        val: make(r1)?,
        test: make(r2)?,
        normalizer,
        nodes: n,
        lookback,
        horizon,
    };
    ds.audit()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize, n: usize) -> RawSeries {
        let data = (0..t * n).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64 * 0.01).collect();
        RawSeries::from_values(Tensor::new(&[t, n], data).unwrap(), 288).unwrap()
    }

    #[test]
    fn exact_ratio_boundaries() {
        let r = split_rows(100, (0.6, 0.2, 0.2)).unwrap();
        assert_eq!(r, [0..60, 60..80, 80..100]);
    }

    #[test]
    fn pems_shaped_counts() {
        let r = split_rows(16_992, (0.6, 0.2, 0.2)).unwrap();
        assert_eq!(r.iter().map(|x| x.len()).collect::<Vec<_>>(), vec![10_195, 3_398, 3_399]);
        let windows: Vec<usize> = r.iter().map(|x| x.len() - 24 + 1).collect();
        assert_eq!(windows, vec![10_172, 3_375, 3_376]);
    }

    #[test]
    fn window_count_per_portion() {
        // 25 rows -> 15/5/5; each 5-row portion gives 5 - 2 - 1 + 1 = 3 windows.
        let ds = split_and_window(&ramp(25, 2), (0.6, 0.2, 0.2), 2, 1).unwrap();
        assert_eq!(ds.val.len(), 3);
        assert_eq!(ds.test.len(), 3);
        assert_eq!(ds.train.len(), 13);
    }

    #[test]
    fn windows_normalize_inputs_only() {
        let s = ramp(50, 3);
        let ds = split_and_window(&s, (0.6, 0.2, 0.2), 4, 2).unwrap();
        let w = &ds.val.windows[1];
        let raw_in = s.values.get(&[w.start + 2, 1]);
        assert_eq!(w.input.get(&[2, 1, 0]), ds.normalizer.normalize(raw_in));
        assert_eq!(w.target.get(&[1, 2]), s.values.get(&[w.start + 5, 2]));
    }

    #[test]
    fn constant_series_rejected() {
        let s = RawSeries::from_values(Tensor::full(&[40, 2], 3.0), 288).unwrap();
        assert!(matches!(split_and_window(&s, (0.6, 0.2, 0.2), 2, 2), Err(Error::Data(_))));
    }

    #[test]
    fn short_portion_rejected() {
        assert!(matches!(
            split_and_window(&ramp(20, 2), (0.6, 0.2, 0.2), 3, 3),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn normalizer_round_trip() {
        let n = Normalizer::fit(&[1.0, 5.0, 9.0, -4.0]).unwrap();
        for v in [-1e3, -3.3, 0.0, 7.25, 1e4] {
            assert!((n.denormalize(n.normalize(v)) - v).abs() < 1e-12 * v.abs().max(1.0));
        }
    }
}
