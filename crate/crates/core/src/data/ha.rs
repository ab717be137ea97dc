use std::ops::Range;

use super::metrics::{metrics, MetricsReport};
use super::series::RawSeries;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per time-of-day slot mean of the observed training values.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalAverage {
    pub steps_per_day: usize,
    /// `steps_per_day × N`
    pub slot_means: Tensor,
}

impl HistoricalAverage {
    /// Fits on rows `0..train_end`, using only observed entries.
    pub fn fit(s: &RawSeries, train_end: usize) -> Result<Self> {
        let (p, n) = (s.steps_per_day, s.nodes());
        if train_end > s.steps() {
            return Err(Error::Data(format!(
                "training end {train_end} beyond series length {}",
                s.steps()
            )));
        }
        if train_end < p {
            return Err(Error::Data(format!(
                "training region of {train_end} rows is shorter than one day ({p} rows)"
            )));
        }
        let mut sums = vec![0.0; p * n];
        let mut counts = vec![0usize; p * n];
        for t in 0..train_end {
            let slot = t % p;
            for i in 0..n {
                if !s.is_missing(t, i) {
                    sums[slot * n + i] += s.values.get(&[t, i]);
                    counts[slot * n + i] += 1;
                }
            }
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Data(format!(
                "slot {} of node {} has no training observations",
                k / n,
                k % n
            )));
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        Ok(HistoricalAverage {
            steps_per_day: p,
            slot_means: Tensor::new(&[p, n], means)?,
        })
    }

    /// Prediction for absolute step `t`, independent of when it is issued.
    pub fn predict(&self, t: usize) -> &[f64] {
        self.slot_means.row(t % self.steps_per_day)
    }
}

/// Historical-average forecasts for the given absolute steps, `len×N`.
pub fn ha_forecast(s: &RawSeries, train_end: usize, steps: &[usize]) -> Result<Tensor> {
    let ha = HistoricalAverage::fit(s, train_end)?;
    let n = s.nodes();
    let mut out = Vec::with_capacity(steps.len() * n);
    for &t in steps {
        out.extend_from_slice(ha.predict(t));
    }
    Tensor::new(&[steps.len(), n], out)
}

/// Scores the historical average on one portion. Its forecast for a target
/// step does not depend on the issuing step, so every horizon is scored on
/// the same set of target steps: all rows of the portion after the first
/// `lookback`. The per-horizon rows are therefore identical by construction.
pub fn ha_metrics(
    ha: &HistoricalAverage,
    s: &RawSeries,
    rows: Range<usize>,
    lookback: usize,
    horizon: usize,
) -> Result<MetricsReport> {
    let n = s.nodes();
    let targets: Vec<usize> = (rows.start + lookback..rows.end).collect();
    if targets.is_empty() || horizon == 0 {
        return Err(Error::Data("no target steps to score".into()));
    }
    let m = targets.len() * n;
    let mut pred = Vec::with_capacity(horizon * m);
    let mut truth = Vec::with_capacity(horizon * m);
    let mut observed = Vec::with_capacity(horizon * m);
    for _ in 0..horizon {
        for &t in &targets {
            pred.extend_from_slice(ha.predict(t));
            truth.extend_from_slice(s.values.row(t));
            observed.extend((0..n).map(|i| !s.is_missing(t, i)));
        }
    }
    metrics(
        &Tensor::new(&[horizon, m], pred)?,
        &Tensor::new(&[horizon, m], truth)?,
        Some(&observed),
    )
}
