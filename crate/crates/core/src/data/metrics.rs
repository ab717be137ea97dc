use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Errors over one index set. `mape` is a fraction (0.1 = 10 %) and is
/// `None` when every observed truth is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
    /// Observed entries.
    pub count: usize,
    /// Observed entries with nonzero truth, the MAPE denominator.
    pub mape_count: usize,
}

#[derive(Debug, Default)]
struct Acc {
    abs: f64,
    sq: f64,
    pct: f64,
    count: usize,
    pct_count: usize,
}

impl Acc {
    fn push(&mut self, pred: f64, truth: f64) {
        let d = truth - pred;
        self.abs += d.abs();
        self.sq += d * d;
        self.count += 1;
        if truth != 0.0 {
            self.pct += (d / truth).abs();
            self.pct_count += 1;
        }
    }

    fn finish(&self) -> Result<ErrorStats> {
        if self.count == 0 {
            return Err(Error::Data("no observed entries to score".into()));
        }
        let n = self.count as f64;
        Ok(ErrorStats {
            mae: self.abs / n,
            rmse: (self.sq / n).sqrt(),
            mape: (self.pct_count > 0).then(|| self.pct / self.pct_count as f64),
            count: self.count,
            mape_count: self.pct_count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// One entry per horizon step, nearest first.
    pub horizons: Vec<ErrorStats>,
    /// Pooled over every horizon.
    pub average: ErrorStats,
    /// Entries excluded because the truth was not observed.
    pub unobserved: usize,
    /// Observed entries excluded from MAPE because the truth is zero.
    pub zero_truth: usize,
}

impl MetricsReport {
    /// Rows `1..=τ` then `avg`; MAPE in percent.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("horizon,MAE,RMSE,MAPE\n");
        let fmt = |s: &mut String, label: &str, e: &ErrorStats| {
            let mape = e.mape.map_or(String::from("NaN"), |m| (m * 100.0).to_string());
            let _ = writeln!(s, "{label},{},{},{}", e.mae, e.rmse, mape);
        };
        for (i, e) in self.horizons.iter().enumerate() {
            fmt(&mut s, &(i + 1).to_string(), e);
        }
        fmt(&mut s, "avg", &self.average);
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scores predictions against truth. The first axis of both tensors is the
/// horizon; remaining axes are pooled. `observed`, when given, has one flag
/// per entry in the same row-major order.
pub fn metrics(pred: &Tensor, truth: &Tensor, observed: Option<&[bool]>) -> Result<MetricsReport> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape("metrics", pred.shape(), truth.shape()));
    }
    if let Some(m) = observed {
        if m.len() != truth.len() {
            return Err(Error::shape("metrics mask", truth.shape(), &[m.len()]));
        }
    }
    let horizons = if truth.rank() == 1 { 1 } else { truth.shape()[0] };
    let per = truth.len() / horizons;
    let mut accs: Vec<Acc> = (0..horizons).map(|_| Acc::default()).collect();
    let mut all = Acc::default();
    let mut unobserved = 0;
    for (i, (&p, &t)) in pred.data().iter().zip(truth.data()).enumerate() {
        if observed.is_some_and(|m| !m[i]) {
            unobserved += 1;
            continue;
        }
        accs[i / per].push(p, t);
        all.push(p, t);
    }
    let average = all.finish()?;
    let horizons = accs.iter().map(Acc::finish).collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        horizons,
        zero_truth: average.count - average.mape_count,
        average,
        unobserved,
    })
}
