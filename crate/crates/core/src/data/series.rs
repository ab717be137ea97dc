use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Five-minute resolution.
pub const DEFAULT_STEPS_PER_DAY: usize = 288;

/// A `T×N` multivariate series with its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    /// `T×N`; missing entries hold 0 until interpolated.
    pub values: Tensor,
    /// Row-major `T×N`, `true` where the entry was absent in the source.
    pub missing: Vec<bool>,
    pub steps_per_day: usize,
    /// Informational label for the first row, e.g. a timestamp.
    pub origin: Option<String>,
}

impl RawSeries {
    pub fn new(values: Tensor, missing: Vec<bool>, steps_per_day: usize) -> Result<Self> {
        if values.rank() != 2 || missing.len() != values.len() {
            return Err(Error::shape("raw series", values.shape(), &[missing.len()]));
        }
        if steps_per_day == 0 {
            return Err(Error::Config("steps_per_day must be positive".into()));
        }
        Ok(RawSeries {
            values,
            missing,
            steps_per_day,
            origin: None,
        })
    }

    pub fn from_values(values: Tensor, steps_per_day: usize) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(values, missing, steps_per_day)
    }

    pub fn steps(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn nodes(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn is_missing(&self, t: usize, node: usize) -> bool {
        self.missing[t * self.nodes() + node]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Writes the series as CSV with a header of node indices.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        let n = self.nodes();
        out.push_str(&(0..n).map(|i| format!("n{i}")).collect::<Vec<_>>().join(","));
        out.push('\n');
        for t in 0..self.steps() {
            let row: Vec<String> = (0..n)
                .map(|i| {
                    if self.is_missing(t, i) {
                        String::new()
                    } else {
                        self.values.get(&[t, i]).to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Reads a rectangular numeric CSV of `T` rows by `N` columns. Empty cells
/// are missing values; blank lines are skipped, so a single-column file
/// marks a gap with `""`. A first row with any non-numeric cell is a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, DEFAULT_STEPS_PER_DAY)
}

pub fn parse_csv(text: &str, steps_per_day: usize) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut rows = 0;
    let mut origin = None;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        if r == 0 && rec.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err()) {
            origin = Some(rec.iter().collect::<Vec<_>>().join(","));
            width = Some(rec.len());
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row: r,
                    col: rec.len().min(w),
                    msg: format!("expected {w} columns, found {}", rec.len()),
                })
            }
            Some(_) => {}
        }
        for (c, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                values.push(0.0);
                missing.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: r,
                    col: c,
                    msg: format!("not a number: {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: r,
                        col: c,
                        msg: "non-finite value".into(),
                    });
                }
                values.push(v);
                missing.push(false);
            }
        }
        rows += 1;
    }
    let n = width.unwrap_or(0);
    if rows == 0 || n == 0 {
        return Err(Error::Data("no data rows".into()));
    }
    let mut s = RawSeries::new(Tensor::new(&[rows, n], values)?, missing, steps_per_day)?;
    s.origin = origin;
    Ok(s)
}

/// Fills gaps per column: interior gaps linearly between the nearest
/// observed neighbours, leading and trailing gaps with the nearest observed
/// value. The mask is kept so metrics can still exclude filled entries.
pub fn interpolate_missing(s: &RawSeries) -> Result<RawSeries> {
    let (t_len, n) = (s.steps(), s.nodes());
    let mut out = s.clone();
    for col in 0..n {
        let observed: Vec<usize> = (0..t_len).filter(|&t| !s.is_missing(t, col)).collect();
        let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
            return Err(Error::Data(format!("column {col} has no observed values")));
        };
        let data = out.values.data_mut();
        for t in 0..first {
            data[t * n + col] = data[first * n + col];
        }
        for t in last + 1..t_len {
            data[t * n + col] = data[last * n + col];
        }
        for pair in observed.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (va, vb) = (data[a * n + col], data[b * n + col]);
            for t in a + 1..b {
                let frac = (t - a) as f64 / (b - a) as f64;
                data[t * n + col] = va + (vb - va) * frac;
            }
        }
    }
    Ok(out)
}
