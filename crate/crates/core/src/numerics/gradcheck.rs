use serde::{Deserialize, Serialize};

use super::param::ParamStore;
use super::rng::Rng;
use crate::error::{Error, Result};

/// Above this many entries a parameter is probed on a seeded random subset.
pub const MAX_PROBES_PER_PARAM: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub step: f64,
    pub tol: f64,
    /// Denominator floor for the relative error, so that gradients that are
    /// zero up to round-off are compared in absolute terms.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            step: 1e-5,
            tol: 1e-4,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub probed: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub step: f64,
    pub tol: f64,
    pub params: Vec<ParamCheck>,
    pub pass: bool,
}

impl CheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Compares the gradients already stored in `params` against central
/// differences of `loss_fn`.
///
/// `loss_fn` must be a pure function of the parameter values. It is
/// evaluated twice at the unperturbed point first; differing results are a
/// hard error. Parameter values are restored bit-exactly afterwards.
pub fn finite_difference_check<F>(
    params: &mut ParamStore,
    mut loss_fn: F,
    opts: CheckOptions,
) -> Result<CheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let first = loss_fn(params)?;
    let second = loss_fn(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Nondeterministic { first, second });
    }

    let mut rng = Rng::new(opts.seed);
    let mut report = Vec::with_capacity(params.len());
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).value.len();
        let probes: Vec<usize> = if n > MAX_PROBES_PER_PARAM {
            let mut all: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut all);
            all.truncate(MAX_PROBES_PER_PARAM);
            all.sort_unstable();
            all
        } else {
            (0..n).collect()
        };

        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for &k in &probes {
            let orig = params.get(id).value.data()[k];
            params.get_mut(id).value.data_mut()[k] = orig + opts.step;
            let plus = loss_fn(params);
            params.get_mut(id).value.data_mut()[k] = orig - opts.step;
            let minus = loss_fn(params);
            params.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let analytic = params.get(id).grad.data()[k];
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(opts.abs_floor);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        let p = params.get(id);
        report.push(ParamCheck {
            name: p.name.clone(),
            entries: n,
            probed: probes.len(),
            max_rel_err: max_rel,
            max_abs_err: max_abs,
            pass: max_rel <= opts.tol,
        });
    }
    let pass = report.iter().all(|p| p.pass);
    Ok(CheckReport {
        step: opts.step,
        tol: opts.tol,
        params: report,
        pass,
    })
}
