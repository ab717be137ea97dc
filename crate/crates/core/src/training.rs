//! L1 objective, Adam, and the early-stopping training loop.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{metrics, Dataset, MetricsReport, Normalizer, Split, Window};
use crate::error::{Error, Result};
use crate::model::{ForecastModel, SupportOverride};
use crate::numerics::{finite_difference_check, ops, CheckOptions, CheckReport, Fault, ParamStore, Rng, Tape, Tensor, Var};

/// Mean absolute error over all entries.
pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(ops::l1_mean(pred, target)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.003,
            batch_size: 64,
            max_epochs: 100,
            patience: 15,
            seed: 0,
        }
    }
}

/// Bias-corrected Adam with fixed `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Applies one update from the accumulated gradients, then clears them.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let g = p.grad.data();
        for (((theta, mi), vi), &gi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g)
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.zero_grad();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch.checked_sub(1)?).map(|e| e.val_loss)
    }

    /// `epoch,train_loss,val_loss`, one row per epoch.
    pub fn losses_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
        }
        s
    }

    /// `epoch,train_loss,val_loss,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{:.3}", e.epoch, e.train_loss, e.val_loss, e.seconds);
        }
        s
    }
}

/// `B×N×τ` targets in original units.
fn stack_targets(windows: &[&Window]) -> Result<Tensor> {
    let (tau, n) = (windows[0].target.shape()[0], windows[0].target.shape()[1]);
    let mut data = Vec::with_capacity(windows.len() * n * tau);
    for w in windows {
        data.extend_from_slice(w.target.transpose()?.data());
    }
    Tensor::new(&[windows.len(), n, tau], data)
}

/// Records the de-normalized L1 loss of one batch.
pub fn batch_loss(
    model: &ForecastModel,
    tape: &mut Tape,
    windows: &[&Window],
    normalizer: &Normalizer,
) -> Result<Var> {
    let inputs: Vec<&Tensor> = windows.iter().map(|w| &w.input).collect();
    let pred = model.forward_batch(tape, &inputs, SupportOverride::None)?;
    let pred = tape.affine(pred, normalizer.std, normalizer.mean)?;
    tape.l1_loss(pred, &stack_targets(windows)?)
}

/// Mean L1 loss over a whole portion.
pub fn split_loss(model: &ForecastModel, split: &Split, normalizer: &Normalizer, batch: usize) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::Config("empty split".into()));
    }
    let mut total = 0.0;
    for chunk in split.windows.chunks(batch.max(1)) {
        let refs: Vec<&Window> = chunk.iter().collect();
        let mut tape = Tape::new();
        let loss = batch_loss(model, &mut tape, &refs, normalizer)?;
        total += tape.value(loss).data()[0] * chunk.len() as f64;
    }
    Ok(total / split.len() as f64)
}

/// De-normalized predictions, truths and observation flags for a portion,
/// each laid out `τ×N×M` over the `M` windows.
pub fn predict_split(
    model: &ForecastModel,
    split: &Split,
    normalizer: &Normalizer,
    batch: usize,
) -> Result<(Tensor, Tensor, Vec<bool>)> {
    if split.is_empty() {
        return Err(Error::Config("empty split".into()));
    }
    let c = model.config();
    let (tau, n, m) = (c.horizon, c.nodes, split.len());
    let mut pred = vec![0.0; tau * n * m];
    let mut truth = vec![0.0; tau * n * m];
    let mut observed = vec![true; tau * n * m];
    let mut wi = 0;
    for chunk in split.windows.chunks(batch.max(1)) {
        let inputs: Vec<&Tensor> = chunk.iter().map(|w| &w.input).collect();
        let mut tape = Tape::new();
        let out = model.forward_batch(&mut tape, &inputs, SupportOverride::None)?;
        let out = tape.value(out);
        for (b, w) in chunk.iter().enumerate() {
            for h in 0..tau {
                for i in 0..n {
                    let dst = (h * n + i) * m + wi;
                    pred[dst] = normalizer.denormalize(out.get(&[b, i, h]));
                    truth[dst] = w.target.get(&[h, i]);
                    observed[dst] = w.observed[h * n + i];
                }
            }
            wi += 1;
        }
    }
    Ok((
        Tensor::new(&[tau, n, m], pred)?,
        Tensor::new(&[tau, n, m], truth)?,
        observed,
    ))
}

pub fn evaluate(model: &ForecastModel, split: &Split, normalizer: &Normalizer, batch: usize) -> Result<MetricsReport> {
    let (pred, truth, observed) = predict_split(model, split, normalizer, batch)?;
    metrics(&pred, &truth, Some(&observed))
}

/// Central-difference check of the full training loss over every parameter
/// of `model`, on a seeded random batch of `batch` windows. `fault` corrupts
/// the analytic backward pass for testing the checker itself.
pub fn gradient_check(
    model: &ForecastModel,
    batch: usize,
    opts: CheckOptions,
    fault: Option<Fault>,
) -> Result<CheckReport> {
    let c = model.config().clone();
    let mut rng = Rng::new(opts.seed ^ 0x9e37_79b9);
    let windows: Vec<Window> = (0..batch.max(1))
        .map(|k| {
            let input = (0..c.lookback * c.nodes * c.input_dim).map(|_| rng.normal()).collect();
            let target = (0..c.horizon * c.nodes).map(|_| rng.normal()).collect();
            Ok(Window {
                input: Tensor::new(&[c.lookback, c.nodes, c.input_dim], input)?,
                target: Tensor::new(&[c.horizon, c.nodes], target)?,
                observed: vec![true; c.horizon * c.nodes],
                start: k,
            })
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Window> = windows.iter().collect();
    let norm = Normalizer { mean: 0.0, std: 1.0 };

    let mut params = model.params().clone();
    params.zero_grad();
    let mut tape = Tape::with_fault(fault);
    let loss = batch_loss(model, &mut tape, &refs, &norm)?;
    let grads = tape.backward(loss)?;
    tape.accumulate(&grads, &mut params);

    let mut probe = model.clone();
    finite_difference_check(
        &mut params,
        |p| {
            probe.params_mut().copy_values_from(p);
            let mut tape = Tape::new();
            let loss = batch_loss(&probe, &mut tape, &refs, &norm)?;
            Ok(tape.value(loss).data()[0])
        },
        opts,
    )
}

fn with_context(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {epoch}, batch {batch}")),
        other => other,
    }
}

/// Trains with shuffled mini-batches and early stopping on the validation
/// loss; returns the parameters of the best validation epoch.
///
/// Training stops once `patience` consecutive epochs fail to improve on the
/// best validation loss, or after `max_epochs`.
pub fn train(mut model: ForecastModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(ForecastModel, TrainHistory)> {
    let history = train_with_observer(&mut model, ds, cfg, |_| {})?;
    Ok((model, history))
}

/// As [`train`], updating `model` in place and reporting every finished
/// epoch to `observe`.
pub fn train_with_observer(
    model: &mut ForecastModel,
    ds: &Dataset,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    if ds.train.is_empty() || ds.val.is_empty() {
        return Err(Error::Config("training and validation splits must be non-empty".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::Config("batch_size and max_epochs must be positive".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!("invalid learning rate {}", cfg.lr)));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut stale = 0;
    model.params_mut().zero_grad();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<&Window> = idx.iter().map(|&i| &ds.train.windows[i]).collect();
            let mut tape = Tape::new();
            let loss = batch_loss(model, &mut tape, &windows, &ds.normalizer).map_err(|e| with_context(e, epoch, bi))?;
            total += tape.value(loss).data()[0] * windows.len() as f64;
            let grads = tape.backward(loss)?;
            tape.accumulate(&grads, model.params_mut());
            adam_step(model.params_mut(), &mut adam, cfg.lr);
            for p in model.params().iter() {
                p.value.ensure_finite(&p.name).map_err(|e| with_context(e, epoch, bi))?;
            }
        }
        let train_loss = total / ds.train.len() as f64;
        let val_loss = split_loss(model, &ds.val, &ds.normalizer, cfg.batch_size)
            .map_err(|e| with_context(e, epoch, usize::MAX))?;
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        observe(&rec);
        history.epochs.push(rec);

        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.params().clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params_mut().copy_values_from(&params);
    }
    Ok(history)
}
