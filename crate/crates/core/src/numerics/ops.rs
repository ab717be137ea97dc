//! Forward kernels and their vector-Jacobian products.
//!
//! Every differentiable kernel `foo` has a matching `foo_backward` that takes
//! the upstream gradient and returns gradients for each differentiable input.
//! Kernels that parallelize partition work by output element, so results are
//! bit-identical regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Below this many multiply-adds a kernel stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unary {
    Relu,
    Sigmoid,
    Tanh,
    Abs,
}

fn dims2(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        &[m, n] => Ok((m, n)),
        s => Err(Error::shape(op, s, &[0, 0])),
    }
}

/// Views a rank-2 or rank-3 tensor as `batch × rows × cols`.
fn dims3(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        &[n, f] => Ok((1, n, f)),
        &[b, n, f] => Ok((b, n, f)),
        s => Err(Error::shape(op, s, &[0, 0, 0])),
    }
}

fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let row = |(i, o): (usize, &mut [f64])| {
        let ar = &a[i * k..(i + 1) * k];
        for (p, &av) in ar.iter().enumerate() {
            let br = &b[p * n..(p + 1) * n];
            for (ov, &bv) in o.iter_mut().zip(br) {
                *ov += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = dims2(a, "matmul")?;
    let (k2, n) = dims2(b, "matmul")?;
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    gemm(a.data(), b.data(), &mut out, m, k, n);
    Tensor::new(&[m, n], out)
}

/// Returns `(g·bᵀ, aᵀ·g)`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let ga = matmul(grad, &b.transpose()?)?;
    let gb = matmul(&a.transpose()?, grad)?;
    Ok((ga, gb))
}

pub fn apply_unary(x: &Tensor, kind: Unary) -> Tensor {
    match kind {
        Unary::Relu => x.map(|v| v.max(0.0)),
        Unary::Sigmoid => x.map(sigmoid),
        Unary::Tanh => x.map(f64::tanh),
        Unary::Abs => x.map(f64::abs),
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `x` is the input, `y` the forward output. Kinks of relu and abs at 0 get
/// subgradient 0.
pub fn unary_backward(x: &Tensor, y: &Tensor, grad: &Tensor, kind: Unary) -> Tensor {
    let d: Vec<f64> = match kind {
        Unary::Relu => x
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
            .collect(),
        Unary::Sigmoid => y
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&yv, &g)| g * yv * (1.0 - yv))
            .collect(),
        Unary::Tanh => y
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&yv, &g)| g * (1.0 - yv * yv))
            .collect(),
        Unary::Abs => x
            .data()
            .iter()
            .zip(grad.data())
            .map(|(&xv, &g)| {
                if xv > 0.0 {
                    g
                } else if xv < 0.0 {
                    -g
                } else {
                    0.0
                }
            })
            .collect(),
    };
    Tensor::new(x.shape(), d).expect("same shape")
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (m, n) = dims2(x, "softmax_rows")?;
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(n) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(&[m, n], out)
}

/// `y` is the softmax output.
pub fn softmax_rows_backward(y: &Tensor, grad: &Tensor) -> Result<Tensor> {
    let (m, n) = dims2(y, "softmax_rows_backward")?;
    let mut out = vec![0.0; m * n];
    for ((o, yr), gr) in out
        .chunks_mut(n)
        .zip(y.data().chunks(n))
        .zip(grad.data().chunks(n))
    {
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((ov, &yv), &gv) in o.iter_mut().zip(yr).zip(gr) {
            *ov = yv * (gv - dot);
        }
    }
    Tensor::new(&[m, n], out)
}

/// Contracts node embeddings `e[N×d]` with a pool `w[d×…]` over `d`, giving
/// one slab of the pool's trailing shape per node.
pub fn pool_contract(e: &Tensor, w: &Tensor) -> Result<Tensor> {
    let (n, d) = dims2(e, "pool_contract")?;
    if w.shape()[0] != d || w.rank() < 2 {
        return Err(Error::shape("pool_contract", e.shape(), w.shape()));
    }
    let tail: usize = w.shape()[1..].iter().product();
    let mut out = vec![0.0; n * tail];
    gemm(e.data(), w.data(), &mut out, n, d, tail);
    let mut shape = vec![n];
    shape.extend_from_slice(&w.shape()[1..]);
    Tensor::new(&shape, out)
}

pub fn pool_contract_backward(e: &Tensor, w: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, d) = dims2(e, "pool_contract_backward")?;
    let tail = w.len() / d;
    let w2 = w.clone().reshape(&[d, tail])?;
    let g2 = grad.clone().reshape(&[n, tail])?;
    let (ge, gw) = matmul_backward(e, &w2, &g2)?;
    Ok((ge, gw.reshape(w.shape())?))
}

/// Applies a support `s[N×N]` to every batch slab of `x[B×N×F]` (or `x[N×F]`).
pub fn graph_mix(s: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (n, n2) = dims2(s, "graph_mix")?;
    let (_, xn, f) = dims3(x, "graph_mix")?;
    if n != n2 || xn != n {
        return Err(Error::shape("graph_mix", s.shape(), x.shape()));
    }
    let mut out = vec![0.0; x.len()];
    let slab = n * f;
    let work = |(o, xb): (&mut [f64], &[f64])| gemm(s.data(), xb, o, n, n, f);
    if x.len() * n >= PAR_THRESHOLD {
        out.par_chunks_mut(slab)
            .zip(x.data().par_chunks(slab))
            .for_each(work);
    } else {
        out.chunks_mut(slab).zip(x.data().chunks(slab)).for_each(work);
    }
    Tensor::new(x.shape(), out)
}

pub fn graph_mix_backward(s: &Tensor, x: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let (b, n, f) = dims3(x, "graph_mix_backward")?;
    let st = s.transpose()?;
    let slab = n * f;
    let mut gx = vec![0.0; x.len()];
    gx.chunks_mut(slab)
        .zip(grad.data().chunks(slab))
        .for_each(|(o, gb)| gemm(st.data(), gb, o, n, n, f));
    // gs[i, j] = sum_b sum_f g[b, i, f] * x[b, j, f]
    let mut gs = vec![0.0; n * n];
    for bi in 0..b {
        let gb = &grad.data()[bi * slab..(bi + 1) * slab];
        let xb = &x.data()[bi * slab..(bi + 1) * slab];
        for i in 0..n {
            let gr = &gb[i * f..(i + 1) * f];
            for j in 0..n {
                let xr = &xb[j * f..(j + 1) * f];
                gs[i * n + j] += gr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
    }
    Ok((Tensor::new(&[n, n], gs)?, Tensor::new(x.shape(), gx)?))
}

/// Per-node matrix product: `out[b, i, :] = x[b, i, :] · theta[i]` with
/// `x[B×N×P]` (or `[N×P]`) and `theta[N×P×O]`.
pub fn node_matmul(x: &Tensor, theta: &Tensor) -> Result<Tensor> {
    let (b, n, p) = dims3(x, "node_matmul")?;
    let (tn, tp, o) = match theta.shape() {
        &[tn, tp, o] => (tn, tp, o),
        s => return Err(Error::shape("node_matmul", x.shape(), s)),
    };
    if tn != n || tp != p {
        return Err(Error::shape("node_matmul", x.shape(), theta.shape()));
    }
    let mut out = vec![0.0; b * n * o];
    let th = theta.data();
    let work = |(r, orow): (usize, &mut [f64])| {
        let i = r % n;
        let xr = &x.data()[r * p..(r + 1) * p];
        let ti = &th[i * p * o..(i + 1) * p * o];
        for (k, &xv) in xr.iter().enumerate() {
            let tr = &ti[k * o..(k + 1) * o];
            for (ov, &tv) in orow.iter_mut().zip(tr) {
                *ov += xv * tv;
            }
        }
    };
    if b * n * p * o >= PAR_THRESHOLD {
        out.par_chunks_mut(o).enumerate().for_each(work);
    } else {
        out.chunks_mut(o).enumerate().for_each(work);
    }
    let shape: Vec<usize> = if x.rank() == 2 { vec![n, o] } else { vec![b, n, o] };
    Tensor::new(&shape, out)
}

/// Returns `(grad_x, grad_theta)`.
pub fn node_matmul_backward(x: &Tensor, theta: &Tensor, grad: &Tensor) -> Result<(Tensor, Tensor)> {
    let (b, n, p) = dims3(x, "node_matmul_backward")?;
    let o = theta.shape()[2];
    let th = theta.data();
    let g = grad.data();
    let mut gx = vec![0.0; x.len()];
    let gx_work = |(r, gxr): (usize, &mut [f64])| {
        let i = r % n;
        let gr = &g[r * o..(r + 1) * o];
        let ti = &th[i * p * o..(i + 1) * p * o];
        for (k, v) in gxr.iter_mut().enumerate() {
            *v = ti[k * o..(k + 1) * o]
                .iter()
                .zip(gr)
                .map(|(a, c)| a * c)
                .sum();
        }
    };
    let mut gt = vec![0.0; theta.len()];
    let gt_work = |(i, gti): (usize, &mut [f64])| {
        for bi in 0..b {
            let r = bi * n + i;
            let xr = &x.data()[r * p..(r + 1) * p];
            let gr = &g[r * o..(r + 1) * o];
            for (k, &xv) in xr.iter().enumerate() {
                for (t, &gv) in gti[k * o..(k + 1) * o].iter_mut().zip(gr) {
                    *t += xv * gv;
                }
            }
        }
    };
    if b * n * p * o >= PAR_THRESHOLD {
        gx.par_chunks_mut(p).enumerate().for_each(gx_work);
        gt.par_chunks_mut(p * o).enumerate().for_each(gt_work);
    } else {
        gx.chunks_mut(p).enumerate().for_each(gx_work);
        gt.chunks_mut(p * o).enumerate().for_each(gt_work);
    }
    Ok((Tensor::new(x.shape(), gx)?, Tensor::new(theta.shape(), gt)?))
}

/// Concatenates along the last axis; all inputs share leading extents.
pub fn concat_last(xs: &[&Tensor]) -> Result<Tensor> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Config("concat of zero tensors".into()))?;
    let lead = &first.shape()[..first.rank() - 1];
    let rows: usize = lead.iter().product();
    let mut width = 0;
    for x in xs {
        if &x.shape()[..x.rank() - 1] != lead {
            return Err(Error::shape("concat_last", first.shape(), x.shape()));
        }
        width += x.shape()[x.rank() - 1];
    }
    let mut out = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for x in xs {
            let w = x.shape()[x.rank() - 1];
            out.extend_from_slice(&x.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(width);
    Tensor::new(&shape, out)
}

/// Splits a last-axis gradient back into pieces of the given widths.
pub fn split_last(grad: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let lead = &grad.shape()[..grad.rank() - 1];
    let rows: usize = lead.iter().product();
    let total: usize = widths.iter().sum();
    if total != grad.shape()[grad.rank() - 1] {
        return Err(Error::shape("split_last", grad.shape(), widths));
    }
    let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
    for r in 0..rows {
        let mut off = r * total;
        for (part, &w) in parts.iter_mut().zip(widths) {
            part.extend_from_slice(&grad.data()[off..off + w]);
            off += w;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(data, &w)| {
            let mut shape = lead.to_vec();
            shape.push(w);
            Tensor::new(&shape, data)
        })
        .collect()
}

/// `x + b` where `b`'s shape equals the trailing extents of `x`.
pub fn add_broadcast(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let r = x.rank();
    if b.rank() > r || x.shape()[r - b.rank()..] != *b.shape() {
        return Err(Error::shape("add_broadcast", x.shape(), b.shape()));
    }
    let w = b.len();
    let mut out = x.data().to_vec();
    for chunk in out.chunks_mut(w) {
        for (o, &bv) in chunk.iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    Tensor::new(x.shape(), out)
}

/// Reduces an upstream gradient over the broadcast leading axes.
pub fn add_broadcast_backward_bias(b_shape: &[usize], grad: &Tensor) -> Result<Tensor> {
    let w: usize = b_shape.iter().product();
    let mut out = vec![0.0; w];
    for chunk in grad.data().chunks(w) {
        for (o, &g) in out.iter_mut().zip(chunk) {
            *o += g;
        }
    }
    Tensor::new(b_shape, out)
}

fn zip_with(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "add", |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "sub", |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "mul", |x, y| x * y)
}

/// Mean absolute difference and its gradient with respect to `pred`.
pub fn l1_mean(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("l1_loss", pred.shape(), target.shape()));
    }
    let count = pred.len() as f64;
    let mut total = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            total += d.abs();
            if d > 0.0 {
                1.0 / count
            } else if d < 0.0 {
                -1.0 / count
            } else {
                0.0
            }
        })
        .collect();
    Ok((total / count, Tensor::new(pred.shape(), grad)?))
}
