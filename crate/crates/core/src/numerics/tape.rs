//! Reverse-mode differentiation over the kernels in [`super::ops`].
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] walks the records in reverse and applies each kernel's
//! vector-Jacobian product. Parameter leaves remember their [`ParamId`] so the
//! resulting gradients can be accumulated into a [`ParamStore`].

use super::ops::{self, Unary};
use super::param::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Unary(Var, Unary),
    Softmax(Var),
    PoolContract(Var, Var),
    GraphMix(Var, Var),
    NodeMatMul(Var, Var),
    Concat(Vec<Var>),
    AddBroadcast(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Reshape(Var),
    Transpose(Var),
    L1(Var, Tensor),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    param: Option<ParamId>,
}

/// Deliberate backward corruption, used to prove the gradient checker fails
/// loudly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Multiplies the sigmoid derivative by the given factor.
    ScaleSigmoidBackward(f64),
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<Fault>,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: Option<Fault>) -> Self {
        Tape {
            nodes: Vec::new(),
            fault,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, what: &str) -> Result<Var> {
        value.ensure_finite(what)?;
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that does not receive gradients.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Leaf, false, "constant input")
    }

    /// A free leaf that receives gradients.
    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Leaf, true, "input")
    }

    /// A leaf bound to a stored parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        let p = store.get(id);
        let v = self.push(p.value.clone(), Op::Leaf, true, &p.name)?;
        self.nodes[v.0].param = Some(id);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = ops::matmul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        self.push(t, Op::MatMul(a, b), ng, "matmul")
    }

    pub fn unary(&mut self, x: Var, kind: Unary) -> Result<Var> {
        let t = ops::apply_unary(self.value(x), kind);
        let ng = self.ng(x);
        self.push(t, Op::Unary(x, kind), ng, "unary")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Relu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, Unary::Tanh)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let t = ops::softmax_rows(self.value(x))?;
        let ng = self.ng(x);
        self.push(t, Op::Softmax(x), ng, "softmax_rows")
    }

    pub fn pool_contract(&mut self, e: Var, w: Var) -> Result<Var> {
        let t = ops::pool_contract(self.value(e), self.value(w))?;
        let ng = self.ng(e) || self.ng(w);
        self.push(t, Op::PoolContract(e, w), ng, "pool_contract")
    }

    pub fn graph_mix(&mut self, s: Var, x: Var) -> Result<Var> {
        let t = ops::graph_mix(self.value(s), self.value(x))?;
        let ng = self.ng(s) || self.ng(x);
        self.push(t, Op::GraphMix(s, x), ng, "graph_mix")
    }

    pub fn node_matmul(&mut self, x: Var, theta: Var) -> Result<Var> {
        let t = ops::node_matmul(self.value(x), self.value(theta))?;
        let ng = self.ng(x) || self.ng(theta);
        self.push(t, Op::NodeMatMul(x, theta), ng, "node_matmul")
    }

    pub fn concat_last(&mut self, xs: &[Var]) -> Result<Var> {
        let ts: Vec<&Tensor> = xs.iter().map(|&v| self.value(v)).collect();
        let t = ops::concat_last(&ts)?;
        let ng = xs.iter().any(|&v| self.ng(v));
        self.push(t, Op::Concat(xs.to_vec()), ng, "concat")
    }

    pub fn add_broadcast(&mut self, x: Var, b: Var) -> Result<Var> {
        let t = ops::add_broadcast(self.value(x), self.value(b))?;
        let ng = self.ng(x) || self.ng(b);
        self.push(t, Op::AddBroadcast(x, b), ng, "add_broadcast")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = ops::add(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        self.push(t, Op::Add(a, b), ng, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = ops::sub(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        self.push(t, Op::Sub(a, b), ng, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = ops::mul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        self.push(t, Op::Mul(a, b), ng, "mul")
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let t = self.value(x).map(|v| scale * v + shift);
        let ng = self.ng(x);
        self.push(t, Op::Affine(x, scale), ng, "affine")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let ng = self.ng(x);
        self.push(t, Op::Reshape(x), ng, "reshape")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x).transpose()?;
        let ng = self.ng(x);
        self.push(t, Op::Transpose(x), ng, "transpose")
    }

    /// Mean absolute error against a fixed target; a scalar of shape `[1]`.
    pub fn l1_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let (loss, grad) = ops::l1_mean(self.value(pred), target)?;
        let ng = self.ng(pred);
        self.push(Tensor::scalar(loss), Op::L1(pred, grad), ng, "l1_loss")
    }

    /// Back-propagates from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        let root = self.value(out);
        if root.len() != 1 {
            return Err(Error::shape("backward", root.shape(), &[1]));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Tensor::full(root.shape(), 1.0));

        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let mut send = |v: Var, t: Tensor| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot => *slot = Some(t),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (ga, gb) = ops::matmul_backward(self.value(*a), self.value(*b), &g)?;
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Unary(x, kind) => {
                    let mut gx = ops::unary_backward(self.value(*x), &node.value, &g, *kind);
                    if let (Unary::Sigmoid, Some(Fault::ScaleSigmoidBackward(f))) = (kind, self.fault) {
                        gx = gx.map(|v| v * f);
                    }
                    send(*x, gx);
                }
                Op::Softmax(x) => send(*x, ops::softmax_rows_backward(&node.value, &g)?),
                Op::PoolContract(e, w) => {
                    let (ge, gw) = ops::pool_contract_backward(self.value(*e), self.value(*w), &g)?;
                    send(*e, ge);
                    send(*w, gw);
                }
                Op::GraphMix(s, x) => {
                    let (gs, gx) = ops::graph_mix_backward(self.value(*s), self.value(*x), &g)?;
                    send(*s, gs);
                    send(*x, gx);
                }
                Op::NodeMatMul(x, th) => {
                    let (gx, gt) = ops::node_matmul_backward(self.value(*x), self.value(*th), &g)?;
                    send(*x, gx);
                    send(*th, gt);
                }
                Op::Concat(xs) => {
                    let widths: Vec<usize> = xs
                        .iter()
                        .map(|v| *self.value(*v).shape().last().expect("rank >= 1"))
                        .collect();
                    for (v, part) in xs.iter().zip(ops::split_last(&g, &widths)?) {
                        send(*v, part);
                    }
                }
                Op::AddBroadcast(x, b) => {
                    let gb = ops::add_broadcast_backward_bias(self.value(*b).shape(), &g)?;
                    send(*b, gb);
                    send(*x, g);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|v| -v));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    send(*a, ops::mul(&g, self.value(*b))?);
                    send(*b, ops::mul(&g, self.value(*a))?);
                }
                Op::Affine(x, scale) => send(*x, g.map(|v| v * scale)),
                Op::Reshape(x) => send(*x, g.reshape(self.value(*x).shape())?),
                Op::Transpose(x) => send(*x, g.transpose()?),
                Op::L1(pred, template) => {
                    let s = g.data()[0];
                    send(*pred, template.map(|v| v * s));
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Adds the gradients of every parameter leaf into `store`.
    pub fn accumulate(&self, grads: &Gradients, store: &mut ParamStore) {
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Some(id), Some(g)) = (node.param, g) {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}
