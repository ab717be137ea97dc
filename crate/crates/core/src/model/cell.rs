//! Gated recurrent update shared by every recurrent variant.
//!
//! ```text
//! z  = σ(G_z([x ‖ h]))
//! r  = σ(G_r([x ‖ h]))
//! ĥ  = tanh(G_h([x ‖ r ⊙ h]))
//! h' = z ⊙ h + (1 − z) ⊙ ĥ
//! ```
//!
//! `G_*` is a node-adaptive graph convolution, a shared graph convolution, or
//! a dense affine map depending on the variant.

use crate::error::{Error, Result};
use crate::graph::{constant_support_vars, NodeEmbedding, SupportSet};
use crate::layers::{generate_node_params, napl_apply, FlatShared, NodeParams};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Update = 0,
    Reset = 1,
    Candidate = 2,
}

/// One recurrent step. `gate` maps a concatenated input to the
/// pre-activation of the requested gate.
pub fn gru_step<G>(tape: &mut Tape, x: Var, h: Var, mut gate: G) -> Result<Var>
where
    G: FnMut(&mut Tape, Var, Gate) -> Result<Var>,
{
    let xh = tape.concat_last(&[x, h])?;
    let z = gate(tape, xh, Gate::Update)?;
    let z = tape.sigmoid(z)?;
    let r = gate(tape, xh, Gate::Reset)?;
    let r = tape.sigmoid(r)?;
    let rh = tape.mul(r, h)?;
    let xrh = tape.concat_last(&[x, rh])?;
    let cand = gate(tape, xrh, Gate::Candidate)?;
    let cand = tape.tanh(cand)?;
    let keep = tape.mul(z, h)?;
    let one_minus_z = tape.affine(z, -1.0, 1.0)?;
    let fresh = tape.mul(one_minus_z, cand)?;
    tape.add(keep, fresh)
}

/// Dense affine gate `x·W + b` with `W` flattened to `(Cin+H)×H`.
pub fn dense_apply(tape: &mut Tape, x: Var, p: FlatShared) -> Result<Var> {
    let z = tape.matmul(x, p.theta)?;
    tape.add_broadcast(z, p.bias)
}

/// Node-adaptive weights of one recurrent layer as plain tensors, gate order
/// update, reset, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    /// `d×K×(Cin+H)×H` each.
    pub pools: [Tensor; 3],
    /// `d×H` each.
    pub biases: [Tensor; 3],
}

/// Evaluates one node-adaptive recurrent step on plain tensors.
pub fn cell_step(
    x: &Tensor,
    h_prev: &Tensor,
    supports: &SupportSet,
    emb: &NodeEmbedding,
    weights: &CellWeights,
) -> Result<Tensor> {
    if x.rank() != 2 || h_prev.rank() != 2 || x.shape()[0] != h_prev.shape()[0] {
        return Err(Error::shape("cell_step", x.shape(), h_prev.shape()));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone())?;
    let hv = tape.constant(h_prev.clone())?;
    let sv = constant_support_vars(&mut tape, supports)?;
    let e = tape.constant(emb.tensor().clone())?;
    let mut gen: Vec<NodeParams> = Vec::with_capacity(3);
    for (w, b) in weights.pools.iter().zip(&weights.biases) {
        let w = tape.constant(w.clone())?;
        let b = tape.constant(b.clone())?;
        gen.push(generate_node_params(&mut tape, e, w, b)?);
    }
    let out = gru_step(&mut tape, xv, hv, |t, inp, g| napl_apply(t, inp, &sv, gen[g as usize]))?;
    Ok(tape.value(out).clone())
}
