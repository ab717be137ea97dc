//! Graph convolution layers.
//!
//! Both layers compute `Z = Σ_k S_k X Θ_k + bias` over an ordered support
//! set. The node-adaptive layer generates a separate `Θ_k` and bias for every
//! node from a shared pool, `Θ = E·W_G` and `bias = E·b_G`; the classic layer
//! shares one `Θ_k` and one bias vector across all nodes.

use crate::error::{Error, Result};
use crate::graph::{constant_support_vars, NodeEmbedding, SupportSet};
use crate::numerics::{ParamId, Tape, Tensor, Var};

/// `d×K×Cin×Cout` factorized weight pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightPool {
    pub w: ParamId,
}

/// `d×Cout` factorized bias pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasPool {
    pub b: ParamId,
}

/// Node-shared `K×Cin×Cout` weights and `Cout` bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedWeights {
    pub theta: ParamId,
    pub bias: ParamId,
}

/// Per-node parameters generated from the pools for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct NodeParams {
    /// `N×(K·Cin)×Cout`
    pub theta: Var,
    /// `N×Cout`
    pub bias: Var,
}

/// Shared parameters flattened for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct FlatShared {
    /// `(K·Cin)×Cout`
    pub theta: Var,
    /// `Cout`
    pub bias: Var,
}

/// Generates per-node weights `E·W_G` and biases `E·b_G`.
pub fn generate_node_params(tape: &mut Tape, e: Var, w: Var, b: Var) -> Result<NodeParams> {
    let ws = tape.value(w).shape().to_vec();
    if ws.len() != 4 {
        return Err(Error::shape("weight pool", &ws, &[0, 0, 0, 0]));
    }
    let n = tape.value(e).shape()[0];
    let theta = tape.pool_contract(e, w)?;
    let theta = tape.reshape(theta, &[n, ws[1] * ws[2], ws[3]])?;
    let bias = tape.pool_contract(e, b)?;
    Ok(NodeParams { theta, bias })
}

pub fn flatten_shared(tape: &mut Tape, theta: Var, bias: Var) -> Result<FlatShared> {
    let ts = tape.value(theta).shape().to_vec();
    if ts.len() != 3 {
        return Err(Error::shape("shared weights", &ts, &[0, 0, 0]));
    }
    let theta = tape.reshape(theta, &[ts[0] * ts[1], ts[2]])?;
    Ok(FlatShared { theta, bias })
}

/// `[S_0 X ‖ S_1 X ‖ …]` along the feature axis.
pub fn mix_supports(tape: &mut Tape, x: Var, supports: &[Var]) -> Result<Var> {
    let mixed = supports
        .iter()
        .map(|&s| tape.graph_mix(s, x))
        .collect::<Result<Vec<_>>>()?;
    if mixed.len() == 1 {
        Ok(mixed[0])
    } else {
        tape.concat_last(&mixed)
    }
}

fn check_k(tape: &Tape, theta: Var, flat_width: usize, x: Var, k: usize) -> Result<()> {
    let cin = *tape.value(x).shape().last().expect("rank >= 1");
    if cin * k != flat_width {
        return Err(Error::shape(
            "graph conv supports",
            tape.value(x).shape(),
            tape.value(theta).shape(),
        ));
    }
    Ok(())
}

/// Node-adaptive graph convolution on `x[B×N×Cin]` or `x[N×Cin]`.
pub fn napl_apply(tape: &mut Tape, x: Var, supports: &[Var], p: NodeParams) -> Result<Var> {
    let width = tape.value(p.theta).shape()[1];
    check_k(tape, p.theta, width, x, supports.len())?;
    let g = mix_supports(tape, x, supports)?;
    let z = tape.node_matmul(g, p.theta)?;
    tape.add_broadcast(z, p.bias)
}

/// Classic shared-weight graph convolution on `x[B×N×Cin]` or `x[N×Cin]`.
pub fn shared_apply(tape: &mut Tape, x: Var, supports: &[Var], p: FlatShared) -> Result<Var> {
    let width = tape.value(p.theta).shape()[0];
    check_k(tape, p.theta, width, x, supports.len())?;
    let g = mix_supports(tape, x, supports)?;
    let shape = tape.value(g).shape().to_vec();
    let rows: usize = shape[..shape.len() - 1].iter().product();
    let flat = tape.reshape(g, &[rows, width])?;
    let z = tape.matmul(flat, p.theta)?;
    let cout = tape.value(p.theta).shape()[1];
    let mut out_shape = shape[..shape.len() - 1].to_vec();
    out_shape.push(cout);
    let z = tape.reshape(z, &out_shape)?;
    tape.add_broadcast(z, p.bias)
}

/// Evaluates the node-adaptive layer on plain tensors.
pub fn napl_gcn(
    x: &Tensor,
    supports: &SupportSet,
    emb: &NodeEmbedding,
    weight_pool: &Tensor,
    bias_pool: &Tensor,
) -> Result<Tensor> {
    if weight_pool.rank() != 4 || weight_pool.shape()[1] != supports.len() {
        return Err(Error::shape("napl_gcn", weight_pool.shape(), &[supports.len()]));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone())?;
    let sv = constant_support_vars(&mut tape, supports)?;
    let e = tape.constant(emb.tensor().clone())?;
    let w = tape.constant(weight_pool.clone())?;
    let b = tape.constant(bias_pool.clone())?;
    let p = generate_node_params(&mut tape, e, w, b)?;
    let out = napl_apply(&mut tape, xv, &sv, p)?;
    Ok(tape.value(out).clone())
}

/// Evaluates the shared-weight layer on plain tensors.
pub fn shared_gcn(x: &Tensor, supports: &SupportSet, theta: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if theta.rank() != 3 || theta.shape()[0] != supports.len() {
        return Err(Error::shape("shared_gcn", theta.shape(), &[supports.len()]));
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone())?;
    let sv = constant_support_vars(&mut tape, supports)?;
    let t = tape.constant(theta.clone())?;
    let b = tape.constant(bias.clone())?;
    let p = flatten_shared(&mut tape, t, b)?;
    let out = shared_apply(&mut tape, xv, &sv, p)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_predefined_supports, PredefinedGraph, SupportKind};

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    fn uniform2() -> SupportSet {
        SupportSet {
            supports: vec![Tensor::eye(2), Tensor::full(&[2, 2], 0.5)],
            kind: SupportKind::Dagg(crate::graph::DaggVariant::Dagg1),
        }
    }

    #[test]
    fn napl_scalar_per_node() {
        let emb = NodeEmbedding::new(t(&[2, 1], &[2.0, 3.0])).unwrap();
        let w = t(&[1, 1, 1, 1], &[5.0]);
        let b = t(&[1, 1], &[0.0]);
        let out = napl_gcn(&t(&[2, 1], &[1.0, 2.0]), &SupportSet::identity(2), &emb, &w, &b).unwrap();
        assert_eq!(out.data(), &[10.0, 30.0]);
    }

    #[test]
    fn napl_zero_pools_give_bias() {
        let emb = NodeEmbedding::new(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let w = Tensor::zeros(&[2, 1, 3, 2]);
        let b = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = napl_gcn(&x, &SupportSet::identity(2), &emb, &w, &b).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
        let out = napl_gcn(&x, &SupportSet::identity(2), &emb, &w, &Tensor::zeros(&[2, 2])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn napl_two_supports() {
        let emb = NodeEmbedding::new(t(&[2, 1], &[1.0, 1.0])).unwrap();
        let w = Tensor::full(&[1, 2, 1, 1], 1.0);
        let b = Tensor::zeros(&[1, 1]);
        let out = napl_gcn(&t(&[2, 1], &[1.0, 3.0]), &uniform2(), &emb, &w, &b).unwrap();
        assert_eq!(out.data(), &[3.0, 5.0]);
    }

    #[test]
    fn shared_pass_through() {
        let sup = SupportSet {
            supports: vec![Tensor::eye(3), Tensor::zeros(&[3, 3])],
            kind: SupportKind::Predefined,
        };
        let mut theta = Tensor::zeros(&[2, 2, 2]);
        theta.set(&[0, 0, 0], 1.0);
        theta.set(&[0, 1, 1], 1.0);
        theta.set(&[1, 0, 1], 7.0);
        let x = t(&[3, 2], &[1.0, -2.0, 3.0, 4.0, 0.5, 6.0]);
        let out = shared_gcn(&x, &sup, &theta, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(out, x);

        let out = shared_gcn(&Tensor::zeros(&[3, 2]), &sup, &theta, &t(&[2], &[0.25, -1.0])).unwrap();
        assert_eq!(out.data(), &[0.25, -1.0, 0.25, -1.0, 0.25, -1.0]);
    }

    #[test]
    fn shared_path_graph_propagation() {
        let g = PredefinedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let sup = build_predefined_supports(&g);
        let out = shared_gcn(
            &t(&[3, 1], &[1.0, 0.0, 0.0]),
            &sup,
            &Tensor::full(&[2, 1, 1], 1.0),
            &Tensor::zeros(&[1]),
        )
        .unwrap();
        assert_eq!(out.get(&[0, 0]), 1.0);
        assert!((out.get(&[1, 0]) - 0.70711).abs() < 1e-5);
        assert_eq!(out.get(&[2, 0]), 0.0);
    }

    #[test]
    fn support_count_mismatch_is_an_error() {
        let emb = NodeEmbedding::new(t(&[2, 1], &[1.0, 1.0])).unwrap();
        let w = Tensor::zeros(&[1, 1, 1, 1]);
        assert!(napl_gcn(&Tensor::zeros(&[2, 1]), &uniform2(), &emb, &w, &Tensor::zeros(&[1, 1])).is_err());
        assert!(shared_gcn(
            &Tensor::zeros(&[2, 1]),
            &uniform2(),
            &Tensor::zeros(&[1, 1, 1]),
            &Tensor::zeros(&[1])
        )
        .is_err());
    }

    #[test]
    fn batched_matches_unbatched() {
        let emb = NodeEmbedding::new(t(&[2, 2], &[0.3, -1.0, 0.7, 0.2])).unwrap();
        let w = Tensor::new(&[2, 2, 1, 3], (0..12).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap();
        let b = Tensor::new(&[2, 3], (0..6).map(|i| i as f64 * 0.2).collect()).unwrap();
        let x0 = t(&[2, 1], &[1.0, -2.0]);
        let x1 = t(&[2, 1], &[0.5, 4.0]);
        let mut tape = Tape::new();
        let xb = tape
            .constant(Tensor::new(&[2, 2, 1], [x0.data(), x1.data()].concat()).unwrap())
            .unwrap();
        let sv = constant_support_vars(&mut tape, &uniform2()).unwrap();
        let (ev, wv, bv) = (
            tape.constant(emb.tensor().clone()).unwrap(),
            tape.constant(w.clone()).unwrap(),
            tape.constant(b.clone()).unwrap(),
        );
        let p = generate_node_params(&mut tape, ev, wv, bv).unwrap();
        let out = napl_apply(&mut tape, xb, &sv, p).unwrap();
        let batched = tape.value(out).data().to_vec();
        let single: Vec<f64> = [x0, x1]
            .iter()
            .flat_map(|x| napl_gcn(x, &uniform2(), &emb, &w, &b).unwrap().into_data())
            .collect();
        assert_eq!(batched, single);
    }
}
