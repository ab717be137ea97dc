//! Recurrent forecasting models: the adaptive graph convolutional recurrent
//! network, its ablations, and the graph-free GRU encoder-decoder baseline.
//!
//! All variants consume a normalized window `T_in×N×C` and emit normalized
//! predictions for every horizon at once. The graph variants stack recurrent
//! layers, take the top layer's final hidden state `N×H`, and map it through
//! one linear head `H×τ` shared by all nodes.

mod cell;
mod checkpoint;
mod config;

pub use cell::{cell_step, dense_apply, gru_step, CellWeights, Gate};
pub use checkpoint::{Checkpoint, StoredParam};
pub use config::{ModelConfig, Variant};

use crate::error::{Error, Result};
use crate::graph::{
    build_predefined_supports, constant_support_vars, dagg_matrix, dagg_support_vars, dagg_var,
    AdaptiveGraph, NodeEmbedding, PredefinedGraph, SupportSet,
};
use crate::layers::{
    flatten_shared, generate_node_params, napl_apply, shared_apply, BiasPool, FlatShared, NodeParams,
    SharedWeights, WeightPool,
};
use crate::numerics::{ParamId, ParamStore, Rng, Tape, Tensor, Var};

/// Parameters of one node-adaptive recurrent layer, gate order update, reset,
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellParams {
    pub pools: [WeightPool; 3],
    pub biases: [BiasPool; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GateParams {
    Napl { emb: ParamId, cell: CellParams },
    Shared([SharedWeights; 3]),
}

#[derive(Debug, Clone, PartialEq)]
struct GraphNet {
    dagg_emb: Option<ParamId>,
    layers: Vec<GateParams>,
    head_w: ParamId,
    head_b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct EncoderDecoder {
    encoder: Vec<[SharedWeights; 3]>,
    decoder: Vec<[SharedWeights; 3]>,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Graph(GraphNet),
    Seq(EncoderDecoder),
}

/// Replaces the model's own supports during a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum SupportOverride<'a> {
    None,
    Fixed(&'a SupportSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    config: ModelConfig,
    graph: Option<PredefinedGraph>,
    params: ParamStore,
    body: Body,
}

fn glorot(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::new(shape, data).expect("shape matches")
}

fn normal(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.normal()).collect()).expect("shape matches")
}

const GATE_NAMES: [&str; 3] = ["z", "r", "h"];

/// Exact number of scalar parameters `build` registers for `config`.
pub fn count_params(config: &ModelConfig) -> usize {
    let (n, h, d, tau) = (
        config.nodes,
        config.hidden,
        config.embed_dim,
        config.horizon,
    );
    let k = config.support_count();
    if config.variant == Variant::GruEd {
        let gru_layer = |cin: usize| 3 * ((cin + h) * h + h);
        let enc: usize = (0..config.layers).map(|l| gru_layer(config.layer_input(l))).sum();
        let dec: usize = (0..config.layers)
            .map(|l| gru_layer(if l == 0 { 1 } else { h }))
            .sum();
        return enc + dec + h + 1;
    }
    let layers: usize = (0..config.layers)
        .map(|l| {
            let cin = config.layer_input(l);
            if config.variant.node_adaptive() {
                3 * (d * k * (cin + h) * h) + 3 * (d * h)
            } else {
                3 * (k * (cin + h) * h) + 3 * h
            }
        })
        .sum();
    let embeddings = match config.variant {
        Variant::Agcrn | Variant::NaplGcgru | Variant::DaggGcgru => n * d,
        Variant::AgcrnI => (config.layers + 1) * n * d,
        Variant::Gcgru | Variant::GruEd => 0,
    };
    layers + embeddings + h * tau + tau
}

impl ForecastModel {
    /// Builds and initializes a model, drawing from a generator seeded with
    /// `config.seed`.
    pub fn build(config: ModelConfig, graph: Option<PredefinedGraph>) -> Result<Self> {
        let mut rng = Rng::new(config.seed);
        Self::build_with_rng(config, graph, &mut rng)
    }

    pub fn build_with_rng(
        config: ModelConfig,
        graph: Option<PredefinedGraph>,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        if config.variant.needs_predefined_graph() {
            match &graph {
                None => {
                    return Err(Error::Config(format!(
                        "variant {} requires a pre-defined graph",
                        config.variant
                    )))
                }
                Some(g) if g.nodes != config.nodes => {
                    return Err(Error::Config(format!(
                        "graph has {} nodes but the model has {}",
                        g.nodes, config.nodes
                    )))
                }
                Some(_) => {}
            }
        }
        let graph = if config.variant.needs_predefined_graph() {
            graph
        } else {
            None
        };

        let mut params = ParamStore::new();
        let body = if config.variant == Variant::GruEd {
            Body::Seq(Self::build_seq(&config, &mut params, rng))
        } else {
            Body::Graph(Self::build_graph(&config, &mut params, rng))
        };
        debug_assert_eq!(params.scalar_count(), count_params(&config));
        Ok(ForecastModel {
            config,
            graph,
            params,
            body,
        })
    }

    fn build_graph(config: &ModelConfig, params: &mut ParamStore, rng: &mut Rng) -> GraphNet {
        let (n, h, d) = (config.nodes, config.hidden, config.embed_dim);
        let k = config.support_count();
        let variant = config.variant;

        let shared_emb = match variant {
            Variant::Agcrn | Variant::NaplGcgru | Variant::DaggGcgru => {
                Some(params.add("embedding", normal(rng, &[n, d])))
            }
            _ => None,
        };
        let dagg_emb = match variant {
            Variant::AgcrnI => Some(params.add("dagg.embedding", normal(rng, &[n, d]))),
            v if v.uses_dagg() => shared_emb,
            _ => None,
        };

        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let cin = config.layer_input(l);
            let fan_in = k * (cin + h);
            let gp = if variant.node_adaptive() {
                let emb = match variant {
                    Variant::AgcrnI => params.add(format!("layer{l}.embedding"), normal(rng, &[n, d])),
                    _ => shared_emb.expect("node-adaptive variants carry an embedding"),
                };
                let pools = GATE_NAMES.map(|g| WeightPool {
                    w: params.add(
                        format!("layer{l}.pool_w{g}"),
                        glorot(rng, &[d, k, cin + h, h], fan_in, h),
                    ),
                });
                let biases = GATE_NAMES.map(|g| BiasPool {
                    b: params.add(format!("layer{l}.pool_b{g}"), Tensor::zeros(&[d, h])),
                });
                GateParams::Napl {
                    emb,
                    cell: CellParams { pools, biases },
                }
            } else {
                GateParams::Shared(GATE_NAMES.map(|g| SharedWeights {
                    theta: params.add(
                        format!("layer{l}.theta_{g}"),
                        glorot(rng, &[k, cin + h, h], fan_in, h),
                    ),
                    bias: params.add(format!("layer{l}.bias_{g}"), Tensor::zeros(&[h])),
                }))
            };
            layers.push(gp);
        }
        let tau = config.horizon;
        let head_w = params.add("head.weight", glorot(rng, &[h, tau], h, tau));
        let head_b = params.add("head.bias", Tensor::zeros(&[tau]));
        GraphNet {
            dagg_emb,
            layers,
            head_w,
            head_b,
        }
    }

    fn build_seq(config: &ModelConfig, params: &mut ParamStore, rng: &mut Rng) -> EncoderDecoder {
        let h = config.hidden;
        let mut dense = |params: &mut ParamStore, prefix: String, cin: usize| {
            GATE_NAMES.map(|g| SharedWeights {
                theta: params.add(
                    format!("{prefix}.w{g}"),
                    glorot(rng, &[1, cin + h, h], cin + h, h),
                ),
                bias: params.add(format!("{prefix}.b{g}"), Tensor::zeros(&[h])),
            })
        };
        let encoder = (0..config.layers)
            .map(|l| dense(params, format!("encoder{l}"), config.layer_input(l)))
            .collect();
        let decoder = (0..config.layers)
            .map(|l| dense(params, format!("decoder{l}"), if l == 0 { 1 } else { h }))
            .collect();
        let out_w = params.add("output.weight", glorot(rng, &[h, 1], h, 1));
        let out_b = params.add("output.bias", Tensor::zeros(&[1]));
        EncoderDecoder {
            encoder,
            decoder,
            out_w,
            out_b,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn graph(&self) -> Option<&PredefinedGraph> {
        self.graph.as_ref()
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Overwrites a parameter value by name, keeping its shape.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .params
            .find(name)
            .ok_or_else(|| Error::Config(format!("no parameter named {name}")))?;
        let p = self.params.get_mut(id);
        if p.value.shape() != value.shape() {
            return Err(Error::shape("set_param", p.value.shape(), value.shape()));
        }
        p.value = value;
        Ok(())
    }

    /// Names of all node-embedding parameters.
    pub fn embedding_names(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|p| p.name.ends_with("embedding"))
            .map(|p| p.name.clone())
            .collect()
    }

    /// The embedding that generates the learned graph, if any.
    pub fn dagg_embedding(&self) -> Option<NodeEmbedding> {
        match &self.body {
            Body::Graph(g) => g
                .dagg_emb
                .map(|id| NodeEmbedding::new(self.params.get(id).value.clone()).expect("valid")),
            Body::Seq(_) => None,
        }
    }

    pub fn adaptive_graph(&self) -> Result<Option<AdaptiveGraph>> {
        self.dagg_embedding().map(|e| dagg_matrix(&e)).transpose()
    }

    /// Supports evaluated with the current parameter values.
    pub fn supports(&self) -> Result<Option<SupportSet>> {
        if let Some(g) = &self.graph {
            return Ok(Some(build_predefined_supports(g)));
        }
        match self.adaptive_graph()? {
            Some(a) => Ok(Some(crate::graph::build_supports(&a, self.config.dagg_variant)?)),
            None => Ok(None),
        }
    }

    fn check_window(&self, w: &Tensor) -> Result<()> {
        let c = &self.config;
        let want = [c.lookback, c.nodes, c.input_dim];
        if w.shape() != want {
            return Err(Error::shape("forecast window", w.shape(), &want));
        }
        Ok(())
    }

    /// Forecasts one normalized window `T_in×N×C`, returning `τ×N`.
    pub fn forward(&self, window: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward_batch(&mut tape, &[window], SupportOverride::None)?;
        let (n, tau) = (self.config.nodes, self.config.horizon);
        tape.value(out).clone().reshape(&[n, tau])?.transpose()
    }

    /// Records a batched forward pass; the result is `B×N×τ`.
    pub fn forward_batch(&self, tape: &mut Tape, windows: &[&Tensor], over: SupportOverride) -> Result<Var> {
        if windows.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        for w in windows {
            self.check_window(w)?;
        }
        match &self.body {
            Body::Graph(g) => self.forward_graph(tape, g, windows, over),
            Body::Seq(s) => self.forward_seq(tape, s, windows),
        }
    }

    /// Input of step `t` for the whole batch, `B×N×C`.
    fn step_input(&self, windows: &[&Tensor], t: usize) -> Result<Tensor> {
        let slab = self.config.nodes * self.config.input_dim;
        let mut data = Vec::with_capacity(windows.len() * slab);
        for w in windows {
            data.extend_from_slice(&w.data()[t * slab..(t + 1) * slab]);
        }
        Tensor::new(&[windows.len(), self.config.nodes, self.config.input_dim], data)
    }

    fn forward_graph(&self, tape: &mut Tape, g: &GraphNet, windows: &[&Tensor], over: SupportOverride) -> Result<Var> {
        let c = &self.config;
        let b = windows.len();
        let store = &self.params;

        let supports = match over {
            SupportOverride::Fixed(set) => {
                if set.len() != c.support_count() || set.nodes() != c.nodes {
                    return Err(Error::Config(format!(
                        "override has {} supports over {} nodes; model expects {} over {}",
                        set.len(),
                        set.nodes(),
                        c.support_count(),
                        c.nodes
                    )));
                }
                constant_support_vars(tape, set)?
            }
            SupportOverride::None => match (&self.graph, g.dagg_emb) {
                (Some(pg), _) => constant_support_vars(tape, &build_predefined_supports(pg))?,
                (None, Some(id)) => {
                    let e = tape.param(store, id)?;
                    let a = dagg_var(tape, e)?;
                    dagg_support_vars(tape, a, c.dagg_variant)?
                }
                (None, None) => unreachable!("graph variants always have supports"),
            },
        };

        // Embedding leaves are shared between the graph and the pools when
        // the model unifies them.
        let mut emb_vars: Vec<(ParamId, Var)> = Vec::new();
        let mut emb_var = |tape: &mut Tape, id: ParamId| -> Result<Var> {
            if let Some(&(_, v)) = emb_vars.iter().find(|(i, _)| *i == id) {
                return Ok(v);
            }
            let v = tape.param(store, id)?;
            emb_vars.push((id, v));
            Ok(v)
        };

        enum Gen {
            Napl([NodeParams; 3]),
            Shared([FlatShared; 3]),
        }
        let mut gens = Vec::with_capacity(g.layers.len());
        for gp in &g.layers {
            gens.push(match gp {
                GateParams::Napl { emb, cell } => {
                    let e = emb_var(tape, *emb)?;
                    let mut out = Vec::with_capacity(3);
                    for (wp, bp) in cell.pools.iter().zip(&cell.biases) {
                        let w = tape.param(store, wp.w)?;
                        let bb = tape.param(store, bp.b)?;
                        out.push(generate_node_params(tape, e, w, bb)?);
                    }
                    Gen::Napl([out[0], out[1], out[2]])
                }
                GateParams::Shared(sw) => {
                    let mut out = Vec::with_capacity(3);
                    for s in sw {
                        let th = tape.param(store, s.theta)?;
                        let bb = tape.param(store, s.bias)?;
                        out.push(flatten_shared(tape, th, bb)?);
                    }
                    Gen::Shared([out[0], out[1], out[2]])
                }
            });
        }

        let zeros = Tensor::zeros(&[b, c.nodes, c.hidden]);
        let mut hidden: Vec<Var> = (0..c.layers)
            .map(|_| tape.constant(zeros.clone()))
            .collect::<Result<_>>()?;
        for t in 0..c.lookback {
            let mut input = tape.constant(self.step_input(windows, t)?)?;
            for (l, gen) in gens.iter().enumerate() {
                let h = match gen {
                    Gen::Napl(p) => gru_step(tape, input, hidden[l], |tp, x, gate| {
                        napl_apply(tp, x, &supports, p[gate as usize])
                    })?,
                    Gen::Shared(p) => gru_step(tape, input, hidden[l], |tp, x, gate| {
                        shared_apply(tp, x, &supports, p[gate as usize])
                    })?,
                };
                hidden[l] = h;
                input = h;
            }
        }

        let top = *hidden.last().expect("at least one layer");
        let flat = tape.reshape(top, &[b * c.nodes, c.hidden])?;
        let w = tape.param(store, g.head_w)?;
        let bias = tape.param(store, g.head_b)?;
        let y = tape.matmul(flat, w)?;
        let y = tape.add_broadcast(y, bias)?;
        tape.reshape(y, &[b, c.nodes, c.horizon])
    }

    fn forward_seq(&self, tape: &mut Tape, s: &EncoderDecoder, windows: &[&Tensor]) -> Result<Var> {
        let c = &self.config;
        let rows = windows.len() * c.nodes;
        let store = &self.params;
        let flat = |tape: &mut Tape, sw: &[SharedWeights; 3]| -> Result<[FlatShared; 3]> {
            let mut out = Vec::with_capacity(3);
            for w in sw {
                let th = tape.param(store, w.theta)?;
                let bb = tape.param(store, w.bias)?;
                out.push(flatten_shared(tape, th, bb)?);
            }
            Ok([out[0], out[1], out[2]])
        };
        let enc: Vec<[FlatShared; 3]> = s.encoder.iter().map(|w| flat(tape, w)).collect::<Result<_>>()?;
        let dec: Vec<[FlatShared; 3]> = s.decoder.iter().map(|w| flat(tape, w)).collect::<Result<_>>()?;

        let zeros = Tensor::zeros(&[rows, c.hidden]);
        let mut hidden: Vec<Var> = (0..c.layers)
            .map(|_| tape.constant(zeros.clone()))
            .collect::<Result<_>>()?;
        let mut last = Tensor::zeros(&[rows, 1]);
        for t in 0..c.lookback {
            let x = self.step_input(windows, t)?.reshape(&[rows, c.input_dim])?;
            for r in 0..rows {
                last.data_mut()[r] = x.data()[r * c.input_dim];
            }
            let mut input = tape.constant(x)?;
            for (l, p) in enc.iter().enumerate() {
                hidden[l] = gru_step(tape, input, hidden[l], |tp, v, gate| dense_apply(tp, v, p[gate as usize]))?;
                input = hidden[l];
            }
        }

        let out_w = tape.param(store, s.out_w)?;
        let out_b = tape.param(store, s.out_b)?;
        let mut feed = tape.constant(last)?;
        let mut outs = Vec::with_capacity(c.horizon);
        for _ in 0..c.horizon {
            let mut input = feed;
            for (l, p) in dec.iter().enumerate() {
                hidden[l] = gru_step(tape, input, hidden[l], |tp, v, gate| dense_apply(tp, v, p[gate as usize]))?;
                input = hidden[l];
            }
            let y = tape.matmul(input, out_w)?;
            let y = tape.add_broadcast(y, out_b)?;
            outs.push(y);
            feed = y;
        }
        let y = tape.concat_last(&outs)?;
        tape.reshape(y, &[windows.len(), c.nodes, c.horizon])
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(self)
    }

    /// Rebuilds the structure from the stored config and loads values.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut model = ForecastModel::build(ck.config.clone(), ck.graph.clone())?;
        if model.params.len() != ck.params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, model layout has {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        for sp in &ck.params {
            let t = Tensor::new(&sp.shape, sp.data.clone())?;
            model.set_param(&sp.name, t)?;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(variant: Variant) -> ModelConfig {
        ModelConfig {
            nodes: 4,
            input_dim: 1,
            hidden: 3,
            layers: 2,
            embed_dim: 2,
            horizon: 2,
            lookback: 3,
            variant,
            dagg_variant: crate::graph::DaggVariant::Dagg1,
            seed: 7,
        }
    }

    fn ring(n: usize) -> PredefinedGraph {
        PredefinedGraph::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect()).unwrap()
    }

    #[test]
    fn reference_size_counts() {
        let mut c = ModelConfig::new(307);
        assert_eq!(count_params(&c), 748_810);
        c.embed_dim = 2;
        assert_eq!(count_params(&c), 150_386);
    }

    #[test]
    fn hand_counted_tiny_config() {
        let c = ModelConfig {
            nodes: 2,
            hidden: 2,
            layers: 1,
            embed_dim: 1,
            horizon: 1,
            ..ModelConfig::new(2)
        };
        assert_eq!(count_params(&c), 47);
    }

    #[test]
    fn census_matches_count_for_every_variant() {
        for v in Variant::ALL {
            let m = ForecastModel::build(tiny(v), Some(ring(4))).unwrap();
            assert_eq!(m.params().scalar_count(), count_params(m.config()), "{v}");
        }
    }

    #[test]
    fn embedding_layout() {
        let m = ForecastModel::build(tiny(Variant::Agcrn), None).unwrap();
        assert_eq!(m.embedding_names(), vec!["embedding"]);
        let m = ForecastModel::build(tiny(Variant::AgcrnI), None).unwrap();
        assert_eq!(m.embedding_names().len(), 3);
    }

    #[test]
    fn predefined_variants_need_a_graph() {
        assert!(matches!(
            ForecastModel::build(tiny(Variant::Gcgru), None),
            Err(Error::Config(_))
        ));
        assert!(ForecastModel::build(tiny(Variant::NaplGcgru), Some(ring(3))).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = ForecastModel::build(tiny(Variant::Agcrn), None).unwrap();
        let b = ForecastModel::build(tiny(Variant::Agcrn), None).unwrap();
        for (p, q) in a.params().iter().zip(b.params().iter()) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.value), bits(&q.value));
        }
        let mut c = tiny(Variant::Agcrn);
        c.seed = 8;
        let d = ForecastModel::build(c, None).unwrap();
        assert_ne!(a.params(), d.params());
    }

    #[test]
    fn zero_network_predicts_head_bias() {
        for v in Variant::ALL {
            let mut m = ForecastModel::build(tiny(v), Some(ring(4))).unwrap();
            for p in m.params_mut().iter_mut() {
                p.value.data_mut().fill(0.0);
            }
            let bias_name = if v == Variant::GruEd { "output.bias" } else { "head.bias" };
            let n = m.params().by_name(bias_name).unwrap().value.len();
            let bias = Tensor::new(&[n], (0..n).map(|i| 0.5 + i as f64).collect()).unwrap();
            m.set_param(bias_name, bias.clone()).unwrap();
            let w = Tensor::new(&[3, 4, 1], (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
            let out = m.forward(&w).unwrap();
            assert_eq!(out.shape(), &[2, 4]);
            for h in 0..2 {
                for node in 0..4 {
                    let want = if v == Variant::GruEd { bias.data()[0] } else { bias.data()[h] };
                    assert_eq!(out.get(&[h, node]), want, "{v}");
                }
            }
        }
    }

    #[test]
    fn single_step_equals_cell_then_head() {
        let mut c = tiny(Variant::Agcrn);
        c.lookback = 1;
        c.layers = 1;
        let m = ForecastModel::build(c, None).unwrap();
        let x = Tensor::new(&[4, 1], vec![0.3, -0.2, 0.9, 0.1]).unwrap();
        let out = m.forward(&x.clone().reshape(&[1, 4, 1]).unwrap()).unwrap();

        let p = m.params();
        let emb = m.dagg_embedding().unwrap();
        let sup = m.supports().unwrap().unwrap();
        let weights = CellWeights {
            pools: ["z", "r", "h"].map(|g| p.by_name(&format!("layer0.pool_w{g}")).unwrap().value.clone()),
            biases: ["z", "r", "h"].map(|g| p.by_name(&format!("layer0.pool_b{g}")).unwrap().value.clone()),
        };
        let h = cell_step(&x, &Tensor::zeros(&[4, 3]), &sup, &emb, &weights).unwrap();
        let y = crate::numerics::ops::matmul(&h, &p.by_name("head.weight").unwrap().value).unwrap();
        let y = crate::numerics::ops::add_broadcast(&y, &p.by_name("head.bias").unwrap().value).unwrap();
        assert!(out.max_abs_diff(&y.transpose().unwrap()) < 1e-14);
    }

    #[test]
    fn window_shape_is_checked() {
        let m = ForecastModel::build(tiny(Variant::Agcrn), None).unwrap();
        assert!(matches!(m.forward(&Tensor::zeros(&[2, 4, 1])), Err(Error::Shape { .. })));
    }
}
