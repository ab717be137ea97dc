//! Graph supports: the learned adaptive adjacency and the normalized
//! pre-defined adjacency used by the baseline variants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ops, Tape, Tensor, Var};

/// Learnable `N×d` node embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding {
    e: Tensor,
}

impl NodeEmbedding {
    pub fn new(e: Tensor) -> Result<Self> {
        match e.shape() {
            &[n, d] if n >= 2 && d >= 1 => Ok(NodeEmbedding { e }),
            s => Err(Error::Config(format!(
                "node embedding must be N×d with N >= 2 and d >= 1, got {s:?}"
            ))),
        }
    }

    pub fn nodes(&self) -> usize {
        self.e.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.e.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.e
    }
}

/// Row-stochastic `softmax(relu(E·Eᵀ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveGraph {
    pub a_tilde: Tensor,
}

/// Which supports accompany the learned graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DaggVariant {
    /// `[Ã]`
    DaggR,
    /// `[I, Ã]`
    #[default]
    #[serde(rename = "dagg_1")]
    Dagg1,
    /// `[I, Ã, Ã²]`
    #[serde(rename = "dagg_2")]
    Dagg2,
}

impl DaggVariant {
    pub fn support_count(self) -> usize {
        match self {
            DaggVariant::DaggR => 1,
            DaggVariant::Dagg1 => 2,
            DaggVariant::Dagg2 => 3,
        }
    }
}

impl std::str::FromStr for DaggVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dagg_r" | "dagg-r" => Ok(DaggVariant::DaggR),
            "dagg_1" | "dagg-1" => Ok(DaggVariant::Dagg1),
            "dagg_2" | "dagg-2" => Ok(DaggVariant::Dagg2),
            _ => Err(Error::Config(format!("unknown DAGG variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    Dagg(DaggVariant),
    Predefined,
}

impl SupportKind {
    pub fn support_count(self) -> usize {
        match self {
            SupportKind::Dagg(v) => v.support_count(),
            SupportKind::Predefined => 2,
        }
    }
}

/// Ordered `N×N` supports for one graph convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub supports: Vec<Tensor>,
    pub kind: SupportKind,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.supports[0].shape()[0]
    }

    /// Only the identity support.
    pub fn identity(n: usize) -> Self {
        SupportSet {
            supports: vec![Tensor::eye(n)],
            kind: SupportKind::Dagg(DaggVariant::DaggR),
        }
    }
}

/// Undirected weighted edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredefinedGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl PredefinedGraph {
    pub fn new(nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u >= nodes || v >= nodes {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) out of range for {nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::Data(format!("self-loop on node {u} in edge list")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Data(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
        }
        Ok(PredefinedGraph { nodes, edges })
    }

    /// Reads `u,v,weight` rows; a non-numeric first row is treated as a header.
    pub fn load_csv(path: impl AsRef<Path>, nodes: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut edges = Vec::new();
        for (row, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 3 {
                return Err(Error::Parse {
                    row,
                    col: cells.len(),
                    msg: "expected u,v,weight".into(),
                });
            }
            let u = cells[0].parse::<usize>();
            if row == 0 && u.is_err() {
                continue;
            }
            let parse_err = |col: usize, c: &str| Error::Parse {
                row,
                col,
                msg: format!("not a number: {c:?}"),
            };
            let u = u.map_err(|_| parse_err(0, cells[0]))?;
            let v = cells[1].parse::<usize>().map_err(|_| parse_err(1, cells[1]))?;
            let w = cells[2].parse::<f64>().map_err(|_| parse_err(2, cells[2]))?;
            edges.push((u, v, w));
        }
        Self::new(nodes, edges)
    }

    pub fn adjacency(&self) -> Tensor {
        let n = self.nodes;
        let mut a = Tensor::zeros(&[n, n]);
        for &(u, v, w) in &self.edges {
            let d = a.data_mut();
            d[u * n + v] += w;
            d[v * n + u] += w;
        }
        a
    }

    /// `D^{-1/2} A D^{-1/2}`; rows of zero-degree nodes stay zero.
    pub fn normalized(&self) -> Tensor {
        let n = self.nodes;
        let a = self.adjacency();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| {
                let deg: f64 = a.row(i).iter().sum();
                if deg > 0.0 {
                    1.0 / deg.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut out = a;
        let d = out.data_mut();
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        out
    }
}

/// Computes `softmax(relu(E·Eᵀ))`.
pub fn dagg_matrix(emb: &NodeEmbedding) -> Result<AdaptiveGraph> {
    let e = emb.tensor();
    let gram = ops::matmul(e, &e.transpose()?)?;
    let a_tilde = ops::softmax_rows(&ops::apply_unary(&gram, ops::Unary::Relu))?;
    a_tilde.ensure_finite("dagg_matrix")?;
    Ok(AdaptiveGraph { a_tilde })
}

/// Recorded version of [`dagg_matrix`].
pub fn dagg_var(tape: &mut Tape, e: Var) -> Result<Var> {
    let et = tape.transpose(e)?;
    let gram = tape.matmul(e, et)?;
    let r = tape.relu(gram)?;
    tape.softmax_rows(r)
}

pub fn build_supports(a: &AdaptiveGraph, variant: DaggVariant) -> Result<SupportSet> {
    let at = &a.a_tilde;
    let n = at.shape()[0];
    let supports = match variant {
        DaggVariant::DaggR => vec![at.clone()],
        DaggVariant::Dagg1 => vec![Tensor::eye(n), at.clone()],
        DaggVariant::Dagg2 => vec![Tensor::eye(n), at.clone(), ops::matmul(at, at)?],
    };
    Ok(SupportSet {
        supports,
        kind: SupportKind::Dagg(variant),
    })
}

pub fn build_predefined_supports(g: &PredefinedGraph) -> SupportSet {
    SupportSet {
        supports: vec![Tensor::eye(g.nodes), g.normalized()],
        kind: SupportKind::Predefined,
    }
}

/// Recorded version of [`build_supports`].
pub fn dagg_support_vars(tape: &mut Tape, a_tilde: Var, variant: DaggVariant) -> Result<Vec<Var>> {
    let n = tape.value(a_tilde).shape()[0];
    Ok(match variant {
        DaggVariant::DaggR => vec![a_tilde],
        DaggVariant::Dagg1 => vec![tape.constant(Tensor::eye(n))?, a_tilde],
        DaggVariant::Dagg2 => {
            let eye = tape.constant(Tensor::eye(n))?;
            let sq = tape.matmul(a_tilde, a_tilde)?;
            vec![eye, a_tilde, sq]
        }
    })
}

pub fn constant_support_vars(tape: &mut Tape, set: &SupportSet) -> Result<Vec<Var>> {
    set.supports.iter().map(|s| tape.constant(s.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[Vec<f64>]) -> NodeEmbedding {
        NodeEmbedding::new(Tensor::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identical_embeddings_give_uniform_rows() {
        let a = dagg_matrix(&emb(&[vec![1.0], vec![1.0]])).unwrap();
        for v in a.a_tilde.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_rows() {
        let a = dagg_matrix(&emb(&[vec![1.0], vec![0.0]])).unwrap();
        let e = std::f64::consts::E;
        assert!((a.a_tilde.get(&[0, 0]) - e / (e + 1.0)).abs() < 1e-12);
        assert!((a.a_tilde.get(&[0, 0]) - 0.73106).abs() < 1e-5);
        assert!((a.a_tilde.get(&[0, 1]) - 0.26894).abs() < 1e-5);
        assert_eq!(a.a_tilde.row(1), &[0.5, 0.5]);

        let a = dagg_matrix(&emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])).unwrap();
        let z = 2.0 * e + e * e;
        let expect = [e / z, e / z, e * e / z];
        for (got, want) in a.a_tilde.row(2).iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((expect[0] - 0.21194).abs() < 1e-5);
        assert!((expect[2] - 0.57612).abs() < 1e-5);
    }

    #[test]
    fn support_variants() {
        let a = dagg_matrix(&emb(&[vec![1.0], vec![1.0]])).unwrap();
        let s1 = build_supports(&a, DaggVariant::Dagg1).unwrap();
        assert_eq!(s1.len(), 2);
        assert_eq!(s1.supports[0], Tensor::eye(2));
        assert_eq!(build_supports(&a, DaggVariant::DaggR).unwrap().len(), 1);
        let s2 = build_supports(&a, DaggVariant::Dagg2).unwrap();
        assert_eq!(s2.len(), 3);
        assert_eq!(s2.supports[2], Tensor::full(&[2, 2], 0.5));
        assert_eq!(s2.supports[2], ops::matmul(&s2.supports[1], &s2.supports[1]).unwrap());
    }

    #[test]
    fn path_graph_normalization() {
        let g = PredefinedGraph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = build_predefined_supports(&g);
        assert_eq!(s.len(), 2);
        let norm = &s.supports[1];
        assert!((norm.get(&[0, 1]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((norm.get(&[1, 0]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(norm.get(&[0, 2]), 0.0);
    }

    #[test]
    fn isolated_node_gets_zero_row() {
        let g = PredefinedGraph::new(3, vec![(0, 1, 2.0)]).unwrap();
        let norm = g.normalized();
        assert_eq!(norm.row(2), &[0.0, 0.0, 0.0]);
        assert!(norm.is_finite());
    }

    #[test]
    fn edge_list_validation() {
        assert!(PredefinedGraph::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(PredefinedGraph::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(PredefinedGraph::new(2, vec![(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn edge_list_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "from,to,cost\n0,1,1.5\n1,2,1\n").unwrap();
        let g = PredefinedGraph::load_csv(&p, 3).unwrap();
        assert_eq!(g.edges, vec![(0, 1, 1.5), (1, 2, 1.0)]);
        std::fs::write(&p, "0,1,x\n").unwrap();
        assert!(matches!(
            PredefinedGraph::load_csv(&p, 3),
            Err(Error::Parse { row: 0, col: 2, .. })
        ));
    }

    #[test]
    fn embedding_shape_checked() {
        assert!(NodeEmbedding::new(Tensor::zeros(&[1, 2])).is_err());
        assert!(NodeEmbedding::new(Tensor::zeros(&[3])).is_err());
    }
}
