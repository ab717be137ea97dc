//! Synthetic correlated series with community structure.
//!
//! Every community owns a daily template made of a fundamental and a second
//! harmonic with community-specific phases, giving morning/evening peaks of
//! different shape. A node follows its community template scaled by its own
//! amplitude, plus a one-step lagged pull toward the other members of its
//! community and Gaussian noise:
//!
//! ```text
//! d_i(t) = scale · a_i · tmpl_c(t + φ_i) + κ · mean_{j ∈ c, j ≠ i} d_j(t−1) + ε_i(t)
//! x_i(t) = level + d_i(t)
//! ```
//!
//! Nodes in different communities never interact.

use serde::{Deserialize, Serialize};

use super::series::{RawSeries, DEFAULT_STEPS_PER_DAY};
use crate::error::{Error, Result};
use crate::graph::PredefinedGraph;
use crate::numerics::{Rng, Tensor};

const LEVEL: f64 = 200.0;
const SCALE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub nodes: usize,
    pub communities: usize,
    pub steps: usize,
    /// Absolute noise standard deviation; the template amplitude is 50.
    pub noise_std: f64,
    pub seed: u64,
    pub steps_per_day: usize,
    /// Node amplitudes are drawn from `1 ± amplitude_spread`.
    pub amplitude_spread: f64,
    /// Node phase offsets are drawn from `± phase_jitter` radians.
    pub phase_jitter: f64,
    /// Lagged within-community coupling `κ`, in `[0, 1)`.
    pub coupling: f64,
}

impl SynthSpec {
    pub fn new(nodes: usize, communities: usize, steps: usize, noise_std: f64, seed: u64) -> Self {
        SynthSpec {
            nodes,
            communities,
            steps,
            noise_std,
            seed,
            steps_per_day: DEFAULT_STEPS_PER_DAY,
            amplitude_spread: 0.3,
            phase_jitter: 0.0,
            coupling: 0.3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.communities == 0 || self.nodes < self.communities {
            return Err(Error::Config(format!(
                "need nodes >= communities >= 1, got {} nodes and {} communities",
                self.nodes, self.communities
            )));
        }
        if self.steps == 0 || self.steps_per_day == 0 {
            return Err(Error::Config("steps and steps_per_day must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.coupling) || self.noise_std < 0.0 || self.amplitude_spread < 0.0 {
            return Err(Error::Config("coupling must be in [0, 1); noise and spread non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub series: RawSeries,
    /// Community of each node.
    pub community: Vec<usize>,
    pub spec: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub spec: SynthSpec,
    pub community: Vec<usize>,
}

impl SynthData {
    pub fn meta(&self) -> SynthMeta {
        SynthMeta {
            spec: self.spec.clone(),
            community: self.community.clone(),
        }
    }

    /// A road-like chain linking consecutive node indices.
    pub fn chain_graph(&self) -> PredefinedGraph {
        let n = self.community.len();
        PredefinedGraph::new(n, (1..n).map(|i| (i - 1, i, 1.0)).collect()).expect("valid chain")
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let (n, c, t_len) = (spec.nodes, spec.communities, spec.steps);
    let mut rng = Rng::new(spec.seed);
    let community: Vec<usize> = (0..n).map(|i| i * c / n).collect();

    let tau = std::f64::consts::TAU;
    let phase: Vec<f64> = (0..c).map(|k| std::f64::consts::PI * k as f64 / c as f64).collect();
    let phase2: Vec<f64> = (0..c).map(|k| 2.0 * phase[k] + 1.3 * k as f64).collect();
    let amp: Vec<f64> = (0..n)
        .map(|_| 1.0 + spec.amplitude_spread * rng.uniform(-1.0, 1.0))
        .collect();
    let jitter: Vec<f64> = (0..n)
        .map(|_| spec.phase_jitter * rng.uniform(-1.0, 1.0))
        .collect();
    let members: Vec<Vec<usize>> = (0..c)
        .map(|k| (0..n).filter(|&i| community[i] == k).collect())
        .collect();

    let mut prev = vec![0.0; n];
    let mut data = Vec::with_capacity(t_len * n);
    for t in 0..t_len {
        let theta = tau * (t % spec.steps_per_day) as f64 / spec.steps_per_day as f64;
        let mut cur = vec![0.0; n];
        for i in 0..n {
            let k = community[i];
            let x = theta + jitter[i];
            let f = (k + 1) as f64;
            let tmpl = (f * x + phase[k]).sin() + 0.5 * (2.0 * f * x + phase2[k]).sin();
            let others = &members[k];
            let pull = if others.len() > 1 {
                others.iter().filter(|&&j| j != i).map(|&j| prev[j]).sum::<f64>() / (others.len() - 1) as f64
            } else {
                0.0
            };
            let noise = if spec.noise_std > 0.0 {
                spec.noise_std * rng.normal()
            } else {
                0.0
            };
            cur[i] = SCALE * amp[i] * tmpl + spec.coupling * pull + noise;
        }
        data.extend(cur.iter().map(|d| LEVEL + d));
        prev = cur;
    }
    let series = RawSeries::from_values(Tensor::new(&[t_len, n], data)?, spec.steps_per_day)?;
    Ok(SynthData {
        series,
        community,
        spec: spec.clone(),
    })
}
