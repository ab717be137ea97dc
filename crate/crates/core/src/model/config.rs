use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DaggVariant, SupportKind};

/// Model family members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Node-adaptive pools over learned supports with one unified embedding.
    #[default]
    Agcrn,
    /// As `Agcrn` but with an independent embedding per layer and for the graph.
    AgcrnI,
    /// Shared-weight graph convolutions over a pre-defined graph.
    Gcgru,
    /// Node-adaptive pools over a pre-defined graph.
    NaplGcgru,
    /// Shared-weight graph convolutions over learned supports.
    DaggGcgru,
    /// Per-node GRU encoder-decoder without any graph.
    GruEd,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Agcrn,
        Variant::AgcrnI,
        Variant::Gcgru,
        Variant::NaplGcgru,
        Variant::DaggGcgru,
        Variant::GruEd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Agcrn => "agcrn",
            Variant::AgcrnI => "agcrn_i",
            Variant::Gcgru => "gcgru",
            Variant::NaplGcgru => "napl_gcgru",
            Variant::DaggGcgru => "dagg_gcgru",
            Variant::GruEd => "gru_ed",
        }
    }

    pub fn needs_predefined_graph(self) -> bool {
        matches!(self, Variant::Gcgru | Variant::NaplGcgru)
    }

    pub fn uses_dagg(self) -> bool {
        matches!(self, Variant::Agcrn | Variant::AgcrnI | Variant::DaggGcgru)
    }

    pub fn node_adaptive(self) -> bool {
        matches!(self, Variant::Agcrn | Variant::AgcrnI | Variant::NaplGcgru)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nodes: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub embed_dim: usize,
    pub horizon: usize,
    pub lookback: usize,
    pub variant: Variant,
    pub dagg_variant: DaggVariant,
    pub seed: u64,
}

impl ModelConfig {
    /// Two layers of 64 hidden units, one hour in, one hour out at 5-minute
    /// resolution.
    pub fn new(nodes: usize) -> Self {
        ModelConfig {
            nodes,
            input_dim: 1,
            hidden: 64,
            layers: 2,
            embed_dim: 10,
            horizon: 12,
            lookback: 12,
            variant: Variant::Agcrn,
            dagg_variant: DaggVariant::Dagg1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nodes", self.nodes),
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("embed_dim", self.embed_dim),
            ("horizon", self.horizon),
            ("lookback", self.lookback),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.nodes < 2 {
            return Err(Error::Config("at least two nodes are required".into()));
        }
        Ok(())
    }

    pub fn support_kind(&self) -> Option<SupportKind> {
        match self.variant {
            Variant::GruEd => None,
            v if v.needs_predefined_graph() => Some(SupportKind::Predefined),
            _ => Some(SupportKind::Dagg(self.dagg_variant)),
        }
    }

    /// Number of supports `K` of every graph convolution; 0 for the
    /// graph-free encoder-decoder.
    pub fn support_count(&self) -> usize {
        self.support_kind().map_or(0, SupportKind::support_count)
    }

    /// Input width of recurrent layer `l`.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}
