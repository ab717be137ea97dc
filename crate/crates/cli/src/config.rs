//! TOML run configuration and its command-line overrides.

use std::path::{Path, PathBuf};

use agcrn::data::DEFAULT_STEPS_PER_DAY;
use agcrn::graph::DaggVariant;
use agcrn::model::{ModelConfig, Variant};
use agcrn::training::TrainConfig;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_day: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dagg_variant: Option<DaggVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lookback: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
}

/// Flags sharing the names of configuration keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edge-list CSV `u,v,weight` for pre-defined-graph variants.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub steps_per_day: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long, value_parser = parse_dagg)]
    pub dagg_variant: Option<DaggVariant>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: agcrn::Error| e.to_string())
}

fn parse_dagg(s: &str) -> Result<DaggVariant, String> {
    s.parse().map_err(|e: agcrn::Error| e.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Reads `--config` if given, then applies every flag that was set.
    pub fn from_overrides(o: &Overrides) -> Result<Self, CliError> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        c.apply(o);
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.io.data, &o.data);
        set(&mut self.io.graph, &o.graph);
        set(&mut self.io.out, &o.out);
        set(&mut self.io.nodes, &o.nodes);
        set(&mut self.io.steps_per_day, &o.steps_per_day);
        set(&mut self.model.variant, &o.variant);
        set(&mut self.model.dagg_variant, &o.dagg_variant);
        set(&mut self.model.embed_dim, &o.embed_dim);
        set(&mut self.model.hidden, &o.hidden);
        set(&mut self.model.layers, &o.layers);
        set(&mut self.model.horizon, &o.horizon);
        set(&mut self.model.lookback, &o.lookback);
        set(&mut self.train.lr, &o.lr);
        set(&mut self.train.batch_size, &o.batch_size);
        set(&mut self.train.epochs, &o.epochs);
        set(&mut self.train.patience, &o.patience);
    }

    pub fn steps_per_day(&self) -> usize {
        self.io.steps_per_day.unwrap_or(DEFAULT_STEPS_PER_DAY)
    }

    /// Model configuration for `nodes` nodes, defaults filled in.
    pub fn model_config(&self, nodes: usize) -> ModelConfig {
        let d = ModelConfig::new(nodes);
        let m = &self.model;
        ModelConfig {
            nodes,
            input_dim: 1,
            hidden: m.hidden.unwrap_or(d.hidden),
            layers: m.layers.unwrap_or(d.layers),
            embed_dim: m.embed_dim.unwrap_or(d.embed_dim),
            horizon: m.horizon.unwrap_or(d.horizon),
            lookback: m.lookback.unwrap_or(d.lookback),
            variant: m.variant.unwrap_or(d.variant),
            dagg_variant: m.dagg_variant.unwrap_or(d.dagg_variant),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            lr: self.train.lr.unwrap_or(d.lr),
            batch_size: self.train.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.train.epochs.unwrap_or(d.max_epochs),
            patience: self.train.patience.unwrap_or(d.patience),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    /// Every key set to the value actually used.
    pub fn effective(&self, nodes: usize) -> RunConfig {
        let m = self.model_config(nodes);
        let t = self.train_config();
        RunConfig {
            seed: Some(m.seed),
            io: IoSection {
                nodes: Some(nodes),
                steps_per_day: Some(self.steps_per_day()),
                ..self.io.clone()
            },
            model: ModelSection {
                variant: Some(m.variant),
                dagg_variant: Some(m.dagg_variant),
                embed_dim: Some(m.embed_dim),
                hidden: Some(m.hidden),
                layers: Some(m.layers),
                horizon: Some(m.horizon),
                lookback: Some(m.lookback),
            },
            train: TrainSection {
                lr: Some(t.lr),
                batch_size: Some(t.batch_size),
                epochs: Some(t.max_epochs),
                patience: Some(t.patience),
            },
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::runtime(format!("cannot render config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\nhiden = 3\n").is_err());
        assert!(RunConfig::parse("colour = 1\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
    }

    #[test]
    fn sections_parse_and_flags_win() {
        let mut c = RunConfig::parse(
            "seed = 4\n[model]\nvariant = \"gcgru\"\nhidden = 8\ndagg_variant = \"dagg_2\"\n[train]\nlr = 0.1\n",
        )
        .unwrap();
        assert_eq!(c.model.variant, Some(Variant::Gcgru));
        assert_eq!(c.model.dagg_variant, Some(DaggVariant::Dagg2));
        c.apply(&Overrides {
            hidden: Some(16),
            seed: Some(9),
            ..Overrides::default()
        });
        let m = c.model_config(5);
        assert_eq!((m.hidden, m.seed, m.layers), (16, 9, 2));
        assert_eq!(c.train_config().lr, 0.1);
    }

    #[test]
    fn effective_config_round_trips() {
        let c = RunConfig::parse("[io]\ndata = \"x.csv\"\n").unwrap();
        let eff = c.effective(7);
        let back = RunConfig::parse(&eff.to_toml().unwrap()).unwrap();
        assert_eq!(back, eff);
        assert_eq!(back.io.nodes, Some(7));
        assert_eq!(back.train.epochs, Some(100));
    }
}
