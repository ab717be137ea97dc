use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ForecastModel, ModelConfig};
use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::graph::PredefinedGraph;

const FORMAT: &str = "agcrn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Self-describing JSON container for a trained model. Floats are written
/// in shortest round-trip form, so loading restores every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub graph: Option<PredefinedGraph>,
    pub normalizer: Option<Normalizer>,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model(model: &ForecastModel) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            config: model.config().clone(),
            graph: model.graph().cloned(),
            normalizer: None,
            params: model
                .params()
                .iter()
                .map(|p| StoredParam {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn with_normalizer(mut self, n: Normalizer) -> Self {
        self.normalizer = Some(n);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {:?}", ck.format)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            nodes: 3,
            hidden: 4,
            embed_dim: 2,
            horizon: 2,
            lookback: 2,
            seed: 11,
            ..ModelConfig::new(3)
        };
        for v in [Variant::Agcrn, Variant::GruEd] {
            let m = ForecastModel::build(ModelConfig { variant: v, ..cfg.clone() }, None).unwrap();
            let ck = m.to_checkpoint().with_normalizer(Normalizer { mean: 0.1, std: 3.7 });
            let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
            assert_eq!(back, ck);
            let m2 = ForecastModel::from_checkpoint(&back).unwrap();
            for (a, b) in m.params().iter().zip(m2.params().iter()) {
                assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn rejects_foreign_format() {
        let m = ForecastModel::build(ModelConfig::new(2), None).unwrap();
        let mut ck = m.to_checkpoint();
        ck.format = "other".into();
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
    }
}
