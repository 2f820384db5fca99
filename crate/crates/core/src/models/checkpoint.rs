//! JSON checkpoints: architecture, fixed scaler, every named parameter as a
//! flat row-major array, the RNG seed and the training configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Model, Scaler};
use super::spec::ModelSpec;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::Param;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub name: String,
    pub input_dim: usize,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub architecture: Architecture,
    pub scaler: Scaler,
    pub parameters: Vec<Param>,
    pub rng_seed: u64,
    pub training_config: TrainConfig,
}

impl Checkpoint {
    pub fn from_model(model: &Model, training_config: &TrainConfig) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            architecture: Architecture {
                name: model.name(),
                input_dim: model.input_dim(),
                spec: model.spec().clone(),
            },
            scaler: model.scaler().clone(),
            parameters: model.params().as_slice().to_vec(),
            rng_seed: model.seed(),
            training_config: training_config.clone(),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint schema_version {}",
                self.schema_version
            )));
        }
        Model::from_parts(
            &self.architecture.spec,
            self.architecture.input_dim,
            self.rng_seed,
            self.scaler.clone(),
            &self.parameters,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build, Backbone, Uncertainty};

    #[test]
    fn round_trip_preserves_predictions() {
        let spec = ModelSpec::desk(Backbone::Lstm, Uncertainty::Heteroscedastic);
        let mut m = build(&spec, 6, 12).unwrap();
        m.set_scaler(Scaler {
            feature_mean: vec![0.1; 6],
            feature_scale: vec![2.0; 6],
            target_mean: 40.0,
            target_scale: 9.5,
        })
        .unwrap();
        let ck = Checkpoint::from_model(&m, &TrainConfig::default());
        let back: Checkpoint = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let m2 = back.to_model().unwrap();
        let x = [0.3, -0.1, 1.2, -1.4, 55.0, 12.0];
        assert_eq!(m.predict(&x).unwrap(), m2.predict(&x).unwrap());
    }

    #[test]
    fn rejects_tampered_checkpoints() {
        let m = build(&ModelSpec::desk(Backbone::Dense, Uncertainty::Point), 5, 1).unwrap();
        let mut ck = Checkpoint::from_model(&m, &TrainConfig::default());
        ck.parameters[0].data.pop();
        assert!(ck.to_model().is_err());
        let mut ck = Checkpoint::from_model(&m, &TrainConfig::default());
        ck.schema_version = 99;
        assert!(ck.to_model().is_err());
        let mut v = serde_json::to_value(Checkpoint::from_model(&m, &TrainConfig::default())).unwrap();
        v["extra"] = serde_json::json!(true);
        assert!(serde_json::from_value::<Checkpoint>(v).is_err());
    }
}
