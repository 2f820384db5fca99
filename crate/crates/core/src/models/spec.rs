use serde::{Deserialize, Serialize};

use crate::aleatoric::{ScaleMode, ScaleSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Dense,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    /// MAE-trained point forecaster.
    Point,
    /// Laplace NLL with one learned scale.
    Homoscedastic,
    /// Laplace NLL with a second network for the scale.
    Heteroscedastic,
    /// MAE-trained with dropout, sampled at prediction time.
    McDropout,
}

impl Uncertainty {
    pub const ALL: [Uncertainty; 4] = [
        Uncertainty::Point,
        Uncertainty::Homoscedastic,
        Uncertainty::Heteroscedastic,
        Uncertainty::McDropout,
    ];

    pub fn scale_mode(self) -> ScaleMode {
        match self {
            Uncertainty::Point | Uncertainty::McDropout => ScaleMode::None,
            Uncertainty::Homoscedastic => ScaleMode::Homoscedastic,
            Uncertainty::Heteroscedastic => ScaleMode::Heteroscedastic,
        }
    }
}

pub const FULL_DENSE: [usize; 2] = [128, 64];
pub const FULL_LSTM: [usize; 2] = [128, 128];
pub const FULL_LSTM_HEAD: [usize; 1] = [128];
pub const DESK_DENSE: [usize; 2] = [32, 16];
pub const DESK_LSTM: [usize; 2] = [32, 32];
pub const DESK_LSTM_HEAD: [usize; 1] = [32];
pub const DEFAULT_DROPOUT: f64 = 0.5;

/// Architecture of one forecaster. For the dense backbone `dense` lists the
/// hidden ReLU layers; for the LSTM backbone `lstm` lists the recurrent layers
/// and `dense` the ReLU head on top of them. Every tower ends in one linear unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub backbone: Backbone,
    pub uncertainty: Uncertainty,
    #[serde(default)]
    pub dense: Vec<usize>,
    #[serde(default)]
    pub lstm: Vec<usize>,
    #[serde(default)]
    pub dropout_p: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_alpha() -> f64 {
    ScaleSpec::DEFAULT_ALPHA
}

fn default_floor() -> f64 {
    ScaleSpec::DEFAULT_FLOOR
}

impl ModelSpec {
    /// Full-size architecture: dense 128→64, or 2×LSTM(128) + dense 128.
    pub fn full(backbone: Backbone, uncertainty: Uncertainty) -> Self {
        let (dense, lstm) = match backbone {
            Backbone::Dense => (FULL_DENSE.to_vec(), vec![]),
            Backbone::Lstm => (FULL_LSTM_HEAD.to_vec(), FULL_LSTM.to_vec()),
        };
        Self::with_sizes(backbone, uncertainty, dense, lstm)
    }

    /// Shrunken architecture for laptop-scale runs: dense 32→16, or 2×LSTM(32) + dense 32.
    pub fn desk(backbone: Backbone, uncertainty: Uncertainty) -> Self {
        let (dense, lstm) = match backbone {
            Backbone::Dense => (DESK_DENSE.to_vec(), vec![]),
            Backbone::Lstm => (DESK_LSTM_HEAD.to_vec(), DESK_LSTM.to_vec()),
        };
        Self::with_sizes(backbone, uncertainty, dense, lstm)
    }

    pub fn with_sizes(backbone: Backbone, uncertainty: Uncertainty, dense: Vec<usize>, lstm: Vec<usize>) -> Self {
        Self {
            backbone,
            uncertainty,
            dense,
            lstm,
            dropout_p: if uncertainty == Uncertainty::McDropout {
                DEFAULT_DROPOUT
            } else {
                0.0
            },
            alpha: ScaleSpec::DEFAULT_ALPHA,
            floor: ScaleSpec::DEFAULT_FLOOR,
        }
    }

    pub fn scale_spec(&self) -> ScaleSpec {
        ScaleSpec {
            mode: self.uncertainty.scale_mode(),
            alpha: self.alpha,
            floor: self.floor,
        }
    }

    /// Table-style name, e.g. `DenseHet` or `LSTMDrop`.
    pub fn name(&self) -> String {
        let base = match self.backbone {
            Backbone::Dense => "Dense",
            Backbone::Lstm => "LSTM",
        };
        let suffix = match self.uncertainty {
            Uncertainty::Point => "",
            Uncertainty::Homoscedastic => "Hom",
            Uncertainty::Heteroscedastic => "Het",
            Uncertainty::McDropout => "Drop",
        };
        format!("{base}{suffix}")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dense.iter().chain(&self.lstm).any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.backbone == Backbone::Lstm && self.lstm.is_empty() {
            return Err(Error::Config("an LSTM backbone needs at least one LSTM layer".into()));
        }
        if self.backbone == Backbone::Dense && !self.lstm.is_empty() {
            return Err(Error::Config("a dense backbone takes no LSTM layers".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        self.scale_spec().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_defaults() {
        let s = ModelSpec::full(Backbone::Dense, Uncertainty::Heteroscedastic);
        assert_eq!(s.name(), "DenseHet");
        assert_eq!(s.dense, vec![128, 64]);
        let l = ModelSpec::desk(Backbone::Lstm, Uncertainty::McDropout);
        assert_eq!(l.name(), "LSTMDrop");
        assert_eq!(l.dropout_p, 0.5);
        assert_eq!((l.lstm.clone(), l.dense.clone()), (vec![32, 32], vec![32]));
    }

    #[test]
    fn validation() {
        let mut s = ModelSpec::desk(Backbone::Dense, Uncertainty::Point);
        assert!(s.validate().is_ok());
        s.dropout_p = 1.0;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::desk(Backbone::Lstm, Uncertainty::Point);
        s.lstm.clear();
        assert!(s.validate().is_err());
        let mut s = ModelSpec::desk(Backbone::Dense, Uncertainty::Point);
        s.dense = vec![0];
        assert!(s.validate().is_err());
    }
}
