use serde::{Deserialize, Serialize};

use crate::data::RawSeries;
use crate::stats::{mean, pop_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Mean of the observed window.
    Mean,
    /// Always zero.
    Zero,
    /// Last observed month.
    Last,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Mean, BaselineKind::Zero, BaselineKind::Last];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Mean => "mean",
            BaselineKind::Zero => "zero",
            BaselineKind::Last => "last",
        }
    }
}

pub fn baseline_predict(kind: BaselineKind, z: &RawSeries) -> f64 {
    match kind {
        BaselineKind::Mean => mean(&z.values),
        BaselineKind::Zero => 0.0,
        BaselineKind::Last => *z.values.last().expect("validated series is non-empty"),
    }
}

/// Population variance of the observed window, used as an uncertainty proxy.
pub fn input_variance_score(z: &RawSeries) -> f64 {
    pop_variance(&z.values)
}
