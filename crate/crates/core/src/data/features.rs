use serde::{Deserialize, Serialize};

use crate::stats::{mean, pop_std};

/// Default guard for the scaling branch of [`pi1_normalize`].
pub const DEFAULT_THETA: f64 = 1e-6;

/// Centres the series on its mean and, when its population std reaches
/// `theta`, divides by that std.
pub fn pi1_normalize(z: &[f64], theta: f64) -> Vec<f64> {
    let m = mean(z);
    let s = pop_std(z);
    if s >= theta {
        z.iter().map(|v| (v - m) / s).collect()
    } else {
        z.iter().map(|v| v - m).collect()
    }
}

/// Network input for one series: the normalized values followed by the raw
/// mean and std of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub normalized: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl FeatureVector {
    /// `(π₁(z₁), …, π₁(z_T), mean, std)`, length `T + 2`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.normalized.len() + 2);
        v.extend_from_slice(&self.normalized);
        v.push(self.mean);
        v.push(self.std);
        v
    }

    pub fn len(&self) -> usize {
        self.normalized.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn featurize(z: &[f64], theta: f64) -> FeatureVector {
    FeatureVector {
        normalized: pi1_normalize(z, theta),
        mean: mean(z),
        std: pop_std(z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_with_population_std() {
        let n = pi1_normalize(&[1.0, 2.0, 3.0], DEFAULT_THETA);
        let s = (2.0f64 / 3.0).sqrt();
        assert!((n[0] + 1.0 / s).abs() < 1e-12);
        assert_eq!(n[1], 0.0);
        assert!((n[2] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn constant_series_takes_centering_branch() {
        assert_eq!(pi1_normalize(&[5.0, 5.0, 5.0], DEFAULT_THETA), vec![0.0; 3]);
        let f = featurize(&[0.0; 24], DEFAULT_THETA);
        assert_eq!(f.normalized, vec![0.0; 24]);
        assert_eq!((f.mean, f.std), (0.0, 0.0));
    }

    #[test]
    fn featurize_keeps_raw_moments() {
        let f = featurize(&[1.0, 2.0, 3.0], DEFAULT_THETA);
        assert_eq!(f.mean, 2.0);
        assert!((f.std - 0.816_496_580_927_726).abs() < 1e-12);
        assert_eq!(f.flatten().len(), 5);
    }

    #[test]
    fn small_spread_is_only_centered() {
        let z = [1.0, 1.0 + 1e-8, 1.0 - 1e-8];
        let n = pi1_normalize(&z, DEFAULT_THETA);
        assert!(n.iter().all(|v| v.abs() < 1e-7));
    }

    proptest! {
        #[test]
        fn shift_invariant(z in proptest::collection::vec(-100.0f64..100.0, 2..30), c in -1e3f64..1e3) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let a = pi1_normalize(&z, DEFAULT_THETA);
            let b = pi1_normalize(&shifted, DEFAULT_THETA);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn scaled_branch_is_standardized(z in proptest::collection::vec(-100.0f64..100.0, 2..30)) {
            prop_assume!(pop_std(&z) >= 1e-3);
            let n = pi1_normalize(&z, DEFAULT_THETA);
            prop_assert!(mean(&n).abs() < 1e-9);
            prop_assert!((pop_std(&n) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn std_is_homogeneous(z in proptest::collection::vec(-100.0f64..100.0, 2..30), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            let a = featurize(&z, DEFAULT_THETA).std;
            let b = featurize(&scaled, DEFAULT_THETA).std;
            prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
