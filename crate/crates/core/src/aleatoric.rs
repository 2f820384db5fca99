//! Laplace likelihood, the Laplace negative log-likelihood training loss and the
//! `ELU(α, x) + 1` positivity transform for scale outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which aleatoric noise model a network is trained under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// No scale; loss is plain MAE.
    None,
    /// One input-independent scale.
    Homoscedastic,
    /// Input-dependent scale from a second network.
    Heteroscedastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpec {
    pub mode: ScaleMode,
    /// ELU α.
    pub alpha: f64,
    /// Lower bound applied to every scale after the positivity transform.
    pub floor: f64,
}

impl ScaleSpec {
    pub const DEFAULT_ALPHA: f64 = 1.0;
    pub const DEFAULT_FLOOR: f64 = 1e-3;

    pub fn new(mode: ScaleMode) -> Self {
        Self {
            mode,
            alpha: Self::DEFAULT_ALPHA,
            floor: Self::DEFAULT_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("ELU alpha must be positive, got {}", self.alpha)));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Config(format!(
                "scale floor must be positive, got {}",
                self.floor
            )));
        }
        Ok(())
    }

    /// `max(g(x), floor)`.
    pub fn positive_scale(&self, x: f64) -> f64 {
        elu_plus_one(x, self.alpha).max(self.floor)
    }
}

/// `α(eˣ − 1) + 1` for `x < 0`, `x + 1` otherwise.
#[inline]
pub fn elu_plus_one(x: f64, alpha: f64) -> f64 {
    if x < 0.0 {
        alpha * x.exp_m1() + 1.0
    } else {
        x + 1.0
    }
}

fn check_scale(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Laplace scale must be positive and finite, got {b}"
        )))
    }
}

/// Laplace density `exp(−|y − μ| / b) / (2b)`.
pub fn laplace_likelihood(y: f64, mu: f64, b: f64) -> Result<f64> {
    check_scale(b)?;
    Ok((-(y - mu).abs() / b).exp() / (2.0 * b))
}

/// Summed loss `Σ log bᵢ + |yᵢ − μᵢ| / bᵢ` (the `log 2` constant is omitted).
pub fn laplace_nll(targets: &[f64], mus: &[f64], scales: &[f64]) -> Result<f64> {
    if targets.len() != mus.len() || targets.len() != scales.len() {
        return Err(Error::Shape(format!(
            "laplace_nll lengths differ: {} targets, {} means, {} scales",
            targets.len(),
            mus.len(),
            scales.len()
        )));
    }
    let mut total = 0.0;
    for ((&y, &m), &b) in targets.iter().zip(mus).zip(scales) {
        check_scale(b)?;
        total += b.ln() + (y - m).abs() / b;
    }
    Ok(total)
}

/// Partial derivatives of [`laplace_nll`] with respect to means and scales.
pub fn laplace_nll_grad(targets: &[f64], mus: &[f64], scales: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    laplace_nll(targets, mus, scales)?;
    let d_mu = targets
        .iter()
        .zip(mus)
        .zip(scales)
        .map(|((&y, &m), &b)| crate::nn::signum0(m - y) / b)
        .collect();
    let d_b = targets
        .iter()
        .zip(mus)
        .zip(scales)
        .map(|((&y, &m), &b)| 1.0 / b - (y - m).abs() / (b * b))
        .collect();
    Ok((d_mu, d_b))
}

/// Mean absolute error.
pub fn mae_loss(targets: &[f64], preds: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Domain("MAE of an empty set is undefined".into()));
    }
    if targets.len() != preds.len() {
        return Err(Error::Shape(format!(
            "mae_loss lengths differ: {} vs {}",
            targets.len(),
            preds.len()
        )));
    }
    let sum: f64 = targets.iter().zip(preds).map(|(y, p)| (y - p).abs()).sum();
    Ok(sum / targets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn elu_plus_one_values() {
        assert_eq!(elu_plus_one(0.0, 1.0), 1.0);
        assert_eq!(elu_plus_one(2.0, 1.0), 3.0);
        assert!((elu_plus_one(-1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        // continuity at zero from the left
        assert!((elu_plus_one(-1e-12, 1.0) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn nll_examples() {
        assert_eq!(laplace_nll(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        let v = laplace_nll(&[3.0], &[1.0], &[2.0]).unwrap();
        assert!((v - (2f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn nll_rejects_nonpositive_scale_and_bad_lengths() {
        assert!(matches!(laplace_nll(&[1.0], &[1.0], &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(laplace_nll(&[1.0], &[1.0], &[-2.0]), Err(Error::Domain(_))));
        assert!(matches!(laplace_nll(&[1.0], &[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn likelihood_examples() {
        assert_eq!(laplace_likelihood(1.5, 1.5, 1.0).unwrap(), 0.5);
        assert!((laplace_likelihood(2.0, 1.0, 1.0).unwrap() - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert!(laplace_likelihood(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn per_sample_minimizer_is_abs_residual() {
        // d/db (log b + r/b) = 1/b - r/b^2 vanishes at b = r
        let (_, db) = laplace_nll_grad(&[4.0], &[1.5], &[2.5]).unwrap();
        assert!(db[0].abs() < 1e-15);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae_loss(&[1.0, 2.0], &[2.0, 0.0]).unwrap(), 1.5);
        assert!(matches!(mae_loss(&[], &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn scale_spec_validation() {
        assert!(ScaleSpec::new(ScaleMode::Heteroscedastic).validate().is_ok());
        let mut s = ScaleSpec::new(ScaleMode::Homoscedastic);
        s.floor = 0.0;
        assert!(s.validate().is_err());
        s.floor = 1e-3;
        s.alpha = -1.0;
        assert!(s.validate().is_err());
        assert_eq!(ScaleSpec::new(ScaleMode::None).positive_scale(-50.0), 1e-3);
    }

    proptest! {
        #[test]
        fn elu_plus_one_is_monotone(a in -30.0f64..30.0, d in 1e-6f64..5.0) {
            prop_assert!(elu_plus_one(a + d, 1.0) > elu_plus_one(a, 1.0));
            prop_assert!(elu_plus_one(a, 1.0) > 0.0);
        }

        #[test]
        fn nll_is_permutation_invariant(
            rows in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0.01f64..20.0), 1..20),
            rot in 0usize..20,
        ) {
            let (y, m, b): (Vec<f64>, Vec<f64>, Vec<f64>) = rows.iter().fold(
                (vec![], vec![], vec![]),
                |(mut y, mut m, mut b), r| { y.push(r.0); m.push(r.1); b.push(r.2); (y, m, b) },
            );
            let base = laplace_nll(&y, &m, &b).unwrap();
            let k = rot % y.len();
            let rotate = |v: &Vec<f64>| { let mut v = v.clone(); v.rotate_left(k); v };
            let rotated = laplace_nll(&rotate(&y), &rotate(&m), &rotate(&b)).unwrap();
            prop_assert!((base - rotated).abs() <= 1e-9 * base.abs().max(1.0));
        }

        #[test]
        fn mae_is_translation_invariant(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30),
            c in -1e3f64..1e3,
        ) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            prop_assert!((mae_loss(&y, &p).unwrap() - mae_loss(&ys, &ps).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn fixed_scale_mu_gradient_matches_mae_sign(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
            b in 0.1f64..10.0,
        ) {
            let (y, m): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let (d_mu, _) = laplace_nll_grad(&y, &m, &vec![b; y.len()]).unwrap();
            for ((g, yi), mi) in d_mu.iter().zip(&y).zip(&m) {
                // d|y - m|/dm = sign(m - y); NLL gradient is that divided by b
                prop_assert_eq!(g.signum() == (mi - yi).signum() || *g == 0.0, true);
                prop_assert!((g * b - crate::nn::signum0(mi - yi)).abs() < 1e-12);
            }
        }
    }
}
