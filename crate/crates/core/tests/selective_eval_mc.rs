//! Monte-Carlo and order-statistics oracles for the selective-prediction readouts.

use hetero_forecast::eval::{error_keep_curve, error_score_correlation, mae_at_keep, KEEP_GRID};
use hetero_forecast::models::PredictionRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn records(n: usize, seed: u64, score: impl Fn(f64, &mut ChaCha8Rng) -> f64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y_true: f64 = rng.gen_range(0.0..100.0);
            let err: f64 = rng.gen_range(-10.0..10.0);
            let s = score(err, &mut rng);
            PredictionRecord {
                y_hat: y_true + err,
                score: s,
                y_true,
            }
        })
        .collect()
}

fn plain_mae(rs: &[PredictionRecord]) -> f64 {
    rs.iter().map(|r| r.abs_error()).sum::<f64>() / rs.len() as f64
}

#[test]
fn independent_scores_carry_no_signal() {
    let rs = records(10_000, 1, |_, rng| rng.gen_range(0.0..1.0));
    let rho = error_score_correlation(&rs).unwrap().spearman_rho.unwrap();
    assert!(rho.abs() < 0.05, "rho {rho}");
    let full = plain_mae(&rs);
    for &k in &KEEP_GRID {
        let m = mae_at_keep(&rs, k).unwrap();
        // |err| ~ U(0, 10): sd ≈ 2.9, so 2500 kept records put the SE near 0.06
        assert!((m - full).abs() < 0.3, "k {k}: {m} vs {full}");
    }
}

#[test]
fn oracle_scores_pick_the_smallest_errors() {
    let rs = records(10_000, 2, |err, _| err.abs());
    let mut sorted: Vec<f64> = rs.iter().map(|r| r.abs_error()).collect();
    sorted.sort_by(f64::total_cmp);
    for &k in &KEEP_GRID {
        let n_keep = (k * rs.len() as f64 - 1e-9).ceil() as usize;
        let oracle = sorted[..n_keep].iter().sum::<f64>() / n_keep as f64;
        let got = mae_at_keep(&rs, k).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle, "k {k}: {got} vs {oracle}");
    }
    let rho = error_score_correlation(&rs).unwrap().spearman_rho.unwrap();
    assert!((rho - 1.0).abs() < 1e-12);
}

#[test]
fn informative_scores_beat_random_at_low_keep() {
    let noisy_oracle = records(10_000, 3, |err, rng| err.abs() + rng.gen_range(0.0..5.0));
    let random = records(10_000, 3, |_, rng| rng.gen_range(0.0..1.0));
    assert!(mae_at_keep(&noisy_oracle, 0.25).unwrap() < mae_at_keep(&random, 0.25).unwrap());
}

#[test]
fn oracle_curve_rises_to_plain_mae() {
    let rs = records(5000, 4, |err, _| err.abs());
    let curve = error_keep_curve(&rs, 100).unwrap();
    let pts: Vec<_> = curve.points.iter().filter(|p| p.mae.is_some()).collect();
    assert!(pts.windows(2).all(|w| w[1].mae.unwrap() >= w[0].mae.unwrap()));
    assert!(pts.windows(2).all(|w| w[1].keep_fraction >= w[0].keep_fraction));
    let last = pts.last().unwrap();
    assert_eq!(last.keep_fraction, 1.0);
    assert!((last.mae.unwrap() - plain_mae(&rs)).abs() <= 1e-12);
}
