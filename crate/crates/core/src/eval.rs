//! Selective prediction: error over the forecasts whose uncertainty score
//! falls below a threshold, error-versus-keep curves, fixed-keep readouts and
//! the rank correlation between error and score.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::models::PredictionRecord;
use crate::stats::spearman;

/// Keep fractions reported in comparison matrices.
pub const KEEP_GRID: [f64; 6] = [0.25, 0.41, 0.50, 0.75, 0.995, 1.0];

/// Error over the records with `score < kappa`. `mae` is `None` when nothing is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub keep_fraction: f64,
    pub mae: Option<f64>,
    pub n_kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorKeepCurve {
    /// Ordered by threshold, hence by non-decreasing keep fraction.
    pub points: Vec<CurvePoint>,
    pub n_total: usize,
}

fn non_empty(records: &[PredictionRecord]) -> Result<()> {
    if records.is_empty() {
        Err(Error::Domain("no prediction records".into()))
    } else {
        Ok(())
    }
}

pub fn mae_at_threshold(records: &[PredictionRecord], kappa: f64) -> Result<CurvePoint> {
    non_empty(records)?;
    let mut sum = 0.0;
    let mut kept = 0usize;
    for r in records.iter().filter(|r| r.score < kappa) {
        sum += r.abs_error();
        kept += 1;
    }
    Ok(CurvePoint {
        threshold: kappa,
        keep_fraction: kept as f64 / records.len() as f64,
        mae: (kept > 0).then(|| sum / kept as f64),
        n_kept: kept,
    })
}

/// Sweeps the threshold over the sorted distinct scores plus `+∞`,
/// evenly subsampled to at most `n_points` thresholds (both ends always included).
pub fn error_keep_curve(records: &[PredictionRecord], n_points: usize) -> Result<ErrorKeepCurve> {
    error_keep_curve_with(records, n_points, ExecMode::default())
}

pub fn error_keep_curve_with(records: &[PredictionRecord], n_points: usize, mode: ExecMode) -> Result<ErrorKeepCurve> {
    non_empty(records)?;
    if n_points < 2 {
        return Err(Error::Domain(format!(
            "a curve needs at least 2 points, got {n_points}"
        )));
    }
    let mut thresholds: Vec<f64> = records.iter().map(|r| r.score).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    if thresholds.len() > n_points {
        let m = thresholds.len() - 1;
        let mut picked: Vec<f64> = (0..n_points)
            .map(|j| thresholds[(j * m + (n_points - 1) / 2) / (n_points - 1)])
            .collect();
        picked.dedup();
        thresholds = picked;
    }
    let points = mode.try_map_range(thresholds.len(), |j| mae_at_threshold(records, thresholds[j]))?;
    Ok(ErrorKeepCurve {
        points,
        n_total: records.len(),
    })
}

/// Error over the `⌈k · N⌉` lowest-score records; ties keep input order.
pub fn mae_at_keep(records: &[PredictionRecord], k_fraction: f64) -> Result<f64> {
    non_empty(records)?;
    if !(k_fraction > 0.0 && k_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "keep fraction must lie in (0, 1], got {k_fraction}"
        )));
    }
    let n = records.len();
    // tolerance absorbs products like 0.41 * 100 = 41.000000000000007
    let n_keep = ((k_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[a].score.total_cmp(&records[b].score));
    let mut kept = order[..n_keep].to_vec();
    kept.sort_unstable();
    let sum: f64 = kept.iter().map(|&i| records[i].abs_error()).sum();
    Ok(sum / n_keep as f64)
}

/// `(|error|, score)` pairs plus their Spearman correlation (`None` when a side has all-equal ranks).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScoreCorrelation {
    pub spearman_rho: Option<f64>,
    pub scatter: Vec<(f64, f64)>,
}

pub fn error_score_correlation(records: &[PredictionRecord]) -> Result<ErrorScoreCorrelation> {
    if records.len() < 3 {
        return Err(Error::Domain(format!(
            "correlation needs at least 3 records, got {}",
            records.len()
        )));
    }
    let errors: Vec<f64> = records.iter().map(PredictionRecord::abs_error).collect();
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    Ok(ErrorScoreCorrelation {
        spearman_rho: spearman(&errors, &scores),
        scatter: errors.into_iter().zip(scores).collect(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Columns `threshold,keep_fraction,mae,n_kept`; an empty `mae` marks an empty selection.
pub fn write_curve_csv<W: Write>(writer: W, curve: &ErrorKeepCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "keep_fraction", "mae", "n_kept"])?;
    for p in &curve.points {
        w.write_record([
            format!("{}", p.threshold),
            format!("{}", p.keep_fraction),
            fmt_opt(p.mae),
            p.n_kept.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `abs_error,score`.
pub fn write_scatter_csv<W: Write>(writer: W, scatter: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["abs_error", "score"])?;
    for (e, s) in scatter {
        w.write_record([format!("{e}"), format!("{s}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aleatoric::mae_loss;
    use proptest::prelude::*;

    fn rec(err: f64, score: f64) -> PredictionRecord {
        PredictionRecord {
            y_hat: 0.0,
            score,
            y_true: err,
        }
    }

    #[test]
    fn threshold_examples() {
        let rs = [rec(1.0, 0.1), rec(9.0, 0.9)];
        let p = mae_at_threshold(&rs, 0.5).unwrap();
        assert_eq!((p.mae, p.keep_fraction), (Some(1.0), 0.5));
        let all = mae_at_threshold(&rs, 0.91).unwrap();
        assert_eq!((all.mae, all.keep_fraction), (Some(5.0), 1.0));
        let none = mae_at_threshold(&rs, 0.1).unwrap();
        assert_eq!((none.mae, none.keep_fraction, none.n_kept), (None, 0.0, 0));
        assert!(mae_at_threshold(&[], 1.0).is_err());
    }

    #[test]
    fn constant_scores_give_two_points() {
        let rs: Vec<_> = (0..10).map(|i| rec(i as f64, 3.0)).collect();
        let c = error_keep_curve(&rs, 50).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[0].mae, None);
        assert_eq!(c.points[1].mae, Some(4.5));
        assert_eq!(c.points[1].keep_fraction, 1.0);
    }

    #[test]
    fn subsampled_curve_keeps_endpoints() {
        let rs: Vec<_> = (0..1000).map(|i| rec((i % 17) as f64, i as f64)).collect();
        let c = error_keep_curve(&rs, 11).unwrap();
        assert_eq!(c.points.len(), 11);
        assert_eq!(c.points[0].n_kept, 0);
        assert_eq!(c.points.last().unwrap().keep_fraction, 1.0);
        assert!(error_keep_curve(&rs, 1).is_err());
    }

    #[test]
    fn keep_examples() {
        let rs = [rec(4.0, 0.3), rec(1.0, 0.1), rec(8.0, 0.4), rec(2.0, 0.2)];
        assert_eq!(mae_at_keep(&rs, 0.5).unwrap(), 1.5);
        assert_eq!(
            mae_at_keep(&rs, 1.0).unwrap(),
            mae_loss(&[4.0, 1.0, 8.0, 2.0], &[0.0; 4]).unwrap()
        );
        assert!(mae_at_keep(&rs, 0.0).is_err());
        assert!(mae_at_keep(&[], 0.5).is_err());
    }

    #[test]
    fn keep_quantile_rounding() {
        let rs: Vec<_> = (0..100).map(|i| rec(i as f64, i as f64)).collect();
        // exactly 41 of 100 records, mean of 0..=40
        assert_eq!(mae_at_keep(&rs, 0.41).unwrap(), 20.0);
    }

    #[test]
    fn ties_break_by_input_order() {
        let rs = [rec(5.0, 1.0), rec(1.0, 1.0), rec(3.0, 0.5)];
        // keeps record 2 then the first tied record
        assert_eq!(mae_at_keep(&rs, 0.5).unwrap(), 4.0);
    }

    #[test]
    fn correlation_examples() {
        let rs: Vec<_> = [0.5, 3.0, 1.0, 7.0].iter().map(|&e| rec(e, e)).collect();
        assert!((error_score_correlation(&rs).unwrap().spearman_rho.unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<_> = [0.5, 3.0, 1.0, 7.0].iter().map(|&e| rec(e, -e)).collect();
        assert!((error_score_correlation(&rev).unwrap().spearman_rho.unwrap() + 1.0).abs() < 1e-12);
        let flat: Vec<_> = [0.5, 3.0, 1.0].iter().map(|&e| rec(e, 2.0)).collect();
        assert_eq!(error_score_correlation(&flat).unwrap().spearman_rho, None);
        assert!(error_score_correlation(&rs[..2]).is_err());
    }

    #[test]
    fn curve_csv_layout() {
        let rs = [rec(1.0, 0.1), rec(9.0, 0.9)];
        let c = error_keep_curve(&rs, 10).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "threshold,keep_fraction,mae,n_kept\n0.1,0,,0\n0.9,0.5,1,1\ninf,1,5,2\n"
        );
    }

    fn arb_records() -> impl Strategy<Value = Vec<PredictionRecord>> {
        proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0, 0.0f64..50.0), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(y, p, s)| PredictionRecord {
                    y_hat: p,
                    score: s,
                    y_true: y,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn infinite_threshold_is_plain_mae(rs in arb_records()) {
            let ys: Vec<f64> = rs.iter().map(|r| r.y_true).collect();
            let ps: Vec<f64> = rs.iter().map(|r| r.y_hat).collect();
            let p = mae_at_threshold(&rs, f64::INFINITY).unwrap();
            prop_assert_eq!(p.mae, Some(mae_loss(&ys, &ps).unwrap()));
            let c = error_keep_curve(&rs, 7).unwrap();
            let last = c.points.last().unwrap();
            prop_assert!((last.mae.unwrap() - mae_loss(&ys, &ps).unwrap()).abs() <= 1e-12);
            for w in c.points.windows(2) {
                prop_assert!(w[1].keep_fraction >= w[0].keep_fraction);
            }
        }

        #[test]
        fn keep_is_invariant_under_monotone_transforms(rs in arb_records()) {
            let warped: Vec<PredictionRecord> = rs
                .iter()
                .map(|r| PredictionRecord { score: (r.score * 0.3).exp() * 2.0 - 7.0, ..*r })
                .collect();
            for k in KEEP_GRID {
                prop_assert_eq!(mae_at_keep(&rs, k).unwrap(), mae_at_keep(&warped, k).unwrap());
            }
        }

        #[test]
        fn keep_is_permutation_invariant_for_distinct_scores(rs in arb_records(), rot in 0usize..60) {
            let mut scores: Vec<f64> = rs.iter().map(|r| r.score).collect();
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            prop_assume!(scores.len() == rs.len());
            let mut moved = rs.clone();
            moved.rotate_left(rot % rs.len());
            for k in KEEP_GRID {
                let a = mae_at_keep(&rs, k).unwrap();
                let b = mae_at_keep(&moved, k).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn oracle_scores_give_monotone_curve(errs in proptest::collection::vec(0.0f64..100.0, 1..80)) {
            let rs: Vec<_> = errs.iter().map(|&e| rec(e, e)).collect();
            let c = error_keep_curve(&rs, 100).unwrap();
            let maes: Vec<f64> = c.points.iter().filter_map(|p| p.mae).collect();
            for w in maes.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }
}
