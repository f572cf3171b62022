//! Detection and reconstruction metrics, and the energy-detector baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::C64;

/// Mean `|z|²` over a window of samples; zero for an empty window.
pub fn energy_detector(window: &[C64]) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    window.iter().map(|z| z.norm_sqr()).sum::<f64>() / window.len() as f64
}

/// Receiver operating characteristic of a score-threshold detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(P_fa, P_d)` pairs sorted by `P_fa`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Accuracy at the best threshold.
    pub acc: f64,
    /// Threshold achieving `acc`; scores at or above it are declared H₁.
    pub best_threshold: f64,
}

impl RocCurve {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_io(path.as_ref(), e))?;
        w.write_record(["p_fa", "p_d"])?;
        for (f, d) in &self.points {
            w.write_record([f.to_string(), d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::csv(path, e)
}

/// Sweep the threshold over every unique score (declaring H₁ when
/// `score >= threshold`) and integrate the curve with the trapezoidal rule.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Length(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid("ROC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let n = scores.len() as f64;
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut acc = neg as f64 / n;
    let mut best_threshold = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let th = scores[order[i]];
        while i < order.len() && scores[order[i]] == th {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        let a = (tp + neg - fp) as f64 / n;
        if a > acc {
            acc = a;
            best_threshold = th;
        }
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum();
    Ok(RocCurve {
        points,
        auc,
        acc,
        best_threshold,
    })
}

/// `(P_d, P_fa)` of binary decisions against labels.
pub fn detection_rates(decisions: &[bool], labels: &[bool]) -> Result<(f64, f64)> {
    if decisions.len() != labels.len() {
        return Err(Error::Length(decisions.len(), labels.len()));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid("rates need both positive and negative labels".into()));
    }
    let tp = decisions.iter().zip(labels).filter(|(d, l)| **d && **l).count();
    let fp = decisions.iter().zip(labels).filter(|(d, l)| **d && !**l).count();
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Length(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Invalid("mse of empty sequences".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    mse(a, b).map(f64::sqrt)
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(v: &[f64]) -> Result<f64> {
    if v.is_empty() || v.iter().any(|x| x.is_nan()) {
        return Err(Error::Invalid("median of an empty or NaN sample".into()));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Ok(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_of_zero_and_doubled_signal() {
        assert_eq!(energy_detector(&[C64::new(0.0, 0.0); 4]), 0.0);
        let w = [C64::new(0.3, -0.2), C64::new(1.0, 0.5)];
        let w2: Vec<C64> = w.iter().map(|z| z * 2.0).collect();
        assert!((energy_detector(&w2) - 4.0 * energy_detector(&w)).abs() < 1e-15);
    }

    #[test]
    fn separated_scores_give_unit_auc() {
        let r = roc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.acc, 1.0);
        assert_eq!(r.best_threshold, 0.8);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn tied_scores_form_a_diagonal() {
        let r = roc(&[1.0; 4], &[true, false, true, false]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn mse_checks_lengths() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::Length(1, 2))));
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }
}
