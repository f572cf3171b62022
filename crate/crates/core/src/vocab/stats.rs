//! Cluster labelling, per-superstate sufficient statistics, transition
//! matrices (plain and dwell-time indexed) and conditional entry statistics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Laplace smoothing added to every transition count.
pub const TRANSITION_EPS: f64 = 1e-6;
/// Ridge factor applied to covariances, relative to their mean variance.
pub const RIDGE_FACTOR: f64 = 1e-6;
/// Number of dwell-time buckets; the last bucket is open-ended.
pub const TAU_MAX: usize = 20;

/// Nearest node (Euclidean) for every sample; ties go to the lowest index.
pub fn assign_labels(samples: &[DVector<f64>], nodes: &[DVector<f64>]) -> Result<Vec<usize>> {
    if nodes.is_empty() {
        return Err(Error::Invalid("no nodes to assign to".into()));
    }
    samples
        .iter()
        .map(|s| {
            if s.len() != nodes[0].len() {
                return Err(Error::Dimension {
                    expected: nodes[0].len(),
                    got: s.len(),
                });
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, n) in nodes.iter().enumerate() {
                let d = (s - n).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Ridge added to a covariance of `dim` dimensions whose trace is `trace`.
/// A zero trace falls back to an absolute ridge of [`RIDGE_FACTOR`].
pub fn ridge(trace: f64, dim: usize) -> f64 {
    let scale = trace / dim as f64;
    RIDGE_FACTOR * if scale > 0.0 && scale.is_finite() { scale } else { 1.0 }
}

/// Mean and unbiased covariance (plus ridge) of a set of vectors. With a
/// single sample the covariance is the ridge alone.
pub fn mean_cov<'a, I>(samples: I, dim: usize) -> Option<(DVector<f64>, DMatrix<f64>)>
where
    I: IntoIterator<Item = &'a DVector<f64>> + Clone,
{
    let mut n = 0usize;
    let mut mean = DVector::zeros(dim);
    for s in samples.clone() {
        mean += s;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    if n > 1 {
        for s in samples {
            let c = s - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= (n - 1) as f64;
    }
    let r = ridge(cov.trace(), dim);
    for i in 0..dim {
        cov[(i, i)] += r;
    }
    Some((mean, cov))
}

/// Per-cluster statistics. Clusters with no members get the node position as
/// mean, a unit-scale ridge covariance and `empty = true`.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
    pub empty: bool,
}

pub fn superstate_statistics(
    samples: &[DVector<f64>],
    labels: &[usize],
    nodes: &[DVector<f64>],
) -> Result<Vec<ClusterStats>> {
    if samples.len() != labels.len() {
        return Err(Error::Length(samples.len(), labels.len()));
    }
    let dim = nodes.first().map(|n| n.len()).unwrap_or(0);
    Ok((0..nodes.len())
        .map(|m| {
            let members: Vec<&DVector<f64>> =
                samples.iter().zip(labels).filter(|(_, &l)| l == m).map(|(s, _)| s).collect();
            match mean_cov(members.iter().copied(), dim) {
                Some((mean, cov)) => ClusterStats {
                    mean,
                    cov,
                    count: members.len(),
                    empty: false,
                },
                None => ClusterStats {
                    mean: nodes[m].clone(),
                    cov: DMatrix::identity(dim, dim) * ridge(0.0, dim),
                    count: 0,
                    empty: true,
                },
            }
        })
        .collect())
}

fn normalize_rows(counts: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = counts.clone();
    for mut row in p.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    p
}

/// Transition counts `count(i → j)` over consecutive labels.
pub fn transition_counts(labels: &[usize], m: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(m, m);
    for w in labels.windows(2) {
        c[(w[0], w[1])] += 1.0;
    }
    c
}

/// Row-stochastic `Π` with Laplace smoothing.
pub fn estimate_transition_matrix(labels: &[usize], m: usize) -> Result<DMatrix<f64>> {
    estimate_transition_matrix_multi(&[labels], m)
}

/// [`estimate_transition_matrix`] pooled over independent sequences.
pub fn estimate_transition_matrix_multi(seqs: &[&[usize]], m: usize) -> Result<DMatrix<f64>> {
    let mut c = DMatrix::zeros(m, m);
    for labels in seqs {
        check_labels(labels, m)?;
        c += transition_counts(labels, m);
    }
    Ok(normalize_rows(&c.add_scalar(TRANSITION_EPS)))
}

fn check_labels(labels: &[usize], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Invalid("no superstates".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::Invalid(format!("label {l} outside 0..{m}")));
    }
    Ok(())
}

/// Dwell time (1-based) at every position of a label sequence.
pub fn dwell_times(labels: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(labels.len());
    for (t, &l) in labels.iter().enumerate() {
        let d = if t > 0 && labels[t - 1] == l { out[t - 1] + 1 } else { 1 };
        out.push(d);
    }
    out
}

/// `Π_τ` for `τ = 1..=tau_max`: transitions out of a state after dwelling
/// `min(τ, tau_max)` steps in it. Rows never observed for a bucket fall
/// back to the matching row of `Π`.
pub fn estimate_time_varying(labels: &[usize], m: usize, tau_max: usize) -> Result<Vec<DMatrix<f64>>> {
    estimate_time_varying_multi(&[labels], m, tau_max)
}

/// [`estimate_time_varying`] pooled over independent sequences.
pub fn estimate_time_varying_multi(seqs: &[&[usize]], m: usize, tau_max: usize) -> Result<Vec<DMatrix<f64>>> {
    if tau_max == 0 {
        return Err(Error::Invalid("tau_max must be positive".into()));
    }
    let pi = estimate_transition_matrix_multi(seqs, m)?;
    let mut counts = vec![DMatrix::<f64>::zeros(m, m); tau_max];
    for labels in seqs {
        let dwell = dwell_times(labels);
        for t in 0..labels.len().saturating_sub(1) {
            let k = dwell[t].min(tau_max) - 1;
            counts[k][(labels[t], labels[t + 1])] += 1.0;
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| {
            let mut p = pi.clone();
            for i in 0..m {
                let total: f64 = c.row(i).sum();
                if total > 0.0 {
                    let row = c.row(i).add_scalar(TRANSITION_EPS);
                    let s: f64 = row.sum();
                    p.set_row(i, &(row / s));
                }
            }
            p
        })
        .collect())
}

/// Statistics of the samples that entered superstate `m` from `j`, keyed by
/// `(m, j)`. The first sample counts as entering its own superstate from
/// itself.
pub fn conditional_statistics(samples: &[DVector<f64>], labels: &[usize]) -> Result<ConditionalMap> {
    conditional_statistics_multi(&[(samples, labels)])
}

/// Conditional statistics keyed by `(m, j)`: mean, covariance, count.
pub type ConditionalMap = BTreeMap<(usize, usize), (DVector<f64>, DMatrix<f64>, usize)>;

/// [`conditional_statistics`] pooled over independent sequences.
pub fn conditional_statistics_multi(seqs: &[(&[DVector<f64>], &[usize])]) -> Result<ConditionalMap> {
    let mut groups: BTreeMap<(usize, usize), Vec<&DVector<f64>>> = BTreeMap::new();
    let mut dim = 0;
    for (samples, labels) in seqs {
        if samples.len() != labels.len() {
            return Err(Error::Length(samples.len(), labels.len()));
        }
        for t in 0..samples.len() {
            dim = samples[t].len();
            let prev = if t == 0 { labels[0] } else { labels[t - 1] };
            groups.entry((labels[t], prev)).or_default().push(&samples[t]);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(k, v)| {
            let (mean, cov) = mean_cov(v.iter().copied(), dim).expect("group is non-empty");
            (k, (mean, cov, v.len()))
        })
        .collect())
}
