//! Vocabulary learning: null-knowledge bootstrap, Growing Neural Gas
//! clustering of generalized states, and assembly of superstates and
//! transition matrices.

pub mod gng;
pub mod model;
pub mod stats;
pub mod ukf;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use gng::{gng_train, GngConfig};
pub use model::{Conditional, Superstate, VocabTag, Vocabulary, SCHEMA_VERSION};
pub use stats::{
    assign_labels, conditional_statistics, estimate_time_varying, estimate_transition_matrix, superstate_statistics,
    TAU_MAX,
};
pub use ukf::{estimate_noise_diag, robust_variance, ukf_bootstrap, BootstrapOutput};

use crate::error::{Error, Result};
use crate::radio::GeneralizedObservation;

/// Settings shared by every vocabulary build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct LearnConfig {
    pub gng: GngConfig,
    pub tau_max: usize,
    /// Populate per-predecessor statistics.
    pub conditional: bool,
    /// Bootstrap process noise as a multiple of the measurement noise.
    pub bootstrap_q_scale: f64,
    /// Lower bound on any estimated noise variance.
    pub noise_floor: f64,
    /// Cluster and label on the state block only; superstate statistics
    /// still cover the full generalized vector.
    #[serde(default)]
    pub cluster_state_only: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            gng: GngConfig::with_nodes(8, 0),
            tau_max: TAU_MAX,
            conditional: false,
            bootstrap_q_scale: 1.0,
            noise_floor: 1e-6,
            cluster_state_only: false,
        }
    }
}

/// Build a vocabulary from one or more sequences of generalized samples of
/// length `4 d`. `r_diag` is the measurement noise stored with the model.
pub fn learn_vocabulary(
    seqs: &[Vec<DVector<f64>>],
    cfg: &LearnConfig,
    tag: VocabTag,
    d: usize,
    r_diag: DVector<f64>,
) -> Result<Vocabulary> {
    let all: Vec<DVector<f64>> = seqs.iter().flatten().cloned().collect();
    if all.len() < 2 {
        return Err(Error::Invalid("vocabulary needs at least two samples".into()));
    }
    if all.iter().any(|s| s.len() != 4 * d) || r_diag.len() != 4 * d {
        return Err(Error::Dimension {
            expected: 4 * d,
            got: all[0].len(),
        });
    }
    let h = 2 * d;
    let project = |v: &DVector<f64>| -> DVector<f64> {
        if cfg.cluster_state_only {
            v.rows(0, h).into_owned()
        } else {
            v.clone()
        }
    };
    let projected: Vec<DVector<f64>> = all.iter().map(project).collect();
    let fitted = gng_train(&projected, &cfg.gng)?;
    let labels: Vec<Vec<usize>> = seqs
        .iter()
        .map(|s| assign_labels(&s.iter().map(project).collect::<Vec<_>>(), &fitted))
        .collect::<Result<_>>()?;
    let nodes: Vec<DVector<f64>> = fitted
        .iter()
        .map(|n| {
            let mut full = DVector::zeros(4 * d);
            full.rows_mut(0, n.len()).copy_from(n);
            full
        })
        .collect();
    let flat_labels: Vec<usize> = labels.iter().flatten().copied().collect();
    let stats = superstate_statistics(&all, &flat_labels, &nodes)?;
    let m = nodes.len();
    let label_refs: Vec<&[usize]> = labels.iter().map(|l| l.as_slice()).collect();
    let pi = stats::estimate_transition_matrix_multi(&label_refs, m)?;
    let pi_tau = stats::estimate_time_varying_multi(&label_refs, m, cfg.tau_max)?;
    let mut cond: BTreeMap<usize, BTreeMap<usize, Conditional>> = BTreeMap::new();
    if cfg.conditional {
        let pairs: Vec<(&[DVector<f64>], &[usize])> =
            seqs.iter().zip(&labels).map(|(s, l)| (s.as_slice(), l.as_slice())).collect();
        for ((mm, j), (mean, cov, count)) in stats::conditional_statistics_multi(&pairs)? {
            cond.entry(mm).or_default().insert(j, Conditional { mean, cov, count });
        }
    }
    let superstates = stats
        .into_iter()
        .enumerate()
        .map(|(id, s)| Superstate {
            id,
            mean: s.mean,
            cov: s.cov,
            count: s.count,
            cond: cond.remove(&id).unwrap_or_default(),
        })
        .collect();
    let v = Vocabulary {
        tag,
        d,
        superstates,
        pi,
        pi_tau,
        r_diag,
    };
    v.validate()?;
    Ok(v)
}

/// Per-dimension robust variance of `z_t − μ̃(label_t)`, floored.
pub fn residual_noise(samples: &[DVector<f64>], vocab: &Vocabulary, floor: f64) -> Result<DVector<f64>> {
    let nodes: Vec<DVector<f64>> = vocab.superstates.iter().map(|s| s.mean.clone()).collect();
    let labels = assign_labels(samples, &nodes)?;
    let dim = vocab.dim();
    Ok(DVector::from_fn(dim, |i, _| {
        let r: Vec<f64> = samples.iter().zip(&labels).map(|(z, &l)| z[i] - nodes[l][i]).collect();
        robust_variance(&r).max(floor)
    }))
}

/// Reference vocabulary of a clean experience: bootstrap filter, clustering
/// of the filtered generalized states, and a measurement noise taken from
/// the clean residuals around the learned superstates.
pub fn learn_reference(observations: &[GeneralizedObservation], cfg: &LearnConfig) -> Result<Vocabulary> {
    let z: Vec<DVector<f64>> = observations.iter().map(|o| o.z.clone()).collect();
    let Some(first) = z.first() else {
        return Err(Error::Invalid("no observations".into()));
    };
    if first.len() % 4 != 0 {
        return Err(Error::Invalid("generalized observations must have length 4d".into()));
    }
    let d = first.len() / 4;
    let r0 = estimate_noise_diag(&z, cfg.noise_floor)?;
    let r = DMatrix::from_diagonal(&r0);
    let boot = ukf_bootstrap(&z, &(&r * cfg.bootstrap_q_scale), &r)?;
    let mut v = learn_vocabulary(&[boot.filtered], cfg, VocabTag::Reference, d, r0)?;
    v.r_diag = residual_noise(&z, &v, cfg.noise_floor)?;
    Ok(v)
}
