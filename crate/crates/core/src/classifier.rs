//! Automatic jamming classification: a bank of jammer vocabularies, one
//! per modulation, each filtering the extracted jammer evidence sub-carrier
//! by sub-carrier; the model with the lowest abnormality names the jammer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{bhattacharyya, Gaussian};
use crate::mjpf::{init_belief, predict, update, BeliefState, FilterConfig, FilterModel};
use crate::radio::ModulationScheme;
use crate::vocab::{learn_vocabulary, LearnConfig, VocabTag, Vocabulary};

/// Per-sub-carrier slice `(I_n, Q_n, İ_n, Q̇_n)` of a `4 d` generalized vector.
pub fn subcarrier_slice(v: &DVector<f64>, d: usize, n: usize) -> DVector<f64> {
    DVector::from_vec(vec![v[n], v[d + n], v[2 * d + n], v[3 * d + n]])
}

/// Per-block average of a `4 d` noise diagonal, giving the `4`-long noise
/// of a single sub-carrier.
pub fn subcarrier_noise(r_diag: &DVector<f64>, d: usize) -> DVector<f64> {
    DVector::from_fn(4, |b, _| (0..d).map(|n| r_diag[b * d + n]).sum::<f64>() / d as f64)
}

/// Learn a single-sub-carrier jammer vocabulary from extracted evidence.
/// Every sub-carrier contributes one sequence per contiguous run of
/// `steps`.
pub fn learn_jammer_vocabulary(
    evidence: &[DVector<f64>],
    steps: &[usize],
    scheme: ModulationScheme,
    d: usize,
    r_diag: &DVector<f64>,
    cfg: &LearnConfig,
) -> Result<Vocabulary> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &t in steps {
        if t >= evidence.len() {
            return Err(Error::Invalid(format!("step {t} outside the evidence")));
        }
        match runs.last_mut() {
            Some(r) if r.last().map(|&p| p + 1 == t).unwrap_or(false) => r.push(t),
            _ => runs.push(vec![t]),
        }
    }
    let mut seqs = Vec::new();
    for n in 0..d {
        for r in &runs {
            seqs.push(r.iter().map(|&t| subcarrier_slice(&evidence[t], d, n)).collect());
        }
    }
    let mut cfg = cfg.clone();
    cfg.conditional = true;
    learn_vocabulary(&seqs, &cfg, VocabTag::Jammer(scheme), 1, subcarrier_noise(r_diag, d))
}

/// Per-model abnormality of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbnScore {
    /// CLA of the winning particle.
    Cla,
    /// `−ln Σ_i w_i BC(N(x̂_i, P_i), N(z, R))` over the predicted particles.
    #[default]
    Mixture,
}

/// Bank of jammer models with unique scheme tags.
#[derive(Debug, Clone)]
pub struct ModelBank {
    pub models: Vec<FilterModel>,
    pub schemes: Vec<ModulationScheme>,
    pub score: AbnScore,
}

impl ModelBank {
    pub fn new(vocabs: Vec<Vocabulary>, cfg: &FilterConfig) -> Result<Self> {
        if vocabs.is_empty() {
            return Err(Error::Invalid("empty model bank".into()));
        }
        let mut schemes = Vec::with_capacity(vocabs.len());
        let mut models = Vec::with_capacity(vocabs.len());
        for v in vocabs {
            let VocabTag::Jammer(s) = v.tag else {
                return Err(Error::Invalid(format!("bank model tagged {}, expected a jammer", v.tag)));
            };
            if v.d != 1 {
                return Err(Error::Invalid("bank models cover a single sub-carrier".into()));
            }
            if schemes.contains(&s) {
                return Err(Error::Invalid(format!("duplicate scheme {} in bank", s.name())));
            }
            schemes.push(s);
            let mut c = cfg.clone();
            c.use_conditional = true;
            models.push(FilterModel::new(v, c)?);
        }
        Ok(Self {
            models,
            schemes,
            score: AbnScore::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Beliefs of every model on every sub-carrier; created on the first step.
#[derive(Debug, Clone)]
pub struct AjcState {
    beliefs: Vec<Vec<BeliefState>>,
    seed: u64,
}

impl AjcState {
    pub fn new(seed: u64) -> Self {
        Self {
            beliefs: Vec::new(),
            seed,
        }
    }
}

/// Index of the minimum; ties go to the lowest index.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// One classification step on the `4 d` evidence `ε̃_Z^[2]`: every model
/// filters every sub-carrier, its abnormality is the CLA summed over
/// sub-carriers, and the least abnormal model wins.
pub fn ajc_step(bank: &ModelBank, state: &mut AjcState, evidence: &DVector<f64>) -> Result<(Vec<f64>, usize)> {
    if bank.is_empty() {
        return Err(Error::Invalid("empty model bank".into()));
    }
    if !evidence.len().is_multiple_of(4) || evidence.is_empty() {
        return Err(Error::Dimension {
            expected: 4,
            got: evidence.len(),
        });
    }
    let d = evidence.len() / 4;
    if state.beliefs.is_empty() {
        for (k, m) in bank.models.iter().enumerate() {
            let row = (0..d)
                .map(|n| {
                    let seed = state.seed ^ ((k as u64 + 1) << 32) ^ (n as u64 + 1);
                    init_belief(m, &subcarrier_slice(evidence, d, n), m.cfg.n_particles, seed)
                })
                .collect::<Result<Vec<_>>>()?;
            state.beliefs.push(row);
        }
    } else if state.beliefs[0].len() != d {
        return Err(Error::Dimension {
            expected: 4 * state.beliefs[0].len(),
            got: evidence.len(),
        });
    }
    let mut omega = vec![0.0; bank.len()];
    for (k, m) in bank.models.iter().enumerate() {
        for n in 0..d {
            let z = subcarrier_slice(evidence, d, n);
            let b = &mut state.beliefs[k][n];
            predict(b, m);
            let mixture = match bank.score {
                AbnScore::Mixture => Some(mixture_abnormality(b, &z, m)?),
                AbnScore::Cla => None,
            };
            let out = update(b, &z, m)?;
            omega[k] += mixture.unwrap_or(out.snapshot.cla);
        }
    }
    let k_hat = argmin(&omega);
    Ok((omega, k_hat))
}

fn mixture_abnormality(b: &BeliefState, z: &DVector<f64>, m: &FilterModel) -> Result<f64> {
    let obs = Gaussian {
        mean: z.clone(),
        cov: m.r.clone(),
    };
    let total: f64 = b.particles.iter().map(|p| p.weight).sum();
    let mut acc = 0.0;
    for p in &b.particles {
        let pred = Gaussian {
            mean: p.mean.clone(),
            cov: p.cov.clone().unwrap_or_else(|| b.cov.clone()),
        };
        acc += p.weight / total * bhattacharyya(&pred, &obs)?.coefficient;
    }
    Ok(-acc.max(f64::MIN_POSITIVE).ln())
}

/// Per-step and windowed classification of an evidence sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub omega: Vec<Vec<f64>>,
    pub k_hat: Vec<usize>,
    /// Most frequent per-step label (ties to the lowest index).
    pub majority: usize,
}

pub fn ajc_run(bank: &ModelBank, evidence: &[DVector<f64>], seed: u64) -> Result<ClassificationResult> {
    if evidence.is_empty() {
        return Err(Error::Invalid("no evidence to classify".into()));
    }
    let mut state = AjcState::new(seed);
    let mut omega = Vec::with_capacity(evidence.len());
    let mut k_hat = Vec::with_capacity(evidence.len());
    for e in evidence {
        let (o, k) = ajc_step(bank, &mut state, e)?;
        omega.push(o);
        k_hat.push(k);
    }
    Ok(ClassificationResult {
        majority: majority(&k_hat, bank.len()),
        omega,
        k_hat,
    })
}

/// Most frequent label in `[0, k)`; ties go to the lowest label.
pub fn majority(labels: &[usize], k: usize) -> usize {
    let mut counts = vec![0usize; k.max(1)];
    for &l in labels {
        if l < counts.len() {
            counts[l] += 1;
        }
    }
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}

/// Fraction of matching labels.
pub fn p_cc(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Length(predictions.len(), truth.len()));
    }
    if predictions.is_empty() {
        return Err(Error::Invalid("no predictions".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// `k × k` counts, rows indexed by truth and columns by prediction.
pub fn confusion(predictions: &[usize], truth: &[usize], k: usize) -> Result<DMatrix<usize>> {
    if predictions.len() != truth.len() {
        return Err(Error::Length(predictions.len(), truth.len()));
    }
    let mut c = DMatrix::zeros(k, k);
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Invalid(format!("label outside [0, {k})")));
        }
        c[(t, p)] += 1;
    }
    Ok(c)
}
