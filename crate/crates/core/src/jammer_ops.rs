//! Jammer characterization (discrete shifts and I-Q voting on the
//! continuous error), extraction, suppression, incremental updates of the
//! transition matrix and dynamic model, and model switching.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::abnormality::argmax;
use crate::error::{Error, Result};
use crate::mjpf::{FilterModel, StepOutput};
use crate::radio::C64;
use crate::vocab::gng::{gng_train, GngConfig};

/// Default I-Q vote grid step.
pub const VOTE_GRID: f64 = 0.1;

/// Discrete-level characterization of the attacked steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCharacterization {
    pub steps: Vec<usize>,
    /// Most occupied predicted superstate per attacked step.
    pub predicted: Vec<usize>,
    /// Most supported superstate per attacked step.
    pub observed: Vec<usize>,
    /// `(predicted, observed, count)` triples in ascending pair order.
    pub shifts: Vec<(usize, usize, usize)>,
}

/// One row of the vote table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    /// Quantized 𝔻.
    pub value: Vec<f64>,
    pub votes: usize,
    /// Predicted superstate of the first step that cast this value.
    pub predicted: usize,
}

/// Full characterization log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationLog {
    pub discrete: DiscreteCharacterization,
    /// Raw 𝔻 per attacked step.
    pub d_values: Vec<Vec<f64>>,
    /// True where the predicted and observed superstates agreed.
    pub same_superstate: Vec<bool>,
    /// Whole-vector votes, most voted first (ties keep first appearance).
    pub votes: Vec<Vote>,
    /// Jammer force on the derivative block, from per-sub-carrier I-Q votes.
    pub u_jammer: Vec<f64>,
    pub grid: f64,
}

impl CharacterizationLog {
    pub fn u_jammer(&self) -> DVector<f64> {
        DVector::from_vec(self.u_jammer.clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path, e))
    }
}

fn attacked_outputs<'a>(outputs: &'a [StepOutput], attacked: &[usize]) -> Result<Vec<&'a StepOutput>> {
    if attacked.is_empty() {
        return Err(Error::Invalid("nothing to characterize: no attacked steps".into()));
    }
    attacked
        .iter()
        .map(|&t| {
            outputs
                .get(t)
                .ok_or_else(|| Error::Invalid(format!("attacked step {t} outside the trace")))
        })
        .collect()
}

pub fn characterize_discrete(outputs: &[StepOutput], attacked: &[usize]) -> Result<DiscreteCharacterization> {
    let steps = attacked_outputs(outputs, attacked)?;
    let predicted: Vec<usize> = steps.iter().map(|o| argmax(&o.pi_s)).collect();
    let observed: Vec<usize> = steps.iter().map(|o| argmax(&o.lambda_s)).collect();
    let mut counts = BTreeMap::new();
    for (p, l) in predicted.iter().zip(&observed) {
        *counts.entry((*p, *l)).or_insert(0) += 1;
    }
    let shifts = counts.into_iter().map(|((p, l), c)| (p, l, c)).collect();
    Ok(DiscreteCharacterization {
        steps: attacked.to_vec(),
        predicted,
        observed,
        shifts,
    })
}

fn quantize(v: f64, grid: f64) -> i64 {
    (v / grid).round() as i64
}

/// Continuous characterization: 𝔻 per attacked step (the innovation when
/// the predicted and observed superstates agree, the difference of their
/// means otherwise), a whole-vector vote table, and the jammer force voted
/// per sub-carrier on the derivative pair `(İ_n, Q̇_n)` of the innovation
/// steps. The force of each sub-carrier is the mean of the votes in the
/// winning cell and its eight neighbours.
pub fn characterize_continuous(
    outputs: &[StepOutput],
    attacked: &[usize],
    model: &FilterModel,
    grid: f64,
) -> Result<CharacterizationLog> {
    if !(grid > 0.0) {
        return Err(Error::Invalid("vote grid must be positive".into()));
    }
    let discrete = characterize_discrete(outputs, attacked)?;
    let steps = attacked_outputs(outputs, attacked)?;
    let means: Vec<&DVector<f64>> = model.vocab.superstates.iter().map(|s| &s.mean).collect();
    let mut d_values = Vec::with_capacity(steps.len());
    let mut same = Vec::with_capacity(steps.len());
    for (i, o) in steps.iter().enumerate() {
        let (p, l) = (discrete.predicted[i], discrete.observed[i]);
        let v = if p == l {
            o.errors.eps_x1.clone()
        } else {
            means[l] - means[p]
        };
        same.push(p == l);
        d_values.push(v.iter().copied().collect::<Vec<f64>>());
    }

    let mut table: Vec<(Vec<i64>, usize, usize)> = Vec::new();
    let mut index: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (i, v) in d_values.iter().enumerate() {
        let key: Vec<i64> = v.iter().map(|x| quantize(*x, grid)).collect();
        match index.get(&key) {
            Some(&k) => table[k].1 += 1,
            None => {
                index.insert(key.clone(), table.len());
                table.push((key, 1, discrete.predicted[i]));
            }
        }
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].1.cmp(&table[a].1).then(a.cmp(&b)));
    let votes = order
        .into_iter()
        .map(|k| Vote {
            value: table[k].0.iter().map(|q| *q as f64 * grid).collect(),
            votes: table[k].1,
            predicted: table[k].2,
        })
        .collect();

    let dim = model.dim();
    let h = dim / 2;
    let d = model.vocab.d;
    // Superstate shifts carry no force evidence; vote on the innovations
    // unless every step shifted.
    let innovations: Vec<&Vec<f64>> = d_values.iter().zip(&same).filter(|p| *p.1).map(|p| p.0).collect();
    let force_samples: Vec<&Vec<f64>> = if innovations.is_empty() {
        d_values.iter().collect()
    } else {
        innovations
    };
    let mut u = vec![0.0; h];
    for n in 0..d {
        let pairs: Vec<(f64, f64)> = force_samples.iter().map(|v| (v[h + n], v[h + d + n])).collect();
        let mut cells: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for (a, b) in &pairs {
            *cells.entry((quantize(*a, grid), quantize(*b, grid))).or_insert(0) += 1;
        }
        let best = cells
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map(|(k, _)| *k)
            .expect("at least one attacked step");
        let near: Vec<&(f64, f64)> = pairs
            .iter()
            .filter(|(a, b)| (quantize(*a, grid) - best.0).abs() <= 1 && (quantize(*b, grid) - best.1).abs() <= 1)
            .collect();
        let k = near.len() as f64;
        u[n] = near.iter().map(|p| p.0).sum::<f64>() / k;
        u[d + n] = near.iter().map(|p| p.1).sum::<f64>() / k;
    }

    Ok(CharacterizationLog {
        discrete,
        d_values,
        same_superstate: same,
        votes,
        u_jammer: u,
        grid,
    })
}

/// `Ĵ_t = ε̃_Z^[2] − ŵ` for every step.
pub fn extract_jammer(outputs: &[StepOutput], w_hat: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    outputs
        .iter()
        .map(|o| {
            if o.errors.eps_z2.len() != w_hat.len() {
                return Err(Error::Dimension {
                    expected: o.errors.eps_z2.len(),
                    got: w_hat.len(),
                });
            }
            Ok(&o.errors.eps_z2 - w_hat)
        })
        .collect()
}

/// Mean clean residual `z − μ̃(argmax λ)`: the plain noise estimate.
pub fn clean_residual_mean(clean_outputs: &[StepOutput]) -> Result<DVector<f64>> {
    let first = clean_outputs
        .first()
        .ok_or_else(|| Error::Invalid("no clean steps".into()))?;
    let mut acc = DVector::zeros(first.errors.eps_z2.len());
    for o in clean_outputs {
        acc += &o.errors.eps_z2;
    }
    Ok(acc / clean_outputs.len() as f64)
}

/// A jammer constellation learned from extracted jammer samples: the noise
/// estimate at each cell is the extracted value minus its nearest codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerCodebook {
    pub points: Vec<(f64, f64)>,
}

impl JammerCodebook {
    /// Cluster the per-sub-carrier I/Q pairs of `extracted` (state blocks of
    /// length `2 d`) at the given steps.
    pub fn learn(extracted: &[DVector<f64>], steps: &[usize], d: usize, gng: &GngConfig) -> Result<Self> {
        let mut samples = Vec::new();
        for &t in steps {
            let j = extracted
                .get(t)
                .ok_or_else(|| Error::Invalid(format!("step {t} outside the extraction")))?;
            for n in 0..d {
                samples.push(DVector::from_vec(vec![j[n], j[d + n]]));
            }
        }
        let nodes = gng_train(&samples, gng)?;
        Ok(Self {
            points: nodes.iter().map(|v| (v[0], v[1])).collect(),
        })
    }

    pub fn nearest(&self, c: C64) -> C64 {
        let mut best = C64::new(self.points[0].0, self.points[0].1);
        let mut bd = f64::INFINITY;
        for &(a, b) in &self.points {
            let p = C64::new(a, b);
            let dd = (c - p).norm_sqr();
            if dd < bd {
                bd = dd;
                best = p;
            }
        }
        best
    }

    fn nearest_index(&self, c: C64) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (k, &(a, b)) in self.points.iter().enumerate() {
            let dd = (c - C64::new(a, b)).norm_sqr();
            if dd < bd {
                bd = dd;
                best = k;
            }
        }
        best
    }

    /// Jointly pick the superstate mean and the codewords that best explain
    /// the I/Q block of `z`. Returns the chosen superstate, the per-sub-carrier
    /// codeword indices and the residual energy.
    pub fn decode(&self, z: &DVector<f64>, means: &[&DVector<f64>], d: usize) -> (usize, Vec<usize>, f64) {
        let mut best = (0, Vec::new(), f64::INFINITY);
        for (m, mu) in means.iter().enumerate() {
            let mut codes = Vec::with_capacity(d);
            let mut e = 0.0;
            for n in 0..d {
                let r = C64::new(z[n] - mu[n], z[d + n] - mu[d + n]);
                let k = self.nearest_index(r);
                e += (r - C64::new(self.points[k].0, self.points[k].1)).norm_sqr();
                codes.push(k);
            }
            if e < best.2 {
                best = (m, codes, e);
            }
        }
        best
    }

    /// Residual energy of the best superstate mean with no jammer present.
    fn absent_energy(z: &DVector<f64>, means: &[&DVector<f64>], d: usize) -> f64 {
        means
            .iter()
            .map(|mu| (0..d).map(|n| (z[n] - mu[n]).powi(2) + (z[d + n] - mu[d + n]).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Joint decode that returns `None` when the jammer-free hypothesis
    /// explains the I/Q block better than any codeword assignment.
    pub fn decode_present(&self, z: &DVector<f64>, means: &[&DVector<f64>], d: usize) -> Option<(usize, Vec<usize>)> {
        let (m, codes, e) = self.decode(z, means, d);
        (e < Self::absent_energy(z, means, d)).then_some((m, codes))
    }

    /// Lloyd refinement: decode every attacked step, then move each codeword
    /// to the mean of the residuals assigned to it. Steps better explained
    /// without a jammer are skipped.
    pub fn refine(&mut self, obs: &[DVector<f64>], steps: &[usize], means: &[&DVector<f64>], d: usize, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            let mut acc = vec![(C64::new(0.0, 0.0), 0usize); self.points.len()];
            for &t in steps {
                let z = obs
                    .get(t)
                    .ok_or_else(|| Error::Invalid(format!("step {t} outside the observations")))?;
                let Some((m, codes)) = self.decode_present(z, means, d) else {
                    continue;
                };
                for (n, &k) in codes.iter().enumerate() {
                    acc[k].0 += C64::new(z[n] - means[m][n], z[d + n] - means[m][d + n]);
                    acc[k].1 += 1;
                }
            }
            for (p, (sum, count)) in self.points.iter_mut().zip(acc) {
                if count > 0 {
                    let c = sum / count as f64;
                    *p = (c.re, c.im);
                }
            }
        }
        Ok(())
    }

    /// Jammer estimate for every step: decoded codewords on the flagged
    /// steps where a jammer explains the block better than its absence,
    /// zero elsewhere, with the derivative block taken as the first
    /// difference of the estimate.
    pub fn estimate(&self, obs: &[DVector<f64>], flagged: &[bool], means: &[&DVector<f64>], d: usize) -> Result<Vec<DVector<f64>>> {
        if obs.len() != flagged.len() {
            return Err(Error::Length(obs.len(), flagged.len()));
        }
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(obs.len());
        let mut prev = vec![C64::new(0.0, 0.0); d];
        for (z, &f) in obs.iter().zip(flagged) {
            if z.len() != 4 * d {
                return Err(Error::Dimension {
                    expected: 4 * d,
                    got: z.len(),
                });
            }
            let mut j = DVector::zeros(4 * d);
            let decoded = if f { self.decode_present(z, means, d) } else { None };
            let cur: Vec<C64> = match decoded {
                Some((_, codes)) => codes.iter().map(|&k| C64::new(self.points[k].0, self.points[k].1)).collect(),
                None => vec![C64::new(0.0, 0.0); d],
            };
            for n in 0..d {
                j[n] = cur[n].re;
                j[d + n] = cur[n].im;
                j[2 * d + n] = cur[n].re - prev[n].re;
                j[3 * d + n] = cur[n].im - prev[n].im;
            }
            prev = cur;
            out.push(j);
        }
        Ok(out)
    }

    /// Replace the I/Q block of `j` by the nearest codewords; the derivative
    /// block is left untouched.
    pub fn snap(&self, j: &DVector<f64>, d: usize) -> DVector<f64> {
        let mut out = j.clone();
        for n in 0..d {
            let c = self.nearest(C64::new(j[n], j[d + n]));
            out[n] = c.re;
            out[d + n] = c.im;
        }
        out
    }
}

/// `Z† = Z − Ĵ`.
pub fn suppress(obs: &[DVector<f64>], j_hat: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if obs.len() != j_hat.len() {
        return Err(Error::Length(obs.len(), j_hat.len()));
    }
    obs.iter()
        .zip(j_hat)
        .map(|(z, j)| {
            if z.len() != j.len() {
                return Err(Error::Dimension {
                    expected: z.len(),
                    got: j.len(),
                });
            }
            Ok(z - j)
        })
        .collect()
}

/// One attacked step for the transition update: occupied superstates and
/// `ε̃_S`.
pub struct TransitionEvidence<'a> {
    pub occupied: Vec<usize>,
    pub eps_s: &'a [f64],
}

impl<'a> TransitionEvidence<'a> {
    pub fn from_output(o: &'a StepOutput) -> Self {
        Self {
            occupied: (0..o.pi_s.len()).filter(|&i| o.pi_s[i] > 0.0).collect(),
            eps_s: &o.errors.eps_s,
        }
    }
}

/// Add `ε̃_S` to every occupied row at each attacked step, average the
/// updated rows over the steps that touched them, clamp at zero and
/// renormalize. Untouched rows keep their values.
pub fn update_transition_matrix(pi: &DMatrix<f64>, steps: &[TransitionEvidence<'_>]) -> Result<DMatrix<f64>> {
    let m = pi.nrows();
    let mut sum = DMatrix::<f64>::zeros(m, m);
    let mut touched = vec![0usize; m];
    for s in steps {
        if s.eps_s.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: s.eps_s.len(),
            });
        }
        let e = nalgebra::RowDVector::from_row_slice(s.eps_s);
        for &i in &s.occupied {
            let row = pi.row(i) + &e;
            let mut r = sum.row_mut(i);
            r += row;
            touched[i] += 1;
        }
    }
    let mut out = pi.clone();
    for i in 0..m {
        if touched[i] == 0 {
            continue;
        }
        let mut row: Vec<f64> = sum.row(i).iter().map(|v| (v / touched[i] as f64).max(0.0)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
            out.set_row(i, &nalgebra::RowDVector::from_vec(row));
        }
    }
    Ok(out)
}

/// Overlay the jammer force on every control vector.
pub fn update_dynamic_model(model: &FilterModel, u_jammer: &DVector<f64>) -> Result<FilterModel> {
    model.clone().with_force(Some(u_jammer.clone()))
}

/// Per step, 0 for the reference model or 1 for the updated model, whichever
/// has the lower CLA; ties go to the reference.
pub fn switch_models(cla_reference: &[f64], cla_updated: &[f64]) -> Result<Vec<usize>> {
    if cla_reference.len() != cla_updated.len() {
        return Err(Error::Length(cla_reference.len(), cla_updated.len()));
    }
    Ok(cla_reference
        .iter()
        .zip(cla_updated)
        .map(|(r, u)| usize::from(u < r))
        .collect())
}
