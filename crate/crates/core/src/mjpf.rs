//! Markov-jump particle filter over superstates with a Kalman filter on the
//! generalized state, emitting abnormality measures and generalized errors.
//!
//! The dynamic and noise models are common to every particle, so the Kalman
//! covariance is shared and each particle carries only its mean. Models that
//! use conditional statistics add the conditional covariance of the entered
//! superstate to the process noise, and then each particle keeps its own
//! covariance.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abnormality::{self, AbnormalitySnapshot, ErrorInputs, GeneralizedErrors};
use crate::error::{Error, Result};
use crate::gaussian::{BhattacharyyaKernel, Factor, Gaussian, PROB_FLOOR};
use crate::vocab::Vocabulary;

/// Particle-filter settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Process noise as a multiple of the measurement noise.
    pub process_noise_scale: f64,
    /// Resample when ESS falls below this fraction of N.
    pub resample_threshold: f64,
    /// Use per-predecessor control vectors when the vocabulary has them.
    pub use_conditional: bool,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 50,
            process_noise_scale: 2.0,
            resample_threshold: 0.5,
            use_conditional: false,
            seed: 0,
        }
    }
}

/// A vocabulary prepared for filtering: noise models, cached Bhattacharyya
/// kernels against every superstate, and an optional force overlay added to
/// every control vector.
#[derive(Debug, Clone)]
pub struct FilterModel {
    pub vocab: Vocabulary,
    pub cfg: FilterConfig,
    pub r: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub force: Option<DVector<f64>>,
    lambda_kernels: Vec<BhattacharyyaKernel>,
}

impl FilterModel {
    pub fn new(vocab: Vocabulary, cfg: FilterConfig) -> Result<Self> {
        vocab.validate()?;
        if cfg.n_particles == 0 {
            return Err(Error::Config("n_particles must be at least 1".into()));
        }
        if !(cfg.process_noise_scale > 0.0) {
            return Err(Error::Config("process_noise_scale must be positive".into()));
        }
        let r = vocab.r_matrix();
        let sigma_w = &r * cfg.process_noise_scale;
        let lambda_kernels = vocab
            .superstates
            .iter()
            .map(|s| BhattacharyyaKernel::new(&r, &s.cov))
            .collect::<Result<_>>()?;
        Ok(Self {
            vocab,
            cfg,
            r,
            sigma_w,
            force: None,
            lambda_kernels,
        })
    }

    /// Replace the process noise covariance.
    pub fn with_process_noise(mut self, sigma_w: DMatrix<f64>) -> Result<Self> {
        Factor::new(&sigma_w, "process noise")?;
        self.sigma_w = sigma_w;
        Ok(self)
    }

    /// Add a force to every control vector (or clear it with `None`).
    pub fn with_force(mut self, force: Option<DVector<f64>>) -> Result<Self> {
        if let Some(f) = &force {
            if f.len() != self.vocab.dim() / 2 {
                return Err(Error::Dimension {
                    expected: self.vocab.dim() / 2,
                    got: f.len(),
                });
            }
        }
        self.force = force;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.vocab.dim()
    }

    /// Control vector for entering `m` from `prev`.
    pub fn control(&self, m: usize, prev: usize) -> DVector<f64> {
        let s = &self.vocab.superstates[m];
        let h = s.mean.len() / 2;
        let mut u = if self.cfg.use_conditional {
            s.mean_given(prev).rows(h, h).into_owned()
        } else {
            s.control()
        };
        if let Some(f) = &self.force {
            u += f;
        }
        u
    }

    /// `λ(S̃)`: inverse Bhattacharyya distances between `N(z, R)` and every
    /// superstate, normalized to the simplex.
    pub fn lambda_s(&self, z: &DVector<f64>) -> Vec<f64> {
        let inv: Vec<f64> = self
            .vocab
            .superstates
            .iter()
            .zip(&self.lambda_kernels)
            .map(|(s, k)| 1.0 / k.distance(z, &s.mean).max(PROB_FLOOR))
            .collect();
        let total: f64 = inv.iter().sum();
        inv.into_iter().map(|v| v / total).collect()
    }
}

/// One hypothesis of the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub superstate: usize,
    /// Superstate before the last transition.
    pub previous: usize,
    pub dwell: usize,
    pub weight: f64,
    pub mean: DVector<f64>,
    /// Own covariance when conditional covariances are in use.
    pub cov: Option<DMatrix<f64>>,
}

/// Particle ensemble plus the shared Kalman covariance.
#[derive(Debug, Clone)]
pub struct BeliefState {
    pub particles: Vec<Particle>,
    pub cov: DMatrix<f64>,
    pub t: usize,
    /// Times the weights collapsed to zero and were reset to uniform.
    pub degenerate_resets: usize,
    rng: ChaCha8Rng,
}

impl BeliefState {
    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }
}

fn log_gauss(z: &DVector<f64>, mean: &DVector<f64>, f: &Factor) -> f64 {
    -0.5 * (f.quad(&(z - mean)) + f.log_det)
}

/// Particles start at the first observation with superstates drawn from the
/// responsibilities `P(X̃₁ | S̃)`; the covariance starts at `R`.
pub fn init_belief(model: &FilterModel, first: &DVector<f64>, n: usize, seed: u64) -> Result<BeliefState> {
    if n == 0 {
        return Err(Error::Invalid("need at least one particle".into()));
    }
    if first.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: first.len(),
        });
    }
    let logs: Vec<f64> = model
        .vocab
        .superstates
        .iter()
        .map(|s| Ok(log_gauss(first, &s.mean, &Factor::new(&s.cov, "superstate covariance")?)))
        .collect::<Result<_>>()?;
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let resp: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(&resp).map_err(|e| Error::Numerical(e.to_string()))?;
    let particles = (0..n)
        .map(|_| {
            let m = dist.sample(&mut rng);
            Particle {
                superstate: m,
                previous: m,
                dwell: 1,
                weight: 1.0 / n as f64,
                mean: first.clone(),
                cov: model.cfg.use_conditional.then(|| model.r.clone()),
            }
        })
        .collect();
    Ok(BeliefState {
        particles,
        cov: model.r.clone(),
        t: 0,
        degenerate_resets: 0,
        rng,
    })
}

fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

/// `A P Aᵀ`: the derivative block of the state is replaced by the control,
/// so its rows and columns drop out.
fn propagate_cov(cov: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
    let mut c = cov.clone();
    c.view_mut((h, 0), (h, 2 * h)).fill(0.0);
    c.view_mut((0, h), (2 * h, h)).fill(0.0);
    c
}

/// Propose next superstates from the dwell-indexed transition rows and
/// propagate every particle's Kalman prediction.
pub fn predict(belief: &mut BeliefState, model: &FilterModel) {
    let h = model.dim() / 2;
    for p in belief.particles.iter_mut() {
        let row: Vec<f64> = model.vocab.pi_at(p.dwell).row(p.superstate).iter().copied().collect();
        let next = sample_row(&row, &mut belief.rng);
        let u = model.control(next, p.superstate);
        p.previous = p.superstate;
        if next == p.superstate {
            p.dwell += 1;
        } else {
            p.dwell = 1;
            p.superstate = next;
        }
        let state = p.mean.rows(0, h) + &u;
        p.mean.rows_mut(0, h).copy_from(&state);
        p.mean.rows_mut(h, h).copy_from(&u);
        if let Some(c) = p.cov.as_mut() {
            let q = model.vocab.superstates[p.superstate].cov_given(p.previous);
            *c = propagate_cov(c, h) + &model.sigma_w + q;
        }
    }
    belief.cov = propagate_cov(&belief.cov, h) + &model.sigma_w;
}

/// Kalman gain and Joseph-form posterior covariance for prediction
/// covariance `p_pred`.
fn kalman(p_pred: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = p_pred.nrows();
    let s = match Factor::new(&(p_pred + r), "innovation covariance") {
        Ok(f) => f,
        Err(_) => {
            let ridge = DMatrix::identity(n, n) * (1e-9 * r.trace() / n as f64);
            Factor::new(&(p_pred + r + ridge), "innovation covariance")
                .map_err(|_| Error::Numerical("innovation covariance not invertible".into()))?
        }
    };
    let k = s.solve(p_pred).transpose();
    let ik = DMatrix::identity(n, n) - &k;
    let p_post = &ik * p_pred * ik.transpose() + &k * r * k.transpose();
    let p_post = (&p_post + p_post.transpose()) * 0.5;
    Ok((k, p_post))
}

/// Everything one filtering step reports.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub t: usize,
    /// Weighted occupancy of the predicted superstates.
    pub pi_s: Vec<f64>,
    pub lambda_s: Vec<f64>,
    /// Superstate of the highest-weight particle after the update.
    pub winner: usize,
    /// Winning particle's prediction (mean of `π(X̃)`).
    pub predicted: DVector<f64>,
    /// Winning particle's posterior mean.
    pub posterior: DVector<f64>,
    pub snapshot: AbnormalitySnapshot,
    pub errors: GeneralizedErrors,
    pub ess: f64,
    pub resampled: bool,
}

/// Systematic resampling; weights become uniform.
pub fn sir_resample<R: Rng + ?Sized>(particles: &[Particle], rng: &mut R) -> Vec<Particle> {
    let n = particles.len();
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    let w: Vec<f64> = if total > 0.0 && total.is_finite() {
        particles.iter().map(|p| p.weight / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    let u0: f64 = rng.gen::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = w[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > acc && i + 1 < n {
            i += 1;
            acc += w[i];
        }
        let mut p = particles[i].clone();
        p.weight = 1.0 / n as f64;
        out.push(p);
    }
    out
}

/// Kalman update, λ(S̃) weighting, abnormality measures, generalized
/// errors and conditional resampling.
pub fn update(belief: &mut BeliefState, z: &DVector<f64>, model: &FilterModel) -> Result<StepOutput> {
    let n_dim = model.dim();
    if z.len() != n_dim {
        return Err(Error::Dimension {
            expected: n_dim,
            got: z.len(),
        });
    }
    let m = model.vocab.n_superstates();
    let d = model.vocab.d;
    let p_pred = belief.cov.clone();
    let (k, p_post) = kalman(&p_pred, &model.r)?;

    let mut pi_s = vec![0.0; m];
    for p in &belief.particles {
        pi_s[p.superstate] += p.weight;
    }
    let lambda_s = model.lambda_s(z);

    let predicted: Vec<DVector<f64>> = belief.particles.iter().map(|p| p.mean.clone()).collect();
    let mut predicted_cov: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(belief.particles.len());
    for p in belief.particles.iter_mut() {
        let innov = z - &p.mean;
        match p.cov.take() {
            Some(c) => {
                let (ki, post) = kalman(&c, &model.r)?;
                p.mean += ki * innov;
                p.cov = Some(post);
                predicted_cov.push(Some(c));
            }
            None => {
                p.mean += &k * innov;
                predicted_cov.push(None);
            }
        }
        p.weight *= lambda_s[p.superstate];
    }
    let total: f64 = belief.particles.iter().map(|p| p.weight).sum();
    let n = belief.particles.len();
    if total > 0.0 && total.is_finite() {
        for p in belief.particles.iter_mut() {
            p.weight /= total;
        }
    } else {
        belief.degenerate_resets += 1;
        for p in belief.particles.iter_mut() {
            p.weight = 1.0 / n as f64;
        }
    }
    belief.cov = p_post;

    let win = (0..n)
        .max_by(|&a, &b| {
            let (pa, pb) = (&belief.particles[a], &belief.particles[b]);
            pa.weight
                .total_cmp(&pb.weight)
                .then(pb.superstate.cmp(&pa.superstate))
                .then(b.cmp(&a))
        })
        .expect("non-empty ensemble");
    let winner = belief.particles[win].superstate;
    let pred_mean = predicted[win].clone();
    let post_mean = belief.particles[win].mean.clone();

    let pred_g = Gaussian {
        mean: pred_mean.clone(),
        cov: predicted_cov[win].take().unwrap_or_else(|| p_pred.clone()),
    };
    let obs_g = Gaussian {
        mean: z.clone(),
        cov: model.r.clone(),
    };
    let ws = &model.vocab.superstates[winner];
    let sup_g = Gaussian {
        mean: ws.mean.clone(),
        cov: ws.cov.clone(),
    };
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| model.vocab.pi.row(i).iter().copied().collect())
        .collect();
    let occ: Vec<(f64, &[f64])> = (0..m).map(|i| (pi_s[i], rows[i].as_slice())).collect();
    let snapshot = AbnormalitySnapshot {
        klda: abnormality::klda(&occ, &lambda_s),
        cla: abnormality::cla(&pred_g, &obs_g)?,
        clb: abnormality::clb(&pred_g, &sup_g)?,
        dcla: abnormality::dcla(z, &pred_mean, d),
    };
    let means: Vec<&DVector<f64>> = model.vocab.superstates.iter().map(|s| &s.mean).collect();
    let errors = abnormality::generalized_errors(&ErrorInputs {
        z,
        predicted: &pred_mean,
        posterior: &post_mean,
        pi_s: &pi_s,
        lambda_s: &lambda_s,
        means: &means,
    });

    let ess = belief.ess();
    let resampled = ess < model.cfg.resample_threshold * n as f64;
    if resampled {
        belief.particles = sir_resample(&belief.particles, &mut belief.rng);
    }
    let out = StepOutput {
        t: belief.t,
        pi_s,
        lambda_s,
        winner,
        predicted: pred_mean,
        posterior: post_mean,
        snapshot,
        errors,
        ess,
        resampled,
    };
    belief.t += 1;
    Ok(out)
}

/// `predict` followed by `update`.
pub fn step(belief: &mut BeliefState, z: &DVector<f64>, model: &FilterModel) -> Result<StepOutput> {
    predict(belief, model);
    update(belief, z, model)
}

/// Filter a whole sequence; the belief is initialized on the first sample.
pub fn run_filter(model: &FilterModel, observations: &[DVector<f64>]) -> Result<Vec<StepOutput>> {
    let Some(first) = observations.first() else {
        return Ok(Vec::new());
    };
    let mut b = init_belief(model, first, model.cfg.n_particles, model.cfg.seed)?;
    observations.iter().map(|z| step(&mut b, z, model)).collect()
}

/// Write the per-step trace: t, winner, ESS, KLDA, CLA, CLB, DCLA_1..d.
pub fn write_trace(path: impl AsRef<Path>, outputs: &[StepOutput]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let d = outputs.first().map(|o| o.snapshot.dcla.len()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "winner".into(), "ess".into(), "klda".into(), "cla".into(), "clb".into()];
    header.extend((1..=d).map(|n| format!("dcla_{n}")));
    w.write_record(&header)?;
    for o in outputs {
        let mut rec = vec![
            o.t.to_string(),
            o.winner.to_string(),
            o.ess.to_string(),
            o.snapshot.klda.to_string(),
            o.snapshot.cla.to_string(),
            o.snapshot.clb.to_string(),
        ];
        rec.extend(o.snapshot.dcla.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let _ = w.into_inner().map(|mut f| f.flush());
    Ok(())
}
