//! Transport between modulation vocabularies: graphs over superstates,
//! matching and joint-firing matrices, per-pair transport forces, state
//! conversion on a re-timed schedule, and transport-based modulation
//! classification.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{symmetric_kl, Gaussian, GaussianMixture};
use crate::mjpf::{run_filter, FilterModel};
use crate::abnormality::argmax;
use crate::radio::channel::db_to_linear;
use crate::radio::observation::generalized_from_samples;
use crate::radio::{ModulationScheme, C64};
use crate::vocab::{learn_vocabulary, residual_noise, LearnConfig, VocabTag, Vocabulary};

/// Gauss-Hermite points per axis for the mixture coefficient.
pub const AMC_QUADRATURE: usize = 12;

/// Multiplier from the slowest conversion period to the AMC window.
pub const AMC_ALPHA: usize = 2;

/// A single-carrier symbol stream and its generalized observations.
#[derive(Debug, Clone)]
pub struct SchemeStream {
    pub scheme: ModulationScheme,
    pub bits: Vec<u8>,
    pub symbols: Vec<C64>,
    /// One generalized observation per step; each symbol is held `hold` steps.
    pub observations: Vec<DVector<f64>>,
}

/// Modulate `bits`, hold every symbol for `hold` steps and add complex AWGN
/// at `snr_db` (none when `None`).
pub fn scheme_stream<R: Rng + ?Sized>(
    scheme: ModulationScheme,
    bits: &[u8],
    hold: usize,
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<SchemeStream> {
    if hold == 0 {
        return Err(Error::Invalid("hold must be at least 1".into()));
    }
    let symbols = scheme.modulate(bits)?;
    let sigma = snr_db.map(|s| (1.0 / db_to_linear(s) / 2.0).sqrt());
    let samples: Vec<C64> = symbols
        .iter()
        .flat_map(|s| std::iter::repeat_n(*s, hold))
        .map(|s| match sigma {
            Some(sd) => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                s + C64::new(re * sd, im * sd)
            }
            None => s,
        })
        .collect();
    let grid = DMatrix::from_row_slice(1, samples.len(), &samples);
    let observations = generalized_from_samples(&grid).into_iter().map(|o| o.z).collect();
    Ok(SchemeStream {
        scheme,
        bits: bits.to_vec(),
        symbols,
        observations,
    })
}

/// Constellation vocabulary of one scheme: one superstate per constellation
/// point, clustered on I/Q.
pub fn learn_signal_vocabulary(stream: &SchemeStream, cfg: &LearnConfig) -> Result<Vocabulary> {
    let mut cfg = cfg.clone();
    cfg.gng.max_nodes = stream.scheme.order();
    cfg.cluster_state_only = true;
    let placeholder = DVector::from_element(4, cfg.noise_floor.max(1e-6));
    let mut v = learn_vocabulary(
        std::slice::from_ref(&stream.observations),
        &cfg,
        VocabTag::Signal(stream.scheme),
        1,
        placeholder,
    )?;
    v.r_diag = residual_noise(&stream.observations, &v, cfg.noise_floor)?;
    Ok(v)
}

fn signal_scheme(v: &Vocabulary) -> Result<ModulationScheme> {
    match v.tag {
        VocabTag::Signal(s) => Ok(s),
        other => Err(Error::Invalid(format!("expected a signal vocabulary, got {other}"))),
    }
}

/// Vertices are superstates, directed weighted edges the nonzero entries of
/// the transition matrix.
#[derive(Debug, Clone)]
pub struct VocabGraph {
    pub vocab: Vocabulary,
    pub edges: Vec<(usize, usize, f64)>,
}

impl VocabGraph {
    pub fn new(vocab: Vocabulary) -> Self {
        let m = vocab.n_superstates();
        let mut edges = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let w = vocab.pi[(i, j)];
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        Self { vocab, edges }
    }

    pub fn n_vertices(&self) -> usize {
        self.vocab.n_superstates()
    }

    /// Weak connectivity over the nonzero edges.
    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Gaussian of a vertex on the I/Q block.
    pub fn state_gaussian(&self, k: usize) -> Gaussian {
        let s = &self.vocab.superstates[k];
        let h = s.mean.len() / 2;
        Gaussian {
            mean: s.mean.rows(0, h).into_owned(),
            cov: s.cov.view((0, 0), (h, h)).into_owned(),
        }
    }
}

fn row_normalize(m: &mut DMatrix<f64>) {
    let n = m.ncols();
    for mut row in m.row_iter_mut() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row /= total;
        } else {
            row.fill(1.0 / n as f64);
        }
    }
}

/// Pairwise symmetric KL between the I/Q Gaussians of the vertices, each
/// row divided by its sum.
pub fn matching_matrix(gs: &VocabGraph, gt: &VocabGraph) -> Result<DMatrix<f64>> {
    let (ns, nt) = (gs.n_vertices(), gt.n_vertices());
    let mut m = DMatrix::zeros(ns, nt);
    for k in 0..ns {
        let p = gs.state_gaussian(k);
        for l in 0..nt {
            m[(k, l)] = symmetric_kl(&p, &gt.state_gaussian(l))?;
        }
    }
    row_normalize(&mut m);
    Ok(m)
}

/// Joint firing of source and target labels. Target step `j` pairs with the
/// `γ` source steps `jγ..(j+1)γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub gamma: usize,
    /// Row-stochastic `N_S × N_T`, counting every source label of a block.
    pub marginal: DMatrix<f64>,
    /// Row-stochastic target distribution for every observed source block.
    #[serde(with = "block_entries")]
    pub tuples: BTreeMap<Vec<usize>, Vec<f64>>,
}

/// JSON object keys must be strings, so the block map is stored as a list
/// of `[block, distribution]` entries.
mod block_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<Vec<usize>, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Vec<usize>, Vec<f64>>, D::Error> {
        Ok(Vec::<(Vec<usize>, Vec<f64>)>::deserialize(d)?.into_iter().collect())
    }
}

pub fn interaction_matrix(
    source: &[usize],
    target: &[usize],
    gamma: usize,
    n_s: usize,
    n_t: usize,
) -> Result<InteractionMatrix> {
    if gamma == 0 {
        return Err(Error::Invalid("gamma must be at least 1".into()));
    }
    if source.len() != gamma * target.len() {
        return Err(Error::Length(source.len(), gamma * target.len()));
    }
    let mut marginal = DMatrix::zeros(n_s, n_t);
    let mut tuples: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for (j, &l) in target.iter().enumerate() {
        let block = &source[j * gamma..(j + 1) * gamma];
        if l >= n_t || block.iter().any(|&k| k >= n_s) {
            return Err(Error::Invalid("label outside the vocabulary".into()));
        }
        for &k in block {
            marginal[(k, l)] += 1.0;
        }
        tuples.entry(block.to_vec()).or_insert_with(|| vec![0.0; n_t])[l] += 1.0;
    }
    row_normalize(&mut marginal);
    for row in tuples.values_mut() {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(InteractionMatrix {
        gamma,
        marginal,
        tuples,
    })
}

/// `log₂ N_T / log₂ N_S`, which must be a positive integer.
pub fn retiming_factor(n_s: usize, n_t: usize) -> Result<usize> {
    if n_s < 2 || n_t < 2 || !n_s.is_power_of_two() || !n_t.is_power_of_two() {
        return Err(Error::Invalid(format!("orders {n_s} and {n_t} must be powers of two ≥ 2")));
    }
    let (bs, bt) = (n_s.trailing_zeros() as usize, n_t.trailing_zeros() as usize);
    if bt % bs != 0 || bt < bs {
        return Err(Error::Invalid(format!(
            "re-timing factor log2({n_t})/log2({n_s}) is not a positive integer"
        )));
    }
    Ok(bt / bs)
}

/// Mean and covariance of a vertex, stored with the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl Node {
    fn from_superstate(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Self {
        Self {
            mean: mean.iter().copied().collect(),
            cov: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_vec(self.mean.clone())
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let n = self.cov.len();
        DMatrix::from_fn(n, n, |i, j| self.cov[i][j])
    }
}

/// Transport force and cross-covariance of one admissible pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMap {
    pub k: usize,
    pub l: usize,
    pub force: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source: ModulationScheme,
    pub target: ModulationScheme,
    pub gamma: usize,
    pub pairs: Vec<PairMap>,
    #[serde(rename = "M")]
    pub matching: DMatrix<f64>,
    #[serde(rename = "J")]
    pub interaction: InteractionMatrix,
    pub source_nodes: Vec<Node>,
    pub target_nodes: Vec<Node>,
}

/// Paired training data: the same bits through both modulators.
pub struct PairedSamples<'a> {
    pub source: &'a [DVector<f64>],
    pub target: &'a [DVector<f64>],
    pub source_labels: &'a [usize],
    pub target_labels: &'a [usize],
}

pub fn transport_plan(gs: &VocabGraph, gt: &VocabGraph, paired: &PairedSamples<'_>) -> Result<TransportPlan> {
    let source = signal_scheme(&gs.vocab)?;
    let target = signal_scheme(&gt.vocab)?;
    let (n_s, n_t) = (gs.n_vertices(), gt.n_vertices());
    let gamma = retiming_factor(source.order(), target.order())?;
    if paired.source.len() != paired.source_labels.len() || paired.target.len() != paired.target_labels.len() {
        return Err(Error::Invalid("samples and labels are misaligned".into()));
    }
    let interaction = interaction_matrix(paired.source_labels, paired.target_labels, gamma, n_s, n_t)?;
    let matching = matching_matrix(gs, gt)?;

    let dim = gs.vocab.dim();
    let mut sums: BTreeMap<(usize, usize), (DMatrix<f64>, DVector<f64>, DVector<f64>, usize)> = BTreeMap::new();
    for (j, &l) in paired.target_labels.iter().enumerate() {
        let xt = &paired.target[j];
        for i in j * gamma..(j + 1) * gamma {
            let k = paired.source_labels[i];
            let xs = &paired.source[i];
            let e = sums
                .entry((k, l))
                .or_insert_with(|| (DMatrix::zeros(dim, dim), DVector::zeros(dim), DVector::zeros(dim), 0));
            e.0 += xt * xs.transpose();
            e.1 += xt;
            e.2 += xs;
            e.3 += 1;
        }
    }
    let pairs = sums
        .into_iter()
        .map(|((k, l), (cross, st, ss, n))| {
            let n = n as f64;
            let (mt, ms) = (st / n, ss / n);
            let c = cross / n - &mt * ms.transpose();
            let force = &gt.vocab.superstates[l].mean - &gs.vocab.superstates[k].mean;
            PairMap {
                k,
                l,
                force: force.iter().copied().collect(),
                cov: c.row_iter().map(|r| r.iter().copied().collect()).collect(),
            }
        })
        .collect();
    let nodes = |g: &VocabGraph| {
        g.vocab
            .superstates
            .iter()
            .map(|s| Node::from_superstate(&s.mean, &s.cov))
            .collect()
    };
    Ok(TransportPlan {
        source,
        target,
        gamma,
        pairs,
        matching,
        interaction,
        source_nodes: nodes(gs),
        target_nodes: nodes(gt),
    })
}

impl TransportPlan {
    /// `μ̇_{k|l} = μ_l − μ_k`.
    pub fn force(&self, k: usize, l: usize) -> DVector<f64> {
        self.target_nodes[l].mean() - self.source_nodes[k].mean()
    }

    /// Target of a source-label block: the most frequent joint firing of
    /// that block, otherwise the best product of marginal rows; remaining
    /// ties go to the smallest matching distance, then the lowest index.
    pub fn select_target(&self, labels: &[usize]) -> usize {
        let n_t = self.target_nodes.len();
        let score: Vec<f64> = match self.interaction.tuples.get(labels) {
            Some(row) => row.clone(),
            None => (0..n_t)
                .map(|l| {
                    labels
                        .iter()
                        .map(|&k| self.interaction.marginal[(k, l)].max(1e-300).ln())
                        .sum()
                })
                .collect(),
        };
        let dist = |l: usize| labels.iter().map(|&k| self.matching[(k, l)]).sum::<f64>();
        let mut best = 0;
        for l in 1..n_t {
            if score[l] > score[best] || (score[l] == score[best] && dist(l) < dist(best)) {
                best = l;
            }
        }
        best
    }

    /// Convert one block of `γ` source states with their labels.
    pub fn convert(&self, states: &[DVector<f64>], labels: &[usize]) -> Result<Conversion> {
        if states.len() != self.gamma || labels.len() != self.gamma {
            return Err(Error::Invalid(format!(
                "conversion called off-schedule: need {} source steps, got {}",
                self.gamma,
                states.len()
            )));
        }
        if labels.iter().any(|&k| k >= self.source_nodes.len()) {
            return Err(Error::Invalid("source label outside the vocabulary".into()));
        }
        let l = self.select_target(labels);
        let target_mean = self.target_nodes[l].mean();
        let dim = target_mean.len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: states[0].len(),
            });
        }
        let h = dim / 2;
        let mut state = DVector::zeros(dim);
        for (x, &k) in states.iter().zip(labels) {
            state += x + self.force(k, l);
        }
        state /= self.gamma as f64;
        state.rows_mut(h, h).copy_from(&target_mean.rows(h, h));
        Ok(Conversion { target: l, state })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = self.to_json()?;
        std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path, e))
    }
}

/// One converted target state.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub target: usize,
    pub state: DVector<f64>,
}

/// Learn a plan from one bit stream sent through both modulators.
pub fn learn_plan(
    source: &SchemeStream,
    target: &SchemeStream,
    cfg: &LearnConfig,
) -> Result<(TransportPlan, Vocabulary, Vocabulary)> {
    let vs = learn_signal_vocabulary(source, cfg)?;
    let vt = learn_signal_vocabulary(target, cfg)?;
    let ls = state_labels(&source.observations, &vs);
    let lt = state_labels(&target.observations, &vt);
    let plan = transport_plan(
        &VocabGraph::new(vs.clone()),
        &VocabGraph::new(vt.clone()),
        &PairedSamples {
            source: &source.observations,
            target: &target.observations,
            source_labels: &ls,
            target_labels: &lt,
        },
    )?;
    Ok((plan, vs, vt))
}

/// Nearest superstate on the I/Q block.
pub fn state_labels(obs: &[DVector<f64>], v: &Vocabulary) -> Vec<usize> {
    let h = v.dim() / 2;
    obs.iter()
        .map(|z| {
            let mut best = (0, f64::INFINITY);
            for (k, s) in v.superstates.iter().enumerate() {
                let d = (z.rows(0, h) - s.mean.rows(0, h)).norm_squared();
                if d < best.1 {
                    best = (k, d);
                }
            }
            best.0
        })
        .collect()
}

/// Filter a source stream and convert every complete block of `γ` steps.
/// Labels are `argmax λ`; each step contributes the labelled superstate's
/// mean, the source model's prediction for that superstate.
pub fn convert_stream(plan: &TransportPlan, source: &FilterModel, obs: &[DVector<f64>]) -> Result<Vec<Conversion>> {
    let out = run_filter(source, obs)?;
    let labels: Vec<usize> = out.iter().map(|o| argmax(&o.lambda_s)).collect();
    let states: Vec<DVector<f64>> = labels.iter().map(|&k| plan.source_nodes[k].mean()).collect();
    (0..obs.len() / plan.gamma)
        .map(|j| {
            let r = j * plan.gamma..(j + 1) * plan.gamma;
            plan.convert(&states[r.clone()], &labels[r])
        })
        .collect()
}

/// I/Q of each converted state.
pub fn converted_symbols(conversions: &[Conversion]) -> Vec<C64> {
    conversions.iter().map(|c| C64::new(c.state[0], c.state[1])).collect()
}

/// Candidate models for transport-based classification: the source model
/// and one plan per higher-order scheme, ordered by modulation order.
#[derive(Debug, Clone)]
pub struct AmcBank {
    pub schemes: Vec<ModulationScheme>,
    /// Predicted I/Q mixture per candidate, source first.
    mixtures: Vec<GaussianMixture>,
    gammas: Vec<usize>,
    r: DMatrix<f64>,
}

impl AmcBank {
    /// `source` is the source signal vocabulary; `plans` convert it to the
    /// other schemes.
    pub fn new(source: &Vocabulary, plans: &[TransportPlan]) -> Result<Self> {
        let s = signal_scheme(source)?;
        let h = source.dim() / 2;
        let total: f64 = source.superstates.iter().map(|x| x.count as f64).sum::<f64>().max(1.0);
        let src: Vec<(f64, Gaussian)> = source
            .superstates
            .iter()
            .map(|x| {
                (
                    x.count as f64 / total,
                    Gaussian {
                        mean: x.mean.rows(0, h).into_owned(),
                        cov: x.cov.view((0, 0), (h, h)).into_owned(),
                    },
                )
            })
            .collect();
        let occupancy: Vec<f64> = src.iter().map(|(w, _)| *w).collect();
        let mut schemes = vec![s];
        let mut gammas = vec![1];
        let mut mixtures = vec![GaussianMixture::new(&src)?];
        for p in plans {
            if p.source != s {
                return Err(Error::Invalid(format!("plan starts at {}, bank source is {}", p.source, s)));
            }
            if schemes.contains(&p.target) {
                return Err(Error::Invalid(format!("duplicate scheme {} in bank", p.target)));
            }
            if p.target.order() <= schemes.last().map(|x| x.order()).unwrap_or(0) {
                return Err(Error::Invalid("schemes must be ordered by increasing order".into()));
            }
            schemes.push(p.target);
            gammas.push(p.gamma);
            mixtures.push(GaussianMixture::new(&converted_mixture(p, &occupancy, h))?);
        }
        let r = DMatrix::from_diagonal(&source.r_diag.rows(0, h).into_owned());
        Ok(Self {
            schemes,
            mixtures,
            gammas,
            r,
        })
    }

    pub fn len(&self) -> usize {
        self.schemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    /// `α` times the slowest conversion period.
    pub fn window(&self) -> usize {
        AMC_ALPHA * self.gammas.iter().copied().max().unwrap_or(1)
    }

    /// Per-step `Υ_k = −ln BC(π_k, N(z, R))` over one window, for every
    /// candidate. Candidate `k` emits one symbol per `γ_k` steps, so inside
    /// each block its prediction `π_k` is the mixture reweighted by the
    /// block's earlier evidence; it returns to the prior at block starts.
    pub fn score_window(&self, window: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
        let h = self.r.nrows();
        let evidence = window
            .iter()
            .map(|z| {
                if z.len() < h {
                    return Err(Error::Dimension {
                        expected: h,
                        got: z.len(),
                    });
                }
                Ok(Gaussian {
                    mean: z.rows(0, h).into_owned(),
                    cov: self.r.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![vec![0.0; self.len()]; window.len()];
        for (k, (prior, &gamma)) in self.mixtures.iter().zip(&self.gammas).enumerate() {
            let mut pred = prior.clone();
            let prior_w = prior.weights();
            for (t, obs) in evidence.iter().enumerate() {
                if t % gamma == 0 {
                    pred.set_weights(&prior_w)?;
                }
                let bc = pred.bhattacharyya_coefficient(obs, AMC_QUADRATURE)?;
                out[t][k] = -bc.max(f64::MIN_POSITIVE).ln();
                if gamma > 1 {
                    let w = pred.responsibilities(obs)?;
                    pred.set_weights(&w)?;
                }
            }
        }
        Ok(out)
    }
}

/// Converted prediction of a plan: every target vertex reached through its
/// admissible pairs, at the mean of `μ_k + μ̇_{k|l}` weighted by source
/// occupancy and joint firing, with the target vertex covariance.
fn converted_mixture(p: &TransportPlan, occupancy: &[f64], h: usize) -> Vec<(f64, Gaussian)> {
    let n_t = p.target_nodes.len();
    let mut weight = vec![0.0; n_t];
    let mut mean = vec![DVector::zeros(h); n_t];
    for pair in &p.pairs {
        let w = occupancy.get(pair.k).copied().unwrap_or(0.0) * p.interaction.marginal[(pair.k, pair.l)];
        let c = p.source_nodes[pair.k].mean() + DVector::from_vec(pair.force.clone());
        weight[pair.l] += w;
        mean[pair.l] += c.rows(0, h) * w;
    }
    let total: f64 = weight.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    (0..n_t)
        .filter(|&l| weight[l] > 0.0)
        .map(|l| {
            let cov = p.target_nodes[l].cov().view((0, 0), (h, h)).into_owned();
            (
                weight[l] / total,
                Gaussian {
                    mean: &mean[l] / weight[l],
                    cov,
                },
            )
        })
        .collect()
}

/// Per-window decisions of transport-based classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmcResult {
    pub window: usize,
    pub upsilon: Vec<Vec<f64>>,
    /// Index into the bank's schemes, one per complete window.
    pub decisions: Vec<usize>,
}

/// Sum `Υ` over every complete window of `t_cc` steps and pick the least
/// abnormal candidate (ties to the lower order).
pub fn amc_classify(bank: &AmcBank, evidence: &[DVector<f64>]) -> Result<AmcResult> {
    if bank.is_empty() {
        return Err(Error::Invalid("empty candidate set".into()));
    }
    let window = bank.window();
    let mut upsilon = Vec::with_capacity(evidence.len());
    let mut decisions = Vec::with_capacity(evidence.len() / window);
    for w in evidence.chunks_exact(window) {
        let scores = bank.score_window(w)?;
        let sums: Vec<f64> = (0..bank.len()).map(|k| scores.iter().map(|u| u[k]).sum()).collect();
        decisions.push(crate::classifier::argmin(&sums));
        upsilon.extend(scores);
    }
    Ok(AmcResult {
        window,
        upsilon,
        decisions,
    })
}
