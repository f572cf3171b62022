//! Active-inference anti-jamming over `N` resource blocks (PRBs): belief
//! matrices over blocks, risk-aware block selection, perception through the
//! reference filter on the sensed block, abnormality-driven belief updates,
//! and Q-learning and random-hopping baselines.
//!
//! The agent transmits its command link on the block it selects and senses
//! that block: one slot over the block's sub-carriers, plus the jammer when
//! the block is attacked. Every belief stack is indexed by the dwell time `τ`
//! on the current block, capped at `tau_max`. The agent's state is the block
//! it currently occupies, so an action is also the next state.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abnormality::calibrate_eta;
use crate::error::{Error, Result};
use crate::mjpf::{init_belief, step, BeliefState, FilterConfig, FilterModel};
use crate::radio::channel::{db_to_linear, linear_to_db, sinr};
use crate::radio::observation::{generalized_from_samples, iq_vector};
use crate::radio::scenario::{synthesize_scenario, JammerPattern, JammerStrategy, ScenarioConfig};
use crate::radio::{ModulationScheme, C64};
use crate::vocab::{learn_reference, LearnConfig, Vocabulary};

/// Largest step applied to a state-action row on one collision.
pub const GAMMA_MAX: f64 = 0.5;

/// Belief stacks, one `N × N` row-stochastic slice per dwell time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBeliefs {
    /// Agent transitions between blocks.
    pub p_u: Vec<DMatrix<f64>>,
    /// Believed jammer transitions between blocks.
    pub p_j: Vec<DMatrix<f64>>,
    /// State-action table: row = current block, column = next block.
    pub pi_a: Vec<DMatrix<f64>>,
    /// Visits per (slice, row) behind the running average in `p_u`.
    visits: Vec<Vec<usize>>,
}

/// Uniform beliefs over `n` blocks for dwell times `1..=tau_max`.
pub fn init_beliefs(n: usize, tau_max: usize) -> Result<ActiveBeliefs> {
    if n < 2 {
        return Err(Error::Invalid("need at least two resource blocks".into()));
    }
    if tau_max == 0 {
        return Err(Error::Invalid("tau_max must be at least 1".into()));
    }
    let uniform = DMatrix::from_element(n, n, 1.0 / n as f64);
    Ok(ActiveBeliefs {
        p_u: vec![uniform.clone(); tau_max],
        p_j: vec![uniform.clone(); tau_max],
        pi_a: vec![uniform; tau_max],
        visits: vec![vec![0; n]; tau_max],
    })
}

impl ActiveBeliefs {
    pub fn n(&self) -> usize {
        self.pi_a[0].nrows()
    }

    pub fn tau_max(&self) -> usize {
        self.pi_a.len()
    }

    /// Slice index for dwell time `tau >= 1`.
    pub fn slice(&self, tau: usize) -> usize {
        tau.clamp(1, self.tau_max()) - 1
    }

    /// Check that every row of every slice lies on the simplex.
    pub fn validate(&self) -> Result<()> {
        for m in self.p_u.iter().chain(&self.p_j).chain(&self.pi_a) {
            for row in m.row_iter() {
                if row.iter().any(|v| *v < 0.0 || !v.is_finite()) || (row.sum() - 1.0).abs() > 1e-9 {
                    return Err(Error::Numerical("belief row left the simplex".into()));
                }
            }
        }
        Ok(())
    }
}

/// Clamp a row at zero and renormalize; an all-zero row becomes uniform.
fn clamp_row(m: &mut DMatrix<f64>, r: usize) {
    let n = m.ncols();
    for v in m.row_mut(r).iter_mut() {
        *v = v.max(0.0);
    }
    let total = m.row(r).sum();
    if total > 0.0 {
        m.row_mut(r).scale_mut(1.0 / total);
    } else {
        m.row_mut(r).fill(1.0 / n as f64);
    }
}

/// Move `delta` of probability onto column `target` of row `r`, taking
/// `delta / (N − 1)` from every other column (negative `delta` moves mass
/// away), then clamp and renormalize.
fn shift_mass(m: &mut DMatrix<f64>, r: usize, target: usize, delta: f64) {
    let n = m.ncols();
    let share = delta / (n - 1) as f64;
    for c in 0..n {
        m[(r, c)] += if c == target { delta } else { -share };
    }
    clamp_row(m, r);
}

/// Index of the largest entry; ties are broken uniformly at random.
fn argmax_random<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    ties[rng.gen_range(0..ties.len())]
}

/// `score(a) = Π_a[state, a] · (1 − P_j[row, a])`, where `row` is the block
/// of the last observed collision; without one the jammer belief is uniform.
pub fn select_action<R: Rng + ?Sized>(
    beliefs: &ActiveBeliefs,
    state: usize,
    tau: usize,
    jammer_row: Option<usize>,
    rng: &mut R,
) -> usize {
    let n = beliefs.n();
    let k = beliefs.slice(tau);
    let scores: Vec<f64> = (0..n)
        .map(|a| {
            let pj = jammer_row.map_or(1.0 / n as f64, |r| beliefs.p_j[k][(r, a)]);
            beliefs.pi_a[k][(state, a)] * (1.0 - pj)
        })
        .collect();
    argmax_random(&scores, rng)
}

/// Dirac-gated fusion: the gate is one on the selected block only, so the
/// fused observation is that block's observation.
pub fn fuse_observations(per_block: &[DVector<f64>], action: usize) -> Result<(Vec<f64>, DVector<f64>)> {
    let z = per_block
        .get(action)
        .ok_or_else(|| Error::Invalid(format!("block {action} outside 0..{}", per_block.len())))?;
    let mut gates = vec![0.0; per_block.len()];
    gates[action] = 1.0;
    Ok((gates, z.clone()))
}

/// `γ* = GAMMA_MAX · min(1, Υ_X / η)`.
pub fn gamma_star(upsilon_x: f64, eta: f64) -> f64 {
    GAMMA_MAX * (upsilon_x / eta).clamp(0.0, 1.0)
}

/// What perception reports for one sensed slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Perception {
    /// Discrete-level abnormality (symmetric KL between `π(S̃)` and `λ(S̃)`).
    pub upsilon_s: f64,
    /// Continuous-level abnormality (`−ln BC` between `π(X̃)` and `λ(X̃)`).
    pub upsilon_x: f64,
    /// `Υ_X > th`.
    pub flagged: bool,
    /// Evidence minus prediction over superstates.
    pub eps_s: Vec<f64>,
}

/// The reference filter run on the stream of sensed slots.
#[derive(Debug, Clone)]
pub struct Perceiver {
    pub model: FilterModel,
    /// Abnormality threshold `th` on `Υ_X`.
    pub th: f64,
    belief: Option<BeliefState>,
    previous: Option<DVector<f64>>,
    seed: u64,
}

impl Perceiver {
    pub fn new(model: FilterModel, th: f64, seed: u64) -> Result<Self> {
        if !(th > 0.0) {
            return Err(Error::Invalid("threshold must be positive".into()));
        }
        Ok(Self {
            model,
            th,
            belief: None,
            previous: None,
            seed,
        })
    }

    /// One filter step on a sensed slot of `d` samples; the derivative block
    /// is the difference from the previously sensed slot.
    pub fn perceive_and_score(&mut self, slot: &[C64]) -> Result<Perception> {
        let d = self.model.vocab.d;
        if slot.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: slot.len(),
            });
        }
        let x = iq_vector(slot);
        let dx = self.previous.as_ref().map_or_else(|| DVector::zeros(2 * d), |p| &x - p);
        let mut z = DVector::zeros(4 * d);
        z.rows_mut(0, 2 * d).copy_from(&x);
        z.rows_mut(2 * d, 2 * d).copy_from(&dx);
        self.previous = Some(x);
        if self.belief.is_none() {
            self.belief = Some(init_belief(&self.model, &z, self.model.cfg.n_particles, self.seed)?);
        }
        let belief = self.belief.as_mut().expect("belief initialized above");
        let out = step(belief, &z, &self.model)?;
        let upsilon_x = out.snapshot.cla.max(0.0);
        Ok(Perception {
            upsilon_s: out.snapshot.klda.max(0.0),
            upsilon_x,
            flagged: upsilon_x > self.th,
            eps_s: out.errors.eps_s,
        })
    }
}

/// One observed transition for [`update_beliefs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<'a> {
    pub state: usize,
    pub tau: usize,
    pub action: usize,
    pub flagged: bool,
    /// Step size on a flagged step.
    pub gamma: f64,
    /// Superstate-level error of the perception step.
    pub eps_s: &'a [f64],
    /// Block of the previous collision, if any.
    pub jammer_row: Option<usize>,
}

/// Fold one transition into the beliefs.
///
/// `P_u` takes a running-average step toward the observed transition; on a
/// flagged step that entry is then lowered by the total variation of `ε̃_S`.
/// On a flagged step `Π_a` moves `γ` away from the taken action and `P_j`
/// moves `γ` toward it in the row of the previous collision (the collided
/// block itself when there is none). Unflagged steps leave `Π_a` and `P_j`
/// unchanged.
pub fn update_beliefs(beliefs: &mut ActiveBeliefs, tr: &Transition<'_>) -> Result<()> {
    let n = beliefs.n();
    if tr.state >= n || tr.action >= n || tr.jammer_row.is_some_and(|r| r >= n) {
        return Err(Error::Invalid(format!("block index outside 0..{n}")));
    }
    if !(0.0..=1.0).contains(&tr.gamma) {
        return Err(Error::Invalid("gamma must lie in [0, 1]".into()));
    }
    let k = beliefs.slice(tr.tau);
    let visits = &mut beliefs.visits[k][tr.state];
    *visits += 1;
    let rate = 1.0 / *visits as f64;
    let p_u = &mut beliefs.p_u[k];
    for c in 0..n {
        let target = if c == tr.action { 1.0 } else { 0.0 };
        p_u[(tr.state, c)] += rate * (target - p_u[(tr.state, c)]);
    }
    if tr.flagged {
        let tv = 0.5 * tr.eps_s.iter().map(|e| e.abs()).sum::<f64>();
        p_u[(tr.state, tr.action)] -= tv.min(1.0);
    }
    clamp_row(p_u, tr.state);
    if tr.flagged && tr.gamma > 0.0 {
        shift_mass(&mut beliefs.pi_a[k], tr.state, tr.action, -tr.gamma);
        let row = tr.jammer_row.unwrap_or(tr.action);
        shift_mass(&mut beliefs.p_j[k], row, tr.action, tr.gamma);
    }
    Ok(())
}

/// Which policy drives the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgentKind {
    /// Active inference.
    Ain,
    /// Tabular Q-learning.
    Ql,
    /// Random frequency hopping.
    Fh,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Ain, AgentKind::Ql, AgentKind::Fh];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ain => "AIN",
            AgentKind::Ql => "QL",
            AgentKind::Fh => "FH",
        }
    }
}

/// Q-learning baseline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct QlConfig {
    pub learning_rate: f64,
    pub discount: f64,
    /// Fraction of the episode over which `ε` decays linearly from 1 to 0.
    pub decay_fraction: f64,
}

impl Default for QlConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            discount: 0.9,
            decay_fraction: 0.5,
        }
    }
}

/// The resource-block environment and agent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct ActiveConfig {
    pub n_prbs: usize,
    /// Sub-carriers sensed per block and slot.
    pub subcarriers_per_prb: usize,
    /// Jamming hit rate: fraction of blocks attacked per slot.
    pub jhr: f64,
    pub jammer_pattern: JammerPattern,
    pub snr_db: f64,
    pub jsr_db: f64,
    pub signal_scheme: ModulationScheme,
    pub jammer_scheme: ModulationScheme,
    pub steps: usize,
    pub tau_max: usize,
    /// Clean samples used to learn the reference model and its threshold.
    pub training_steps: usize,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub ql: QlConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            n_prbs: 6,
            subcarriers_per_prb: 12,
            jhr: 0.4,
            jammer_pattern: JammerPattern::Constant,
            snr_db: 15.0,
            jsr_db: 6.0,
            signal_scheme: ModulationScheme::Qpsk,
            jammer_scheme: ModulationScheme::Qpsk,
            steps: 2000,
            tau_max: 4,
            training_steps: 1500,
            learn: LearnConfig::default(),
            filter: FilterConfig::default(),
            ql: QlConfig::default(),
        }
    }
}

impl ActiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_prbs < 2 {
            return Err(Error::Config("n_prbs must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.jhr) {
            return Err(Error::Config("jhr must lie in [0, 1]".into()));
        }
        if !self.snr_db.is_finite() || !self.jsr_db.is_finite() {
            return Err(Error::Config("snr_db and jsr_db must be finite".into()));
        }
        if self.subcarriers_per_prb == 0 {
            return Err(Error::Config("subcarriers_per_prb must be at least 1".into()));
        }
        if self.steps == 0 || self.tau_max == 0 || self.training_steps < 10 {
            return Err(Error::Config("steps, tau_max and training_steps must be positive".into()));
        }
        let q = &self.ql;
        if !(q.learning_rate > 0.0 && q.learning_rate <= 1.0)
            || !(0.0..1.0).contains(&q.discount)
            || !(q.decay_fraction > 0.0 && q.decay_fraction <= 1.0)
        {
            return Err(Error::Config("invalid Q-learning settings".into()));
        }
        Ok(())
    }

    /// The jammer schedule over blocks.
    pub fn jammer(&self, seed: u64) -> JammerStrategy {
        JammerStrategy {
            pattern: self.jammer_pattern,
            target_prbs: Vec::new(),
            on_windows: Vec::new(),
            hit_rate: self.jhr,
            seed,
        }
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn random_symbol<R: Rng + ?Sized>(points: &[C64], rng: &mut R) -> C64 {
    points[rng.gen_range(0..points.len())]
}

/// Clean command-link slots (with noise) over one block, `d × len`.
fn clean_slots(cfg: &ActiveConfig, len: usize, seed: u64) -> Result<DMatrix<C64>> {
    let mut sc = ScenarioConfig {
        n_subcarriers: cfg.subcarriers_per_prb,
        n_slots: len,
        signal_scheme: cfg.signal_scheme,
        ..ScenarioConfig::default()
    }
    .clean(seed);
    sc.channel.snr_db = cfg.snr_db;
    sc.channel.jsr_db = cfg.jsr_db;
    Ok(synthesize_scenario(&sc)?.grid.samples)
}

fn slot(grid: &DMatrix<C64>, t: usize) -> Vec<C64> {
    grid.column(t).iter().copied().collect()
}

/// Reference model of the clean signal on one block and its threshold
/// `th = η` from an independent clean run.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub vocab: Vocabulary,
    pub eta: f64,
}

/// Learn the reference model offline from clean samples.
pub fn train_reference(cfg: &ActiveConfig, seed: u64) -> Result<ReferenceModel> {
    cfg.validate()?;
    let train = clean_slots(cfg, cfg.training_steps, seed)?;
    let vocab = learn_reference(&generalized_from_samples(&train), &cfg.learn)?;
    let model = FilterModel::new(vocab.clone(), cfg.filter.clone())?;
    let mut p = Perceiver::new(model, 1.0, seed ^ 0x5eed)?;
    let calib = clean_slots(cfg, cfg.training_steps, seed.wrapping_add(1))?;
    let cla = (0..calib.ncols())
        .map(|t| p.perceive_and_score(&slot(&calib, t)).map(|o| o.upsilon_x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceModel {
        vocab,
        eta: calibrate_eta(&cla)?,
    })
}

/// One step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: usize,
    pub jammed: Vec<usize>,
    /// The selected block was attacked (hypothesis H₁).
    pub collision: bool,
    /// Perception flagged the step as abnormal.
    pub flagged: bool,
    /// −1 under H₁, +1 under H₀.
    pub reward: f64,
    pub abn_s: f64,
    pub abn_x: f64,
    pub sinr_db: f64,
}

/// Aggregates of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub agent: AgentKind,
    pub steps: usize,
    pub total_reward: f64,
    pub collision_rate: f64,
    /// Collision rate over the last quarter of the episode.
    pub tail_collision_rate: f64,
    pub cumulative_reward: Vec<f64>,
    /// Running sum of `ln(Υ_X / th)`: rises on abnormal steps, falls on
    /// normal ones.
    pub cumulative_abnormality: Vec<f64>,
}

/// Full per-step record of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub agent: AgentKind,
    pub th: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    t: usize,
    action: usize,
    jammed_set: &'a str,
    reward: f64,
    #[serde(rename = "abn_S")]
    abn_s: f64,
    #[serde(rename = "abn_X")]
    abn_x: f64,
    sinr: f64,
}

/// Per-step abnormality on a log scale relative to the threshold.
pub fn log_abnormality(upsilon: f64, th: f64) -> f64 {
    (upsilon.max(1e-12) / th).ln()
}

impl EpisodeLog {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Collision rate over the steps `from..`.
    pub fn collision_rate_from(&self, from: usize) -> f64 {
        let tail = &self.steps[from.min(self.steps.len())..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|s| s.collision).count() as f64 / tail.len() as f64
    }

    pub fn cumulative_reward(&self) -> Vec<f64> {
        cumulative(self.steps.iter().map(|s| s.reward))
    }

    pub fn cumulative_abnormality(&self) -> Vec<f64> {
        cumulative(self.steps.iter().map(|s| log_abnormality(s.abn_x, self.th)))
    }

    pub fn summary(&self) -> EpisodeSummary {
        let n = self.steps.len();
        EpisodeSummary {
            agent: self.agent,
            steps: n,
            total_reward: self.total_reward(),
            collision_rate: self.collision_rate_from(0),
            tail_collision_rate: self.collision_rate_from(n - n / 4),
            cumulative_reward: self.cumulative_reward(),
            cumulative_abnormality: self.cumulative_abnormality(),
        }
    }

    /// Columns `t, action, jammed_set, reward, abn_S, abn_X, sinr`; the
    /// jammed set is `;`-separated.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        for s in &self.steps {
            let jammed = s.jammed.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
            w.serialize(CsvRow {
                t: s.t,
                action: s.action,
                jammed_set: &jammed,
                reward: s.reward,
                abn_s: s.abn_s,
                abn_x: s.abn_x,
                sinr: s.sinr_db,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path, e))
    }
}

fn cumulative(v: impl Iterator<Item = f64>) -> Vec<f64> {
    v.scan(0.0, |acc, x| {
        *acc += x;
        Some(*acc)
    })
    .collect()
}

/// Time-varying Q-table indexed by (dwell slice, block, action).
struct QLearner {
    q: Vec<DMatrix<f64>>,
    cfg: QlConfig,
    horizon: f64,
}

impl QLearner {
    fn epsilon(&self, t: usize) -> f64 {
        (1.0 - t as f64 / (self.cfg.decay_fraction * self.horizon)).max(0.0)
    }

    fn act<R: Rng + ?Sized>(&self, k: usize, state: usize, t: usize, rng: &mut R) -> usize {
        let n = self.q[k].ncols();
        if rng.gen::<f64>() < self.epsilon(t) {
            rng.gen_range(0..n)
        } else {
            let row: Vec<f64> = self.q[k].row(state).iter().copied().collect();
            argmax_random(&row, rng)
        }
    }

    fn learn(&mut self, k: usize, state: usize, action: usize, reward: f64, k_next: usize) {
        let best_next = self.q[k_next].row(action).max();
        let q = &mut self.q[k][(state, action)];
        *q += self.cfg.learning_rate * (reward + self.cfg.discount * best_next - *q);
    }
}

/// Run one episode. The command link, its noise and the jammer symbols are
/// drawn independently of the agent, so every agent faces the same
/// realisation.
pub fn run_episode(cfg: &ActiveConfig, reference: &ReferenceModel, agent: AgentKind, seed: u64) -> Result<EpisodeLog> {
    cfg.validate()?;
    let n = cfg.n_prbs;
    let model = FilterModel::new(reference.vocab.clone(), cfg.filter.clone())?;
    let mut perceiver = Perceiver::new(model, reference.eta, seed ^ 0xf11e)?;
    let jammer = cfg.jammer(seed);
    let link = clean_slots(cfg, cfg.steps, seed)?;
    let jam_points = cfg.jammer_scheme.constellation();
    let noise_var = 1.0 / db_to_linear(cfg.snr_db);
    let jam_amp = db_to_linear(cfg.jsr_db).sqrt();
    let mut jam_rng = substream(seed, 13);
    let mut agent_rng = substream(seed, 14);

    let mut beliefs = init_beliefs(n, cfg.tau_max)?;
    let mut ql = QLearner {
        q: vec![DMatrix::zeros(n, n); cfg.tau_max],
        cfg: cfg.ql.clone(),
        horizon: cfg.steps as f64,
    };
    let mut state = agent_rng.gen_range(0..n);
    let mut tau = 1;
    let mut last_collision: Option<usize> = None;
    let mut steps = Vec::with_capacity(cfg.steps);

    for t in 0..cfg.steps {
        let k = beliefs.slice(tau);
        let action = match agent {
            AgentKind::Ain => select_action(&beliefs, state, tau, last_collision, &mut agent_rng),
            AgentKind::Ql => ql.act(k, state, t, &mut agent_rng),
            AgentKind::Fh => agent_rng.gen_range(0..n),
        };
        let jammed = jammer.schedule(t, n);
        let collision = jammed.contains(&action);
        let mut sensed = slot(&link, t);
        for s in sensed.iter_mut() {
            let jam = random_symbol(&jam_points, &mut jam_rng) * jam_amp;
            if collision {
                *s += jam;
            }
        }
        let p = perceiver.perceive_and_score(&sensed)?;
        let reward = if collision { -1.0 } else { 1.0 };
        let next_tau = if action == state { (tau + 1).min(cfg.tau_max) } else { 1 };
        match agent {
            AgentKind::Ain => {
                let tr = Transition {
                    state,
                    tau,
                    action,
                    flagged: p.flagged,
                    gamma: if p.flagged { gamma_star(p.upsilon_x, reference.eta) } else { 0.0 },
                    eps_s: &p.eps_s,
                    jammer_row: last_collision,
                };
                update_beliefs(&mut beliefs, &tr)?;
                if p.flagged {
                    last_collision = Some(action);
                }
            }
            AgentKind::Ql => ql.learn(k, state, action, reward, beliefs.slice(next_tau)),
            AgentKind::Fh => {}
        }
        steps.push(StepRecord {
            t,
            action,
            jammed,
            collision,
            flagged: p.flagged,
            reward,
            abn_s: p.upsilon_s,
            abn_x: p.upsilon_x,
            sinr_db: linear_to_db(sinr(1.0, 1.0, jam_amp * jam_amp, 1.0, collision, noise_var)),
        });
        state = action;
        tau = next_tau;
    }
    Ok(EpisodeLog {
        agent,
        th: reference.eta,
        steps,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Length(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Invalid("need at least two points".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numerical("rank correlation of a constant series".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_uniform() {
        let b = init_beliefs(6, 3).unwrap();
        for m in b.p_u.iter().chain(&b.p_j).chain(&b.pi_a) {
            assert!(m.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        }
        b.validate().unwrap();
        assert!(init_beliefs(1, 3).is_err());
    }

    #[test]
    fn collision_on_block_three() {
        let mut b = init_beliefs(6, 1).unwrap();
        let eps = [0.0; 4];
        let tr = Transition {
            state: 0,
            tau: 1,
            action: 3,
            flagged: true,
            gamma: 0.5,
            eps_s: &eps,
            jammer_row: None,
        };
        update_beliefs(&mut b, &tr).unwrap();
        for a in 0..6 {
            let expect = if a == 3 { 0.0 } else { 0.2 };
            assert!((b.pi_a[0][(0, a)] - expect).abs() < 1e-12);
        }
        b.validate().unwrap();
    }

    #[test]
    fn quiet_step_leaves_action_beliefs() {
        let mut b = init_beliefs(4, 2).unwrap();
        let before = b.clone();
        let eps = [0.3, -0.3];
        let tr = Transition {
            state: 1,
            tau: 2,
            action: 2,
            flagged: false,
            gamma: 0.0,
            eps_s: &eps,
            jammer_row: Some(0),
        };
        update_beliefs(&mut b, &tr).unwrap();
        assert_eq!(b.pi_a, before.pi_a);
        assert_eq!(b.p_j, before.p_j);
        assert_eq!(b.p_u[1][(1, 2)], 1.0);
    }

    #[test]
    fn one_hot_jammer_row_is_avoided() {
        let mut b = init_beliefs(6, 1).unwrap();
        b.p_j[0].row_mut(2).fill(0.0);
        b.p_j[0][(2, 3)] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert_ne!(select_action(&b, 0, 1, Some(2), &mut rng), 3);
        }
    }

    #[test]
    fn gate_selects_one_block() {
        let obs: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_element(4, i as f64)).collect();
        let (g, z) = fuse_observations(&obs, 1).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
        assert_eq!(z, obs[1]);
        assert!(fuse_observations(&obs, 3).is_err());
    }

    #[test]
    fn spearman_reference_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }
}
