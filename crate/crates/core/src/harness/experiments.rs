//! One function per experiment kind. Each runs a single sweep point and
//! returns an outcome that reports scalar metrics and writes its artifacts.
//!
//! Seeds of the scenarios inside a point are fixed offsets from the point
//! seed, so every point is reproducible on its own.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::metrics::{detection_rates, energy_detector, median, mse, roc, RocCurve};
use super::{ExperimentConfig, SweepPoint};
use crate::abnormality::{calibrate_dcla, calibrate_eta, ThresholdConfig};
use crate::active::{run_episode, spearman, train_reference as train_active_reference, AgentKind, EpisodeLog};
use crate::classifier::{ajc_run, confusion, learn_jammer_vocabulary, p_cc, ModelBank};
use crate::error::{Error, Result};
use crate::jammer_ops::{
    characterize_continuous, clean_residual_mean, extract_jammer, suppress as remove_jammer, update_dynamic_model,
    CharacterizationLog, JammerCodebook, VOTE_GRID,
};
use crate::mjpf::{run_filter, write_trace, FilterModel, StepOutput};
use crate::radio::modulation::{analytical_ber, ber};
use crate::radio::channel::db_to_linear;
use crate::radio::{
    build_generalized_observations, synthesize_scenario, JammerWaveform, ModulationScheme, Scenario, ScenarioConfig, C64,
};
use crate::transport::{amc_classify, convert_stream, converted_symbols, learn_plan, scheme_stream, AmcBank, TransportPlan};
use crate::vocab::{learn_reference, Vocabulary};

/// Clean run used to learn the reference vocabulary.
pub const TRAIN_OFFSET: u64 = 100;
/// Clean run used to calibrate thresholds.
pub const VALIDATION_OFFSET: u64 = 200;
/// Attacked run that is scored.
pub const TEST_OFFSET: u64 = 300;
/// Attacked run used to learn jammer models.
pub const JAMMER_TRAIN_OFFSET: u64 = 400;
/// Attacked run replayed after an update.
pub const REPLAY_OFFSET: u64 = 500;
/// Attacked runs that train the classifier bank (one per scheme).
pub const CLASS_TRAIN_OFFSET: u64 = 500;
/// Attacked runs that test the classifier (spaced by ten per scheme).
pub const CLASS_TEST_OFFSET: u64 = 600;
/// Lloyd iterations when refining a jammer codebook.
pub const CODEBOOK_ITERATIONS: usize = 10;

/// Result of one sweep point.
pub trait Outcome: Send {
    /// Named scalar metrics, in a fixed order.
    fn metrics(&self) -> Vec<(String, f64)>;
    /// Write artifacts into `dir`; returns the file names written.
    fn write(&self, dir: &Path) -> Result<Vec<String>>;
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| super::metrics::csv_io(path, e))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_confusion(path: &Path, schemes: &[ModulationScheme], m: &DMatrix<usize>) -> Result<()> {
    let mut header = vec!["truth".to_string()];
    header.extend(schemes.iter().map(|s| s.name().to_string()));
    let rows: Vec<Vec<String>> = schemes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = vec![s.name().to_string()];
            r.extend((0..schemes.len()).map(|j| m[(i, j)].to_string()));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_rows(path, &h, &rows)
}

/// Generalized observations of a scenario.
pub fn observations(sc: &Scenario) -> Vec<DVector<f64>> {
    build_generalized_observations(&sc.grid).into_iter().map(|o| o.z).collect()
}

/// The configured scenario at a point's SNR and JSR.
pub fn point_scenario(cfg: &ExperimentConfig, p: &SweepPoint) -> ScenarioConfig {
    let mut s = cfg.scenario.clone();
    s.channel.snr_db = p.snr_db;
    s.channel.jsr_db = p.jsr_db;
    s
}

fn run_at(scenario: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let mut c = scenario.clone();
    c.seed = seed;
    synthesize_scenario(&c)
}

fn labelled_steps(sc: &Scenario) -> Vec<usize> {
    (0..sc.step_labels.len()).filter(|&t| sc.step_labels[t]).collect()
}

/// Reference model of the clean link with its calibrated thresholds.
#[derive(Debug, Clone)]
pub struct Reference {
    pub model: FilterModel,
    pub eta: f64,
    pub dcla: Vec<f64>,
    /// Mean clean residual, removed from extracted jammer samples.
    pub w_hat: DVector<f64>,
}

/// Learn the reference vocabulary on one clean run and calibrate on another.
pub fn train_reference(cfg: &ExperimentConfig, scenario: &ScenarioConfig, seed: u64) -> Result<Reference> {
    let train = synthesize_scenario(&scenario.clean(seed + TRAIN_OFFSET))?;
    let vocab = learn_reference(&build_generalized_observations(&train.grid), &cfg.learn)?;
    let model = FilterModel::new(vocab, cfg.filter.clone())?;
    let val = synthesize_scenario(&scenario.clean(seed + VALIDATION_OFFSET))?;
    let out = run_filter(&model, &observations(&val))?;
    let cla: Vec<f64> = out.iter().map(|o| o.snapshot.cla).collect();
    let dcla: Vec<Vec<f64>> = out.iter().map(|o| o.snapshot.dcla.clone()).collect();
    Ok(Reference {
        eta: calibrate_eta(&cla)?,
        dcla: calibrate_dcla(&dcla)?,
        w_hat: clean_residual_mean(&out)?,
        model,
    })
}

/// CLA detector against the energy detector on one attacked run.
pub struct DetectOutcome {
    pub vocab: Vocabulary,
    pub eta: f64,
    pub cla: RocCurve,
    pub energy: RocCurve,
    /// Rates of the calibrated CLA detector.
    pub p_d: f64,
    pub p_fa: f64,
    pub trace: Vec<StepOutput>,
}

pub fn detect(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<DetectOutcome> {
    let scenario = point_scenario(cfg, p);
    let r = train_reference(cfg, &scenario, p.seed)?;
    let sc = run_at(&scenario, p.seed + TEST_OFFSET)?;
    let trace = run_filter(&r.model, &observations(&sc))?;
    let cla: Vec<f64> = trace.iter().map(|o| o.snapshot.cla).collect();
    let ed: Vec<f64> = (0..sc.grid.n_slots())
        .map(|t| energy_detector(&sc.grid.samples.column(t).iter().copied().collect::<Vec<_>>()))
        .collect();
    let flags: Vec<bool> = cla.iter().map(|c| *c > r.eta).collect();
    let (p_d, p_fa) = detection_rates(&flags, &sc.step_labels)?;
    Ok(DetectOutcome {
        cla: roc(&cla, &sc.step_labels)?,
        energy: roc(&ed, &sc.step_labels)?,
        vocab: r.model.vocab,
        eta: r.eta,
        p_d,
        p_fa,
        trace,
    })
}

impl Outcome for DetectOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("auc_cla".into(), self.cla.auc),
            ("auc_ed".into(), self.energy.auc),
            ("acc_cla".into(), self.cla.acc),
            ("acc_ed".into(), self.energy.acc),
            ("eta".into(), self.eta),
            ("p_d".into(), self.p_d),
            ("p_fa".into(), self.p_fa),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        self.cla.write_csv(dir.join("roc.csv"))?;
        self.energy.write_csv(dir.join("roc_ed.csv"))?;
        self.vocab.save(dir.join("vocab.json"))?;
        write_trace(dir.join("trace.csv"), &self.trace)?;
        Ok(vec!["roc.csv".into(), "roc_ed.csv".into(), "vocab.json".into(), "trace.csv".into()])
    }
}

/// Characterization of the flagged steps of one attacked run.
pub struct CharacterizeOutcome {
    pub eta: f64,
    pub flagged: usize,
    pub log: CharacterizationLog,
}

pub fn characterize(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<CharacterizeOutcome> {
    let scenario = point_scenario(cfg, p);
    let r = train_reference(cfg, &scenario, p.seed)?;
    let sc = run_at(&scenario, p.seed + TEST_OFFSET)?;
    let out = run_filter(&r.model, &observations(&sc))?;
    let flagged: Vec<usize> = (0..out.len()).filter(|&t| out[t].snapshot.cla > r.eta).collect();
    let log = characterize_continuous(&out, &flagged, &r.model, VOTE_GRID)?;
    Ok(CharacterizeOutcome {
        eta: r.eta,
        flagged: flagged.len(),
        log,
    })
}

impl Outcome for CharacterizeOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        let same = self.log.same_superstate.iter().filter(|s| **s).count();
        vec![
            ("eta".into(), self.eta),
            ("flagged_steps".into(), self.flagged as f64),
            ("same_superstate_fraction".into(), same as f64 / self.flagged.max(1) as f64),
            ("distinct_votes".into(), self.log.votes.len() as f64),
            ("u_jammer_norm".into(), self.log.u_jammer().norm()),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        self.log.save(dir.join("characterization.json"))?;
        Ok(vec!["characterization.json".into()])
    }
}

/// Jammer suppression with a codebook learned on an independent attacked run.
pub struct SuppressOutcome {
    pub codebook: JammerCodebook,
    pub flagged: usize,
    /// Mean squared I/Q error against the clean symbols over attacked steps.
    pub mse_before: f64,
    pub mse_after: f64,
    pub ber_before: f64,
    pub ber_after: f64,
    /// `(t, squared error before, squared error after)` per attacked step.
    pub per_step: Vec<(usize, f64, f64)>,
}

fn iq_of(z: &DVector<f64>, d: usize) -> Vec<f64> {
    z.rows(0, 2 * d).iter().copied().collect()
}

fn clean_iq(sc: &Scenario, t: usize) -> Vec<f64> {
    let c = sc.clean.column(t);
    c.iter().map(|x| x.re).chain(c.iter().map(|x| x.im)).collect()
}

fn step_symbols(z: &DVector<f64>, d: usize) -> Vec<C64> {
    (0..d).map(|n| C64::new(z[n], z[d + n])).collect()
}

pub fn suppress(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<SuppressOutcome> {
    let scenario = point_scenario(cfg, p);
    let d = scenario.n_subcarriers;
    let r = train_reference(cfg, &scenario, p.seed)?;
    let means: Vec<&DVector<f64>> = r.model.vocab.superstates.iter().map(|s| &s.mean).collect();

    let train = run_at(&scenario, p.seed + JAMMER_TRAIN_OFFSET)?;
    let tz = observations(&train);
    let tout = run_filter(&r.model, &tz)?;
    let tdet: Vec<usize> = (0..tout.len()).filter(|&t| tout[t].snapshot.cla > r.eta).collect();
    if tdet.is_empty() {
        return Err(Error::Numerical("no flagged steps to learn the jammer codebook from".into()));
    }
    let mut gng = cfg.learn.gng.clone();
    gng.max_nodes = cfg.suppress.codebook_size;
    let mut codebook = JammerCodebook::learn(&extract_jammer(&tout, &r.w_hat)?, &tdet, d, &gng)?;
    codebook.refine(&tz, &tdet, &means, d, CODEBOOK_ITERATIONS)?;

    let sc = run_at(&scenario, p.seed + TEST_OFFSET)?;
    let z = observations(&sc);
    let out = run_filter(&r.model, &z)?;
    let flags: Vec<bool> = out.iter().map(|o| o.snapshot.cla > r.eta).collect();
    let j_hat = codebook.estimate(&z, &flags, &means, d)?;
    let cleaned = remove_jammer(&z, &j_hat)?;

    let attacked = labelled_steps(&sc);
    if attacked.is_empty() {
        return Err(Error::Config("suppression needs an attacked window".into()));
    }
    let mut truth = Vec::new();
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut per_step = Vec::with_capacity(attacked.len());
    let (mut truth_sym, mut before_sym, mut after_sym) = (Vec::new(), Vec::new(), Vec::new());
    for &t in &attacked {
        let c = clean_iq(&sc, t);
        let b = iq_of(&z[t], d);
        let a = iq_of(&cleaned[t], d);
        per_step.push((t, mse(&b, &c)?, mse(&a, &c)?));
        truth.extend_from_slice(&c);
        before.extend(b);
        after.extend(a);
        truth_sym.extend(sc.clean.column(t).iter().copied());
        before_sym.extend(step_symbols(&z[t], d));
        after_sym.extend(step_symbols(&cleaned[t], d));
    }
    let scheme = scenario.signal_scheme;
    let ref_bits = scheme.demodulate(&truth_sym);
    Ok(SuppressOutcome {
        codebook,
        flagged: flags.iter().filter(|f| **f).count(),
        mse_before: mse(&before, &truth)?,
        mse_after: mse(&after, &truth)?,
        ber_before: ber(&scheme.demodulate(&before_sym), &ref_bits)?,
        ber_after: ber(&scheme.demodulate(&after_sym), &ref_bits)?,
        per_step,
    })
}

impl Outcome for SuppressOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("flagged_steps".into(), self.flagged as f64),
            ("mse_before".into(), self.mse_before),
            ("mse_after".into(), self.mse_after),
            ("ber_before".into(), self.ber_before),
            ("ber_after".into(), self.ber_after),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        write_json(&dir.join("codebook.json"), &self.codebook)?;
        let rows: Vec<Vec<String>> = self
            .per_step
            .iter()
            .map(|(t, b, a)| vec![t.to_string(), b.to_string(), a.to_string()])
            .collect();
        write_rows(&dir.join("suppression.csv"), &["t", "mse_before", "mse_after"], &rows)?;
        Ok(vec!["codebook.json".into(), "suppression.csv".into()])
    }
}

/// Reference-only versus updated model on a replay of the same attack.
pub struct UpdateOutcome {
    pub log: CharacterizationLog,
    pub median_cla_reference: f64,
    pub median_cla_updated: f64,
    pub reference_trace: Vec<StepOutput>,
    pub updated_trace: Vec<StepOutput>,
}

impl UpdateOutcome {
    /// Reference over updated median CLA on attacked replay steps.
    pub fn ratio(&self) -> f64 {
        self.median_cla_reference / self.median_cla_updated
    }
}

pub fn update(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<UpdateOutcome> {
    let scenario = point_scenario(cfg, p);
    let r = train_reference(cfg, &scenario, p.seed)?;
    let train = run_at(&scenario, p.seed + JAMMER_TRAIN_OFFSET)?;
    let out = run_filter(&r.model, &observations(&train))?;
    let log = characterize_continuous(&out, &labelled_steps(&train), &r.model, VOTE_GRID)?;
    let updated = update_dynamic_model(&r.model, &log.u_jammer())?;

    let replay = run_at(&scenario, p.seed + REPLAY_OFFSET)?;
    let z = observations(&replay);
    let reference_trace = run_filter(&r.model, &z)?;
    let updated_trace = run_filter(&updated, &z)?;
    let attacked = labelled_steps(&replay);
    let med = |tr: &[StepOutput]| median(&attacked.iter().map(|&t| tr[t].snapshot.cla).collect::<Vec<_>>());
    Ok(UpdateOutcome {
        median_cla_reference: med(&reference_trace)?,
        median_cla_updated: med(&updated_trace)?,
        log,
        reference_trace,
        updated_trace,
    })
}

impl Outcome for UpdateOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("median_cla_reference".into(), self.median_cla_reference),
            ("median_cla_updated".into(), self.median_cla_updated),
            ("cla_ratio".into(), self.ratio()),
            ("u_jammer_norm".into(), self.log.u_jammer().norm()),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        self.log.save(dir.join("characterization.json"))?;
        write_trace(dir.join("trace_reference.csv"), &self.reference_trace)?;
        write_trace(dir.join("trace_updated.csv"), &self.updated_trace)?;
        Ok(vec![
            "characterization.json".into(),
            "trace_reference.csv".into(),
            "trace_updated.csv".into(),
        ])
    }
}

/// Jammer classification with a bank of learned jammer models.
pub struct ClassifyOutcome {
    pub schemes: Vec<ModulationScheme>,
    pub vocabs: Vec<Vocabulary>,
    /// Per-step accuracy over every test run.
    pub p_cc: f64,
    /// Accuracy of the per-run majority label.
    pub majority_p_cc: f64,
    pub confusion: DMatrix<usize>,
}

pub fn classify(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<ClassifyOutcome> {
    let mut scenario = point_scenario(cfg, p);
    let d = scenario.n_subcarriers;
    let r = train_reference(cfg, &scenario, p.seed)?;
    let schemes = cfg.classify.schemes.clone();
    let mut evidence = |scheme: ModulationScheme, seed: u64| -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
        scenario.jammer_waveform = JammerWaveform::Modulated { scheme };
        let sc = run_at(&scenario, seed)?;
        let out = run_filter(&r.model, &observations(&sc))?;
        Ok((out.into_iter().map(|o| o.errors.eps_z2).collect(), labelled_steps(&sc)))
    };
    let mut learn = cfg.learn.clone();
    learn.gng.max_nodes = p.l;
    let mut vocabs = Vec::with_capacity(schemes.len());
    for (k, &s) in schemes.iter().enumerate() {
        let (e, steps) = evidence(s, p.seed + CLASS_TRAIN_OFFSET + k as u64)?;
        vocabs.push(learn_jammer_vocabulary(&e, &steps, s, d, &r.model.vocab.r_diag, &learn)?);
    }
    let bank = ModelBank::new(vocabs.clone(), &cfg.filter)?;
    let (mut preds, mut truth, mut maj, mut maj_truth) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, &s) in schemes.iter().enumerate() {
        let seed = p.seed + CLASS_TEST_OFFSET + 10 * k as u64;
        let (e, steps) = evidence(s, seed)?;
        let ev: Vec<DVector<f64>> = steps.iter().map(|&t| e[t].clone()).collect();
        let res = ajc_run(&bank, &ev, seed)?;
        truth.extend(std::iter::repeat_n(k, res.k_hat.len()));
        preds.extend(res.k_hat);
        maj.push(res.majority);
        maj_truth.push(k);
    }
    Ok(ClassifyOutcome {
        p_cc: p_cc(&preds, &truth)?,
        majority_p_cc: p_cc(&maj, &maj_truth)?,
        confusion: confusion(&preds, &truth, schemes.len())?,
        schemes,
        vocabs,
    })
}

impl Outcome for ClassifyOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("p_cc".into(), self.p_cc),
            ("majority_p_cc".into(), self.majority_p_cc),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        write_confusion(&dir.join("confusion.csv"), &self.schemes, &self.confusion)?;
        let mut files = vec!["confusion.csv".to_string()];
        for (s, v) in self.schemes.iter().zip(&self.vocabs) {
            let name = format!("jammer_vocab_{}.json", s.name());
            v.save(dir.join(&name))?;
            files.push(name);
        }
        Ok(files)
    }
}

fn random_bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Add complex AWGN for unit-energy symbols at `snr_db`.
fn add_awgn(symbols: &mut [C64], snr_db: f64, rng: &mut ChaCha8Rng) {
    let sd = (1.0 / db_to_linear(snr_db) / 2.0).sqrt();
    for s in symbols {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += C64::new(re * sd, im * sd);
    }
}

/// `(training SNR, test SNR)` of a transport point; `None` is noiseless.
fn transport_snr(cfg: &ExperimentConfig, p: &SweepPoint) -> (Option<f64>, Option<f64>) {
    if cfg.transport.noiseless {
        (Some(cfg.transport.noiseless_train_snr_db), None)
    } else {
        (Some(p.snr_db), Some(p.snr_db))
    }
}

/// One converted target scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionRow {
    pub target: ModulationScheme,
    pub gamma: usize,
    pub ber: f64,
    /// Analytical BER at the test SNR (zero when noiseless).
    pub analytical_ber: f64,
}

/// Modulation conversion from the source scheme to every target.
pub struct ConvertOutcome {
    pub rows: Vec<ConversionRow>,
    pub plans: Vec<TransportPlan>,
}

pub fn convert(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<ConvertOutcome> {
    let ts = &cfg.transport;
    let (train_snr, test_snr) = transport_snr(cfg, p);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let b = random_bits(ts.train_bits, &mut rng);
    let src = scheme_stream(ts.source, &b, 1, train_snr, &mut rng)?;
    let mut rows = Vec::new();
    let mut plans = Vec::new();
    for &target in &ts.targets {
        let tgt = scheme_stream(target, &b, 1, train_snr, &mut rng)?;
        let (plan, vs, _) = learn_plan(&src, &tgt, &cfg.learn)?;
        let model = FilterModel::new(vs, cfg.filter.clone())?;
        let tb = random_bits(ts.test_bits, &mut rng);
        let test = scheme_stream(ts.source, &tb, 1, test_snr, &mut rng)?;
        let mut symbols = converted_symbols(&convert_stream(&plan, &model, &test.observations)?);
        if let Some(s) = test_snr {
            add_awgn(&mut symbols, s, &mut rng);
        }
        rows.push(ConversionRow {
            target,
            gamma: plan.gamma,
            ber: ber(&target.demodulate(&symbols), &tb)?,
            analytical_ber: test_snr.map(|s| analytical_ber(target, db_to_linear(s))).unwrap_or(0.0),
        });
        plans.push(plan);
    }
    Ok(ConvertOutcome { rows, plans })
}

impl Outcome for ConvertOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        let mut m = Vec::new();
        for r in &self.rows {
            let s = r.target.name();
            m.push((format!("gamma_{s}"), r.gamma as f64));
            m.push((format!("ber_{s}"), r.ber));
            m.push((format!("analytical_ber_{s}"), r.analytical_ber));
        }
        m
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.target.name().to_string(),
                    r.gamma.to_string(),
                    r.ber.to_string(),
                    r.analytical_ber.to_string(),
                ]
            })
            .collect();
        write_rows(&dir.join("conversion.csv"), &["target", "gamma", "ber", "analytical_ber"], &rows)?;
        let mut files = vec!["conversion.csv".to_string()];
        for plan in &self.plans {
            let name = format!("plan_{}.json", plan.target.name());
            plan.save(dir.join(&name))?;
            files.push(name);
        }
        Ok(files)
    }
}

/// Transport-based modulation classification.
pub struct AmcOutcome {
    pub schemes: Vec<ModulationScheme>,
    pub window: usize,
    /// Fraction of correctly classified windows.
    pub accuracy: f64,
    pub confusion: DMatrix<usize>,
}

pub fn amc(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<AmcOutcome> {
    let ts = &cfg.transport;
    let (train_snr, test_snr) = transport_snr(cfg, p);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let b = random_bits(ts.train_bits, &mut rng);
    let src = scheme_stream(ts.source, &b, 1, train_snr, &mut rng)?;
    let mut plans = Vec::new();
    let mut source_vocab = None;
    for &target in &ts.targets {
        let tgt = scheme_stream(target, &b, 1, train_snr, &mut rng)?;
        let (plan, vs, _) = learn_plan(&src, &tgt, &cfg.learn)?;
        plans.push(plan);
        source_vocab.get_or_insert(vs);
    }
    let source_vocab = source_vocab.ok_or_else(|| Error::Config("AMC needs at least one target".into()))?;
    let bank = AmcBank::new(&source_vocab, &plans)?;
    let k = bank.len();
    let (mut preds, mut truth) = (Vec::new(), Vec::new());
    for (i, &s) in bank.schemes.iter().enumerate() {
        let hold = s.bits_per_symbol() / ts.source.bits_per_symbol();
        let tb = random_bits(ts.amc_bits, &mut rng);
        let ev = scheme_stream(s, &tb, hold, test_snr, &mut rng)?;
        let res = amc_classify(&bank, &ev.observations)?;
        truth.extend(std::iter::repeat_n(i, res.decisions.len()));
        preds.extend(res.decisions);
    }
    Ok(AmcOutcome {
        accuracy: p_cc(&preds, &truth)?,
        confusion: confusion(&preds, &truth, k)?,
        window: bank.window(),
        schemes: bank.schemes.clone(),
    })
}

impl Outcome for AmcOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("accuracy".into(), self.accuracy),
            ("window".into(), self.window as f64),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        write_confusion(&dir.join("confusion.csv"), &self.schemes, &self.confusion)?;
        Ok(vec!["confusion.csv".into()])
    }
}

/// One episode per agent on the same link and jammer realisation.
pub struct AntijamOutcome {
    pub eta: f64,
    pub logs: Vec<EpisodeLog>,
    /// Spearman correlation of cumulative reward and cumulative abnormality
    /// per agent.
    pub spearman: Vec<f64>,
}

impl AntijamOutcome {
    pub fn log(&self, agent: AgentKind) -> Option<&EpisodeLog> {
        self.logs.iter().find(|l| l.agent == agent)
    }
}

pub fn antijam(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<AntijamOutcome> {
    let mut a = cfg.active.clone();
    a.snr_db = p.snr_db;
    a.jsr_db = p.jsr_db;
    a.n_prbs = p.bandwidth;
    let reference = train_active_reference(&a, p.seed + TRAIN_OFFSET)?;
    let mut logs = Vec::new();
    let mut rho = Vec::new();
    for agent in AgentKind::ALL {
        let log = run_episode(&a, &reference, agent, p.seed)?;
        rho.push(spearman(&log.cumulative_reward(), &log.cumulative_abnormality())?);
        logs.push(log);
    }
    Ok(AntijamOutcome {
        eta: reference.eta,
        logs,
        spearman: rho,
    })
}

impl Outcome for AntijamOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        let mut m = vec![("eta".to_string(), self.eta)];
        for (log, rho) in self.logs.iter().zip(&self.spearman) {
            let s = log.summary();
            let n = log.agent.name();
            m.push((format!("reward_{n}"), s.total_reward));
            m.push((format!("collision_rate_{n}"), s.collision_rate));
            m.push((format!("tail_collision_rate_{n}"), s.tail_collision_rate));
            m.push((format!("spearman_{n}"), *rho));
        }
        m
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let mut files = Vec::new();
        for log in &self.logs {
            let n = log.agent.name();
            let (csv, json) = (format!("episode_{n}.csv"), format!("summary_{n}.json"));
            log.write_csv(dir.join(&csv))?;
            log.write_summary(dir.join(&json))?;
            files.push(csv);
            files.push(json);
        }
        Ok(files)
    }
}

/// Thresholds calibrated on a clean run.
pub struct CalibrateOutcome {
    pub thresholds: ThresholdConfig,
}

pub fn calibrate(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<CalibrateOutcome> {
    let r = train_reference(cfg, &point_scenario(cfg, p), p.seed)?;
    Ok(CalibrateOutcome {
        thresholds: ThresholdConfig {
            eta: r.eta,
            dcla: r.dcla,
            ..ThresholdConfig::default()
        },
    })
}

impl Outcome for CalibrateOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        let t = &self.thresholds;
        let dmean = t.dcla.iter().sum::<f64>() / t.dcla.len().max(1) as f64;
        vec![("eta".into(), t.eta), ("dcla_mean".into(), dmean)]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        write_json(&dir.join("thresholds.json"), &self.thresholds)?;
        Ok(vec!["thresholds.json".into()])
    }
}

/// Reference vocabulary learned on a clean run.
pub struct LearnOutcome {
    pub vocab: Vocabulary,
}

pub fn learn(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<LearnOutcome> {
    let scenario = point_scenario(cfg, p);
    let train = synthesize_scenario(&scenario.clean(p.seed + TRAIN_OFFSET))?;
    Ok(LearnOutcome {
        vocab: learn_reference(&build_generalized_observations(&train.grid), &cfg.learn)?,
    })
}

impl Outcome for LearnOutcome {
    fn metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("n_superstates".into(), self.vocab.n_superstates() as f64),
            ("tau_max".into(), self.vocab.tau_max() as f64),
        ]
    }

    fn write(&self, dir: &Path) -> Result<Vec<String>> {
        self.vocab.save(dir.join("vocab.json"))?;
        Ok(vec!["vocab.json".into()])
    }
}
