//! Experiment orchestration: configuration, sweeps over SNR, JSR, model size
//! and bandwidth, parallel execution of isolated sweep points, metric and
//! artifact files, and a hashed manifest.

pub mod experiments;
pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::active::ActiveConfig;
use crate::error::{Error, Result};
use crate::mjpf::FilterConfig;
use crate::radio::{bandwidth_for_prbs, JammerStrategy, JammerWaveform, ModulationScheme, ScenarioConfig};
use crate::vocab::LearnConfig;
use experiments::{write_json, Outcome};

pub use metrics::{detection_rates, energy_detector, median, mse, rmse, roc, RocCurve};

/// What an experiment does at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    /// CLA detector and energy-detector ROC on an attacked run.
    Detect,
    /// Characterization of the flagged steps.
    Characterize,
    /// Codebook-based jammer suppression.
    Suppress,
    /// Characterization, dynamic-model update and replay.
    Update,
    /// Jammer classification with a model bank.
    Classify,
    /// Modulation conversion through transport plans.
    Convert,
    /// Transport-based modulation classification.
    Amc,
    /// Resource-block selection under jamming.
    Antijam,
    /// Threshold calibration on a clean run.
    Calibrate,
    /// Reference vocabulary learning.
    Learn,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Detect,
        ExperimentKind::Characterize,
        ExperimentKind::Suppress,
        ExperimentKind::Update,
        ExperimentKind::Classify,
        ExperimentKind::Convert,
        ExperimentKind::Amc,
        ExperimentKind::Antijam,
        ExperimentKind::Calibrate,
        ExperimentKind::Learn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Detect => "detect",
            ExperimentKind::Characterize => "characterize",
            ExperimentKind::Suppress => "suppress",
            ExperimentKind::Update => "update",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Convert => "convert",
            ExperimentKind::Amc => "amc",
            ExperimentKind::Antijam => "antijam",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Learn => "learn",
        }
    }

    /// Sweep axes the kind reads, in the order snr, jsr, L, bandwidth.
    fn axes(self) -> [bool; 4] {
        match self {
            ExperimentKind::Classify => [true, true, true, false],
            ExperimentKind::Convert | ExperimentKind::Amc => [true, false, false, false],
            ExperimentKind::Antijam => [true, true, false, true],
            _ => [true, true, false, false],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Values swept over; every combination with every seed is one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct SweepAxes {
    pub snr_db: Vec<f64>,
    pub jsr_db: Vec<f64>,
    /// Jammer-model size (GNG nodes) for classification.
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    /// Resource blocks for anti-jamming, one of the LTE counts 6, 15, 25, 50, 75 or 100.
    pub bandwidth: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            snr_db: vec![15.0],
            jsr_db: vec![6.0],
            l: vec![4],
            bandwidth: vec![6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct SuppressSettings {
    /// Jammer codebook size.
    pub codebook_size: usize,
}

impl Default for SuppressSettings {
    fn default() -> Self {
        Self { codebook_size: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct ClassifySettings {
    /// Jammer modulations of the bank, one model each.
    pub schemes: Vec<ModulationScheme>,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            schemes: vec![
                ModulationScheme::Bpsk,
                ModulationScheme::Qpsk,
                ModulationScheme::Qam16,
                ModulationScheme::Qam64,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct TransportSettings {
    pub source: ModulationScheme,
    pub targets: Vec<ModulationScheme>,
    /// Bits of the paired training streams.
    pub train_bits: usize,
    /// Bits converted per target.
    pub test_bits: usize,
    /// Bits per scheme when testing classification.
    pub amc_bits: usize,
    /// Test without noise (training then uses `noiseless_train_snr_db`).
    #[serde(default)]
    pub noiseless: bool,
    pub noiseless_train_snr_db: f64,
}

impl Default for TransportSettings {
    fn default() -> Self {
        Self {
            source: ModulationScheme::Bpsk,
            targets: vec![ModulationScheme::Qpsk, ModulationScheme::Qam16, ModulationScheme::Qam64],
            train_bits: 12_000,
            test_bits: 6_000,
            amc_bits: 1_200,
            noiseless: false,
            noiseless_train_snr_db: 30.0,
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Link, channel and jammer; SNR and JSR are overridden by the sweep.
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sweep: SweepAxes,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub suppress: SuppressSettings,
    #[serde(default)]
    pub classify: ClassifySettings,
    #[serde(default)]
    pub transport: TransportSettings,
    /// Anti-jamming environment; SNR, JSR and block count come from the sweep.
    #[serde(default)]
    pub active: ActiveConfig,
}

impl ExperimentConfig {
    /// Defaults for a kind. UPDATE uses a drifting jammer in short bursts.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut scenario = ScenarioConfig::default();
        let mut sweep = SweepAxes::default();
        match kind {
            ExperimentKind::Update => {
                scenario.jammer_waveform = JammerWaveform::Drift { re: 0.25, im: -0.25 };
                scenario.jammer = JammerStrategy::full_band((300..600).step_by(60).map(|a| (a, a + 30)).collect());
            }
            ExperimentKind::Classify => sweep.snr_db = vec![16.0],
            ExperimentKind::Convert | ExperimentKind::Amc => sweep.snr_db = vec![8.0, 16.0],
            _ => {}
        }
        Self {
            kind,
            scenario,
            sweep,
            seeds: vec![0],
            output_dir: PathBuf::from("out").join(kind.name()),
            learn: LearnConfig::default(),
            filter: FilterConfig::default(),
            suppress: SuppressSettings::default(),
            classify: ClassifySettings::default(),
            transport: TransportSettings::default(),
            active: ActiveConfig::default(),
        }
    }

    /// JSON schema of the config file, as published in `docs/`.
    pub fn json_schema() -> Result<String> {
        Ok(serde_json::to_string_pretty(&schemars::schema_for!(ExperimentConfig))? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let s = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::from_json(&s).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        let lens = [s.snr_db.len(), s.jsr_db.len(), s.l.len(), s.bandwidth.len()];
        let names = ["snr_db", "jsr_db", "L", "bandwidth"];
        for ((len, used), name) in lens.iter().zip(self.kind.axes()).zip(names) {
            if *len == 0 {
                return Err(Error::Config(format!("sweep axis {name} is empty")));
            }
            if !used && *len > 1 {
                return Err(Error::Config(format!("{} does not sweep {name}", self.kind)));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds is empty".into()));
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir is empty".into()));
        }
        if s.snr_db.iter().chain(&s.jsr_db).any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep SNR and JSR values must be finite".into()));
        }
        self.learn.gng.validate()?;
        if self.filter.n_particles == 0 {
            return Err(Error::Config("filter needs at least one particle".into()));
        }
        match self.kind {
            ExperimentKind::Convert | ExperimentKind::Amc => self.validate_transport(),
            ExperimentKind::Antijam => {
                for &b in &s.bandwidth {
                    bandwidth_for_prbs(b)?;
                }
                self.active.validate()
            }
            ExperimentKind::Classify => {
                if self.classify.schemes.len() < 2 {
                    return Err(Error::Config("classification needs at least two schemes".into()));
                }
                if s.l.iter().any(|l| *l < 2) {
                    return Err(Error::Config("L must be at least 2".into()));
                }
                self.scenario.validate()
            }
            ExperimentKind::Suppress if self.suppress.codebook_size < 2 => {
                Err(Error::Config("codebook_size must be at least 2".into()))
            }
            _ => self.scenario.validate(),
        }
    }

    fn validate_transport(&self) -> Result<()> {
        let t = &self.transport;
        if t.targets.is_empty() || t.targets.contains(&t.source) {
            return Err(Error::Config("transport needs targets distinct from the source".into()));
        }
        let src = t.source.bits_per_symbol();
        for s in std::iter::once(t.source).chain(t.targets.iter().copied()) {
            let k = s.bits_per_symbol();
            if k % src != 0 {
                return Err(Error::Config(format!("{s} does not carry a whole number of {} symbols", t.source)));
            }
            for (name, n) in [("train_bits", t.train_bits), ("test_bits", t.test_bits), ("amc_bits", t.amc_bits)] {
                if n == 0 || n % k != 0 {
                    return Err(Error::Config(format!("{name} must be a positive multiple of {k}")));
                }
            }
        }
        Ok(())
    }

    /// Every combination of the sweep axes with every seed, seeds innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for &snr_db in &s.snr_db {
            for &jsr_db in &s.jsr_db {
                for &l in &s.l {
                    for &bandwidth in &s.bandwidth {
                        for &seed in &self.seeds {
                            out.push(SweepPoint {
                                snr_db,
                                jsr_db,
                                l,
                                bandwidth,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One isolated run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub jsr_db: f64,
    pub l: usize,
    pub bandwidth: usize,
    pub seed: u64,
}

impl SweepPoint {
    /// Output subdirectory name.
    pub fn label(&self) -> String {
        format!(
            "snr{}_jsr{}_L{}_bw{}_seed{}",
            self.snr_db, self.jsr_db, self.l, self.bandwidth, self.seed
        )
    }
}

/// Run the configured experiment at one point.
pub fn run_point(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<Box<dyn Outcome>> {
    use experiments as e;
    Ok(match cfg.kind {
        ExperimentKind::Detect => Box::new(e::detect(cfg, p)?),
        ExperimentKind::Characterize => Box::new(e::characterize(cfg, p)?),
        ExperimentKind::Suppress => Box::new(e::suppress(cfg, p)?),
        ExperimentKind::Update => Box::new(e::update(cfg, p)?),
        ExperimentKind::Classify => Box::new(e::classify(cfg, p)?),
        ExperimentKind::Convert => Box::new(e::convert(cfg, p)?),
        ExperimentKind::Amc => Box::new(e::amc(cfg, p)?),
        ExperimentKind::Antijam => Box::new(e::antijam(cfg, p)?),
        ExperimentKind::Calibrate => Box::new(e::calibrate(cfg, p)?),
        ExperimentKind::Learn => Box::new(e::learn(cfg, p)?),
    })
}

/// Metrics of one finished point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: SweepPoint,
    pub metrics: BTreeMap<String, f64>,
}

/// One file of a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub artifacts: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub points: Vec<PointReport>,
    pub manifest: Manifest,
}

/// Name of the manifest file in the output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn hash_file(root: &Path, rel: &str) -> Result<ManifestEntry> {
    let p = root.join(rel);
    let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(ManifestEntry {
        path: rel.to_string(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        bytes: bytes.len() as u64,
    })
}

fn run_one(cfg: &ExperimentConfig, p: &SweepPoint) -> Result<(PointReport, Vec<String>)> {
    let label = p.label();
    let dir = cfg.output_dir.join(&label);
    create_dir(&dir)?;
    let outcome = run_point(cfg, p)?;
    let mut files = outcome.write(&dir)?;
    let metrics: BTreeMap<String, f64> = outcome.metrics().into_iter().collect();
    write_json(&dir.join("metrics.json"), &metrics)?;
    files.push("metrics.json".into());
    let files = files.into_iter().map(|f| format!("{label}/{f}")).collect();
    Ok((PointReport { point: *p, metrics }, files))
}

fn write_metrics_csv(path: &Path, reports: &[PointReport]) -> Result<()> {
    let keys: BTreeSet<&String> = reports.iter().flat_map(|r| r.metrics.keys()).collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| metrics::csv_io(path, e))?;
    let mut header: Vec<String> = ["snr_db", "jsr_db", "L", "bandwidth", "seed"].map(String::from).to_vec();
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    for r in reports {
        let p = &r.point;
        let mut row = vec![
            p.snr_db.to_string(),
            p.jsr_db.to_string(),
            p.l.to_string(),
            p.bandwidth.to_string(),
            p.seed.to_string(),
        ];
        row.extend(keys.iter().map(|k| r.metrics.get(*k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Seed-averaged classification accuracy per `(snr, jsr, L)`.
fn write_accuracy_vs_snr(path: &Path, reports: &[PointReport]) -> Result<()> {
    let mut groups: Vec<((f64, f64, usize), Vec<&PointReport>)> = Vec::new();
    for r in reports {
        let key = (r.point.snr_db, r.point.jsr_db, r.point.l);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.sort_by(|a, b| {
        a.0 .0
            .total_cmp(&b.0 .0)
            .then(a.0 .1.total_cmp(&b.0 .1))
            .then(a.0 .2.cmp(&b.0 .2))
    });
    let mut w = csv::Writer::from_path(path).map_err(|e| metrics::csv_io(path, e))?;
    w.write_record(["snr_db", "jsr_db", "L", "p_cc", "majority_p_cc"])?;
    for ((snr, jsr, l), g) in &groups {
        let mean = |k: &str| g.iter().map(|r| r.metrics[k]).sum::<f64>() / g.len() as f64;
        w.write_record([
            snr.to_string(),
            jsr.to_string(),
            l.to_string(),
            mean("p_cc").to_string(),
            mean("majority_p_cc").to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Run every sweep point in parallel, each in its own subdirectory, then
/// write the resolved config, a metrics table and a manifest of every file
/// with its SHA-256.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let root = &cfg.output_dir;
    create_dir(root)?;
    let results: Vec<Result<(PointReport, Vec<String>)>> =
        cfg.points().par_iter().map(|p| run_one(cfg, p)).collect();
    let mut points = Vec::with_capacity(results.len());
    let mut files = Vec::new();
    for r in results {
        let (report, f) = r?;
        points.push(report);
        files.extend(f);
    }
    write_json(&root.join("config.json"), cfg)?;
    write_metrics_csv(&root.join("metrics.csv"), &points)?;
    files.push("config.json".into());
    files.push("metrics.csv".into());
    if cfg.kind == ExperimentKind::Classify {
        write_accuracy_vs_snr(&root.join("accuracy_vs_snr.csv"), &points)?;
        files.push("accuracy_vs_snr.csv".into());
    }
    files.sort();
    let manifest = Manifest {
        kind: cfg.kind,
        artifacts: files.iter().map(|f| hash_file(root, f)).collect::<Result<_>>()?,
    };
    write_json(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(RunReport { points, manifest })
}
