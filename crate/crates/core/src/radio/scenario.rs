//! Resource-grid synthesis: command symbols on `d` sub-carriers, jammer
//! injection under a configurable strategy, AWGN, and ground-truth labels.
//!
//! Signal, noise, jammer symbols and jammer scheduling each draw from their
//! own seeded stream, so changing the jammer power never perturbs the
//! command or noise realisations.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::channel::{self, db_to_linear, ChannelConfig, PathLossModel};
use super::modulation::{ModulationScheme, C64};
use super::trajectory::{command_bits, integrate_trajectory, FlightPlan, Trajectory};
use crate::error::{Error, Result};

/// LTE channel bandwidths in MHz with their resource-block counts.
pub const LTE_BANDWIDTHS: [(f64, usize); 6] = [(1.4, 6), (3.0, 15), (5.0, 25), (10.0, 50), (15.0, 75), (20.0, 100)];

/// Resource blocks of an LTE channel bandwidth.
pub fn prbs_for_bandwidth(mhz: f64) -> Result<usize> {
    LTE_BANDWIDTHS
        .iter()
        .find(|(b, _)| (b - mhz).abs() < 1e-9)
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::Config(format!("{mhz} MHz is not an LTE channel bandwidth")))
}

/// LTE channel bandwidth in MHz carrying `n_prbs` resource blocks.
pub fn bandwidth_for_prbs(n_prbs: usize) -> Result<f64> {
    LTE_BANDWIDTHS
        .iter()
        .find(|(_, n)| *n == n_prbs)
        .map(|(b, _)| *b)
        .ok_or_else(|| Error::Config(format!("{n_prbs} is not an LTE resource-block count")))
}

/// d sub-carriers × T symbol slots of post-FFT resource elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub samples: DMatrix<C64>,
    pub subcarrier_spacing_hz: f64,
    pub slot_duration_s: f64,
}

impl ResourceGrid {
    pub fn n_subcarriers(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_slots(&self) -> usize {
        self.samples.ncols()
    }
}

/// Temporal pattern of the jammer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JammerPattern {
    #[default]
    Constant,
    Random,
    Sweep,
    Windowed,
}

/// Where and when the jammer transmits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct JammerStrategy {
    pub pattern: JammerPattern,
    /// Attacked resource indices (0-based). Empty means "pick
    /// `round(hit_rate * n)` of them from the seed".
    #[serde(default)]
    pub target_prbs: Vec<usize>,
    /// Half-open `[start, end)` windows when the jammer is on. Empty means
    /// always on.
    #[serde(default)]
    pub on_windows: Vec<(usize, usize)>,
    /// Fraction of resources attacked per slot.
    pub hit_rate: f64,
    pub seed: u64,
}

impl Default for JammerStrategy {
    fn default() -> Self {
        Self {
            pattern: JammerPattern::Constant,
            target_prbs: Vec::new(),
            on_windows: Vec::new(),
            hit_rate: 1.0,
            seed: 0,
        }
    }
}

impl JammerStrategy {
    /// Constant jammer over every resource during `windows`.
    pub fn full_band(windows: Vec<(usize, usize)>) -> Self {
        Self {
            pattern: JammerPattern::Constant,
            target_prbs: Vec::new(),
            on_windows: windows,
            hit_rate: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize, t_len: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hit_rate) {
            return Err(Error::Config("hit_rate must lie in [0, 1]".into()));
        }
        if self.target_prbs.iter().any(|&p| p >= n) {
            return Err(Error::Config(format!("target PRB outside 0..{n}")));
        }
        let mut w = self.on_windows.clone();
        w.sort();
        for (s, e) in &w {
            if s >= e || *e > t_len {
                return Err(Error::Config(format!("window [{s}, {e}) invalid for T = {t_len}")));
            }
        }
        if w.windows(2).any(|p| p[0].1 > p[1].0) {
            return Err(Error::Config("jammer windows overlap".into()));
        }
        if self.pattern == JammerPattern::Windowed && self.on_windows.is_empty() {
            return Err(Error::Config("WINDOWED jammer needs on_windows".into()));
        }
        Ok(())
    }

    fn active(&self, t: usize) -> bool {
        self.on_windows.is_empty() || self.on_windows.iter().any(|&(s, e)| t >= s && t < e)
    }

    fn n_targets(&self, n: usize) -> usize {
        if self.target_prbs.is_empty() {
            ((self.hit_rate * n as f64).round() as usize).min(n)
        } else {
            self.target_prbs.len()
        }
    }

    fn fixed_targets(&self, n: usize) -> Vec<usize> {
        if !self.target_prbs.is_empty() {
            let mut t = self.target_prbs.clone();
            t.sort_unstable();
            t.dedup();
            return t;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        if self.n_targets(n) < n {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            idx.shuffle(&mut rng);
        }
        let mut t: Vec<usize> = idx.into_iter().take(self.n_targets(n)).collect();
        t.sort_unstable();
        t
    }

    /// Resources attacked at slot `t` out of `n`.
    pub fn schedule(&self, t: usize, n: usize) -> Vec<usize> {
        if !self.active(t) || n == 0 {
            return Vec::new();
        }
        match self.pattern {
            JammerPattern::Constant | JammerPattern::Windowed => self.fixed_targets(n),
            JammerPattern::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t as u64 + 1);
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                let mut s: Vec<usize> = idx.into_iter().take(self.n_targets(n)).collect();
                s.sort_unstable();
                s
            }
            JammerPattern::Sweep => {
                let k = self.n_targets(n).max(1);
                let mut s: Vec<usize> = (0..k).map(|i| (t + i) % n).collect();
                s.sort_unstable();
                s
            }
        }
    }
}

/// What the jammer transmits on an attacked cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JammerWaveform {
    /// Random symbols of a modulation scheme at the configured JSR.
    Modulated { scheme: ModulationScheme },
    /// A fixed complex offset (not scaled by JSR).
    Offset { re: f64, im: f64 },
    /// An offset that grows by `(re, im)` every attacked slot of a window,
    /// i.e. a constant force on the I/Q state (not scaled by JSR).
    Drift { re: f64, im: f64 },
}

impl Default for JammerWaveform {
    fn default() -> Self {
        JammerWaveform::Modulated {
            scheme: ModulationScheme::Qpsk,
        }
    }
}

/// Everything needed to synthesize one radio experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_subcarriers: usize,
    pub n_slots: usize,
    pub signal_scheme: ModulationScheme,
    #[serde(default)]
    pub jammer_waveform: JammerWaveform,
    #[serde(default)]
    pub jammer: JammerStrategy,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub flight_plan: FlightPlan,
    /// Velocity per unit command, m/s.
    pub velocity_gain: f64,
    pub subcarrier_spacing_hz: f64,
    pub slot_duration_s: f64,
    pub ground_station: [f64; 3],
    pub jammer_position: [f64; 3],
    pub start_position: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 9,
            n_slots: 600,
            signal_scheme: ModulationScheme::Qpsk,
            jammer_waveform: JammerWaveform::default(),
            jammer: JammerStrategy::full_band(vec![(300, 600)]),
            channel: ChannelConfig::default(),
            flight_plan: FlightPlan::default(),
            velocity_gain: 4.8,
            subcarrier_spacing_hz: 15e3,
            slot_duration_s: 0.05,
            ground_station: [0.0, 0.0, 30.0],
            jammer_position: [150.0, 80.0, 1.5],
            start_position: [60.0, 0.0, 60.0],
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// A clean (jammer-free) copy with a different seed, used for training.
    pub fn clean(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.jammer.on_windows = vec![(0, 0)];
        c.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_slots == 0 {
            return Err(Error::Config("grid needs d >= 1 and T >= 1".into()));
        }
        self.channel.validate()?;
        self.flight_plan.validate()?;
        let w: Vec<_> = self.jammer.on_windows.iter().filter(|(s, e)| s != e).cloned().collect();
        JammerStrategy {
            on_windows: w,
            ..self.jammer.clone()
        }
        .validate(self.n_subcarriers, self.n_slots)?;
        let bits_per_slot = self.n_subcarriers * self.signal_scheme.bits_per_symbol();
        if bits_per_slot == 0 {
            return Err(Error::Config("no bits per slot".into()));
        }
        Ok(())
    }
}

/// Synthesized experience with full ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Received grid.
    pub grid: ResourceGrid,
    /// Noiseless received command symbols.
    pub clean: DMatrix<C64>,
    /// Received jammer component.
    pub jammer: DMatrix<C64>,
    /// Noise realisation.
    pub noise: DMatrix<C64>,
    /// H₁ per cell.
    pub cell_labels: DMatrix<bool>,
    /// H₁ per slot (any cell attacked).
    pub step_labels: Vec<bool>,
    /// Transmitted bits, slot-major, `d * bits_per_symbol` per slot.
    pub bits: Vec<u8>,
    pub trajectory: Trajectory,
    /// Complex noise variance.
    pub noise_power: f64,
}

impl Scenario {
    /// Write the received grid as CSV rows `t, subcarrier, I, Q, label`,
    /// slot-major, with `label` 1 on attacked cells.
    pub fn write_grid_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["t", "subcarrier", "I", "Q", "label"])
            .map_err(|e| Error::csv(path, e))?;
        let g = &self.grid.samples;
        for t in 0..g.ncols() {
            for n in 0..g.nrows() {
                let z = g[(n, t)];
                let label = u8::from(self.cell_labels[(n, t)]);
                w.write_record(&[t.to_string(), n.to_string(), z.re.to_string(), z.im.to_string(), label.to_string()])
                    .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Bits for one slot: the quantized command, repeated or truncated to fill
/// the slot.
fn slot_bits(cmd: &[f64; 3], n: usize) -> Vec<u8> {
    let word = command_bits(cmd);
    (0..n).map(|i| word[i % word.len()]).collect()
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Per-slot amplitude scale from path loss, normalized to unit mean power.
fn link_scale(cfg: &ScenarioConfig, traj: &Trajectory, tx: [f64; 3], stream: u64) -> Result<Vec<f64>> {
    let t_len = cfg.n_slots;
    let gains: Vec<f64> = match cfg.channel.pathloss_model {
        PathLossModel::None => return Ok(vec![1.0; t_len]),
        PathLossModel::RmaAv => {
            let fc = cfg.channel.carrier_freq_ghz.unwrap_or_default();
            let k = cfg.channel.building_height_m.unwrap_or_default();
            (0..t_len)
                .map(|t| channel::path_loss_rma_av(tx, traj.positions[t + 1], fc, k).map(channel::gain_from_db))
                .collect::<Result<_>>()?
        }
        PathLossModel::CtuAd => {
            let mut rng = substream(cfg.seed, stream);
            (0..t_len)
                .map(|t| {
                    let p = traj.positions[t + 1];
                    let d2d = ((p[0] - tx[0]).powi(2) + (p[1] - tx[1]).powi(2)).sqrt().max(1e-3);
                    let r = if cfg.channel.ctu_shadowing_off { None } else { Some(&mut rng) };
                    channel::path_loss_ctu_ad(d2d, (tx[2], p[2]), &cfg.channel.ctu, r)
                        .map(channel::gain_from_db)
                })
                .collect::<Result<_>>()?
        }
    };
    let mean = gains.iter().sum::<f64>() / t_len as f64;
    Ok(gains.iter().map(|g| (g / mean).sqrt()).collect())
}

/// Build the grid, ground truth and labels for one experience.
pub fn synthesize_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let d = cfg.n_subcarriers;
    let t_len = cfg.n_slots;
    let k = cfg.signal_scheme.bits_per_symbol();

    let mut cmd_rng = substream(cfg.seed, 1);
    let commands = cfg.flight_plan.commands(t_len, &mut cmd_rng);
    let trajectory = integrate_trajectory(&commands, cfg.start_position, cfg.velocity_gain, cfg.slot_duration_s);

    let user_scale = link_scale(cfg, &trajectory, cfg.ground_station, 5)?;
    let jam_scale = link_scale(cfg, &trajectory, cfg.jammer_position, 6)?;

    let noise_power = cfg.channel.noise_power();
    let jam_amp = db_to_linear(cfg.channel.jsr_db).sqrt();

    let mut bits = Vec::with_capacity(t_len * d * k);
    let mut clean = DMatrix::<C64>::zeros(d, t_len);
    for t in 0..t_len {
        let b = slot_bits(&commands[t], d * k);
        let syms = cfg.signal_scheme.modulate(&b)?;
        for n in 0..d {
            clean[(n, t)] = syms[n] * user_scale[t];
        }
        bits.extend(b);
    }

    let mut noise_rng = substream(cfg.seed, 2);
    let noise = DMatrix::from_fn(d, t_len, |_, _| C64::new(0.0, 0.0));
    let mut noise = noise;
    for t in 0..t_len {
        for n in 0..d {
            noise[(n, t)] = complex_normal(&mut noise_rng, noise_power);
        }
    }

    let mut jam_rng = substream(cfg.seed ^ cfg.jammer.seed.rotate_left(17), 3);
    let mut jammer = DMatrix::<C64>::zeros(d, t_len);
    let mut cell_labels = DMatrix::from_element(d, t_len, false);
    let mut drift_age = vec![0usize; d];
    for t in 0..t_len {
        let targets = cfg.jammer.schedule(t, d);
        for n in 0..d {
            if !targets.contains(&n) {
                drift_age[n] = 0;
                continue;
            }
            cell_labels[(n, t)] = true;
            let j = match cfg.jammer_waveform {
                JammerWaveform::Modulated { scheme } => {
                    let pts = scheme.constellation();
                    pts[jam_rng.gen_range(0..pts.len())] * jam_amp
                }
                JammerWaveform::Offset { re, im } => C64::new(re, im),
                JammerWaveform::Drift { re, im } => {
                    drift_age[n] += 1;
                    C64::new(re, im) * drift_age[n] as f64
                }
            };
            jammer[(n, t)] = j * jam_scale[t];
        }
    }

    let samples = &clean + &jammer + &noise;
    let step_labels = (0..t_len).map(|t| (0..d).any(|n| cell_labels[(n, t)])).collect();
    Ok(Scenario {
        grid: ResourceGrid {
            samples,
            subcarrier_spacing_hz: cfg.subcarrier_spacing_hz,
            slot_duration_s: cfg.slot_duration_s,
        },
        clean,
        jammer,
        noise,
        cell_labels,
        step_labels,
        bits,
        trajectory,
        noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_cyclic() {
        let s = JammerStrategy {
            pattern: JammerPattern::Sweep,
            hit_rate: 1.0 / 6.0,
            ..Default::default()
        };
        for t in 0..24 {
            assert_eq!(s.schedule(t, 6), s.schedule(t + 6, 6));
            assert_eq!(s.schedule(t, 6), vec![t % 6]);
        }
    }

    #[test]
    fn constant_targets_fixed() {
        let s = JammerStrategy {
            pattern: JammerPattern::Constant,
            target_prbs: vec![0, 2, 5],
            ..Default::default()
        };
        for t in 0..50 {
            assert_eq!(s.schedule(t, 6), vec![0, 2, 5]);
        }
    }

    #[test]
    fn labels_follow_window() {
        let cfg = ScenarioConfig::default();
        let sc = synthesize_scenario(&cfg).unwrap();
        for t in 0..600 {
            for n in 0..9 {
                assert_eq!(sc.cell_labels[(n, t)], t >= 300);
            }
        }
    }

    #[test]
    fn jsr_matches_configuration() {
        let sc = synthesize_scenario(&ScenarioConfig::default()).unwrap();
        let (mut pj, mut ps, mut n) = (0.0, 0.0, 0.0);
        for t in 300..600 {
            for k in 0..9 {
                pj += sc.jammer[(k, t)].norm_sqr();
                ps += sc.clean[(k, t)].norm_sqr();
                n += 1.0;
            }
        }
        let ratio = (pj / n) / (ps / n);
        assert!((ratio / db_to_linear(6.0) - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn silent_jammer_leaves_grid_untouched() {
        let clean = ScenarioConfig {
            jammer: JammerStrategy::full_band(vec![(0, 0)]),
            ..Default::default()
        };
        let mut silent = ScenarioConfig::default();
        silent.channel.jsr_db = f64::NEG_INFINITY;
        let a = synthesize_scenario(&clean.clone().clean(clean.seed)).unwrap();
        let b = synthesize_scenario(&silent).unwrap();
        assert_eq!(a.grid.samples, b.grid.samples);
    }
}
