//! Large-scale channel models (rural-macro aerial path loss and the
//! angle-dependent cellular-to-UAV model), SINR, and dB helpers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Which large-scale path-loss model shapes the received amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathLossModel {
    #[default]
    None,
    RmaAv,
    CtuAd,
}

/// Parameters of the angle-dependent cellular-to-UAV model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct CtuParams {
    /// Terrestrial path-loss exponent.
    pub alpha: f64,
    /// Excess-loss amplitude `C`.
    pub c: f64,
    /// Excess-loss angular decay `D` (degrees).
    pub d: f64,
    /// Reference elevation `θ₀` (degrees).
    pub theta0: f64,
    /// Excess-loss offset `η₀`.
    pub eta0: f64,
    /// Shadowing slope `a` per degree of elevation.
    pub a: f64,
    /// Terrestrial shadowing constant.
    pub sigma0_terrestrial: f64,
    /// Aerial shadowing offset, the intercept of `σ(θ) = aθ + σ₀`.
    pub sigma0_uav: f64,
}

impl Default for CtuParams {
    fn default() -> Self {
        Self {
            alpha: 3.04,
            c: -23.29,
            d: 4.14,
            theta0: -3.61,
            eta0: 20.70,
            a: -0.41,
            sigma0_terrestrial: 8.52,
            sigma0_uav: 5.86,
        }
    }
}

impl CtuParams {
    /// Excess aerial loss `η(θ) = C (θ − θ₀) exp(−(θ − θ₀)/D) + η₀`, θ in degrees.
    pub fn excess(&self, theta_deg: f64) -> f64 {
        let x = theta_deg - self.theta0;
        self.c * x * (-x / self.d).exp() + self.eta0
    }

    /// Shadowing standard deviation `σ(θ) = aθ + σ₀`, floored at zero.
    pub fn shadow_std(&self, theta_deg: f64) -> f64 {
        (self.a * theta_deg + self.sigma0_uav).max(0.0)
    }
}

/// Link budget and channel settings for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub jsr_db: f64,
    /// Carrier frequency in GHz; required by the RMa-AV model.
    #[serde(default)]
    pub carrier_freq_ghz: Option<f64>,
    /// Average building height κ in metres; required by the RMa-AV model.
    #[serde(default)]
    pub building_height_m: Option<f64>,
    #[serde(default)]
    pub pathloss_model: PathLossModel,
    #[serde(default)]
    pub ctu: CtuParams,
    /// Disable the random shadowing term of the CtU-AD model.
    #[serde(default)]
    pub ctu_shadowing_off: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            snr_db: 15.0,
            jsr_db: 6.0,
            carrier_freq_ghz: None,
            building_height_m: None,
            pathloss_model: PathLossModel::None,
            ctu: CtuParams::default(),
            ctu_shadowing_off: false,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        if self.jsr_db.is_nan() {
            return Err(Error::Config("jsr_db must not be NaN".into()));
        }
        if self.pathloss_model == PathLossModel::RmaAv {
            match (self.carrier_freq_ghz, self.building_height_m) {
                (Some(f), Some(k)) if f > 0.0 && k > 0.0 => {}
                _ => {
                    return Err(Error::Config(
                        "RMA_AV needs carrier_freq_ghz > 0 and building_height_m > 0".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Complex noise variance for unit received signal power.
    pub fn noise_power(&self) -> f64 {
        1.0 / db_to_linear(self.snr_db)
    }
}

fn distance3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Rural-macro aerial path loss in dB between two points (metres), carrier
/// `fc_ghz`, building height `kappa`.
pub fn path_loss_rma_av(a: [f64; 3], b: [f64; 3], fc_ghz: f64, kappa: f64) -> Result<f64> {
    let d = distance3(a, b);
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::Domain(format!("3D distance must be positive, got {d}")));
    }
    if kappa <= 0.0 || fc_ghz <= 0.0 {
        return Err(Error::Domain("carrier and building height must be positive".into()));
    }
    Ok(20.0 * (40.0 * std::f64::consts::PI * d * fc_ghz / 3.0).log10()
        + (0.03 * kappa).min(10.0) * d.log10()
        + (0.044 * kappa).min(14.77)
        + 0.002 * kappa.log10() * d)
}

/// Linear channel gain `h = 1 / 10^(PL/10)`.
pub fn gain_from_db(pl_db: f64) -> f64 {
    1.0 / db_to_linear(pl_db)
}

/// Angle-dependent cellular-to-UAV path loss in dB. `heights` are
/// (ground station, aerial node) in metres. When `rng` is `None` the
/// shadowing term is omitted.
pub fn path_loss_ctu_ad<R: Rng + ?Sized>(
    d2d: f64,
    heights: (f64, f64),
    params: &CtuParams,
    rng: Option<&mut R>,
) -> Result<f64> {
    if d2d <= 0.0 || !d2d.is_finite() {
        return Err(Error::Domain(format!("2D distance must be positive, got {d2d}")));
    }
    let dz = heights.1 - heights.0;
    let theta = (dz / d2d).atan().to_degrees();
    let terrestrial = 10.0 * params.alpha * d2d.log10();
    let shadow = match rng {
        Some(r) => {
            let std = params.shadow_std(theta);
            if std > 0.0 {
                Normal::new(0.0, std)
                    .map_err(|e| Error::Numerical(e.to_string()))?
                    .sample(r)
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    Ok(terrestrial + params.excess(theta) + shadow)
}

/// `γ = P_u h_gu / (α P_j h_ju + σ²)` with `α = 1` iff the jammer shares the
/// resource block.
pub fn sinr(p_user: f64, h_user: f64, p_jam: f64, h_jam: f64, jammer_present: bool, noise: f64) -> f64 {
    let alpha = if jammer_present { 1.0 } else { 0.0 };
    p_user * h_user / (alpha * p_jam * h_jam + noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rma_direct_evaluation() {
        // κ = 5 m, 2 GHz, 100 m straight up.
        let pl = path_loss_rma_av([0.0; 3], [0.0, 0.0, 100.0], 2.0, 5.0).unwrap();
        let by_hand = 20.0 * (40.0 * std::f64::consts::PI * 100.0 * 2.0 / 3.0).log10()
            + 0.15 * 2.0
            + 0.22
            + 0.002 * 5f64.log10() * 100.0;
        assert!((pl - by_hand).abs() < 1e-12);
    }

    #[test]
    fn rma_rejects_zero_distance() {
        assert!(path_loss_rma_av([1.0; 3], [1.0; 3], 2.0, 5.0).is_err());
    }

    #[test]
    fn rma_saturation() {
        let f = |k: f64| {
            path_loss_rma_av([0.0; 3], [10.0, 0.0, 0.0], 2.0, k).unwrap()
                - (0.044f64 * k).min(14.77)
                - 0.002 * k.log10() * 10.0
        };
        // Above 333.4 m the log-distance slope no longer depends on κ.
        assert!((f(400.0) - f(1000.0)).abs() < 1e-9);
    }

    #[test]
    fn ctu_reference_angle() {
        let p = CtuParams::default();
        assert_eq!(p.excess(p.theta0), p.eta0);
    }

    #[test]
    fn ctu_seeded() {
        let p = CtuParams::default();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let x = path_loss_ctu_ad(120.0, (30.0, 60.0), &p, Some(&mut a)).unwrap();
        let y = path_loss_ctu_ad(120.0, (30.0, 60.0), &p, Some(&mut b)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn sinr_cases() {
        assert_eq!(sinr(2.0, 0.5, 9.0, 1.0, false, 1.0), 1.0);
        assert!(sinr(1.0, 1.0, 1e300, 1.0, true, 1.0) < 1e-299);
    }
}
