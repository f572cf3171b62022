//! Abnormality measures at the discrete (KLDA), continuous (CLA, CLB) and
//! per-sub-carrier (DCLA) levels, threshold logic, calibration, and the
//! generalized errors exchanged between levels.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{bhattacharyya, discrete_symmetric_kl, Gaussian};

/// Thresholds and update gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Acceptance ratio ζ.
    pub zeta: f64,
    /// Evidence mass α.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Tail mass `Q_T`.
    pub q_t: f64,
    /// Explicit discrete threshold; `None` derives `ψ = (1 − ζ) α`.
    #[serde(default)]
    pub psi: Option<f64>,
    /// Continuous (CLA) threshold η.
    pub eta: f64,
    /// Per-sub-carrier DCLA thresholds; empty disables DCLA decisions.
    #[serde(default)]
    pub dcla: Vec<f64>,
    /// Action-error threshold; `None` reuses η.
    #[serde(default)]
    pub th: Option<f64>,
    /// Belief update magnitude γ*.
    pub gamma_star: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            zeta: 0.8,
            alpha: 0.5,
            beta1: 1.0,
            beta2: 0.0,
            q_t: 0.2,
            psi: None,
            eta: f64::INFINITY,
            dcla: Vec::new(),
            th: None,
            gamma_star: 0.5,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("zeta", self.zeta), ("alpha", self.alpha), ("q_t", self.q_t)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.beta1 < 0.0 || self.beta2 < 0.0 || (self.beta1 + self.beta2 - 1.0).abs() > 1e-9 {
            return Err(Error::Config("beta1 + beta2 must equal 1".into()));
        }
        if self.eta.is_nan() || self.gamma_star < 0.0 {
            return Err(Error::Config("eta must be a number and gamma_star non-negative".into()));
        }
        Ok(())
    }

    /// Discrete threshold ψ.
    pub fn psi(&self) -> f64 {
        self.psi.unwrap_or((1.0 - self.zeta) * self.alpha)
    }

    /// Lower bound on the Bhattacharyya coefficient of a normal step.
    pub fn bc_bound(&self) -> f64 {
        (self.q_t * self.beta1 * (1.0 - self.alpha) + self.q_t * self.beta2 * (1.0 - self.alpha)).sqrt()
    }

    /// Action-error threshold.
    pub fn th(&self) -> f64 {
        self.th.unwrap_or(self.eta)
    }
}

/// Abnormality measures of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbnormalitySnapshot {
    pub klda: f64,
    pub cla: f64,
    pub clb: f64,
    pub dcla: Vec<f64>,
}

/// H₁ flags per measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub klda: bool,
    pub cla: bool,
    pub clb: bool,
    pub dcla: Vec<bool>,
}

/// Occupancy-weighted symmetric KL between each occupied superstate's
/// transition row and the evidence distribution `lambda`.
/// `rows` holds `(occupancy, row)` pairs; zero-occupancy rows are skipped.
pub fn klda(rows: &[(f64, &[f64])], lambda: &[f64]) -> f64 {
    rows.iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, row)| w * discrete_symmetric_kl(row, lambda))
        .sum()
}

/// `−ln BC` between the predicted state density and the observation
/// likelihood.
pub fn cla(prediction: &Gaussian, observation: &Gaussian) -> Result<f64> {
    Ok(bhattacharyya(prediction, observation)?.distance)
}

/// `−ln BC` between the predicted state density and the density of the
/// predicted superstate.
pub fn clb(prediction: &Gaussian, superstate: &Gaussian) -> Result<f64> {
    Ok(bhattacharyya(prediction, superstate)?.distance)
}

/// Per-sub-carrier Euclidean I/Q distance between an observation and a
/// prediction. Both vectors start with `(I_1..I_d, Q_1..Q_d)`.
pub fn dcla(obs: &DVector<f64>, pred: &DVector<f64>, d: usize) -> Vec<f64> {
    (0..d)
        .map(|n| ((obs[n] - pred[n]).powi(2) + (obs[d + n] - pred[d + n]).powi(2)).sqrt())
        .collect()
}

/// H₁ iff a measure exceeds its threshold.
pub fn decide(s: &AbnormalitySnapshot, cfg: &ThresholdConfig) -> Decision {
    let clb_limit = -cfg.bc_bound().ln();
    Decision {
        klda: s.klda > cfg.psi(),
        cla: s.cla > cfg.eta,
        clb: s.clb > clb_limit,
        dcla: s
            .dcla
            .iter()
            .enumerate()
            .map(|(n, v)| cfg.dcla.get(n).is_some_and(|th| v > th))
            .collect(),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// `mean + k · std` of a clean-run abnormality series.
pub fn calibrate_threshold(clean: &[f64], k: f64) -> Result<f64> {
    if clean.is_empty() || clean.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("calibration needs a finite, non-empty series".into()));
    }
    let (m, s) = mean_std(clean);
    Ok(m + k * s)
}

/// Continuous threshold η: mean + 3 std of clean CLA.
pub fn calibrate_eta(clean_cla: &[f64]) -> Result<f64> {
    calibrate_threshold(clean_cla, 3.0)
}

/// Per-sub-carrier DCLA thresholds: mean + std of clean DCLA.
pub fn calibrate_dcla(clean: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = clean.first().map(|v| v.len()).unwrap_or(0);
    (0..d)
        .map(|n| calibrate_threshold(&clean.iter().map(|v| v[n]).collect::<Vec<_>>(), 1.0))
        .collect()
}

/// Generalized errors of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedErrors {
    /// Observation minus predicted observation.
    pub eps_z1: DVector<f64>,
    /// Observation minus the mean of the most supported superstate; the
    /// extracted jammer when an attack is present.
    pub eps_z2: DVector<f64>,
    /// Observation projected to the state space minus the predicted state.
    pub eps_x1: DVector<f64>,
    /// Discrete-level shift expressed in generalized-state units.
    pub eps_x2: DVector<f64>,
    /// Evidence minus prediction over superstates.
    pub eps_s: Vec<f64>,
}

/// Inputs to [`generalized_errors`].
pub struct ErrorInputs<'a> {
    pub z: &'a DVector<f64>,
    pub predicted: &'a DVector<f64>,
    pub posterior: &'a DVector<f64>,
    pub pi_s: &'a [f64],
    pub lambda_s: &'a [f64],
    pub means: &'a [&'a DVector<f64>],
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn generalized_errors(x: &ErrorInputs<'_>) -> GeneralizedErrors {
    let s_pi = argmax(x.pi_s);
    let s_lambda = argmax(x.lambda_s);
    let mu_l = x.means[s_lambda];
    let eps_x2 = if s_pi == s_lambda {
        mu_l - x.posterior
    } else {
        mu_l - x.means[s_pi]
    };
    GeneralizedErrors {
        eps_z1: x.z - x.predicted,
        eps_z2: x.z - mu_l,
        eps_x1: x.z - x.predicted,
        eps_x2,
        eps_s: x.lambda_s.iter().zip(x.pi_s).map(|(l, p)| l - p).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_thresholds() {
        let c = ThresholdConfig::default();
        assert!((c.psi() - 0.1).abs() < 1e-15);
        assert!((c.bc_bound() - 0.1f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_snapshot_is_normal() {
        let c = ThresholdConfig {
            eta: 1.0,
            dcla: vec![0.5; 3],
            ..Default::default()
        };
        let s = AbnormalitySnapshot {
            klda: 0.0,
            cla: 0.0,
            clb: 0.0,
            dcla: vec![0.0; 3],
        };
        let d = decide(&s, &c);
        assert!(!d.klda && !d.cla && !d.clb && d.dcla.iter().all(|f| !f));
    }

    #[test]
    fn dcla_three_four_five() {
        let obs = DVector::from_vec(vec![0.0, 3.0, 0.0, 0.0, 4.0, 0.0]);
        assert_eq!(dcla(&obs, &DVector::zeros(6), 3), vec![0.0, 5.0, 0.0]);
    }

    #[test]
    fn extracted_jammer_is_additive_offset() {
        let mu0 = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let mu1 = DVector::from_vec(vec![-1.0, 1.0, 0.0, 0.0]);
        let j = DVector::from_vec(vec![0.3, 0.7, 0.0, 0.0]);
        let z = &mu0 + &j;
        let e = generalized_errors(&ErrorInputs {
            z: &z,
            predicted: &mu0,
            posterior: &mu0,
            pi_s: &[0.9, 0.1],
            lambda_s: &[0.8, 0.2],
            means: &[&mu0, &mu1],
        });
        assert!((&e.eps_z2 - &j).amax() < 1e-12);
        assert!(e.eps_s.iter().sum::<f64>().abs() < 1e-12);
    }
}
