//! Null-knowledge bootstrap: a Kalman filter with a static dynamic model run
//! over the generalized observations, and robust noise estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::Factor;

/// Output of [`ukf_bootstrap`].
#[derive(Debug, Clone)]
pub struct BootstrapOutput {
    /// Predicted generalized state `X̃_t` before seeing `Z̃_t`.
    pub predicted: Vec<DVector<f64>>,
    /// Filtered generalized state after seeing `Z̃_t`.
    pub filtered: Vec<DVector<f64>>,
    /// `[X̃_t, Z̃_t − X̃_t]`, twice the observation length.
    pub errors: Vec<DVector<f64>>,
}

/// Static-model Kalman filter over `observations` with process covariance
/// `q` and measurement covariance `r`; the observation matrix is identity.
pub fn ukf_bootstrap(observations: &[DVector<f64>], q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<BootstrapOutput> {
    if observations.len() < 2 {
        return Err(Error::Invalid("bootstrap needs at least two observations".into()));
    }
    let n = observations[0].len();
    for m in [q, r] {
        if m.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                got: m.nrows(),
            });
        }
    }
    Factor::new(q, "bootstrap process noise")?;
    Factor::new(r, "bootstrap measurement noise")?;

    let eye = DMatrix::<f64>::identity(n, n);
    let mut x = observations[0].clone();
    let mut p = r.clone();
    let mut out = BootstrapOutput {
        predicted: Vec::with_capacity(observations.len()),
        filtered: Vec::with_capacity(observations.len()),
        errors: Vec::with_capacity(observations.len()),
    };
    for (t, z) in observations.iter().enumerate() {
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        let (xp, pp) = if t == 0 { (x.clone(), p.clone()) } else { (x.clone(), &p + q) };
        let s = Factor::new(&(&pp + r), "bootstrap innovation covariance")?;
        let k = s.solve(&pp).transpose();
        let innov = z - &xp;
        x = &xp + &k * &innov;
        let ik = &eye - &k;
        p = &ik * &pp * ik.transpose() + &k * r * k.transpose();
        let mut e = DVector::zeros(2 * n);
        e.rows_mut(0, n).copy_from(&xp);
        e.rows_mut(n, n).copy_from(&innov);
        out.predicted.push(xp);
        out.filtered.push(x.clone());
        out.errors.push(e);
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gaussian-consistent robust variance `(1.4826 · MAD)²`.
pub fn robust_variance(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    (1.4826 * median(&mut dev)).powi(2)
}

/// Per-dimension noise variance of generalized observations without any
/// model: the state block from first differences (`var(Δx) = 2σ²`), the
/// derivative block as twice the matching state variance. `floor` bounds
/// every entry from below.
pub fn estimate_noise_diag(observations: &[DVector<f64>], floor: f64) -> Result<DVector<f64>> {
    if observations.len() < 3 {
        return Err(Error::Invalid("noise estimate needs at least three observations".into()));
    }
    let n = observations[0].len();
    if !n.is_multiple_of(2) {
        return Err(Error::Invalid("generalized observations have even length".into()));
    }
    let h = n / 2;
    let mut out = DVector::zeros(n);
    for i in 0..h {
        let diffs: Vec<f64> = observations.windows(2).map(|w| w[1][i] - w[0][i]).collect();
        let v = (robust_variance(&diffs) / 2.0).max(floor);
        out[i] = v;
        out[h + i] = 2.0 * v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length_matches() {
        let obs: Vec<_> = (0..7).map(|i| DVector::from_element(2, i as f64)).collect();
        let id = DMatrix::identity(2, 2);
        let o = ukf_bootstrap(&obs, &id, &id).unwrap();
        assert_eq!(o.errors.len(), 7);
        assert_eq!(o.errors[0].len(), 4);
    }

    #[test]
    fn non_pd_noise_rejected() {
        let obs: Vec<_> = (0..3).map(|_| DVector::zeros(2)).collect();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ukf_bootstrap(&obs, &bad, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn robust_variance_of_gaussian_like_data() {
        let v: Vec<f64> = (-500..=500).map(|i| i as f64 / 100.0).collect();
        assert!(robust_variance(&v) > 0.0);
    }
}
