//! Multivariate Gaussians and the closed-form divergences used throughout:
//! Kullback-Leibler (one-sided and symmetric) and Bhattacharyya.
//!
//! All routines factor covariances with Cholesky and report
//! [`Error::NotPositiveDefinite`] instead of silently regularizing.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before any logarithm or ratio.
pub const PROB_FLOOR: f64 = 1e-12;

/// A Gaussian density `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// Isotropic Gaussian with variance `var` on every axis.
    pub fn isotropic(mean: DVector<f64>, var: f64) -> Self {
        let n = mean.len();
        Self {
            mean,
            cov: DMatrix::identity(n, n) * var,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Cholesky factor with its log-determinant cached.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    pub log_det: f64,
}

impl Factor {
    pub fn new(m: &DMatrix<f64>, what: &str) -> Result<Self> {
        let chol = Cholesky::new(m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite(what.to_string()));
        }
        Ok(Self { chol, log_det })
    }

    /// `vᵀ M⁻¹ v`.
    pub fn quad(&self, v: &DVector<f64>) -> f64 {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("cholesky factor has a non-zero diagonal");
        y.norm_squared()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Returns true if `m` is symmetric within `tol` and admits a Cholesky factor.
pub fn is_spd(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > tol * scale {
        return false;
    }
    Cholesky::new(m.clone()).is_some()
}

fn check_pair(p: &Gaussian, q: &Gaussian) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

/// `KL(p ‖ q)` between two Gaussians.
pub fn kl(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    check_pair(p, q)?;
    let fp = Factor::new(&p.cov, "kl: first covariance")?;
    let fq = Factor::new(&q.cov, "kl: second covariance")?;
    let d = p.dim() as f64;
    let trace = fq.solve(&p.cov).trace();
    let diff = &q.mean - &p.mean;
    let v = 0.5 * (fq.log_det - fp.log_det - d + trace + fq.quad(&diff));
    Ok(v.max(0.0))
}

/// `KL(p ‖ q) + KL(q ‖ p)`; symmetric by construction.
pub fn symmetric_kl(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    check_pair(p, q)?;
    let fp = Factor::new(&p.cov, "symmetric_kl: first covariance")?;
    let fq = Factor::new(&q.cov, "symmetric_kl: second covariance")?;
    let d = p.dim() as f64;
    let diff = &q.mean - &p.mean;
    // The log-determinant terms cancel in the sum.
    let t1 = fq.solve(&p.cov).trace();
    let t2 = fp.solve(&q.cov).trace();
    let v = 0.5 * (t1 + t2 - 2.0 * d + fq.quad(&diff) + fp.quad(&diff));
    Ok(v.max(0.0))
}

/// Bhattacharyya coefficient and distance of a Gaussian pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bhattacharyya {
    pub coefficient: f64,
    pub distance: f64,
}

impl Bhattacharyya {
    fn from_distance(distance: f64) -> Self {
        let distance = distance.max(0.0);
        Self {
            coefficient: (-distance).exp(),
            distance,
        }
    }
}

/// Closed-form Bhattacharyya distance
/// `⅛ Δμᵀ Σ̄⁻¹ Δμ + ½ ln(det Σ̄ / √(det Σp det Σq))`, `Σ̄ = (Σp + Σq)/2`.
pub fn bhattacharyya(p: &Gaussian, q: &Gaussian) -> Result<Bhattacharyya> {
    check_pair(p, q)?;
    BhattacharyyaKernel::new(&p.cov, &q.cov)?.eval(&p.mean, &q.mean)
}

/// Bhattacharyya distance for a fixed covariance pair, evaluated repeatedly
/// for varying means. The factorization is paid once.
#[derive(Debug, Clone)]
pub struct BhattacharyyaKernel {
    avg: Factor,
    offset: f64,
}

impl BhattacharyyaKernel {
    pub fn new(cov_p: &DMatrix<f64>, cov_q: &DMatrix<f64>) -> Result<Self> {
        if cov_p.shape() != cov_q.shape() {
            return Err(Error::Dimension {
                expected: cov_p.nrows(),
                got: cov_q.nrows(),
            });
        }
        let fp = Factor::new(cov_p, "bhattacharyya: first covariance")?;
        let fq = Factor::new(cov_q, "bhattacharyya: second covariance")?;
        let avg = Factor::new(&((cov_p + cov_q) * 0.5), "bhattacharyya: mean covariance")?;
        let offset = 0.5 * (avg.log_det - 0.5 * (fp.log_det + fq.log_det));
        Ok(Self { avg, offset })
    }

    pub fn distance(&self, mean_p: &DVector<f64>, mean_q: &DVector<f64>) -> f64 {
        let diff = mean_p - mean_q;
        (0.125 * self.avg.quad(&diff) + self.offset).max(0.0)
    }

    pub fn eval(&self, mean_p: &DVector<f64>, mean_q: &DVector<f64>) -> Result<Bhattacharyya> {
        if mean_p.len() != mean_q.len() || mean_p.len() != self.avg.chol.l_dirty().nrows() {
            return Err(Error::Dimension {
                expected: self.avg.chol.l_dirty().nrows(),
                got: mean_p.len(),
            });
        }
        let d = self.distance(mean_p, mean_q);
        if !d.is_finite() {
            return Err(Error::Numerical("bhattacharyya distance not finite".into()));
        }
        Ok(Bhattacharyya::from_distance(d))
    }
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for expectations
/// under a standard normal (Golub-Welsch on the Hermite Jacobi matrix).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    gaussian: Gaussian,
    factor: Factor,
}

/// A weighted sum of Gaussians with cached factorizations.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

fn check_weights(weights: impl Iterator<Item = f64> + Clone) -> Result<f64> {
    let total: f64 = weights.clone().sum();
    let mut weights = weights;
    if !(total > 0.0 && total.is_finite()) || weights.any(|w| w < 0.0) {
        return Err(Error::Invalid("mixture needs nonnegative weights with a positive sum".into()));
    }
    Ok(total)
}

impl GaussianMixture {
    /// Weights are normalized to sum to one.
    pub fn new(parts: &[(f64, Gaussian)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("mixture needs at least one component".into()))?;
        let total = check_weights(parts.iter().map(|(w, _)| *w))?;
        let dim = first.1.dim();
        let components = parts
            .iter()
            .map(|(w, g)| {
                if g.dim() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: g.dim(),
                    });
                }
                Ok(Component {
                    weight: w / total,
                    gaussian: g.clone(),
                    factor: Factor::new(&g.cov, "mixture component")?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { components, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// Replace the component weights, renormalized.
    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.components.len() {
            return Err(Error::Length(weights.len(), self.components.len()));
        }
        let total = check_weights(weights.iter().copied())?;
        for (c, w) in self.components.iter_mut().zip(weights) {
            c.weight = w / total;
        }
        Ok(())
    }

    pub fn density(&self, x: &DVector<f64>) -> f64 {
        let c = -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln();
        self.components
            .iter()
            .map(|k| k.weight * (c - 0.5 * (k.factor.quad(&(x - &k.gaussian.mean)) + k.factor.log_det)).exp())
            .sum()
    }

    /// Component responsibilities after observing `z.mean` with noise
    /// `z.cov`: `w_l ∝ w_l N(z; μ_l, Σ_l + R)`.
    pub fn responsibilities(&self, z: &Gaussian) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let c = -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln();
        let logs = self
            .components
            .iter()
            .map(|k| {
                if k.weight <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let f = Factor::new(&(&k.gaussian.cov + &z.cov), "responsibility covariance")?;
                Ok(k.weight.ln() + c - 0.5 * (f.quad(&(&z.mean - &k.gaussian.mean)) + f.log_det))
            })
            .collect::<Result<Vec<f64>>>()?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Numerical("observation has zero likelihood under every component".into()));
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|v| v / total).collect())
    }

    fn check_dim(&self, q: &Gaussian) -> Result<()> {
        if q.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: q.dim(),
            });
        }
        Ok(())
    }

    /// Bhattacharyya coefficient `∫ √(p q)` against a Gaussian `q`, using
    /// `√q ∝ N(μ_q, 2Σ_q)` and a tensor Gauss-Hermite rule of `order`
    /// points per axis for the expectation of `√p`.
    pub fn bhattacharyya_coefficient(&self, q: &Gaussian, order: usize) -> Result<f64> {
        self.check_dim(q)?;
        let fq = Factor::new(&(&q.cov * 2.0), "bhattacharyya: evidence covariance")?;
        let l = fq.chol.l();
        let (nodes, weights) = gauss_hermite(order);
        let d = self.dim;
        let mut acc = 0.0;
        let mut xi = DVector::zeros(d);
        for idx in 0..order.pow(d as u32) {
            let mut rest = idx;
            let mut w = 1.0;
            for a in 0..d {
                let k = rest % order;
                rest /= order;
                xi[a] = nodes[k];
                w *= weights[k];
            }
            acc += w * self.density(&(&q.mean + &l * &xi)).sqrt();
        }
        // √q = N(μ_q, 2Σ_q) · (2π)^{d/4} 2^{d/2} |Σ_q|^{1/4}
        let dim = d as f64;
        let log_det_q = fq.log_det - dim * 2f64.ln();
        let scale = (0.25 * dim * (2.0 * std::f64::consts::PI).ln() + 0.5 * dim * 2f64.ln() + 0.25 * log_det_q).exp();
        Ok(acc * scale)
    }
}

/// Clamp entries to [`PROB_FLOOR`] and renormalize onto the simplex.
pub fn clamp_simplex(p: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = p.iter().map(|v| v.max(PROB_FLOOR)).collect();
    let s: f64 = c.iter().sum();
    c.into_iter().map(|v| v / s).collect()
}

/// Discrete `KL(p ‖ q)` after clamping both vectors.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    let p = clamp_simplex(p);
    let q = clamp_simplex(q);
    p.iter()
        .zip(&q)
        .map(|(a, b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Symmetric discrete KL.
pub fn discrete_symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    discrete_kl(p, q) + discrete_kl(q, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g1(m: f64, v: f64) -> Gaussian {
        Gaussian::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, v)).unwrap()
    }

    #[test]
    fn self_divergences_vanish() {
        let p = g1(0.3, 2.0);
        assert_abs_diff_eq!(kl(&p, &p).unwrap(), 0.0, epsilon = 1e-12);
        let b = bhattacharyya(&p, &p).unwrap();
        assert_abs_diff_eq!(b.distance, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.coefficient, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_variance_shift() {
        assert_abs_diff_eq!(kl(&g1(0.0, 1.0), &g1(1.0, 1.0)).unwrap(), 0.5, epsilon = 1e-12);
        let b = bhattacharyya(&g1(0.0, 1.0), &g1(2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(b.distance, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_kl_is_symmetric() {
        let p = Gaussian::new(
            DVector::from_vec(vec![0.1, -0.4]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
        )
        .unwrap();
        let q = Gaussian::new(
            DVector::from_vec(vec![1.0, 0.3]),
            DMatrix::from_row_slice(2, 2, &[0.7, -0.1, -0.1, 1.4]),
        )
        .unwrap();
        assert_eq!(symmetric_kl(&p, &q).unwrap(), symmetric_kl(&q, &p).unwrap());
        let s = kl(&p, &q).unwrap() + kl(&q, &p).unwrap();
        assert_abs_diff_eq!(symmetric_kl(&p, &q).unwrap(), s, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = g1(0.0, 1.0);
        let q = Gaussian::isotropic(DVector::zeros(2), 1.0);
        assert!(matches!(kl(&p, &q), Err(Error::Dimension { .. })));
        let bad = g1(0.0, -1.0);
        assert!(matches!(kl(&bad, &p), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn discrete_two_term_kl() {
        let eps: f64 = 1e-3;
        let p = [1.0 - eps, eps];
        let q = [eps, 1.0 - eps];
        let by_hand = 2.0 * ((1.0 - eps) * ((1.0 - eps) / eps).ln() + eps * (eps / (1.0 - eps)).ln());
        assert_abs_diff_eq!(discrete_symmetric_kl(&p, &q), by_hand, epsilon = 1e-9);
    }
}
