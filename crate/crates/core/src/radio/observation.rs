//! Generalized observations: I/Q values of every sub-carrier stacked with
//! their first temporal differences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::modulation::C64;
use super::scenario::ResourceGrid;

/// `z = (I_1..I_d, Q_1..Q_d, İ_1..İ_d, Q̇_1..Q̇_d)` at slot `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedObservation {
    pub t: usize,
    pub z: DVector<f64>,
}

impl GeneralizedObservation {
    pub fn d(&self) -> usize {
        self.z.len() / 4
    }

    /// The (I, Q) block.
    pub fn state(&self) -> DVector<f64> {
        self.z.rows(0, self.z.len() / 2).into_owned()
    }

    /// The derivative block.
    pub fn derivative(&self) -> DVector<f64> {
        let h = self.z.len() / 2;
        self.z.rows(h, h).into_owned()
    }
}

/// Stack I/Q values of one slot as `(I_1..I_d, Q_1..Q_d)`.
pub fn iq_vector(column: &[C64]) -> DVector<f64> {
    let d = column.len();
    DVector::from_fn(2 * d, |i, _| if i < d { column[i].re } else { column[i - d].im })
}

/// Inverse of [`iq_vector`].
pub fn iq_to_complex(v: &DVector<f64>) -> Vec<C64> {
    let d = v.len() / 2;
    (0..d).map(|n| C64::new(v[n], v[n + d])).collect()
}

/// Generalized observations of a complex `d × T` matrix.
pub fn generalized_from_samples(samples: &DMatrix<C64>) -> Vec<GeneralizedObservation> {
    let d = samples.nrows();
    let mut out = Vec::with_capacity(samples.ncols());
    let mut prev: Option<DVector<f64>> = None;
    for t in 0..samples.ncols() {
        let col: Vec<C64> = samples.column(t).iter().copied().collect();
        let x = iq_vector(&col);
        let dx = match &prev {
            Some(p) => &x - p,
            None => DVector::zeros(2 * d),
        };
        let mut z = DVector::zeros(4 * d);
        z.rows_mut(0, 2 * d).copy_from(&x);
        z.rows_mut(2 * d, 2 * d).copy_from(&dx);
        out.push(GeneralizedObservation { t, z });
        prev = Some(x);
    }
    out
}

/// Generalized observations of a resource grid.
pub fn build_generalized_observations(grid: &ResourceGrid) -> Vec<GeneralizedObservation> {
    generalized_from_samples(&grid.samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference_with_zero_start() {
        let s = DMatrix::from_row_slice(1, 3, &[C64::new(1.0, 0.0), C64::new(3.0, 0.0), C64::new(0.0, 0.0)]);
        let obs = generalized_from_samples(&s);
        let di: Vec<f64> = obs.iter().map(|o| o.z[2]).collect();
        assert_eq!(di, vec![0.0, 2.0, -3.0]);
    }

    #[test]
    fn prefix_sum_reconstructs() {
        let s = DMatrix::from_fn(2, 5, |i, j| C64::new((i * 7 + j * 3) as f64 * 0.25, -(j as f64)));
        let obs = generalized_from_samples(&s);
        let mut acc = obs[0].state();
        for o in &obs[1..] {
            acc += o.derivative();
            assert_eq!(acc, o.state());
        }
    }
}
