//! Growing Neural Gas over real vectors.
//!
//! Signals are drawn with replacement from the sample set after sorting it
//! into a canonical order, and an epoch presents `insert_interval *
//! max_nodes` signals. The result therefore depends only on the empirical
//! distribution of the samples and the seed, not on their order or on how
//! often each sample is repeated.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growing Neural Gas settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct GngConfig {
    pub max_nodes: usize,
    /// Winner learning rate.
    pub eps_b: f64,
    /// Neighbour learning rate.
    pub eps_n: f64,
    pub age_max: usize,
    /// Signals between node insertions.
    pub insert_interval: usize,
    /// Error reduction of the two nodes around an insertion.
    pub alpha: f64,
    /// Global error decay per signal.
    pub decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GngConfig {
    fn default() -> Self {
        Self {
            max_nodes: 4,
            eps_b: 0.2,
            eps_n: 0.006,
            age_max: 50,
            insert_interval: 100,
            alpha: 0.5,
            decay: 0.995,
            epochs: 5,
            seed: 0,
        }
    }
}

impl GngConfig {
    pub fn with_nodes(max_nodes: usize, seed: u64) -> Self {
        Self {
            max_nodes,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_nodes < 2 {
            return Err(Error::Config("GNG needs max_nodes >= 2".into()));
        }
        if !(0.0 < self.eps_n && self.eps_n < self.eps_b && self.eps_b < 1.0) {
            return Err(Error::Config("GNG needs 0 < eps_n < eps_b < 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::Config("GNG alpha and decay must lie in [0, 1]".into()));
        }
        if self.insert_interval == 0 || self.epochs == 0 || self.age_max == 0 {
            return Err(Error::Config("GNG intervals must be positive".into()));
        }
        Ok(())
    }

    fn signals(&self) -> usize {
        self.epochs * self.insert_interval * self.max_nodes
    }
}

struct Graph {
    w: Vec<DVector<f64>>,
    err: Vec<f64>,
    alive: Vec<bool>,
    /// Edge ages, `None` when absent; symmetric.
    age: Vec<Vec<Option<usize>>>,
}

impl Graph {
    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.age[i].iter().enumerate().filter_map(|(j, a)| a.map(|_| j))
    }

    fn set_edge(&mut self, i: usize, j: usize, a: Option<usize>) {
        self.age[i][j] = a;
        self.age[j][i] = a;
    }

    fn n_alive(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    fn two_nearest(&self, x: &DVector<f64>) -> (usize, usize) {
        let (mut b1, mut b2) = (usize::MAX, usize::MAX);
        let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
        for (i, w) in self.w.iter().enumerate() {
            if !self.alive[i] {
                continue;
            }
            let d = (x - w).norm_squared();
            if d < d1 {
                b2 = b1;
                d2 = d1;
                b1 = i;
                d1 = d;
            } else if d < d2 {
                b2 = i;
                d2 = d;
            }
        }
        (b1, b2)
    }
}

fn canonical_order(samples: &[DVector<f64>]) -> Vec<&DVector<f64>> {
    let mut v: Vec<&DVector<f64>> = samples.iter().collect();
    v.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    v
}

/// Train a GNG and return its codebook vectors.
pub fn gng_train(samples: &[DVector<f64>], cfg: &GngConfig) -> Result<Vec<DVector<f64>>> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(Error::Invalid("GNG needs at least two samples".into()));
    }
    let dim = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: s.len(),
        });
    }
    let data = canonical_order(samples);
    let n = data.len();
    let cap = cfg.max_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw = |rng: &mut ChaCha8Rng| data[((rng.gen::<f64>() * n as f64) as usize).min(n - 1)];

    let mut g = Graph {
        w: vec![DVector::zeros(dim); cap],
        err: vec![0.0; cap],
        alive: vec![false; cap],
        age: vec![vec![None; cap]; cap],
    };
    g.w[0] = draw(&mut rng).clone();
    g.w[1] = draw(&mut rng).clone();
    g.alive[0] = true;
    g.alive[1] = true;

    for step in 1..=cfg.signals() {
        let x = draw(&mut rng);
        let (s1, s2) = g.two_nearest(x);
        let nb: Vec<usize> = g.neighbours(s1).collect();
        for &j in &nb {
            let a = g.age[s1][j].map(|a| a + 1);
            g.set_edge(s1, j, a);
        }
        g.err[s1] += (x - &g.w[s1]).norm_squared();
        let delta = (x - &g.w[s1]) * cfg.eps_b;
        g.w[s1] += delta;
        for &j in &nb {
            let delta = (x - &g.w[j]) * cfg.eps_n;
            g.w[j] += delta;
        }
        g.set_edge(s1, s2, Some(0));

        for i in 0..cap {
            for j in (i + 1)..cap {
                if matches!(g.age[i][j], Some(a) if a > cfg.age_max) {
                    g.set_edge(i, j, None);
                }
            }
        }
        for i in 0..cap {
            if g.alive[i] && g.neighbours(i).next().is_none() && g.n_alive() > 2 {
                g.alive[i] = false;
                g.err[i] = 0.0;
            }
        }

        if step % cfg.insert_interval == 0 && g.n_alive() < cap {
            let q = (0..cap)
                .filter(|&i| g.alive[i])
                .max_by(|&a, &b| g.err[a].total_cmp(&g.err[b]).then(b.cmp(&a)))
                .expect("at least two live nodes");
            let f = g
                .neighbours(q)
                .max_by(|&a, &b| g.err[a].total_cmp(&g.err[b]).then(b.cmp(&a)));
            if let Some(f) = f {
                let r = (0..cap).find(|&i| !g.alive[i]).expect("capacity checked");
                g.w[r] = (&g.w[q] + &g.w[f]) * 0.5;
                g.alive[r] = true;
                for j in 0..cap {
                    g.set_edge(r, j, None);
                }
                g.set_edge(q, f, None);
                g.set_edge(q, r, Some(0));
                g.set_edge(r, f, Some(0));
                g.err[q] *= cfg.alpha;
                g.err[f] *= cfg.alpha;
                g.err[r] = g.err[q];
            }
        }
        for e in g.err.iter_mut() {
            *e *= cfg.decay;
        }
    }
    Ok((0..cap).filter(|&i| g.alive[i]).map(|i| g.w[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_node() {
        let s = vec![DVector::zeros(1), DVector::from_element(1, 1.0)];
        assert!(gng_train(&s, &GngConfig::with_nodes(1, 0)).is_err());
    }

    #[test]
    fn respects_node_budget() {
        let s: Vec<_> = (0..200).map(|i| DVector::from_element(2, (i % 17) as f64)).collect();
        let nodes = gng_train(&s, &GngConfig::with_nodes(6, 3)).unwrap();
        assert!(nodes.len() >= 2 && nodes.len() <= 6);
    }
}
