//! The learned vocabulary: superstates with generalized statistics,
//! transition matrices, and its JSON persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::ModulationScheme;

/// Current vocabulary file schema.
pub const SCHEMA_VERSION: u32 = 1;

/// What a vocabulary models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VocabTag {
    Reference,
    Jammer(ModulationScheme),
    /// A single-carrier constellation model used for transport.
    Signal(ModulationScheme),
}

impl fmt::Display for VocabTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabTag::Reference => f.write_str("REFERENCE"),
            VocabTag::Jammer(s) => write!(f, "JAMMER({s})"),
            VocabTag::Signal(s) => write!(f, "SIGNAL({s})"),
        }
    }
}

impl FromStr for VocabTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "REFERENCE" {
            return Ok(VocabTag::Reference);
        }
        let inner = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        if let Some(m) = inner("JAMMER(") {
            return m.parse().map(VocabTag::Jammer);
        }
        if let Some(m) = inner("SIGNAL(") {
            return m.parse().map(VocabTag::Signal);
        }
        Err(Error::Invalid(format!("unknown vocabulary tag {s:?}")))
    }
}

/// Statistics of the samples entering a superstate from one predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

/// One discrete cluster of generalized states.
#[derive(Debug, Clone, PartialEq)]
pub struct Superstate {
    pub id: usize,
    /// Generalized mean: state block followed by derivative block.
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Number of training samples assigned; zero means the statistics are a
    /// placeholder.
    pub count: usize,
    /// Keyed by predecessor id.
    pub cond: BTreeMap<usize, Conditional>,
}

impl Superstate {
    /// Derivative block of the mean: the superstate's control vector.
    pub fn control(&self) -> DVector<f64> {
        let h = self.mean.len() / 2;
        self.mean.rows(h, h).into_owned()
    }

    /// Conditional mean given the predecessor, else the unconditional mean.
    pub fn mean_given(&self, prev: usize) -> &DVector<f64> {
        self.cond.get(&prev).map(|c| &c.mean).unwrap_or(&self.mean)
    }

    pub fn cov_given(&self, prev: usize) -> &DMatrix<f64> {
        self.cond.get(&prev).map(|c| &c.cov).unwrap_or(&self.cov)
    }
}

/// A learned generative model of generalized states.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub tag: VocabTag,
    /// Sub-carriers covered; generalized vectors have length `4 d`.
    pub d: usize,
    pub superstates: Vec<Superstate>,
    pub pi: DMatrix<f64>,
    /// `pi_tau[k]` is the slice for dwell time `k + 1`; the last is open-ended.
    pub pi_tau: Vec<DMatrix<f64>>,
    /// Diagonal measurement noise variances of the generalized observation.
    pub r_diag: DVector<f64>,
}

impl Vocabulary {
    pub fn n_superstates(&self) -> usize {
        self.superstates.len()
    }

    pub fn dim(&self) -> usize {
        4 * self.d
    }

    pub fn tau_max(&self) -> usize {
        self.pi_tau.len()
    }

    /// Transition slice for dwell time `tau >= 1`.
    pub fn pi_at(&self, tau: usize) -> &DMatrix<f64> {
        &self.pi_tau[tau.clamp(1, self.pi_tau.len()) - 1]
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.r_diag)
    }

    /// Check shapes and that every transition row lies on the simplex.
    pub fn validate(&self) -> Result<()> {
        let m = self.superstates.len();
        if m == 0 {
            return Err(Error::Invalid("vocabulary has no superstates".into()));
        }
        if self.pi_tau.is_empty() {
            return Err(Error::Invalid("vocabulary has no dwell-time slices".into()));
        }
        let dim = self.dim();
        if self.r_diag.len() != dim || self.r_diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Invalid("measurement noise must be positive, one per dimension".into()));
        }
        for (i, s) in self.superstates.iter().enumerate() {
            if s.id != i || s.mean.len() != dim || s.cov.shape() != (dim, dim) {
                return Err(Error::Invalid(format!("superstate {i} malformed")));
            }
            if s.cond.keys().any(|&j| j >= m) {
                return Err(Error::Invalid(format!("superstate {i} has an unknown predecessor")));
            }
        }
        for p in std::iter::once(&self.pi).chain(&self.pi_tau) {
            if p.shape() != (m, m) {
                return Err(Error::Dimension {
                    expected: m,
                    got: p.nrows(),
                });
            }
            for row in p.row_iter() {
                if row.iter().any(|v| *v < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid("transition row off the simplex".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VocabFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: VocabFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Serialize, Deserialize)]
struct CondFile {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    id: usize,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    count: usize,
    #[serde(default)]
    cond: BTreeMap<usize, CondFile>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    schema_version: u32,
    tag: String,
    d: usize,
    nodes: Vec<NodeFile>,
    pi: Vec<Vec<f64>>,
    pi_tau: Vec<Vec<Vec<f64>>>,
    r_diag: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Invalid("ragged matrix in vocabulary file".into()));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

impl From<&Vocabulary> for VocabFile {
    fn from(v: &Vocabulary) -> Self {
        VocabFile {
            schema_version: SCHEMA_VERSION,
            tag: v.tag.to_string(),
            d: v.d,
            nodes: v
                .superstates
                .iter()
                .map(|s| NodeFile {
                    id: s.id,
                    mean: s.mean.iter().copied().collect(),
                    cov: rows(&s.cov),
                    count: s.count,
                    cond: s
                        .cond
                        .iter()
                        .map(|(j, c)| {
                            (
                                *j,
                                CondFile {
                                    mean: c.mean.iter().copied().collect(),
                                    cov: rows(&c.cov),
                                    count: c.count,
                                },
                            )
                        })
                        .collect(),
                })
                .collect(),
            pi: rows(&v.pi),
            pi_tau: v.pi_tau.iter().map(rows).collect(),
            r_diag: v.r_diag.iter().copied().collect(),
        }
    }
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = Error;

    fn try_from(f: VocabFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "vocabulary schema {} not supported (expected {SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        let superstates = f
            .nodes
            .into_iter()
            .map(|n| {
                Ok(Superstate {
                    id: n.id,
                    mean: DVector::from_vec(n.mean),
                    cov: matrix(&n.cov)?,
                    count: n.count,
                    cond: n
                        .cond
                        .into_iter()
                        .map(|(j, c)| {
                            Ok((
                                j,
                                Conditional {
                                    mean: DVector::from_vec(c.mean),
                                    cov: matrix(&c.cov)?,
                                    count: c.count,
                                },
                            ))
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        let v = Vocabulary {
            tag: f.tag.parse()?,
            d: f.d,
            superstates,
            pi: matrix(&f.pi)?,
            pi_tau: f.pi_tau.iter().map(|p| matrix(p)).collect::<Result<_>>()?,
            r_diag: DVector::from_vec(f.r_diag),
        };
        v.validate()?;
        Ok(v)
    }
}
