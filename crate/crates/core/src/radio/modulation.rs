//! Gray-mapped PSK/QAM constellations normalized to unit average power.
//!
//! Constellation points are stored in bit-word order: point `k` carries the
//! bit word whose big-endian integer value is `k`. Square QAM maps the first
//! half of each word to the in-phase axis and the second half to quadrature,
//! each axis Gray-coded from the most negative level upward, so BPSK sends bit
//! 0 to `-1` and bit 1 to `+1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Supported modulation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, schemars::JsonSchema)]
pub enum ModulationScheme {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "32PSK")]
    Psk32,
    #[serde(rename = "64QAM")]
    Qam64,
    #[serde(rename = "256QAM")]
    Qam256,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 7] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Qam16,
        ModulationScheme::Psk32,
        ModulationScheme::Qam64,
        ModulationScheme::Qam256,
    ];

    pub fn order(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 2,
            ModulationScheme::Qpsk => 4,
            ModulationScheme::Psk8 => 8,
            ModulationScheme::Qam16 => 16,
            ModulationScheme::Psk32 => 32,
            ModulationScheme::Qam64 => 64,
            ModulationScheme::Qam256 => 256,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "BPSK",
            ModulationScheme::Qpsk => "QPSK",
            ModulationScheme::Psk8 => "8PSK",
            ModulationScheme::Qam16 => "16QAM",
            ModulationScheme::Psk32 => "32PSK",
            ModulationScheme::Qam64 => "64QAM",
            ModulationScheme::Qam256 => "256QAM",
        }
    }

    /// Constellation in bit-word order, unit average power.
    pub fn constellation(self) -> Vec<C64> {
        let m = self.order();
        let raw: Vec<C64> = match self {
            ModulationScheme::Bpsk => vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
            ModulationScheme::Psk8 | ModulationScheme::Psk32 => (0..m)
                .map(|word| {
                    let k = gray_decode(word);
                    C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64)
                })
                .collect(),
            ModulationScheme::Qpsk
            | ModulationScheme::Qam16
            | ModulationScheme::Qam64
            | ModulationScheme::Qam256 => {
                let half = self.bits_per_symbol() / 2;
                let side = 1usize << half;
                let level = |bits: usize| 2.0 * gray_decode(bits) as f64 - (side as f64 - 1.0);
                (0..m)
                    .map(|word| C64::new(level(word >> half), level(word & (side - 1))))
                    .collect()
            }
        };
        let power = raw.iter().map(|s| s.norm_sqr()).sum::<f64>() / m as f64;
        let scale = power.sqrt();
        raw.into_iter().map(|s| s / scale).collect()
    }

    /// Map bits (0/1 values) to symbols.
    pub fn modulate(self, bits: &[u8]) -> Result<Vec<C64>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(Error::Invalid(format!(
                "{} bits is not a multiple of {k} bits per {} symbol",
                bits.len(),
                self.name()
            )));
        }
        let points = self.constellation();
        Ok(bits
            .chunks(k)
            .map(|chunk| points[bits_to_word(chunk)])
            .collect())
    }

    /// Hard-decision nearest-point demodulation; ties go to the lowest index.
    pub fn demodulate(self, symbols: &[C64]) -> Vec<u8> {
        let points = self.constellation();
        let k = self.bits_per_symbol();
        let mut out = Vec::with_capacity(symbols.len() * k);
        for s in symbols {
            let idx = nearest_index(&points, *s);
            out.extend(word_to_bits(idx, k));
        }
        out
    }

    /// Index of the nearest constellation point.
    pub fn nearest(self, s: C64) -> usize {
        nearest_index(&self.constellation(), s)
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModulationScheme::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown modulation scheme {s:?}")))
    }
}

pub(crate) fn nearest_index(points: &[C64], s: C64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (s - p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn gray_decode(g: usize) -> usize {
    let mut n = g;
    let mut shift = g >> 1;
    while shift != 0 {
        n ^= shift;
        shift >>= 1;
    }
    n
}

pub(crate) fn bits_to_word(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

pub(crate) fn word_to_bits(word: usize, k: usize) -> impl Iterator<Item = u8> {
    (0..k).rev().map(move |i| ((word >> i) & 1) as u8)
}

/// Fraction of differing bits.
pub fn ber(recovered: &[u8], truth: &[u8]) -> Result<f64> {
    if recovered.len() != truth.len() {
        return Err(Error::Length(recovered.len(), truth.len()));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let errors = recovered.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Gaussian tail `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Analytical AWGN bit error rate for Gray-coded schemes at the given
/// per-symbol SNR (linear `Es/N0`). Exact for BPSK/QPSK, the standard
/// nearest-neighbour approximation for square QAM and PSK.
pub fn analytical_ber(scheme: ModulationScheme, es_n0: f64) -> f64 {
    let m = scheme.order() as f64;
    let k = scheme.bits_per_symbol() as f64;
    match scheme {
        ModulationScheme::Bpsk => q_function((2.0 * es_n0).sqrt()),
        ModulationScheme::Qpsk => q_function(es_n0.sqrt()),
        ModulationScheme::Qam16 | ModulationScheme::Qam64 | ModulationScheme::Qam256 => {
            let sm = m.sqrt();
            (4.0 / k) * (1.0 - 1.0 / sm) * q_function((3.0 * es_n0 / (m - 1.0)).sqrt())
        }
        ModulationScheme::Psk8 | ModulationScheme::Psk32 => {
            (2.0 / k) * q_function((2.0 * es_n0).sqrt() * (PI / m).sin())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_antipodal() {
        let s = ModulationScheme::Bpsk.modulate(&[0, 1]).unwrap();
        assert_eq!(s, vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
    }

    #[test]
    fn unit_power_and_size() {
        for m in ModulationScheme::ALL {
            let c = m.constellation();
            assert_eq!(c.len(), m.order());
            let p = c.iter().map(|s| s.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((p - 1.0).abs() < 1e-12, "{m}: {p}");
        }
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for m in ModulationScheme::ALL {
            let c = m.constellation();
            let dmin = (0..c.len())
                .flat_map(|i| (0..c.len()).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| (c[i] - c[j]).norm())
                .fold(f64::INFINITY, f64::min);
            for i in 0..c.len() {
                for j in 0..c.len() {
                    if i != j && ((c[i] - c[j]).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{m}: {i} vs {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn qpsk_table() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = ModulationScheme::Qpsk.modulate(&[0, 0, 0, 1, 1, 0, 1, 1]).unwrap();
        let expect = [C64::new(-h, -h), C64::new(-h, h), C64::new(h, -h), C64::new(h, h)];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
        let bits = ModulationScheme::Qpsk.demodulate(&s);
        assert_eq!(bits, vec![0, 0, 0, 1, 1, 0, 1, 1]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(ModulationScheme::Qam16.modulate(&[0, 1, 1]).is_err());
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        assert_eq!(ModulationScheme::Bpsk.demodulate(&[C64::new(0.0, 0.0)]), vec![0]);
    }

    #[test]
    fn q_function_reference_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-12);
        assert!((q_function(3.0) - 1.349_898e-3).abs() < 1e-8);
    }
}
