//! Constellations, bit-to-symbol mapping and hard decisions.
//!
//! Every constellation is square (or 1-D for BPSK) with per-axis reflected
//! Gray labels. Within a symbol the first transmitted bit is the most
//! significant bit of the label; for QAM the first half of the label drives
//! the in-phase axis and the second half the quadrature axis.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModemError {
    #[error("unknown modulation `{0}` (expected one of bpsk, qpsk, qam16, qam64, qam256)")]
    UnknownModulation(String),
    #[error("bit stream length {len} is not a multiple of {k} bits per symbol")]
    RaggedBits { len: usize, k: usize },
    #[error("bit stream holds value {value} at position {index}; only 0 and 1 are allowed")]
    InvalidBit { index: usize, value: u8 },
}

/// Supported modulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Bpsk,
        Modulation::Qpsk,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
    ];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    /// Config/CLI spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
            Modulation::Qam64 => "qam64",
            Modulation::Qam256 => "qam256",
        }
    }

    /// Human-facing label, e.g. `16QAM`.
    pub fn label(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16QAM",
            Modulation::Qam64 => "64QAM",
            Modulation::Qam256 => "256QAM",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modulation::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModemError::UnknownModulation(s.to_string()))
    }
}

/// A modulation's symbol table and per-bit partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    k: usize,
    points: Vec<Complex64>,
    /// `subsets[i][d]`: indices of the points whose bit `i` equals `d`.
    subsets: Vec<[Vec<usize>; 2]>,
}

/// Amplitude levels (unscaled, odd integers) of one axis carrying `m` bits,
/// indexed by the axis label.
///
/// One-bit axes map 0 to +1. Wider axes use ascending reflected Gray order:
/// the i-th level from the bottom carries label `i ^ (i >> 1)`.
fn axis_levels(m: usize) -> Vec<f64> {
    let n = 1usize << m;
    if m == 1 {
        return vec![1.0, -1.0];
    }
    let mut levels = vec![0.0; n];
    for i in 0..n {
        let label = i ^ (i >> 1);
        levels[label] = (2 * i) as f64 - (n as f64 - 1.0);
    }
    levels
}

pub fn build_constellation(modulation: Modulation) -> Constellation {
    let k = modulation.bits_per_symbol();
    let n = 1usize << k;
    let points: Vec<Complex64> = if k == 1 {
        axis_levels(1)
            .into_iter()
            .map(|a| Complex64::new(a, 0.0))
            .collect()
    } else {
        let m = k / 2;
        let levels = axis_levels(m);
        let mask = (1usize << m) - 1;
        let raw: Vec<Complex64> = (0..n)
            .map(|idx| Complex64::new(levels[idx >> m], levels[idx & mask]))
            .collect();
        let energy = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / n as f64;
        let scale = energy.sqrt().recip();
        raw.into_iter().map(|p| p * scale).collect()
    };

    let subsets = (0..k)
        .map(|i| {
            let shift = k - 1 - i;
            let mut zero = Vec::with_capacity(n / 2);
            let mut one = Vec::with_capacity(n / 2);
            for idx in 0..n {
                if (idx >> shift) & 1 == 0 {
                    zero.push(idx);
                } else {
                    one.push(idx);
                }
            }
            [zero, one]
        })
        .collect();

    Constellation {
        modulation,
        k,
        points,
        subsets,
    }
}

impl Constellation {
    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Point indices whose bit `bit` (0-based, first transmitted first) equals `value`.
    pub fn subset(&self, bit: usize, value: u8) -> &[usize] {
        &self.subsets[bit][value as usize]
    }

    /// Bits of point `index`, first transmitted first.
    pub fn label_bits(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.k).map(move |i| ((index >> (self.k - 1 - i)) & 1) as u8)
    }

    pub fn index_of_bits(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }

    /// Index of the Euclidean-nearest point; ties go to the lowest index.
    pub fn nearest_index(&self, r: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (idx, p) in self.points.iter().enumerate() {
            let d = (r - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        best
    }
}

fn check_bits(bits: &[u8]) -> Result<(), ModemError> {
    match bits.iter().position(|&b| b > 1) {
        Some(index) => Err(ModemError::InvalidBit {
            index,
            value: bits[index],
        }),
        None => Ok(()),
    }
}

/// Maps a bit stream onto constellation symbols, `k` bits per symbol.
pub fn modulate(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>, ModemError> {
    let k = c.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(ModemError::RaggedBits { len: bits.len(), k });
    }
    check_bits(bits)?;
    Ok(bits
        .chunks_exact(k)
        .map(|chunk| c.points[c.index_of_bits(chunk)])
        .collect())
}

/// Minimum-distance hard demodulation.
pub fn hard_demodulate_min_distance(rx: &[Complex64], c: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(rx.len() * c.bits_per_symbol());
    for &r in rx {
        bits.extend(c.label_bits(c.nearest_index(r)));
    }
    bits
}

/// Sign slicer on soft values: positive means bit 0, zero and negative mean bit 1.
pub fn hard_decision_from_soft(soft: &[f64]) -> Vec<u8> {
    soft.iter().map(|&v| if v > 0.0 { 0 } else { 1 }).collect()
}
