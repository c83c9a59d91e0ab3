//! Rate-1/2 convolutional code and Viterbi decoding, plus closed-form
//! uncoded BER for Gray-mapped constellations.

use thiserror::Error;

use crate::channel::sigma2_from_ebn0;
use crate::modem::{build_constellation, Modulation};

#[derive(Debug, Error, PartialEq)]
pub enum FecError {
    #[error("soft input length {0} is not a multiple of 2")]
    OddLength(usize),
    #[error("traceback depth must be at least 1")]
    Traceback,
    #[error("soft input holds {got} coded bits, too few for the {flush} flush bits")]
    TooShort { got: usize, flush: usize },
}

/// Trellis of a rate-1/2 feedforward convolutional code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisSpec {
    pub constraint_length: usize,
    /// Generator polynomials in octal notation; the MSB taps the newest bit.
    pub generators_octal: [u32; 2],
}

impl Default for TrellisSpec {
    fn default() -> Self {
        Self::K7_171_133
    }
}

impl TrellisSpec {
    /// Constraint length 7, generators 171 and 133 (octal).
    pub const K7_171_133: TrellisSpec = TrellisSpec {
        constraint_length: 7,
        generators_octal: [0o171, 0o133],
    };

    pub const RATE: f64 = 0.5;

    pub fn n_states(&self) -> usize {
        1 << (self.constraint_length - 1)
    }

    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.memory())
    }

    /// Output pair for shift-register contents `reg` (newest bit in the MSB).
    fn outputs(&self, reg: u32) -> [u8; 2] {
        self.generators_octal
            .map(|g| ((reg & g).count_ones() & 1) as u8)
    }
}

/// Zero-started encoder, terminated with `K-1` zero flush bits.
pub fn conv_encode(info: &[u8], t: &TrellisSpec) -> Vec<u8> {
    let m = t.memory();
    let mut state: u32 = 0;
    let mut out = Vec::with_capacity(t.coded_len(info.len()));
    for &b in info.iter().chain(std::iter::repeat_n(&0u8, m)) {
        let reg = ((b as u32 & 1) << m) | state;
        out.extend(t.outputs(reg));
        state = reg >> 1;
    }
    out
}

/// Hard bits as ±1 pseudo-LLRs (bit 0 → +1).
pub fn hard_to_soft(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Viterbi decoding of a terminated codeword.
///
/// Maximizes `Σ soft_j (1 - 2 c_j)` over codewords. Decisions are released
/// through a sliding traceback of `traceback` steps from the best state; the
/// tail is traced back from the zero termination state. Returns the
/// information bits (flush bits removed).
pub fn viterbi_decode(soft: &[f64], t: &TrellisSpec, traceback: usize) -> Result<Vec<u8>, FecError> {
    if !soft.len().is_multiple_of(2) {
        return Err(FecError::OddLength(soft.len()));
    }
    if traceback == 0 {
        return Err(FecError::Traceback);
    }
    let m = t.memory();
    let steps = soft.len() / 2;
    if steps < m {
        return Err(FecError::TooShort { got: soft.len(), flush: m });
    }
    let n_states = t.n_states();
    let top = m - 1;

    // branch signs per (next state, predecessor choice)
    let mut branch = vec![[[0.0f64; 2]; 2]; n_states];
    for (ns, entry) in branch.iter_mut().enumerate() {
        for (choice, sign) in entry.iter_mut().enumerate() {
            let reg = ((ns as u32) << 1) | choice as u32;
            let [c0, c1] = t.outputs(reg);
            *sign = [1.0 - 2.0 * c0 as f64, 1.0 - 2.0 * c1 as f64];
        }
    }

    let mut metric = vec![f64::NEG_INFINITY; n_states];
    metric[0] = 0.0;
    let mut next = vec![0.0; n_states];
    // bit `ns` of decisions[step] = predecessor LSB chosen for next state ns
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);
    let mut decoded = vec![0u8; steps];

    let trace = |decisions: &[u64], mut state: usize, from: usize, to: usize| -> usize {
        // walks state back from time `from` to time `to`
        for step in (to..from).rev() {
            let choice = (decisions[step] >> state) & 1;
            state = ((state << 1) | choice as usize) & (n_states - 1);
        }
        state
    };

    for step in 0..steps {
        let (a, b) = (soft[2 * step], soft[2 * step + 1]);
        let mut word = 0u64;
        for ns in 0..n_states {
            let p0 = (ns << 1) & (n_states - 1);
            let p1 = p0 | 1;
            let [s0, s1] = branch[ns];
            let m0 = metric[p0] + s0[0] * a + s0[1] * b;
            let m1 = metric[p1] + s1[0] * a + s1[1] * b;
            if m1 > m0 {
                next[ns] = m1;
                word |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        decisions.push(word);
        let best = next
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for (dst, &src) in metric.iter_mut().zip(&next) {
            *dst = src - best;
        }

        let now = step + 1;
        if now > traceback {
            let best_state = metric
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (s, &v)| if v > acc.1 { (s, v) } else { acc })
                .0;
            let out_time = now - traceback;
            let state = trace(&decisions, best_state, now, out_time);
            decoded[out_time - 1] = (state >> top) as u8 & 1;
        }
    }

    // terminated: the undecided tail is traced back from the zero state
    let start = if steps > traceback { steps - traceback + 1 } else { 1 };
    let mut state = 0usize;
    for time in (start..=steps).rev() {
        decoded[time - 1] = (state >> top) as u8 & 1;
        let choice = (decisions[time - 1] >> state) & 1;
        state = ((state << 1) | choice as usize) & (n_states - 1);
    }

    decoded.truncate(steps - m);
    Ok(decoded)
}

fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Exact uncoded BER of Gray-mapped BPSK/QPSK/square QAM over AWGN.
///
/// Each axis is an independent PAM; the result averages the Hamming distance
/// between sent and decided axis labels over all levels and decision regions.
pub fn theoretical_ber(modulation: Modulation, ebn0_db: f64) -> f64 {
    let c = build_constellation(modulation);
    let k = modulation.bits_per_symbol();
    let sigma2 = sigma2_from_ebn0(ebn0_db, k, 1.0).expect("valid conversion");
    let sd = (sigma2 / 2.0).sqrt();
    let bits_per_axis = if k == 1 { 1 } else { k / 2 };
    let n_levels = 1usize << bits_per_axis;

    // axis amplitudes by label, read off the constellation's first axis
    let mut by_label: Vec<(f64, usize)> = (0..n_levels)
        .map(|label| {
            let idx = label << (k - bits_per_axis);
            (c.points()[idx].re, label)
        })
        .collect();
    by_label.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = 0.0;
    for &(level, sent) in &by_label {
        for (j, &(_, decided)) in by_label.iter().enumerate() {
            let lo = if j == 0 {
                f64::NEG_INFINITY
            } else {
                0.5 * (by_label[j - 1].0 + by_label[j].0)
            };
            let hi = if j + 1 == n_levels {
                f64::INFINITY
            } else {
                0.5 * (by_label[j].0 + by_label[j + 1].0)
            };
            let p_lo = if lo.is_finite() { q_function((lo - level) / sd) } else { 1.0 };
            let p_hi = if hi.is_finite() { q_function((hi - level) / sd) } else { 0.0 };
            total += (p_lo - p_hi) * (sent ^ decided).count_ones() as f64;
        }
    }
    total / (n_levels * bits_per_axis) as f64
}
