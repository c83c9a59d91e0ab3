//! Analytic soft demodulation under the AWGN assumption.
//!
//! `zeta_i = log( Σ_{s∈S_i^0} exp(-|r-s|²/σ²) / Σ_{s∈S_i^1} exp(-|r-s|²/σ²) )`
//! where σ² is the total complex noise variance. Positive values favour bit 0.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modem::Constellation;

#[derive(Debug, Error, PartialEq)]
pub enum LlrError {
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlrMode {
    Exact,
    MaxLog,
}

impl FromStr for LlrMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(LlrMode::Exact),
            "maxlog" => Ok(LlrMode::MaxLog),
            other => Err(format!("unknown LLR mode `{other}` (expected exact or maxlog)")),
        }
    }
}

fn check_sigma2(sigma2: f64) -> Result<(), LlrError> {
    if sigma2 > 0.0 {
        Ok(())
    } else {
        Err(LlrError::NoiseVariance(sigma2))
    }
}

fn log_sum_exp(metrics: &[f64], subset: &[usize]) -> f64 {
    let max = subset
        .iter()
        .map(|&i| metrics[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = subset.iter().map(|&i| (metrics[i] - max).exp()).sum();
    max + sum.ln()
}

fn max_over(metrics: &[f64], subset: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&i| metrics[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn llr_into(
    r: Complex64,
    c: &Constellation,
    inv_sigma2: f64,
    mode: LlrMode,
    metrics: &mut [f64],
    out: &mut [f64],
) {
    for (m, p) in metrics.iter_mut().zip(c.points()) {
        *m = -(r - p).norm_sqr() * inv_sigma2;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        let (zero, one) = (c.subset(i, 0), c.subset(i, 1));
        *slot = match mode {
            LlrMode::Exact => log_sum_exp(metrics, zero) - log_sum_exp(metrics, one),
            LlrMode::MaxLog => max_over(metrics, zero) - max_over(metrics, one),
        };
    }
}

pub fn exact_llr(r: Complex64, c: &Constellation, sigma2: f64) -> Result<Vec<f64>, LlrError> {
    check_sigma2(sigma2)?;
    let mut metrics = vec![0.0; c.points().len()];
    let mut out = vec![0.0; c.bits_per_symbol()];
    llr_into(r, c, sigma2.recip(), LlrMode::Exact, &mut metrics, &mut out);
    Ok(out)
}

/// `(min_{S^1}|r-s|² - min_{S^0}|r-s|²) / σ²`
pub fn maxlog_llr(r: Complex64, c: &Constellation, sigma2: f64) -> Result<Vec<f64>, LlrError> {
    check_sigma2(sigma2)?;
    let mut metrics = vec![0.0; c.points().len()];
    let mut out = vec![0.0; c.bits_per_symbol()];
    llr_into(r, c, sigma2.recip(), LlrMode::MaxLog, &mut metrics, &mut out);
    Ok(out)
}

/// Per-symbol LLR vectors concatenated in transmit bit order.
pub fn llr_sequence(
    rx: &[Complex64],
    c: &Constellation,
    sigma2: f64,
    mode: LlrMode,
) -> Result<Vec<f64>, LlrError> {
    check_sigma2(sigma2)?;
    let k = c.bits_per_symbol();
    let inv = sigma2.recip();
    let mut metrics = vec![0.0; c.points().len()];
    let mut out = vec![0.0; rx.len() * k];
    for (&r, block) in rx.iter().zip(out.chunks_exact_mut(k)) {
        llr_into(r, c, inv, mode, &mut metrics, block);
    }
    Ok(out)
}
