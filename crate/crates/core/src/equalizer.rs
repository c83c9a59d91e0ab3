//! LMS adaptive linear equalizer trained on a known symbol prefix.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum EqualizerError {
    #[error("received sequence has {got} symbols, shorter than the {prefix}-symbol training prefix")]
    TooShort { got: usize, prefix: usize },
    #[error("tap count must be odd and positive, got {0}")]
    Taps(usize),
    #[error("step fraction must lie in (0, 1], got {0}")]
    StepFraction(f64),
    #[error("training prefix has zero power")]
    ZeroPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmsConfig {
    pub n_taps: usize,
    /// Fraction of the stability bound `2 / (n_taps · P)` used as step size.
    pub step_fraction: f64,
}

impl Default for LmsConfig {
    fn default() -> Self {
        Self {
            n_taps: 5,
            step_fraction: 0.1,
        }
    }
}

impl LmsConfig {
    pub fn validate(&self) -> Result<(), EqualizerError> {
        if self.n_taps == 0 || self.n_taps.is_multiple_of(2) {
            return Err(EqualizerError::Taps(self.n_taps));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(EqualizerError::StepFraction(self.step_fraction));
        }
        Ok(())
    }
}

/// Known QPSK training symbols shared by transmitter and receiver.
pub fn training_sequence(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from_seed(seed);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex64::new(re, im)
        })
        .collect()
}

/// Linear equalizer with a window centred on the middle tap, so output `n`
/// estimates symbol `n` with no extra delay.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsEqualizer {
    taps: Vec<Complex64>,
    mu: f64,
    frozen: bool,
}

impl LmsEqualizer {
    fn center(&self) -> usize {
        self.taps.len() / 2
    }

    fn filter_at(&self, x: &[Complex64], n: usize) -> Complex64 {
        let c = self.center() as isize;
        self.taps
            .iter()
            .enumerate()
            .filter_map(|(j, w)| {
                let idx = n as isize + c - j as isize;
                (idx >= 0 && (idx as usize) < x.len()).then(|| w * x[idx as usize])
            })
            .sum()
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn step_size(&self) -> f64 {
        self.mu
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Adapts a centre-spike filter over `rx[..training.len()]` and freezes it.
    /// Returns the equalizer and the per-symbol squared training error.
    pub fn train(
        rx: &[Complex64],
        training: &[Complex64],
        cfg: &LmsConfig,
    ) -> Result<(Self, Vec<f64>), EqualizerError> {
        cfg.validate()?;
        let prefix = training.len();
        if rx.len() < prefix {
            return Err(EqualizerError::TooShort {
                got: rx.len(),
                prefix,
            });
        }
        let power = rx[..prefix].iter().map(|v| v.norm_sqr()).sum::<f64>() / prefix.max(1) as f64;
        if !(power > 0.0) {
            return Err(EqualizerError::ZeroPower);
        }
        let mut taps = vec![Complex64::new(0.0, 0.0); cfg.n_taps];
        taps[cfg.n_taps / 2] = Complex64::new(1.0, 0.0);
        let mut eq = Self {
            taps,
            mu: cfg.step_fraction * 2.0 / (cfg.n_taps as f64 * power),
            frozen: false,
        };
        let c = eq.center() as isize;
        let mut errors = Vec::with_capacity(prefix);
        for (n, &d) in training.iter().enumerate() {
            let e = d - eq.filter_at(rx, n);
            errors.push(e.norm_sqr());
            for j in 0..eq.taps.len() {
                let idx = n as isize + c - j as isize;
                if idx >= 0 && (idx as usize) < rx.len() {
                    eq.taps[j] += eq.mu * e * rx[idx as usize].conj();
                }
            }
        }
        eq.frozen = true;
        Ok((eq, errors))
    }

    /// Filters `rx[start..]` with the frozen taps (samples before `start`
    /// still feed the window).
    pub fn apply(&self, rx: &[Complex64], start: usize) -> Vec<Complex64> {
        (start..rx.len()).map(|n| self.filter_at(rx, n)).collect()
    }
}

/// Result of [`lms_equalize`].
#[derive(Debug, Clone)]
pub struct LmsOutcome {
    pub payload: Vec<Complex64>,
    pub equalizer: LmsEqualizer,
    pub training_error: Vec<f64>,
}

/// Trains on the known prefix, then returns the equalized payload with the
/// prefix stripped.
pub fn lms_equalize(
    rx: &[Complex64],
    training: &[Complex64],
    cfg: &LmsConfig,
) -> Result<LmsOutcome, EqualizerError> {
    let (equalizer, training_error) = LmsEqualizer::train(rx, training, cfg)?;
    let payload = equalizer.apply(rx, training.len());
    Ok(LmsOutcome {
        payload,
        equalizer,
        training_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, rng_from_seed};

    fn rms(a: &[Complex64], b: &[Complex64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn static_gain_is_inverted() {
        let train = training_sequence(500, 1);
        let payload = training_sequence(300, 2);
        let tx: Vec<Complex64> = train.iter().chain(&payload).copied().collect();
        let rx: Vec<Complex64> = tx.iter().map(|s| s * 2.0).collect();
        let out = lms_equalize(&rx, &train, &LmsConfig::default()).unwrap();
        assert!(rms(&out.payload, &payload) < 1e-2);
        let taps = out.equalizer.taps();
        assert!((taps[2] - Complex64::new(0.5, 0.0)).norm() < 1e-2);
        for j in [0, 1, 3, 4] {
            assert!(taps[j].norm() < 1e-2);
        }
    }

    #[test]
    fn identity_channel_keeps_spike() {
        let train = training_sequence(500, 3);
        let payload = training_sequence(200, 4);
        let rx: Vec<Complex64> = train.iter().chain(&payload).copied().collect();
        let out = lms_equalize(&rx, &train, &LmsConfig::default()).unwrap();
        assert!(rms(&out.payload, &payload) < 1e-6);
        assert_eq!(out.payload.len(), 200);
    }

    #[test]
    fn training_error_decreases() {
        let train = training_sequence(500, 5);
        let mut rng = rng_from_seed(6);
        let h = Complex64::new(0.6, -0.9);
        let clean: Vec<Complex64> = train.iter().map(|s| s * h).collect();
        // 15 dB SNR
        let rx = add_awgn(&clean, h.norm_sqr() * 10f64.powf(-1.5), &mut rng).unwrap();
        let out = lms_equalize(&rx, &train, &LmsConfig::default()).unwrap();
        let e = &out.training_error;
        let first = e[..100].iter().sum::<f64>() / 100.0;
        let last = e[400..].iter().sum::<f64>() / 100.0;
        assert!(last < first, "first {first} last {last}");
    }

    #[test]
    fn taps_are_frozen_after_training() {
        let train = training_sequence(500, 7);
        let rx: Vec<Complex64> = train.iter().chain(&training_sequence(50, 8)).map(|s| s * 1.3).collect();
        let (eq, _) = LmsEqualizer::train(&rx, &train, &LmsConfig::default()).unwrap();
        let before = eq.taps().to_vec();
        let _ = eq.apply(&rx, 500);
        assert!(eq.is_frozen());
        assert_eq!(eq.taps(), &before[..]);
    }

    #[test]
    fn step_size_follows_input_power() {
        let train = training_sequence(500, 9);
        let rx: Vec<Complex64> = train.iter().map(|s| s * 2.0).collect();
        let (eq, _) = LmsEqualizer::train(&rx, &train, &LmsConfig::default()).unwrap();
        assert!((eq.step_size() - 0.1 * 2.0 / (5.0 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let train = training_sequence(500, 10);
        let err = lms_equalize(&train[..100], &train, &LmsConfig::default()).unwrap_err();
        assert_eq!(err, EqualizerError::TooShort { got: 100, prefix: 500 });
        let cfg = LmsConfig { n_taps: 4, ..LmsConfig::default() };
        assert_eq!(lms_equalize(&train, &train, &cfg).unwrap_err(), EqualizerError::Taps(4));
        let zeros = vec![Complex64::new(0.0, 0.0); 500];
        assert_eq!(lms_equalize(&zeros, &train, &LmsConfig::default()).unwrap_err(), EqualizerError::ZeroPower);
    }
}
