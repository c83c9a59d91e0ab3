//! Channel impairments: AWGN, generalized-Gaussian noise, carrier frequency
//! offset and flat Rayleigh fading, plus the Eb/N0 to noise-variance mapping.
//!
//! Symbols follow the unit-average-energy convention, so the noise variance
//! returned by [`sigma2_from_ebn0`] is N0 relative to Es = 1.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Deterministic generator used by every sampler in the crate (ChaCha, 8 rounds).
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("code rate must lie in (0, 1], got {0}")]
    CodeRate(f64),
    #[error("bits per symbol must be at least 1")]
    BitsPerSymbol,
    #[error("noise variance must be positive, got {0}")]
    NoiseVariance(f64),
    #[error("generalized Gaussian needs gamma > 0 and rho > 0, got gamma={gamma}, rho={rho}")]
    AggnShape { gamma: f64, rho: f64 },
    #[error("invalid fading spec: {0}")]
    Fading(String),
    #[error("cannot parse scenario `{0}` (expected awgn | aggn(mu,gamma,rho) | awgn+cfo(delta_f) | rayleigh(max_doppler_hz,symbol_rate_hz)+awgn)")]
    Scenario(String),
}

/// N0 for a given Eb/N0 under Es = 1.
pub fn sigma2_from_ebn0(ebn0_db: f64, k: usize, code_rate: f64) -> Result<f64, ChannelError> {
    if k == 0 {
        return Err(ChannelError::BitsPerSymbol);
    }
    if !(code_rate > 0.0 && code_rate <= 1.0) {
        return Err(ChannelError::CodeRate(code_rate));
    }
    Ok(1.0 / (k as f64 * code_rate * 10f64.powf(ebn0_db / 10.0)))
}

/// Adds circular complex Gaussian noise of total variance `sigma2`.
pub fn add_awgn(
    tx: &[Complex64],
    sigma2: f64,
    rng: &mut SimRng,
) -> Result<Vec<Complex64>, ChannelError> {
    if !(sigma2 > 0.0) {
        return Err(ChannelError::NoiseVariance(sigma2));
    }
    let sd = (sigma2 / 2.0).sqrt();
    Ok(tx
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re * sd, im * sd)
        })
        .collect())
}

/// Generalized Gaussian law `rho / (2 gamma Γ(1/rho)) exp(-|(w-mu)/gamma|^rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedGaussian {
    pub mu: f64,
    pub gamma: f64,
    pub rho: f64,
}

impl GeneralizedGaussian {
    pub fn new(mu: f64, gamma: f64, rho: f64) -> Result<Self, ChannelError> {
        if !(gamma > 0.0 && rho > 0.0) {
            return Err(ChannelError::AggnShape { gamma, rho });
        }
        Ok(Self { mu, gamma, rho })
    }

    /// `gamma^2 Γ(3/rho) / Γ(1/rho)`
    pub fn variance(&self) -> f64 {
        self.gamma * self.gamma * (ln_gamma(3.0 / self.rho) - ln_gamma(1.0 / self.rho)).exp()
    }

    pub fn pdf(&self, w: f64) -> f64 {
        let z = ((w - self.mu) / self.gamma).abs();
        (self.rho.ln() - (2.0 * self.gamma).ln() - ln_gamma(1.0 / self.rho) - z.powf(self.rho)).exp()
    }

    fn sampler(&self) -> Gamma<f64> {
        Gamma::new(1.0 / self.rho, 1.0).expect("shape validated at construction")
    }

    fn draw(&self, g: &Gamma<f64>, rng: &mut SimRng) -> f64 {
        let magnitude = self.gamma * g.sample(rng).powf(1.0 / self.rho);
        if rng.random::<bool>() {
            self.mu + magnitude
        } else {
            self.mu - magnitude
        }
    }
}

/// `n` i.i.d. generalized-Gaussian draws via sign × gamma × G^(1/rho), G ~ Gamma(1/rho, 1).
pub fn sample_aggn(
    n: usize,
    mu: f64,
    gamma: f64,
    rho: f64,
    rng: &mut SimRng,
) -> Result<Vec<f64>, ChannelError> {
    let law = GeneralizedGaussian::new(mu, gamma, rho)?;
    let g = law.sampler();
    Ok((0..n).map(|_| law.draw(&g, rng)).collect())
}

/// Adds generalized-Gaussian noise independently on I and Q, each draw
/// multiplied by `scale`.
pub fn add_aggn(
    tx: &[Complex64],
    law: &GeneralizedGaussian,
    scale: f64,
    rng: &mut SimRng,
) -> Vec<Complex64> {
    let g = law.sampler();
    tx.iter()
        .map(|&s| {
            let re = law.draw(&g, rng);
            let im = law.draw(&g, rng);
            s + Complex64::new(re * scale, im * scale)
        })
        .collect()
}

/// Rotates sample `n` by `exp(j 2π delta_f n)`, `n` counted from zero.
pub fn apply_frequency_offset(tx: &[Complex64], delta_f: f64) -> Vec<Complex64> {
    tx.iter()
        .enumerate()
        .map(|(n, &s)| s * Complex64::from_polar(1.0, TAU * delta_f * n as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    pub max_doppler_hz: f64,
    pub symbol_rate_hz: f64,
    pub n_oscillators: usize,
}

impl FadingSpec {
    pub const DEFAULT_OSCILLATORS: usize = 32;

    pub fn new(max_doppler_hz: f64, symbol_rate_hz: f64) -> Result<Self, ChannelError> {
        let spec = Self {
            max_doppler_hz,
            symbol_rate_hz,
            n_oscillators: Self::DEFAULT_OSCILLATORS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn normalized_doppler(&self) -> f64 {
        self.max_doppler_hz / self.symbol_rate_hz
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.max_doppler_hz >= 0.0) {
            return Err(ChannelError::Fading("max Doppler must be >= 0".into()));
        }
        if !(self.symbol_rate_hz > 0.0) {
            return Err(ChannelError::Fading("symbol rate must be > 0".into()));
        }
        if self.n_oscillators < 8 {
            return Err(ChannelError::Fading("need at least 8 oscillators".into()));
        }
        if self.normalized_doppler() >= 0.5 {
            return Err(ChannelError::Fading(format!(
                "normalized Doppler {} must stay below 0.5",
                self.normalized_doppler()
            )));
        }
        Ok(())
    }
}

/// Flat Rayleigh fading from a sum of sinusoids.
///
/// Each oscillator has a complex Gaussian weight (random phase and amplitude)
/// and arrival angle `2π(i + u_i)/N`, so every gain sample is exactly CN(0, 1)
/// and the autocorrelation approaches J0(2π f_d n) as N grows.
/// Returns the faded burst and the per-sample gains.
pub fn rayleigh_flat_fade(
    tx: &[Complex64],
    spec: &FadingSpec,
    rng: &mut SimRng,
) -> Result<(Vec<Complex64>, Vec<Complex64>), ChannelError> {
    spec.validate()?;
    let n_osc = spec.n_oscillators;
    let fd = spec.normalized_doppler();
    let norm = (2.0 * n_osc as f64).sqrt().recip();
    let oscillators: Vec<(Complex64, f64)> = (0..n_osc)
        .map(|i| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let angle = TAU * (i as f64 + rng.random::<f64>()) / n_osc as f64;
            (Complex64::new(re, im) * norm, TAU * fd * angle.cos())
        })
        .collect();
    let gains: Vec<Complex64> = (0..tx.len())
        .map(|n| {
            oscillators
                .iter()
                .map(|&(w, omega)| w * Complex64::from_polar(1.0, omega * n as f64))
                .sum()
        })
        .collect();
    let faded = tx.iter().zip(&gains).map(|(s, h)| s * h).collect();
    Ok((faded, gains))
}

/// Rayleigh CDF with per-dimension scale `sigma`.
pub fn rayleigh_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x * x / (2.0 * sigma * sigma)).exp()
    }
}

/// Channel scenario, as written in config files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Awgn,
    Aggn { mu: f64, gamma: f64, rho: f64 },
    AwgnCfo { delta_f: f64 },
    RayleighAwgn { max_doppler_hz: f64, symbol_rate_hz: f64 },
}

impl Scenario {
    pub fn is_fading(&self) -> bool {
        matches!(self, Scenario::RayleighAwgn { .. })
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            Scenario::Awgn => Ok(()),
            Scenario::Aggn { mu, gamma, rho } => GeneralizedGaussian::new(mu, gamma, rho).map(|_| ()),
            Scenario::AwgnCfo { delta_f } => {
                if delta_f.is_finite() {
                    Ok(())
                } else {
                    Err(ChannelError::Scenario(self.to_string()))
                }
            }
            Scenario::RayleighAwgn {
                max_doppler_hz,
                symbol_rate_hz,
            } => FadingSpec::new(max_doppler_hz, symbol_rate_hz).map(|_| ()),
        }
    }

    /// Short tag used in file names.
    pub fn tag(&self) -> &'static str {
        match self {
            Scenario::Awgn => "awgn",
            Scenario::Aggn { .. } => "aggn",
            Scenario::AwgnCfo { .. } => "cfo",
            Scenario::RayleighAwgn { .. } => "rayleigh",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Awgn => write!(f, "awgn"),
            Scenario::Aggn { mu, gamma, rho } => write!(f, "aggn({mu},{gamma},{rho})"),
            Scenario::AwgnCfo { delta_f } => write!(f, "awgn+cfo({delta_f})"),
            Scenario::RayleighAwgn {
                max_doppler_hz,
                symbol_rate_hz,
            } => write!(f, "rayleigh({max_doppler_hz},{symbol_rate_hz})+awgn"),
        }
    }
}

fn parse_args(s: &str, prefix: &str, suffix: &str) -> Option<Vec<f64>> {
    let inner = s.strip_prefix(prefix)?.strip_suffix(suffix)?;
    inner
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok())
        .collect()
}

impl FromStr for Scenario {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || ChannelError::Scenario(s.to_string());
        let scenario = if compact == "awgn" {
            Scenario::Awgn
        } else if let Some(a) = parse_args(&compact, "aggn(", ")") {
            match a[..] {
                [mu, gamma, rho] => Scenario::Aggn { mu, gamma, rho },
                _ => return Err(bad()),
            }
        } else if let Some(a) = parse_args(&compact, "awgn+cfo(", ")") {
            match a[..] {
                [delta_f] => Scenario::AwgnCfo { delta_f },
                _ => return Err(bad()),
            }
        } else if let Some(a) = parse_args(&compact, "rayleigh(", ")+awgn") {
            match a[..] {
                [max_doppler_hz, symbol_rate_hz] => Scenario::RayleighAwgn {
                    max_doppler_hz,
                    symbol_rate_hz,
                },
                _ => return Err(bad()),
            }
        } else {
            return Err(bad());
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
