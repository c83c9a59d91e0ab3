//! Burst and frame structure shared by dataset generation and BER sweeps.
//!
//! Non-fading scenarios impair the stream in independent bursts of
//! `burst_symbols`; the carrier offset phase restarts at zero in every burst.
//! The fading scenario sends frames of `frame_payload_symbols` behind a known
//! training prefix, fades each frame independently, adds noise and returns
//! the LMS-equalized payload.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    add_aggn, add_awgn, apply_frequency_offset, rayleigh_flat_fade, ChannelError, FadingSpec,
    GeneralizedGaussian, Scenario, SimRng,
};
use crate::equalizer::{lms_equalize, training_sequence, EqualizerError, LmsConfig};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Equalizer(#[from] EqualizerError),
    #[error("stream of {len} symbols is not a whole number of {block}-symbol blocks")]
    Ragged { len: usize, block: usize },
    #[error("invalid link config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub burst_symbols: usize,
    pub frame_payload_symbols: usize,
    pub training_symbols: usize,
    pub training_seed: u64,
    pub lms: LmsConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            burst_symbols: 100,
            frame_payload_symbols: 1000,
            training_symbols: 500,
            training_seed: 0x7ea1,
            lms: LmsConfig::default(),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        if self.burst_symbols == 0 || self.frame_payload_symbols == 0 || self.training_symbols == 0 {
            return Err(LinkError::Config("block sizes must be positive".into()));
        }
        if !self.frame_payload_symbols.is_multiple_of(self.burst_symbols) {
            return Err(LinkError::Config(format!(
                "frame payload {} is not a multiple of the burst length {}",
                self.frame_payload_symbols, self.burst_symbols
            )));
        }
        self.lms.validate()?;
        Ok(())
    }

    /// Symbols impaired together for `scenario`.
    pub fn block_symbols(&self, scenario: &Scenario) -> usize {
        if scenario.is_fading() {
            self.frame_payload_symbols
        } else {
            self.burst_symbols
        }
    }
}

/// A scenario at one noise level.
#[derive(Debug, Clone)]
pub struct Link {
    scenario: Scenario,
    sigma2: f64,
    config: LinkConfig,
    training: Vec<Complex64>,
}

impl Link {
    pub fn new(scenario: Scenario, sigma2: f64, config: LinkConfig) -> Result<Self, LinkError> {
        scenario.validate()?;
        config.validate()?;
        if !(sigma2 > 0.0) {
            return Err(ChannelError::NoiseVariance(sigma2).into());
        }
        let training = if scenario.is_fading() {
            training_sequence(config.training_symbols, config.training_seed)
        } else {
            Vec::new()
        };
        Ok(Self {
            scenario,
            sigma2,
            config,
            training,
        })
    }

    pub fn block_symbols(&self) -> usize {
        self.config.block_symbols(&self.scenario)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Sends a whole number of blocks and returns what the demodulator sees.
    pub fn transmit(&self, tx: &[Complex64], rng: &mut SimRng) -> Result<Vec<Complex64>, LinkError> {
        let block = self.block_symbols();
        if !tx.len().is_multiple_of(block) {
            return Err(LinkError::Ragged { len: tx.len(), block });
        }
        let mut out = Vec::with_capacity(tx.len());
        for chunk in tx.chunks_exact(block) {
            out.extend(self.transmit_block(chunk, rng)?);
        }
        Ok(out)
    }

    fn transmit_block(&self, tx: &[Complex64], rng: &mut SimRng) -> Result<Vec<Complex64>, LinkError> {
        Ok(match self.scenario {
            Scenario::Awgn => add_awgn(tx, self.sigma2, rng)?,
            Scenario::Aggn { mu, gamma, rho } => {
                let law = GeneralizedGaussian::new(mu, gamma, rho)?;
                add_aggn(tx, &law, (self.sigma2 / 2.0).sqrt(), rng)
            }
            Scenario::AwgnCfo { delta_f } => add_awgn(&apply_frequency_offset(tx, delta_f), self.sigma2, rng)?,
            Scenario::RayleighAwgn {
                max_doppler_hz,
                symbol_rate_hz,
            } => {
                let spec = FadingSpec::new(max_doppler_hz, symbol_rate_hz)?;
                let frame: Vec<Complex64> = self.training.iter().chain(tx).copied().collect();
                let (faded, _) = rayleigh_flat_fade(&frame, &spec, rng)?;
                let rx = add_awgn(&faded, self.sigma2, rng)?;
                lms_equalize(&rx, &self.training, &self.config.lms)?.payload
            }
        })
    }
}
