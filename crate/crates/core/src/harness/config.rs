use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel::Scenario;
use crate::fec::TrellisSpec;
use crate::link::LinkConfig;
use crate::modem::Modulation;

/// Smallest accepted bit floor per Eb/N0 point.
pub const MIN_BITS_PER_POINT: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Demodulator {
    MinDistance,
    ExactLlr,
    MaxlogLlr,
    DemodnetLpr,
    Llrnet,
}

impl Demodulator {
    pub const ALL: [Demodulator; 5] = [
        Demodulator::MinDistance,
        Demodulator::ExactLlr,
        Demodulator::MaxlogLlr,
        Demodulator::DemodnetLpr,
        Demodulator::Llrnet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Demodulator::MinDistance => "min-distance",
            Demodulator::ExactLlr => "exact-llr",
            Demodulator::MaxlogLlr => "maxlog-llr",
            Demodulator::DemodnetLpr => "demodnet-lpr",
            Demodulator::Llrnet => "llrnet",
        }
    }

    /// Produces hard bits rather than soft values.
    pub fn is_hard(self) -> bool {
        self == Demodulator::MinDistance
    }
}

impl fmt::Display for Demodulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Demodulator {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Demodulator::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown demodulator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    #[default]
    None,
    /// Rate-1/2, K=7 convolutional code with generators 171/133.
    Conv,
}

impl Coding {
    pub fn rate(self) -> f64 {
        match self {
            Coding::None => 1.0,
            Coding::Conv => TrellisSpec::RATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decoder {
    None,
    ViterbiHard,
    ViterbiSoft,
}

impl Decoder {
    pub fn as_str(self) -> &'static str {
        match self {
            Decoder::None => "none",
            Decoder::ViterbiHard => "viterbi-hard",
            Decoder::ViterbiSoft => "viterbi-soft",
        }
    }

    pub fn for_pair(coding: Coding, demod: Demodulator) -> Self {
        match (coding, demod.is_hard()) {
            (Coding::None, _) => Decoder::None,
            (Coding::Conv, true) => Decoder::ViterbiHard,
            (Coding::Conv, false) => Decoder::ViterbiSoft,
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_bits() -> u64 {
    100_000
}
fn default_max_bits() -> u64 {
    10_000_000
}
fn default_target_errors() -> u64 {
    500
}
fn default_traceback() -> usize {
    32
}
fn default_chunk_symbols() -> usize {
    10_000
}

/// One BER sweep: a modulation and scenario, a grid, the demodulators to
/// compare and the stopping rule.
///
/// Each point runs until both `target_errors` errors and `bits_per_point`
/// counted bits are reached, or `max_bits_per_point` bits are counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub modulation: Modulation,
    pub scenario: Scenario,
    pub ebn0_db: Vec<f64>,
    pub demodulators: Vec<Demodulator>,
    #[serde(default)]
    pub coding: Coding,
    #[serde(default = "default_bits")]
    pub bits_per_point: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits_per_point: u64,
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_traceback")]
    pub traceback: usize,
    /// Symbols drawn per simulation chunk; one codeword per chunk when coded.
    #[serde(default = "default_chunk_symbols")]
    pub chunk_symbols: usize,
    /// LMS equalization. Required for, and only valid with, fading.
    #[serde(default)]
    pub equalizer: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demodnet_checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llrnet_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub link: LinkConfig,
}

impl ExperimentConfig {
    /// A config with every default filled in; callers override fields.
    pub fn new(name: impl Into<String>, modulation: Modulation, scenario: Scenario, ebn0_db: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            modulation,
            scenario,
            ebn0_db,
            demodulators: vec![Demodulator::MinDistance],
            coding: Coding::None,
            bits_per_point: default_bits(),
            max_bits_per_point: default_max_bits(),
            target_errors: default_target_errors(),
            seed: 0,
            traceback: default_traceback(),
            chunk_symbols: default_chunk_symbols(),
            equalizer: Some(scenario.is_fading()),
            demodnet_checkpoint: None,
            llrnet_checkpoint: None,
            link: LinkConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Copy with implicit choices written out.
    pub fn resolved(&self) -> Self {
        Self {
            equalizer: Some(self.equalizer.unwrap_or(self.scenario.is_fading())),
            ..self.clone()
        }
    }

    pub fn needs(&self, d: Demodulator) -> bool {
        self.demodulators.contains(&d)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.ebn0_db.is_empty() {
            return bad("ebn0_db grid is empty".into());
        }
        if let Some(v) = self.ebn0_db.iter().find(|v| !v.is_finite()) {
            return bad(format!("non-finite Eb/N0 {v}"));
        }
        if self.demodulators.is_empty() {
            return bad("no demodulators selected".into());
        }
        for (i, d) in self.demodulators.iter().enumerate() {
            if self.demodulators[..i].contains(d) {
                return bad(format!("demodulator {d} listed twice"));
            }
        }
        if self.bits_per_point < MIN_BITS_PER_POINT {
            return bad(format!(
                "bits_per_point = {} is below the minimum of {MIN_BITS_PER_POINT}",
                self.bits_per_point
            ));
        }
        if self.max_bits_per_point < self.bits_per_point {
            return bad("max_bits_per_point is below bits_per_point".into());
        }
        if self.target_errors == 0 || self.traceback == 0 {
            return bad("target_errors and traceback must be positive".into());
        }
        self.scenario.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.link.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        match (self.equalizer, self.scenario.is_fading()) {
            (Some(true), false) => {
                return Err(HarnessError::Scenario(format!("equalizer requested without fading ({})", self.scenario)))
            }
            (Some(false), true) => {
                return Err(HarnessError::Scenario("the fading scenario requires the LMS equalizer".into()))
            }
            _ => {}
        }
        let block = self.link.block_symbols(&self.scenario);
        if self.chunk_symbols == 0 || !self.chunk_symbols.is_multiple_of(block) {
            return bad(format!(
                "chunk_symbols = {} is not a positive multiple of the {block}-symbol block",
                self.chunk_symbols
            ));
        }
        if !self.chunk_symbols.is_multiple_of(self.link.burst_symbols) {
            return bad("chunk_symbols is not a multiple of burst_symbols".into());
        }
        if self.coding == Coding::Conv {
            let bits = self.chunk_symbols * self.modulation.bits_per_symbol();
            if bits / 2 <= TrellisSpec::K7_171_133.memory() {
                return bad("chunk too short to hold a codeword".into());
            }
        }
        if self.needs(Demodulator::DemodnetLpr) && self.demodnet_checkpoint.is_none() {
            return Err(HarnessError::MissingCheckpoint("demodnet_checkpoint is not set".into()));
        }
        if self.needs(Demodulator::Llrnet) && self.llrnet_checkpoint.is_none() {
            return Err(HarnessError::MissingCheckpoint("llrnet_checkpoint is not set".into()));
        }
        Ok(())
    }

    /// Checkpoint paths resolved against `base` when relative.
    pub fn with_base_dir(&self, base: &Path) -> Self {
        let fix = |p: &Option<PathBuf>| p.as_ref().map(|p| if p.is_relative() { base.join(p) } else { p.clone() });
        Self {
            demodnet_checkpoint: fix(&self.demodnet_checkpoint),
            llrnet_checkpoint: fix(&self.llrnet_checkpoint),
            ..self.clone()
        }
    }
}
