use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Coding, Decoder, Demodulator, ExperimentConfig, HarnessError};
use crate::channel::{sigma2_from_ebn0, substream, Scenario, SimRng};
use crate::demodnet::{DemodNet, Head};
use crate::fec::{conv_encode, hard_to_soft, viterbi_decode, TrellisSpec};
use crate::link::Link;
use crate::llr::{llr_sequence, LlrMode};
use crate::modem::{build_constellation, hard_decision_from_soft, hard_demodulate_min_distance, modulate, Constellation, Modulation};

/// One row of a BER CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub modulation: Modulation,
    pub scenario: Scenario,
    pub ebn0_db: f64,
    pub demodulator: Demodulator,
    pub decoder: Decoder,
    pub bits_counted: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "modulation,scenario,ebn0_db,demodulator,decoder,bits_counted,bit_errors,ber,seed";

pub fn write_records(path: impl AsRef<Path>, records: &[BerRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BerRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(HarnessError::Config(format!("unexpected CSV header `{}`", header.join(","))));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Bit positions inside one simulation chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkLayout {
    /// Information bits, the only ones counted.
    pub info_bits: usize,
    /// Encoder output including flush bits (equals `info_bits` uncoded).
    pub coded_bits: usize,
    /// Random bits padding the codeword to whole symbols and blocks.
    pub filler_bits: usize,
}

impl ChunkLayout {
    pub fn new(coding: Coding, chunk_symbols: usize, k: usize) -> Self {
        let total = chunk_symbols * k;
        match coding {
            Coding::None => Self { info_bits: total, coded_bits: total, filler_bits: 0 },
            Coding::Conv => {
                let t = TrellisSpec::K7_171_133;
                let info_bits = total / 2 - t.memory();
                let coded_bits = t.coded_len(info_bits);
                Self { info_bits, coded_bits, filler_bits: total - coded_bits }
            }
        }
    }
}

/// Checkpoints a sweep needs, loaded once.
#[derive(Debug, Default)]
pub struct SweepModels {
    pub demodnet: Option<DemodNet>,
    pub llrnet: Option<DemodNet>,
}

impl SweepModels {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let load = |path: &Option<std::path::PathBuf>, head: Head| -> Result<Option<DemodNet>, HarnessError> {
            let Some(path) = path else { return Ok(None) };
            if !path.exists() {
                return Err(HarnessError::MissingCheckpoint(path.display().to_string()));
            }
            let model = DemodNet::load(path)?;
            check_model(&model, cfg.modulation, head)?;
            Ok(Some(model))
        };
        Ok(Self {
            demodnet: if cfg.needs(Demodulator::DemodnetLpr) { load(&cfg.demodnet_checkpoint, Head::Logit)? } else { None },
            llrnet: if cfg.needs(Demodulator::Llrnet) { load(&cfg.llrnet_checkpoint, Head::Linear)? } else { None },
        })
    }
}

fn check_model(model: &DemodNet, modulation: Modulation, head: Head) -> Result<(), HarnessError> {
    if model.modulation() != modulation {
        return Err(HarnessError::Config(format!(
            "checkpoint is for {}, sweep uses {modulation}",
            model.modulation()
        )));
    }
    if model.head() != head {
        return Err(HarnessError::Config(format!("checkpoint has a {} head, expected {head}", model.head())));
    }
    Ok(())
}

/// Runs the sweep described by `cfg`, loading checkpoints from its paths.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>, HarnessError> {
    cfg.validate()?;
    let models = SweepModels::load(cfg)?;
    run_sweep_with(cfg, &models)
}

/// Runs the sweep with already loaded models.
///
/// Chunk `j` of point `i` is drawn from substream `(i << 32) | j` of the
/// seed, so every demodulator sees the same bits and noise and results do
/// not depend on which demodulators are active or on thread scheduling.
pub fn run_sweep_with(cfg: &ExperimentConfig, models: &SweepModels) -> Result<Vec<BerRecord>, HarnessError> {
    cfg.validate()?;
    for d in &cfg.demodulators {
        let (m, head) = match d {
            Demodulator::DemodnetLpr => (&models.demodnet, Head::Logit),
            Demodulator::Llrnet => (&models.llrnet, Head::Linear),
            _ => continue,
        };
        let m = m.as_ref().ok_or_else(|| HarnessError::MissingCheckpoint(format!("no model loaded for {d}")))?;
        check_model(m, cfg.modulation, head)?;
    }
    let per_point: Vec<Vec<BerRecord>> = cfg
        .ebn0_db
        .par_iter()
        .enumerate()
        .map(|(i, &ebn0)| run_point(cfg, models, i, ebn0))
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

struct Tally {
    bits: u64,
    errors: u64,
    done: bool,
}

struct Point<'a> {
    cfg: &'a ExperimentConfig,
    models: &'a SweepModels,
    constellation: Constellation,
    link: Link,
    layout: ChunkLayout,
    /// Noise variance handed to the LLR formulas: the AWGN value for this
    /// Eb/N0, whatever the true channel is.
    llr_sigma2: f64,
}

fn run_point(cfg: &ExperimentConfig, models: &SweepModels, index: usize, ebn0: f64) -> Result<Vec<BerRecord>, HarnessError> {
    let k = cfg.modulation.bits_per_symbol();
    let sigma2 = sigma2_from_ebn0(ebn0, k, cfg.coding.rate())?;
    let point = Point {
        cfg,
        models,
        constellation: build_constellation(cfg.modulation),
        link: Link::new(cfg.scenario, sigma2, cfg.link)?,
        layout: ChunkLayout::new(cfg.coding, cfg.chunk_symbols, k),
        llr_sigma2: sigma2,
    };
    let mut tallies: Vec<Tally> = cfg.demodulators.iter().map(|_| Tally { bits: 0, errors: 0, done: false }).collect();
    let mut chunk = 0u64;
    while tallies.iter().any(|t| !t.done) {
        let mut rng = substream(cfg.seed, ((index as u64) << 32) | chunk);
        let (info, rx) = point.draw(&mut rng)?;
        for (d, t) in cfg.demodulators.iter().zip(&mut tallies) {
            if t.done {
                continue;
            }
            let decided = point.decide(*d, &rx)?;
            t.errors += count_bit_errors(&decided, &info)?;
            t.bits += info.len() as u64;
            t.done = (t.errors >= cfg.target_errors && t.bits >= cfg.bits_per_point) || t.bits >= cfg.max_bits_per_point;
        }
        chunk += 1;
    }
    Ok(cfg
        .demodulators
        .iter()
        .zip(tallies)
        .map(|(&d, t)| BerRecord {
            modulation: cfg.modulation,
            scenario: cfg.scenario,
            ebn0_db: ebn0,
            demodulator: d,
            decoder: Decoder::for_pair(cfg.coding, d),
            bits_counted: t.bits,
            bit_errors: t.errors,
            ber: t.errors as f64 / t.bits as f64,
            seed: cfg.seed,
        })
        .collect())
}

impl Point<'_> {
    /// Information bits and the received (equalized, prefix-free) symbols.
    fn draw(&self, rng: &mut SimRng) -> Result<(Vec<u8>, Vec<Complex64>), HarnessError> {
        let l = self.layout;
        let info: Vec<u8> = (0..l.info_bits).map(|_| rng.random_range(0..2u8)).collect();
        let mut bits = match self.cfg.coding {
            Coding::None => info.clone(),
            Coding::Conv => conv_encode(&info, &TrellisSpec::K7_171_133),
        };
        bits.extend((0..l.filler_bits).map(|_| rng.random_range(0..2u8)));
        let tx = modulate(&bits, &self.constellation)?;
        Ok((info, self.link.transmit(&tx, rng)?))
    }

    fn soft(&self, d: Demodulator, rx: &[Complex64]) -> Result<Vec<f64>, HarnessError> {
        let burst = self.cfg.link.burst_symbols;
        let model = |m: &Option<DemodNet>| m.as_ref().expect("checked before the sweep").soft_output(rx, burst);
        Ok(match d {
            Demodulator::MinDistance => hard_to_soft(&hard_demodulate_min_distance(rx, &self.constellation)),
            Demodulator::ExactLlr => llr_sequence(rx, &self.constellation, self.llr_sigma2, LlrMode::Exact)?,
            Demodulator::MaxlogLlr => llr_sequence(rx, &self.constellation, self.llr_sigma2, LlrMode::MaxLog)?,
            Demodulator::DemodnetLpr => model(&self.models.demodnet)?,
            Demodulator::Llrnet => model(&self.models.llrnet)?,
        })
    }

    /// Decided information bits.
    fn decide(&self, d: Demodulator, rx: &[Complex64]) -> Result<Vec<u8>, HarnessError> {
        if self.cfg.coding == Coding::None && d == Demodulator::MinDistance {
            return Ok(hard_demodulate_min_distance(rx, &self.constellation));
        }
        let soft = self.soft(d, rx)?;
        Ok(match self.cfg.coding {
            Coding::None => hard_decision_from_soft(&soft),
            Coding::Conv => viterbi_decode(&soft[..self.layout.coded_bits], &TrellisSpec::K7_171_133, self.cfg.traceback)?,
        })
    }
}

pub fn count_bit_errors(decided: &[u8], reference: &[u8]) -> Result<u64, HarnessError> {
    if decided.len() != reference.len() {
        return Err(HarnessError::Config(format!(
            "decided {} bits against {} reference bits",
            decided.len(),
            reference.len()
        )));
    }
    Ok(decided.iter().zip(reference).filter(|(a, b)| a != b).count() as u64)
}
