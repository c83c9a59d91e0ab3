use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DemodNet, DemodNetError};
use crate::channel::{sigma2_from_ebn0, substream, Scenario};
use crate::link::{Link, LinkConfig};
use crate::modem::{build_constellation, modulate, Modulation};
use crate::nn::Tensor3;

/// Everything that determines a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub modulation: Modulation,
    pub scenario: Scenario,
    pub ebn0_db: Vec<f64>,
    pub samples_per_ebn0: usize,
    pub symbols_per_sample: usize,
    /// Code rate used in the Eb/N0 to noise-variance conversion.
    pub code_rate: f64,
    pub seed: u64,
    pub link: LinkConfig,
}

impl DatasetSpec {
    /// 5,000 samples of 100 symbols per Eb/N0, uncoded.
    pub fn desk(modulation: Modulation, scenario: Scenario, ebn0_db: Vec<f64>, seed: u64) -> Self {
        Self {
            modulation,
            scenario,
            ebn0_db,
            samples_per_ebn0: 5_000,
            symbols_per_sample: 100,
            code_rate: 1.0,
            seed,
            link: LinkConfig::default(),
        }
    }
}

/// Received symbols and transmitted bits, sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// `len() · symbols_per_sample` received symbols.
    pub rx: Vec<Complex64>,
    /// `len() · symbols_per_sample · k` transmitted bits.
    pub labels: Vec<u8>,
    /// Noise variance each sample was generated at.
    pub sigma2: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn symbols_per_sample(&self) -> usize {
        self.spec.symbols_per_sample
    }

    pub fn bits_per_sample(&self) -> usize {
        self.spec.symbols_per_sample * self.spec.modulation.bits_per_symbol()
    }

    pub fn sample_rx(&self, i: usize) -> &[Complex64] {
        let l = self.symbols_per_sample();
        &self.rx[i * l..(i + 1) * l]
    }

    pub fn sample_labels(&self, i: usize) -> &[u8] {
        let m = self.bits_per_sample();
        &self.labels[i * m..(i + 1) * m]
    }

    /// (n, 2, L) feature tensor of the selected samples.
    pub fn features(&self, indices: &[usize]) -> Result<Tensor3<f32>, DemodNetError> {
        let seqs: Vec<&[Complex64]> = indices.iter().map(|&i| self.sample_rx(i)).collect();
        DemodNet::features(&seqs)
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<u8> {
        indices.iter().flat_map(|&i| self.sample_labels(i).iter().copied()).collect()
    }
}

/// Draws i.i.d. bits, modulates them and passes them through the scenario
/// (equalized frames for fading). Each Eb/N0 point uses its own substream
/// of `seed`, so the result depends only on the spec.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, DemodNetError> {
    if spec.ebn0_db.is_empty() || spec.samples_per_ebn0 == 0 || spec.symbols_per_sample == 0 {
        return Err(DemodNetError::Config("dataset needs a grid, samples and symbols".into()));
    }
    let k = spec.modulation.bits_per_symbol();
    let len = spec.symbols_per_sample;
    let constellation = build_constellation(spec.modulation);
    // non-fading bursts coincide with samples; fading frames hold whole samples
    let link_cfg = if spec.scenario.is_fading() {
        if !spec.link.frame_payload_symbols.is_multiple_of(len) {
            return Err(DemodNetError::Config(format!(
                "frame payload {} is not a multiple of the sample length {len}",
                spec.link.frame_payload_symbols
            )));
        }
        spec.link
    } else {
        LinkConfig {
            burst_symbols: len,
            frame_payload_symbols: len,
            ..spec.link
        }
    };
    let n_total = spec.ebn0_db.len() * spec.samples_per_ebn0;
    let mut data = Dataset {
        spec: spec.clone(),
        rx: Vec::with_capacity(n_total * len),
        labels: Vec::with_capacity(n_total * len * k),
        sigma2: Vec::with_capacity(n_total),
    };
    for (i, &ebn0) in spec.ebn0_db.iter().enumerate() {
        let sigma2 = sigma2_from_ebn0(ebn0, k, spec.code_rate)?;
        let link = Link::new(spec.scenario, sigma2, link_cfg)?;
        let block = link.block_symbols();
        let mut rng = substream(spec.seed, i as u64);
        let want = spec.samples_per_ebn0 * len;
        let sent = want.div_ceil(block) * block;
        let bits: Vec<u8> = (0..sent * k).map(|_| rng.random_range(0..2u8)).collect();
        let tx = modulate(&bits, &constellation)?;
        let rx = link.transmit(&tx, &mut rng)?;
        data.rx.extend_from_slice(&rx[..want]);
        data.labels.extend_from_slice(&bits[..want * k]);
        data.sigma2.extend(std::iter::repeat_n(sigma2, spec.samples_per_ebn0));
    }
    Ok(data)
}
