//! DemodNet: a fully convolutional demodulator mapping received symbols
//! (two channels, Re and Im) to one logit per bit, plus the regression
//! variant that predicts LLRs directly.
//!
//! Layer stack: deconv(2→C, stride k) → BN → ReLU, then `hidden_blocks` ×
//! [conv(C→C, hidden_kernel) → BN → ReLU], then conv(C→1, final_kernel).

mod checkpoint;
mod dataset;
mod ops;
mod train;

use std::str::FromStr;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{rng_from_seed, ChannelError};
use crate::link::LinkError;
use crate::llr::LlrError;
use crate::modem::{Modulation, ModemError};
use crate::nn::{BatchNorm1d, Conv1d, Deconv1d, Layer, Mode, NnError, ParamGrad, Relu, Tensor3};

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{generate_dataset, Dataset, DatasetSpec};
pub use ops::{exact_llr_op_counts, ComplexityReport, LayerOps, REFERENCE_EXACT_LLR_64QAM};
pub use train::{evaluate_loss, exact_llr_targets, train, train_llrnet_baseline, TrainReport, TrainSchedule};

/// Shortest input accepted, in symbols.
pub const MIN_SYMBOLS: usize = 31;
/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.05;
/// Bursts fed to the network per inference call in [`DemodNet::soft_output`].
const INFER_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum DemodNetError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Llr(#[from] LlrError),
    #[error("input has {got} symbols; the network needs at least {min}")]
    TooShort { got: usize, min: usize },
    #[error("model is for {model} but the data is {data}")]
    ModulationMismatch { model: Modulation, data: Modulation },
    #[error("model head is {got}, operation needs {want}")]
    WrongHead { want: Head, got: Head },
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}; parameters restored to the start of that epoch")]
    Diverged { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Output head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One logit per bit, trained with BCE on hard bits.
    Logit,
    /// Linear LLR regression, trained with MSE against exact LLRs.
    Linear,
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Head::Logit => "logit",
            Head::Linear => "linear",
        })
    }
}

impl FromStr for Head {
    type Err = DemodNetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logit" => Ok(Head::Logit),
            "linear" => Ok(Head::Linear),
            other => Err(DemodNetError::Config(format!("unknown head `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_channels: usize,
    pub hidden_kernel: usize,
    pub final_kernel: usize,
    pub hidden_blocks: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_channels: 64,
            hidden_kernel: 31,
            final_kernel: 31,
            hidden_blocks: 3,
        }
    }
}

impl ModelConfig {
    /// Reduced model for single-core runs: 16 channels, hidden kernel 9.
    pub fn desk() -> Self {
        Self {
            hidden_channels: 16,
            hidden_kernel: 9,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DemodNetError> {
        if self.hidden_channels == 0 || self.hidden_kernel == 0 || self.final_kernel == 0 {
            return Err(DemodNetError::Config("channels and kernels must be positive".into()));
        }
        if self.hidden_kernel.is_multiple_of(2) || self.final_kernel.is_multiple_of(2) {
            return Err(DemodNetError::Config("kernel lengths must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub conv: Conv1d<f32>,
    pub bn: BatchNorm1d<f32>,
    pub relu: Relu<f32>,
}

/// Network outputs for one received sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f32>,
    pub probs: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct DemodNet {
    modulation: Modulation,
    config: ModelConfig,
    head: Head,
    /// Linear head only: the raw output times this is the predicted LLR.
    output_scale: f32,
    pub(crate) deconv: Deconv1d<f32>,
    pub(crate) bn0: BatchNorm1d<f32>,
    relu0: Relu<f32>,
    pub(crate) blocks: Vec<Block>,
    pub(crate) final_conv: Conv1d<f32>,
}

fn gaussian_init(n: usize, rng: &mut crate::channel::SimRng) -> Vec<f32> {
    let normal = Normal::new(0.0, INIT_STD).expect("positive std");
    (0..n).map(|_| normal.sample(rng) as f32).collect()
}

impl DemodNet {
    /// Builds an untrained network with weights drawn from N(0, 0.05²) and zero biases.
    pub fn new(modulation: Modulation, config: ModelConfig, head: Head, seed: u64) -> Result<Self, DemodNetError> {
        config.validate()?;
        let k = modulation.bits_per_symbol();
        let c = config.hidden_channels;
        let mut rng = rng_from_seed(seed);
        let deconv = Deconv1d::from_params(2, c, k, k, 0, gaussian_init(c * 2 * k, &mut rng), vec![0.0; c])?;
        let blocks = (0..config.hidden_blocks)
            .map(|_| {
                let w = gaussian_init(c * c * config.hidden_kernel, &mut rng);
                Ok(Block {
                    conv: Conv1d::from_params(c, c, config.hidden_kernel, w, vec![0.0; c])?,
                    bn: BatchNorm1d::new(c),
                    relu: Relu::new(),
                })
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        let final_conv = Conv1d::from_params(
            c,
            1,
            config.final_kernel,
            gaussian_init(c * config.final_kernel, &mut rng),
            vec![0.0],
        )?;
        Ok(Self {
            modulation,
            config,
            head,
            output_scale: 1.0,
            deconv,
            bn0: BatchNorm1d::new(c),
            relu0: Relu::new(),
            blocks,
            final_conv,
        })
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn output_scale(&self) -> f32 {
        self.output_scale
    }

    pub(crate) fn set_output_scale(&mut self, scale: f32) {
        self.output_scale = scale;
    }

    /// Trainable parameter count (BN running statistics excluded).
    pub fn param_count(&self) -> usize {
        let mut n = self.deconv.weight.len() + self.deconv.bias.len() + 2 * self.bn0.channels;
        for b in &self.blocks {
            n += b.conv.weight.len() + b.conv.bias.len() + 2 * b.bn.channels;
        }
        n + self.final_conv.weight.len() + self.final_conv.bias.len()
    }

    /// True once every BN layer has running statistics.
    pub fn is_trained(&self) -> bool {
        self.bn0.batches_tracked > 0 && self.blocks.iter().all(|b| b.bn.batches_tracked > 0)
    }

    /// Packs equal-length sequences into a (batch, 2, len) tensor of Re and Im.
    pub fn features(seqs: &[&[Complex64]]) -> Result<Tensor3<f32>, DemodNetError> {
        let len = seqs.first().map_or(0, |s| s.len());
        if let Some(bad) = seqs.iter().find(|s| s.len() != len) {
            return Err(NnError::Shape {
                context: "feature batch",
                expected: format!("{len} symbols"),
                got: format!("{} symbols", bad.len()),
            }
            .into());
        }
        let mut t = Tensor3::zeros(seqs.len(), 2, len);
        for (b, seq) in seqs.iter().enumerate() {
            let sample = t.sample_mut(b);
            for (i, r) in seq.iter().enumerate() {
                sample[i] = r.re as f32;
                sample[len + i] = r.im as f32;
            }
        }
        Ok(t)
    }

    fn check_len(&self, len: usize) -> Result<(), DemodNetError> {
        if len < MIN_SYMBOLS {
            return Err(DemodNetError::TooShort { got: len, min: MIN_SYMBOLS });
        }
        Ok(())
    }

    /// Raw network output (batch, 1, k·len).
    pub fn infer_raw(&self, x: &Tensor3<f32>) -> Result<Tensor3<f32>, DemodNetError> {
        self.check_len(x.len())?;
        let mut h = self.relu0.infer(&self.bn0.infer(&self.deconv.infer(x)?)?)?;
        for b in &self.blocks {
            h = b.relu.infer(&b.bn.infer(&b.conv.infer(&h)?)?)?;
        }
        Ok(self.final_conv.infer(&h)?)
    }

    pub(crate) fn forward_train(&mut self, x: &Tensor3<f32>) -> Result<Tensor3<f32>, DemodNetError> {
        self.check_len(x.len())?;
        let t = Mode::Train;
        let h = self.deconv.forward(x, t)?;
        let h = self.bn0.forward(&h, t)?;
        let mut h = self.relu0.forward(&h, t)?;
        for b in &mut self.blocks {
            let z = b.conv.forward(&h, t)?;
            let z = b.bn.forward(&z, t)?;
            h = b.relu.forward(&z, t)?;
        }
        Ok(self.final_conv.forward(&h, t)?)
    }

    pub(crate) fn backward(&mut self, grad: &Tensor3<f32>) -> Result<(), DemodNetError> {
        let mut g = self.final_conv.backward(grad)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.relu.backward(&g)?;
            g = b.bn.backward(&g)?;
            g = b.conv.backward(&g)?;
        }
        g = self.relu0.backward(&g)?;
        g = self.bn0.backward(&g)?;
        self.deconv.backward(&g)?;
        Ok(())
    }

    pub(crate) fn zero_grad(&mut self) {
        self.deconv.zero_grad();
        self.bn0.zero_grad();
        for b in &mut self.blocks {
            b.conv.zero_grad();
            b.bn.zero_grad();
        }
        self.final_conv.zero_grad();
    }

    pub(crate) fn params(&mut self) -> Vec<ParamGrad<'_, f32>> {
        let mut p = self.deconv.params();
        p.extend(self.bn0.params());
        for b in &mut self.blocks {
            p.extend(b.conv.params());
            p.extend(b.bn.params());
        }
        p.extend(self.final_conv.params());
        p
    }

    /// Logits and sigmoid probabilities for one sequence (logit head).
    pub fn predict(&self, rx: &[Complex64]) -> Result<Prediction, DemodNetError> {
        if self.head != Head::Logit {
            return Err(DemodNetError::WrongHead { want: Head::Logit, got: self.head });
        }
        let logits = self.infer_raw(&Self::features(&[rx])?)?.into_vec();
        let probs = logits.iter().map(|&z| crate::nn::sigmoid_scalar(z)).collect();
        Ok(Prediction { logits, probs })
    }

    /// Soft values for a stream cut into independent bursts of `burst`
    /// symbols, positive favouring bit 0: the LPR `-logit` for the logit
    /// head, the predicted LLR for the linear head.
    pub fn soft_output(&self, rx: &[Complex64], burst: usize) -> Result<Vec<f64>, DemodNetError> {
        self.check_len(burst)?;
        if !rx.len().is_multiple_of(burst) {
            return Err(DemodNetError::Config(format!(
                "stream of {} symbols is not a whole number of {burst}-symbol bursts",
                rx.len()
            )));
        }
        let bursts: Vec<&[Complex64]> = rx.chunks_exact(burst).collect();
        let mut out = Vec::with_capacity(rx.len() * self.bits_per_symbol());
        for group in bursts.chunks(INFER_BATCH) {
            let raw = self.infer_raw(&Self::features(group)?)?;
            match self.head {
                Head::Logit => out.extend(lpr_from_logits(raw.data())),
                Head::Linear => {
                    let s = self.output_scale as f64;
                    out.extend(raw.data().iter().map(|&v| v as f64 * s));
                }
            }
        }
        Ok(out)
    }
}

/// Builds a logit-head DemodNet with default kernels and `hidden_channels` = C.
pub fn build_demodnet(modulation: Modulation, hidden_channels: usize, seed: u64) -> Result<DemodNet, DemodNetError> {
    let config = ModelConfig {
        hidden_channels,
        ..ModelConfig::default()
    };
    DemodNet::new(modulation, config, Head::Logit, seed)
}

/// `ξ = -z`.
pub fn lpr_from_logits(logits: &[f32]) -> impl Iterator<Item = f64> + '_ {
    logits.iter().map(|&z| -(z as f64))
}

/// `ξ = ln((1 - p) / p)`.
pub fn lpr_from_probs(probs: &[f64]) -> Vec<f64> {
    probs.iter().map(|&p| ((1.0 - p) / p).ln()).collect()
}
