use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, DemodNet, DemodNetError, Head, ModelConfig};
use crate::channel::rng_from_seed;
use crate::llr::exact_llr;
use crate::modem::build_constellation;
use crate::nn::{bce_with_logits, mse_loss, AdamConfig, AdamState, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr0: f64,
    /// Epochs between learning-rate halvings.
    pub lr_halving_period: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 15,
            lr0: 0.003,
            lr_halving_period: 3,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), DemodNetError> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.lr_halving_period == 0 || !(self.lr0 > 0.0) {
            return Err(DemodNetError::Config("schedule values must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate for the zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.lr_halving_period) as i32)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean loss per bit for each epoch.
    pub epoch_loss: Vec<f64>,
    pub epoch_lr: Vec<f64>,
}

fn run_epochs(
    model: &mut DemodNet,
    data: &Dataset,
    schedule: &TrainSchedule,
    mut loss_fn: impl FnMut(&Tensor3<f32>, &[usize]) -> Result<(f64, Tensor3<f32>), DemodNetError>,
) -> Result<TrainReport, DemodNetError> {
    schedule.validate()?;
    if data.spec.modulation != model.modulation() {
        return Err(DemodNetError::ModulationMismatch {
            model: model.modulation(),
            data: data.spec.modulation,
        });
    }
    if data.is_empty() {
        return Err(DemodNetError::Config("empty dataset".into()));
    }
    let mut rng = rng_from_seed(schedule.seed);
    let mut adam = AdamState::new(AdamConfig {
        lr: schedule.lr0,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    let bits = data.bits_per_sample() as f64;
    let mut report = TrainReport::default();
    for epoch in 0..schedule.max_epochs {
        let snapshot = model.clone();
        let lr = schedule.lr_at(epoch);
        adam.set_lr(lr);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(schedule.batch_size).enumerate() {
            let x = data.features(idx)?;
            model.zero_grad();
            let out = model.forward_train(&x)?;
            let (loss, grad) = loss_fn(&out, idx)?;
            if !loss.is_finite() {
                *model = snapshot;
                return Err(DemodNetError::Diverged { epoch, batch });
            }
            model.backward(&grad)?;
            adam.step(&mut model.params())?;
            total += loss * idx.len() as f64;
        }
        report.epoch_loss.push(total / (data.len() as f64 * bits));
        report.epoch_lr.push(lr);
    }
    Ok(report)
}

/// Trains a logit-head model on hard bits with BCE and Adam.
///
/// On divergence the model is left at its parameters from the start of the
/// failing epoch.
pub fn train(model: &mut DemodNet, data: &Dataset, schedule: &TrainSchedule) -> Result<TrainReport, DemodNetError> {
    if model.head() != Head::Logit {
        return Err(DemodNetError::WrongHead { want: Head::Logit, got: model.head() });
    }
    run_epochs(model, data, schedule, |out, idx| {
        Ok(bce_with_logits(out, &data.labels_of(idx))?)
    })
}

/// Mean BCE per bit of a logit-head model over the whole dataset, in
/// inference mode.
pub fn evaluate_loss(model: &DemodNet, data: &Dataset) -> Result<f64, DemodNetError> {
    if model.head() != Head::Logit {
        return Err(DemodNetError::WrongHead { want: Head::Logit, got: model.head() });
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(super::INFER_BATCH) {
        let out = model.infer_raw(&data.features(chunk)?)?;
        let (loss, _) = bce_with_logits(&out, &data.labels_of(chunk))?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / (data.len() as f64 * data.bits_per_sample() as f64))
}

/// Exact LLRs of every dataset bit under the AWGN assumption, using the
/// noise variance each sample was generated at.
pub fn exact_llr_targets(data: &Dataset) -> Result<Vec<f64>, DemodNetError> {
    let c = build_constellation(data.spec.modulation);
    let mut out = Vec::with_capacity(data.labels.len());
    for i in 0..data.len() {
        for &r in data.sample_rx(i) {
            out.extend(exact_llr(r, &c, data.sigma2[i])?);
        }
    }
    Ok(out)
}

/// Trains the LLR-regression baseline: same skeleton with a linear head,
/// mean squared error against exact LLR targets. The raw output is scaled
/// by the RMS target so the regression runs at unit scale.
pub fn train_llrnet_baseline(
    config: ModelConfig,
    data: &Dataset,
    schedule: &TrainSchedule,
    init_seed: u64,
) -> Result<(DemodNet, TrainReport), DemodNetError> {
    let mut model = DemodNet::new(data.spec.modulation, config, Head::Linear, init_seed)?;
    let targets = exact_llr_targets(data)?;
    let rms = (targets.iter().map(|t| t * t).sum::<f64>() / targets.len().max(1) as f64).sqrt();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    model.set_output_scale(scale as f32);
    let m = data.bits_per_sample();
    let report = run_epochs(&mut model, data, schedule, |out, idx| {
        let t: Vec<f64> = idx
            .iter()
            .flat_map(|&i| targets[i * m..(i + 1) * m].iter().map(|v| v / scale))
            .collect();
        let (loss, grad) = mse_loss(out, &t)?;
        // report per-bit MSE in raw LLR units, weighted like the BCE path
        Ok((loss * m as f64 * scale * scale, grad))
    })?;
    Ok((model, report))
}
