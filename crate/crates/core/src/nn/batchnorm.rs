use super::{shape_err, Layer, Mode, NnError, OpCounts, ParamGrad, Real, Tensor3};

/// Per-channel batch normalization over batch × length.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T> {
    pub channels: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Train-mode batches seen; zero means the running statistics are unset.
    pub batches_tracked: u64,
    pub momentum: f64,
    pub eps: f64,
    grad_gamma: Vec<T>,
    grad_beta: Vec<T>,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    x_hat: Tensor3<T>,
    inv_std: Vec<f64>,
}

impl<T: Real> BatchNorm1d<T> {
    pub const MOMENTUM: f64 = 0.1;
    pub const EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            batches_tracked: 0,
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
            grad_gamma: vec![T::zero(); channels],
            grad_beta: vec![T::zero(); channels],
            cache: None,
        }
    }

    pub fn grad_gamma(&self) -> &[T] {
        &self.grad_gamma
    }

    pub fn grad_beta(&self) -> &[T] {
        &self.grad_beta
    }

    fn channel_stats(x: &Tensor3<T>, c: usize) -> (f64, f64) {
        let [batch, _, len] = x.shape();
        let n = (batch * len) as f64;
        let mut sum = 0.0;
        for b in 0..batch {
            sum += x.channel(b, c).iter().map(|v| v.widen()).sum::<f64>();
        }
        let mean = sum / n;
        let mut sq = 0.0;
        for b in 0..batch {
            sq += x
                .channel(b, c)
                .iter()
                .map(|v| {
                    let d = v.widen() - mean;
                    d * d
                })
                .sum::<f64>();
        }
        (mean, sq / n)
    }
}

impl<T: Real> Layer<T> for BatchNorm1d<T> {
    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        x.expect_shape("batchnorm input", self.channels)?;
        if self.batches_tracked == 0 {
            return Err(NnError::UninitializedStats);
        }
        let [batch, _, len] = x.shape();
        let mut y = Tensor3::zeros(batch, self.channels, len);
        for c in 0..self.channels {
            let istd = 1.0 / (self.running_var[c].widen() + self.eps).sqrt();
            let scale = self.gamma[c].widen() * istd;
            let shift = self.beta[c].widen() - self.running_mean[c].widen() * scale;
            let (scale, shift) = (T::cast(scale), T::cast(shift));
            for b in 0..batch {
                let src = x.channel(b, c);
                let start = (b * self.channels + c) * len;
                for (dst, &v) in y.data_mut()[start..start + len].iter_mut().zip(src) {
                    *dst = v * scale + shift;
                }
            }
        }
        Ok(y)
    }

    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError> {
        if mode == Mode::Infer {
            self.cache = None;
            return self.infer(x);
        }
        x.expect_shape("batchnorm input", self.channels)?;
        let [batch, _, len] = x.shape();
        if batch * len < 2 {
            return Err(shape_err("batchnorm train batch", "batch*len >= 2", batch * len));
        }
        let n = (batch * len) as f64;
        let mut y = Tensor3::zeros(batch, self.channels, len);
        let mut x_hat = Tensor3::zeros(batch, self.channels, len);
        let mut inv_std = vec![0.0; self.channels];
        for (c, slot) in inv_std.iter_mut().enumerate() {
            let (mean, var) = Self::channel_stats(x, c);
            let istd = 1.0 / (var + self.eps).sqrt();
            *slot = istd;
            let (g, bt) = (self.gamma[c].widen(), self.beta[c].widen());
            for b in 0..batch {
                let start = (b * self.channels + c) * len;
                let src = x.channel(b, c);
                for (t, v) in src.iter().enumerate() {
                    let h = (v.widen() - mean) * istd;
                    x_hat.data_mut()[start + t] = T::cast(h);
                    y.data_mut()[start + t] = T::cast(g * h + bt);
                }
            }
            let m = self.momentum;
            let unbiased = var * n / (n - 1.0);
            self.running_mean[c] = T::cast((1.0 - m) * self.running_mean[c].widen() + m * mean);
            self.running_var[c] = T::cast((1.0 - m) * self.running_var[c].widen() + m * unbiased);
        }
        self.batches_tracked += 1;
        self.cache = Some(BnCache { x_hat, inv_std });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoCache)?;
        let shape = cache.x_hat.shape();
        if grad_out.shape() != shape {
            return Err(shape_err("batchnorm grad", shape, grad_out.shape()));
        }
        let [batch, _, len] = shape;
        let n = (batch * len) as f64;
        let mut gx = Tensor3::zeros(batch, self.channels, len);
        for c in 0..self.channels {
            let mut sum_g = 0.0;
            let mut sum_gh = 0.0;
            for b in 0..batch {
                for (g, h) in grad_out.channel(b, c).iter().zip(cache.x_hat.channel(b, c)) {
                    sum_g += g.widen();
                    sum_gh += g.widen() * h.widen();
                }
            }
            self.grad_gamma[c] += T::cast(sum_gh);
            self.grad_beta[c] += T::cast(sum_g);
            let k = self.gamma[c].widen() * cache.inv_std[c] / n;
            for b in 0..batch {
                for t in 0..len {
                    let g = grad_out.at(b, c, t).widen();
                    let h = cache.x_hat.at(b, c, t).widen();
                    *gx.at_mut(b, c, t) = T::cast(k * (n * g - sum_g - h * sum_gh));
                }
            }
        }
        Ok(gx)
    }

    fn params(&mut self) -> Vec<ParamGrad<'_, T>> {
        vec![
            ParamGrad { param: &mut self.gamma, grad: &self.grad_gamma },
            ParamGrad { param: &mut self.beta, grad: &self.grad_beta },
        ]
    }

    fn zero_grad(&mut self) {
        self.grad_gamma.fill(T::zero());
        self.grad_beta.fill(T::zero());
    }

    fn op_counts(&self, _channels: usize, len: usize) -> OpCounts {
        // inference folds normalization and affine into one scale and shift
        let n = (self.channels * len) as u64;
        OpCounts {
            mults: n,
            adds: n,
            ..OpCounts::default()
        }
    }
}
