use super::{gemm, shape_err, Layer, MatRef, Mode, NnError, OpCounts, ParamGrad, Real, Tensor3};

/// Stride-1 convolution (cross-correlation) with zero "same" padding.
///
/// Weights are laid out `(out_ch, in_ch, kernel)`. For even kernels the
/// extra padding column goes on the right.
#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    grad_w: Vec<T>,
    grad_b: Vec<T>,
    input: Option<Tensor3<T>>,
}

impl<T: Real> Conv1d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        assert!(kernel >= 1, "kernel must be at least 1");
        Self::from_params(in_ch, out_ch, kernel, vec![T::zero(); out_ch * in_ch * kernel], vec![T::zero(); out_ch])
            .expect("consistent shapes")
    }

    pub fn from_params(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        weight: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self, NnError> {
        if weight.len() != out_ch * in_ch * kernel {
            return Err(shape_err("conv weight", [out_ch, in_ch, kernel], weight.len()));
        }
        if bias.len() != out_ch {
            return Err(shape_err("conv bias", out_ch, bias.len()));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            grad_w: vec![T::zero(); weight.len()],
            grad_b: vec![T::zero(); out_ch],
            weight,
            bias,
            input: None,
        })
    }

    pub fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn grad_weight(&self) -> &[T] {
        &self.grad_w
    }

    pub fn grad_bias(&self) -> &[T] {
        &self.grad_b
    }

    /// Unfolds one sample (in_ch × len) into (in_ch·kernel × len).
    fn im2col(&self, x: &[T], len: usize, cols: &mut [T]) {
        let pad = self.pad_left() as isize;
        for ci in 0..self.in_ch {
            let src = &x[ci * len..(ci + 1) * len];
            for kk in 0..self.kernel {
                let row = &mut cols[(ci * self.kernel + kk) * len..(ci * self.kernel + kk + 1) * len];
                let shift = kk as isize - pad;
                let lo = ((-shift).max(0) as usize).min(len);
                let hi = ((len as isize - shift).min(len as isize)).max(0) as usize;
                row[..lo].fill(T::zero());
                if lo < hi {
                    let s0 = (lo as isize + shift) as usize;
                    row[lo..hi].copy_from_slice(&src[s0..s0 + (hi - lo)]);
                }
                row[hi.max(lo)..].fill(T::zero());
            }
        }
    }

    fn col2im_add(&self, cols: &[T], len: usize, gx: &mut [T]) {
        let pad = self.pad_left() as isize;
        for ci in 0..self.in_ch {
            let dst = &mut gx[ci * len..(ci + 1) * len];
            for kk in 0..self.kernel {
                let row = &cols[(ci * self.kernel + kk) * len..(ci * self.kernel + kk + 1) * len];
                let shift = kk as isize - pad;
                let lo = ((-shift).max(0) as usize).min(len);
                let hi = ((len as isize - shift).min(len as isize)).max(0) as usize;
                for t in lo..hi {
                    dst[(t as isize + shift) as usize] += row[t];
                }
            }
        }
    }
}

impl<T: Real> Layer<T> for Conv1d<T> {
    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError> {
        let y = self.infer(x)?;
        self.input = (mode == Mode::Train).then(|| x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        x.expect_shape("conv1d input", self.in_ch)?;
        let [batch, _, len] = x.shape();
        let ik = self.in_ch * self.kernel;
        let mut y = Tensor3::zeros(batch, self.out_ch, len);
        let mut cols = vec![T::zero(); ik * len];
        for b in 0..batch {
            self.im2col(x.sample(b), len, &mut cols);
            let out = y.sample_mut(b);
            for (co, row) in out.chunks_exact_mut(len).enumerate() {
                row.fill(self.bias[co]);
            }
            gemm(
                self.out_ch,
                ik,
                len,
                MatRef { data: &self.weight, rs: ik, cs: 1 },
                MatRef { data: &cols, rs: len, cs: 1 },
                T::one(),
                out,
                len,
                1,
            );
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let x = self.input.take().ok_or(NnError::NoCache)?;
        let [batch, _, len] = x.shape();
        if grad_out.shape() != [batch, self.out_ch, len] {
            return Err(shape_err("conv1d grad", [batch, self.out_ch, len], grad_out.shape()));
        }
        let ik = self.in_ch * self.kernel;
        let mut gx = Tensor3::zeros(batch, self.in_ch, len);
        let mut cols = vec![T::zero(); ik * len];
        let mut gcols = vec![T::zero(); ik * len];
        for b in 0..batch {
            let gy = grad_out.sample(b);
            for (co, row) in gy.chunks_exact(len).enumerate() {
                let s: f64 = row.iter().map(|v| v.widen()).sum();
                self.grad_b[co] += T::cast(s);
            }
            self.im2col(x.sample(b), len, &mut cols);
            // dW += gy · colsᵀ
            gemm(
                self.out_ch,
                len,
                ik,
                MatRef { data: gy, rs: len, cs: 1 },
                MatRef { data: &cols, rs: 1, cs: len },
                T::one(),
                &mut self.grad_w,
                ik,
                1,
            );
            // dcols = Wᵀ · gy
            gemm(
                ik,
                self.out_ch,
                len,
                MatRef { data: &self.weight, rs: 1, cs: ik },
                MatRef { data: gy, rs: len, cs: 1 },
                T::zero(),
                &mut gcols,
                len,
                1,
            );
            self.col2im_add(&gcols, len, gx.sample_mut(b));
        }
        self.input = Some(x);
        Ok(gx)
    }

    fn params(&mut self) -> Vec<ParamGrad<'_, T>> {
        vec![
            ParamGrad { param: &mut self.weight, grad: &self.grad_w },
            ParamGrad { param: &mut self.bias, grad: &self.grad_b },
        ]
    }

    fn zero_grad(&mut self) {
        self.grad_w.fill(T::zero());
        self.grad_b.fill(T::zero());
    }

    fn op_counts(&self, _channels: usize, len: usize) -> OpCounts {
        let macs = (self.in_ch * self.kernel * self.out_ch * len) as u64;
        OpCounts {
            mults: macs,
            // (in·k - 1) adds per dot product plus the bias add
            adds: macs,
            ..OpCounts::default()
        }
    }
}

/// Transposed convolution: `y[co, n·stride + kk - padding] += Σ_ci W[co, ci, kk] x[ci, n]`.
///
/// Output length is `(len - 1)·stride + kernel - 2·padding`; with
/// `kernel == stride` and no padding it is exactly `stride·len`.
/// Weights are laid out `(out_ch, in_ch, kernel)`.
#[derive(Debug, Clone)]
pub struct Deconv1d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    grad_w: Vec<T>,
    grad_b: Vec<T>,
    input: Option<Tensor3<T>>,
}

impl<T: Real> Deconv1d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self::from_params(
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            vec![T::zero(); out_ch * in_ch * kernel],
            vec![T::zero(); out_ch],
        )
        .expect("consistent shapes")
    }

    /// Non-overlapping upsampler: kernel = stride = `factor`.
    pub fn upsampler(in_ch: usize, out_ch: usize, factor: usize) -> Self {
        Self::new(in_ch, out_ch, factor, factor, 0)
    }

    pub fn from_params(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        weight: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self, NnError> {
        if kernel == 0 || stride == 0 {
            return Err(shape_err("deconv kernel/stride", ">= 1", (kernel, stride)));
        }
        if 2 * padding >= kernel {
            return Err(shape_err("deconv padding", format!("< kernel/2 = {}", kernel / 2), padding));
        }
        if weight.len() != out_ch * in_ch * kernel {
            return Err(shape_err("deconv weight", [out_ch, in_ch, kernel], weight.len()));
        }
        if bias.len() != out_ch {
            return Err(shape_err("deconv bias", out_ch, bias.len()));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            grad_w: vec![T::zero(); weight.len()],
            grad_b: vec![T::zero(); out_ch],
            weight,
            bias,
            input: None,
        })
    }

    pub fn grad_weight(&self) -> &[T] {
        &self.grad_w
    }

    pub fn grad_bias(&self) -> &[T] {
        &self.grad_b
    }

    fn weight_tap(&self, kk: usize) -> MatRef<'_, T> {
        // (out × in) slice of tap kk
        MatRef {
            data: &self.weight[kk..],
            rs: self.in_ch * self.kernel,
            cs: self.kernel,
        }
    }

    /// Valid input positions `n` for tap `kk` and output length `out_len`.
    fn tap_range(&self, kk: usize, in_len: usize, out_len: usize) -> (usize, usize) {
        // t = n·s + kk - p must lie in [0, out_len)
        let s = self.stride as isize;
        let off = kk as isize - self.padding as isize;
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let hi_excl = ((out_len as isize - off) + s - 1) / s;
        (lo as usize, (hi_excl.max(0) as usize).min(in_len))
    }
}

impl<T: Real> Layer<T> for Deconv1d<T> {
    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError> {
        let y = self.infer(x)?;
        self.input = (mode == Mode::Train).then(|| x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        x.expect_shape("deconv1d input", self.in_ch)?;
        let [batch, _, len] = x.shape();
        let out_len = self.output_len(len);
        let mut y = Tensor3::zeros(batch, self.out_ch, out_len);
        let mut z = vec![T::zero(); self.out_ch * len];
        for b in 0..batch {
            let xb = x.sample(b);
            let yb = y.sample_mut(b);
            for (co, row) in yb.chunks_exact_mut(out_len).enumerate() {
                row.fill(self.bias[co]);
            }
            for kk in 0..self.kernel {
                gemm(
                    self.out_ch,
                    self.in_ch,
                    len,
                    self.weight_tap(kk),
                    MatRef { data: xb, rs: len, cs: 1 },
                    T::zero(),
                    &mut z,
                    len,
                    1,
                );
                let (lo, hi) = self.tap_range(kk, len, out_len);
                for co in 0..self.out_ch {
                    let zr = &z[co * len..(co + 1) * len];
                    let yr = &mut yb[co * out_len..(co + 1) * out_len];
                    for n in lo..hi {
                        yr[n * self.stride + kk - self.padding] += zr[n];
                    }
                }
            }
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let x = self.input.take().ok_or(NnError::NoCache)?;
        let [batch, _, len] = x.shape();
        let out_len = self.output_len(len);
        if grad_out.shape() != [batch, self.out_ch, out_len] {
            return Err(shape_err("deconv1d grad", [batch, self.out_ch, out_len], grad_out.shape()));
        }
        let mut gx = Tensor3::zeros(batch, self.in_ch, len);
        let mut g = vec![T::zero(); self.out_ch * len];
        let ik = self.in_ch * self.kernel;
        for b in 0..batch {
            let gy = grad_out.sample(b);
            for (co, row) in gy.chunks_exact(out_len).enumerate() {
                let s: f64 = row.iter().map(|v| v.widen()).sum();
                self.grad_b[co] += T::cast(s);
            }
            let xb = x.sample(b);
            for kk in 0..self.kernel {
                let (lo, hi) = self.tap_range(kk, len, out_len);
                g.fill(T::zero());
                for co in 0..self.out_ch {
                    let gr = &mut g[co * len..(co + 1) * len];
                    let src = &gy[co * out_len..(co + 1) * out_len];
                    for n in lo..hi {
                        gr[n] = src[n * self.stride + kk - self.padding];
                    }
                }
                // dx += W_kkᵀ · G
                gemm(
                    self.in_ch,
                    self.out_ch,
                    len,
                    MatRef { data: &self.weight[kk..], rs: self.kernel, cs: ik },
                    MatRef { data: &g, rs: len, cs: 1 },
                    T::one(),
                    gx.sample_mut(b),
                    len,
                    1,
                );
                // dW_kk += G · xᵀ
                gemm(
                    self.out_ch,
                    len,
                    self.in_ch,
                    MatRef { data: &g, rs: len, cs: 1 },
                    MatRef { data: xb, rs: 1, cs: len },
                    T::one(),
                    &mut self.grad_w[kk..],
                    ik,
                    self.kernel,
                );
            }
        }
        self.input = Some(x);
        Ok(gx)
    }

    fn params(&mut self) -> Vec<ParamGrad<'_, T>> {
        vec![
            ParamGrad { param: &mut self.weight, grad: &self.grad_w },
            ParamGrad { param: &mut self.bias, grad: &self.grad_b },
        ]
    }

    fn zero_grad(&mut self) {
        self.grad_w.fill(T::zero());
        self.grad_b.fill(T::zero());
    }

    fn output_len(&self, len: usize) -> usize {
        (len.saturating_sub(1) * self.stride + self.kernel).saturating_sub(2 * self.padding)
    }

    fn op_counts(&self, _channels: usize, len: usize) -> OpCounts {
        // every input sample meets every tap once
        let macs = (self.in_ch * self.out_ch * self.kernel * len) as u64;
        OpCounts {
            mults: macs,
            adds: macs,
            ..OpCounts::default()
        }
    }
}
