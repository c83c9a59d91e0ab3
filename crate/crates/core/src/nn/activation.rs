use super::{shape_err, Layer, Mode, NnError, OpCounts, Real, Tensor3};

pub fn relu<T: Real>(x: &Tensor3<T>) -> Tensor3<T> {
    // NaN passes through so divergence stays visible downstream
    x.map(|v| if v > T::zero() || v.is_nan() { v } else { T::zero() })
}

/// `1 / (1 + exp(-z))`, evaluated without overflow for large |z|.
pub fn sigmoid_scalar<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor3<T>) -> Tensor3<T> {
    x.map(sigmoid_scalar)
}

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    output: Option<Tensor3<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Self { output: None }
    }
}

impl<T: Real> Layer<T> for Relu<T> {
    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        Ok(relu(x))
    }

    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError> {
        let y = relu(x);
        self.output = (mode == Mode::Train).then(|| y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let y = self.output.as_ref().ok_or(NnError::NoCache)?;
        if y.shape() != grad_out.shape() {
            return Err(shape_err("relu grad", y.shape(), grad_out.shape()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(y.data())
            .map(|(&g, &o)| if o > T::zero() { g } else { T::zero() })
            .collect();
        Tensor3::from_vec(y.shape(), data)
    }

    fn op_counts(&self, channels: usize, len: usize) -> OpCounts {
        OpCounts {
            comparisons: (channels * len) as u64,
            ..OpCounts::default()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T> {
    output: Option<Tensor3<T>>,
}

impl<T: Real> Sigmoid<T> {
    pub fn new() -> Self {
        Self { output: None }
    }
}

impl<T: Real> Layer<T> for Sigmoid<T> {
    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        Ok(sigmoid(x))
    }

    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError> {
        let y = sigmoid(x);
        self.output = (mode == Mode::Train).then(|| y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError> {
        let y = self.output.as_ref().ok_or(NnError::NoCache)?;
        if y.shape() != grad_out.shape() {
            return Err(shape_err("sigmoid grad", y.shape(), grad_out.shape()));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(y.data())
            .map(|(&g, &s)| g * s * (T::one() - s))
            .collect();
        Tensor3::from_vec(y.shape(), data)
    }

    fn op_counts(&self, channels: usize, len: usize) -> OpCounts {
        // exp, one add and one division per element
        let n = (channels * len) as u64;
        OpCounts {
            mults: n,
            adds: n,
            exp_log: n,
            ..OpCounts::default()
        }
    }
}
