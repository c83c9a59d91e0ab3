//! A small 1-D convolutional network substrate with hand-written backward
//! passes: convolution, transposed convolution, batch normalization, ReLU,
//! sigmoid, binary cross-entropy and Adam.
//!
//! Layers are generic over [`Real`] so the same code trains in `f32` and is
//! gradient-checked in `f64`. Reductions (batch statistics, losses, bias
//! gradients) accumulate in `f64`.

mod activation;
mod adam;
mod batchnorm;
mod complexity;
mod conv;
mod loss;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;
use thiserror::Error;

pub use activation::{relu, sigmoid, sigmoid_scalar, Relu, Sigmoid};
pub use adam::{AdamConfig, AdamState};
pub use batchnorm::BatchNorm1d;
pub use complexity::OpCounts;
pub use conv::{Conv1d, Deconv1d};
pub use loss::{bce_loss, bce_with_logits, mse_loss, PROB_CLAMP};
pub use tensor::Tensor3;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("batch norm in inference mode before any training step (running statistics uninitialized)")]
    UninitializedStats,
    #[error("label {value} at index {index} is not 0 or 1")]
    Label { index: usize, value: u8 },
    #[error("backward called without a cached forward pass in train mode")]
    NoCache,
    #[error("learning rate must be positive, got {0}")]
    LearningRate(f64),
}

pub(crate) fn shape_err(context: &'static str, expected: impl Debug, got: impl Debug) -> NnError {
    NnError::Shape {
        context,
        expected: format!("{expected:?}"),
        got: format!("{got:?}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor and its accumulated gradient.
pub struct ParamGrad<'a, T> {
    pub param: &'a mut [T],
    pub grad: &'a [T],
}

/// Floating-point element type of the substrate.
pub trait Real:
    Float + Default + Debug + Send + Sync + 'static + AddAssign + SubAssign + MulAssign + Sum
{
    fn cast(v: f64) -> Self;
    fn widen(self) -> f64;

    /// `c = alpha * a·b + beta * c` on strided row-major views.
    ///
    /// # Safety
    /// Every index reachable through the given dimensions and strides must
    /// lie inside the corresponding slice.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn cast(v: f64) -> Self {
        v as f32
    }
    fn widen(self) -> f64 {
        self as f64
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn cast(v: f64) -> Self {
        v
    }
    fn widen(self) -> f64 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Strided read-only matrix view.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub rs: usize,
    pub cs: usize,
}

fn reach(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

/// Bounds-checked `c = a·b + beta·c` where `a` is m×k, `b` is k×n and `c`
/// is an m×n view with strides `(rsc, csc)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: MatRef<'_, T>,
    b: MatRef<'_, T>,
    beta: T,
    c: &mut [T],
    rsc: usize,
    csc: usize,
) {
    assert!(reach(m, k, a.rs, a.cs) <= a.data.len(), "gemm: lhs out of bounds");
    assert!(reach(k, n, b.rs, b.cs) <= b.data.len(), "gemm: rhs out of bounds");
    assert!(reach(m, n, rsc, csc) <= c.len(), "gemm: output out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the three asserts above bound every index the kernel touches.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        )
    }
}

/// Shared surface of every layer.
pub trait Layer<T: Real> {
    /// Inference pass; leaves caches and running statistics untouched.
    fn infer(&self, x: &Tensor3<T>) -> Result<Tensor3<T>, NnError>;
    /// Train mode caches what backward needs; infer mode matches [`Layer::infer`].
    fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>, NnError>;
    /// Propagates `grad_out`, accumulating parameter gradients.
    fn backward(&mut self, grad_out: &Tensor3<T>) -> Result<Tensor3<T>, NnError>;
    fn params(&mut self) -> Vec<ParamGrad<'_, T>> {
        Vec::new()
    }
    fn zero_grad(&mut self) {}
    /// Output length for an input of length `len`.
    fn output_len(&self, len: usize) -> usize {
        len
    }
    /// Exact inference operation counts for an input of `channels` × `len`.
    fn op_counts(&self, channels: usize, len: usize) -> OpCounts;
}

#[cfg(test)]
mod tests;
