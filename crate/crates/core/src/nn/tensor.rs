use super::{shape_err, NnError, Real};

/// Dense batch × channels × length array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    data: Vec<T>,
    shape: [usize; 3],
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            data: vec![T::zero(); batch * channels * len],
            shape: [batch, channels, len],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<T>) -> Result<Self, NnError> {
        let want = shape.iter().product::<usize>();
        if data.len() != want {
            return Err(shape_err("tensor data", want, data.len()));
        }
        Ok(Self { data, shape })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let [b, c, l] = shape;
        let mut data = Vec::with_capacity(b * c * l);
        for bi in 0..b {
            for ci in 0..c {
                for li in 0..l {
                    data.push(f(bi, ci, li));
                }
            }
        }
        Self { data, shape }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, b: usize, c: usize, l: usize) -> T {
        self.data[(b * self.shape[1] + c) * self.shape[2] + l]
    }

    pub fn at_mut(&mut self, b: usize, c: usize, l: usize) -> &mut T {
        let idx = (b * self.shape[1] + c) * self.shape[2] + l;
        &mut self.data[idx]
    }

    /// All channels of one batch element.
    pub fn sample(&self, b: usize) -> &[T] {
        let stride = self.shape[1] * self.shape[2];
        &self.data[b * stride..(b + 1) * stride]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [T] {
        let stride = self.shape[1] * self.shape[2];
        &mut self.data[b * stride..(b + 1) * stride]
    }

    pub fn channel(&self, b: usize, c: usize) -> &[T] {
        let l = self.shape[2];
        let start = (b * self.shape[1] + c) * l;
        &self.data[start..start + l]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            shape: self.shape,
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.widen() * b.widen())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            data: self.data.iter().map(|v| U::cast(v.widen())).collect(),
            shape: self.shape,
        }
    }

    pub(crate) fn expect_shape(&self, context: &'static str, channels: usize) -> Result<(), NnError> {
        if self.shape[1] != channels {
            return Err(shape_err(context, format!("{channels} channels"), self.shape));
        }
        Ok(())
    }
}
