//! Dense 4-D tensors in NCHW layout.
//!
//! Every activation, parameter, and gradient in the crate is a [`Tensor`]
//! over either `f32` or `f64`. The layout is fixed row-major NCHW so that a
//! single (sample, channel) feature map is one contiguous `H*W` slice, which
//! is what the dihedral transforms and the convolution kernels operate on.

use crate::error::{Error, Result};

/// Element precision of a tensor, as stored in the binary file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn tag(self) -> u8 {
        match self {
            Precision::Single => 1,
            Precision::Double => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Precision::Single),
            2 => Ok(Precision::Double),
            other => Err(Error::InvalidArgument(format!(
                "unknown precision tag {other}"
            ))),
        }
    }
}

/// Scalar element type of a tensor. Implemented for `f32` and `f64` only;
/// every operation preserves the element type (no silent narrowing).
pub trait Scalar:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + Send
    + Sync
    + 'static
{
    const PRECISION: Precision;
    const BYTES: usize;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    fn is_finite(self) -> bool;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Single;
    const BYTES: usize = 4;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
    fn exp(self) -> Self {
        self.exp()
    }
    fn ln(self) -> Self {
        self.ln()
    }
    fn abs(self) -> Self {
        self.abs()
    }
    fn maximum(self, other: Self) -> Self {
        self.max(other)
    }
    fn is_finite(self) -> bool {
        self.is_finite()
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Double;
    const BYTES: usize = 8;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
    fn exp(self) -> Self {
        self.exp()
    }
    fn ln(self) -> Self {
        self.ln()
    }
    fn abs(self) -> Self {
        self.abs()
    }
    fn maximum(self, other: Self) -> Self {
        self.max(other)
    }
    fn is_finite(self) -> bool {
        self.is_finite()
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Dense `(N, C, H, W)` tensor with contiguous row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![T::ZERO; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Single feature map as a `(1, 1, H, W)` tensor; handy in tests.
    pub fn from_map(rows: &[Vec<f64>]) -> Self {
        let h = rows.len();
        let w = if h == 0 { 0 } else { rows[0].len() };
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| T::from_f64(v)))
            .collect();
        Tensor {
            shape: [1, 1, h, w],
            data,
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }
    pub fn channels(&self) -> usize {
        self.shape[1]
    }
    pub fn height(&self) -> usize {
        self.shape[2]
    }
    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
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

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(mut self, shape: [usize; 4]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot reshape {:?} ({} elements) to {:?} ({} elements)",
                self.shape,
                self.data.len(),
                shape,
                expected
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        let [_, cs, hs, ws] = self.shape;
        self.data[((n * cs + c) * hs + h) * ws + w]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut T {
        let [_, cs, hs, ws] = self.shape;
        &mut self.data[((n * cs + c) * hs + h) * ws + w]
    }

    /// Contiguous `H*W` feature map at position `(n, c)`.
    #[inline]
    pub fn map_slice(&self, n: usize, c: usize) -> &[T] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    #[inline]
    pub fn map_slice_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &mut self.data[start..start + hw]
    }

    /// Contiguous slice for sample `n` (all channels).
    #[inline]
    pub fn sample_slice(&self, n: usize) -> &[T] {
        let stride = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[n * stride..(n + 1) * stride]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor<T>, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: T) -> Tensor<T> {
        self.map(|v| v * factor)
    }

    pub fn relu(&self) -> Tensor<T> {
        self.map(|v| v.maximum(T::ZERO))
    }

    /// Derivative of relu evaluated at the pre-activation values: 1 where
    /// the input was positive, 0 elsewhere (0 at exactly zero).
    pub fn relu_grad(&self) -> Tensor<T> {
        self.map(|v| if v > T::ZERO { T::ONE } else { T::ZERO })
    }

    /// Adds a per-channel vector of length `C`, broadcast over `(N, H, W)`.
    pub fn add_channel(&self, per_channel: &[T]) -> Result<Tensor<T>> {
        if per_channel.len() != self.channels() {
            return Err(Error::ShapeMismatch {
                op: "add_channel",
                lhs: self.shape,
                rhs: [1, per_channel.len(), 1, 1],
            });
        }
        let mut out = self.clone();
        let hw = self.shape[2] * self.shape[3];
        for n in 0..self.shape[0] {
            for c in 0..self.shape[1] {
                let bias = per_channel[c];
                for v in out.map_slice_mut(n, c).iter_mut().take(hw) {
                    *v = *v + bias;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "add_assign",
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    /// Reduces the given axes (subset of `{0,1,2,3}`) to size 1.
    pub fn reduce(&self, op: ReduceOp, axes: &[usize]) -> Result<Tensor<T>> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("reduce over empty tensor".into()));
        }
        if axes.iter().any(|&a| a > 3) {
            return Err(Error::InvalidArgument(format!(
                "invalid reduce axes {axes:?} for rank 4"
            )));
        }
        let mut reduce_axis = [false; 4];
        for &a in axes {
            reduce_axis[a] = true;
        }
        let mut out_shape = self.shape;
        for (d, flag) in reduce_axis.iter().enumerate() {
            if *flag {
                out_shape[d] = 1;
            }
        }
        let init = match op {
            ReduceOp::Max => None,
            _ => Some(T::ZERO),
        };
        let mut acc: Vec<Option<T>> =
            vec![init.map(|_| T::ZERO); out_shape.iter().product::<usize>()];
        if matches!(op, ReduceOp::Max) {
            acc = vec![None; out_shape.iter().product::<usize>()];
        }
        let [_, c, h, w] = self.shape;
        let [_, oc, oh, ow] = out_shape;
        for n in 0..self.shape[0] {
            let on = if reduce_axis[0] { 0 } else { n };
            for ci in 0..c {
                let oci = if reduce_axis[1] { 0 } else { ci };
                for hi in 0..h {
                    let ohi = if reduce_axis[2] { 0 } else { hi };
                    for wi in 0..w {
                        let owi = if reduce_axis[3] { 0 } else { wi };
                        let v = self.data[((n * c + ci) * h + hi) * w + wi];
                        let slot = &mut acc[((on * oc + oci) * oh + ohi) * ow + owi];
                        *slot = Some(match (*slot, op) {
                            (None, _) => v,
                            (Some(a), ReduceOp::Max) => a.maximum(v),
                            (Some(a), _) => a + v,
                        });
                    }
                }
            }
        }
        let count: usize = (0..4)
            .filter(|&d| reduce_axis[d])
            .map(|d| self.shape[d])
            .product();
        let scale = T::from_f64(1.0 / count as f64);
        let data = acc
            .into_iter()
            .map(|v| {
                let v = v.expect("every output slot receives at least one element");
                match op {
                    ReduceOp::Mean => v * scale,
                    _ => v,
                }
            })
            .collect();
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    pub fn sum_all(&self) -> T {
        let mut acc = T::ZERO;
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    /// Converts element precision; widening is exact, narrowing rounds.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}
