use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Dense `(n, c, h, w)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
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

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Values of batch element `i`.
    pub fn sample(&self, i: usize) -> &[T] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let s = self.sample_len();
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn reshape(self, shape: [usize; 4]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: T) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    pub fn dot(&self, other: &Tensor<T>) -> Result<T> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn same_shape(&self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fails with a numerics error naming `op` when any entry is NaN or
    /// infinite.
    pub fn check_finite(&self, op: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::Numerics(format!("{op} produced non-finite values")))
        }
    }

    /// Stacks single-sample tensors along the batch axis.
    pub fn stack(items: &[&Tensor<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero tensors".into()))?;
        let [_, c, h, w] = first.shape;
        let mut n = 0;
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        for t in items {
            if t.shape[1..] != [c, h, w] {
                return Err(Error::Shape(format!(
                    "stacking {:?} onto {:?}",
                    t.shape, first.shape
                )));
            }
            n += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        Ok(Self {
            shape: [n, c, h, w],
            data,
        })
    }
}

/// Channel concatenation `[enc; dec]` of two tensors with equal `n, h, w`.
pub fn concat_channels<T: Scalar>(enc: &Tensor<T>, dec: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c1, h, w] = enc.shape();
    let [n2, c2, h2, w2] = dec.shape();
    if (n, h, w) != (n2, h2, w2) {
        return Err(Error::Shape(format!(
            "concat {:?} with {:?}",
            enc.shape(),
            dec.shape()
        )));
    }
    let mut out = Vec::with_capacity(enc.len() + dec.len());
    for i in 0..n {
        out.extend_from_slice(enc.sample(i));
        out.extend_from_slice(dec.sample(i));
    }
    Tensor::from_vec([n, c1 + c2, h, w], out)
}

/// Splits a concatenated gradient back into the `enc` (first `c1` channels)
/// and `dec` parts.
pub fn split_channels<T: Scalar>(grad: &Tensor<T>, c1: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = grad.shape();
    if c1 > c {
        return Err(Error::Shape(format!("split at {c1} of {c} channels")));
    }
    let plane = h * w;
    let mut a = Vec::with_capacity(n * c1 * plane);
    let mut b = Vec::with_capacity(n * (c - c1) * plane);
    for i in 0..n {
        let s = grad.sample(i);
        a.extend_from_slice(&s[..c1 * plane]);
        b.extend_from_slice(&s[c1 * plane..]);
    }
    Ok((
        Tensor::from_vec([n, c1, h, w], a)?,
        Tensor::from_vec([n, c - c1, h, w], b)?,
    ))
}
