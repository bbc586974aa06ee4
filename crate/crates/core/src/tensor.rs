//! Dense 4-D tensors in NCHW layout.
//!
//! Flat index of `(n, c, h, w)` is `((n*C + c)*H + h)*W + w`, i.e. the width
//! axis is contiguous. All shapes are validated at construction; element
//! access in hot loops goes through slices obtained from [`Tensor4::data`].

use crate::error::{Error, Result};
use crate::scalar::{Precision, Scalar};

/// A dense rank-4 tensor with `(batch, channels, height, width)` axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<S> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    /// Zero-filled tensor. Every axis must be >= 1 and the flat size must fit
    /// in `usize`.
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        let len = Self::checked_len(n, c, h, w)?;
        Ok(Tensor4 { n, c, h, w, data: vec![S::zero(); len] })
    }

    /// Wrap an existing buffer; `data.len()` must equal `n*c*h*w`.
    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<S>) -> Result<Self> {
        let len = Self::checked_len(n, c, h, w)?;
        if data.len() != len {
            return Err(Error::ShapeMismatch {
                left: format!("buffer of {}", data.len()),
                right: format!("{n}x{c}x{h}x{w} = {len}"),
            });
        }
        Ok(Tensor4 { n, c, h, w, data })
    }

    fn checked_len(n: usize, c: usize, h: usize, w: usize) -> Result<usize> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::EmptyDim(n, c, h, w));
        }
        n.checked_mul(c)
            .and_then(|x| x.checked_mul(h))
            .and_then(|x| x.checked_mul(w))
            // Guard the byte size as well so `Vec` allocation cannot overflow.
            .filter(|&x| x <= isize::MAX as usize / std::mem::size_of::<S>())
            .ok_or(Error::SizeOverflow(n, c, h, w))
    }

    pub fn zeros_like(&self) -> Self {
        Tensor4 { n: self.n, c: self.c, h: self.h, w: self.w, data: vec![S::zero(); self.data.len()] }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // every axis is >= 1 by construction
    }

    pub fn precision(&self) -> Precision {
        S::PRECISION
    }

    /// Flat offset of `(n, c, h, w)`.
    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(n < self.n && c < self.c && h < self.h && w < self.w);
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    /// Inverse of [`Tensor4::offset`].
    #[inline]
    pub fn coords(&self, mut flat: usize) -> (usize, usize, usize, usize) {
        debug_assert!(flat < self.data.len());
        let w = flat % self.w;
        flat /= self.w;
        let h = flat % self.h;
        flat /= self.h;
        let c = flat % self.c;
        (flat / self.c, c, h, w)
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> S {
        self.data[self.offset(n, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut S {
        let i = self.offset(n, c, h, w);
        &mut self.data[i]
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    /// One sample of the batch as a contiguous `(c*h*w)` slice.
    #[inline]
    pub fn sample(&self, n: usize) -> &[S] {
        let stride = self.c * self.h * self.w;
        &self.data[n * stride..(n + 1) * stride]
    }

    #[inline]
    pub fn sample_mut(&mut self, n: usize) -> &mut [S] {
        let stride = self.c * self.h * self.w;
        &mut self.data[n * stride..(n + 1) * stride]
    }

    /// Elementwise sum. Both operands must have identical shape (and they
    /// trivially share precision via the type).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor4 { n: self.n, c: self.c, h: self.h, w: self.w, data })
    }

    /// In-place elementwise sum.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Mean of squared differences over all entries, accumulated in f64.
    pub fn mse(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| {
                let d = a.to_f64() - b.to_f64();
                d * d
            })
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shapes(self.shape(), other.shape()));
        }
        Ok(())
    }

    /// Fill from an `f64` generator in flat order; used by initializers and
    /// the data pipeline.
    pub fn fill_with(&mut self, mut f: impl FnMut() -> f64) {
        for v in &mut self.data {
            *v = S::from_f64(f());
        }
    }
}
