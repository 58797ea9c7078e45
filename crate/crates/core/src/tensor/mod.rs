//! Dense row-major tensors in `N x C x H x W` layout and the raw kernels
//! (convolution, transposed convolution, pooling) the autodiff tape is built on.

pub mod kernels;
mod scalar;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use scalar::{DType, Scalar};

#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} ", self.shape)?;
        let head = &self.data[..self.data.len().min(SHOWN)];
        if self.data.len() > SHOWN {
            write!(f, "{head:?}..")
        } else {
            write!(f, "{head:?}")
        }
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if shape.contains(&0) {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("zero extent in {shape:?}"),
            });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("shape {shape:?} needs {numel} elements, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        assert!(!shape.contains(&0), "zero extent in {shape:?}");
        let numel = shape.iter().product();
        Self {
            shape,
            data: vec![value; numel],
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> T) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    /// Standard normal samples scaled by `std`. Draws are taken in `f64` so
    /// that `f32` and `f64` tensors built from the same stream agree.
    pub fn randn<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64(z * std)
        })
    }

    pub fn uniform<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| T::from_f64(rng.random_range(lo..hi)))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// `(n, c, h, w)` for rank-4 tensors.
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::Shape {
                op,
                detail: format!("expected rank-4 NCHW tensor, got {:?}", self.shape),
            }),
        }
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return Err(Error::Shape {
                op: "reshape",
                detail: format!("{:?} -> {shape:?}", self.shape),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn at4(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        let (_, cs, h, w) = (self.shape[0], self.shape[1], self.shape[2], self.shape[3]);
        self.data[((n * cs + c) * h + y) * w + x]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_same_shape(other, op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn expect_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                op,
                detail: format!("{:?} vs {:?}", self.shape, other.shape),
            });
        }
        Ok(())
    }

    /// Sequential left-to-right sum.
    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.expect_same_shape(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Stack along the channel axis.
    pub fn concat_channels(&self, other: &Self) -> Result<Self> {
        let (n, c1, h, w) = self.dims4("concat_channels")?;
        let (n2, c2, h2, w2) = other.dims4("concat_channels")?;
        if (n, h, w) != (n2, h2, w2) {
            return Err(Error::Shape {
                op: "concat_channels",
                detail: format!("N,H,W must match: {:?} vs {:?}", self.shape, other.shape),
            });
        }
        let plane = c1 * h * w;
        let plane2 = c2 * h * w;
        let mut data = Vec::with_capacity(self.len() + other.len());
        for i in 0..n {
            data.extend_from_slice(&self.data[i * plane..(i + 1) * plane]);
            data.extend_from_slice(&other.data[i * plane2..(i + 1) * plane2]);
        }
        Ok(Self {
            shape: vec![n, c1 + c2, h, w],
            data,
        })
    }

    /// Channels `start..end` of an NCHW tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("slice_channels")?;
        if start >= end || end > c {
            return Err(invalid_range(start, end, c));
        }
        let hw = h * w;
        let mut data = Vec::with_capacity(n * (end - start) * hw);
        for i in 0..n {
            let base = i * c * hw;
            data.extend_from_slice(&self.data[base + start * hw..base + end * hw]);
        }
        Ok(Self {
            shape: vec![n, end - start, h, w],
            data,
        })
    }

    /// Samples `start..end` along the batch axis.
    pub fn slice_batch(&self, start: usize, end: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("slice_batch")?;
        if start >= end || end > n {
            return Err(invalid_range(start, end, n));
        }
        let per = c * h * w;
        Ok(Self {
            shape: vec![end - start, c, h, w],
            data: self.data[start * per..end * per].to_vec(),
        })
    }

    /// Concatenate NCHW tensors of identical `C,H,W` along the batch axis.
    pub fn stack_batch(items: &[&Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| crate::error::invalid("stack of zero tensors"))?;
        let (_, c, h, w) = first.dims4("stack_batch")?;
        let mut n = 0;
        let mut data = Vec::new();
        for t in items {
            let (tn, tc, th, tw) = t.dims4("stack_batch")?;
            if (tc, th, tw) != (c, h, w) {
                return Err(Error::Shape {
                    op: "stack_batch",
                    detail: format!("{:?} vs {:?}", first.shape, t.shape),
                });
            }
            n += tn;
            data.extend_from_slice(&t.data);
        }
        Ok(Self {
            shape: vec![n, c, h, w],
            data,
        })
    }

    /// Nearest-neighbour 2x upscaling by duplicating each pixel into a 2x2 block.
    pub fn upscale2(&self) -> Result<Self> {
        let (n, c, h, w) = self.dims4("upscale2")?;
        let mut out = Self::zeros(vec![n, c, 2 * h, 2 * w]);
        for p in 0..n * c {
            for y in 0..2 * h {
                for x in 0..2 * w {
                    out.data[(p * 2 * h + y) * 2 * w + x] = self.data[(p * h + y / 2) * w + x / 2];
                }
            }
        }
        Ok(out)
    }

    /// Copy of the `size_h x size_w` window whose top-left corner is `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, size_h: usize, size_w: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("crop")?;
        if size_h == 0 || size_w == 0 || y + size_h > h || x + size_w > w {
            return Err(Error::Shape {
                op: "crop",
                detail: format!("window {size_h}x{size_w} at ({y},{x}) outside {h}x{w}"),
            });
        }
        let mut data = Vec::with_capacity(n * c * size_h * size_w);
        for p in 0..n * c {
            for row in y..y + size_h {
                let start = (p * h + row) * w + x;
                data.extend_from_slice(&self.data[start..start + size_w]);
            }
        }
        Ok(Self {
            shape: vec![n, c, size_h, size_w],
            data,
        })
    }

    /// Zero-pad on the bottom and right edges to `h x w`.
    pub fn pad_to(&self, new_h: usize, new_w: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("pad_to")?;
        if new_h < h || new_w < w {
            return Err(invalid_range(new_h, new_w, h.max(w)));
        }
        let mut out = Self::zeros(vec![n, c, new_h, new_w]);
        for p in 0..n * c {
            for y in 0..h {
                let src = (p * h + y) * w;
                let dst = (p * new_h + y) * new_w;
                out.data[dst..dst + w].copy_from_slice(&self.data[src..src + w]);
            }
        }
        Ok(out)
    }
}

fn invalid_range(start: usize, end: usize, bound: usize) -> Error {
    crate::error::invalid(format!("range {start}..{end} invalid for extent {bound}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_shape_must_match_data() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(vec![0, 3], vec![]).is_err());
    }

    #[test]
    fn concat_then_slice_recovers_inputs() {
        let a = Tensor::<f64>::from_fn(vec![2, 3, 2, 2], |i| i as f64);
        let b = Tensor::<f64>::from_fn(vec![2, 1, 2, 2], |i| -(i as f64));
        let ab = a.concat_channels(&b).unwrap();
        assert_eq!(ab.shape(), &[2, 4, 2, 2]);
        assert_eq!(ab.slice_channels(0, 3).unwrap(), a);
        assert_eq!(ab.slice_channels(3, 4).unwrap(), b);
    }

    #[test]
    fn crop_and_pad() {
        let t = Tensor::<f32>::from_fn(vec![1, 1, 4, 4], |i| i as f32);
        let c = t.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.data(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(t.crop(3, 3, 2, 2).is_err());
        let p = c.pad_to(3, 3).unwrap();
        assert_eq!(p.data(), &[6.0, 7.0, 0.0, 10.0, 11.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.crop(0, 0, 2, 2).unwrap(), c);
    }

    #[test]
    fn non_finite_is_reported() {
        let t = Tensor::<f32>::new(vec![2], vec![1.0, f32::NAN]).unwrap();
        assert!(matches!(t.ensure_finite("x"), Err(Error::NonFinite { op: "x" })));
    }
}
