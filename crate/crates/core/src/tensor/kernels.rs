//! Forward and adjoint kernels over raw tensors. Every reduction runs in a
//! fixed sequential order, so results are bit-reproducible.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(crate::error::invalid("stride must be at least 1"));
        }
        Ok(Self { stride, padding })
    }

    fn out_extent(&self, input: usize, kernel: usize) -> usize {
        (input + 2 * self.padding - kernel) / self.stride + 1
    }

    /// Range of output positions `o` for which `o * stride + k - padding`
    /// lands inside `0..input`.
    fn valid(&self, k: usize, input: usize, out: usize) -> std::ops::Range<usize> {
        let (s, p) = (self.stride, self.padding);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        // o*s + k - p <= input - 1  <=>  o <= (input - 1 + p - k) / s
        let hi = if input + p > k { ((input - 1 + p - k) / s + 1).min(out) } else { 0 };
        lo.min(hi)..hi
    }
}

pub struct ConvShapes {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
}

pub fn conv2d_shapes<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    geom: ConvGeometry,
) -> Result<ConvShapes> {
    let (n, cin, h, w) = input.dims4("conv2d")?;
    let (cout, wcin, kh, kw) = weight.dims4("conv2d")?;
    if wcin != cin {
        return Err(Error::Dimension {
            op: "conv2d",
            dim: "input channels (weight Cin vs input C)",
            expected: wcin,
            found: cin,
        });
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::Shape {
                op: "conv2d",
                detail: format!("bias shape {:?}, expected [{cout}]", b.shape()),
            });
        }
    }
    if kh > h + 2 * geom.padding || kw > w + 2 * geom.padding {
        return Err(Error::Shape {
            op: "conv2d",
            detail: format!("kernel {kh}x{kw} larger than padded input {h}x{w} (padding {})", geom.padding),
        });
    }
    Ok(ConvShapes {
        n,
        cin,
        h,
        w,
        cout,
        kh,
        kw,
        oh: geom.out_extent(h, kh),
        ow: geom.out_extent(w, kw),
    })
}

/// Direct zero-padded cross-correlation, weight layout `[Cout, Cin, kh, kw]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    geom: ConvGeometry,
) -> Result<Tensor<T>> {
    let s = conv2d_shapes(input, weight, bias, geom)?;
    let mut out = Tensor::zeros(vec![s.n, s.cout, s.oh, s.ow]);
    let x = input.data();
    let wt = weight.data();
    let o = out.data_mut();
    let (stride, pad) = (geom.stride, geom.padding);
    for n in 0..s.n {
        for co in 0..s.cout {
            let plane = &mut o[(n * s.cout + co) * s.oh * s.ow..][..s.oh * s.ow];
            if let Some(b) = bias {
                plane.fill(b.data()[co]);
            }
            for ci in 0..s.cin {
                let xin = &x[(n * s.cin + ci) * s.h * s.w..][..s.h * s.w];
                for ky in 0..s.kh {
                    let rows = geom.valid(ky, s.h, s.oh);
                    for kx in 0..s.kw {
                        let wv = wt[((co * s.cin + ci) * s.kh + ky) * s.kw + kx];
                        let cols = geom.valid(kx, s.w, s.ow);
                        for oy in rows.clone() {
                            let iy = oy * stride + ky - pad;
                            let xrow = &xin[iy * s.w..][..s.w];
                            let orow = &mut plane[oy * s.ow..][..s.ow];
                            for ox in cols.clone() {
                                orow[ox] += wv * xrow[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Adjoint of [`conv2d`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    geom: ConvGeometry,
) -> Result<ConvGrads<T>> {
    let s = conv2d_shapes(input, weight, None, geom)?;
    if grad_out.shape() != [s.n, s.cout, s.oh, s.ow] {
        return Err(Error::Shape {
            op: "conv2d_backward",
            detail: format!("output gradient {:?}", grad_out.shape()),
        });
    }
    let mut gx = Tensor::zeros(input.shape().to_vec());
    let mut gw = Tensor::zeros(weight.shape().to_vec());
    let mut gb = Tensor::zeros(vec![s.cout]);
    let x = input.data();
    let wt = weight.data();
    let go = grad_out.data();
    let (stride, pad) = (geom.stride, geom.padding);
    for n in 0..s.n {
        for co in 0..s.cout {
            let gplane = &go[(n * s.cout + co) * s.oh * s.ow..][..s.oh * s.ow];
            gb.data_mut()[co] += gplane.iter().fold(T::zero(), |a, &v| a + v);
            for ci in 0..s.cin {
                let xoff = (n * s.cin + ci) * s.h * s.w;
                for ky in 0..s.kh {
                    let rows = geom.valid(ky, s.h, s.oh);
                    for kx in 0..s.kw {
                        let widx = ((co * s.cin + ci) * s.kh + ky) * s.kw + kx;
                        let wv = wt[widx];
                        let cols = geom.valid(kx, s.w, s.ow);
                        let mut acc = T::zero();
                        for oy in rows.clone() {
                            let iy = oy * stride + ky - pad;
                            let grow = &gplane[oy * s.ow..][..s.ow];
                            let xrow = &x[xoff + iy * s.w..][..s.w];
                            let gxrow = &mut gx.data_mut()[xoff + iy * s.w..][..s.w];
                            for ox in cols.clone() {
                                let ix = ox * stride + kx - pad;
                                acc += grow[ox] * xrow[ix];
                                gxrow[ix] += wv * grow[ox];
                            }
                        }
                        gw.data_mut()[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

/// Validates the restricted transposed-convolution geometry (`kh == kw == stride`)
/// and returns `(n, cin, h, w, cout, k)`.
fn transpose_shapes<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (n, cin, h, w) = input.dims4("conv2d_transpose")?;
    let (wcin, cout, kh, kw) = weight.dims4("conv2d_transpose")?;
    if wcin != cin {
        return Err(Error::Dimension {
            op: "conv2d_transpose",
            dim: "input channels (weight Cin vs input C)",
            expected: wcin,
            found: cin,
        });
    }
    if stride == 0 || kh != kw || kh != stride {
        return Err(crate::error::invalid(format!(
            "conv2d_transpose supports square kernels equal to the stride, got {kh}x{kw} with stride {stride}"
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::Shape {
                op: "conv2d_transpose",
                detail: format!("bias shape {:?}, expected [{cout}]", b.shape()),
            });
        }
    }
    Ok((n, cin, h, w, cout, kh))
}

/// Up-convolution with weight layout `[Cin, Cout, k, k]` and `k == stride`.
/// The windows do not overlap, so each output pixel receives one tap per
/// input channel.
pub fn conv2d_transpose<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<Tensor<T>> {
    let (n, cin, h, w, cout, k) = transpose_shapes(input, weight, bias, stride)?;
    let (oh, ow) = (h * k, w * k);
    let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
    let x = input.data();
    let wt = weight.data();
    let o = out.data_mut();
    for b in 0..n {
        for co in 0..cout {
            let plane = &mut o[(b * cout + co) * oh * ow..][..oh * ow];
            if let Some(bias) = bias {
                plane.fill(bias.data()[co]);
            }
            for ci in 0..cin {
                let xin = &x[(b * cin + ci) * h * w..][..h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wt[((ci * cout + co) * k + ky) * k + kx];
                        for iy in 0..h {
                            let orow = &mut plane[(iy * k + ky) * ow..][..ow];
                            let xrow = &xin[iy * w..][..w];
                            for ix in 0..w {
                                orow[ix * k + kx] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn conv2d_transpose_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
) -> Result<ConvGrads<T>> {
    let (n, cin, h, w, cout, k) = transpose_shapes(input, weight, None, stride)?;
    let (oh, ow) = (h * k, w * k);
    if grad_out.shape() != [n, cout, oh, ow] {
        return Err(Error::Shape {
            op: "conv2d_transpose_backward",
            detail: format!("output gradient {:?}", grad_out.shape()),
        });
    }
    let mut gx = Tensor::zeros(input.shape().to_vec());
    let mut gw = Tensor::zeros(weight.shape().to_vec());
    let mut gb = Tensor::zeros(vec![cout]);
    let x = input.data();
    let wt = weight.data();
    let go = grad_out.data();
    for b in 0..n {
        for co in 0..cout {
            let gplane = &go[(b * cout + co) * oh * ow..][..oh * ow];
            gb.data_mut()[co] += gplane.iter().fold(T::zero(), |a, &v| a + v);
            for ci in 0..cin {
                let xoff = (b * cin + ci) * h * w;
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((ci * cout + co) * k + ky) * k + kx;
                        let wv = wt[widx];
                        let mut acc = T::zero();
                        for iy in 0..h {
                            let grow = &gplane[(iy * k + ky) * ow..][..ow];
                            for ix in 0..w {
                                let g = grow[ix * k + kx];
                                acc += g * x[xoff + iy * w + ix];
                                gx.data_mut()[xoff + iy * w + ix] += wv * g;
                            }
                        }
                        gw.data_mut()[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

/// 2x2/stride-2 max pooling. Returns the pooled tensor and, per output
/// element, the flat input index of the selected maximum. Ties go to the
/// first element in row-major window order.
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = input.dims4("maxpool2")?;
    for (dim, extent) in [("height", h), ("width", w)] {
        if extent % 2 != 0 {
            return Err(Error::OddExtent {
                op: "maxpool2",
                dim,
                extent,
            });
        }
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let mut argmax = vec![0usize; n * c * oh * ow];
    let x = input.data();
    for p in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (p * h + 2 * oy) * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (p * h + 2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                let o = (p * oh + oy) * ow + ox;
                out.data_mut()[o] = x[best];
                argmax[o] = best;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(input_shape.to_vec());
    for (&src, &g) in argmax.iter().zip(grad_out.data()) {
        gx.data_mut()[src] += g;
    }
    gx
}
