//! Standardisation and resizing.

use super::Sample;
use crate::error::{invalid, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormScope {
    PerImage,
    Dataset,
}

/// Population mean and standard deviation over all image values.
pub fn image_stats<'a>(images: impl IntoIterator<Item = &'a Tensor<f32>>) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut all = Vec::new();
    for t in images {
        for &v in t.data() {
            sum += v as f64;
            n += 1;
        }
        all.push(t);
    }
    let mean = sum / n as f64;
    let var = all
        .iter()
        .flat_map(|t| t.data())
        .fold(0.0, |acc, &v| acc + (v as f64 - mean).powi(2))
        / n as f64;
    (mean, var.sqrt())
}

/// `(x - mean) / std`; with `std == 0` only the mean is removed and
/// `provenance.degenerate_std` is set. Mask and FOV are untouched.
pub fn normalize_with(sample: &Sample, mean: f64, std: f64) -> Sample {
    let mut out = sample.clone();
    let degenerate = std == 0.0;
    out.image = sample.image.map(|v| {
        let c = v as f64 - mean;
        (if degenerate { c } else { c / std }) as f32
    });
    out.provenance.degenerate_std = degenerate;
    out
}

pub fn normalize(sample: &Sample) -> Sample {
    let (mean, std) = image_stats([&sample.image]);
    normalize_with(sample, mean, std)
}

pub fn normalize_all(samples: &[Sample], scope: NormScope) -> Vec<Sample> {
    match scope {
        NormScope::PerImage => samples.iter().map(normalize).collect(),
        NormScope::Dataset => {
            let (mean, std) = image_stats(samples.iter().map(|s| &s.image));
            samples.iter().map(|s| normalize_with(s, mean, std)).collect()
        }
    }
}

/// Bilinear resampling with half-pixel centres, edge-clamped.
pub fn resize_bilinear(t: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let (n, c, h, w) = t.dims4("resize")?;
    if out_h == 0 || out_w == 0 {
        return Err(invalid("resize target must have positive extents"));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(t.clone());
    }
    let axis = |o: usize, inp: usize, out: usize| -> (usize, usize, f64) {
        let src = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, src - i0 as f64)
    };
    let ys: Vec<_> = (0..out_h).map(|o| axis(o, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|o| axis(o, w, out_w)).collect();
    let src = t.data();
    let mut out = Tensor::zeros(vec![n, c, out_h, out_w]);
    let dst = out.data_mut();
    for p in 0..n * c {
        let plane = &src[p * h * w..][..h * w];
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = plane[y0 * w + x0] as f64 * (1.0 - fx) + plane[y0 * w + x1] as f64 * fx;
                let bot = plane[y1 * w + x0] as f64 * (1.0 - fx) + plane[y1 * w + x1] as f64 * fx;
                dst[(p * out_h + oy) * out_w + ox] = (top * (1.0 - fy) + bot * fy) as f32;
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour resampling; keeps binary planes binary.
pub fn resize_nearest(t: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let (n, c, h, w) = t.dims4("resize")?;
    if out_h == 0 || out_w == 0 {
        return Err(invalid("resize target must have positive extents"));
    }
    let pick = |o: usize, inp: usize, out: usize| (((o as f64 + 0.5) * inp as f64 / out as f64) as usize).min(inp - 1);
    let ys: Vec<_> = (0..out_h).map(|o| pick(o, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|o| pick(o, w, out_w)).collect();
    let src = t.data();
    let mut out = Tensor::zeros(vec![n, c, out_h, out_w]);
    let dst = out.data_mut();
    for p in 0..n * c {
        for (oy, &y) in ys.iter().enumerate() {
            for (ox, &x) in xs.iter().enumerate() {
                dst[(p * out_h + oy) * out_w + ox] = src[(p * h + y) * w + x];
            }
        }
    }
    Ok(out)
}

/// Bilinear for the image, nearest for mask and FOV.
pub fn resize(sample: &Sample, out_h: usize, out_w: usize) -> Result<Sample> {
    let mut out = sample.clone();
    out.image = resize_bilinear(&sample.image, out_h, out_w)?;
    out.mask = resize_nearest(&sample.mask, out_h, out_w)?;
    out.fov = sample.fov.as_ref().map(|f| resize_nearest(f, out_h, out_w)).transpose()?;
    Ok(out)
}
