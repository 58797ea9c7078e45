use std::collections::VecDeque;

use super::Sample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovOptions {
    /// Fraction of the maximum luminance above which a pixel is foreground.
    pub threshold: f32,
    /// Smallest accepted region, in pixels.
    pub min_region: usize,
}

impl Default for FovOptions {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            min_region: 64,
        }
    }
}

fn neighbours(i: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (y, x) = (i / w, i % w);
    [
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
    ]
    .into_iter()
    .flatten()
}

/// 4-connected flood fill from `seeds` over pixels where `open` holds.
fn flood(seeds: impl IntoIterator<Item = usize>, h: usize, w: usize, open: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; h * w];
    let mut queue = VecDeque::new();
    for s in seeds {
        if open(s) && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbours(i, h, w) {
            if !seen[j] && open(j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Field-of-view mask from a raw (not yet standardised) image: threshold the
/// channel-mean luminance at `threshold * max`, keep the largest 4-connected
/// component and fill its holes.
pub fn fov_mask(image: &Tensor<f32>, opts: &FovOptions) -> Result<Tensor<f32>> {
    let (_, c, h, w) = image.dims4("fov")?;
    let hw = h * w;
    let d = image.data();
    let lum: Vec<f32> = (0..hw).map(|i| (0..c).map(|ch| d[ch * hw + i]).sum::<f32>() / c as f32).collect();
    let max = lum.iter().copied().fold(f32::MIN, f32::max);
    let cut = opts.threshold * max;
    let fg: Vec<bool> = lum.iter().map(|&v| v > cut).collect();

    // label components, largest wins (first found on ties)
    let mut label = vec![usize::MAX; hw];
    let mut best: Option<(usize, usize)> = None;
    let mut next = 0;
    for start in 0..hw {
        if !fg[start] || label[start] != usize::MAX {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        label[start] = next;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for j in neighbours(i, h, w) {
                if fg[j] && label[j] == usize::MAX {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
        next += 1;
    }
    let (keep, size) = best.ok_or_else(|| Error::Data("no pixel above the FOV threshold".into()))?;
    if size < opts.min_region {
        return Err(Error::Data(format!(
            "largest FOV region has {size} pixels, fewer than min_region {}",
            opts.min_region
        )));
    }

    let border = (0..w).chain((h - 1) * w..hw).chain((0..h).map(|y| y * w)).chain((0..h).map(|y| y * w + w - 1));
    let outside = flood(border, h, w, |i| label[i] != keep);
    Ok(Tensor::from_fn(vec![1, 1, h, w], |i| if outside[i] { 0.0 } else { 1.0 }))
}

pub fn generate_fov(sample: &Sample, opts: &FovOptions) -> Result<Sample> {
    let mut out = sample.clone();
    out.fov = Some(fov_mask(&sample.image, opts)?);
    out.provenance.fov_generated = true;
    Ok(out)
}
