use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use super::image_io::{is_image_path, read_image, RawImage};
use super::Sample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mask and FOV sources are binarised at this 8-bit level.
pub const MASK_THRESHOLD: u8 = 128;

/// Half-open row and column windows applied to every loaded plane.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Crop {
    pub rows: Option<Range<usize>>,
    pub cols: Option<Range<usize>>,
}

impl Crop {
    /// Parses `start..end`.
    pub fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected start..end, got `{s}`"))?;
        let start = a.trim().parse().map_err(|_| format!("bad range start `{a}`"))?;
        let end = b.trim().parse().map_err(|_| format!("bad range end `{b}`"))?;
        if start >= end {
            return Err(format!("empty range `{s}`"));
        }
        Ok(start..end)
    }

    pub fn apply(&self, t: &Tensor<f32>) -> Result<Tensor<f32>> {
        let (_, _, h, w) = t.dims4("crop")?;
        let rows = self.rows.clone().unwrap_or(0..h);
        let cols = self.cols.clone().unwrap_or(0..w);
        t.crop(rows.start, cols.start, rows.len(), cols.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Convert colour images to luminance.
    pub grayscale: bool,
    pub crop: Crop,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            grayscale: true,
            crop: Crop::default(),
        }
    }
}

/// ITU-R BT.601 luma of a `[1, 3, H, W]` tensor.
pub fn to_grayscale(t: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (_, c, h, w) = t.dims4("to_grayscale")?;
    if c == 1 {
        return Ok(t.clone());
    }
    if c != 3 {
        return Err(Error::Data(format!("cannot convert {c}-channel image to grayscale")));
    }
    let hw = h * w;
    let d = t.data();
    Tensor::new(
        vec![1, 1, h, w],
        (0..hw).map(|i| 0.299 * d[i] + 0.587 * d[hw + i] + 0.114 * d[2 * hw + i]).collect(),
    )
}

fn binary_plane(img: &RawImage) -> Tensor<f32> {
    let (h, w, c) = (img.height, img.width, img.channels);
    Tensor::from_fn(vec![1, 1, h, w], |i| {
        let px = &img.data[i * c..(i + 1) * c];
        let level = px.iter().map(|&v| v as u32).sum::<u32>() / c as u32;
        if level >= MASK_THRESHOLD as u32 {
            1.0
        } else {
            0.0
        }
    })
}

fn index_dir(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_image_path(&path) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                map.insert(stem.to_string(), path);
            }
        }
    }
    Ok(map)
}

/// Loads `<root>/images/*`, `<root>/masks/*` and optional `<root>/fov/*`,
/// matched by file stem, in lexicographic stem order. Images are scaled to
/// `[0, 1]`; masks and FOVs are binarised at [`MASK_THRESHOLD`]. Every
/// failing file is reported in a single [`Error::Ingest`].
pub fn ingest(root: &Path, opts: &IngestOptions) -> Result<Vec<Sample>> {
    let images_dir = root.join("images");
    if !images_dir.is_dir() {
        return Err(Error::Data(format!("{} has no images/ directory", root.display())));
    }
    let images = index_dir(&images_dir)?;
    if images.is_empty() {
        return Err(Error::Data(format!("no images found in {}", images_dir.display())));
    }
    let masks = index_dir(&root.join("masks")).unwrap_or_default();
    let fov_dir = root.join("fov");
    let fovs = if fov_dir.is_dir() { Some(index_dir(&fov_dir)?) } else { None };

    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for (stem, image_path) in &images {
        let loaded = (|| -> std::result::Result<Sample, (PathBuf, String)> {
            let fail = |p: &Path, e: String| (p.to_path_buf(), e);
            let mask_path = masks
                .get(stem)
                .ok_or_else(|| fail(image_path, format!("no mask named `{stem}` in masks/")))?;
            let raw = read_image(image_path).map_err(|e| fail(image_path, e.to_string()))?;
            let mraw = read_image(mask_path).map_err(|e| fail(mask_path, e.to_string()))?;
            if (mraw.width, mraw.height) != (raw.width, raw.height) {
                return Err(fail(
                    mask_path,
                    format!("mask is {}x{}, image is {}x{}", mraw.width, mraw.height, raw.width, raw.height),
                ));
            }
            let fov = match fovs.as_ref().and_then(|f| f.get(stem)) {
                None => None,
                Some(p) => {
                    let fraw = read_image(p).map_err(|e| fail(p, e.to_string()))?;
                    if (fraw.width, fraw.height) != (raw.width, raw.height) {
                        return Err(fail(p, "fov size differs from image".into()));
                    }
                    Some(binary_plane(&fraw))
                }
            };
            let crop = |t: Tensor<f32>, p: &Path| opts.crop.apply(&t).map_err(|e| fail(p, e.to_string()));
            let mut image = raw.to_tensor();
            if opts.grayscale {
                image = to_grayscale(&image).map_err(|e| fail(image_path, e.to_string()))?;
            }
            let image = crop(image, image_path)?;
            let mask = crop(binary_plane(&mraw), mask_path)?;
            let fov = fov.map(|f| crop(f, image_path)).transpose()?;
            Sample::new(stem.clone(), image, mask, fov).map_err(|e| fail(image_path, e.to_string()))
        })();
        match loaded {
            Ok(s) => samples.push(s),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Ingest(errors));
    }
    Ok(samples)
}
