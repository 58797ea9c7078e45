use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Sample;
use crate::container::{AnyTensor, Container};
use crate::error::{invalid, Error, FormatError, Result};
use crate::tensor::Tensor;
use crate::train::SegmentationSet;

pub const PATCH_MAGIC: &[u8; 8] = b"R2UNPTCH";
pub const DEFAULT_PATCH_SIZE: usize = 48;

/// Source sample index and top-left corner of one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchOrigin {
    pub sample: usize,
    pub y: usize,
    pub x: usize,
}

/// Draws `count` origins: a sample uniformly at random, then a top-left
/// corner uniformly over every position where the patch fits. Positions are
/// drawn with replacement and without regard to the FOV.
pub fn plan_patches(extents: &[(usize, usize)], count: usize, size: usize, seed: u64) -> Result<Vec<PatchOrigin>> {
    if count == 0 {
        return Err(invalid("patch count must be positive"));
    }
    if size == 0 {
        return Err(invalid("patch size must be positive"));
    }
    if extents.is_empty() {
        return Err(Error::Data("no samples to draw patches from".into()));
    }
    if let Some((i, &(h, w))) = extents.iter().enumerate().find(|(_, &(h, w))| h < size || w < size) {
        return Err(Error::Data(format!("patch size {size} exceeds sample {i} ({h}x{w})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let sample = rng.random_range(0..extents.len());
            let (h, w) = extents[sample];
            PatchOrigin {
                sample,
                y: rng.random_range(0..=h - size),
                x: rng.random_range(0..=w - size),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patch_size: usize,
    pub seed: u64,
    /// Ids of the source samples, indexed by [`PatchOrigin::sample`].
    pub sample_ids: Vec<String>,
    pub origins: Vec<PatchOrigin>,
    /// `[K, C, P, P]`.
    pub images: Tensor<f32>,
    /// `[K, 1, P, P]`.
    pub masks: Tensor<f32>,
}

pub fn sample_patches(samples: &[Sample], count: usize, size: usize, seed: u64) -> Result<PatchSet> {
    let extents: Vec<_> = samples.iter().map(|s| (s.height(), s.width())).collect();
    let origins = plan_patches(&extents, count, size, seed)?;
    let c = samples[0].channels();
    if let Some(s) = samples.iter().find(|s| s.channels() != c) {
        return Err(Error::Data(format!("{}: {} channels, expected {c}", s.id, s.channels())));
    }
    let mut images = Vec::with_capacity(count * c * size * size);
    let mut masks = Vec::with_capacity(count * size * size);
    for o in &origins {
        let s = &samples[o.sample];
        images.extend_from_slice(s.image.crop(o.y, o.x, size, size)?.data());
        masks.extend_from_slice(s.mask.crop(o.y, o.x, size, size)?.data());
    }
    Ok(PatchSet {
        patch_size: size,
        seed,
        sample_ids: samples.iter().map(|s| s.id.clone()).collect(),
        origins,
        images: Tensor::new(vec![count, c, size, size], images)?,
        masks: Tensor::new(vec![count, 1, size, size], masks)?,
    })
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn to_segmentation_set(&self) -> Result<SegmentationSet> {
        let mut set = SegmentationSet::default();
        for k in 0..self.len() {
            set.push(self.images.slice_batch(k, k + 1)?, self.masks.slice_batch(k, k + 1)?);
        }
        Ok(set)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut c = Container::new();
        c.header.insert("patch.size".into(), self.patch_size.to_string());
        c.header.insert("patch.seed".into(), self.seed.to_string());
        for (i, id) in self.sample_ids.iter().enumerate() {
            c.header.insert(format!("sample.{i}"), id.clone());
        }
        let origins = Tensor::<f64>::from_fn(vec![self.len(), 3], |i| {
            let o = &self.origins[i / 3];
            [o.sample, o.y, o.x][i % 3] as f64
        });
        c.tensors.push(("images".into(), AnyTensor::from_tensor(&self.images)));
        c.tensors.push(("masks".into(), AnyTensor::from_tensor(&self.masks)));
        c.tensors.push(("origins".into(), AnyTensor::from_tensor(&origins)));
        c.encode(PATCH_MAGIC)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Container::decode(bytes, PATCH_MAGIC)?;
        let corrupt = |m: String| Error::from(FormatError::CorruptHeader(m));
        let mismatch = |m: String| Error::from(FormatError::SpecMismatch(m));
        let num = |key: &str| -> Result<u64> {
            let v = c.header.get(key).ok_or_else(|| corrupt(format!("missing {key}")))?;
            v.parse().map_err(|_| corrupt(format!("{key} is not an integer: `{v}`")))
        };
        let patch_size = num("patch.size")? as usize;
        let seed = num("patch.seed")?;
        let mut sample_ids = Vec::new();
        while let Some(id) = c.header.get(&format!("sample.{}", sample_ids.len())) {
            sample_ids.push(id.clone());
        }
        let sample_keys = c.header.keys().filter(|k| k.starts_with("sample.")).count();
        if sample_keys != sample_ids.len() {
            return Err(corrupt("sample ids are not numbered 0..n".into()));
        }
        let names: Vec<_> = c.tensors.iter().map(|(n, _)| n.as_str()).collect();
        if names != ["images", "masks", "origins"] {
            return Err(mismatch(format!("expected tensors images, masks, origins; found {names:?}")));
        }
        let (images, masks, origins) = (&c.tensors[0].1, &c.tensors[1].1, &c.tensors[2].1);
        let (is, ms, os) = (images.shape(), masks.shape(), origins.shape());
        let k = os[0];
        let ok = is.len() == 4
            && ms.len() == 4
            && os.len() == 2
            && os[1] == 3
            && is[0] == k
            && ms[0] == k
            && ms[1] == 1
            && is[2..] == [patch_size, patch_size]
            && ms[2..] == [patch_size, patch_size];
        if !ok {
            return Err(mismatch(format!(
                "inconsistent shapes images {is:?}, masks {ms:?}, origins {os:?} for patch size {patch_size}"
            )));
        }
        let raw: Tensor<f64> = origins.to_tensor();
        let mut list = Vec::with_capacity(k);
        for row in raw.data().chunks(3) {
            if row.iter().any(|&v| v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64) {
                return Err(mismatch(format!("invalid origin {row:?}")));
            }
            let o = PatchOrigin {
                sample: row[0] as usize,
                y: row[1] as usize,
                x: row[2] as usize,
            };
            if o.sample >= sample_ids.len() {
                return Err(mismatch(format!("origin refers to unknown sample {}", o.sample)));
            }
            list.push(o);
        }
        Ok(Self {
            patch_size,
            seed,
            sample_ids,
            origins: list,
            images: images.to_tensor(),
            masks: masks.to_tensor(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
