use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Notes attached to a sample by the pipeline stages it went through.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    /// Normalisation met a constant image and only subtracted the mean.
    pub degenerate_std: bool,
    pub fov_generated: bool,
}

/// One image with its binary mask and optional field-of-view mask, all at
/// the same `H x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `[1, C, H, W]`.
    pub image: Tensor<f32>,
    /// `[1, 1, H, W]` with values in `{0, 1}`.
    pub mask: Tensor<f32>,
    pub fov: Option<Tensor<f32>>,
    pub provenance: Provenance,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: Tensor<f32>, mask: Tensor<f32>, fov: Option<Tensor<f32>>) -> Result<Self> {
        let s = Self {
            id: id.into(),
            image,
            mask,
            fov,
            provenance: Provenance::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn height(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[3]
    }

    pub fn channels(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, _, h, w) = self.image.dims4("sample")?;
        let check_plane = |t: &Tensor<f32>, what: &str| -> Result<()> {
            let (mn, mc, mh, mw) = t.dims4("sample")?;
            if (mn, mc, mh, mw) != (1, 1, h, w) || n != 1 {
                return Err(Error::Data(format!(
                    "{}: {what} shape {:?} does not match image {:?}",
                    self.id,
                    t.shape(),
                    self.image.shape()
                )));
            }
            if t.data().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Data(format!("{}: {what} is not binary", self.id)));
            }
            Ok(())
        };
        check_plane(&self.mask, "mask")?;
        if let Some(f) = &self.fov {
            check_plane(f, "fov")?;
        }
        Ok(())
    }
}
