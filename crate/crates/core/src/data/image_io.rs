use std::path::Path;

use super::pnm;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

pub const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "ppm", "pnm", "bmp"];

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

pub fn is_image_path(path: &Path) -> bool {
    IMAGE_EXTENSIONS.contains(&extension(path).as_str())
}

/// Decode from bytes, using `ext` to choose the codec.
pub fn decode_image(bytes: &[u8], ext: &str) -> Result<RawImage> {
    match ext {
        "pgm" | "ppm" | "pnm" => pnm::decode(bytes).map_err(|e| Error::Data(e.to_string())),
        "png" | "bmp" => {
            let img = image::load_from_memory(bytes).map_err(|e| Error::Data(e.to_string()))?;
            let (width, height) = (img.width() as usize, img.height() as usize);
            if img.color().has_color() {
                Ok(RawImage {
                    width,
                    height,
                    channels: 3,
                    data: img.to_rgb8().into_raw(),
                })
            } else {
                Ok(RawImage {
                    width,
                    height,
                    channels: 1,
                    data: img.to_luma8().into_raw(),
                })
            }
        }
        other => Err(Error::Data(format!("unsupported image extension `{other}`"))),
    }
}

pub fn read_image(path: &Path) -> Result<RawImage> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes, &extension(path))
}

/// Writes PNG or binary PGM/PPM depending on the extension.
pub fn write_image(path: &Path, img: &RawImage) -> Result<()> {
    match extension(path).as_str() {
        "pgm" | "ppm" | "pnm" => std::fs::write(path, pnm::encode(img))?,
        "png" => {
            let color = if img.channels == 3 {
                image::ExtendedColorType::Rgb8
            } else {
                image::ExtendedColorType::L8
            };
            image::save_buffer(path, &img.data, img.width as u32, img.height as u32, color)
                .map_err(|e| Error::Data(e.to_string()))?
        }
        other => return Err(Error::Data(format!("cannot write `{other}` images (png|pgm|ppm)"))),
    }
    Ok(())
}

impl RawImage {
    /// `[1, C, H, W]` with values scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let (h, w, c) = (self.height, self.width, self.channels);
        let mut t = Tensor::zeros(vec![1, c, h, w]);
        let out = t.data_mut();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    out[(ch * h + y) * w + x] = self.data[(y * w + x) * c + ch] as f32 / 255.0;
                }
            }
        }
        t
    }

    /// Single-plane image from `[1, 1, H, W]` values in `[0, 1]`, mapped linearly to 0..=255.
    pub fn from_unit_plane(t: &Tensor<f32>) -> Result<Self> {
        let (_, c, h, w) = t.dims4("from_unit_plane")?;
        if c != 1 {
            return Err(crate::error::invalid("expected a single-channel plane"));
        }
        Ok(Self {
            width: w,
            height: h,
            channels: 1,
            data: t.data()[..h * w]
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect(),
        })
    }
}
