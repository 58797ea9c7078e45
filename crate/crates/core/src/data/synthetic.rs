//! Procedural datasets for desk-scale runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Sample;
use crate::error::{invalid, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// One bright disk on a noisy dark field; the mask is the disk.
    Disks,
    /// Thin dark curves inside a circular field of view, which is supplied.
    Vessels,
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::Disks => "disks",
            SyntheticKind::Vessels => "vessels",
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "disks" => Ok(Self::Disks),
            "vessels" => Ok(Self::Vessels),
            other => Err(format!("unknown synthetic dataset `{other}` (disks|vessels)")),
        }
    }
}

/// `count` samples of `size x size` pixels with ids `syn000`, `syn001`, ...
pub fn synthetic(kind: SyntheticKind, count: usize, size: usize, seed: u64) -> Result<Vec<Sample>> {
    if count == 0 || size < 8 {
        return Err(invalid("synthetic data needs count >= 1 and size >= 8"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let id = format!("syn{i:03}");
            match kind {
                SyntheticKind::Disks => disk(&mut rng, id, size),
                SyntheticKind::Vessels => vessels(&mut rng, id, size),
            }
        })
        .collect()
}

fn disk(rng: &mut ChaCha8Rng, id: String, size: usize) -> Result<Sample> {
    let s = size as f64;
    let r = rng.random_range(0.12 * s..0.3 * s);
    let cy = rng.random_range(r..s - r);
    let cx = rng.random_range(r..s - r);
    let noise = Normal::new(0.0, 0.05).expect("valid std");
    let mut mask = Tensor::zeros(vec![1, 1, size, size]);
    let mut image = Tensor::zeros(vec![1, 1, size, size]);
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
            let inside = dy * dy + dx * dx <= r * r;
            let base: f64 = if inside { 0.75 } else { 0.25 };
            image.data_mut()[y * size + x] = (base + noise.sample(rng)).clamp(0.0, 1.0) as f32;
            mask.data_mut()[y * size + x] = inside as u8 as f32;
        }
    }
    Sample::new(id, image, mask, None)
}

fn vessels(rng: &mut ChaCha8Rng, id: String, size: usize) -> Result<Sample> {
    let s = size as f64;
    let (c, fov_r) = (s / 2.0, 0.46 * s);
    let noise = Normal::new(0.0, 0.03).expect("valid std");
    let mut image = Tensor::zeros(vec![1, 1, size, size]);
    let mut mask = Tensor::zeros(vec![1, 1, size, size]);
    let mut fov = Tensor::zeros(vec![1, 1, size, size]);

    // each curve: y = a + b*x + amp*sin(freq*x + phase), optionally transposed
    let curves: Vec<_> = (0..rng.random_range(3..6))
        .map(|_| {
            (
                rng.random_range(0.2 * s..0.8 * s),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..0.12 * s),
                rng.random_range(0.5..3.0) * std::f64::consts::TAU / s,
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.6..1.6),
                rng.random_bool(0.5),
            )
        })
        .collect();
    let shade = rng.random_range(0.55..0.7);
    for y in 0..size {
        for x in 0..size {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            let in_fov = (py - c).powi(2) + (px - c).powi(2) <= fov_r * fov_r;
            let on_curve = curves.iter().any(|&(a, b, amp, freq, phase, half_width, flip)| {
                let (u, v) = if flip { (py, px) } else { (px, py) };
                let centre = a + b * (u - c) + amp * (freq * u + phase).sin();
                (v - centre).abs() <= half_width
            });
            let vessel = in_fov && on_curve;
            let i = y * size + x;
            let base = if !in_fov {
                0.0
            } else if vessel {
                shade - 0.35
            } else {
                shade
            };
            let value: f64 = if in_fov { base + noise.sample(rng) } else { base };
            image.data_mut()[i] = value.clamp(0.0, 1.0) as f32;
            mask.data_mut()[i] = vessel as u8 as f32;
            fov.data_mut()[i] = in_fov as u8 as f32;
        }
    }
    Sample::new(id, image, mask, Some(fov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        for kind in [SyntheticKind::Disks, SyntheticKind::Vessels] {
            let a = synthetic(kind, 4, 32, 5).unwrap();
            assert_eq!(a, synthetic(kind, 4, 32, 5).unwrap());
            for s in &a {
                let m = s.mask.sum();
                assert!(m > 0.0 && m < 32.0 * 32.0, "{}: {m}", kind.as_str());
            }
        }
    }
}
