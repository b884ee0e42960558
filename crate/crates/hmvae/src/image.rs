//! Binary PPM (P6) rendering of projection maps.

use std::path::Path;

use hmvae_core::analysis::ProjectionMap;
use hmvae_core::data::VolumeMask;

use crate::error::{Error, Result};
use crate::fsutil;

pub type Rgb = [u8; 3];

const OUTSIDE: Rgb = [0, 0, 0];

/// Blue through white to red; `t` in `[-1, 1]`.
pub fn diverging(t: f64) -> Rgb {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(-t), fade(-t), 255]
    }
}

fn grey(c: Rgb) -> Rgb {
    let g = ((u16::from(c[0]) + u16::from(c[1]) + u16::from(c[2])) / 3) as u8;
    [g, g, g]
}

/// An RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: usize, height: usize, c: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    fn fill_block(&mut self, x: usize, y: usize, scale: usize, c: Rgb) {
        for yy in y * scale..(y + 1) * scale {
            for xx in x * scale..(x + 1) * scale {
                self.pixels[yy * self.width + xx] = c;
            }
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

/// 2-D masks draw one plane (first axis horizontal). 3-D masks draw each slice
/// along the last axis as a tile, tiles laid out row by row in a near-square
/// grid. Colors are normalized by the largest `|value|`; when some voxel is
/// supra-threshold the others are desaturated. Voxels outside the mask are black.
pub fn render_montage(map: &ProjectionMap, mask: &VolumeMask, scale: usize) -> Result<Image> {
    mask.validate()?;
    if map.values.len() != mask.voxel_count() {
        return Err(hmvae_core::Error::Shape {
            context: "projection map vs mask voxels",
            expected: mask.voxel_count(),
            found: map.values.len(),
        }
        .into());
    }
    if scale == 0 {
        return Err(Error::Invalid("image scale must be at least 1".into()));
    }
    let (nx, ny, nz) = match mask.dims.as_slice() {
        [x, y] => (*x, *y, 1),
        [x, y, z] => (*x, *y, *z),
        _ => return Err(Error::Invalid(format!("cannot render a {}-D mask", mask.dims.len()))),
    };
    let tiles_x = (1..=nz).find(|c| c * c >= nz).unwrap_or(1);
    let tiles_y = nz.div_ceil(tiles_x);
    let mut img = Image::filled(tiles_x * nx * scale, tiles_y * ny * scale, OUTSIDE);
    let peak = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grey_out = map.supra_mask.iter().any(|&s| s) && map.supra_mask.len() == map.values.len();
    for (i, coord) in mask.voxel_coords.iter().enumerate() {
        let t = if peak > 0.0 { map.values[i] / peak } else { 0.0 };
        let mut c = diverging(t);
        if grey_out && !map.supra_mask[i] {
            c = grey(c);
        }
        let z = coord.get(2).copied().unwrap_or(0);
        let (tx, ty) = (z % tiles_x, z / tiles_x);
        img.fill_block(tx * nx + coord[0], ty * ny + coord[1], scale, c);
    }
    Ok(img)
}

pub fn save_montage(map: &ProjectionMap, mask: &VolumeMask, scale: usize, path: &Path) -> Result<()> {
    fsutil::atomic_write(path, &render_montage(map, mask, scale)?.to_ppm())
}
