//! PNG rasters of grid quantities. x runs left to right and y bottom to
//! top; each cell is drawn as a `SCALE`×`SCALE` block.
//!
//! Colour maps:
//! - magnitude: black at 0 to white at the maximum;
//! - real part: blue at `-m`, white at 0, red at `+m` with `m = max |re|`;
//! - permittivity: white at the smallest value to black at the largest.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::C64;

use super::write_atomic;

const SCALE: u32 = 4;

fn raster(grid: &GridSpec, color: impl Fn(usize) -> [u8; 3]) -> RgbImage {
    let (w, h) = (grid.nx as u32, grid.ny as u32);
    RgbImage::from_fn(w * SCALE, h * SCALE, |px, py| {
        let i = (px / SCALE) as usize;
        let j = (h - 1 - py / SCALE) as usize;
        Rgb(color(grid.idx(i, j)))
    })
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Format {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    write_atomic(path, &bytes)
}

fn unit(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn magnitude_color(v: f64) -> [u8; 3] {
    let g = unit(v);
    [g, g, g]
}

fn signed_color(v: f64) -> [u8; 3] {
    let a = unit(1.0 - v.abs());
    if v >= 0.0 {
        [255, a, a]
    } else {
        [a, a, 255]
    }
}

pub fn write_magnitude(grid: &GridSpec, x: &[C64], path: &Path) -> Result<()> {
    let m = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let m = if m > 0.0 { m } else { 1.0 };
    save(&raster(grid, |k| magnitude_color(x[k].norm() / m)), path)
}

pub fn write_real_part(grid: &GridSpec, x: &[C64], path: &Path) -> Result<()> {
    let m = x.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let m = if m > 0.0 { m } else { 1.0 };
    save(&raster(grid, |k| signed_color(x[k].re / m)), path)
}

pub fn write_permittivity(grid: &GridSpec, eps: &[f64], path: &Path) -> Result<()> {
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    save(&raster(grid, |k| magnitude_color(1.0 - (eps[k] - lo) / span)), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colour_map_ends() {
        assert_eq!(magnitude_color(0.0), [0, 0, 0]);
        assert_eq!(magnitude_color(1.0), [255, 255, 255]);
        assert_eq!(signed_color(1.0), [255, 0, 0]);
        assert_eq!(signed_color(-1.0), [0, 0, 255]);
        assert_eq!(signed_color(0.0), [255, 255, 255]);
    }
}
