//! RGB rasters, tiling geometry and color conversions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Row-major interleaved RGB image with `f64` sRGB-encoded samples.
///
/// Loaded images hold samples in `[0, 1]`; network outputs may leave that
/// range and are clamped only when quantized.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::BufferLength {
                height,
                width,
                len: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    /// A single color everywhere.
    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(height, width, |_, _| rgb)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_same_dims(&self, other: &Image) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimMismatch(
                self.height,
                self.width,
                other.height,
                other.width,
            ))
        }
    }

    /// 8-bit encoding of every sample: `round(clamp(s, 0, 1) * 255)`, half
    /// rounding away from zero.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&s| quantize_u8(s)).collect()
    }

    /// Snaps every sample onto the 8-bit grid, i.e. what a save/load through
    /// an 8-bit PNG would produce.
    pub fn quantized_u8(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .map(|&s| f64::from(quantize_u8(s)) / 255.0)
                .collect(),
        }
    }

    pub fn clamped(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&s| s.clamp(0.0, 1.0)).collect(),
        }
    }
}

#[inline]
pub fn quantize_u8(sample: f64) -> u8 {
    math::round(sample.clamp(0.0, 1.0) * 255.0) as u8
}

/// Single-channel plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// One tile of a [`PatchGrid`]: origin plus actual extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

/// Exact row-major tiling of an image. Tiles on the right and bottom edges
/// shrink when the image is not a multiple of the patch size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    image_height: usize,
    image_width: usize,
    patch_height: usize,
    patch_width: usize,
    tiles: Vec<Tile>,
}

impl PatchGrid {
    pub fn new(
        image_height: usize,
        image_width: usize,
        patch_height: usize,
        patch_width: usize,
    ) -> Result<Self> {
        if patch_height == 0 || patch_width == 0 {
            return Err(Error::ZeroPatchDim {
                height: patch_height,
                width: patch_width,
            });
        }
        let mut tiles = Vec::with_capacity(
            image_height.div_ceil(patch_height) * image_width.div_ceil(patch_width),
        );
        for row in (0..image_height).step_by(patch_height) {
            let height = patch_height.min(image_height - row);
            for col in (0..image_width).step_by(patch_width) {
                let width = patch_width.min(image_width - col);
                tiles.push(Tile {
                    row,
                    col,
                    height,
                    width,
                });
            }
        }
        Ok(Self {
            image_height,
            image_width,
            patch_height,
            patch_width,
            tiles,
        })
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn patch_height(&self) -> usize {
        self.patch_height
    }

    pub fn patch_width(&self) -> usize {
        self.patch_width
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tile(&self, index: usize) -> Result<Tile> {
        self.tiles.get(index).copied().ok_or(Error::PatchIndex {
            index,
            len: self.tiles.len(),
        })
    }

    pub(crate) fn check_image(&self, image: &Image) -> Result<()> {
        if image.height() == self.image_height && image.width() == self.image_width {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                grid_height: self.image_height,
                grid_width: self.image_width,
                height: image.height(),
                width: image.width(),
            })
        }
    }
}

pub fn split(image: &Image, patch_height: usize, patch_width: usize) -> Result<PatchGrid> {
    PatchGrid::new(image.height(), image.width(), patch_height, patch_width)
}

/// Copies tile `index` out as a standalone image.
pub fn extract(image: &Image, grid: &PatchGrid, index: usize) -> Result<Image> {
    grid.check_image(image)?;
    let tile = grid.tile(index)?;
    let mut data = Vec::with_capacity(tile.height * tile.width * 3);
    for r in tile.row..tile.row + tile.height {
        let start = (r * image.width() + tile.col) * 3;
        data.extend_from_slice(&image.data()[start..start + tile.width * 3]);
    }
    Ok(Image {
        height: tile.height,
        width: tile.width,
        data,
    })
}

/// Writes every patch back at its tile origin. No blending.
pub fn concat(grid: &PatchGrid, patches: &[Image]) -> Result<Image> {
    if patches.len() != grid.len() {
        return Err(Error::PatchCount {
            expected: grid.len(),
            actual: patches.len(),
        });
    }
    let mut out = Image::zeros(grid.image_height, grid.image_width);
    for (index, (tile, patch)) in grid.tiles.iter().zip(patches).enumerate() {
        if patch.height() != tile.height || patch.width() != tile.width {
            return Err(Error::PatchDims {
                index,
                height: tile.height,
                width: tile.width,
                actual_height: patch.height(),
                actual_width: patch.width(),
            });
        }
        let row_len = tile.width * 3;
        for r in 0..tile.height {
            let dst = ((tile.row + r) * grid.image_width + tile.col) * 3;
            let src = r * row_len;
            out.data[dst..dst + row_len].copy_from_slice(&patch.data()[src..src + row_len]);
        }
    }
    Ok(out)
}

#[inline]
pub fn luma(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Rec. 601 luma, `0.299 R + 0.587 G + 0.114 B`.
pub fn to_luminance(image: &Image) -> Plane {
    Plane {
        height: image.height(),
        width: image.width(),
        data: image.pixels().map(luma).collect(),
    }
}

/// CIELAB coordinates relative to the D65 white point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

#[inline]
fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        math::pow((v + 0.055) / 1.055, 2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const EPSILON: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    if t > EPSILON {
        math::cbrt(t)
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

impl Lab {
    /// sRGB (IEC 61966-2-1) to linear RGB to XYZ to CIELAB, all D65.
    pub fn from_srgb(rgb: [f64; 3]) -> Lab {
        let r = srgb_decode(rgb[0]);
        let g = srgb_decode(rgb[1]);
        let b = srgb_decode(rgb[2]);
        let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
        let fx = lab_f(x / D65_WHITE[0]);
        let fy = lab_f(y / D65_WHITE[1]);
        let fz = lab_f(z / D65_WHITE[2]);
        Lab {
            l: 116.0 * fy - 16.0,
            a: 500.0 * (fx - fy),
            b: 200.0 * (fy - fz),
        }
    }
}

pub fn srgb_to_lab(image: &Image) -> Vec<Lab> {
    image.pixels().map(Lab::from_srgb).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| {
            let v = (r * w + c) as f64;
            [v, v + 0.25, v + 0.5]
        })
    }

    #[test]
    fn rejects_bad_buffer() {
        assert!(matches!(
            Image::new(2, 2, vec![0.0; 11]),
            Err(Error::BufferLength { len: 11, .. })
        ));
    }

    #[test]
    fn split_paper_geometries() {
        let g = PatchGrid::new(1024, 1024, 512, 512).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.tiles().iter().all(|t| t.height == 512 && t.width == 512));

        // 1920 wide by 1080 tall in 640x540 tiles.
        let g = PatchGrid::new(1080, 1920, 540, 640).unwrap();
        assert_eq!(g.len(), 6);
        assert!(g.tiles().iter().all(|t| t.height == 540 && t.width == 640));
    }

    #[test]
    fn split_remainder_tiles() {
        let g = PatchGrid::new(5, 5, 2, 2).unwrap();
        assert_eq!(g.len(), 9);
        let dims: Vec<_> = g.tiles().iter().map(|t| (t.height, t.width)).collect();
        assert_eq!(dims[2], (2, 1));
        assert_eq!(dims[6], (1, 2));
        assert_eq!(dims[8], (1, 1));
        // row-major origins
        assert_eq!((g.tiles()[3].row, g.tiles()[3].col), (2, 0));
    }

    #[test]
    fn zero_patch_dim() {
        assert!(matches!(
            PatchGrid::new(4, 4, 0, 2),
            Err(Error::ZeroPatchDim { .. })
        ));
    }

    #[test]
    fn extract_top_left_and_degenerate() {
        let img = ramp(6, 6);
        let g = split(&img, 4, 4).unwrap();
        let p0 = extract(&img, &g, 0).unwrap();
        assert_eq!((p0.height(), p0.width()), (4, 4));
        assert_eq!(p0.pixel(3, 3), img.pixel(3, 3));

        let img = ramp(5, 5);
        let g = split(&img, 2, 2).unwrap();
        let last = extract(&img, &g, 8).unwrap();
        assert_eq!((last.height(), last.width()), (1, 1));
        assert_eq!(last.pixel(0, 0), img.pixel(4, 4));
        assert!(matches!(
            extract(&img, &g, 9),
            Err(Error::PatchIndex { index: 9, len: 9 })
        ));
    }

    #[test]
    fn concat_locality_and_errors() {
        let img = ramp(5, 7);
        let g = split(&img, 2, 3).unwrap();
        let mut patches: Vec<_> = (0..g.len()).map(|i| extract(&img, &g, i).unwrap()).collect();
        assert_eq!(concat(&g, &patches).unwrap(), img);

        let t = g.tiles()[4];
        patches[4] = Image::zeros(t.height, t.width);
        let out = concat(&g, &patches).unwrap();
        for r in 0..img.height() {
            for c in 0..img.width() {
                let inside = r >= t.row && r < t.row + t.height && c >= t.col && c < t.col + t.width;
                assert_eq!(out.pixel(r, c) != img.pixel(r, c), inside, "({r},{c})");
            }
        }

        patches[4] = Image::zeros(t.height + 1, t.width);
        assert!(matches!(
            concat(&g, &patches),
            Err(Error::PatchDims { index: 4, .. })
        ));
        patches.pop();
        assert!(matches!(concat(&g, &patches), Err(Error::PatchCount { .. })));
    }

    #[test]
    fn luminance_weights() {
        let img = Image::from_fn(1, 3, |_, c| match c {
            0 => [1.0, 1.0, 1.0],
            1 => [1.0, 0.0, 0.0],
            _ => [0.0, 0.0, 0.0],
        });
        let l = to_luminance(&img);
        assert!((l.data[0] - 1.0).abs() < 1e-15);
        assert_eq!(l.data[1], 0.299);
        assert_eq!(l.data[2], 0.0);
    }

    #[test]
    fn lab_reference_points() {
        let white = Lab::from_srgb([1.0, 1.0, 1.0]);
        assert!((white.l - 100.0).abs() < 1e-4);
        assert!(white.a.abs() < 0.01 && white.b.abs() < 0.01);

        let black = Lab::from_srgb([0.0, 0.0, 0.0]);
        assert_eq!((black.l, black.a, black.b), (0.0, 0.0, 0.0));

        // Linear 0.5 gray = ((0.5+0.055)/1.055)^2.4; Y is that times the Y row
        // sum of the matrix, L* = 116 * Y^(1/3) - 16.
        let y: f64 = ((0.5f64 + 0.055) / 1.055).powf(2.4) * (0.2126729 + 0.7151522 + 0.0721750);
        let expected = 116.0 * y.cbrt() - 16.0;
        let gray = Lab::from_srgb([0.5, 0.5, 0.5]);
        assert!((gray.l - expected).abs() < 1e-9);
        assert!((gray.l - 53.39).abs() < 0.01);
        assert!(gray.a.abs() < 0.01 && gray.b.abs() < 0.01);
    }

    #[test]
    fn quantization_rules() {
        assert_eq!(quantize_u8(0.5), 128);
        assert_eq!(quantize_u8(-0.2), 0);
        assert_eq!(quantize_u8(1.7), 255);
    }
}
