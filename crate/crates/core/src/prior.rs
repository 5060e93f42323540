//! Closed-form moiré complexity prior.
//!
//! A patch scores `C * mean(F)` where `C` is the opponent-color colorfulness
//! of its pixel cloud and `F = |L - G_sigma * L|` is the Gaussian high-pass
//! residual of its luminance. Either factor alone being zero (no color, or
//! no high frequencies) zeroes the score.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{extract, to_luminance, Image, PatchGrid, Plane};
use crate::math;

/// Weight of the mean term in the colorfulness statistic.
pub const COLORFULNESS_MU_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorConfig {
    gaussian_sigma: f64,
    kernel_radius: usize,
}

impl PriorConfig {
    /// Sigma with the default truncation radius `ceil(3 sigma)`.
    pub fn new(gaussian_sigma: f64) -> Result<Self> {
        if !(gaussian_sigma > 0.0 && gaussian_sigma.is_finite()) {
            return Err(Error::PriorConfig("gaussian sigma must be positive"));
        }
        Self::with_radius(gaussian_sigma, math::ceil(3.0 * gaussian_sigma) as usize)
    }

    pub fn with_radius(gaussian_sigma: f64, kernel_radius: usize) -> Result<Self> {
        if !(gaussian_sigma > 0.0 && gaussian_sigma.is_finite()) {
            return Err(Error::PriorConfig("gaussian sigma must be positive"));
        }
        if kernel_radius == 0 {
            return Err(Error::PriorConfig("kernel radius must be at least 1"));
        }
        Ok(Self {
            gaussian_sigma,
            kernel_radius,
        })
    }

    pub fn gaussian_sigma(&self) -> f64 {
        self.gaussian_sigma
    }

    pub fn kernel_radius(&self) -> usize {
        self.kernel_radius
    }

    pub fn colorfulness_mu_weight(&self) -> f64 {
        COLORFULNESS_MU_WEIGHT
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma: 5.0,
            kernel_radius: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoireScore {
    pub colorfulness: f64,
    pub frequency_mean: f64,
    pub score: f64,
}

/// Opponent-color colorfulness with population statistics:
/// `sqrt(var(rg) + var(yb)) + 0.3 * sqrt(mean(rg)^2 + mean(yb)^2)`.
pub fn colorfulness(patch: &Image) -> Result<f64> {
    if patch.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = patch.pixel_count() as f64;
    let opponent = |p: [f64; 3]| (p[0] - p[1], 0.5 * (p[0] + p[1]) - p[2]);

    let (mut sum_rg, mut sum_yb) = (0.0, 0.0);
    for p in patch.pixels() {
        let (rg, yb) = opponent(p);
        sum_rg += rg;
        sum_yb += yb;
    }
    let (mean_rg, mean_yb) = (sum_rg / n, sum_yb / n);

    let (mut ss_rg, mut ss_yb) = (0.0, 0.0);
    for p in patch.pixels() {
        let (rg, yb) = opponent(p);
        ss_rg += (rg - mean_rg) * (rg - mean_rg);
        ss_yb += (yb - mean_yb) * (yb - mean_yb);
    }
    let spread = math::sqrt(ss_rg / n + ss_yb / n);
    let center = math::sqrt(mean_rg * mean_rg + mean_yb * mean_yb);
    Ok(spread + COLORFULNESS_MU_WEIGHT * center)
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| math::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Reflect-101 border index (`dcb|abcd|cba`), valid for any offset.
#[inline]
pub fn reflect_101(index: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = index.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// One separable pass. Each output is written as `x_j + sum_i k_i (x_{j+i} - x_j)`
/// so that constant signals come back bit-exact.
fn blur_axis(src: &[f64], dst: &mut [f64], len: usize, stride: usize, count: usize, line_step: usize, taps: &[f64]) {
    let radius = (taps.len() / 2) as isize;
    for line in 0..count {
        let base = line * line_step;
        for j in 0..len {
            let center = src[base + j * stride];
            let mut acc = 0.0;
            for (t, &k) in taps.iter().enumerate() {
                let idx = reflect_101(j as isize + t as isize - radius, len);
                acc += k * (src[base + idx * stride] - center);
            }
            dst[base + j * stride] = center + acc;
        }
    }
}

/// Separable Gaussian blur of a plane with reflect-101 borders.
pub fn gaussian_blur(plane: &Plane, cfg: &PriorConfig) -> Plane {
    let taps = gaussian_kernel(cfg.gaussian_sigma, cfg.kernel_radius);
    let (h, w) = (plane.height, plane.width);
    let mut horizontal = Plane::zeros(h, w);
    blur_axis(&plane.data, &mut horizontal.data, w, 1, h, w, &taps);
    let mut out = Plane::zeros(h, w);
    blur_axis(&horizontal.data, &mut out.data, h, w, w, 1, &taps);
    out
}

/// `|L - blur(L)|` on the patch luminance.
pub fn highpass(patch: &Image, cfg: &PriorConfig) -> Plane {
    let luminance = to_luminance(patch);
    let mut blurred = gaussian_blur(&luminance, cfg);
    for (b, &l) in blurred.data.iter_mut().zip(&luminance.data) {
        *b = math::abs(l - *b);
    }
    blurred
}

pub fn moire_score(patch: &Image, cfg: &PriorConfig) -> Result<MoireScore> {
    let colorfulness = colorfulness(patch)?;
    let frequency_mean = highpass(patch, cfg).mean();
    Ok(MoireScore {
        colorfulness,
        frequency_mean,
        score: colorfulness * frequency_mean,
    })
}

/// Scores every tile of `grid`, index-aligned with its tiles.
pub fn score_grid(image: &Image, grid: &PatchGrid, cfg: &PriorConfig) -> Result<Vec<MoireScore>> {
    grid.check_image(image)?;
    (0..grid.len())
        .map(|i| moire_score(&extract(image, grid, i)?, cfg))
        .collect()
}
