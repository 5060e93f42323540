//! PSNR, SSIM and CIEDE2000 on `[0, 1]` sRGB images.

use alloc::vec::Vec;

use crate::error::Result;
use crate::image::{to_luminance, Image, Lab, Plane};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    /// `+inf` for identical images.
    pub psnr_db: f64,
    pub ssim: f64,
    pub delta_e: f64,
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum = math::compensated_sum(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)));
    Ok(sum / a.data().len() as f64)
}

/// Peak 1.0.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let err = mse(a, b)?;
    Ok(psnr_from_mse(err))
}

pub fn psnr_from_mse(err: f64) -> f64 {
    if err == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * math::log10(err)
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| math::exp(-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)))
        .collect();
    let total: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / total).collect();
    let mut window = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for &ty in &taps {
        for &tx in &taps {
            window.push(ty * tx);
        }
    }
    window
}

/// SSIM of one window given weighted first and second moments.
pub fn ssim_from_moments(mu_x: f64, mu_y: f64, var_x: f64, var_y: f64, cov: f64) -> f64 {
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
        / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
}

fn window_ssim(x: &Plane, y: &Plane, row: usize, col: usize, weights: &[f64], size: (usize, usize)) -> f64 {
    let (wh, ww) = size;
    let (mut mx, mut my) = (0.0, 0.0);
    for r in 0..wh {
        for c in 0..ww {
            let w = weights[r * ww + c];
            mx += w * x.at(row + r, col + c);
            my += w * y.at(row + r, col + c);
        }
    }
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for r in 0..wh {
        for c in 0..ww {
            let w = weights[r * ww + c];
            let dx = x.at(row + r, col + c) - mx;
            let dy = y.at(row + r, col + c) - my;
            vx += w * dx * dx;
            vy += w * dy * dy;
            cov += w * dx * dy;
        }
    }
    ssim_from_moments(mx, my, vx, vy, cov)
}

/// Single-scale SSIM on luminance: 11x11 Gaussian window (sigma 1.5),
/// averaged over all fully-inside window positions. Images smaller than the
/// window fall back to one uniform window covering the whole image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let x = to_luminance(a);
    let y = to_luminance(b);
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        let n = (h * w) as f64;
        let uniform: Vec<f64> = core::iter::repeat_n(1.0 / n, h * w).collect();
        return Ok(window_ssim(&x, &y, 0, 0, &uniform, (h, w)));
    }
    let window = ssim_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for row in 0..=h - SSIM_WINDOW {
        for col in 0..=w - SSIM_WINDOW {
            total += window_ssim(&x, &y, row, col, &window, (SSIM_WINDOW, SSIM_WINDOW));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// CIEDE2000 color difference with `kL = kC = kH = 1`.
pub fn ciede2000(lab1: Lab, lab2: Lab) -> f64 {
    let deg = |r: f64| r * 180.0 / math::PI;
    let rad = |d: f64| d * math::PI / 180.0;
    let pow7 = |x: f64| {
        let x2 = x * x;
        x2 * x2 * x2 * x
    };
    let twenty_five_7 = 6_103_515_625.0; // 25^7

    let c1 = math::sqrt(lab1.a * lab1.a + lab1.b * lab1.b);
    let c2 = math::sqrt(lab2.a * lab2.a + lab2.b * lab2.b);
    let c_bar = 0.5 * (c1 + c2);
    let g = 0.5 * (1.0 - math::sqrt(pow7(c_bar) / (pow7(c_bar) + twenty_five_7)));

    let a1p = (1.0 + g) * lab1.a;
    let a2p = (1.0 + g) * lab2.a;
    let c1p = math::sqrt(a1p * a1p + lab1.b * lab1.b);
    let c2p = math::sqrt(a2p * a2p + lab2.b * lab2.b);

    let hue = |b: f64, ap: f64| {
        if b == 0.0 && ap == 0.0 {
            0.0
        } else {
            let h = deg(math::atan2(b, ap));
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(lab1.b, a1p);
    let h2p = hue(lab2.b, a2p);

    let dl = lab2.l - lab1.l;
    let dc = c2p - c1p;
    let chroma_product = c1p * c2p;
    let dh_angle = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh = 2.0 * math::sqrt(chroma_product) * math::sin(rad(dh_angle) / 2.0);

    let l_bar = 0.5 * (lab1.l + lab2.l);
    let cp_bar = 0.5 * (c1p + c2p);
    let hp_bar = if chroma_product == 0.0 {
        h1p + h2p
    } else if math::abs(h1p - h2p) <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * math::cos(rad(hp_bar - 30.0))
        + 0.24 * math::cos(rad(2.0 * hp_bar))
        + 0.32 * math::cos(rad(3.0 * hp_bar + 6.0))
        - 0.20 * math::cos(rad(4.0 * hp_bar - 63.0));
    let d_theta = 30.0 * math::exp(-((hp_bar - 275.0) / 25.0) * ((hp_bar - 275.0) / 25.0));
    let r_c = 2.0 * math::sqrt(pow7(cp_bar) / (pow7(cp_bar) + twenty_five_7));
    let l50 = (l_bar - 50.0) * (l_bar - 50.0);
    let s_l = 1.0 + 0.015 * l50 / math::sqrt(20.0 + l50);
    let s_c = 1.0 + 0.045 * cp_bar;
    let s_h = 1.0 + 0.015 * cp_bar * t;
    let r_t = -math::sin(rad(2.0 * d_theta)) * r_c;

    let tl = dl / s_l;
    let tc = dc / s_c;
    let th = dh / s_h;
    math::sqrt(tl * tl + tc * tc + th * th + r_t * tc * th)
}

/// Mean per-pixel CIEDE2000 after sRGB to Lab (D65).
pub fn delta_e_image(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = a
        .pixels()
        .zip(b.pixels())
        .map(|(p, q)| ciede2000(Lab::from_srgb(p), Lab::from_srgb(q)))
        .sum();
    Ok(total / a.pixel_count() as f64)
}

pub fn evaluate_pair(output: &Image, reference: &Image) -> Result<MetricResult> {
    Ok(MetricResult {
        psnr_db: psnr(output, reference)?,
        ssim: ssim(output, reference)?,
        delta_e: delta_e_image(output, reference)?,
    })
}
