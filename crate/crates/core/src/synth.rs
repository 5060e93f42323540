//! Deterministic synthetic (clean, moiré) pairs.
//!
//! Clean content is smooth: gradients, low-frequency texture and a few flat
//! rectangles. Moiré is the product of two cosine gratings with a per-channel
//! phase on the first one, which gives colored beat stripes.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;
use crate::math::{self, PI};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Coverage {
    Full,
    /// Left half of the image.
    Half,
    /// Union of a few random discs.
    Blob { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoireParams {
    /// Cycles per pixel, in `(0, 0.5]`.
    pub f1: f64,
    pub f2: f64,
    /// Radians.
    pub theta1: f64,
    pub theta2: f64,
    /// In `[0, 0.5]`.
    pub amplitude: f64,
    /// Per-channel phase of the first grating, radians.
    pub phases: [f64; 3],
    pub coverage: Coverage,
}

impl Default for MoireParams {
    fn default() -> Self {
        Self {
            f1: 0.3,
            f2: 0.05,
            theta1: 0.4,
            theta2: 1.3,
            amplitude: 0.2,
            phases: [0.0, 2.1, 4.2],
            coverage: Coverage::Full,
        }
    }
}

impl MoireParams {
    pub fn is_valid(&self) -> bool {
        let freq_ok = |f: f64| f > 0.0 && f <= 0.5;
        freq_ok(self.f1) && freq_ok(self.f2) && (0.0..=0.5).contains(&self.amplitude)
    }

    /// Colored moiré with amplitude in `[lo, hi]`.
    pub fn random(rng: &mut impl Rng, amplitude: (f64, f64)) -> Self {
        let coverage = match rng.random_range(0..10) {
            0..=5 => Coverage::Full,
            6 | 7 => Coverage::Half,
            _ => Coverage::Blob { seed: rng.random() },
        };
        Self {
            f1: rng.random_range(0.12..0.45),
            f2: rng.random_range(0.02..0.12),
            theta1: rng.random_range(0.0..PI),
            theta2: rng.random_range(0.0..PI),
            amplitude: rng.random_range(amplitude.0..=amplitude.1),
            phases: [0.0, rng.random_range(0.5..2.5), rng.random_range(3.0..5.5)],
            coverage,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Procedural smooth content in `[0, 1]`, fully determined by `seed`.
pub fn gen_clean(seed: u64, h: usize, w: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = core::array::from_fn(|_| uniform(&mut rng, 0.25, 0.75));
    let grad_x: [f64; 3] = core::array::from_fn(|_| uniform(&mut rng, -0.2, 0.2));
    let grad_y: [f64; 3] = core::array::from_fn(|_| uniform(&mut rng, -0.2, 0.2));

    struct Wave {
        fx: f64,
        fy: f64,
        phase: f64,
        amp: [f64; 3],
    }
    let waves: Vec<Wave> = (0..3)
        .map(|_| {
            let f = uniform(&mut rng, 0.004, 0.03);
            let angle = uniform(&mut rng, 0.0, PI);
            Wave {
                fx: f * math::cos(angle),
                fy: f * math::sin(angle),
                phase: uniform(&mut rng, 0.0, 2.0 * PI),
                amp: core::array::from_fn(|_| uniform(&mut rng, 0.0, 0.06)),
            }
        })
        .collect();

    struct Rect {
        r0: f64,
        c0: f64,
        r1: f64,
        c1: f64,
        color: [f64; 3],
    }
    let rects: Vec<Rect> = (0..rng.random_range(0..3))
        .map(|_| {
            let (r0, c0) = (uniform(&mut rng, 0.0, 0.8), uniform(&mut rng, 0.0, 0.8));
            Rect {
                r0,
                c0,
                r1: r0 + uniform(&mut rng, 0.15, 0.5),
                c1: c0 + uniform(&mut rng, 0.15, 0.5),
                color: core::array::from_fn(|_| uniform(&mut rng, 0.15, 0.85)),
            }
        })
        .collect();

    let (hf, wf) = (h.max(1) as f64, w.max(1) as f64);
    Image::from_fn(h, w, |r, c| {
        let (y, x) = (r as f64 / hf, c as f64 / wf);
        if let Some(rect) = rects
            .iter()
            .rev()
            .find(|q| y >= q.r0 && y < q.r1 && x >= q.c0 && x < q.c1)
        {
            return rect.color;
        }
        core::array::from_fn(|ch| {
            let mut v = base[ch] + grad_x[ch] * (x - 0.5) + grad_y[ch] * (y - 0.5);
            for wave in &waves {
                v += wave.amp[ch] * math::cos(2.0 * PI * (wave.fx * c as f64 + wave.fy * r as f64) + wave.phase);
            }
            v.clamp(0.0, 1.0)
        })
    })
}

fn coverage_mask(coverage: Coverage, h: usize, w: usize) -> Vec<bool> {
    match coverage {
        Coverage::Full => alloc::vec![true; h * w],
        Coverage::Half => (0..h * w).map(|i| (i % w.max(1)) < w.div_ceil(2)).collect(),
        Coverage::Blob { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = h.min(w).max(1) as f64;
            let discs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..4))
                .map(|_| {
                    (
                        uniform(&mut rng, 0.0, h as f64),
                        uniform(&mut rng, 0.0, w as f64),
                        uniform(&mut rng, 0.2, 0.45) * scale,
                    )
                })
                .collect();
            (0..h * w)
                .map(|i| {
                    let (r, c) = ((i / w) as f64, (i % w) as f64);
                    discs
                        .iter()
                        .any(|&(dr, dc, rad)| (r - dr) * (r - dr) + (c - dc) * (c - dc) <= rad * rad)
                })
                .collect()
        }
    }
}

/// Adds `A cos(2 pi f1 (x cos t1 + y sin t1) + phi_c) cos(2 pi f2 (x cos t2 + y sin t2))`
/// to channel `c` inside the coverage mask, then clamps to `[0, 1]`.
pub fn overlay_moire(clean: &Image, params: &MoireParams) -> Image {
    if params.amplitude == 0.0 {
        return clean.clone();
    }
    let (h, w) = (clean.height(), clean.width());
    let mask = coverage_mask(params.coverage, h, w);
    let (c1, s1) = (math::cos(params.theta1), math::sin(params.theta1));
    let (c2, s2) = (math::cos(params.theta2), math::sin(params.theta2));
    let mut out = clean.clone();
    for r in 0..h {
        for c in 0..w {
            if !mask[r * w + c] {
                continue;
            }
            let (x, y) = (c as f64, r as f64);
            let carrier = 2.0 * PI * params.f1 * (x * c1 + y * s1);
            let envelope = math::cos(2.0 * PI * params.f2 * (x * c2 + y * s2));
            let mut px = clean.pixel(r, c);
            for (ch, v) in px.iter_mut().enumerate() {
                *v = (*v + params.amplitude * math::cos(carrier + params.phases[ch]) * envelope).clamp(0.0, 1.0);
            }
            out.set_pixel(r, c, px);
        }
    }
    out
}

/// Fraction of pairs left free of moiré.
pub const MOIRE_FREE_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub clean: Image,
    pub moire: Image,
    pub params: MoireParams,
}

/// Pair `index` of the dataset seeded by `seed`. Each index draws from its
/// own derived seed, so pairs can be generated in any order or in parallel.
pub fn gen_pair(seed: u64, index: u64, h: usize, w: usize) -> SynthPair {
    let pair_seed = math::mix_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
    let clean = gen_clean(rng.random(), h, w);
    let mut params = MoireParams::random(&mut rng, (0.1, 0.3));
    if rng.random::<f64>() < MOIRE_FREE_RATE {
        params.amplitude = 0.0;
    }
    let moire = overlay_moire(&clean, &params);
    SynthPair {
        clean,
        moire,
        params,
    }
}
