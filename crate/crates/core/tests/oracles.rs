//! Independent oracles: dense loops and finite differences that share no
//! code with the optimized paths they check.

#![allow(clippy::needless_range_loop)]

use dda_core::image::{to_luminance, Lab};
use dda_core::metrics::{ciede2000, delta_e_image, ssim, ssim_from_moments};
use dda_core::nn::{self, SupernetSpec, SupernetWeights};
use dda_core::prior::{colorfulness, gaussian_kernel, highpass, reflect_101, PriorConfig};
use dda_core::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()])
}

/// Direct nested-loop forward pass over dense copies of the sliced weights.
fn naive_forward(weights: &SupernetWeights, width: f64, patch: &Image) -> Image {
    let spec = weights.spec();
    let k = spec.kernel_size();
    let pad = (k / 2) as isize;
    let (h, w) = (patch.height(), patch.width());
    let channels = spec.channels_at(width);
    // act[c][y][x]
    let mut act: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|c| (0..h).map(|y| (0..w).map(|x| patch.pixel(y, x)[c]).collect()).collect())
        .collect();
    for (l, &(c_in, c_out)) in channels.iter().enumerate() {
        let layer = &weights.layers()[l];
        // materialize the slice as its own dense tensor
        let kernel: Vec<Vec<Vec<f64>>> = (0..c_out)
            .map(|o| {
                (0..c_in)
                    .map(|i| (0..k * k).map(|t| layer.kernel[layer.kernel_index(o, i, t)]).collect())
                    .collect()
            })
            .collect();
        let mut next = vec![vec![vec![0.0; w]; h]; c_out];
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = layer.bias[o];
                    for i in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - pad;
                                let sx = x as isize + kx as isize - pad;
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                                    acc += kernel[o][i][ky * k + kx] * act[i][sy as usize][sx as usize];
                                }
                            }
                        }
                    }
                    next[o][y][x] = if l + 1 < channels.len() { acc.max(0.0) } else { acc };
                }
            }
        }
        act = next;
    }
    Image::from_fn(h, w, |y, x| {
        let mut px = [act[0][y][x], act[1][y][x], act[2][y][x]];
        if spec.residual() {
            let inp = patch.pixel(y, x);
            for c in 0..3 {
                px[c] += inp[c];
            }
        }
        px
    })
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn forward_matches_naive_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = SupernetSpec::new(3, 8, 3, true).unwrap();
    let mut weights = SupernetWeights::init(spec, 99);
    for l in weights.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
    }
    let patch = random_image(&mut rng, 8, 8);
    for &width in &[0.25, 0.5, 0.8, 1.0] {
        let fast = weights.slice(width).unwrap().forward(&patch);
        let slow = naive_forward(&weights, width, &patch);
        let err = max_rel_err(fast.data(), slow.data());
        assert!(err < 1e-12, "width {width}: {err}");
    }
    // odd sizes and a 5x5 kernel, including a 1x1 tile
    let spec = SupernetSpec::new(2, 5, 5, false).unwrap();
    let weights = SupernetWeights::init(spec, 3);
    for (h, w) in [(1, 1), (3, 7), (6, 2)] {
        let patch = random_image(&mut rng, h, w);
        let fast = weights.slice(0.6).unwrap().forward(&patch);
        let slow = naive_forward(&weights, 0.6, &patch);
        assert!(max_rel_err(fast.data(), slow.data()) < 1e-12, "{h}x{w}");
    }
}

#[test]
fn width_one_matches_materialized_full_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = SupernetSpec::new(4, 6, 3, true).unwrap();
    let weights = SupernetWeights::init(spec, 5);
    // A copy built layer by layer through the public surface.
    let mut copy = SupernetWeights::zeros(spec);
    for (dst, src) in copy.layers_mut().iter_mut().zip(weights.layers()) {
        dst.kernel.copy_from_slice(&src.kernel);
        dst.bias.copy_from_slice(&src.bias);
    }
    for _ in 0..5 {
        let patch = random_image(&mut rng, 9, 7);
        let a = weights.slice(1.0).unwrap().forward(&patch);
        let b = copy.forward_full(&patch);
        assert_eq!(a, b);
    }
}

/// Loss at the given parameter values, via forward + MSE.
fn loss_at(weights: &SupernetWeights, width: f64, x: &Image, t: &Image) -> f64 {
    let out = weights.slice(width).unwrap().forward(x);
    nn::loss(&out, t).unwrap()
}

/// Smallest |pre-activation| over all hidden units, from the naive oracle.
fn min_abs_preactivation(weights: &SupernetWeights, width: f64, patch: &Image) -> f64 {
    let spec = weights.spec();
    let k = spec.kernel_size();
    let pad = (k / 2) as isize;
    let (h, w) = (patch.height(), patch.width());
    let channels = spec.channels_at(width);
    let mut act: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..h * w).map(|p| patch.pixel(p / w, p % w)[c]).collect())
        .collect();
    let mut min = f64::INFINITY;
    for (l, &(c_in, c_out)) in channels.iter().enumerate().take(channels.len() - 1) {
        let layer = &weights.layers()[l];
        let mut next = vec![vec![0.0; h * w]; c_out];
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = layer.bias[o];
                    for i in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - pad;
                                let sx = x as isize + kx as isize - pad;
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                                    acc += layer.kernel[layer.kernel_index(o, i, ky * k + kx)]
                                        * act[i][sy as usize * w + sx as usize];
                                }
                            }
                        }
                    }
                    min = min.min(acc.abs());
                    next[o][y * w + x] = acc.max(0.0);
                }
            }
        }
        act = next;
    }
    min
}

fn gradient_check(spec: SupernetSpec, width: f64, size: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = SupernetWeights::init(spec, seed);
    for l in weights.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.05..0.05));
    }
    let x = random_image(&mut rng, size, size);
    let t = random_image(&mut rng, size, size);
    // Central differences are exact up to rounding for a piecewise-quadratic
    // loss only if no ReLU input sits within reach of the step.
    assert!(min_abs_preactivation(&weights, width, &x) > 1e-4);

    let (_, grads) = weights.slice(width).unwrap().backward(&x, &t).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (l, lg) in grads.layers.iter().enumerate() {
        let taps = spec.kernel_size() * spec.kernel_size();
        let mut params: Vec<(bool, usize, f64)> = Vec::new();
        for o in 0..lg.c_out {
            for i in 0..lg.c_in {
                for tap in 0..taps {
                    let full = weights.layers()[l].kernel_index(o, i, tap);
                    params.push((true, full, lg.kernel[(o * lg.c_in + i) * taps + tap]));
                }
            }
            params.push((false, o, lg.bias[o]));
        }
        for (is_kernel, idx, analytic) in params {
            let mut plus = weights.clone();
            let mut minus = weights.clone();
            if is_kernel {
                plus.layers_mut()[l].kernel[idx] += h;
                minus.layers_mut()[l].kernel[idx] -= h;
            } else {
                plus.layers_mut()[l].bias[idx] += h;
                minus.layers_mut()[l].bias[idx] -= h;
            }
            let numeric = (loss_at(&plus, width, &x, &t) - loss_at(&minus, width, &x, &t)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_small() {
    let spec = SupernetSpec::new(2, 4, 3, true).unwrap();
    let worst = gradient_check(spec, 1.0, 6, 21);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn gradients_match_finite_differences_sliced() {
    let spec = SupernetSpec::new(3, 8, 3, true).unwrap();
    let worst = gradient_check(spec, 0.5, 8, 22);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn gradients_outside_slice_never_move() {
    let spec = SupernetSpec::new(3, 8, 3, true).unwrap();
    let mut weights = SupernetWeights::init(spec, 1);
    let mut adam = nn::Adam::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let before = weights.clone();
    let x = random_image(&mut rng, 6, 6);
    let t = random_image(&mut rng, 6, 6);
    let (_, grads) = weights.slice(0.5).unwrap().backward(&x, &t).unwrap();
    dda_core::train::train_step(&mut weights, &mut adam, 0.5, &[(&x, &t)], 1e-2, &dda_core::Serial).unwrap();
    let view_channels = spec.channels_at(0.5);
    let mut moved = 0;
    for (l, (a, b)) in weights.layers().iter().zip(before.layers()).enumerate() {
        let (ci, co) = view_channels[l];
        let g = &grads.layers[l];
        for o in 0..a.c_out {
            for i in 0..a.c_in {
                for tap in 0..9 {
                    let idx = a.kernel_index(o, i, tap);
                    let changed = a.kernel[idx] != b.kernel[idx];
                    let live = o < co && i < ci && g.kernel[(o * ci + i) * 9 + tap] != 0.0;
                    assert_eq!(changed, live, "layer {l} o {o} i {i} tap {tap}");
                    moved += changed as usize;
                }
            }
            if o >= co {
                assert_eq!(a.bias[o].to_bits(), b.bias[o].to_bits());
            }
        }
    }
    assert!(moved > 0);
}

#[test]
fn stationary_point_has_zero_gradient() {
    let spec = SupernetSpec::new(3, 4, 3, true).unwrap();
    let weights = SupernetWeights::zeros(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_image(&mut rng, 5, 5);
    let (loss, grads) = weights.slice(1.0).unwrap().backward(&x, &x).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grads.max_abs(), 0.0);
}

/// Dense 2-D Gaussian with reflect-101 borders, straight from the definition.
fn dense_highpass(patch: &Image, sigma: f64, radius: usize) -> Vec<f64> {
    let lum = to_luminance(patch);
    let (h, w) = (lum.height, lum.width);
    let r = radius as isize;
    let g = |d: isize| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-r..=r).map(g).sum();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sy = reflect_101(y as isize + dy, h);
                    let sx = reflect_101(x as isize + dx, w);
                    acc += g(dy) * g(dx) / (norm * norm) * lum.at(sy, sx);
                }
            }
            out[y * w + x] = (lum.at(y, x) - acc).abs();
        }
    }
    out
}

#[test]
fn highpass_matches_dense_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = PriorConfig::default();
    for _ in 0..5 {
        let patch = random_image(&mut rng, 32, 32);
        let fast = highpass(&patch, &cfg);
        let slow = dense_highpass(&patch, 5.0, 15);
        assert!(max_rel_err(&fast.data, &slow) < 1e-5);
    }
    // impulse: full plane against the dense oracle, center against the taps
    let mut patch = Image::zeros(64, 64);
    patch.set_pixel(32, 32, [1.0, 1.0, 1.0]);
    let fast = highpass(&patch, &cfg);
    let slow = dense_highpass(&patch, 5.0, 15);
    assert!(max_rel_err(&fast.data, &slow) < 1e-9);
    let k = gaussian_kernel(5.0, 15);
    assert!((fast.at(32, 32) - (1.0 - k[15] * k[15])).abs() < 1e-12);
}

#[test]
fn colorfulness_brute_force() {
    // Two-pixel cloud {(1,0,0), (0,1,0)}, statistics evaluated by hand:
    // rg in {1,-1}, yb = 0.5 for both.
    let rg = [1.0f64, -1.0];
    let yb = [0.5f64, 0.5];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    };
    let expected = (var(&rg) + var(&yb)).sqrt() + 0.3 * (mean(&rg).powi(2) + mean(&yb).powi(2)).sqrt();
    let img = Image::from_fn(1, 2, |_, c| if c == 0 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] });
    assert!((colorfulness(&img).unwrap() - expected).abs() < 1e-15);
    assert!((expected - 1.15).abs() < 1e-15);
}

/// Published CIEDE2000 verification pairs: (L1, a1, b1, L2, a2, b2, dE00).
pub const CIEDE2000_PAIRS: [[f64; 7]; 34] = [
    [50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425],
    [50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615],
    [50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412],
    [50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669],
    [50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461],
    [50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065],
    [50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492],
    [50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977],
    [50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030],
    [50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000],
    [60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644],
    [63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];

#[test]
fn ciede2000_reference_set() {
    for (i, p) in CIEDE2000_PAIRS.iter().enumerate() {
        let x = Lab { l: p[0], a: p[1], b: p[2] };
        let y = Lab { l: p[3], a: p[4], b: p[5] };
        let d = ciede2000(x, y);
        assert!((d - p[6]).abs() < 1e-4, "pair {}: {d} vs {}", i + 1, p[6]);
        assert!((ciede2000(y, x) - d).abs() < 1e-12, "pair {} asymmetric", i + 1);
        assert_eq!(ciede2000(x, x), 0.0);
    }
}

#[test]
fn delta_e_matches_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_image(&mut rng, 9, 13);
    let b = random_image(&mut rng, 9, 13);
    let mut total = 0.0;
    for r in 0..9 {
        for c in 0..13 {
            total += ciede2000(Lab::from_srgb(a.pixel(r, c)), Lab::from_srgb(b.pixel(r, c)));
        }
    }
    assert!((delta_e_image(&a, &b).unwrap() - total / 117.0).abs() < 1e-9);
}

/// Brute-force windowed SSIM: every 11x11 window evaluated from scratch.
fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let (x, y) = (to_luminance(a), to_luminance(b));
    let g: Vec<f64> = (-5i32..=5).map(|d| (-(d * d) as f64 / (2.0 * 1.5 * 1.5)).exp()).collect();
    let s: f64 = g.iter().sum();
    let (h, w) = (a.height(), a.width());
    let mut total = 0.0;
    let mut count = 0.0;
    for r in 0..=h - 11 {
        for c in 0..=w - 11 {
            let mut m = [0.0; 5];
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j] / (s * s);
                    let (p, q) = (x.at(r + i, c + j), y.at(r + i, c + j));
                    m[0] += wt * p;
                    m[1] += wt * q;
                    m[2] += wt * p * p;
                    m[3] += wt * q * q;
                    m[4] += wt * p * q;
                }
            }
            let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
            let v = ((2.0 * m[0] * m[1] + c1) * (2.0 * (m[4] - m[0] * m[1]) + c2))
                / ((m[0] * m[0] + m[1] * m[1] + c1) * (m[2] - m[0] * m[0] + m[3] - m[1] * m[1] + c2));
            total += v;
            count += 1.0;
        }
    }
    total / count
}

#[test]
fn ssim_matches_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_image(&mut rng, 20, 17);
    let b = Image::from_fn(20, 17, |r, c| {
        let p = a.pixel(r, c);
        [p[0] * 0.8 + 0.1, p[1], (p[2] + 0.2).min(1.0)]
    });
    assert!((ssim(&a, &b).unwrap() - ssim_oracle(&a, &b)).abs() < 1e-9);

    // constant a vs a + 0.5: structure term is C2/C2
    let a = Image::filled(16, 16, [0.2, 0.3, 0.1]);
    let b = Image::filled(16, 16, [0.7, 0.8, 0.6]);
    let (mx, my) = (to_luminance(&a).at(0, 0), to_luminance(&b).at(0, 0));
    let closed = ssim_from_moments(mx, my, 0.0, 0.0, 0.0);
    assert!((ssim(&a, &b).unwrap() - closed).abs() < 1e-12);
    assert!((ssim_oracle(&a, &b) - closed).abs() < 1e-9);
    assert!(closed < 1.0);
}

#[test]
fn ssim_drops_with_noise_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let base = dda_core::synth::gen_clean(3, 48, 48);
    let noise: Vec<f64> = (0..48 * 48 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut last = 1.0;
    for step in 1..=10 {
        let amp = 0.02 * step as f64;
        let data = base.data().iter().zip(&noise).map(|(v, n)| v + amp * n).collect();
        let noisy = Image::new(48, 48, data).unwrap();
        let s = ssim(&base, &noisy).unwrap();
        assert!(s < last, "amplitude {amp}: {s} >= {last}");
        last = s;
    }
}
