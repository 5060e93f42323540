//! Same-padded stride-1 convolution via im2col and strided GEMM.
//!
//! Sliced weights are addressed in place: the leading `c_out x c_in*k*k`
//! block of a layer's `[c_out, c_in*k*k]` kernel matrix is passed to the GEMM
//! with the full row stride, so no parameter is ever copied.

use alloc::vec;
use alloc::vec::Vec;

use super::{ConvLayer, Gradients, LayerGradients, SupernetWeights, IMAGE_CHANNELS};
use crate::image::Image;

/// `c = a * b + beta * c` over strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(extent(m, n, rsc, csc) < c.len());
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                c[i * rsc + j * csc] *= beta;
            }
        }
        return;
    }
    assert!(extent(m, k, rsa, csa) < a.len());
    assert!(extent(k, n, rsb, csb) < b.len());
    // SAFETY: every index the kernel touches lies inside the slices, checked
    // by the extent asserts above; `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Column matrix `[c_in * k * k, h * w]` of zero-padded receptive fields.
fn im2col(input: &[f64], c_in: usize, h: usize, w: usize, k: usize, cols: &mut Vec<f64>) {
    let hw = h * w;
    let pad = (k / 2) as isize;
    cols.clear();
    cols.resize(c_in * k * k * hw, 0.0);
    for ci in 0..c_in {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let sx_lo = (x_lo as isize + dx) as usize;
                    dst[y * w + x_lo..y * w + x_hi]
                        .copy_from_slice(&src_row[sx_lo..sx_lo + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Scatter-adds a column-gradient matrix back onto the input planes.
fn col2im(cols: &[f64], c_in: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let hw = h * w;
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; c_in * hw];
    for ci in 0..c_in {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                let dx = kx as isize - pad;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sx_lo = (x_lo as isize + dx) as usize;
                    let dst_row = &mut plane[sy as usize * w + sx_lo..sy as usize * w + sx_lo + (x_hi - x_lo)];
                    for (d, s) in dst_row.iter_mut().zip(&src[y * w + x_lo..y * w + x_hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
    out
}

fn conv_layer(layer: &ConvLayer, c_in: usize, c_out: usize, cols: &[f64], hw: usize) -> Vec<f64> {
    let k2 = layer.kernel_size * layer.kernel_size;
    let mut out = Vec::with_capacity(c_out * hw);
    for &b in &layer.bias[..c_out] {
        out.extend(core::iter::repeat_n(b, hw));
    }
    gemm(
        c_out,
        c_in * k2,
        hw,
        &layer.kernel,
        (layer.c_in * k2, 1),
        cols,
        (hw, 1),
        1.0,
        &mut out,
        (hw, 1),
    );
    out
}

pub(crate) fn image_to_planes(image: &Image) -> Vec<f64> {
    let hw = image.pixel_count();
    let mut planes = vec![0.0; IMAGE_CHANNELS * hw];
    for (p, px) in image.data().chunks_exact(3).enumerate() {
        for c in 0..IMAGE_CHANNELS {
            planes[c * hw + p] = px[c];
        }
    }
    planes
}

fn planes_to_image(planes: &[f64], h: usize, w: usize) -> Image {
    let hw = h * w;
    let mut data = Vec::with_capacity(hw * 3);
    for p in 0..hw {
        for c in 0..IMAGE_CHANNELS {
            data.push(planes[c * hw + p]);
        }
    }
    Image::new(h, w, data).expect("plane buffer sized for the image")
}

fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

pub(crate) fn forward(weights: &SupernetWeights, channels: &[(usize, usize)], patch: &Image) -> Image {
    let (h, w) = (patch.height(), patch.width());
    let hw = h * w;
    let k = weights.spec.kernel_size;
    let last = channels.len() - 1;
    let mut act = image_to_planes(patch);
    let mut cols = Vec::new();
    for (l, (layer, &(c_in, c_out))) in weights.layers.iter().zip(channels).enumerate() {
        im2col(&act, c_in, h, w, k, &mut cols);
        act = conv_layer(layer, c_in, c_out, &cols, hw);
        if l != last {
            relu_in_place(&mut act);
        }
    }
    if weights.spec.residual {
        let input = image_to_planes(patch);
        act.iter_mut().zip(&input).for_each(|(o, i)| *o += i);
    }
    planes_to_image(&act, h, w)
}

pub(crate) fn backward(
    weights: &SupernetWeights,
    channels: &[(usize, usize)],
    width: f64,
    patch: &Image,
    target: &Image,
) -> (f64, Gradients) {
    let (h, w) = (patch.height(), patch.width());
    let hw = h * w;
    let k = weights.spec.kernel_size;
    let k2 = k * k;
    let last = channels.len() - 1;

    // Forward, keeping each layer's columns and pre-activations.
    let mut cols_per_layer = Vec::with_capacity(channels.len());
    let mut pre_per_layer = Vec::with_capacity(channels.len());
    let mut act = image_to_planes(patch);
    for (l, (layer, &(c_in, c_out))) in weights.layers.iter().zip(channels).enumerate() {
        let mut cols = Vec::new();
        im2col(&act, c_in, h, w, k, &mut cols);
        let pre = conv_layer(layer, c_in, c_out, &cols, hw);
        act = pre.clone();
        if l != last {
            relu_in_place(&mut act);
        }
        cols_per_layer.push(cols);
        pre_per_layer.push(pre);
    }
    let target_planes = image_to_planes(target);
    if weights.spec.residual {
        let input = image_to_planes(patch);
        act.iter_mut().zip(&input).for_each(|(o, i)| *o += i);
    }

    let n = (IMAGE_CHANNELS * hw) as f64;
    let mut sum_sq = 0.0;
    // dL/d(output); the residual add passes it straight through to the
    // last layer's pre-activation.
    let mut grad: Vec<f64> = act
        .iter()
        .zip(&target_planes)
        .map(|(o, t)| {
            let d = o - t;
            sum_sq += d * d;
            2.0 * d / n
        })
        .collect();
    let loss = if hw == 0 { 0.0 } else { sum_sq / n };

    let mut layer_grads = Vec::with_capacity(channels.len());
    for l in (0..channels.len()).rev() {
        let (c_in, c_out) = channels[l];
        let layer = &weights.layers[l];
        if l != last {
            for (g, &z) in grad.iter_mut().zip(&pre_per_layer[l]) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let cols = &cols_per_layer[l];
        let r = c_in * k2;

        let bias: Vec<f64> = if hw == 0 {
            vec![0.0; c_out]
        } else {
            grad.chunks_exact(hw).map(|g| g.iter().sum()).collect()
        };
        let mut kernel = vec![0.0; c_out * r];
        gemm(c_out, hw, r, &grad, (hw, 1), cols, (1, hw), 0.0, &mut kernel, (r, 1));

        if l > 0 {
            let mut dcols = vec![0.0; r * hw];
            gemm(
                r,
                c_out,
                hw,
                &layer.kernel,
                (1, layer.c_in * k2),
                &grad,
                (hw, 1),
                0.0,
                &mut dcols,
                (hw, 1),
            );
            grad = col2im(&dcols, c_in, h, w, k);
        }
        layer_grads.push(LayerGradients {
            c_out,
            c_in,
            kernel,
            bias,
        });
    }
    layer_grads.reverse();
    (
        loss,
        Gradients {
            width,
            layers: layer_grads,
        },
    )
}
