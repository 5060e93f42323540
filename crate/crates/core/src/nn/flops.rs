use alloc::vec::Vec;

use super::{SupernetSpec, IMAGE_CHANNELS};

/// One same-padded conv layer: a multiply and an add per MAC plus one add
/// per output for the bias.
pub fn conv_flops(h: usize, w: usize, c_in: usize, c_out: usize, kernel_size: usize) -> u64 {
    let hw = (h * w) as u64;
    let k2 = (kernel_size * kernel_size) as u64;
    2 * hw * c_in as u64 * c_out as u64 * k2 + hw * c_out as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerFlops {
    pub c_in: usize,
    pub c_out: usize,
    /// `2 h w c_in c_out k^2`
    pub multiply_add: u64,
    /// `h w c_out`
    pub bias: u64,
}

pub fn flops_breakdown(spec: &SupernetSpec, width: f64, h: usize, w: usize) -> Vec<LayerFlops> {
    let k2 = (spec.kernel_size() * spec.kernel_size()) as u64;
    let hw = (h * w) as u64;
    spec.channels_at(width)
        .into_iter()
        .map(|(c_in, c_out)| LayerFlops {
            c_in,
            c_out,
            multiply_add: 2 * hw * c_in as u64 * c_out as u64 * k2,
            bias: hw * c_out as u64,
        })
        .collect()
}

/// Forward-pass FLOPs of the width-`width` subnet on an `h x w` input,
/// including the residual add when the spec has one.
pub fn flops(spec: &SupernetSpec, width: f64, h: usize, w: usize) -> u64 {
    let layers: u64 = spec
        .channels_at(width)
        .into_iter()
        .map(|(c_in, c_out)| conv_flops(h, w, c_in, c_out, spec.kernel_size()))
        .sum();
    let residual = if spec.residual() {
        (h * w * IMAGE_CHANNELS) as u64
    } else {
        0
    };
    layers + residual
}
