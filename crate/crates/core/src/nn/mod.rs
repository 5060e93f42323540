//! Slimmable residual CNN.
//!
//! One full-width parameter set holds every subnet: the width-`w` subnet of
//! a layer reads the first `c_in(w)` input channels of its first `c_out(w)`
//! filters, where hidden layers carry `max(1, round(w * base_channels))`
//! channels and the RGB input and output stay at 3 channels for every width.

mod adam;
mod conv;
mod flops;
mod format;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math;

pub use adam::Adam;
pub use flops::{conv_flops, flops, flops_breakdown, LayerFlops};
pub use format::{decode_weights, encode_weights, FORMAT_VERSION, MAGIC};

pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupernetSpec {
    num_layers: usize,
    base_channels: usize,
    kernel_size: usize,
    residual: bool,
}

impl SupernetSpec {
    pub fn new(num_layers: usize, base_channels: usize, kernel_size: usize, residual: bool) -> Result<Self> {
        if num_layers < 2 {
            return Err(Error::Spec("need at least 2 layers"));
        }
        if base_channels == 0 {
            return Err(Error::Spec("base channel count must be positive"));
        }
        if kernel_size.is_multiple_of(2) {
            return Err(Error::Spec("kernel size must be odd"));
        }
        Ok(Self {
            num_layers,
            base_channels,
            kernel_size,
            residual,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn base_channels(&self) -> usize {
        self.base_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    /// Hidden channel count of the width-`w` subnet.
    pub fn hidden_channels(&self, width: f64) -> usize {
        (math::round(width * self.base_channels as f64) as usize).max(1)
    }

    /// `(c_in, c_out)` of `layer` when hidden layers carry `hidden` channels.
    pub fn layer_channels(&self, layer: usize, hidden: usize) -> (usize, usize) {
        let c_in = if layer == 0 { IMAGE_CHANNELS } else { hidden };
        let c_out = if layer + 1 == self.num_layers {
            IMAGE_CHANNELS
        } else {
            hidden
        };
        (c_in, c_out)
    }

    pub fn channels_at(&self, width: f64) -> Vec<(usize, usize)> {
        let hidden = self.hidden_channels(width);
        (0..self.num_layers)
            .map(|l| self.layer_channels(l, hidden))
            .collect()
    }
}

impl Default for SupernetSpec {
    fn default() -> Self {
        Self {
            num_layers: 6,
            base_channels: 32,
            kernel_size: 3,
            residual: true,
        }
    }
}

pub(crate) fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width <= 1.0 {
        Ok(())
    } else {
        Err(Error::WidthRange(width))
    }
}

/// Per-group widths, smallest first.
///
/// Repeated widths are accepted so that a list like `{1, 1, 1}` can
/// reproduce the full-width baseline through the routed path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct WidthList(Vec<f64>);

impl WidthList {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::EmptyWidths);
        }
        for &w in &widths {
            check_width(w)?;
        }
        if widths.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::WidthOrder);
        }
        Ok(Self(widths))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.0.windows(2).all(|p| p[0] < p[1])
    }
}

impl Default for WidthList {
    fn default() -> Self {
        Self(vec![0.25, 0.5, 0.75])
    }
}

impl TryFrom<Vec<f64>> for WidthList {
    type Error = Error;

    fn try_from(widths: Vec<f64>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<WidthList> for Vec<f64> {
    fn from(w: WidthList) -> Self {
        w.0
    }
}

/// Full-width convolution parameters, kernel laid out `[c_out, c_in, k, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub c_out: usize,
    pub c_in: usize,
    pub kernel_size: usize,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(c_in: usize, c_out: usize, kernel_size: usize) -> Self {
        Self {
            c_out,
            c_in,
            kernel_size,
            kernel: vec![0.0; c_out * c_in * kernel_size * kernel_size],
            bias: vec![0.0; c_out],
        }
    }

    /// Flat offset of `kernel[o][i][tap]`.
    #[inline]
    pub fn kernel_index(&self, o: usize, i: usize, tap: usize) -> usize {
        let taps = self.kernel_size * self.kernel_size;
        (o * self.c_in + i) * taps + tap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupernetWeights {
    spec: SupernetSpec,
    layers: Vec<ConvLayer>,
}

impl SupernetWeights {
    pub fn zeros(spec: SupernetSpec) -> Self {
        let layers = spec
            .channels_at(1.0)
            .into_iter()
            .map(|(c_in, c_out)| ConvLayer::zeros(c_in, c_out, spec.kernel_size))
            .collect();
        Self { spec, layers }
    }

    /// He-uniform kernels (`|w| <= sqrt(6 / (c_in k^2))`), zero biases.
    pub fn init(spec: SupernetSpec, seed: u64) -> Self {
        let mut weights = Self::zeros(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut weights.layers {
            let fan_in = (layer.c_in * layer.kernel_size * layer.kernel_size) as f64;
            let bound = math::sqrt(6.0 / fan_in);
            for w in &mut layer.kernel {
                *w = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        weights
    }

    pub(crate) fn from_layers(spec: SupernetSpec, layers: Vec<ConvLayer>) -> Self {
        Self { spec, layers }
    }

    pub fn spec(&self) -> &SupernetSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernel.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.kernel.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Width-`w` subnet aliasing the leading channels of every layer.
    pub fn slice(&self, width: f64) -> Result<SubnetView<'_>> {
        check_width(width)?;
        Ok(SubnetView {
            weights: self,
            width,
            channels: self.spec.channels_at(width),
        })
    }

    /// Forward pass over the unsliced layer shapes.
    pub fn forward_full(&self, patch: &Image) -> Image {
        let channels: Vec<_> = self.layers.iter().map(|l| (l.c_in, l.c_out)).collect();
        conv::forward(self, &channels, patch)
    }
}

/// A width slice of a [`SupernetWeights`]. Holds channel counts only.
#[derive(Debug, Clone)]
pub struct SubnetView<'a> {
    weights: &'a SupernetWeights,
    width: f64,
    channels: Vec<(usize, usize)>,
}

impl<'a> SubnetView<'a> {
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn weights(&self) -> &'a SupernetWeights {
        self.weights
    }

    /// `(c_in, c_out)` per layer.
    pub fn channels(&self) -> &[(usize, usize)] {
        &self.channels
    }

    pub fn param_count(&self) -> usize {
        let k2 = self.weights.spec.kernel_size * self.weights.spec.kernel_size;
        self.channels.iter().map(|&(i, o)| o * i * k2 + o).sum()
    }

    /// Same-size output; with a residual spec the input is added back. The
    /// result is not clamped.
    pub fn forward(&self, patch: &Image) -> Image {
        conv::forward(self.weights, &self.channels, patch)
    }

    /// Loss and exact gradients for every parameter inside the slice.
    pub fn backward(&self, patch: &Image, target: &Image) -> Result<(f64, Gradients)> {
        patch.check_same_dims(target)?;
        Ok(conv::backward(self.weights, &self.channels, self.width, patch, target))
    }
}

/// Mean squared error over every sample.
pub fn loss(output: &Image, target: &Image) -> Result<f64> {
    output.check_same_dims(target)?;
    if output.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / output.data().len() as f64)
}

/// Gradients of one sliced layer, compact `[c_out, c_in, k, k]` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub c_out: usize,
    pub c_in: usize,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub width: f64,
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros(view: &SubnetView<'_>) -> Self {
        let k2 = view.weights.spec.kernel_size * view.weights.spec.kernel_size;
        Self {
            width: view.width,
            layers: view
                .channels
                .iter()
                .map(|&(c_in, c_out)| LayerGradients {
                    c_out,
                    c_in,
                    kernel: vec![0.0; c_out * c_in * k2],
                    bias: vec![0.0; c_out],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.kernel.iter_mut().zip(&b.kernel).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.kernel.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.kernel.iter().chain(&l.bias))
            .fold(0.0, |m, &v| m.max(math::abs(v)))
    }
}
