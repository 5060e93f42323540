use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, SupernetWeights};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    kernel: Vec<f64>,
    bias: Vec<f64>,
}

/// Adam with full-shaped moment buffers shared by every width.
///
/// An update at width `w` touches only the slice-`w` entries of the moments
/// and of the weights; everything else keeps its previous bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Moments>,
    second: Vec<Moments>,
}

impl Adam {
    pub fn new(weights: &SupernetWeights) -> Self {
        let zeros: Vec<Moments> = weights
            .layers()
            .iter()
            .map(|l| Moments {
                kernel: vec![0.0; l.kernel.len()],
                bias: vec![0.0; l.bias.len()],
            })
            .collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, weights: &mut SupernetWeights, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as f64;
        let correction1 = 1.0 - math::pow(self.beta1, t);
        let correction2 = 1.0 - math::pow(self.beta2, t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let apply = |param: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *param -= lr * m_hat / (math::sqrt(v_hat) + eps);
        };

        for (l, lg) in grads.layers.iter().enumerate() {
            let layer = &mut weights.layers[l];
            let (first, second) = (&mut self.first[l], &mut self.second[l]);
            let taps = layer.kernel_size * layer.kernel_size;
            for o in 0..lg.c_out {
                for i in 0..lg.c_in {
                    let full = layer.kernel_index(o, i, 0);
                    let compact = (o * lg.c_in + i) * taps;
                    for t in 0..taps {
                        apply(
                            &mut layer.kernel[full + t],
                            &mut first.kernel[full + t],
                            &mut second.kernel[full + t],
                            lg.kernel[compact + t],
                        );
                    }
                }
                apply(
                    &mut layer.bias[o],
                    &mut first.bias[o],
                    &mut second.bias[o],
                    lg.bias[o],
                );
            }
        }
    }
}
