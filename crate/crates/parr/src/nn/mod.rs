//! Minimal dense feed-forward networks in f64.
//!
//! Hand-rolled on purpose: the refresh logic needs bit-reproducible forward
//! passes and exact gradients, and the networks involved are small enough
//! that a straightforward loop implementation is fast and auditable.
//!
//! Conventions:
//! - weights are row-major `(out_dim, in_dim)`: `weights[o * in_dim + i]`
//! - hidden layers use a leaky rectifier, `f(x) = x` for `x >= 0`,
//!   `slope * x` otherwise
//! - the final layer is linear when `final_layer_linear` is set

mod adam;
mod gradcheck;
mod io;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheck};
pub use io::{
    load_adam, load_params, load_params_file, save_adam, save_params, save_params_file,
};

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::distributions::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::rng;

/// Architecture of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    layer_sizes: Vec<usize>,
    activation_slope: f64,
    final_layer_linear: bool,
}

impl NetSpec {
    pub const DEFAULT_SLOPE: f64 = 0.01;

    pub fn new(
        layer_sizes: Vec<usize>,
        activation_slope: f64,
        final_layer_linear: bool,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "network needs at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(
                "all layer sizes must be >= 1".into(),
            ));
        }
        if !(activation_slope > 0.0 && activation_slope < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "activation slope must lie in (0,1), got {activation_slope}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation_slope,
            final_layer_linear,
        })
    }

    /// Standard Q-net/predictor shape: linear output head, default slope.
    pub fn with_linear_head(layer_sizes: Vec<usize>) -> Result<Self> {
        Self::new(layer_sizes, Self::DEFAULT_SLOPE, true)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation_slope(&self) -> f64 {
        self.activation_slope
    }

    pub fn final_layer_linear(&self) -> bool {
        self.final_layer_linear
    }

    /// Number of weight layers (one less than the size list).
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layer_dims(&self, layer: usize) -> (usize, usize) {
        (self.layer_sizes[layer], self.layer_sizes[layer + 1])
    }
}

/// Leaky rectifier.
#[inline]
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of the leaky rectifier at pre-activation `z` (1 at the kink).
#[inline]
fn leaky_grad(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Weights and biases of one dense layer; row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }
}

/// All parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    /// All-zero parameters with shapes taken from `spec`.
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = (0..spec.num_layers())
            .map(|l| {
                let (i, o) = spec.layer_dims(l);
                LayerParams::zeros(i, o)
            })
            .collect();
        Self { layers }
    }

    pub fn matches_spec(&self, spec: &NetSpec) -> bool {
        self.layers.len() == spec.num_layers()
            && self.layers.iter().enumerate().all(|(l, lp)| {
                let (i, o) = spec.layer_dims(l);
                lp.in_dim == i
                    && lp.out_dim == o
                    && lp.weights.len() == i * o
                    && lp.biases.len() == o
            })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Order-sensitive digest of every parameter bit; used by the
    /// frozen-weights and fixed-net invariants.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for l in &self.layers {
            l.in_dim.hash(&mut h);
            l.out_dim.hash(&mut h);
            for v in l.weights.iter().chain(&l.biases) {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Iterates over every parameter value.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }
}

/// Gradient of a scalar loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradSet {
    pub layers: Vec<LayerGrads>,
}

impl GradSet {
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = (0..spec.num_layers())
            .map(|l| {
                let (i, o) = spec.layer_dims(l);
                LayerGrads {
                    weights: vec![0.0; i * o],
                    biases: vec![0.0; o],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Adds `other` element-wise.
    pub fn accumulate(&mut self, other: &GradSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    /// Multiplies every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(&mut l.biases) {
                *v *= c;
            }
        }
    }
}

/// Deterministic fan-in-scaled uniform initialization; biases zero.
pub fn init_params(spec: &NetSpec, seed: u64) -> ParamSet {
    let mut rng = rng::seeded(seed);
    let layers = (0..spec.num_layers())
        .map(|l| {
            let (in_dim, out_dim) = spec.layer_dims(l);
            let limit = (6.0 / in_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let weights = (0..in_dim * out_dim)
                .map(|_| dist.sample(&mut rng))
                .collect();
            LayerParams {
                in_dim,
                out_dim,
                weights,
                biases: vec![0.0; out_dim],
            }
        })
        .collect();
    ParamSet { layers }
}

/// Per-layer activations recorded by [`forward`]; needed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l + 1]` is the
    /// post-activation output of layer `l`.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Full forward pass returning the output and the cache for backprop.
pub fn forward(params: &ParamSet, spec: &NetSpec, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != spec.input_width() {
        return Err(Error::ShapeMismatch {
            context: "forward input",
            expected: spec.input_width(),
            got: input.len(),
        });
    }
    if !params.matches_spec(spec) {
        return Err(Error::Contract(
            "parameter shapes do not match the network spec".into(),
        ));
    }

    let slope = spec.activation_slope();
    let n_layers = spec.num_layers();
    let mut activations = Vec::with_capacity(n_layers + 1);
    let mut pre = Vec::with_capacity(n_layers);
    activations.push(input.to_vec());

    for (l, layer) in params.layers.iter().enumerate() {
        let x = activations.last().unwrap();
        let mut z = vec![0.0; layer.out_dim];
        for o in 0..layer.out_dim {
            let row = o * layer.in_dim;
            let mut sum = layer.biases[o];
            for (i, &xi) in x.iter().enumerate() {
                sum += layer.weights[row + i] * xi;
            }
            z[o] = sum;
        }
        let last = l == n_layers - 1;
        let y = if last && spec.final_layer_linear() {
            z.clone()
        } else {
            z.iter().map(|&v| leaky(v, slope)).collect()
        };
        pre.push(z);
        activations.push(y);
    }

    let output = activations.last().unwrap().clone();
    Ok((output, ForwardCache { activations, pre }))
}

/// Forward pass when only the output is needed.
pub fn forward_value(params: &ParamSet, spec: &NetSpec, input: &[f64]) -> Result<Vec<f64>> {
    forward(params, spec, input).map(|(out, _)| out)
}

/// Exact backpropagation.
///
/// `output_grad` is the gradient of the scalar loss with respect to the
/// network output; the cache must come from a matching [`forward`] call.
pub fn backward(
    params: &ParamSet,
    spec: &NetSpec,
    cache: &ForwardCache,
    output_grad: &[f64],
) -> Result<GradSet> {
    let n_layers = spec.num_layers();
    if cache.activations.len() != n_layers + 1 || cache.pre.len() != n_layers {
        return Err(Error::Contract(
            "forward cache does not match the network spec".into(),
        ));
    }
    for (l, layer) in params.layers.iter().enumerate() {
        if cache.activations[l].len() != layer.in_dim || cache.pre[l].len() != layer.out_dim {
            return Err(Error::Contract(format!(
                "forward cache shape mismatch at layer {l}"
            )));
        }
    }
    if output_grad.len() != spec.output_width() {
        return Err(Error::ShapeMismatch {
            context: "backward output_grad",
            expected: spec.output_width(),
            got: output_grad.len(),
        });
    }

    let slope = spec.activation_slope();
    let mut grads = GradSet::zeros(spec);
    // Gradient flowing into the post-activation output of the current layer.
    let mut d_out = output_grad.to_vec();

    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let x = &cache.activations[l];
        let z = &cache.pre[l];
        let last = l == n_layers - 1;

        // d_z = d_out * activation'(z)
        let d_z: Vec<f64> = if last && spec.final_layer_linear() {
            d_out.clone()
        } else {
            d_out
                .iter()
                .zip(z)
                .map(|(&g, &zi)| g * leaky_grad(zi, slope))
                .collect()
        };

        let lg = &mut grads.layers[l];
        let mut d_in = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            let row = o * layer.in_dim;
            let dz = d_z[o];
            lg.biases[o] = dz;
            for (i, &xi) in x.iter().enumerate() {
                lg.weights[row + i] = dz * xi;
                d_in[i] += layer.weights[row + i] * dz;
            }
        }
        d_out = d_in;
    }

    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sizes: &[usize]) -> NetSpec {
        NetSpec::with_linear_head(sizes.to_vec()).unwrap()
    }

    #[test]
    fn spec_rejects_bad_shapes() {
        assert!(NetSpec::new(vec![3], 0.01, true).is_err());
        assert!(NetSpec::new(vec![3, 0], 0.01, true).is_err());
        assert!(NetSpec::new(vec![3, 2], 0.0, true).is_err());
        assert!(NetSpec::new(vec![3, 2], 1.0, true).is_err());
        assert!(NetSpec::new(vec![3, 2], 0.2, true).is_ok());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let s = spec(&[2, 3, 1]);
        let a = init_params(&s, 7);
        let b = init_params(&s, 7);
        assert_eq!(a, b);
        let c = init_params(&s, 8);
        assert!(
            a.layers
                .iter()
                .zip(&c.layers)
                .any(|(x, y)| x.weights != y.weights),
            "different seeds must differ somewhere"
        );
    }

    #[test]
    fn init_biases_are_zero_and_weights_bounded() {
        let s = spec(&[4, 6, 2]);
        let p = init_params(&s, 123);
        for (l, layer) in p.layers.iter().enumerate() {
            assert!(layer.biases.iter().all(|&b| b == 0.0));
            let limit = (6.0 / s.layer_sizes()[l] as f64).sqrt();
            assert!(layer.weights.iter().all(|&w| w.abs() <= limit));
        }
    }

    #[test]
    fn forward_zero_net_is_zero() {
        let s = spec(&[3, 4, 2]);
        let p = ParamSet::zeros(&s);
        let (out, _) = forward(&p, &s, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_identity_single_layer() {
        let s = spec(&[3, 3]);
        let mut p = ParamSet::zeros(&s);
        for i in 0..3 {
            p.layers[0].weights[i * 3 + i] = 1.0;
        }
        let v = [0.25, -1.5, 3.0];
        let (out, _) = forward(&p, &s, &v).unwrap();
        assert_eq!(out, v.to_vec());
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 2-2-1 net, slope 0.1, linear head.
        // Hidden: z1 = 0.5*1 + (-1.0)*2 + 0.1 = -1.4 -> 0.1*-1.4 = -0.14
        //         z2 = 0.25*1 + 0.5*2 + (-0.2) = 1.05 -> 1.05
        // Out:    z  = 2.0*(-0.14) + (-0.5)*1.05 + 0.3 = -0.505
        let s = NetSpec::new(vec![2, 2, 1], 0.1, true).unwrap();
        let mut p = ParamSet::zeros(&s);
        p.layers[0].weights = vec![0.5, -1.0, 0.25, 0.5];
        p.layers[0].biases = vec![0.1, -0.2];
        p.layers[1].weights = vec![2.0, -0.5];
        p.layers[1].biases = vec![0.3];
        let (out, _) = forward(&p, &s, &[1.0, 2.0]).unwrap();
        assert!((out[0] - (-0.505)).abs() < 1e-12, "got {}", out[0]);
    }

    #[test]
    fn forward_rejects_bad_input_width() {
        let s = spec(&[3, 2]);
        let p = ParamSet::zeros(&s);
        assert!(matches!(
            forward(&p, &s, &[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn backward_zero_output_grad_gives_zero_grads() {
        let s = spec(&[3, 5, 2]);
        let p = init_params(&s, 11);
        let (_, cache) = forward(&p, &s, &[0.1, 0.2, 0.3]).unwrap();
        let g = backward(&p, &s, &cache, &[0.0, 0.0]).unwrap();
        for l in &g.layers {
            assert!(l.weights.iter().all(|&v| v == 0.0));
            assert!(l.biases.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_is_linear_in_output_grad() {
        let s = spec(&[3, 5, 2]);
        let p = init_params(&s, 19);
        let (_, cache) = forward(&p, &s, &[0.4, -0.2, 0.9]).unwrap();
        let g1 = backward(&p, &s, &cache, &[0.3, -0.7]).unwrap();
        let g2 = backward(&p, &s, &cache, &[0.6, -1.4]).unwrap();
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert!((2.0 * x - y).abs() < 1e-15);
            }
            for (x, y) in a.biases.iter().zip(&b.biases) {
                assert!((2.0 * x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let s1 = spec(&[3, 5, 2]);
        let s2 = spec(&[3, 4, 2]);
        let p1 = init_params(&s1, 1);
        let p2 = init_params(&s2, 1);
        let (_, cache) = forward(&p2, &s2, &[0.1, 0.2, 0.3]).unwrap();
        assert!(backward(&p1, &s1, &cache, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn leaky_is_monotone_and_piecewise() {
        let slope = 0.01;
        for &x in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
            if x >= 0.0 {
                assert_eq!(leaky(x, slope), x);
            } else {
                assert_eq!(leaky(x, slope), slope * x);
            }
        }
        let pts: Vec<f64> = (-20..=20).map(|i| i as f64 / 4.0).collect();
        for w in pts.windows(2) {
            assert!(leaky(w[0], slope) < leaky(w[1], slope));
        }
    }

    #[test]
    fn checksum_tracks_parameter_bits() {
        let s = spec(&[2, 3, 1]);
        let p = init_params(&s, 5);
        let c0 = p.checksum();
        assert_eq!(c0, p.clone().checksum());
        let mut q = p.clone();
        q.layers[0].weights[0] += 1e-9;
        assert_ne!(c0, q.checksum());
    }
}
