//! Central finite-difference verification of the analytic gradients.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::{backward, forward, init_params, NetSpec, ParamSet};

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub within_tolerance: bool,
}

/// Compares backprop against central finite differences over every
/// parameter of a randomly initialized net on a random input.
///
/// The loss is `0.5 * sum_k (y_k - t_k)^2` with a random fixed target `t`.
pub fn gradient_check(spec: &NetSpec, seed: u64, tolerance: f64) -> Result<GradCheck> {
    if !(tolerance > 0.0) {
        return Err(Error::Contract(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }

    let params = init_params(spec, seed);
    let mut data_rng = rng::seeded(rng::derive_seed(seed, 0xF1D));
    let input: Vec<f64> = (0..spec.input_width())
        .map(|_| data_rng.gen_range(-1.0..1.0))
        .collect();
    let target: Vec<f64> = (0..spec.output_width())
        .map(|_| data_rng.gen_range(-1.0..1.0))
        .collect();

    let loss = |p: &ParamSet| -> f64 {
        let (out, _) = forward(p, spec, &input).expect("shapes fixed by construction");
        0.5 * out
            .iter()
            .zip(&target)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
    };

    let (out, cache) = forward(&params, spec, &input)?;
    let output_grad: Vec<f64> = out.iter().zip(&target).map(|(y, t)| y - t).collect();
    let analytic = backward(&params, spec, &cache, &output_grad)?;

    let mut max_rel = 0.0f64;
    let mut probe = params.clone();
    for l in 0..probe.layers.len() {
        let n_w = probe.layers[l].weights.len();
        let n_b = probe.layers[l].biases.len();
        for idx in 0..n_w + n_b {
            let read = |p: &ParamSet| {
                if idx < n_w {
                    p.layers[l].weights[idx]
                } else {
                    p.layers[l].biases[idx - n_w]
                }
            };
            let write = |p: &mut ParamSet, v: f64| {
                if idx < n_w {
                    p.layers[l].weights[idx] = v;
                } else {
                    p.layers[l].biases[idx - n_w] = v;
                }
            };

            let orig = read(&probe);
            write(&mut probe, orig + FD_STEP);
            let plus = loss(&probe);
            write(&mut probe, orig - FD_STEP);
            let minus = loss(&probe);
            write(&mut probe, orig);

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = if idx < n_w {
                analytic.layers[l].weights[idx]
            } else {
                analytic.layers[l].biases[idx - n_w]
            };
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }

    Ok(GradCheck {
        max_rel_error: max_rel,
        within_tolerance: max_rel < tolerance,
    })
}
