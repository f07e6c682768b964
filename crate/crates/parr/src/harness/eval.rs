//! Greedy evaluation: fresh sticky-wrapped environments, epsilon forced to
//! zero, undiscounted returns. Takes the network by shared reference, so it
//! cannot disturb the training run it measures.

use crate::agent::greedy_action;
use crate::env::Environment;
use crate::error::Result;
use crate::nn::{NetSpec, ParamSet};
use crate::rng;

use super::config::EnvConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

impl EvalResult {
    /// True when every episode reached the success threshold.
    pub fn all_at_least(&self, threshold: f64) -> bool {
        self.returns.iter().all(|&r| r >= threshold)
    }
}

pub fn evaluate_greedy(
    params: &ParamSet,
    spec: &NetSpec,
    env_cfg: &EnvConfig,
    episodes: u32,
    episode_cap: u32,
    seed: u64,
) -> Result<EvalResult> {
    assert!(episodes >= 1, "need at least one evaluation episode");
    let mut env = env_cfg.build(rng::derive_seed(seed, 0xEE))?;
    let mut returns = Vec::with_capacity(episodes as usize);
    for ep in 0..episodes {
        let mut obs = env.reset(rng::derive_seed(seed, u64::from(ep)));
        let mut ret = 0.0;
        for _ in 0..episode_cap {
            let action = greedy_action(params, spec, &obs)?;
            let out = env.step(action)?;
            ret += out.reward;
            obs = out.next_obs;
            if out.terminal {
                break;
            }
        }
        returns.push(ret);
    }
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(EvalResult {
        mean_return,
        returns,
    })
}
