//! Random-network-distillation novelty.
//!
//! A fixed randomly initialized network and a trained predictor both map
//! normalized states to a K-dimensional embedding; novelty is the
//! prediction error divided by the replay-wide error standard deviation.
//! The predictor, the state normalizer, and the error scale are all
//! recomputed from scratch over the current replay at every refresh.

use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::{self, AdamConfig, AdamState, NetSpec, ParamSet};
use crate::replay::ReplayBuffer;
use crate::rng;
use crate::wire;

/// Per-feature normalization statistics fitted over a set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateNormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `std_floor`.
    pub std: Vec<f64>,
    pub count: usize,
}

/// Tunables for the novelty pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoveltyConfig {
    /// Shared embedding width K.
    pub output_width: usize,
    /// Hidden width of the fixed net (the predictor gets one extra layer).
    pub hidden_width: usize,
    /// Passes over the replay when retraining the predictor.
    pub epochs: u32,
    pub train_batch: usize,
    pub lr: f64,
    /// Normalized features are clamped to `[-clip, clip]`.
    pub clip: f64,
    pub std_floor: f64,
    pub sigma_floor: f64,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self {
            output_width: 32,
            hidden_width: 64,
            epochs: 2,
            train_batch: 64,
            lr: 1e-3,
            clip: 5.0,
            std_floor: 1e-6,
            sigma_floor: 1e-8,
        }
    }
}

/// Fixed net, predictor, normalization statistics, and the error scale σ.
#[derive(Debug, Clone)]
pub struct NoveltyPair {
    cfg: NoveltyConfig,
    fixed_spec: NetSpec,
    predictor_spec: NetSpec,
    fixed: ParamSet,
    predictor: ParamSet,
    norm: StateNormStats,
    /// Set by the first refresh; population std of raw errors.
    sigma: Option<f64>,
}

/// Audit data from one novelty refresh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyRefreshStats {
    pub sigma: f64,
    pub sigma_floored: bool,
    pub mean_raw_error: f64,
}

impl NoveltyPair {
    /// Builds the pair for `obs_width`-dimensional states. The fixed net is
    /// initialized once from `fixed_seed` and never changes afterwards.
    pub fn new(obs_width: usize, cfg: NoveltyConfig, fixed_seed: u64) -> Result<Self> {
        if obs_width == 0 || cfg.output_width == 0 || cfg.hidden_width == 0 {
            return Err(Error::InvalidConfig("novelty widths must be positive".into()));
        }
        if cfg.epochs == 0 || cfg.train_batch == 0 {
            return Err(Error::InvalidConfig("novelty epochs/batch must be positive".into()));
        }
        if !(cfg.clip > 0.0) || !(cfg.std_floor > 0.0) || !(cfg.sigma_floor > 0.0) {
            return Err(Error::InvalidConfig(
                "novelty clip/std_floor/sigma_floor must be positive".into(),
            ));
        }
        let fixed_spec =
            NetSpec::with_linear_head(vec![obs_width, cfg.hidden_width, cfg.output_width])?;
        // Predictor is one hidden layer deeper than the fixed net so that
        // matching the target is a learning problem, not a weight copy.
        let predictor_spec = NetSpec::with_linear_head(vec![
            obs_width,
            cfg.hidden_width,
            cfg.hidden_width,
            cfg.output_width,
        ])?;
        let fixed = nn::init_params(&fixed_spec, fixed_seed);
        let predictor = nn::init_params(&predictor_spec, rng::derive_seed(fixed_seed, 0x9A));
        Ok(Self {
            cfg,
            norm: StateNormStats {
                mean: vec![0.0; obs_width],
                std: vec![1.0; obs_width],
                count: 0,
            },
            fixed_spec,
            predictor_spec,
            fixed,
            predictor,
            sigma: None,
        })
    }

    pub fn config(&self) -> NoveltyConfig {
        self.cfg
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn norm(&self) -> &StateNormStats {
        &self.norm
    }

    pub fn fixed_checksum(&self) -> u64 {
        self.fixed.checksum()
    }

    pub fn predictor_checksum(&self) -> u64 {
        self.predictor.checksum()
    }

    /// Mean squared difference between the two nets on the normalized state.
    pub fn raw_error(&self, s: &Observation) -> Result<f64> {
        let x = normalize_state(&self.norm, s, self.cfg.clip)?;
        let target = nn::forward_value(&self.fixed, &self.fixed_spec, &x)?;
        let pred = nn::forward_value(&self.predictor, &self.predictor_spec, &x)?;
        let k = target.len() as f64;
        Ok(target
            .iter()
            .zip(&pred)
            .map(|(t, p)| (t - p) * (t - p))
            .sum::<f64>()
            / k)
    }

    /// Normalized novelty for a state seen between refreshes.
    ///
    /// Errors until the first refresh has set σ.
    pub fn novelty_for_new(&self, s: &Observation) -> Result<f64> {
        let sigma = self.sigma.ok_or_else(|| {
            Error::Contract("novelty requested before the first refresh set sigma".into())
        })?;
        Ok(self.raw_error(s)? / sigma)
    }

    /// Full novelty refresh over the replay.
    ///
    /// In order: refit the state normalizer on every stored `s_next`,
    /// re-initialize the predictor from `seed` and train it from scratch
    /// over those states, compute raw errors for every record, set σ to
    /// their population standard deviation (floored), and write
    /// `raw_error / σ` into each record.
    pub fn refresh(
        &mut self,
        buffer: &mut ReplayBuffer,
        seed: u64,
    ) -> Result<NoveltyRefreshStats> {
        if buffer.is_empty() {
            return Err(Error::Contract("cannot refresh novelty over an empty replay".into()));
        }
        let order = buffer.iterate_oldest_to_newest();
        let states: Vec<Observation> = order
            .iter()
            .map(|&i| buffer.record(i).map(|r| r.exp.s_next.clone()))
            .collect::<Result<_>>()?;

        // (1) normalizer refit
        self.norm = if states.len() >= 2 {
            fit_state_normalizer(&states, self.cfg.std_floor)?
        } else {
            // single record: degenerate fit, unit scale around the state
            StateNormStats {
                mean: states[0].features.clone(),
                std: vec![self.cfg.std_floor; states[0].width()],
                count: 1,
            }
        };
        let normalized: Vec<Vec<f64>> = states
            .iter()
            .map(|s| normalize_state(&self.norm, s, self.cfg.clip))
            .collect::<Result<_>>()?;

        // (2) predictor from scratch
        self.predictor = nn::init_params(&self.predictor_spec, seed);
        let mut opt = AdamState::new(&self.predictor_spec, AdamConfig::with_lr(self.cfg.lr));
        let mut shuffle_rng = rng::seeded(rng::derive_seed(seed, 0x5F));
        let mut index: Vec<usize> = (0..normalized.len()).collect();
        for _ in 0..self.cfg.epochs {
            index.shuffle(&mut shuffle_rng);
            for chunk in index.chunks(self.cfg.train_batch) {
                let mut grads = nn::GradSet::zeros(&self.predictor_spec);
                let scale = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    let x = &normalized[i];
                    let target = nn::forward_value(&self.fixed, &self.fixed_spec, x)?;
                    let (pred, cache) = nn::forward(&self.predictor, &self.predictor_spec, x)?;
                    let k = target.len() as f64;
                    // d/dpred of mean_k (pred - target)^2, averaged over batch
                    let out_grad: Vec<f64> = pred
                        .iter()
                        .zip(&target)
                        .map(|(p, t)| 2.0 * (p - t) / k * scale)
                        .collect();
                    let g = nn::backward(&self.predictor, &self.predictor_spec, &cache, &out_grad)?;
                    grads.accumulate(&g);
                }
                opt.apply(&mut self.predictor, &grads)?;
            }
        }

        // (3) raw errors, oldest to newest
        let errors: Vec<f64> = states
            .iter()
            .map(|s| self.raw_error(s))
            .collect::<Result<_>>()?;

        // (4) population standard deviation, floored
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let raw_sigma = var.sqrt();
        let sigma_floored = raw_sigma < self.cfg.sigma_floor;
        let sigma = raw_sigma.max(self.cfg.sigma_floor);
        self.sigma = Some(sigma);

        // (5) normalized novelties into the records
        for (&slot, err) in order.iter().zip(&errors) {
            let rec = buffer.record(slot)?;
            let (q, t, p) = (rec.q_pred, rec.target, rec.priority);
            buffer.rewrite_derived(slot, q, err / sigma, t, p)?;
        }

        Ok(NoveltyRefreshStats {
            sigma,
            sigma_floored,
            mean_raw_error: mean,
        })
    }

    pub fn save(&self, w: &mut dyn Write) -> Result<()> {
        nn::save_params(w, &self.fixed_spec, &self.fixed)?;
        nn::save_params(w, &self.predictor_spec, &self.predictor)?;
        wire::write_u64(w, self.norm.count as u64)?;
        wire::write_u64(w, self.norm.mean.len() as u64)?;
        wire::write_f64_slice(w, &self.norm.mean)?;
        wire::write_f64_slice(w, &self.norm.std)?;
        match self.sigma {
            Some(s) => {
                wire::write_bool(w, true)?;
                wire::write_f64(w, s)?;
            }
            None => wire::write_bool(w, false)?,
        }
        Ok(())
    }

    /// Restores the mutable parts saved by [`NoveltyPair::save`] into a pair
    /// built with the same configuration.
    pub fn restore(&mut self, r: &mut dyn Read) -> Result<()> {
        let (fixed_spec, fixed) = nn::load_params(r)?;
        let (predictor_spec, predictor) = nn::load_params(r)?;
        if fixed_spec != self.fixed_spec || predictor_spec != self.predictor_spec {
            return Err(Error::Format(
                "stored novelty networks do not match the configured shapes".into(),
            ));
        }
        self.fixed = fixed;
        self.predictor = predictor;
        let count = wire::read_u64(r)? as usize;
        let width = wire::read_u64(r)? as usize;
        if width != self.norm.mean.len() {
            return Err(Error::Format("stored normalizer width mismatch".into()));
        }
        self.norm = StateNormStats {
            count,
            mean: wire::read_f64_vec(r, width)?,
            std: wire::read_f64_vec(r, width)?,
        };
        self.sigma = if wire::read_bool(r)? {
            Some(wire::read_f64(r)?)
        } else {
            None
        };
        Ok(())
    }
}

/// Per-feature mean and population std over the given states.
pub fn fit_state_normalizer(states: &[Observation], std_floor: f64) -> Result<StateNormStats> {
    if states.len() < 2 {
        return Err(Error::Contract(format!(
            "normalizer needs at least 2 states, got {}",
            states.len()
        )));
    }
    let width = states[0].width();
    if states.iter().any(|s| s.width() != width) {
        return Err(Error::Contract("states have differing widths".into()));
    }
    let n = states.len() as f64;
    let mut mean = vec![0.0; width];
    for s in states {
        for (m, v) in mean.iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; width];
    for s in states {
        for ((va, v), m) in var.iter_mut().zip(&s.features).zip(&mean) {
            let d = v - m;
            *va += d * d;
        }
    }
    let std = var
        .iter()
        .map(|v| (v / n).sqrt().max(std_floor))
        .collect();
    Ok(StateNormStats {
        mean,
        std,
        count: states.len(),
    })
}

/// `(s - mean) / std`, clamped to `[-clip, clip]` per feature.
pub fn normalize_state(norm: &StateNormStats, s: &Observation, clip: f64) -> Result<Vec<f64>> {
    if s.width() != norm.mean.len() {
        return Err(Error::ShapeMismatch {
            context: "normalize_state",
            expected: norm.mean.len(),
            got: s.width(),
        });
    }
    Ok(s.features
        .iter()
        .zip(&norm.mean)
        .zip(&norm.std)
        .map(|((v, m), sd)| ((v - m) / sd).clamp(-clip, clip))
        .collect())
}
