//! Tabular chain MDP with an explicit transition model, plus the value
//! iteration oracle used to verify learned Q-values against Q*.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::wire;

use super::{one_hot, Environment, Observation, StepOutcome};

/// Continuing chain MDP; observations are one-hot state encodings.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    n_states: usize,
    n_actions: usize,
    /// Flattened `[s][a][s']`.
    transitions: Vec<f64>,
    /// Flattened `[s][a]`.
    rewards: Vec<f64>,
    start: usize,
    state: usize,
    rng: ChaCha8Rng,
}

impl ChainMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        start: usize,
    ) -> Result<Self> {
        if n_states < 2 || n_actions < 1 {
            return Err(Error::InvalidConfig(
                "chain needs at least 2 states and 1 action".into(),
            ));
        }
        if start >= n_states {
            return Err(Error::InvalidConfig("start state out of range".into()));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidConfig("transition table has wrong size".into()));
        }
        if rewards.len() != n_states * n_actions {
            return Err(Error::InvalidConfig("reward table has wrong size".into()));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transitions[(s * n_actions + a) * n_states..][..n_states];
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidConfig(format!(
                        "transition probabilities out of [0,1] at state {s} action {a}"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "transition row (state {s}, action {a}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            start,
            state: start,
            rng: rng::seeded(0),
        })
    }

    /// River-swim style chain: action 0 wades back toward the near shore
    /// (small reward there), action 1 swims against the current toward the
    /// far end (large reward, stochastic progress).
    pub fn riverswim(n_states: usize) -> Self {
        let n_actions = 2;
        let mut t = vec![0.0; n_states * n_actions * n_states];
        let mut r = vec![0.0; n_states * n_actions];
        let mut set = |s: usize, a: usize, s2: usize, p: f64| {
            t[(s * n_actions + a) * n_states + s2] += p;
        };
        for s in 0..n_states {
            // left: deterministic
            set(s, 0, s.saturating_sub(1), 1.0);
            // right: stochastic progress
            if s == 0 {
                set(s, 1, 1, 0.6);
                set(s, 1, 0, 0.4);
            } else if s == n_states - 1 {
                set(s, 1, s, 0.9);
                set(s, 1, s - 1, 0.1);
            } else {
                set(s, 1, s + 1, 0.6);
                set(s, 1, s, 0.3);
                set(s, 1, s - 1, 0.1);
            }
        }
        r[0] = 0.01; // (state 0, action left): lingering at the near shore
        r[(n_states - 1) * n_actions + 1] = 1.0; // swimming at the far end
        Self::new(n_states, n_actions, t, r, 0).expect("riverswim table is valid")
    }

    /// Deterministic variant: identical rewards, but swimming right always
    /// advances. Useful where stochastic targets would drown the signal.
    pub fn deterministic_chain(n_states: usize) -> Self {
        let n_actions = 2;
        let mut t = vec![0.0; n_states * n_actions * n_states];
        let mut r = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            t[(s * n_actions) * n_states + s.saturating_sub(1)] = 1.0;
            t[(s * n_actions + 1) * n_states + (s + 1).min(n_states - 1)] = 1.0;
        }
        r[0] = 0.01;
        r[(n_states - 1) * n_actions + 1] = 1.0;
        Self::new(n_states, n_actions, t, r, 0).expect("deterministic table is valid")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn transition(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + s2]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    fn sample_next(&mut self, s: usize, a: usize) -> usize {
        let u: f64 = self.rng.gen();
        let row = &self.transitions[(s * self.n_actions + a) * self.n_states..][..self.n_states];
        let mut acc = 0.0;
        let mut last_nonzero = s;
        for (s2, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_nonzero = s2;
                acc += p;
                if u < acc {
                    return s2;
                }
            }
        }
        last_nonzero
    }
}

impl Environment for ChainMdp {
    fn obs_width(&self) -> usize {
        self.n_states
    }

    fn num_actions(&self) -> usize {
        self.n_actions
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = rng::seeded(seed);
        self.state = self.start;
        Observation::new(one_hot(self.state, self.n_states))
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= self.n_actions {
            return Err(Error::Contract(format!(
                "action {action} out of range 0..{}",
                self.n_actions
            )));
        }
        let reward = self.reward(self.state, action);
        self.state = self.sample_next(self.state, action);
        Ok(StepOutcome {
            reward,
            next_obs: Observation::new(one_hot(self.state, self.n_states)),
            terminal: false,
        })
    }

    fn save_state(&self, w: &mut dyn Write) -> Result<()> {
        wire::write_u64(w, self.state as u64)?;
        rng::save_rng(w, &self.rng)
    }

    fn restore_state(&mut self, r: &mut dyn Read) -> Result<()> {
        self.state = wire::read_u64(r)? as usize;
        self.rng = rng::load_rng(r)?;
        Ok(())
    }
}

/// Optimal Q-values of a tabular MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }
}

/// Solves for Q* by iterating the Bellman optimality operator until the
/// sup-norm residual drops to `tol`.
pub fn value_iteration(mdp: &ChainMdp, gamma: f64, tol: f64) -> QTable {
    assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0,1)");
    assert!(tol > 0.0, "tolerance must be positive");

    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut q = vec![0.0; ns * na];
    for _ in 0..10_000_000u64 {
        let best: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| q[s * na + a]).fold(f64::MIN, f64::max))
            .collect();
        let mut next = vec![0.0; ns * na];
        let mut residual = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let mut v = mdp.reward(s, a);
                for s2 in 0..ns {
                    let p = mdp.transition(s, a, s2);
                    if p > 0.0 {
                        v += gamma * p * best[s2];
                    }
                }
                residual = residual.max((v - q[s * na + a]).abs());
                next[s * na + a] = v;
            }
        }
        q = next;
        if residual <= tol {
            return QTable {
                n_states: ns,
                n_actions: na,
                q,
            };
        }
    }
    unreachable!("value iteration failed to converge; gamma = {gamma}")
}
