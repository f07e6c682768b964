//! Sparse-reward grid task: pick up the key, then open the door.
//!
//! The only nonzero reward is +1 for entering the door while holding the
//! key, which also ends the episode. Picking up the key gives nothing, so
//! undirected exploration has to stumble over a two-stage goal.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::wire;

use super::{one_hot, Environment, Observation, StepOutcome};

pub const ACTIONS: usize = 4; // up, down, left, right

#[derive(Debug, Clone)]
pub struct KeyDoorWorld {
    width: usize,
    height: usize,
    start: (usize, usize),
    key_pos: (usize, usize),
    door_pos: (usize, usize),
    step_limit: u32,
    // episode state
    agent: (usize, usize),
    has_key: bool,
    key_present: bool,
    steps: u32,
}

impl KeyDoorWorld {
    /// 10x10 layout: start in one corner, key in the far corner, door in a
    /// third corner, 200-step episode limit.
    pub fn standard() -> Self {
        Self::new(10, 10, (0, 0), (9, 9), (0, 9), 200).unwrap()
    }

    pub fn new(
        width: usize,
        height: usize,
        start: (usize, usize),
        key_pos: (usize, usize),
        door_pos: (usize, usize),
        step_limit: u32,
    ) -> Result<Self> {
        let in_bounds = |p: (usize, usize)| p.0 < width && p.1 < height;
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("grid must be non-empty".into()));
        }
        if !in_bounds(start) || !in_bounds(key_pos) || !in_bounds(door_pos) {
            return Err(Error::InvalidConfig("positions must lie in the grid".into()));
        }
        if step_limit == 0 {
            return Err(Error::InvalidConfig("step limit must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            start,
            key_pos,
            door_pos,
            step_limit,
            agent: start,
            has_key: false,
            key_present: true,
            steps: 0,
        })
    }

    pub fn step_limit(&self) -> u32 {
        self.step_limit
    }

    fn observe(&self) -> Observation {
        let mut f = Vec::with_capacity(self.obs_width());
        f.extend(one_hot(self.agent.0, self.width));
        f.extend(one_hot(self.agent.1, self.height));
        f.push(f64::from(self.has_key));
        f.push(f64::from(self.key_present));
        Observation::new(f)
    }

    /// Where a move lands from `pos`; walls block.
    pub fn apply_move(&self, pos: (usize, usize), action: usize) -> (usize, usize) {
        let (x, y) = pos;
        match action {
            0 => (x, y.saturating_sub(1)),
            1 => (x, (y + 1).min(self.height - 1)),
            2 => (x.saturating_sub(1), y),
            3 => ((x + 1).min(self.width - 1), y),
            _ => unreachable!("validated by step"),
        }
    }
}

impl Environment for KeyDoorWorld {
    fn obs_width(&self) -> usize {
        self.width + self.height + 2
    }

    fn num_actions(&self) -> usize {
        ACTIONS
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.agent = self.start;
        self.has_key = false;
        self.key_present = true;
        self.steps = 0;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= ACTIONS {
            return Err(Error::Contract(format!(
                "action {action} out of range 0..{ACTIONS}"
            )));
        }
        self.agent = self.apply_move(self.agent, action);
        self.steps += 1;

        let mut reward = 0.0;
        let mut terminal = false;
        if self.key_present && self.agent == self.key_pos {
            self.has_key = true;
            self.key_present = false;
        }
        if self.has_key && self.agent == self.door_pos {
            reward = 1.0;
            terminal = true;
        }
        if self.steps >= self.step_limit {
            terminal = true;
        }
        Ok(StepOutcome {
            reward,
            next_obs: self.observe(),
            terminal,
        })
    }

    fn save_state(&self, w: &mut dyn Write) -> Result<()> {
        wire::write_u64(w, self.agent.0 as u64)?;
        wire::write_u64(w, self.agent.1 as u64)?;
        wire::write_bool(w, self.has_key)?;
        wire::write_bool(w, self.key_present)?;
        wire::write_u32(w, self.steps)?;
        Ok(())
    }

    fn restore_state(&mut self, r: &mut dyn Read) -> Result<()> {
        self.agent = (wire::read_u64(r)? as usize, wire::read_u64(r)? as usize);
        self.has_key = wire::read_bool(r)?;
        self.key_present = wire::read_bool(r)?;
        self.steps = wire::read_u32(r)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn reset_has_no_key() {
        let mut env = KeyDoorWorld::standard();
        let obs = env.reset(0);
        let w = 10;
        assert_eq!(obs.features[w + 10], 0.0, "has_key bit");
        assert_eq!(obs.features[w + 11], 1.0, "key_present bit");
    }

    #[test]
    fn reset_is_deterministic() {
        let mut env = KeyDoorWorld::standard();
        let a = env.reset(3);
        env.step(3).unwrap();
        let b = env.reset(3);
        assert_eq!(a, b);
    }

    #[test]
    fn door_without_key_gives_nothing() {
        // Door right next to the start, key far away.
        let mut env = KeyDoorWorld::new(4, 4, (0, 0), (3, 3), (1, 0), 50).unwrap();
        env.reset(0);
        let out = env.step(3).unwrap(); // step onto the door
        assert_eq!(out.reward, 0.0);
        assert!(!out.terminal);
    }

    #[test]
    fn door_with_key_pays_and_terminates() {
        let mut env = KeyDoorWorld::new(4, 1, (0, 0), (1, 0), (3, 0), 50).unwrap();
        env.reset(0);
        let out = env.step(3).unwrap(); // onto the key
        assert_eq!(out.reward, 0.0);
        assert!(!out.terminal);
        assert_eq!(out.next_obs.features[4 + 1], 1.0, "has_key set");
        env.step(3).unwrap();
        let out = env.step(3).unwrap(); // onto the door
        assert_eq!(out.reward, 1.0);
        assert!(out.terminal);
    }

    #[test]
    fn walls_block_movement() {
        let mut env = KeyDoorWorld::standard();
        let start = env.reset(0);
        let out = env.step(0).unwrap(); // up from (0,0): blocked
        assert_eq!(out.next_obs.features[..20], start.features[..20]);
    }

    #[test]
    fn step_limit_terminates_without_reward() {
        let mut env = KeyDoorWorld::new(3, 3, (0, 0), (2, 2), (2, 0), 4).unwrap();
        env.reset(0);
        for _ in 0..3 {
            let out = env.step(0).unwrap();
            assert!(!out.terminal);
        }
        let out = env.step(0).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn out_of_range_action_is_rejected() {
        let mut env = KeyDoorWorld::standard();
        env.reset(0);
        assert!(env.step(4).is_err());
    }

    /// Breadth-first search over the deterministic dynamics proves the
    /// rewarding state is reachable within the episode limit.
    #[test]
    fn door_with_key_is_reachable_within_step_limit() {
        let env = KeyDoorWorld::standard();
        let mut seen = vec![false; 10 * 10 * 2];
        let idx = |x: usize, y: usize, k: bool| (y * 10 + x) * 2 + usize::from(k);
        let mut queue = VecDeque::new();
        queue.push_back(((0usize, 0usize), false, 0u32));
        seen[idx(0, 0, false)] = true;
        let mut solved = None;
        while let Some((pos, has_key, depth)) = queue.pop_front() {
            if depth >= env.step_limit() {
                continue;
            }
            for action in 0..ACTIONS {
                let next = env.apply_move(pos, action);
                let next_key = has_key || next == (9, 9);
                if next_key && next == (0, 9) {
                    solved = Some(depth + 1);
                    queue.clear();
                    break;
                }
                if !seen[idx(next.0, next.1, next_key)] {
                    seen[idx(next.0, next.1, next_key)] = true;
                    queue.push_back((next, next_key, depth + 1));
                }
            }
        }
        let depth = solved.expect("door-with-key unreachable");
        assert!(depth <= env.step_limit());
    }

    #[test]
    fn state_round_trip_preserves_episode() {
        let mut env = KeyDoorWorld::standard();
        env.reset(0);
        for a in [3, 3, 1, 3, 1] {
            env.step(a).unwrap();
        }
        let mut buf = Vec::new();
        env.save_state(&mut buf).unwrap();

        let mut env2 = KeyDoorWorld::standard();
        env2.reset(0);
        env2.restore_state(&mut &buf[..]).unwrap();
        let a = env.step(2).unwrap();
        let b = env2.step(2).unwrap();
        assert_eq!(a, b);
    }
}
