//! Fixed-capacity ring replay that stores each experience together with
//! every value derived from it (predicted Q, novelty, target, priority),
//! supports priority-proportional sampling, and can be walked oldest to
//! newest for the refresh.

mod snapshot;
mod sum_tree;

pub use snapshot::{dump_snapshot, load_snapshot, snapshot_bytes};

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::env::Observation;
use crate::error::{Error, Result};

use sum_tree::SumTree;

/// One environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub s: Observation,
    pub a: usize,
    /// Clipped reward, in `[-1, 1]`.
    pub r: f64,
    pub s_next: Observation,
    pub terminal: bool,
}

/// An experience plus all derived values the refresh rewrites.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub exp: Experience,
    /// Q(s, a) under the network that last valued this record.
    pub q_pred: f64,
    /// Normalized novelty of `s_next`; nonnegative.
    pub novelty: f64,
    /// Stored regression target.
    pub target: f64,
    /// Sampling priority, `|q_pred - target|`; nonnegative.
    pub priority: f64,
    /// Assigned by the buffer at push time; strictly increasing.
    pub insertion_index: u64,
}

impl ReplayRecord {
    /// Fresh record with zeroed derived fields (burn-in placeholder form).
    pub fn from_experience(exp: Experience) -> Self {
        Self {
            exp,
            q_pred: 0.0,
            novelty: 0.0,
            target: 0.0,
            priority: 0.0,
            insertion_index: 0,
        }
    }
}

/// Sampling-distribution shape: `p_i ∝ (priority_i + floor_eps)^omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityConfig {
    pub omega: f64,
    pub floor_eps: f64,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            floor_eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    cfg: PriorityConfig,
    /// Slot `i` holds the record with `insertion_index % capacity == i`.
    records: Vec<ReplayRecord>,
    next_insertion: u64,
    tree: SumTree,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, cfg: PriorityConfig) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        if cfg.floor_eps < 0.0 || !cfg.floor_eps.is_finite() {
            return Err(Error::InvalidConfig("floor_eps must be finite and >= 0".into()));
        }
        if cfg.omega < 0.0 || !cfg.omega.is_finite() {
            return Err(Error::InvalidConfig("omega must be finite and >= 0".into()));
        }
        Ok(Self {
            capacity,
            cfg,
            records: Vec::new(),
            next_insertion: 0,
            tree: SumTree::new(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn priority_config(&self) -> PriorityConfig {
        self.cfg
    }

    /// Total number of pushes ever performed.
    pub fn pushes(&self) -> u64 {
        self.next_insertion
    }

    fn mass_of(&self, priority: f64) -> f64 {
        let v = priority + self.cfg.floor_eps;
        if self.cfg.omega == 1.0 {
            v
        } else {
            v.powf(self.cfg.omega)
        }
    }

    /// Appends a record, evicting and returning the oldest one when full.
    ///
    /// The buffer assigns `insertion_index` itself, which keeps the
    /// monotonicity invariant out of callers' hands.
    pub fn push(&mut self, mut record: ReplayRecord) -> Option<ReplayRecord> {
        debug_assert!((-1.0..=1.0).contains(&record.exp.r), "reward must be clipped");
        debug_assert!(record.priority >= 0.0);
        debug_assert!(record.novelty >= 0.0);

        record.insertion_index = self.next_insertion;
        self.next_insertion += 1;
        let slot = (record.insertion_index % self.capacity as u64) as usize;
        let mass = self.mass_of(record.priority);

        let evicted = if self.records.len() < self.capacity {
            debug_assert_eq!(slot, self.records.len());
            self.records.push(record);
            None
        } else {
            Some(std::mem::replace(&mut self.records[slot], record))
        };
        self.tree.set(slot, mass);
        evicted
    }

    pub fn record(&self, index: usize) -> Result<&ReplayRecord> {
        self.records
            .get(index)
            .ok_or_else(|| Error::Contract(format!("replay index {index} out of range")))
    }

    /// Draws `batch` independent indices with probability proportional to
    /// `(priority + floor_eps)^omega`.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::Contract("cannot sample from an empty replay".into()));
        }
        if batch == 0 {
            return Err(Error::Contract("batch size must be >= 1".into()));
        }
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "total sampling mass is zero; set floor_eps > 0 or nonzero priorities".into(),
            ));
        }
        Ok((0..batch)
            .map(|_| self.tree.find(rng.gen::<f64>() * total))
            .collect())
    }

    /// Draws `batch` independent uniform indices; consumes exactly one RNG
    /// value per index, mirroring [`Self::sample_indices`].
    pub fn sample_uniform(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::Contract("cannot sample from an empty replay".into()));
        }
        if batch == 0 {
            return Err(Error::Contract("batch size must be >= 1".into()));
        }
        let n = self.records.len();
        Ok((0..batch)
            .map(|_| ((rng.gen::<f64>() * n as f64) as usize).min(n - 1))
            .collect())
    }

    pub fn set_priority(&mut self, index: usize, priority: f64) -> Result<()> {
        if index >= self.records.len() {
            return Err(Error::Contract(format!("replay index {index} out of range")));
        }
        if !(priority >= 0.0) || !priority.is_finite() {
            return Err(Error::Contract(format!(
                "priority must be finite and >= 0, got {priority}"
            )));
        }
        self.records[index].priority = priority;
        let mass = self.mass_of(priority);
        self.tree.set(index, mass);
        Ok(())
    }

    /// Rewrites the derived fields of one record in place (refresh path).
    /// The experience and insertion index are untouched.
    pub fn rewrite_derived(
        &mut self,
        index: usize,
        q_pred: f64,
        novelty: f64,
        target: f64,
        priority: f64,
    ) -> Result<()> {
        if index >= self.records.len() {
            return Err(Error::Contract(format!("replay index {index} out of range")));
        }
        let rec = &mut self.records[index];
        rec.q_pred = q_pred;
        rec.novelty = novelty;
        rec.target = target;
        self.set_priority(index, priority)
    }

    /// Slot indices ordered by insertion, oldest first.
    pub fn iterate_oldest_to_newest(&self) -> Vec<usize> {
        let n = self.records.len();
        if n < self.capacity {
            (0..n).collect()
        } else {
            let cursor = (self.next_insertion % self.capacity as u64) as usize;
            (cursor..n).chain(0..cursor).collect()
        }
    }

    /// Exact sampling distribution over slots `0..len()`.
    pub fn distribution(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::Contract("empty replay has no distribution".into()));
        }
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(Error::Numerical("total sampling mass is zero".into()));
        }
        Ok((0..self.records.len())
            .map(|i| self.tree.get(i) / total)
            .collect())
    }

    /// Root of the priority index structure.
    pub fn total_mass(&self) -> f64 {
        self.tree.total()
    }

    /// Direct O(n) sum over records; oracle for the tree total.
    pub fn direct_mass_sum(&self) -> f64 {
        self.records.iter().map(|r| self.mass_of(r.priority)).sum()
    }

    /// Digest over all `(s, a, r, s', terminal)` tuples, oldest to newest.
    /// The refresh must never change this.
    pub fn experiences_checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for &i in &self.iterate_oldest_to_newest() {
            let e = &self.records[i].exp;
            for v in &e.s.features {
                v.to_bits().hash(&mut h);
            }
            e.a.hash(&mut h);
            e.r.to_bits().hash(&mut h);
            for v in &e.s_next.features {
                v.to_bits().hash(&mut h);
            }
            e.terminal.hash(&mut h);
        }
        h.finish()
    }

    pub(crate) fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    /// Rebuilds a buffer from snapshot parts; only the snapshot loader
    /// should call this.
    fn from_parts(
        capacity: usize,
        cfg: PriorityConfig,
        next_insertion: u64,
        ordered_records: Vec<ReplayRecord>,
    ) -> Result<Self> {
        let mut buf = Self::new(capacity, cfg)?;
        let n = ordered_records.len();
        if n > capacity {
            return Err(Error::Format("snapshot holds more records than capacity".into()));
        }
        if n < capacity && next_insertion != n as u64 {
            return Err(Error::Format(
                "snapshot insertion counter inconsistent with record count".into(),
            ));
        }
        buf.records = vec![ReplayRecord::from_experience(Experience {
            s: Observation::new(vec![]),
            a: 0,
            r: 0.0,
            s_next: Observation::new(vec![]),
            terminal: false,
        }); n];
        for rec in ordered_records {
            let slot = (rec.insertion_index % capacity as u64) as usize;
            if slot >= n {
                return Err(Error::Format("snapshot slot out of range".into()));
            }
            let mass = buf.mass_of(rec.priority);
            buf.records[slot] = rec;
            buf.tree.set(slot, mass);
        }
        buf.next_insertion = next_insertion;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    pub(crate) fn test_record(tag: f64) -> ReplayRecord {
        ReplayRecord::from_experience(Experience {
            s: Observation::new(vec![tag, 0.0]),
            a: 0,
            r: 0.0,
            s_next: Observation::new(vec![tag, 1.0]),
            terminal: false,
        })
    }

    #[test]
    fn push_below_capacity_returns_none() {
        let mut buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        for i in 0..4 {
            assert!(buf.push(test_record(i as f64)).is_none());
        }
        assert_eq!(buf.len(), 4);
    }

    #[test]
    fn eviction_is_fifo() {
        let mut buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        for i in 0..5 {
            let evicted = buf.push(test_record(i as f64));
            if i < 4 {
                assert!(evicted.is_none());
            } else {
                let e = evicted.unwrap();
                assert_eq!(e.insertion_index, 0);
                assert_eq!(e.exp.s.features[0], 0.0);
            }
        }
    }

    #[test]
    fn oldest_to_newest_after_wraparound() {
        let mut buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        for i in 0..6 {
            buf.push(test_record(i as f64));
        }
        let order = buf.iterate_oldest_to_newest();
        let indices: Vec<u64> = order
            .iter()
            .map(|&i| buf.record(i).unwrap().insertion_index)
            .collect();
        assert_eq!(indices, vec![2, 3, 4, 5]);
    }

    #[test]
    fn empty_buffer_iteration_is_empty() {
        let buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        assert!(buf.iterate_oldest_to_newest().is_empty());
    }

    #[test]
    fn empty_buffer_sampling_is_an_error() {
        let buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        let mut rng = rng::seeded(0);
        assert!(buf.sample_indices(1, &mut rng).is_err());
        assert!(buf.distribution().is_err());
    }

    #[test]
    fn single_record_always_sampled() {
        let mut buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        buf.push(test_record(0.0));
        let mut rng = rng::seeded(1);
        for _ in 0..100 {
            assert_eq!(buf.sample_indices(1, &mut rng).unwrap(), vec![0]);
        }
    }

    #[test]
    fn two_point_distribution_is_exact() {
        let cfg = PriorityConfig {
            omega: 1.0,
            floor_eps: 0.0,
        };
        let mut buf = ReplayBuffer::new(2, cfg).unwrap();
        buf.push(test_record(0.0));
        buf.push(test_record(1.0));
        buf.set_priority(0, 3.0).unwrap();
        buf.set_priority(1, 1.0).unwrap();
        let dist = buf.distribution().unwrap();
        assert_eq!(dist, vec![0.75, 0.25]);

        let mut rng = rng::seeded(42);
        let mut counts = [0u32; 2];
        let draws = 100_000;
        for ix in buf.sample_indices(draws, &mut rng).unwrap() {
            counts[ix] += 1;
        }
        let p0 = f64::from(counts[0]) / draws as f64;
        assert!((p0 - 0.75).abs() < 0.01, "empirical p0 = {p0}");
    }

    #[test]
    fn set_priority_then_read_back() {
        let mut buf = ReplayBuffer::new(4, PriorityConfig::default()).unwrap();
        buf.push(test_record(0.0));
        buf.set_priority(0, 2.25).unwrap();
        assert_eq!(buf.record(0).unwrap().priority, 2.25);
        assert!(buf.set_priority(0, -1.0).is_err());
        assert!(buf.set_priority(5, 1.0).is_err());
    }

    #[test]
    fn all_zero_priorities_with_floor_stay_uniform() {
        let mut buf = ReplayBuffer::new(8, PriorityConfig::default()).unwrap();
        for i in 0..8 {
            buf.push(test_record(i as f64));
            buf.set_priority(i, 0.0).unwrap();
        }
        let dist = buf.distribution().unwrap();
        for p in dist {
            assert!((p - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_total_matches_direct_sum_after_many_updates() {
        let mut buf = ReplayBuffer::new(512, PriorityConfig::default()).unwrap();
        let mut rng = rng::seeded(7);
        for i in 0..512 {
            buf.push(test_record(i as f64));
        }
        for _ in 0..10_000 {
            let ix = rng.gen_range(0..512);
            let p: f64 = rng.gen_range(0.0..10.0);
            buf.set_priority(ix, p).unwrap();
        }
        let direct = buf.direct_mass_sum();
        let tree = buf.total_mass();
        assert!(
            (tree - direct).abs() <= 1e-9 * direct.abs(),
            "tree {tree} vs direct {direct}"
        );
    }

    #[test]
    fn distribution_sums_to_one_and_never_zero_with_floor() {
        let mut buf = ReplayBuffer::new(16, PriorityConfig::default()).unwrap();
        let mut rng = rng::seeded(3);
        for i in 0..16 {
            buf.push(test_record(i as f64));
            buf.set_priority(i, rng.gen_range(0.0..5.0)).unwrap();
        }
        let dist = buf.distribution().unwrap();
        let sum: f64 = dist.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(dist.iter().all(|&p| p > 0.0));
    }

    proptest! {
        /// For any push sequence, the stored insertion indices are exactly
        /// the largest `len` indices seen, in increasing age order.
        #[test]
        fn fifo_keeps_newest(capacity in 1usize..16, pushes in 0usize..64) {
            let mut buf = ReplayBuffer::new(capacity, PriorityConfig::default()).unwrap();
            for i in 0..pushes {
                buf.push(test_record(i as f64));
            }
            let order = buf.iterate_oldest_to_newest();
            let stored: Vec<u64> = order.iter().map(|&i| buf.record(i).unwrap().insertion_index).collect();
            let expect: Vec<u64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as u64).collect();
            prop_assert_eq!(stored, expect);
        }

        /// The index structure's total equals the direct sum at all times.
        #[test]
        fn mass_conservation(priorities in proptest::collection::vec(0.0f64..100.0, 1..64)) {
            let mut buf = ReplayBuffer::new(64, PriorityConfig::default()).unwrap();
            for (i, p) in priorities.iter().enumerate() {
                buf.push(test_record(i as f64));
                buf.set_priority(i, *p).unwrap();
            }
            let direct = buf.direct_mass_sum();
            prop_assert!((buf.total_mass() - direct).abs() <= 1e-9 * direct.max(1.0));
        }

        /// Sampling only ever returns live slots.
        #[test]
        fn sampling_stays_in_range(pushes in 1usize..40, seed in 0u64..1000) {
            let mut buf = ReplayBuffer::new(16, PriorityConfig::default()).unwrap();
            for i in 0..pushes {
                buf.push(test_record(i as f64));
            }
            let mut rng = rng::seeded(seed);
            for ix in buf.sample_indices(64, &mut rng).unwrap() {
                prop_assert!(ix < buf.len());
            }
        }
    }
}
