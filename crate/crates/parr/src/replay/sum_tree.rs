//! Binary indexed sum tree for proportional sampling in O(log n).
//!
//! Leaves hold nonnegative masses; every internal node is recomputed as the
//! exact sum of its two children on update, so the root never drifts from
//! the true total by more than ordinary summation rounding.

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    /// 1-based heap layout: root at 1, leaf `i` at `leaves + i`.
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two().max(1);
        Self {
            leaves,
            tree: vec![0.0; 2 * leaves],
        }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.tree[self.leaves + index]
    }

    pub fn set(&mut self, index: usize, mass: f64) {
        debug_assert!(index < self.leaves);
        debug_assert!(mass >= 0.0 && mass.is_finite());
        let mut i = self.leaves + index;
        self.tree[i] = mass;
        while i > 1 {
            i /= 2;
            self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1];
        }
    }

    /// Finds the leaf holding the prefix position `target` in `[0, total)`.
    ///
    /// Never lands on a zero-mass leaf as long as `target < total`.
    pub fn find(&self, target: f64) -> usize {
        debug_assert!(target >= 0.0);
        let mut i = 1;
        let mut t = target;
        while i < self.leaves {
            let left = 2 * i;
            if t < self.tree[left] {
                i = left;
            } else {
                t -= self.tree[left];
                i = left + 1;
            }
        }
        i - self.leaves
    }
}
