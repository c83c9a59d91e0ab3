use std::ops::{Add, AddAssign};

use serde::Serialize;

/// Exact arithmetic operation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub mults: u64,
    pub adds: u64,
    pub comparisons: u64,
    pub exp_log: u64,
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            mults: self.mults + o.mults,
            adds: self.adds + o.adds,
            comparisons: self.comparisons + o.comparisons,
            exp_log: self.exp_log + o.exp_log,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for OpCounts {
    fn sum<I: Iterator<Item = OpCounts>>(iter: I) -> OpCounts {
        iter.fold(OpCounts::default(), |a, b| a + b)
    }
}

impl OpCounts {
    /// Counts divided by `n` (e.g. per symbol).
    pub fn per(self, n: usize) -> [f64; 4] {
        let n = n as f64;
        [
            self.mults as f64 / n,
            self.adds as f64 / n,
            self.comparisons as f64 / n,
            self.exp_log as f64 / n,
        ]
    }
}
