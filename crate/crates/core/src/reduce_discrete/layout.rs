use crate::qbf::{Assignment, Quantifier, QbfInstance};
use crate::gridflow::Displacement;

use super::ReduceError;

/// Largest `n` the compiler accepts by default.
pub const LAYOUT_BOUND: usize = 12;

/// Role of the row group `R_{A,i}` inside block `B_A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowType {
    /// `A_i = 0` and every lower bit is 1: end of the `x_i = 0` branch.
    Quantifier,
    /// `A_i = 1` and every lower bit is 1: end of the `x_i = 1` branch.
    Value,
    Empty,
}

impl RowType {
    pub fn of(a: &Assignment, i: usize) -> Self {
        let lower_all_set = (1..i).all(|l| a.bit(l));
        match (lower_all_set, a.bit(i)) {
            (true, false) => RowType::Quantifier,
            (true, true) => RowType::Value,
            _ => RowType::Empty,
        }
    }
}

/// Position of an absolute core row inside the block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLabel {
    /// Rank of the block's assignment.
    pub rank: u64,
    /// 0 for the assignment row `R_{A,0}`, otherwise the group index `i`.
    pub group: usize,
    /// Row `k` inside group `i` (always 0 for the assignment row).
    pub k: usize,
}

/// Row/column bookkeeping of the core square: `2^n` blocks stacked in rank
/// order, each made of `R_{A,0}` followed by groups `R_{A,1}..R_{A,n}` where
/// group `i` has `i` rows. Columns run from `-(n+1)` to `n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreLayout {
    n: usize,
}

impl CoreLayout {
    pub fn new(n: usize) -> Result<Self, ReduceError> {
        Self::with_bound(n, LAYOUT_BOUND)
    }

    pub fn with_bound(n: usize, bound: usize) -> Result<Self, ReduceError> {
        if n == 0 {
            return Err(ReduceError::Construction("n must be positive".into()));
        }
        if n > bound {
            return Err(ReduceError::BoundExceeded { n, bound });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_rows(&self) -> u64 {
        1 + (self.n * (self.n + 1) / 2) as u64
    }

    pub fn total_rows(&self) -> u64 {
        (1u64 << self.n) * self.block_rows()
    }

    pub fn columns(&self) -> u32 {
        2 * (self.n as u32 + 1) + 1
    }

    /// Largest column offset `n + 1`.
    pub fn half_width(&self) -> i64 {
        self.n as i64 + 1
    }

    /// Local (0-based) column index of signed column `c`.
    pub fn local_column(&self, c: i64) -> u32 {
        (c + self.half_width()) as u32
    }

    pub fn signed_column(&self, local: u32) -> i64 {
        local as i64 - self.half_width()
    }

    /// Absolute row of `R_{A,0}` (`group == 0`) or `R_{A,group,k}`.
    pub fn resolve(&self, rank: u64, group: usize, k: usize) -> u64 {
        assert!(group <= self.n && (group == 0 && k == 0 || k < group));
        let within = if group == 0 { 0 } else { 1 + ((group - 1) * group / 2 + k) as u64 };
        rank * self.block_rows() + within
    }

    pub fn locate(&self, row: u64) -> RowLabel {
        let rank = row / self.block_rows();
        let off = (row % self.block_rows()) as usize;
        if off == 0 {
            return RowLabel { rank, group: 0, k: 0 };
        }
        let off = off - 1;
        // group i occupies offsets [(i-1)i/2, i(i+1)/2)
        let mut group = 1;
        while group * (group + 1) / 2 <= off {
            group += 1;
        }
        RowLabel { rank, group, k: off - (group - 1) * group / 2 }
    }

    pub fn row_type(&self, rank: u64, group: usize) -> RowType {
        RowType::of(&Assignment::from_rank(self.n, rank), group)
    }
}

/// Displacement inside the core square at absolute `row` and signed column
/// `col`. Only the assignment row's centre evaluates the matrix.
pub fn core_displacement(inst: &QbfInstance, layout: &CoreLayout, row: u64, col: i64) -> Displacement {
    let label = layout.locate(row);
    let a = Assignment::from_rank(layout.n(), label.rank);
    if label.group == 0 {
        return match (col, col == 0 && inst.eval_matrix(&a)) {
            (0, true) => Displacement::UL,
            (0, false) => Displacement::UR,
            _ => Displacement::U,
        };
    }
    let i = label.group as i64;
    let m = label.k as i64;
    match RowType::of(&a, label.group) {
        RowType::Quantifier => match inst.quantifier(label.group) {
            // TRUE carried at -i is steered back to the centre, FALSE keeps its lane.
            Quantifier::Forall if col == -i + m => Displacement::UR,
            // FALSE carried at +i is steered back, TRUE keeps its lane.
            Quantifier::Exists if col == i - m => Displacement::UL,
            _ => Displacement::U,
        },
        RowType::Value if m == 0 && col == -i => Displacement::UL,
        RowType::Value if m == 0 && col == i => Displacement::UR,
        _ => Displacement::U,
    }
}
