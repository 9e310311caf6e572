use serde::{Deserialize, Serialize};

use crate::mdp::{Abstraction, StateSpace};

/// Dense action-value table over (abstract state, child).
///
/// `mask` lists the state variables the rows are indexed by; a flat table
/// uses every variable. Entries start at zero.
///
/// Each row also carries a bitmask of the columns that hold an estimate.
/// Columns outside it were never backed up and are ignored by the row max
/// and argmax unless no column of the row is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    mask: Vec<usize>,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    visited: Vec<u64>,
}

/// Bitmask with the lowest `cols` bits set.
pub fn all_columns(cols: usize) -> u64 {
    if cols >= 64 {
        u64::MAX
    } else {
        (1u64 << cols) - 1
    }
}

/// The known part of `mask`, or all of `mask` when none of it is known.
#[inline]
pub fn known(mask: u64, visited: u64) -> u64 {
    match mask & visited {
        0 => mask,
        m => m,
    }
}

impl QTable {
    /// Zero table with every column marked known.
    pub fn zeros(mask: Vec<usize>, rows: usize, cols: usize) -> Self {
        QTable { mask, rows, cols, values: vec![0.0; rows * cols], visited: vec![all_columns(cols); rows] }
    }

    /// A table over every variable of an `n_states`-state space.
    pub fn flat(n_states: usize, n_actions: usize) -> Self {
        QTable::zeros(Vec::new(), n_states, n_actions)
    }

    pub fn for_abstraction(abstraction: &Abstraction, cols: usize) -> Self {
        QTable::zeros(abstraction.vars().to_vec(), abstraction.len(), cols)
    }

    /// Rebuild from serialized parts; `None` if the shape is inconsistent.
    pub fn from_parts(mask: Vec<usize>, rows: usize, cols: usize, values: Vec<f64>, visited: Vec<u64>) -> Option<Self> {
        (cols <= 64
            && values.len() == rows * cols
            && values.iter().all(|v| v.is_finite())
            && visited.len() == rows
            && visited.iter().all(|v| v & !all_columns(cols) == 0))
            .then_some(QTable { mask, rows, cols, values, visited })
    }

    /// Variables indexing the rows. Empty for tables built with [`QTable::flat`].
    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Q for a full state, projected through this table's mask.
    pub fn get_state(&self, space: &StateSpace, s: usize, col: usize) -> f64 {
        self.get(self.project(space, s), col)
    }

    pub fn project(&self, space: &StateSpace, s: usize) -> usize {
        if self.mask.is_empty() {
            s
        } else {
            Abstraction::new(space, &self.mask)
                .expect("table mask was validated against this space")
                .project(space, s)
        }
    }

    /// Known columns of `row`.
    pub fn visited(&self, row: usize) -> u64 {
        self.visited[row]
    }

    pub fn visited_rows(&self) -> &[u64] {
        &self.visited
    }

    pub fn set_visited(&mut self, row: usize, cols: u64) {
        debug_assert!(cols & !all_columns(self.cols) == 0);
        self.visited[row] = cols;
    }

    /// max over the known columns of the row (V_i).
    pub fn state_value(&self, row: usize) -> f64 {
        let values = self.row(row);
        let mut m = known(all_columns(self.cols), self.visited[row]);
        let mut best = f64::NEG_INFINITY;
        while m != 0 {
            best = best.max(values[m.trailing_zeros() as usize]);
            m &= m - 1;
        }
        best
    }

    /// Greedy known column; exact ties go to the lowest index.
    pub fn argmax(&self, row: usize) -> usize {
        let values = self.row(row);
        let mut m = known(all_columns(self.cols), self.visited[row]);
        let mut best = m.trailing_zeros() as usize;
        while m != 0 {
            let c = m.trailing_zeros() as usize;
            if values[c] > values[best] {
                best = c;
            }
            m &= m - 1;
        }
        best
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Index of the largest value, lowest index on exact ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A flat policy over primitive actions.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatPolicy {
    Deterministic(Vec<usize>),
    UniformRandom { n_actions: usize },
}

impl FlatPolicy {
    /// argmax of each row of a flat table.
    pub fn greedy(q: &QTable) -> Self {
        FlatPolicy::Deterministic((0..q.rows()).map(|s| q.argmax(s)).collect())
    }

    pub fn act<R: rand::Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        match self {
            FlatPolicy::Deterministic(actions) => actions[s],
            FlatPolicy::UniformRandom { n_actions } => rng.random_range(0..*n_actions),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0, 5.0]), 1);
    }

    #[test]
    fn projection_through_mask() {
        let space = StateSpace::new([("a", 2), ("b", 3)]).unwrap();
        let abs = space.abstraction(&[1]).unwrap();
        let mut q = QTable::for_abstraction(&abs, 2);
        q.set(2, 1, 7.0);
        let s = space.encode(&[1, 2]).unwrap();
        assert_eq!(q.get_state(&space, s, 1), 7.0);
        let s = space.encode(&[0, 2]).unwrap();
        assert_eq!(q.get_state(&space, s, 1), 7.0);
        assert_eq!(q.state_value(2), 7.0);
    }

    #[test]
    fn from_parts_checks_shape() {
        assert!(QTable::from_parts(vec![], 2, 2, vec![0.0; 3], vec![3; 2]).is_none());
        assert!(QTable::from_parts(vec![], 1, 1, vec![f64::NAN], vec![1]).is_none());
        assert!(QTable::from_parts(vec![], 1, 2, vec![1.0, 2.0], vec![4]).is_none());
        assert!(QTable::from_parts(vec![], 1, 2, vec![1.0, 2.0], vec![3]).is_some());
    }

    #[test]
    fn unknown_columns_are_ignored_unless_nothing_is_known() {
        let mut q = QTable::flat(2, 3);
        q.set(0, 0, -5.0);
        q.set(0, 2, -1.0);
        q.set_visited(0, 0b001);
        assert_eq!((q.argmax(0), q.state_value(0)), (0, -5.0));
        q.set_visited(0, 0b101);
        assert_eq!((q.argmax(0), q.state_value(0)), (2, -1.0));
        q.set_visited(1, 0);
        q.set(1, 1, 2.0);
        assert_eq!((q.argmax(1), q.state_value(1)), (1, 2.0));
        assert_eq!(known(0b110, 0b001), 0b110);
        assert_eq!(known(0b110, 0b011), 0b010);
        assert_eq!(all_columns(64), u64::MAX);
    }
}
