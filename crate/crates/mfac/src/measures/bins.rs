//! The state×action bin partition used by the control-side algorithms.
//!
//! States live in a truncated axis-aligned box split into `m` cells, actions
//! in another box split into `l` cells; bin `i = (j−1)·l + k` pairs state
//! cell `j` with action cell `k` (indices 1-based to keep the bijection
//! readable). Points outside the truncated region are clamped to the nearest
//! cell.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

/// An axis-aligned box given by per-axis bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Cell<T> {
    pub fn midpoint(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| (a + b) / real::<T>(2.0))
            .collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }
}

/// Uniform grid over one box: per-axis bounds and cell counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Grid<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    cells_per_axis: Vec<usize>,
}

impl<T: Scalar> Grid<T> {
    fn n_cells(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    /// 1-based cell index of `x`, clamping out-of-region points.
    fn cell_of(&self, x: &[T]) -> usize {
        let mut idx = 0usize;
        for (a, &v) in x.iter().enumerate() {
            let n = self.cells_per_axis[a];
            let width = (self.hi[a] - self.lo[a]) / real::<T>(n as f64);
            let mut k = ((v - self.lo[a]) / width).floor().to_f64().unwrap_or(0.0) as isize;
            k = k.clamp(0, n as isize - 1);
            idx = idx * n + k as usize;
        }
        idx + 1
    }

    /// Bounds of 1-based cell `j`.
    fn cell(&self, j: usize) -> Cell<T> {
        let mut rem = j - 1;
        let d = self.cells_per_axis.len();
        let mut per_axis = vec![0usize; d];
        for a in (0..d).rev() {
            per_axis[a] = rem % self.cells_per_axis[a];
            rem /= self.cells_per_axis[a];
        }
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for a in 0..d {
            let n = self.cells_per_axis[a];
            let width = (self.hi[a] - self.lo[a]) / real::<T>(n as f64);
            lo.push(self.lo[a] + real::<T>(per_axis[a] as f64) * width);
            hi.push(self.lo[a] + real::<T>((per_axis[a] + 1) as f64) * width);
        }
        Cell { lo, hi }
    }
}

/// Product partition `B_{jk} = X_j × A_k` with midpoint actions per bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinPartition<T> {
    states: Grid<T>,
    actions: Grid<T>,
}

impl<T: Scalar> BinPartition<T> {
    /// Build from per-axis cell counts and per-axis bounds.
    pub fn new(
        state_bounds: (Vec<T>, Vec<T>),
        state_cells_per_axis: Vec<usize>,
        action_bounds: (Vec<T>, Vec<T>),
        action_cells_per_axis: Vec<usize>,
    ) -> Result<Self> {
        if state_cells_per_axis.iter().any(|&n| n == 0)
            || action_cells_per_axis.iter().any(|&n| n == 0)
        {
            return Err(Error::Config("bin counts must be ≥ 1".into()));
        }
        Ok(Self {
            states: Grid {
                lo: state_bounds.0,
                hi: state_bounds.1,
                cells_per_axis: state_cells_per_axis,
            },
            actions: Grid {
                lo: action_bounds.0,
                hi: action_bounds.1,
                cells_per_axis: action_cells_per_axis,
            },
        })
    }

    /// Default truncated region: states in `[-2, 2]^d`, actions in `[-4, 4]^k`.
    pub fn default_region(
        state_dim: usize,
        action_dim: usize,
        state_cells_per_axis: Vec<usize>,
        action_cells_per_axis: Vec<usize>,
    ) -> Result<Self> {
        Self::new(
            (vec![real(-2.0); state_dim], vec![real(2.0); state_dim]),
            state_cells_per_axis,
            (vec![real(-4.0); action_dim], vec![real(4.0); action_dim]),
            action_cells_per_axis,
        )
    }

    /// Number of state cells `m`.
    pub fn n_state_cells(&self) -> usize {
        self.states.n_cells()
    }

    /// Number of action cells `l`.
    pub fn n_action_cells(&self) -> usize {
        self.actions.n_cells()
    }

    /// Total number of bins `m·l`.
    pub fn n_bins(&self) -> usize {
        self.n_state_cells() * self.n_action_cells()
    }

    pub fn state_dim(&self) -> usize {
        self.states.lo.len()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.lo.len()
    }

    /// The index bijection `i = (j−1)·l + k` (all 1-based).
    pub fn bin_index(j: usize, k: usize, l: usize) -> usize {
        (j - 1) * l + k
    }

    /// Inverse of the bijection: `(j, k)` of bin `i`.
    pub fn state_action_cells(&self, i: usize) -> (usize, usize) {
        let l = self.n_action_cells();
        let j = (i + l - 1) / l; // ⌈i/l⌉
        let k = i - (j - 1) * l;
        (j, k)
    }

    /// Bin containing `(x, a)`; out-of-region points are clamped.
    pub fn bin_of(&self, x: &[T], a: &[T]) -> usize {
        let j = self.states.cell_of(x);
        let k = self.actions.cell_of(a);
        Self::bin_index(j, k, self.n_action_cells())
    }

    /// 1-based state cell containing `x` (clamped).
    pub fn state_cell_of(&self, x: &[T]) -> usize {
        self.states.cell_of(x)
    }

    /// `proj_X(B^i) = X_{⌈i/l⌉}` as a box.
    pub fn proj_state_cell(&self, i: usize) -> Cell<T> {
        self.states.cell(self.state_action_cells(i).0)
    }

    /// Bounds of state cell `j` (1-based).
    pub fn state_cell(&self, j: usize) -> Cell<T> {
        self.states.cell(j)
    }

    /// `a^i`, the midpoint of `proj_A(B^i)`.
    pub fn midpoint_action(&self, i: usize) -> Vec<T> {
        self.actions.cell(self.state_action_cells(i).1).midpoint()
    }

    /// Action cell of bin `i` as a box.
    pub fn proj_action_cell(&self, i: usize) -> Cell<T> {
        self.actions.cell(self.state_action_cells(i).1)
    }

    /// Bin indices (1-based) whose state cell is `j`: `(j−1)l+1 ..= jl`.
    pub fn bins_of_state_cell(&self, j: usize) -> std::ops::RangeInclusive<usize> {
        let l = self.n_action_cells();
        (j - 1) * l + 1..=j * l
    }

    /// CSV export of the layout: per bin the cell bounds and midpoint action.
    pub fn to_csv(&self) -> String {
        let sd = self.state_dim();
        let ad = self.action_dim();
        let mut out = String::from("bin,state_cell,action_cell");
        for i in 1..=sd {
            out.push_str(&format!(",x{i}_lo,x{i}_hi"));
        }
        for i in 1..=ad {
            out.push_str(&format!(",a{i}_lo,a{i}_hi"));
        }
        for i in 1..=ad {
            out.push_str(&format!(",a{i}_mid"));
        }
        out.push('\n');
        for i in 1..=self.n_bins() {
            let (j, k) = self.state_action_cells(i);
            let sc = self.proj_state_cell(i);
            let ac = self.proj_action_cell(i);
            out.push_str(&format!("{i},{j},{k}"));
            for a in 0..sd {
                out.push_str(&format!(",{},{}", sc.lo[a], sc.hi[a]));
            }
            for a in 0..ad {
                out.push_str(&format!(",{},{}", ac.lo[a], ac.hi[a]));
            }
            for v in self.midpoint_action(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}
