//! Uniform mesh on the truncated half-line `[0, L]` and trapezoid quadrature.

use crate::error::{check_len, Error, Result};

/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 32;

/// Uniform grid `x_j = j * dx`, `j = 0..n_nodes`, with `x_0 = 0` and
/// `x_{n-1} = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    length: f64,
    n_nodes: usize,
    dx: f64,
}

pub fn build_grid(length: f64, n_nodes: usize) -> Result<GridSpec> {
    if !length.is_finite() || length <= 0.0 {
        return Err(Error::Config(format!(
            "domain length must be positive and finite, got {length}"
        )));
    }
    if n_nodes < MIN_NODES {
        return Err(Error::Config(format!(
            "need at least {MIN_NODES} nodes, got {n_nodes}"
        )));
    }
    Ok(GridSpec {
        length,
        n_nodes,
        dx: length / (n_nodes - 1) as f64,
    })
}

impl GridSpec {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of node `j`; the last node is pinned to `L`.
    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.n_nodes {
            self.length
        } else {
            j as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|j| self.x(j)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes).map(|j| f(self.x(j))).collect()
    }

    /// Trapezoid weight of node `j`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.n_nodes {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Grid with `2(n-1)+1` nodes on the same interval.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            length: self.length,
            n_nodes: 2 * (self.n_nodes - 1) + 1,
            dx: self.dx / 2.0,
        }
    }

    /// Grid with every other node removed, if that still satisfies the node
    /// minimum.
    pub fn coarsened(&self) -> Result<GridSpec> {
        if (self.n_nodes - 1) % 2 != 0 {
            return Err(Error::Config(format!(
                "cannot coarsen a grid with {} nodes (n - 1 must be even)",
                self.n_nodes
            )));
        }
        build_grid(self.length, (self.n_nodes - 1) / 2 + 1)
    }
}

/// Composite trapezoid rule over `[0, L]`.
pub fn trapezoid(values: &[f64], grid: &GridSpec) -> Result<f64> {
    check_len(grid.n_nodes(), values.len())?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, v)| grid.weight(j) * v)
        .sum())
}

/// `∫_0^L (1+x)^p f g dx` by the composite trapezoid rule, `p ∈ {0, 1, 2}`.
pub fn weighted_inner(f: &[f64], g: &[f64], p: u32, grid: &GridSpec) -> Result<f64> {
    if p > 2 {
        return Err(Error::Config(format!(
            "weight exponent must be 0, 1 or 2, got {p}"
        )));
    }
    check_len(grid.n_nodes(), f.len())?;
    check_len(grid.n_nodes(), g.len())?;
    let mut acc = 0.0;
    for j in 0..grid.n_nodes() {
        let w = (1.0 + grid.x(j)).powi(p as i32);
        acc += grid.weight(j) * w * f[j] * g[j];
    }
    Ok(acc)
}

/// `‖f‖²` with trapezoid weights.
pub fn l2_sq(f: &[f64], grid: &GridSpec) -> Result<f64> {
    weighted_inner(f, f, 0, grid)
}
