//! Banded finite-difference operators for odd derivatives with the
//! half-line boundary closures, plus BC-free diagnostic derivatives.
//!
//! Evolution operators act on the full node vector. Node `0` and node
//! `n-1` are constraint rows (the Dirichlet values are imposed by the
//! time stepper), so their operator rows are empty. Left ghost values are
//! eliminated by polynomial extrapolation through the boundary data; right
//! ghosts are taken as zero, which is the discrete form of the homogeneous
//! artificial conditions at `x = L`.

use crate::banded::BandedMatrix;
use crate::error::{check_len, Error, Result};
use crate::fd;
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StencilOrder {
    #[default]
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn accuracy(self) -> usize {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    pub fn from_accuracy(q: i64) -> Option<Self> {
        match q {
            2 => Some(StencilOrder::Second),
            4 => Some(StencilOrder::Fourth),
            _ => None,
        }
    }
}

/// Left boundary data used to eliminate ghost nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftClosure {
    /// `u(0) = 0`.
    Dirichlet,
    /// `u(0) = u_x(0) = 0`.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub left: LeftClosure,
    pub stencil: StencilOrder,
}

impl BoundarySpec {
    pub fn new(left: LeftClosure, stencil: StencilOrder) -> Self {
        BoundarySpec { left, stencil }
    }

    /// Left closure implied by the regularization parameter.
    pub fn for_eps(eps: f64, stencil: StencilOrder) -> Self {
        let left = if eps > 0.0 {
            LeftClosure::Clamped
        } else {
            LeftClosure::Dirichlet
        };
        BoundarySpec { left, stencil }
    }

    // Number of polynomial coefficients of the ghost extrapolant. These
    // sizes were picked by an eigenvalue scan of the linear CN operator.
    fn ghost_poly(&self) -> usize {
        match (self.left, self.stencil) {
            (LeftClosure::Dirichlet, StencilOrder::Second) => 5,
            (LeftClosure::Dirichlet, StencilOrder::Fourth) => 6,
            (LeftClosure::Clamped, StencilOrder::Second) => 7,
            (LeftClosure::Clamped, StencilOrder::Fourth) => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Boundary value row; the operator row is empty.
    Constraint,
    /// Stencil reaches past either end and uses ghost elimination.
    Closure,
    Interior,
}

#[derive(Debug, Clone)]
pub struct BandedOperator {
    order: usize,
    accuracy: usize,
    matrix: BandedMatrix,
    kinds: Vec<RowKind>,
}

impl BandedOperator {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn accuracy(&self) -> usize {
        self.accuracy
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    pub fn kl(&self) -> usize {
        self.matrix.kl()
    }

    pub fn ku(&self) -> usize {
        self.matrix.ku()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(u)
    }

    /// Largest polynomial degree reproduced exactly on interior rows.
    pub fn exactness_degree(&self) -> usize {
        self.order + self.accuracy - 1
    }
}

/// Derivative operator of odd `order` with the given boundary closure.
pub fn d_op(grid: &GridSpec, order: usize, bc: &BoundarySpec) -> Result<BandedOperator> {
    if !matches!(order, 1 | 3 | 5) {
        return Err(Error::Config(format!(
            "derivative order must be 1, 3 or 5, got {order}"
        )));
    }
    let n = grid.n_nodes();
    let q = bc.stencil.accuracy();
    let p = fd::centered_half_width(order, q);
    let w = fd::centered(order, q);
    let scale = grid.dx().powi(-(order as i32));
    let npoly = bc.ghost_poly();
    let clamped = bc.left == LeftClosure::Clamped;
    let ghosts: Vec<Vec<f64>> = (1..=p)
        .map(|g| fd::ghost_weights(g, npoly, clamped))
        .collect();
    let reach = ghosts.first().map_or(0, |g| g.len());

    let mut dense_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut kinds = vec![RowKind::Interior; n];
    kinds[0] = RowKind::Constraint;
    kinds[n - 1] = RowKind::Constraint;
    for j in 1..n - 1 {
        let mut row = vec![0.0; n.min(j + p + reach + 1)];
        for (i, &c) in w.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let m = j as i64 + i as i64 - p as i64;
            if m < 0 {
                kinds[j] = RowKind::Closure;
                for (jj, gw) in ghosts[(-m - 1) as usize].iter().enumerate() {
                    row[jj] += c * gw;
                }
            } else if m as usize >= n {
                kinds[j] = RowKind::Closure;
            } else {
                row[m as usize] += c;
            }
        }
        dense_rows[j] = row
            .into_iter()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .map(|(m, v)| (m, v * scale))
            .collect();
    }
    let matrix = assemble(n, &dense_rows);
    Ok(BandedOperator {
        order,
        accuracy: q,
        matrix,
        kinds,
    })
}

fn assemble(n: usize, rows: &[Vec<(usize, f64)>]) -> BandedMatrix {
    let mut kl = 0;
    let mut ku = 0;
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
    }
    let mut m = BandedMatrix::zeros(n, kl, ku);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            m.add(i, j, v);
        }
    }
    m
}

/// Derivative of any order with no boundary assumption: centered rows in
/// the interior and shifted one-sided stencils of the same accuracy near
/// both ends. Every row is populated.
pub fn derivative_op(grid: &GridSpec, order: usize, stencil: StencilOrder) -> Result<BandedMatrix> {
    if order == 0 || order > 5 {
        return Err(Error::Config(format!(
            "diagnostic derivative order must be in 1..=5, got {order}"
        )));
    }
    let n = grid.n_nodes();
    let q = stencil.accuracy();
    let p = fd::centered_half_width(order, q);
    let w = fd::centered(order, q);
    let len = fd::one_sided_len(order, q);
    let scale = grid.dx().powi(-(order as i32));
    let mut rows = vec![Vec::new(); n];
    for (j, row) in rows.iter_mut().enumerate() {
        if j >= p && j + p < n {
            for (i, &c) in w.iter().enumerate() {
                if c != 0.0 {
                    row.push((j + i - p, c * scale));
                }
            }
        } else {
            let start = if j < p { 0 } else { n - len };
            let nodes: Vec<f64> = (0..len).map(|i| (start + i) as f64 - j as f64).collect();
            for (i, c) in fd::fornberg(0.0, &nodes, order).into_iter().enumerate() {
                row.push((start + i, c * scale));
            }
        }
    }
    Ok(assemble(n, &rows))
}

/// One-sided approximation of `u_xx(0)`, fourth-order accurate.
pub fn boundary_trace_uxx(u: &[f64], grid: &GridSpec) -> Result<f64> {
    check_len(grid.n_nodes(), u.len())?;
    let w = trace_weights();
    let h2 = grid.dx() * grid.dx();
    Ok(w.iter().zip(u).map(|(c, v)| c * v).sum::<f64>() / h2)
}

/// One-sided approximation of `u_x(0)`, fourth-order accurate.
pub fn boundary_slope(u: &[f64], grid: &GridSpec) -> Result<f64> {
    check_len(grid.n_nodes(), u.len())?;
    let nodes: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let w = fd::fornberg(0.0, &nodes, 1);
    Ok(w.iter().zip(u).map(|(c, v)| c * v).sum::<f64>() / grid.dx())
}

fn trace_weights() -> Vec<f64> {
    let nodes: Vec<f64> = (0..6).map(|i| i as f64).collect();
    fd::fornberg(0.0, &nodes, 2)
}

/// Every operator a run needs, built once per (grid, eps, stencil).
#[derive(Debug, Clone)]
pub struct OperatorSet {
    grid: GridSpec,
    eps: f64,
    stencil: StencilOrder,
    d3: BandedOperator,
    d5: Option<BandedOperator>,
    linear: BandedMatrix,
    dx1: BandedMatrix,
    dx2: BandedMatrix,
}

impl OperatorSet {
    pub fn new(grid: &GridSpec, eps: f64, stencil: StencilOrder) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Config(format!("eps must be finite and >= 0, got {eps}")));
        }
        // u_x(0) = 0 is imposed only through the fifth-derivative closure.
        // Feeding it into the third-derivative ghosts as well makes the
        // semi-discrete operator unstable for small eps.
        let d3 = d_op(grid, 3, &BoundarySpec::new(LeftClosure::Dirichlet, stencil))?;
        let d5 = if eps > 0.0 {
            Some(d_op(grid, 5, &BoundarySpec::new(LeftClosure::Clamped, stencil))?)
        } else {
            None
        };
        let mut linear = d3.matrix().scaled(-1.0);
        if let Some(d5) = &d5 {
            linear = linear.lin_comb(1.0, d5.matrix(), eps)?;
        }
        Ok(OperatorSet {
            grid: grid.clone(),
            eps,
            stencil,
            dx1: derivative_op(grid, 1, StencilOrder::Second)?,
            dx2: derivative_op(grid, 2, StencilOrder::Second)?,
            d3,
            d5,
            linear,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn stencil(&self) -> StencilOrder {
        self.stencil
    }

    pub fn d3(&self) -> &BandedOperator {
        &self.d3
    }

    pub fn d5(&self) -> Option<&BandedOperator> {
        self.d5.as_ref()
    }

    /// `-D3 + eps D5` with empty constraint rows.
    pub fn linear(&self) -> &BandedMatrix {
        &self.linear
    }

    pub fn ux(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.dx1.matvec(u)
    }

    pub fn uxx(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.dx2.matvec(u)
    }
}
