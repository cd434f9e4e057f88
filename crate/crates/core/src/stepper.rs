//! Crank–Nicolson in the linear terms, midpoint-implicit in the nonlinear
//! flux, resolved by Picard iteration with a Newton fallback.

use std::time::{Duration, Instant};

use crate::banded::{BandedLu, BandedMatrix};
use crate::energy::{self, EnergyRecord};
use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::model::{flux_divergence, flux_divergence_jacobian, FieldState, SolverParams};
use crate::operators::{boundary_slope, OperatorSet};

/// Forcing term `S(x, t)` added to the right-hand side.
pub type Source<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

const NEWTON_MAX_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub picard_iters: usize,
    /// Sup-norm change of the last nonlinear update.
    pub residual: f64,
    pub newton_iters: usize,
    pub wall: Duration,
}

pub struct Stepper<'a> {
    params: SolverParams,
    ops: &'a OperatorSet,
    source: Option<Source<'a>>,
    lhs: BandedMatrix,
    lu: BandedLu,
    x: Vec<f64>,
    base: Vec<f64>,
    mid: Vec<f64>,
    b: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &SolverParams, ops: &'a OperatorSet) -> Result<Self> {
        params.validate()?;
        if params.eps != ops.eps() || params.stencil != ops.stencil() {
            return Err(Error::Config(
                "operator set was built for a different eps or stencil order".into(),
            ));
        }
        let n = ops.grid().n_nodes();
        let lhs = BandedMatrix::identity(n).lin_comb(1.0, ops.linear(), -0.5 * params.dt)?;
        let lu = BandedLu::factor(&lhs)?;
        Ok(Stepper {
            params: params.clone(),
            ops,
            source: None,
            lhs,
            lu,
            x: ops.grid().nodes(),
            base: vec![0.0; n],
            mid: vec![0.0; n],
            b: vec![0.0; n],
            next: vec![0.0; n],
        })
    }

    pub fn with_source(mut self, source: Source<'a>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn ops(&self) -> &OperatorSet {
        self.ops
    }

    /// Advances `state` by one time step.
    pub fn step(&mut self, state: &FieldState) -> Result<(FieldState, StepInfo)> {
        let start = Instant::now();
        let n = self.x.len();
        check_len(n, state.u.len())?;
        let dt = self.params.dt;
        let t_new = state.t + dt;
        let u = &state.u;

        self.ops.linear().matvec_into(u, &mut self.base);
        for j in 0..n {
            self.base[j] = u[j] + 0.5 * dt * self.base[j];
        }
        if let Some(src) = self.source {
            let th = state.t + 0.5 * dt;
            for j in 1..n - 1 {
                self.base[j] += dt * src(self.x[j], th);
            }
        }
        self.base[0] = 0.0;
        self.base[n - 1] = 0.0;

        let dx = self.ops.grid().dx();
        let (k, stencil) = (self.params.k, self.params.stencil);
        let mut v = u.clone();
        let mut history = Vec::new();
        let mut converged = false;
        for _ in 0..self.params.picard_max_iters {
            for j in 0..n {
                self.mid[j] = 0.5 * (u[j] + v[j]);
            }
            let nl = flux_divergence(&self.mid, k, dx, stencil);
            for j in 0..n {
                self.b[j] = self.base[j] + dt * nl[j];
            }
            self.b[0] = 0.0;
            self.b[n - 1] = 0.0;
            self.next.copy_from_slice(&self.b);
            self.lu.solve_in_place(&mut self.next)?;
            let change = sup_diff(&self.next, &v);
            history.push(change);
            if !change.is_finite() || self.next.iter().any(|x| !x.is_finite()) {
                break;
            }
            std::mem::swap(&mut v, &mut self.next);
            if change < self.params.picard_tol {
                converged = true;
                break;
            }
        }
        let picard_iters = history.len();
        let mut newton_iters = 0;
        if !converged {
            // Newton on G(v) = M v - base - dt N((u + v) / 2), restarted from
            // the old level if Picard wandered off.
            let last = *history.last().unwrap_or(&f64::INFINITY);
            if !(last.is_finite() && last <= history[0]) {
                v.copy_from_slice(u);
            }
            for _ in 0..NEWTON_MAX_ITERS {
                newton_iters += 1;
                for j in 0..n {
                    self.mid[j] = 0.5 * (u[j] + v[j]);
                }
                let nl = flux_divergence(&self.mid, k, dx, stencil);
                let mut g = self.lhs.matvec(&v)?;
                for j in 0..n {
                    g[j] = -(g[j] - self.base[j] - dt * nl[j]);
                }
                g[0] = -v[0];
                g[n - 1] = -v[n - 1];
                let jn = flux_divergence_jacobian(&self.mid, k, dx, stencil);
                let jac = self.lhs.lin_comb(1.0, &jn, -0.5 * dt)?;
                let mut delta = g;
                BandedLu::factor(&jac)?.solve_in_place(&mut delta)?;
                let change = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                for j in 0..n {
                    v[j] += delta[j];
                }
                if !change.is_finite() {
                    return Err(Error::Divergence { t: t_new });
                }
                history.push(change);
                if change < self.params.picard_tol {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::StepFailure { t: t_new, history });
        }
        v[0] = 0.0;
        v[n - 1] = 0.0;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { t: t_new });
        }
        let info = StepInfo {
            picard_iters,
            residual: *history.last().unwrap_or(&0.0),
            newton_iters,
            wall: start.elapsed(),
        };
        Ok((FieldState { u: v, t: t_new }, info))
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// One step with freshly assembled operators.
pub fn step(state: &FieldState, params: &SolverParams, ops: &OperatorSet) -> Result<FieldState> {
    Stepper::new(params, ops)?.step(state).map(|(s, _)| s)
}

#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    /// Keep a full-field snapshot every this many steps (the final state is
    /// always kept).
    pub snapshot_every: usize,
    /// Bound on `|u0_x(0)|` when `eps > 0`.
    pub compat_tol: f64,
    pub source: Option<Source<'a>>,
    /// Fraction of the domain, at the right end, monitored for mass.
    pub right_fraction: f64,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            snapshot_every: 100,
            compat_tol: 1e-3,
            source: None,
            right_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub steps: Vec<StepInfo>,
    pub records: Vec<EnergyRecord>,
    /// Largest fraction of `‖u‖²` found in the monitored right strip.
    pub right_mass_max: f64,
    /// One-sided estimate of `u0_x(0)`.
    pub u0_slope: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn total_picard_iters(&self) -> usize {
        self.steps.iter().map(|s| s.picard_iters).sum()
    }
}

/// Checks the compatibility conditions on the initial data.
pub fn check_initial_data(u0: &[f64], params: &SolverParams, grid: &GridSpec, compat_tol: f64) -> Result<f64> {
    check_len(grid.n_nodes(), u0.len())?;
    FieldState::new(u0.to_vec(), 0.0)?;
    let last = *u0.last().unwrap_or(&0.0);
    if last != 0.0 {
        return Err(Error::Precondition(format!(
            "u0(L) = {last:e}; the artificial right boundary requires u0(L) = 0"
        )));
    }
    let slope = boundary_slope(u0, grid)?;
    if params.eps > 0.0 && slope.abs() > compat_tol {
        return Err(Error::Precondition(format!(
            "u0_x(0) ≈ {slope:e} exceeds compat_tol = {compat_tol:e}; eps > 0 requires u_x(0) = 0"
        )));
    }
    Ok(slope)
}

/// Integrates from `t = 0` to `T`, recording energies at every step.
pub fn solve_ibvp(u0: &[f64], params: &SolverParams, grid: &GridSpec, opts: &RunOptions) -> Result<Trajectory> {
    params.validate()?;
    let ops = OperatorSet::new(grid, params.eps, params.stencil)?;
    solve_with_ops(u0, params, &ops, opts)
}

pub fn solve_with_ops(u0: &[f64], params: &SolverParams, ops: &OperatorSet, opts: &RunOptions) -> Result<Trajectory> {
    let grid = ops.grid();
    let u0_slope = check_initial_data(u0, params, grid, opts.compat_tol)?;
    let mut stepper = Stepper::new(params, ops)?;
    if let Some(src) = opts.source {
        stepper = stepper.with_source(src);
    }
    let every = opts.snapshot_every.max(1);
    let n_steps = params.n_steps();
    let strip_start = ((1.0 - opts.right_fraction) * (grid.n_nodes() - 1) as f64).floor() as usize;

    let mut state = FieldState::new(u0.to_vec(), 0.0)?;
    let mut records = Vec::with_capacity(n_steps + 1);
    records.push(energy::record(&state, None, params, ops)?);
    let mut snapshots = vec![state.clone()];
    let mut steps = Vec::with_capacity(n_steps);
    let mut right_mass_max = right_mass(&state.u, grid, strip_start);

    for i in 1..=n_steps {
        let (mut next, info) = stepper.step(&state).map_err(|e| Error::AtStep {
            step: i,
            t: state.t,
            source: Box::new(e),
        })?;
        // Avoid drift in t from repeated addition.
        next.t = i as f64 * params.dt;
        let rec = energy::record(&next, records.last(), params, ops).map_err(|e| Error::AtStep {
            step: i,
            t: next.t,
            source: Box::new(e),
        })?;
        records.push(rec);
        right_mass_max = right_mass_max.max(right_mass(&next.u, grid, strip_start));
        steps.push(info);
        if i % every == 0 || i == n_steps {
            snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(Trajectory {
        snapshots,
        steps,
        records,
        right_mass_max,
        u0_slope,
    })
}

fn right_mass(u: &[f64], grid: &GridSpec, start: usize) -> f64 {
    let total: f64 = (0..u.len()).map(|j| grid.weight(j) * u[j] * u[j]).sum();
    if total == 0.0 {
        return 0.0;
    }
    let strip: f64 = (start..u.len()).map(|j| grid.weight(j) * u[j] * u[j]).sum();
    strip / total
}
