//! The regularized equation `u_t + u^k u_x + u_xxx - eps u_xxxxx = 0`.

use crate::banded::BandedMatrix;
use crate::error::{check_len, Error, Result};
use crate::fd;
use crate::operators::{OperatorSet, StencilOrder};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub k: u32,
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub stencil: StencilOrder,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            k: 1,
            eps: 0.0,
            dt: 1e-4,
            t_final: 1.0,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            stencil: StencilOrder::Second,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        match self.k {
            1..=3 => {}
            4 => {
                return Err(Error::Config(
                    "k = 4 is the critical case, where solutions may blow up; it is not supported".into(),
                ))
            }
            k => return Err(Error::Config(format!("k must be 1, 2 or 3, got {k}"))),
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::Config(format!("eps must lie in [0, 1], got {}", self.eps)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {}", self.t_final)));
        }
        if self.dt >= self.t_final {
            return Err(Error::Config(format!(
                "dt = {} must be smaller than T = {}",
                self.dt, self.t_final
            )));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return Err(Error::Config(format!(
                "T = {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return Err(Error::Config(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iters == 0 {
            return Err(Error::Config("picard_max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// k = 3 lies outside the global theory; results are local-in-time.
    pub fn local_theory_regime(&self) -> bool {
        self.k == 3
    }
}

/// Traveling wave `A sech^{2/k}(B (x - v t - x0))` of the unregularized
/// equation. The family is indexed by `c`: `v = 4c²` for k = 1 (so that
/// `u = 12c² sech²(c(x - 4c²t - x0))`) and `v = c` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Soliton {
    pub amplitude: f64,
    pub inv_width: f64,
    pub speed: f64,
    pub x0: f64,
    k: u32,
}

impl Soliton {
    pub fn new(k: u32, c: f64, x0: f64) -> Self {
        let kf = k as f64;
        let speed = if k == 1 { 4.0 * c * c } else { c };
        Soliton {
            amplitude: (speed * (kf + 1.0) * (kf + 2.0) / 2.0).powf(1.0 / kf),
            inv_width: kf * speed.sqrt() / 2.0,
            speed,
            x0,
            k,
        }
    }

    pub fn width(&self) -> f64 {
        1.0 / self.inv_width
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.speed * t
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let z = self.inv_width * (x - self.center(t));
        self.amplitude * (1.0 / z.cosh()).powf(2.0 / self.k as f64)
    }
}

pub fn soliton(k: u32, c: f64, x0: f64, x: f64, t: f64) -> f64 {
    Soliton::new(k, c, x0).eval(x, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    /// Checks `u(0) = 0` and finiteness.
    pub fn new(u: Vec<f64>, t: f64) -> Result<Self> {
        let s = FieldState { u, t };
        s.check()?;
        Ok(s)
    }

    pub fn zeros(n: usize) -> Self {
        FieldState { u: vec![0.0; n], t: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        match self.u.first() {
            None => return Err(Error::Precondition("empty field".into())),
            Some(&u0) if u0 != 0.0 => {
                return Err(Error::Precondition(format!("u(0) = {u0:e}, must vanish")))
            }
            _ => {}
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: self.t });
        }
        Ok(())
    }
}

/// Pointwise `u^{k+1} / (k+1)`.
pub fn nonlinear_flux(u: &[f64], k: u32) -> Vec<f64> {
    let kp = (k + 1) as i32;
    u.iter().map(|v| v.powi(kp) / kp as f64).collect()
}

/// Symmetric two-point flux with `(b - a) F(a, b) = (b^{k+2} - a^{k+2}) / ((k+1)(k+2))`,
/// which makes the flux-differenced term conserve the discrete L² norm.
#[inline]
pub fn two_point_flux(a: f64, b: f64, k: u32) -> f64 {
    let m = k + 1;
    let mut s = 0.0;
    let mut ap = 1.0;
    for i in 0..=m {
        s += ap * b.powi((m - i) as i32);
        ap *= a;
    }
    s / ((m * (m + 1)) as f64)
}

/// Partial derivatives `(∂F/∂a, ∂F/∂b)`.
#[inline]
fn two_point_flux_grad(a: f64, b: f64, k: u32) -> (f64, f64) {
    let m = k + 1;
    let c = (m * (m + 1)) as f64;
    let mut fa = 0.0;
    let mut fb = 0.0;
    for i in 0..=m {
        let j = m - i;
        if i > 0 {
            fa += i as f64 * a.powi(i as i32 - 1) * b.powi(j as i32);
        }
        if j > 0 {
            fb += j as f64 * a.powi(i as i32) * b.powi(j as i32 - 1);
        }
    }
    (fa / c, fb / c)
}

/// Flux-differencing weights `d_l`, `l = 1..=p`, of the first derivative.
fn flux_weights(stencil: StencilOrder) -> Vec<f64> {
    let w = fd::centered(1, stencil.accuracy());
    let p = w.len() / 2;
    w[p + 1..].to_vec()
}

/// `-(u^{k+1}/(k+1))_x` in flux-differenced form. Values outside the grid
/// are zero; the two boundary entries are zero.
pub fn flux_divergence(u: &[f64], k: u32, dx: f64, stencil: StencilOrder) -> Vec<f64> {
    let n = u.len();
    let d = flux_weights(stencil);
    let at = |i: i64| if i < 0 || i >= n as i64 { 0.0 } else { u[i as usize] };
    let mut out = vec![0.0; n];
    for j in 1..n.saturating_sub(1) {
        let uj = u[j];
        let mut s = 0.0;
        for (l, &dl) in d.iter().enumerate() {
            let l = l as i64 + 1;
            s += dl * (two_point_flux(uj, at(j as i64 + l), k) - two_point_flux(uj, at(j as i64 - l), k));
        }
        out[j] = -2.0 * s / dx;
    }
    out
}

/// Jacobian of [`flux_divergence`].
pub fn flux_divergence_jacobian(u: &[f64], k: u32, dx: f64, stencil: StencilOrder) -> BandedMatrix {
    let n = u.len();
    let d = flux_weights(stencil);
    let p = d.len();
    let mut jac = BandedMatrix::zeros(n, p, p);
    for j in 1..n.saturating_sub(1) {
        let uj = u[j];
        let mut diag = 0.0;
        for (l, &dl) in d.iter().enumerate() {
            let l = l + 1;
            for (sign, m) in [(1.0, j as i64 + l as i64), (-1.0, j as i64 - l as i64)] {
                let um = if m < 0 || m >= n as i64 { 0.0 } else { u[m as usize] };
                let (fa, fb) = two_point_flux_grad(uj, um, k);
                diag += sign * dl * fa;
                if m >= 0 && m < n as i64 {
                    jac.add(j, m as usize, -2.0 * sign * dl * fb / dx);
                }
            }
        }
        jac.add(j, j, -2.0 * diag / dx);
    }
    jac
}

/// `u_t = -(u^{k+1}/(k+1))_x - D3 u + eps D5 u`.
pub fn rhs(state: &FieldState, params: &SolverParams, ops: &OperatorSet) -> Result<Vec<f64>> {
    check_len(ops.grid().n_nodes(), state.u.len())?;
    state.check()?;
    let mut out = flux_divergence(&state.u, params.k, ops.grid().dx(), ops.stencil());
    let mut lin = vec![0.0; out.len()];
    ops.linear().matvec_into(&state.u, &mut lin);
    for (o, l) in out.iter_mut().zip(&lin) {
        *o += l;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: state.t });
    }
    Ok(out)
}

/// `u_t` from the equation itself (no differencing in time).
pub fn u_t_residual(state: &FieldState, params: &SolverParams, ops: &OperatorSet) -> Result<Vec<f64>> {
    rhs(state, params, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, weighted_inner};
    use proptest::prelude::*;

    fn params(k: u32, eps: f64) -> SolverParams {
        SolverParams {
            k,
            eps,
            ..SolverParams::default()
        }
    }

    #[test]
    fn soliton_profiles() {
        let s = Soliton::new(1, 0.5, 0.0);
        assert!((s.amplitude - 3.0).abs() < 1e-12 && (s.inv_width - 0.5).abs() < 1e-12);
        assert!((s.speed - 1.0).abs() < 1e-15);
        let s = Soliton::new(2, 0.5, 0.0);
        assert!((s.amplitude - 3f64.sqrt()).abs() < 1e-12);
        assert!((s.width() - 2f64.sqrt()).abs() < 1e-12);
        assert!((soliton(2, 0.5, 1.0, 1.5, 1.0) - 3f64.sqrt()).abs() < 1e-12);
        // k = 3: A³ = 10 v.
        let s = Soliton::new(3, 0.4, 0.0);
        assert!((s.amplitude.powi(3) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn soliton_solves_unregularized_equation() {
        // Residual u_t + u^k u_x + u_xxx by centered differences at a point.
        for k in 1..=3 {
            let s = Soliton::new(k, 0.5, 0.0);
            let (x, t, h) = (0.7, 0.0, 1e-3);
            let f = |x: f64, t: f64| s.eval(x, t);
            let ut = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
            let ux = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let uxxx = (f(x + 2.0 * h, t) - 2.0 * f(x + h, t) + 2.0 * f(x - h, t) - f(x - 2.0 * h, t))
                / (2.0 * h * h * h);
            let r = ut + f(x, t).powi(k as i32) * ux + uxxx;
            assert!(r.abs() < 1e-4, "k = {k}: {r}");
        }
    }

    #[test]
    fn flux_examples() {
        assert!(nonlinear_flux(&[0.0; 4], 2).iter().all(|&v| v == 0.0));
        assert_eq!(nonlinear_flux(&[2.0; 3], 1), vec![2.0; 3]);
        for k in 1..=3 {
            for v in [-1.3, 0.0, 0.7, 2.0] {
                let f = two_point_flux(v, v, k);
                let want = v.powi(k as i32 + 1) / (k + 1) as f64;
                assert!((f - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flux_derivative_at_midpoint() {
        // (x^3/3)' = x^2 = 0.25 at x = 0.5; fourth-order D1 is exact on cubics.
        let g = build_grid(1.0, 65).unwrap();
        let f = nonlinear_flux(&g.nodes(), 2);
        let d1 = crate::operators::d_op(
            &g,
            1,
            &crate::operators::BoundarySpec::for_eps(0.0, StencilOrder::Fourth),
        )
        .unwrap();
        let df = d1.apply(&f).unwrap();
        assert!((df[32] - 0.25).abs() < 1e-8, "{}", df[32]);
    }

    #[test]
    fn rhs_of_zero_is_zero() {
        let g = build_grid(10.0, 101).unwrap();
        let ops = OperatorSet::new(&g, 0.1, StencilOrder::Second).unwrap();
        let r = rhs(&FieldState::zeros(101), &params(2, 0.1), &ops).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_rejects_nonzero_boundary() {
        let g = build_grid(10.0, 101).unwrap();
        let ops = OperatorSet::new(&g, 0.0, StencilOrder::Second).unwrap();
        let s = FieldState { u: vec![1.0; 101], t: 0.0 };
        assert!(matches!(rhs(&s, &params(1, 0.0), &ops), Err(Error::Precondition(_))));
    }

    // u = x^2 e^{-x}: closed-form derivatives for the rhs oracle.
    fn bump_derivs(x: f64, n: i32) -> f64 {
        let nn = n as f64;
        (if n % 2 == 0 { 1.0 } else { -1.0 }) * (x * x - 2.0 * nn * x + nn * (nn - 1.0)) * (-x).exp()
    }

    fn rhs_error(n: usize, k: u32, eps: f64) -> f64 {
        let g = build_grid(30.0, n).unwrap();
        let ops = OperatorSet::new(&g, eps, StencilOrder::Second).unwrap();
        let mut u = g.sample(|x| bump_derivs(x, 0));
        u[n - 1] = 0.0;
        let r = rhs(&FieldState::new(u, 0.0).unwrap(), &params(k, eps), &ops).unwrap();
        let exact = g.sample(|x| {
            -(bump_derivs(x, 0).powi(k as i32) * bump_derivs(x, 1) + bump_derivs(x, 3))
                + eps * bump_derivs(x, 5)
        });
        let diff: Vec<f64> = (0..n).map(|j| if j == 0 || j == n - 1 { 0.0 } else { r[j] - exact[j] }).collect();
        weighted_inner(&diff, &diff, 0, &g).unwrap().sqrt()
    }

    #[test]
    fn rhs_matches_analytic_oracle_at_second_order() {
        for (k, eps) in [(1, 0.0), (2, 0.0), (2, 0.01)] {
            let e1 = rhs_error(601, k, eps);
            let e2 = rhs_error(1201, k, eps);
            let order = (e1 / e2).log2();
            assert!(order > 1.8, "k={k} eps={eps}: {e1} {e2} order {order}");
        }
    }

    #[test]
    fn fifth_derivative_contribution() {
        let g = build_grid(1.0, 101).unwrap();
        let ops = OperatorSet::new(&g, 1.0, StencilOrder::Second).unwrap();
        let u = g.sample(|x| x.powi(5));
        let d5 = ops.d5().unwrap().apply(&u).unwrap();
        assert!(((d5[50] - 120.0) / 120.0).abs() < 1e-6);
    }

    #[test]
    fn flux_difference_conserves_l2_exactly() {
        let g = build_grid(5.0, 64).unwrap();
        let mut u = g.sample(|x| x * (3.0 - x).sin() * (-0.3 * x).exp());
        u[63] = 0.0;
        for st in [StencilOrder::Second, StencilOrder::Fourth] {
            for k in 1..=3 {
                let n = flux_divergence(&u, k, g.dx(), st);
                let s: f64 = u.iter().zip(&n).map(|(a, b)| a * b).sum();
                assert!(s.abs() < 1e-12, "k={k}: {s}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = build_grid(3.0, 40).unwrap();
        let mut u = g.sample(|x| x * (2.0 - x).cos());
        u[39] = 0.0;
        for st in [StencilOrder::Second, StencilOrder::Fourth] {
            for k in 1..=3 {
                let jac = flux_divergence_jacobian(&u, k, g.dx(), st);
                for m in [1, 2, 7, 20, 38] {
                    let h = 1e-6;
                    let mut up = u.clone();
                    up[m] += h;
                    let mut um = u.clone();
                    um[m] -= h;
                    let fp = flux_divergence(&up, k, g.dx(), st);
                    let fm = flux_divergence(&um, k, g.dx(), st);
                    for j in 0..40 {
                        let fdv = (fp[j] - fm[j]) / (2.0 * h);
                        assert!((fdv - jac.get(j, m)).abs() < 1e-5 * (1.0 + fdv.abs()), "k={k} ({j},{m})");
                    }
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(params(1, 0.0).validate().is_ok());
        let e = params(4, 0.0).validate().unwrap_err().to_string();
        assert!(e.contains("critical"));
        assert!(params(1, 1.5).validate().is_err());
        let mut p = params(1, 0.0);
        p.dt = 2.0;
        assert!(p.validate().is_err());
        p.dt = 0.3;
        assert!(p.validate().is_err());
        assert!(params(3, 0.0).local_theory_regime());
    }

    proptest! {
        #[test]
        fn conservative_and_pointwise_agree(a in 0.2f64..2.0, c in 2.0f64..6.0, k in 1u32..=3) {
            let err = |n: usize| {
                let g = build_grid(12.0, n).unwrap();
                let u = g.sample(|x| a * x * (-(x - c).powi(2)).exp());
                let nl = flux_divergence(&u, k, g.dx(), StencilOrder::Second);
                let pw = g.sample(|x| {
                    let v = a * x * (-(x - c).powi(2)).exp();
                    let vx = a * (1.0 - 2.0 * x * (x - c)) * (-(x - c).powi(2)).exp();
                    -v.powi(k as i32) * vx
                });
                let d: Vec<f64> = (0..n).map(|j| if j == 0 || j == n - 1 { 0.0 } else { nl[j] - pw[j] }).collect();
                weighted_inner(&d, &d, 0, &g).unwrap().sqrt()
            };
            let (e1, e2) = (err(401), err(801));
            prop_assert!(e2 < e1 / 3.0, "{} {}", e1, e2);
        }

        #[test]
        fn rhs_odd_for_even_k(a in -2.0f64..2.0, c in 2.0f64..5.0, eps in prop_oneof![Just(0.0), 0.001f64..0.1]) {
            let g = build_grid(10.0, 101).unwrap();
            let ops = OperatorSet::new(&g, eps, StencilOrder::Second).unwrap();
            let u = g.sample(|x| a * x * (-(x - c).powi(2)).exp());
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            let p = params(2, eps);
            let r1 = rhs(&FieldState::new(u, 0.0).unwrap(), &p, &ops).unwrap();
            let r2 = rhs(&FieldState::new(neg, 0.0).unwrap(), &p, &ops).unwrap();
            for (x, y) in r1.iter().zip(&r2) {
                prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
