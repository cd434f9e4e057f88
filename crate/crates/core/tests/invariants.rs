use gkdv::config::xgauss;
use gkdv::energy::{check_estimate_i, check_interpolation_inequalities};
use gkdv::experiments::{gronwall_uniqueness_test, soliton_benchmark, ZERO_PERTURBATION_TOL};
use gkdv::grid::{build_grid, weighted_inner, GridSpec};
use gkdv::model::{rhs, FieldState, SolverParams};
use gkdv::operators::{d_op, BoundarySpec, LeftClosure, OperatorSet, RowKind, StencilOrder};
use gkdv::stepper::{solve_ibvp, RunOptions};
use gkdv::Error;
use proptest::prelude::*;

fn stencil() -> impl Strategy<Value = StencilOrder> {
    prop_oneof![Just(StencilOrder::Second), Just(StencilOrder::Fourth)]
}

fn params(k: u32, eps: f64, dt: f64, t: f64) -> SolverParams {
    SolverParams {
        k,
        eps,
        dt,
        t_final: t,
        ..SolverParams::default()
    }
}

fn bump(grid: &GridSpec, a: f64, s: f64, x0: f64) -> Vec<f64> {
    let mut u = grid.sample(xgauss(a, s, x0));
    let n = u.len();
    u[n - 1] = 0.0;
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shifted_monomials_exact_at_interior(n in 40usize..90, p_off in 0.0f64..1.0, st in stencil(),
                                            clamped in any::<bool>(), order in prop_oneof![Just(1usize), Just(3), Just(5)]) {
        // Unit spacing; shift keeps values moderate.
        let g = build_grid((n - 1) as f64, n).unwrap();
        let left = if clamped { LeftClosure::Clamped } else { LeftClosure::Dirichlet };
        let op = d_op(&g, order, &BoundarySpec::new(left, st)).unwrap();
        let x0 = p_off * (n - 1) as f64;
        let m = order as i32;
        for p in 0..=op.exactness_degree() as i32 {
            let s = 0.1;
            let du = op.apply(&g.sample(|x| (s * (x - x0)).powi(p))).unwrap();
            for (j, kind) in op.row_kinds().iter().enumerate() {
                if *kind != RowKind::Interior {
                    continue;
                }
                let y = s * (g.x(j) - x0);
                let exact = if p < m { 0.0 } else {
                    (0..m).map(|i| (p - i) as f64).product::<f64>() * y.powi(p - m) * s.powi(m)
                };
                prop_assert!((du[j] - exact).abs() <= 1e-8 * exact.abs().max(1.0), "p {} row {}", p, j);
            }
        }
    }

    #[test]
    fn operators_stay_in_declared_band(n in 32usize..200, st in stencil(), eps in prop_oneof![Just(0.0), Just(0.1)]) {
        let g = build_grid(10.0, n).unwrap();
        let ops = OperatorSet::new(&g, eps, st).unwrap();
        let m = ops.linear();
        for i in 0..n {
            for (j, v) in m.row(i) {
                if v != 0.0 {
                    prop_assert!(j + m.kl() >= i && j <= i + m.ku());
                }
            }
        }
        let (kl, ku) = m.tight_bandwidths();
        prop_assert!(kl <= m.kl() && ku <= m.ku());
    }

    #[test]
    fn weighted_quadrature_is_second_order(a in 0.2f64..1.0, p in 0u32..3) {
        // Oracle: ∫_0^8 (1+x)^p e^{-a x} dx by integrating the exact
        // antiderivative series.
        let exact = {
            let f = |x: f64| (1.0 + x).powi(p as i32) * (-a * x).exp();
            // composite Simpson on 20000 panels, error ~1e-16
            let m = 20000;
            let h = 8.0 / m as f64;
            let mut s = f(0.0) + f(8.0);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            s * h / 3.0
        };
        let err = |n: usize| {
            let g = build_grid(8.0, n).unwrap();
            let f = g.sample(|x| (-a * x / 2.0).exp());
            (weighted_inner(&f, &f, p, &g).unwrap() - exact).abs()
        };
        let order = (err(101) / err(201)).log2();
        prop_assert!((1.8..2.3).contains(&order), "order {}", order);
    }

    #[test]
    fn nonzero_constant_field_rejected(c in prop_oneof![-5.0f64..-1e-12, 1e-12f64..5.0], k in 1u32..=3) {
        let g = build_grid(10.0, 64).unwrap();
        let ops = OperatorSet::new(&g, 0.0, StencilOrder::Second).unwrap();
        let s = FieldState { u: vec![c; 64], t: 0.0 };
        prop_assert!(matches!(rhs(&s, &params(k, 0.0, 0.01, 1.0), &ops), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_data_stays_zero(n in 32usize..200, k in 1u32..=3, eps in prop_oneof![Just(0.0), 1e-4f64..0.1], st in stencil()) {
        let g = build_grid(10.0, n).unwrap();
        let mut p = params(k, eps, 0.01, 0.1);
        p.stencil = st;
        let tr = solve_ibvp(&vec![0.0; n], &p, &g, &RunOptions { snapshot_every: 1, ..RunOptions::default() }).unwrap();
        for s in &tr.snapshots {
            prop_assert!(s.u.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn boundary_values_hold_every_step(a in -1.0f64..1.0, x0 in 3.0f64..6.0, k in 1u32..=3,
                                       eps in prop_oneof![Just(0.0), 1e-3f64..0.05]) {
        let g = build_grid(20.0, 201).unwrap();
        // xgauss peaks near a*x0; normalise so k = 3 data stays O(1).
        let tr = solve_ibvp(&bump(&g, a / x0, 1.0, x0), &params(k, eps, 0.005, 0.1), &g,
                            &RunOptions { snapshot_every: 1, ..RunOptions::default() }).unwrap();
        prop_assert_eq!(tr.snapshots.len(), 21);
        for s in &tr.snapshots {
            prop_assert_eq!(s.u[0], 0.0);
            prop_assert_eq!(s.u[200], 0.0);
        }
    }

    #[test]
    // The left closure is not dissipative in the discrete norm, so data is
    // kept far enough from x = 0 that the dispersive tail stays negligible.
    fn kdv_limit_l2_never_grows(a in 0.1f64..1.0, s in 0.7f64..1.5, x0 in 8.0f64..12.0, k in 1u32..=2, st in stencil()) {
        let g = build_grid(20.0, 401).unwrap();
        let mut p = params(k, 0.0, 0.002, 0.1);
        p.stencil = st;
        let tr = solve_ibvp(&bump(&g, a, s, x0), &p, &g, &RunOptions::default()).unwrap();
        let e = check_estimate_i(&tr.records, &p, tr.records[0].l2_sq, 1e-3, 1e-8);
        prop_assert!(e.pass, "{:?}", e);
    }

    #[test]
    fn recorded_weights_are_ordered(a in -1.0f64..1.0, x0 in 3.0f64..6.0, eps in prop_oneof![Just(0.0), Just(0.01)]) {
        let g = build_grid(20.0, 201).unwrap();
        let tr = solve_ibvp(&bump(&g, a, 1.0, x0), &params(2, eps, 0.005, 0.05), &g, &RunOptions::default()).unwrap();
        for r in &tr.records {
            prop_assert!(r.l2_sq <= r.w1 && r.w1 <= r.w2);
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_difference(a in 0.1f64..1.0, x0 in 3.0f64..6.0) {
        let g = build_grid(20.0, 201).unwrap();
        let r = gronwall_uniqueness_test(&bump(&g, a, 1.0, x0), &vec![0.0; 201], &params(2, 0.0, 0.01, 0.1), &g, 1e-3).unwrap();
        prop_assert!(r.pass && r.max_w1_z() <= ZERO_PERTURBATION_TOL);
    }

    #[test]
    fn interpolation_inequalities_hold(terms in prop::collection::vec((-2.0f64..2.0, 0.3f64..2.0, 0.5f64..10.0), 1..4)) {
        let g = build_grid(20.0, 1025).unwrap();
        let mut u = g.sample(|x| terms.iter().map(|&(a, s, x0)| xgauss(a, s, x0)(x)).sum());
        u[1024] = 0.0;
        let c = check_interpolation_inequalities(&u, &g).unwrap();
        prop_assert!(c.holds() && c.scaled_hold(), "{:?}", c);
    }
}

#[test]
fn interior_soliton_keeps_its_l2_norm() {
    let p = params(1, 0.0, 2e-3, 1.0);
    let r = soliton_benchmark(1, 0.5, 20.0, 50.0, 801, &p, 1).unwrap();
    assert!(r.levels[0].l2_drift < 1e-4, "{:?}", r.levels);
}
