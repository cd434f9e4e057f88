//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use gkdv::config::{parse_config, xgauss, Experiment, RunConfig};
use gkdv::energy::{estimate_report, weak_residual, EstimateReport, TestFunction, Tolerances};
use gkdv::experiments::{check_inequalities, eps_sweep, gronwall_uniqueness_test, soliton_benchmark};
use gkdv::grid::{build_grid, GridSpec};
use gkdv::model::SolverParams;
use gkdv::operators::{d_op, derivative_op, BoundarySpec, LeftClosure, OperatorSet, RowKind, StencilOrder};
use gkdv::runner::{SOLITON_L2_TOL, SOLITON_ORDER};
use gkdv::stepper::{solve_with_ops, RunOptions, Trajectory};
use rayon::prelude::*;

type Outcome = Result<(bool, String), String>;

const L: f64 = 40.0;
const BASE: (usize, f64) = (2049, 1e-4);
const FINE: (usize, f64) = (4097, 5e-5);
const T: f64 = 0.5;

fn data(grid: &GridSpec) -> Vec<f64> {
    let mut u = grid.sample(xgauss(1.0, 1.0, 3.0));
    let n = u.len();
    u[n - 1] = 0.0;
    u
}

fn params(k: u32, eps: f64, dt: f64) -> SolverParams {
    SolverParams {
        k,
        eps,
        dt,
        t_final: T,
        ..SolverParams::default()
    }
}

struct Run {
    grid: GridSpec,
    params: SolverParams,
    ops: OperatorSet,
    traj: Trajectory,
}

impl Run {
    fn new(k: u32, eps: f64, (n, dt): (usize, f64)) -> Result<Run, String> {
        let grid = build_grid(L, n).map_err(|e| e.to_string())?;
        let params = params(k, eps, dt);
        let ops = OperatorSet::new(&grid, eps, params.stencil).map_err(|e| e.to_string())?;
        // Snapshot times coincide across the two resolutions.
        let opts = RunOptions {
            snapshot_every: (0.01 / dt).round() as usize,
            ..RunOptions::default()
        };
        let traj = solve_with_ops(&data(&grid), &params, &ops, &opts).map_err(|e| e.to_string())?;
        Ok(Run { grid, params, ops, traj })
    }

    fn report(&self) -> Result<EstimateReport, String> {
        estimate_report(&self.traj.records, &self.params, &Tolerances::default()).map_err(|e| e.to_string())
    }
}

macro_rules! cached {
    ($name:ident, $k:expr, $eps:expr, $res:expr) => {
        fn $name() -> Result<&'static Run, String> {
            static CELL: OnceLock<Result<Run, String>> = OnceLock::new();
            CELL.get_or_init(|| Run::new($k, $eps, $res)).as_ref().map_err(|e| e.clone())
        }
    };
}

cached!(reg_base, 2, 1e-2, BASE);
cached!(reg_fine, 2, 1e-2, FINE);
cached!(kdv1_base, 1, 0.0, BASE);
cached!(kdv2_base, 2, 0.0, BASE);
cached!(kdv2_fine, 2, 0.0, FINE);

fn c1() -> Outcome {
    // Unit spacing keeps round-off in h^{-m} x^p below the tolerance.
    let g = build_grid(39.0, 40).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut check = |p: i32, m: i32, du: &[f64], rows: &dyn Fn(usize) -> bool| {
        for (j, v) in du.iter().enumerate() {
            if !rows(j) {
                continue;
            }
            let x = g.x(j);
            let exact = if p < m {
                0.0
            } else {
                (0..m).map(|i| (p - i) as f64).product::<f64>() * x.powi(p - m)
            };
            worst = worst.max((v - exact).abs() / exact.abs().max(1.0));
            checked += 1;
        }
    };
    for st in [StencilOrder::Second, StencilOrder::Fourth] {
        for left in [LeftClosure::Dirichlet, LeftClosure::Clamped] {
            for order in [1, 3, 5] {
                let op = d_op(&g, order, &BoundarySpec::new(left, st)).map_err(|e| e.to_string())?;
                for p in 0..=op.exactness_degree() as i32 {
                    let du = op.apply(&g.sample(|x| x.powi(p))).map_err(|e| e.to_string())?;
                    check(p, order as i32, &du, &|j| op.row_kinds()[j] == RowKind::Interior);
                }
            }
        }
        for order in 1..=5usize {
            let op = derivative_op(&g, order, st).map_err(|e| e.to_string())?;
            let hw = (order + 1) / 2 + st.accuracy() / 2 - 1;
            for p in 0..=(order + st.accuracy() - 1) as i32 {
                let du = op.matvec(&g.sample(|x| x.powi(p))).map_err(|e| e.to_string())?;
                check(p, order as i32, &du, &|j| j >= hw && j + hw < g.n_nodes());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max relative error {worst:.2e} over {checked} interior checks")))
}

fn identity_residual(run: &Run) -> Result<f64, String> {
    let e = run.report()?;
    Ok(e.entry("estimate_I").ok_or("missing estimate_I")?.margin.abs())
}

fn c2() -> Outcome {
    let (a, b) = (identity_residual(reg_base()?)?, identity_residual(reg_fine()?)?);
    let ratio = a / b;
    Ok((
        a <= 1e-3 && ratio >= 3.0,
        format!("residual {a:.3e} at n = 2049, {b:.3e} at n = 4097, ratio {ratio:.2}"),
    ))
}

fn c3() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for run in [kdv1_base()?, kdv2_base()?] {
        let e = run.report()?;
        let e = e.entry("estimate_I").ok_or("missing estimate_I")?;
        ok &= e.pass;
        msg.push(format!("k = {}: max step increase {:.2e} ‖u0‖²", run.params.k, e.margin));
    }
    Ok((ok, msg.join(", ")))
}

fn c4() -> Outcome {
    let r = reg_base()?.report()?;
    let ii = r.entry("estimate_II").ok_or("missing estimate_II")?;
    let iii = r.entry("estimate_III").ok_or("missing estimate_III")?;
    Ok((
        ii.pass && iii.pass && ii.margin >= 0.0 && iii.margin >= 0.0,
        format!("margins {:.3e} (C1 = {:.4}), {:.3e} (C2 = {:.4})", ii.margin, r.c1, iii.margin, r.c2),
    ))
}

fn c5() -> Outcome {
    let r = reg_base()?.report()?;
    let iv = r.entry("estimate_IV").ok_or("missing estimate_IV")?;
    Ok((iv.pass, format!("worst margin {:.3e} at t = {}; {}", iv.margin, iv.worst_t, iv.note)))
}

fn residual(run: &Run) -> Result<f64, String> {
    let phi = TestFunction::cubic_exp(&run.grid).map_err(|e| e.to_string())?;
    weak_residual(&run.traj, &phi, &run.params, &run.ops).map_err(|e| e.to_string())
}

fn c6() -> Outcome {
    let (a, b) = (residual(kdv2_base()?)?, residual(kdv2_fine()?)?);
    let order = (a / b).log2();
    Ok((
        a <= 5e-3 && order >= 1.8,
        format!("residual {a:.3e} at n = 2049, {b:.3e} at n = 4097, order {order:.2}"),
    ))
}

fn c7() -> Outcome {
    let reports: Vec<_> = [1u32, 2]
        .par_iter()
        .map(|&k| {
            let p = SolverParams {
                k,
                eps: 0.0,
                dt: 5e-5,
                t_final: 1.0,
                ..SolverParams::default()
            };
            soliton_benchmark(k, 0.5, 30.0, 80.0, 4097, &p, 2)
        })
        .collect();
    let mut ok = true;
    let mut msg = Vec::new();
    for r in reports {
        let r = r.map_err(|e| e.to_string())?;
        let e = r.levels[0].l2_err;
        let o = r.l2_orders[0];
        ok &= e <= SOLITON_L2_TOL && SOLITON_ORDER.contains(&o);
        msg.push(format!("k = {}: error {e:.3e}, order {o:.2}", r.k));
    }
    Ok((ok, msg.join("; ")))
}

fn c8() -> Outcome {
    let grid = build_grid(L, BASE.0).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        snapshot_every: 100,
        ..RunOptions::default()
    };
    let r = eps_sweep(&data(&grid), &params(2, 0.0, BASE.1), &grid, &[1e-2, 1e-3, 1e-4], &opts)
        .map_err(|e| e.to_string())?;
    let d: Vec<String> = r.rows.iter().map(|r| format!("{:.3e}", r.sup_dist)).collect();
    let b: Vec<String> = r.rows.iter().map(|r| format!("{:.3e}", r.sqrt_eps_uxx)).collect();
    Ok((r.pass(), format!("distances [{}], eps^1/2 max‖u_xx‖ [{}]", d.join(", "), b.join(", "))))
}

fn c9() -> Outcome {
    let grid = build_grid(L, BASE.0).map_err(|e| e.to_string())?;
    let u0 = data(&grid);
    let p = params(2, 0.0, BASE.1);
    let mut dz = grid.sample(xgauss(1e-6, 1.0, 4.0));
    let n = dz.len();
    dz[n - 1] = 0.0;
    let zero = vec![0.0; n];
    let (a, b) = rayon::join(
        || gronwall_uniqueness_test(&u0, &zero, &p, &grid, 1e-3),
        || gronwall_uniqueness_test(&u0, &dz, &p, &grid, 1e-3),
    );
    let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
    Ok((
        a.pass && b.pass,
        format!(
            "zero: max w1_z {:.1e}; perturbed: rate {:.3e} vs bound {:.3e}",
            a.max_w1_z(),
            b.rate,
            b.bound
        ),
    ))
}

fn c10() -> Outcome {
    let grid = build_grid(20.0, 1025).map_err(|e| e.to_string())?;
    let r = check_inequalities(&grid, 1000, 0).map_err(|e| e.to_string())?;
    Ok((
        r.pass(),
        format!(
            "{} violations in {} draws (slack {:.4}); dilation-invariant forms: {} violations",
            r.violations,
            r.draws.len(),
            r.slack,
            r.scaled_violations
        ),
    ))
}

fn c11() -> Outcome {
    let text = "k = 2\neps = 0.01\nL = 20.0\nn = 257\ndt = 0.001\nT = 0.05\ndata = \"xgauss\"\nx0 = 4.0\nenergy_every = 5\n";
    let mut cfg: RunConfig = parse_config(text).map_err(|e| e.to_string())?;
    cfg.experiment = Experiment::Solve;
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    for d in &dirs {
        gkdv::runner::run(&cfg, d.path()).map_err(|e| e.to_string())?;
    }
    let mut same = true;
    let mut files = 0;
    for name in ["energy.csv", "estimates.csv", "config.toml", "summary.txt"] {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        same &= a == b && !a.is_empty();
        files += 1;
    }
    Ok((same, format!("{files} output files compared byte for byte")))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "stencil exactness", c1),
        (2, "L2 identity, eps > 0", c2),
        (3, "L2 decay, eps = 0", c3),
        (4, "weighted estimates II and III", c4),
        (5, "time-derivative Gronwall envelope", c5),
        (6, "weak-form residual", c6),
        (7, "soliton benchmark", c7),
        (8, "eps sweep", c8),
        (9, "uniqueness rate", c9),
        (10, "interpolation inequalities", c10),
        (11, "determinism", c11),
    ];
    let results: Vec<(u32, &str, Outcome, f64)> = criteria
        .par_iter()
        .map(|(id, name, f)| {
            let start = Instant::now();
            let r = f();
            (*id, *name, r, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut failed = 0;
    for (id, name, r, secs) in results {
        let (ok, detail) = match r {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[acceptance] C{id} {name}: {} ({detail}; {secs:.1} s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("[acceptance] {failed} criteria failed");
        ExitCode::FAILURE
    }
}
