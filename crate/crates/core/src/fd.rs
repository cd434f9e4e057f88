//! Finite-difference weights on arbitrary node sets.

/// Weights `c` with `f^(m)(z) ≈ Σ c[i] f(x[i])` (Fornberg's recursion).
///
/// The result is exact for polynomials of degree `< x.len()`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    assert!(n > m, "need more than {m} nodes for derivative order {m}");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Half-width of the centered stencil for an `order`-th derivative at the
/// given (even) accuracy.
pub fn centered_half_width(order: usize, accuracy: usize) -> usize {
    (order + 1) / 2 + accuracy / 2 - 1
}

/// Centered weights (unit spacing) for offsets `-p..=p`.
pub fn centered(order: usize, accuracy: usize) -> Vec<f64> {
    let p = centered_half_width(order, accuracy) as i64;
    let nodes: Vec<f64> = (-p..=p).map(|o| o as f64).collect();
    let mut w = fornberg(0.0, &nodes, order);
    // Clean symmetric round-off so that e.g. odd stencils are exactly odd.
    let len = w.len();
    for i in 0..len / 2 {
        let a = w[i];
        let b = w[len - 1 - i];
        if order % 2 == 1 {
            let s = 0.5 * (b - a);
            w[i] = -s;
            w[len - 1 - i] = s;
        } else {
            let s = 0.5 * (a + b);
            w[i] = s;
            w[len - 1 - i] = s;
        }
    }
    if order % 2 == 1 {
        w[len / 2] = 0.0;
    }
    w
}

/// Number of nodes in a one-sided stencil of the given order and accuracy.
pub fn one_sided_len(order: usize, accuracy: usize) -> usize {
    order + accuracy
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn small_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            if l != 0.0 {
                for j in k..n {
                    a[i][j] -= l * a[k][j];
                }
                b[i] -= l * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Weights expressing the ghost value `u(-g·h)` through node values
/// `u_0 .. u_{len-1}` of the polynomial interpolant that also satisfies
/// `u_x(0) = 0` when `clamped` is set. The interpolant has degree `npoly - 1`.
pub fn ghost_weights(ghost: usize, npoly: usize, clamped: bool) -> Vec<f64> {
    let g = -(ghost as f64);
    if !clamped {
        let nodes: Vec<f64> = (0..npoly).map(|j| j as f64).collect();
        return fornberg(g, &nodes, 0);
    }
    // Constraint functionals on monomials t^p (t = x/h):
    //   row 0: value at 0, row 1: derivative at 0, rows 2..: values at t = 1, 2, ...
    let nnodes = npoly - 1;
    let mut m = vec![vec![0.0; npoly]; npoly];
    for p in 0..npoly {
        m[0][p] = if p == 0 { 1.0 } else { 0.0 };
        m[1][p] = if p == 1 { 1.0 } else { 0.0 };
        for j in 1..nnodes {
            m[j + 1][p] = (j as f64).powi(p as i32);
        }
    }
    // Solve M^T w = e where e_p = g^p.
    let mt: Vec<Vec<f64>> = (0..npoly)
        .map(|p| (0..npoly).map(|r| m[r][p]).collect())
        .collect();
    let e: Vec<f64> = (0..npoly).map(|p| g.powi(p as i32)).collect();
    let w = small_solve(mt, e).expect("confluent Vandermonde system is nonsingular");
    // Drop the derivative row (its datum is zero) and return node weights.
    let mut out = Vec::with_capacity(nnodes);
    out.push(w[0]);
    out.extend_from_slice(&w[2..]);
    out
}
