//! Square banded matrices and LU factorization with partial pivoting
//! confined to the band.

use crate::error::{check_len, Error, Result};

/// `n × n` matrix whose nonzeros satisfy `-kl ≤ j - i ≤ ku`.
///
/// Stored row-major: row `i` holds columns `i-kl ..= i+ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Column range of row `i` inside the band.
    #[inline]
    pub fn row_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    /// Nonzero entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_cols(i)
            .map(move |j| (j, self.get(i, j)))
            .filter(|&(_, v)| v != 0.0)
    }

    /// Same matrix stored with (at least) the given bandwidths.
    pub fn widened(&self, kl: usize, ku: usize) -> Self {
        let kl = kl.max(self.kl);
        let ku = ku.max(self.ku);
        let mut out = Self::zeros(self.n, kl, ku);
        for i in 0..self.n {
            for j in self.row_cols(i) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Smallest bandwidths containing every nonzero entry.
    pub fn tight_bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate() {
            let cols = self.row_cols(i);
            let base = i * w + self.kl;
            let mut s = 0.0;
            for j in cols {
                s += self.data[base + j - i] * x[j];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha * self + beta * other`, with the union of both bands.
    pub fn lin_comb(&self, alpha: f64, other: &BandedMatrix, beta: f64) -> Result<Self> {
        check_len(self.n, other.n)?;
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.row_cols(i) {
                out.add(i, j, alpha * self.get(i, j));
            }
            for j in other.row_cols(i) {
                out.add(i, j, beta * other.get(i, j));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Banded LU factors `P A = L U` in the layout of LAPACK's `gbtrf`: the
/// upper factor gains `kl` extra superdiagonals from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    // row i holds columns i-kl ..= i+kl+ku
    width: usize,
    ku_fill: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    pub fn factor(a: &BandedMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku_fill = a.kl + a.ku;
        let width = kl + ku_fill + 1;
        let mut f = BandedLu {
            n,
            kl,
            width,
            ku_fill,
            lu: vec![0.0; n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            for j in a.row_cols(i) {
                let k = f.idx(i, j);
                f.lu[k] = a.get(i, j);
            }
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku_fill).min(n - 1);
            let mut p = k;
            let mut best = f.lu[f.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = f.lu[f.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularPivot { row: k });
            }
            f.piv[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (ia, ib) = (f.idx(k, c), f.idx(p, c));
                    f.lu.swap(ia, ib);
                }
            }
            let pivot = f.lu[f.idx(k, k)];
            for r in k + 1..=last_row {
                let irk = f.idx(r, k);
                let l = f.lu[irk] / pivot;
                f.lu[irk] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        let (irc, ikc) = (f.idx(r, c), f.idx(k, c));
                        f.lu[irc] -= l * f.lu[ikc];
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len(self.n, b.len())?;
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    b[r] -= self.lu[self.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + self.ku_fill).min(n - 1) {
                s -= self.lu[self.idx(k, c)] * b[c];
            }
            b[k] = s / self.lu[self.idx(k, k)];
        }
        Ok(())
    }
}

/// Solves `A x = b` for banded `A`.
pub fn banded_solve(a: &BandedMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n(), b.len())?;
    let lu = BandedLu::factor(a)?;
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x)?;
    Ok(x)
}
