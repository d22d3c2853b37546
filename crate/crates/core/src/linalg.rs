//! Dense linear algebra helpers with flop accounting.
//!
//! Every arithmetic kernel used by the covariance recursions goes through
//! this module so a [`Flops`] counter can tally its cost. The accounting
//! rules are fixed:
//!
//! * product of an `a×b` and a `b×c` matrix: `2abc`
//! * Cholesky factorization of an `n×n` matrix: `n³/3` (integer division)
//! * solve with an existing Cholesky factor and `k` right-hand sides: `2n²k`
//! * LU factorization of an `n×n` matrix: `2n³/3`; LU solve as Cholesky solve
//! * elementwise addition, subtraction or symmetrization: the element count
//!
//! Counting never changes the arithmetic; the same kernels run whether or not
//! anyone reads the counter.

use std::cell::Cell;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold below which an innovation covariance is rejected.
pub const OMEGA_PD_REL_TOL: f64 = 1e-12;

/// Per-run flop tally.
#[derive(Debug)]
pub struct Flops {
    count: Cell<u64>,
    enabled: bool,
}

impl Default for Flops {
    fn default() -> Self {
        Self {
            count: Cell::new(0),
            enabled: true,
        }
    }
}

impl Flops {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tally that ignores every charge.
    pub fn disabled() -> Self {
        Self {
            count: Cell::new(0),
            enabled: false,
        }
    }

    #[inline]
    pub fn add(&self, n: u64) {
        if self.enabled {
            self.count.set(self.count.get() + n);
        }
    }

    pub fn get(&self) -> u64 {
        self.count.get()
    }

    pub fn reset(&self) {
        self.count.set(0);
    }
}

#[inline]
fn u(n: usize) -> u64 {
    n as u64
}

/// `a * b`
pub fn mul(fl: &Flops, a: &Mat, b: &Mat) -> Mat {
    fl.add(2 * u(a.nrows()) * u(a.ncols()) * u(b.ncols()));
    a * b
}

/// `aᵀ * b`
pub fn tr_mul(fl: &Flops, a: &Mat, b: &Mat) -> Mat {
    fl.add(2 * u(a.ncols()) * u(a.nrows()) * u(b.ncols()));
    a.tr_mul(b)
}

/// `a * bᵀ`
pub fn mul_tr(fl: &Flops, a: &Mat, b: &Mat) -> Mat {
    fl.add(2 * u(a.nrows()) * u(a.ncols()) * u(b.nrows()));
    a * b.transpose()
}

/// `a * v`
pub fn mul_vec(fl: &Flops, a: &Mat, v: &Vector) -> Vector {
    fl.add(2 * u(a.nrows()) * u(a.ncols()));
    a * v
}

/// `aᵀ * v`
pub fn tr_mul_vec(fl: &Flops, a: &Mat, v: &Vector) -> Vector {
    fl.add(2 * u(a.nrows()) * u(a.ncols()));
    a.tr_mul(v)
}

pub fn add(fl: &Flops, a: &Mat, b: &Mat) -> Mat {
    fl.add(u(a.len()));
    a + b
}

pub fn sub(fl: &Flops, a: &Mat, b: &Mat) -> Mat {
    fl.add(u(a.len()));
    a - b
}

/// `(a + aᵀ) / 2`
pub fn symmetrize(fl: &Flops, a: &Mat) -> Mat {
    fl.add(u(a.len()));
    sym(a)
}

/// Uncounted symmetrization, for setup code outside the benchmarked loops.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factor `omega`, rejecting it when its smallest eigenvalue is below
    /// `OMEGA_PD_REL_TOL` times its largest. `t` is reported in the error.
    pub fn new(fl: &Flops, omega: &Mat, t: usize) -> Result<Self> {
        let n = omega.nrows();
        let (min_eig, max_eig) = eig_range(omega);
        if n > 0 && (max_eig <= 0.0 || min_eig <= OMEGA_PD_REL_TOL * max_eig) {
            return Err(Error::OmegaNotPd { t, min_eig, max_eig });
        }
        fl.add(u(n) * u(n) * u(n) / 3);
        let chol = Cholesky::new(omega.clone()).ok_or(Error::OmegaNotPd {
            t,
            min_eig,
            max_eig,
        })?;
        Ok(Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// `Ω⁻¹ b`
    pub fn solve(&self, fl: &Flops, b: &Mat) -> Mat {
        let n = u(self.dim());
        fl.add(2 * n * n * u(b.ncols()));
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, fl: &Flops, b: &Vector) -> Vector {
        let n = u(self.dim());
        fl.add(2 * n * n);
        self.chol.solve(b)
    }

    /// `a Ω⁻¹`
    pub fn right_solve(&self, fl: &Flops, a: &Mat) -> Mat {
        self.solve(fl, &a.transpose()).transpose()
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// LU solve of a general square system `a x = b`, counted.
pub fn lu_solve(fl: &Flops, a: &Mat, b: &Mat) -> Option<Mat> {
    let n = u(a.nrows());
    fl.add(2 * n * n * n / 3 + 2 * n * n * u(b.ncols()));
    LU::new(a.clone()).solve(b)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_range(a: &Mat) -> (f64, f64) {
    if a.is_empty() {
        return (0.0, 0.0);
    }
    if a.nrows() == 1 {
        return (a[(0, 0)], a[(0, 0)]);
    }
    let ev = SymmetricEigen::new(sym(a)).eigenvalues;
    (ev.min(), ev.max())
}

/// Spectral norm of a symmetric matrix (largest eigenvalue magnitude).
pub fn sym_norm(a: &Mat) -> f64 {
    let (lo, hi) = eig_range(a);
    lo.abs().max(hi.abs())
}

/// Frobenius norm.
pub fn fro(a: &Mat) -> f64 {
    a.norm()
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, zero when both vanish.
pub fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    let scale = fro(a).max(fro(b));
    if scale == 0.0 {
        0.0
    } else {
        fro(&(a - b)) / scale
    }
}

pub fn rel_diff_vec(a: &Vector, b: &Vector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Asymmetry `‖a − aᵀ‖_F / ‖a‖_F`.
pub fn asymmetry(a: &Mat) -> f64 {
    let n = fro(a);
    if n == 0.0 {
        0.0
    } else {
        fro(&(a - a.transpose())) / n
    }
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(a: &Mat, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Smallest over largest singular value; zero for a zero matrix.
pub fn singular_ratio(a: &Mat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        0.0
    } else {
        sv.min() / top
    }
}

/// Symmetric square root of a PSD matrix, clamping negative eigenvalues to
/// zero. Used to draw correlated Gaussian noise.
pub fn psd_sqrt(a: &Mat) -> Mat {
    if a.is_empty() {
        return a.clone();
    }
    let eig = SymmetricEigen::new(sym(a));
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Build a matrix from row-major nested vectors.
pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nr, nc, |i, j| rows[i][j])
}

pub fn to_rows(a: &Mat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}
