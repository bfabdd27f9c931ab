//! Extreme eigenpairs of symmetric-definite pencils `A x = λ M x`.
//!
//! Large problems use block shift-invert subspace iteration with a
//! Rayleigh-Ritz step in the M inner product; small ones go dense.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lu::LuFactor;
use super::sparse::{dot, SparseMatrix};
use crate::error::{FeecError, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const EIG_TOLERANCE: f64 = 1e-8;
const DENSE_LIMIT: usize = 400;

/// Operator data for shift-invert iteration on `A x = λ M x`.
pub trait ShiftInvert {
    fn dim(&self) -> usize;
    fn apply_m(&self, x: &[f64]) -> Vec<f64>;
    /// `(A - s M)^{-1} b` for the shift `s` returned by [`ShiftInvert::shift`].
    fn solve_shifted(&self, b: &[f64]) -> Result<Vec<f64>>;
    fn shift(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// M-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals of the shift-inverted problem.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// M-orthonormalize the columns of `y` (with `my = M y`), dropping nearly
/// dependent directions. Returns the kept columns and their images.
fn m_orthonormalize(y: Vec<Vec<f64>>, my: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let p = y.len();
    let g = DMatrix::from_fn(p, p, |i, j| dot(&y[i], &my[j]));
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut xs = Vec::new();
    let mut mxs = Vec::new();
    for c in 0..p {
        let ev = eig.eigenvalues[c];
        if ev <= 1e-14 * top || ev <= 0.0 {
            continue;
        }
        let s = 1.0 / ev.sqrt();
        let n = y[0].len();
        let mut x = vec![0.0; n];
        let mut mx = vec![0.0; n];
        for i in 0..p {
            let w = eig.eigenvectors[(i, c)] * s;
            if w != 0.0 {
                x.iter_mut().zip(&y[i]).for_each(|(a, b)| *a += w * b);
                mx.iter_mut().zip(&my[i]).for_each(|(a, b)| *a += w * b);
            }
        }
        xs.push(x);
        mxs.push(mx);
    }
    (xs, mxs)
}

/// The `count` smallest eigenpairs above the operator's shift.
pub fn shift_invert_eig<O: ShiftInvert + ?Sized>(op: &O, count: usize, seed: u64) -> Result<EigenPairs> {
    let n = op.dim();
    if count == 0 {
        return Ok(EigenPairs { values: vec![], vectors: vec![], residuals: vec![], iterations: 0 });
    }
    if count > n {
        return Err(FeecError::InvalidArgument(format!("requested {count} eigenpairs of a {n}-dimensional problem")));
    }
    let p = (count + count.max(4)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_block = |k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect()
    };
    let y0 = random_block(p);
    let my0 = y0.iter().map(|v| op.apply_m(v)).collect();
    let (mut x, mut mx) = m_orthonormalize(y0, my0);
    let shift = op.shift();
    let mut worst = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        // Top up the block if orthonormalization dropped columns.
        while x.len() < p {
            let extra = random_block(p - x.len());
            let mut y = x.clone();
            let mut my = mx.clone();
            for v in extra {
                my.push(op.apply_m(&v));
                y.push(v);
            }
            let (nx, nmx) = m_orthonormalize(y, my);
            x = nx;
            mx = nmx;
        }
        let y: Vec<Vec<f64>> = mx.iter().map(|v| op.solve_shifted(v)).collect::<Result<_>>()?;
        let q = x.len();
        // H = X^T M T X with T = (A - sM)^{-1} M.
        let h = DMatrix::from_fn(q, q, |i, j| dot(&mx[i], &y[j]));
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let combine = |basis: &Vec<Vec<f64>>, c: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for i in 0..q {
                let w = eig.eigenvectors[(i, c)];
                out.iter_mut().zip(&basis[i]).for_each(|(a, b)| *a += w * b);
            }
            out
        };
        let ritz_x: Vec<Vec<f64>> = order.iter().map(|&c| combine(&x, c)).collect();
        let ritz_y: Vec<Vec<f64>> = order.iter().map(|&c| combine(&y, c)).collect();
        let mus: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();

        let mut residuals = Vec::with_capacity(count);
        for i in 0..count.min(q) {
            let r: Vec<f64> = ritz_y[i].iter().zip(&ritz_x[i]).map(|(a, b)| a - mus[i] * b).collect();
            let mr = op.apply_m(&r);
            residuals.push(dot(&r, &mr).max(0.0).sqrt() / mus[i].abs().max(f64::MIN_POSITIVE));
        }
        worst = residuals.iter().fold(0.0, |m: f64, v| m.max(*v));
        if q >= count && worst <= EIG_TOLERANCE {
            let values = mus[..count].iter().map(|mu| shift + 1.0 / mu).collect();
            return Ok(EigenPairs {
                values,
                vectors: ritz_x[..count].to_vec(),
                residuals,
                iterations: it,
            });
        }
        let my: Vec<Vec<f64>> = ritz_y.iter().map(|v| op.apply_m(v)).collect();
        let (nx, nmx) = m_orthonormalize(ritz_y, my);
        x = nx;
        mx = nmx;
    }
    Err(FeecError::EigenConvergence { iterations: MAX_ITERATIONS, residual: worst })
}

struct SparsePencil {
    m: SparseMatrix,
    lu: LuFactor,
    shift: f64,
}

impl ShiftInvert for SparsePencil {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply_m(&self, x: &[f64]) -> Vec<f64> {
        self.m.matvec(x)
    }

    fn solve_shifted(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(b)
    }

    fn shift(&self) -> f64 {
        self.shift
    }
}

/// Gershgorin lower bound for the spectrum of a symmetric matrix.
fn gershgorin_lower(a: &SparseMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag = v;
                } else {
                    off += v.abs();
                }
            }
            diag - off
        })
        .fold(f64::INFINITY, f64::min)
}

fn dense_eig(a: &SparseMatrix, m: &SparseMatrix, count: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    let md = m.to_dense();
    let chol = md
        .clone()
        .cholesky()
        .ok_or_else(|| FeecError::InvalidArgument("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| FeecError::InvalidArgument("mass matrix is not positive definite".into()))?;
    let c = &linv * a.to_dense() * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap());
    let lt_inv = linv.transpose();
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &c in order.iter().take(count) {
        values.push(eig.eigenvalues[c]);
        let v = &lt_inv * eig.eigenvectors.column(c);
        vectors.push(v.iter().copied().collect());
    }
    Ok(EigenPairs { values, vectors, residuals: vec![0.0; count], iterations: 0 })
}

/// The `count` algebraically smallest eigenpairs of `A x = λ M x`, with `A`
/// symmetric and `M` symmetric positive definite.
pub fn smallest_generalized_eig(a: &SparseMatrix, m: &SparseMatrix, count: usize, seed: u64) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(FeecError::ShapeMismatch("eigenproblem matrices must be square and matching".into()));
    }
    if count > n {
        return Err(FeecError::InvalidArgument(format!("requested {count} eigenpairs of a {n}-dimensional problem")));
    }
    if n <= DENSE_LIMIT {
        return dense_eig(a, m, count);
    }
    // Shift strictly below the spectrum: λ >= min(g_A / m_max, g_A / m_min).
    let ga = gershgorin_lower(a);
    let mdiag = m.diagonal_values();
    let mmax = mdiag.iter().fold(0.0f64, |x, v| x.max(*v)) * 2.0;
    let mmin = gershgorin_lower(m).max(1e-3 * mdiag.iter().fold(f64::INFINITY, |x, v| x.min(*v)));
    let bound = if ga >= 0.0 { ga / mmax } else { ga / mmin };
    let scale = a.max_abs() / mmax.max(f64::MIN_POSITIVE);
    let shift = bound - 1e-3 * scale.max(1e-300);
    let shifted = a.add_scaled(m, -shift)?;
    let pencil = SparsePencil { m: m.clone(), lu: LuFactor::new(&shifted)?, shift };
    shift_invert_eig(&pencil, count, seed)
}
