//! Direct sparse factorization (backed by faer's sparse LU).

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::{Conj, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{norm, SparseMatrix};
use crate::error::{FeecError, Result};

/// Relative residual above which a solve is treated as singular.
const SINGULAR_RESIDUAL: f64 = 1e-6;

/// Solution together with its achieved relative residual `‖Ax - b‖ / ‖b‖`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub residual: f64,
}

/// A factorized square sparse matrix.
pub struct LuFactor {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LuFactor({}x{}, nnz {})", self.matrix.nrows(), self.matrix.ncols(), self.matrix.nnz())
    }
}

fn singular(a: &SparseMatrix, reason: impl Into<String>) -> FeecError {
    FeecError::SingularMatrix { reason: reason.into(), near_null: near_null_vector(a) }
}

impl LuFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(FeecError::ShapeMismatch(format!("cannot factor a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| singular(a, format!("factorization failed: {e:?}")))?;
        Ok(Self { matrix: a.clone(), lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        if transpose {
            self.lu.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        }
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    fn refined(&self, b: &[f64], transpose: bool) -> Result<SolveReport> {
        if b.len() != self.dim() {
            return Err(FeecError::ShapeMismatch(format!("rhs length {} for dimension {}", b.len(), self.dim())));
        }
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(SolveReport { x: vec![0.0; b.len()], residual: 0.0 });
        }
        let apply = |x: &[f64]| if transpose { self.matrix.matvec_transpose(x) } else { self.matrix.matvec(x) };
        let mut x = self.raw_solve(b, transpose);
        let mut residual = f64::INFINITY;
        for step in 0..3 {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(singular(&self.matrix, "non-finite solution"));
            }
            let ax = apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            residual = norm(&r) / bnorm;
            if residual <= 1e-14 || step == 2 {
                break;
            }
            let dx = self.raw_solve(&r, transpose);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        if !(residual <= SINGULAR_RESIDUAL) {
            return Err(singular(&self.matrix, format!("relative residual {residual:.3e}")));
        }
        Ok(SolveReport { x, residual })
    }

    /// Solve `A x = b` with iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.refined(b, false)?.x)
    }

    pub fn solve_report(&self, b: &[f64]) -> Result<SolveReport> {
        self.refined(b, false)
    }

    /// Solve `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.refined(b, true)?.x)
    }
}

/// Factor and solve in one call.
pub fn factor_solve(a: &SparseMatrix, b: &[f64]) -> Result<SolveReport> {
    LuFactor::new(a)?.solve_report(b)
}

/// Approximate null vector of a (numerically) singular matrix by inverse
/// iteration on a slightly shifted copy. Unit Euclidean norm.
pub fn near_null_vector(a: &SparseMatrix) -> Option<Vec<f64>> {
    let n = a.nrows();
    if n == 0 || n != a.ncols() {
        return None;
    }
    let scale = if a.max_abs() > 0.0 { a.max_abs() } else { 1.0 };
    let shifted = a.add_scaled(&SparseMatrix::identity(n), 1e-10 * scale).ok()?;
    let lu = shifted.to_faer().sp_lu().ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    for _ in 0..3 {
        let mut rhs = Mat::from_fn(n, 1, |i, _| x[i]);
        lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        x = (0..n).map(|i| rhs[(i, 0)]).collect();
        let nx = norm(&x);
        if !nx.is_finite() || nx == 0.0 {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= nx);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        let r = factor_solve(&SparseMatrix::identity(3), &b).unwrap();
        assert_eq!(r.x, b);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = SparseMatrix::zeros(1, 1);
        match factor_solve(&a, &[1.0]) {
            Err(FeecError::SingularMatrix { near_null, .. }) => {
                let v = near_null.unwrap();
                assert!((v[0].abs() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn rank_deficient_reports_null_vector() {
        // [[1, 1], [1, 1]] has null vector (1, -1)/sqrt(2).
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        match factor_solve(&a, &[1.0, 0.0]) {
            Err(FeecError::SingularMatrix { near_null: Some(v), .. }) => {
                assert!((v[0] + v[1]).abs() < 1e-6);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn random_spd_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(50, 50, |_, _| rng.random::<f64>() - 0.5);
        let spd = &g * g.transpose() + DMatrix::identity(50, 50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let r = factor_solve(&SparseMatrix::from_dense(&spd), &b).unwrap();
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn transpose_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let lu = LuFactor::new(&SparseMatrix::from_dense(&a)).unwrap();
        let x = lu.solve_transpose(&[2.0, 4.0]).unwrap();
        let back = a.transpose() * nalgebra::DVector::from_vec(x);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 4.0).abs() < 1e-14);
    }
}
