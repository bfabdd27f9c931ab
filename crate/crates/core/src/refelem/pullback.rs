//! Change of variables for differential forms under affine maps.

use nalgebra::DMatrix;

use crate::combinat::{minor, subsets};
use crate::error::{FeecError, Result};

/// k-th compound matrix: entry `(I, J)` is the minor of `a` on rows `I`, columns `J`.
pub fn compound(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let rows = subsets(a.nrows(), k);
    let cols = subsets(a.ncols(), k);
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| minor(a, &rows[i], &cols[j]))
}

/// Coefficients of `Φ^* ω` for `Φ(X) = b + J X`, given `ω(Φ(X))`:
/// `(Φ^*ω)_I = Σ_J det(J[J, I]) ω_J`.
pub fn pullback_coeffs(jac: &DMatrix<f64>, k: usize, values: &[f64]) -> Vec<f64> {
    let c = compound(jac, k);
    (c.transpose() * nalgebra::DVector::from_column_slice(values)).iter().copied().collect()
}

/// Inverse of [`pullback_coeffs`]: physical coefficients of a form whose
/// pullback has the given reference coefficients.
pub fn pushforward_coeffs(jac: &DMatrix<f64>, k: usize, ref_values: &[f64]) -> Result<Vec<f64>> {
    let inv = jac.clone().try_inverse().ok_or(FeecError::SingularJacobian)?;
    Ok(pullback_coeffs(&inv, k, ref_values))
}

/// Pull back a physical form evaluator through an affine map onto the
/// reference simplex.
pub fn pullback<'a, F>(
    field: F,
    origin: &'a [f64],
    jac: &'a DMatrix<f64>,
    k: usize,
) -> Result<impl Fn(&[f64]) -> Vec<f64> + 'a>
where
    F: Fn(&[f64]) -> Vec<f64> + 'a,
{
    if jac.determinant() == 0.0 {
        return Err(FeecError::SingularJacobian);
    }
    let comp = compound(jac, k).transpose();
    Ok(move |xi: &[f64]| {
        let x: Vec<f64> = (0..origin.len())
            .map(|i| origin[i] + (0..xi.len()).map(|j| jac[(i, j)] * xi[j]).sum::<f64>())
            .collect();
        let v = field(&x);
        (&comp * nalgebra::DVector::from_column_slice(&v)).iter().copied().collect()
    })
}
