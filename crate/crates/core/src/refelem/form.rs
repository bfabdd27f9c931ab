//! Pointwise form values and form-valued fields.

use std::fmt;
use std::sync::Arc;

use crate::combinat::binomial;
use crate::error::{FeecError, Result};

/// Coefficients of a k-form on the lexicographic basis `dx_I`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    pub k: usize,
    pub coeffs: Vec<f64>,
}

impl FormValue {
    pub fn new(n: usize, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != binomial(n, k) {
            return Err(FeecError::ShapeMismatch(format!(
                "{k}-form in {n}D needs {} coefficients, got {}",
                binomial(n, k),
                coeffs.len()
            )));
        }
        Ok(Self { k, coeffs })
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A k-form field on `R^n`, evaluated into a caller-provided buffer of length `C(n, k)`.
#[derive(Clone)]
pub struct FormField {
    pub n: usize,
    pub k: usize,
    f: Arc<FieldFn>,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormField({}-form in {}D)", self.k, self.n)
    }
}

impl FormField {
    pub fn new<F>(n: usize, k: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { n, k, f: Arc::new(f) }
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self::new(n, k, |_, out| out.iter_mut().for_each(|o| *o = 0.0))
    }

    pub fn constant(n: usize, k: usize, coeffs: Vec<f64>) -> Self {
        Self::new(n, k, move |_, out| out.copy_from_slice(&coeffs))
    }

    pub fn ncomp(&self) -> usize {
        binomial(self.n, self.k)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> FormValue {
        let mut coeffs = vec![0.0; self.ncomp()];
        (self.f)(x, &mut coeffs);
        FormValue { k: self.k, coeffs }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &FormField, s: f64) -> FormField {
        let (a, b) = (self.f.clone(), other.f.clone());
        let nc = self.ncomp();
        FormField::new(self.n, self.k, move |x, out| {
            let mut tmp = vec![0.0; nc];
            a(x, out);
            b(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += s * t);
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(FormValue::new(3, 1, vec![0.0; 3]).is_ok());
        assert!(FormValue::new(3, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn combination() {
        let a = FormField::new(2, 1, |x, o| {
            o[0] = x[0];
            o[1] = x[1];
        });
        let b = FormField::constant(2, 1, vec![1.0, 2.0]);
        assert_eq!(a.add_scaled(&b, -1.0).eval(&[3.0, 4.0]).coeffs, vec![2.0, 2.0]);
    }
}
