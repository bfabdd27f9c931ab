//! Collapsed-coordinate Gauss rules on the reference simplex
//! `{x_i >= 0, Σ x_i <= 1}` in dimensions 0 through 3.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{FeecError, Result};

pub const MAX_QUADRATURE_DEGREE: usize = 14;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Flat point coordinates, stride `dim`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(npts: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; npts];
    let mut w = vec![0.0; npts];
    let nf = npts as f64;
    for i in 0..npts {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=npts {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if npts == 1 { z } else { p1 };
            let pm = if npts == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn build(dim: usize, degree: usize) -> QuadratureRule {
    if dim == 0 {
        return QuadratureRule { dim, points: Vec::new(), weights: vec![1.0], degree };
    }
    let npts = ((degree + dim) / 2 + 1).max(1);
    let (gx, gw) = gauss_legendre(npts);
    let total = npts.pow(dim as u32);
    let mut points = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut u = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for slot in u.iter_mut().take(dim) {
            let i = rem % npts;
            rem /= npts;
            *slot = gx[i];
            w *= gw[i];
        }
        // x_j = u_j * Π_{i<j} (1 - u_i), jacobian Π_i (1 - u_i)^{dim-1-i}
        let mut scale = 1.0;
        for (j, &uj) in u.iter().enumerate() {
            points.push(uj * scale);
            w *= (1.0 - uj).powi((dim - 1 - j) as i32);
            scale *= 1.0 - uj;
        }
        weights.push(w);
    }
    QuadratureRule { dim, points, weights, degree }
}

/// Rule on the reference `dim`-simplex exact for polynomials of total degree `<= degree`.
pub fn quadrature(dim: usize, degree: usize) -> Result<Arc<QuadratureRule>> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(FeecError::UnsupportedQuadrature { degree, max: MAX_QUADRATURE_DEGREE });
    }
    if dim > 3 {
        return Err(FeecError::InvalidArgument(format!("quadrature dimension {dim} > 3")));
    }
    type RuleCache = Mutex<HashMap<(usize, usize), Arc<QuadratureRule>>>;
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    Ok(guard.entry((dim, degree)).or_insert_with(|| Arc::new(build(dim, degree))).clone())
}
