//! Discrete stability diagnostics for the perturbed mixed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{assemble_operator, CoefficientField, LowerOrderTerms};
use crate::error::{FeecError, Result};
use crate::hodge::HodgePair;
use crate::linalg::{dot, shift_invert_eig, BlockSystem, LuFactor, ShiftInvert, SparseMatrix};

/// V-norm Gram matrix `blockdiag(M_σ + K_σ, M_u + S_u)`.
pub fn v_gram(pair: &HodgePair) -> Result<SparseMatrix> {
    let u = pair.u_space();
    let mut x = BlockSystem::new(&[pair.sigma_dim(), u.dim()]);
    if let Some(s) = pair.sigma_space() {
        x.set(0, 0, s.mass_matrix().add_scaled(&s.stiffness_matrix()?, 1.0)?)?;
    }
    x.set(1, 1, u.mass_matrix().add_scaled(pair.stiffness(), 1.0)?)?;
    Ok(x.matrix())
}

/// `(B^T X^{-1} B)^{-1} = B^{-1} X B^{-T}`, so shift-invert at 0 targets the
/// smallest singular values of `B` in the X geometry.
struct NormalOperator<'a> {
    x: &'a SparseMatrix,
    lu: &'a LuFactor,
}

impl ShiftInvert for NormalOperator<'_> {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn apply_m(&self, v: &[f64]) -> Vec<f64> {
        self.x.matvec(v)
    }

    fn solve_shifted(&self, b: &[f64]) -> Result<Vec<f64>> {
        let y = self.lu.solve_transpose(b)?;
        self.lu.solve(&self.x.matvec(&y))
    }

    fn shift(&self) -> f64 {
        0.0
    }
}

/// Smallest singular value of the perturbed form in the V-norm. A singular
/// discrete operator yields 0.
pub fn infsup_estimate(pair: &HodgePair, terms: &LowerOrderTerms, seed: u64) -> Result<f64> {
    let b = assemble_operator(pair, terms)?.matrix();
    let x = v_gram(pair)?;
    let lu = match LuFactor::new(&b) {
        Ok(lu) => lu,
        Err(FeecError::SingularMatrix { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let op = NormalOperator { x: &x, lu: &lu };
    match shift_invert_eig(&op, 1, seed) {
        Ok(e) => Ok(e.values[0].max(0.0).sqrt()),
        Err(FeecError::SingularMatrix { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct ResonanceScan {
    /// `(λ, estimate)` over the scan grid.
    pub samples: Vec<(f64, f64)>,
    /// Refined location of the deepest dip and the estimate there.
    pub lambda: f64,
    pub estimate: f64,
    /// Median estimate over the grid, for scale.
    pub typical: f64,
}

impl ResonanceScan {
    /// The estimate at the dip is below `ratio` times the typical value.
    pub fn collapsed(&self, ratio: f64) -> bool {
        self.estimate <= ratio * self.typical
    }
}

/// Scan `l5 = -λ I` (added to `terms`, replacing any l5) over `lambdas`, then
/// refine the deepest dip by golden-section search between its neighbours.
pub fn resonance_scan(pair: &HodgePair, terms: &LowerOrderTerms, lambdas: &[f64], seed: u64) -> Result<ResonanceScan> {
    if lambdas.len() < 3 {
        return Err(FeecError::InvalidArgument("resonance scan needs at least three λ values".into()));
    }
    let u = pair.u_space();
    let eval = |lam: f64| -> Result<f64> {
        let mut t = terms.clone();
        t.l5 = Some(CoefficientField::scalar(u.n(), u.k, -lam)?);
        infsup_estimate(pair, &t, seed)
    };
    let samples: Vec<(f64, f64)> = lambdas.iter().map(|&l| eval(l).map(|e| (l, e))).collect::<Result<_>>()?;
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.1).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let typical = sorted[sorted.len() / 2];
    let imin = (0..samples.len()).min_by(|&a, &b| samples[a].1.partial_cmp(&samples[b].1).unwrap()).unwrap();
    let (mut lo, mut hi) = (samples[imin.saturating_sub(1)].0, samples[(imin + 1).min(samples.len() - 1)].0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = eval(d)?;
        }
        if (hi - lo).abs() <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    let (lambda, estimate) = if fc < fd { (c, fc) } else { (d, fd) };
    let (lambda, estimate) = if samples[imin].1 < estimate { samples[imin] } else { (lambda, estimate) };
    Ok(ResonanceScan { samples, lambda, estimate, typical })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GardingReport {
    /// Test-function weight `a` in `(σ, u + a dσ)` giving the best `b` at `c = 0`.
    pub a: f64,
    /// `min B((σ,u),(σ,u+a dσ)) / ‖(σ,u)‖_V²` over the samples.
    pub b: f64,
    /// Smallest `c >= 0` with `B >= ‖(σ,u)‖_V²/2 - c ‖u‖²` on every sample.
    pub c: f64,
    pub samples: usize,
}

/// Empirical constants in `B((σ,u),(σ,u+a dσ)) >= b ‖(σ,u)‖_V² - c ‖u‖²`.
pub fn garding_diagnostic(pair: &HodgePair, terms: &LowerOrderTerms, samples: usize, seed: u64) -> Result<GardingReport> {
    let b = assemble_operator(pair, terms)?.matrix();
    let x = v_gram(pair)?;
    let ns = pair.sigma_dim();
    let nu = pair.u_space().dim();
    let mu = pair.u_space().mass_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vecs: Vec<Vec<f64>> = (0..samples).map(|_| (0..ns + nu).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // Per sample: (B(x, (σ,u)), B(x, (0, dσ)), ‖x‖_V², ‖u‖²).
    let parts: Vec<(f64, f64, f64, f64)> = vecs
        .iter()
        .map(|v| {
            let bv = b.matvec(v);
            let mut dsig = vec![0.0; ns + nu];
            if let Some(d) = pair.d_sigma() {
                dsig[ns..].copy_from_slice(&d.matvec(&v[..ns]));
            }
            let u = &v[ns..];
            (dot(v, &bv), dot(&dsig, &bv), dot(v, &x.matvec(v)), dot(u, &mu.matvec(u)))
        })
        .collect();
    let b_at = |a: f64| parts.iter().map(|p| (p.0 + a * p.1) / p.2).fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let a = grid.iter().copied().fold((0.0, f64::NEG_INFINITY), |best, a| {
        let v = b_at(a);
        if v > best.1 {
            (a, v)
        } else {
            best
        }
    });
    let c = parts
        .iter()
        .map(|p| if p.3 > 0.0 { (0.5 * p.2 - p.0 - a.0 * p.1) / p.3 } else { 0.0 })
        .fold(0.0f64, f64::max);
    Ok(GardingReport { a: a.0, b: a.1, c, samples })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::SimplicialMesh;
    use crate::spaces::BcMode;

    #[test]
    fn zero_scaled_terms_match_unperturbed() {
        let mesh = Arc::new(SimplicialMesh::build_box(2, 2, 0.2, 3).unwrap());
        let p = HodgePair::canonical(&mesh, 1, 1, 1, BcMode::Natural).unwrap();
        let mut t = LowerOrderTerms::none();
        t.l5 = Some(CoefficientField::scalar(2, 1, 4.0).unwrap());
        t.l2 = Some(CoefficientField::constant(2, 1, 0, vec![1.0, 2.0]).unwrap());
        let a = infsup_estimate(&p, &LowerOrderTerms::none(), 1).unwrap();
        let b = infsup_estimate(&p, &t.scaled(0.0), 1).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.1);
    }

    #[test]
    fn garding_unperturbed() {
        let mesh = Arc::new(SimplicialMesh::build_box(2, 2, 0.2, 3).unwrap());
        let p = HodgePair::canonical(&mesh, 1, 1, 1, BcMode::Natural).unwrap();
        let r1 = garding_diagnostic(&p, &LowerOrderTerms::none(), 50, 9).unwrap();
        let r2 = garding_diagnostic(&p, &LowerOrderTerms::none(), 50, 9).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.b >= 0.4, "{r1:?}");
        assert_eq!(r1.c, 0.0);
    }
}
