//! The Hodge Laplacian perturbed by lower-order terms, in mixed form:
//!
//! ```text
//! (σ, τ) - (u, dτ) - (l2 u, τ)                              = 0
//! (dσ, v) + (l3 σ, v) + (du, dv) + (l1 u, dv) + (l4 du, v) + (l5 u, v) = F(v)
//! ```

mod stability;
mod terms;

pub use stability::{garding_diagnostic, infsup_estimate, resonance_scan, GardingReport, ResonanceScan};
pub use terms::{CoefficientField, LowerOrderTerms, TermMask, ALL_TERMS};

use crate::error::{FeecError, Result};
use crate::hodge::HodgePair;
use crate::linalg::{BlockSystem, LuFactor, SparseMatrix};
use crate::spaces::{assemble_bilinear, Cochain};

/// Quadrature degree for coefficient-weighted blocks.
pub fn coefficient_degree(pair: &HodgePair) -> usize {
    let u = pair.u_space().smooth_degree();
    pair.sigma_space().map_or(u, |s| s.smooth_degree().max(u))
}

fn term_block(
    pair: &HodgePair,
    field: Option<&CoefficientField>,
    test_sigma: bool,
    test_d: bool,
    trial_sigma: bool,
    trial_d: bool,
) -> Result<Option<SparseMatrix>> {
    let Some(f) = field else { return Ok(None) };
    let pick = |s: bool| if s { pair.sigma_space().expect("σ-space checked by term levels") } else { pair.u_space() };
    let m = assemble_bilinear(pick(test_sigma), test_d, pick(trial_sigma), trial_d, Some(f.as_fn()), coefficient_degree(pair))?;
    Ok(Some(m))
}

fn plus(base: &SparseMatrix, extra: Option<SparseMatrix>, s: f64) -> Result<SparseMatrix> {
    match extra {
        Some(e) => base.add_scaled(&e, s),
        None => Ok(base.clone()),
    }
}

/// Block operator of the perturbed bilinear form on `V^{k-1}_h × V^k_h`,
/// rows `(τ, v)`, columns `(σ, u)`, with a zero right-hand side.
pub fn assemble_operator(pair: &HodgePair, terms: &LowerOrderTerms) -> Result<BlockSystem> {
    let u = pair.u_space();
    terms.check(u.n(), u.k)?;
    let sys0 = pair.system();
    let mut sys = BlockSystem::new(&[pair.sigma_dim(), u.dim()]);
    let s11 = plus(sys0.block(1, 1).expect("stiffness block"), term_block(pair, terms.l1.as_ref(), false, true, false, false)?, 1.0)?;
    let s11 = plus(&s11, term_block(pair, terms.l4.as_ref(), false, false, false, true)?, 1.0)?;
    let s11 = plus(&s11, term_block(pair, terms.l5.as_ref(), false, false, false, false)?, 1.0)?;
    sys.set(1, 1, s11)?;
    if pair.sigma_space().is_some() {
        sys.set(0, 0, sys0.block(0, 0).expect("σ mass block").clone())?;
        let b01 = plus(sys0.block(0, 1).expect("coupling block"), term_block(pair, terms.l2.as_ref(), true, false, false, false)?, -1.0)?;
        sys.set(0, 1, b01)?;
        let b10 = plus(sys0.block(1, 0).expect("coupling block"), term_block(pair, terms.l3.as_ref(), false, false, true, false)?, 1.0)?;
        sys.set(1, 0, b10)?;
    }
    Ok(sys)
}

/// [`assemble_operator`] with `F(v) = f[i]` on the u-rows.
pub fn assemble_perturbed(pair: &HodgePair, terms: &LowerOrderTerms, f: &[f64]) -> Result<BlockSystem> {
    let mut sys = assemble_operator(pair, terms)?;
    sys.set_rhs(1, f)?;
    Ok(sys)
}

#[derive(Debug, Clone)]
pub struct PerturbedSolution {
    pub sigma: Option<Cochain>,
    pub u: Cochain,
    pub residual: f64,
}

/// Solve the perturbed mixed system. A singular system is reported as
/// [`FeecError::NotInvertible`] with an approximate null vector.
pub fn solve_perturbed(pair: &HodgePair, terms: &LowerOrderTerms, f: &[f64]) -> Result<PerturbedSolution> {
    let sys = assemble_perturbed(pair, terms, f)?;
    solve_system(pair, &sys)
}

/// Solve an already assembled system from [`assemble_perturbed`].
pub fn solve_system(pair: &HodgePair, sys: &BlockSystem) -> Result<PerturbedSolution> {
    let not_invertible = |e: FeecError| match e {
        FeecError::SingularMatrix { reason, near_null } => FeecError::NotInvertible { reason, near_null },
        other => other,
    };
    let lu = LuFactor::new(&sys.matrix()).map_err(not_invertible)?;
    let rep = lu.solve_report(&sys.rhs).map_err(not_invertible)?;
    let parts = sys.split(&rep.x);
    Ok(PerturbedSolution {
        sigma: pair.sigma_space().map(|s| Cochain { space: s.clone(), coeffs: parts[0].clone() }),
        u: Cochain { space: pair.u_space().clone(), coeffs: parts[1].clone() },
        residual: rep.residual,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::SimplicialMesh;
    use crate::spaces::BcMode;

    fn pair() -> HodgePair {
        let mesh = Arc::new(SimplicialMesh::build_box(2, 2, 0.2, 3).unwrap());
        HodgePair::canonical(&mesh, 1, 1, 1, BcMode::Natural).unwrap()
    }

    #[test]
    fn no_terms_matches_unperturbed() {
        let p = pair();
        let a = assemble_operator(&p, &LowerOrderTerms::none()).unwrap().matrix();
        let b = p.mixed_matrix().unwrap();
        assert!(a.add_scaled(&b, -1.0).unwrap().max_abs() <= 1e-14);
        // (u, dτ) block is the transpose of the (dσ, v) block.
        let sys = assemble_operator(&p, &LowerOrderTerms::none()).unwrap();
        let diff = sys.block(0, 1).unwrap().add_scaled(&sys.block(1, 0).unwrap().transpose(), 1.0).unwrap();
        assert!(diff.max_abs() <= 1e-14);
    }

    #[test]
    fn scalar_l5_adds_mass_only() {
        let p = pair();
        let mut t = LowerOrderTerms::none();
        t.l5 = Some(CoefficientField::scalar(2, 1, 3.5).unwrap());
        let a = assemble_operator(&p, &t).unwrap();
        let b = assemble_operator(&p, &LowerOrderTerms::none()).unwrap();
        let d11 = a.block(1, 1).unwrap().add_scaled(b.block(1, 1).unwrap(), -1.0).unwrap();
        let m = p.u_space().mass_matrix().scaled(3.5);
        assert!(d11.add_scaled(&m, -1.0).unwrap().max_abs() <= 1e-13);
        for (i, j) in [(0, 0), (0, 1), (1, 0)] {
            let d = a.block(i, j).unwrap().add_scaled(b.block(i, j).unwrap(), -1.0).unwrap();
            assert_eq!(d.max_abs(), 0.0);
        }
    }

    #[test]
    fn zero_rhs_zero_solution() {
        let p = pair();
        let mut t = LowerOrderTerms::none();
        t.l5 = Some(CoefficientField::constant(2, 1, 1, vec![10.0, 0.0, 0.0, 0.0]).unwrap());
        let sol = solve_perturbed(&p, &t, &vec![0.0; p.u_space().dim()]).unwrap();
        assert!(sol.u.coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wrong_level_rejected() {
        let p = pair();
        let mut t = LowerOrderTerms::none();
        t.l1 = Some(CoefficientField::scalar(2, 1, 1.0).unwrap());
        assert!(matches!(assemble_operator(&p, &t), Err(FeecError::ShapeMismatch(_))));
    }
}
