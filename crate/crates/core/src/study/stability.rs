//! Inf-sup estimates under mesh refinement.

use std::fmt::Write as _;
use std::sync::Arc;

use super::convergence::StudyOptions;
use super::problems::PerturbedProblem;
use crate::error::{FeecError, Result};
use crate::hodge::HodgePair;
use crate::mesh::SimplicialMesh;
use crate::perturbed::infsup_estimate;

/// Default tolerance on the log-log slope of the estimates.
pub const DEFAULT_SLOPE_TOLERANCE: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct InfsupReport {
    pub problem: String,
    pub pair_id: usize,
    pub r: usize,
    /// `(m, h, estimate)` per level.
    pub levels: Vec<(usize, f64, f64)>,
    /// Least-squares slope of `log estimate` against `log h`.
    pub slope: f64,
    pub tolerance: f64,
}

impl InfsupReport {
    /// Estimates stay bounded away from zero uniformly in `h`.
    pub fn passed(&self) -> bool {
        self.slope.is_finite() && self.slope.abs() <= self.tolerance
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} pair {} r={}\n", self.problem, self.pair_id, self.r);
        for (m, h, e) in &self.levels {
            let _ = writeln!(out, "m={m:<3} h={h:.4e} infsup={e:.6e}");
        }
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        let _ = writeln!(out, "slope={:.4} (|slope| <= {}) {verdict}", self.slope, self.tolerance);
        out
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Inf-sup estimate of the perturbed operator on each level of `m_list`.
/// A zero estimate gives slope `-inf`, so the report fails.
pub fn run_infsup(problem: &PerturbedProblem, pair_id: usize, r: usize, m_list: &[usize], opts: &StudyOptions) -> Result<InfsupReport> {
    if m_list.len() < 2 {
        return Err(FeecError::InvalidArgument("inf-sup study needs at least two meshes".into()));
    }
    let mut levels = Vec::new();
    for &m in m_list {
        let mesh = Arc::new(SimplicialMesh::build_box(problem.n, m, opts.perturb, opts.seed.wrapping_add(m as u64))?);
        let pair = HodgePair::canonical(&mesh, problem.k, pair_id, r, problem.bc)?;
        let est = infsup_estimate(&pair, &problem.terms, opts.seed)?;
        levels.push((m, 1.0 / m as f64, est));
    }
    let x: Vec<f64> = levels.iter().map(|l| l.1.ln()).collect();
    let y: Vec<f64> = levels.iter().map(|l| l.2.ln()).collect();
    let slope = if levels.iter().any(|l| l.2 <= 0.0) { f64::NEG_INFINITY } else { fit_slope(&x, &y) };
    Ok(InfsupReport {
        problem: problem.name.clone(),
        pair_id,
        r,
        levels,
        slope,
        tolerance: DEFAULT_SLOPE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-14);
    }
}
