//! Unperturbed mixed Hodge Laplacian on a pair `V^{k-1}_h × V^k_h`: discrete
//! harmonic forms, the three-field solve, the discrete Hodge decomposition
//! and the projections built on top of it.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{FeecError, Result};
use crate::linalg::{dot, shift_invert_eig, BlockSystem, LuFactor, ShiftInvert, SparseMatrix};
use crate::mesh::SimplicialMesh;
use crate::refelem::{Family, FormField};
use crate::spaces::{build_space, derivative_matrix, l2_project, BcMode, Cochain, FeSpace};

/// Generalized eigenvalues of the discrete Hodge Laplacian below this are
/// treated as zero. Nonzero eigenvalues on the unit box are `O(1)` or larger.
pub const HARMONIC_CUTOFF: f64 = 1e-8;
const EIG_SEED: u64 = 0x5eed;

/// Canonical pair id (1..=4) to `(σ family, σ degree, u family, u degree)`.
pub fn pair_families(pair_id: usize, r: usize) -> Result<(Family, usize, Family, usize)> {
    match pair_id {
        1 => Ok((Family::Full, r + 1, Family::Full, r)),
        2 => Ok((Family::Trimmed, r + 1, Family::Full, r)),
        3 => Ok((Family::Full, r, Family::Trimmed, r)),
        4 => Ok((Family::Trimmed, r, Family::Trimmed, r)),
        other => Err(FeecError::InvalidPairId(other)),
    }
}

/// Dimension of the discrete harmonic space on the (contractible) box.
pub fn expected_betti(n: usize, k: usize, bc: BcMode) -> usize {
    match bc {
        BcMode::Natural => usize::from(k == 0),
        BcMode::Essential => usize::from(k == n),
    }
}

/// Space receiving `d` of `u`: trimmed of the same degree always contains it.
fn next_space(u: &Arc<FeSpace>) -> Result<Option<Arc<FeSpace>>> {
    if u.k == u.n() {
        return Ok(None);
    }
    Ok(Some(build_space(u.mesh(), u.k + 1, u.r, Family::Trimmed, u.bc)?))
}

/// Output of the three-field solve.
#[derive(Debug, Clone)]
pub struct HodgeSolution {
    pub sigma: Option<Cochain>,
    pub u: Cochain,
    /// Harmonic component as a cochain of the u-space.
    pub p: Cochain,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

/// Components `v = b + h + b*` of a discrete k-form.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub b: Vec<f64>,
    pub h: Vec<f64>,
    pub b_star: Vec<f64>,
}

pub struct HodgePair {
    sigma: Option<Arc<FeSpace>>,
    u: Arc<FeSpace>,
    next: Option<Arc<FeSpace>>,
    /// `D_{k-1}`: σ-space to u-space.
    d_sigma: Option<SparseMatrix>,
    /// `D_k`: u-space to next space.
    d_u: Option<SparseMatrix>,
    /// `C = M_k D_{k-1}`, i.e. `C_ij = (dφ^σ_j, φ^u_i)`.
    c: SparseMatrix,
    /// `S_ij = (dφ^u_j, dφ^u_i)`.
    s: SparseMatrix,
    harmonic: Vec<Vec<f64>>,
    lu: LuFactor,
    system: BlockSystem,
    upper: OnceLock<std::result::Result<Arc<HodgePair>, String>>,
}

impl std::fmt::Debug for HodgePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "HodgePair({} × {}, harmonic {})",
            self.sigma.as_ref().map(|s| s.label()).unwrap_or_else(|| "-".into()),
            self.u.label(),
            self.harmonic.len()
        )
    }
}

/// `(A + M) x = b` for the discrete Hodge Laplacian `A = C M_σ^{-1} C^T + S`,
/// through the symmetric augmented system `[[-M_σ, C^T], [C, S + M]]`.
struct ShiftedLaplacian<'a> {
    m: &'a SparseMatrix,
    lu: LuFactor,
    nsigma: usize,
}

impl ShiftInvert for ShiftedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply_m(&self, x: &[f64]) -> Vec<f64> {
        self.m.matvec(x)
    }

    fn solve_shifted(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.nsigma + b.len()];
        rhs[self.nsigma..].copy_from_slice(b);
        Ok(self.lu.solve(&rhs)?[self.nsigma..].to_vec())
    }

    fn shift(&self) -> f64 {
        -1.0
    }
}

impl HodgePair {
    /// One of the four canonical pairs at form degree `k` (σ is absent for k = 0).
    pub fn canonical(mesh: &Arc<SimplicialMesh>, k: usize, pair_id: usize, r: usize, bc: BcMode) -> Result<Self> {
        let (sf, sr, uf, ur) = pair_families(pair_id, r)?;
        let u = build_space(mesh, k, ur, uf, bc)?;
        let sigma = if k == 0 { None } else { Some(build_space(mesh, k - 1, sr, sf, bc)?) };
        Self::new(sigma, u)
    }

    pub fn new(sigma: Option<Arc<FeSpace>>, u: Arc<FeSpace>) -> Result<Self> {
        let next = next_space(&u)?;
        let nu = u.dim();
        let mu = u.mass_matrix();
        let d_sigma = sigma.as_ref().map(|s| derivative_matrix(s, &u)).transpose()?;
        let d_u = next.as_ref().map(|t| derivative_matrix(&u, t)).transpose()?;
        let nsigma = sigma.as_ref().map_or(0, |s| s.dim());
        let c = match &d_sigma {
            Some(d) => mu.mul(d)?,
            None => SparseMatrix::zeros(nu, 0),
        };
        let s = if next.is_some() { u.stiffness_matrix()? } else { SparseMatrix::zeros(nu, nu) };
        let msigma = sigma.as_ref().map_or_else(|| SparseMatrix::zeros(0, 0), |sp| sp.mass_matrix().clone());

        let expected = expected_betti(u.n(), u.k, u.bc);
        let harmonic = harmonic_vectors(&msigma, &c, &s, mu, expected)?;

        let nh = harmonic.len();
        let mh: Vec<Vec<f64>> = harmonic.iter().map(|h| mu.matvec(h)).collect();
        let mut t = Vec::new();
        for (j, col) in mh.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        let mh = SparseMatrix::from_triplets(nu, nh, &t)?;
        let mut system = BlockSystem::new(&[nsigma, nu, nh]);
        system.set(0, 0, msigma)?;
        system.set(0, 1, c.transpose().scaled(-1.0))?;
        system.set(1, 0, c.clone())?;
        system.set(1, 1, s.clone())?;
        system.set(1, 2, mh.clone())?;
        system.set(2, 1, mh.transpose())?;
        let lu = LuFactor::new(&system.matrix())?;
        Ok(Self { sigma, u, next, d_sigma, d_u, c, s, harmonic, lu, system, upper: OnceLock::new() })
    }

    pub fn sigma_space(&self) -> Option<&Arc<FeSpace>> {
        self.sigma.as_ref()
    }

    pub fn u_space(&self) -> &Arc<FeSpace> {
        &self.u
    }

    pub fn next_space(&self) -> Option<&Arc<FeSpace>> {
        self.next.as_ref()
    }

    pub fn k(&self) -> usize {
        self.u.k
    }

    pub fn sigma_dim(&self) -> usize {
        self.sigma.as_ref().map_or(0, |s| s.dim())
    }

    pub fn d_sigma(&self) -> Option<&SparseMatrix> {
        self.d_sigma.as_ref()
    }

    pub fn d_u(&self) -> Option<&SparseMatrix> {
        self.d_u.as_ref()
    }

    /// `(dφ^σ_j, φ^u_i)`.
    pub fn coupling(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.s
    }

    /// Three-field system, blocks `(σ, u, p)`.
    pub fn system(&self) -> &BlockSystem {
        &self.system
    }

    /// Unperturbed mixed matrix `[[M_σ, -C^T], [C, S]]` without the harmonic block.
    pub fn mixed_matrix(&self) -> Result<SparseMatrix> {
        let mut b = BlockSystem::new(&[self.sigma_dim(), self.u.dim()]);
        for i in 0..2 {
            for j in 0..2 {
                if let Some(blk) = self.system.block(i, j) {
                    b.set(i, j, blk.clone())?;
                }
            }
        }
        Ok(b.matrix())
    }

    /// M-orthonormal basis of the discrete harmonic k-forms.
    pub fn harmonic_basis(&self) -> Vec<Cochain> {
        self.harmonic.iter().map(|h| Cochain { space: self.u.clone(), coeffs: h.clone() }).collect()
    }

    /// Three-field solve with load `f_i = (f, φ^u_i)`.
    pub fn solve_unperturbed(&self, f: &[f64]) -> Result<HodgeSolution> {
        let nu = self.u.dim();
        if f.len() != nu {
            return Err(FeecError::ShapeMismatch(format!("load of length {} for {nu} unknowns", f.len())));
        }
        let ns = self.sigma_dim();
        let mut rhs = vec![0.0; self.system.dim()];
        rhs[ns..ns + nu].copy_from_slice(f);
        let rep = self.lu.solve_report(&rhs)?;
        let parts = self.system.split(&rep.x);
        let mut p = vec![0.0; nu];
        for (h, &c) in self.harmonic.iter().zip(&parts[2]) {
            p.iter_mut().zip(h).for_each(|(a, b)| *a += c * b);
        }
        Ok(HodgeSolution {
            sigma: self.sigma.as_ref().map(|s| Cochain { space: s.clone(), coeffs: parts[0].clone() }),
            u: Cochain { space: self.u.clone(), coeffs: parts[1].clone() },
            p: Cochain { space: self.u.clone(), coeffs: p },
            residual: rep.residual,
        })
    }

    /// Load vector for a form field `f` on the u-space.
    pub fn load(&self, f: &FormField) -> Result<Vec<f64>> {
        self.u.load_vector(f, false, self.u.smooth_degree())
    }

    /// `v = D d*_h K v + P_H v + d*_h D K v`.
    pub fn hodge_decompose(&self, v: &[f64]) -> Result<HodgeDecomposition> {
        let mu = self.u.mass_matrix();
        let sol = self.solve_unperturbed(&mu.matvec(v))?;
        let b = match (&self.d_sigma, &sol.sigma) {
            (Some(d), Some(s)) => d.matvec(&s.coeffs),
            _ => vec![0.0; v.len()],
        };
        let b_star = match (&self.d_u, &self.next) {
            (Some(d), Some(next)) => {
                let du = d.matvec(&sol.u.coeffs);
                let rhs = d.matvec_transpose(&next.mass_matrix().matvec(&du));
                self.u.mass_lu()?.solve(&rhs)?
            }
            _ => vec![0.0; v.len()],
        };
        Ok(HodgeDecomposition { b, h: sol.p.coeffs, b_star })
    }

    /// `P_{B_h} v`.
    pub fn project_exact(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hodge_decompose(v)?.b)
    }

    /// `P_{Z_h} v = v - P_{B*_h} v` for a discrete `v`.
    pub fn project_closed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let dec = self.hodge_decompose(v)?;
        Ok(v.iter().zip(&dec.b_star).map(|(a, b)| a - b).collect())
    }

    /// The pair one level up, `V^k_h × V^{k+1}_h`, built on first use.
    pub fn upper(&self) -> Result<Option<Arc<HodgePair>>> {
        let Some(next) = &self.next else { return Ok(None) };
        let cell = self.upper.get_or_init(|| {
            HodgePair::new(Some(self.u.clone()), next.clone()).map(Arc::new).map_err(|e| e.to_string())
        });
        cell.clone().map(Some).map_err(FeecError::InvalidArgument)
    }

    /// `Π_h w = P_{Z_h} w + d*_h K_{0h} P_h dw` on the u-space.
    pub fn pi_h(&self, w: &FormField, dw: &FormField) -> Result<Cochain> {
        let pw = l2_project(&self.u, w)?;
        let pdw = match &self.next {
            Some(next) => Some(l2_project(next, dw)?.coeffs),
            None => None,
        };
        self.pi_h_projected(&pw.coeffs, pdw.as_deref())
    }

    /// [`HodgePair::pi_h`] for a discrete form `v`, where `P_h v = v` and `P_h dv = D v`.
    pub fn pi_h_discrete(&self, v: &[f64]) -> Result<Cochain> {
        let dv = self.d_u.as_ref().map(|d| d.matvec(v));
        self.pi_h_projected(v, dv.as_deref())
    }

    fn pi_h_projected(&self, pw: &[f64], pdw: Option<&[f64]>) -> Result<Cochain> {
        let mut out = self.project_closed(pw)?;
        if let (Some(g), Some(up)) = (pdw, self.upper()?) {
            let f = up.u.mass_matrix().matvec(g);
            let sol = up.solve_unperturbed(&f)?;
            if let Some(s) = sol.sigma {
                out.iter_mut().zip(&s.coeffs).for_each(|(a, b)| *a += b);
            }
        }
        Ok(Cochain { space: self.u.clone(), coeffs: out })
    }

    /// `z_h = K_{0h} P_h (L_0 z) + P_{H_h} (P_H z)`.
    pub fn modified_elliptic_projection(&self, l0z: &FormField, harmonic_part: Option<&FormField>) -> Result<Cochain> {
        let sol = self.solve_unperturbed(&self.load(l0z)?)?;
        let mut z = sol.u.coeffs;
        if let Some(ph) = harmonic_part {
            let b = self.load(ph)?;
            for h in &self.harmonic {
                let c = dot(h, &b);
                z.iter_mut().zip(h).for_each(|(a, hv)| *a += c * hv);
            }
        }
        Ok(Cochain { space: self.u.clone(), coeffs: z })
    }
}

/// Kernel of the discrete Hodge Laplacian, checked against the expected count.
fn harmonic_vectors(
    msigma: &SparseMatrix,
    c: &SparseMatrix,
    s: &SparseMatrix,
    mu: &SparseMatrix,
    expected: usize,
) -> Result<Vec<Vec<f64>>> {
    let nu = mu.nrows();
    let ns = msigma.nrows();
    let mut aug = BlockSystem::new(&[ns, nu]);
    aug.set(0, 0, msigma.scaled(-1.0))?;
    aug.set(0, 1, c.transpose())?;
    aug.set(1, 0, c.clone())?;
    aug.set(1, 1, s.add_scaled(mu, 1.0)?)?;
    let op = ShiftedLaplacian { m: mu, lu: LuFactor::new(&aug.matrix())?, nsigma: ns };
    let count = (expected + 2).min(nu);
    let pairs = shift_invert_eig(&op, count, EIG_SEED)?;
    let found = pairs.values.iter().filter(|&&v| v.abs() <= HARMONIC_CUTOFF).count();
    if found != expected {
        return Err(FeecError::TopologyCheck { expected, found });
    }
    // Polish: each application of (A + M)^{-1} M damps the non-harmonic part
    // by at least 1 / (1 + λ_1).
    let mut vs: Vec<Vec<f64>> = pairs.vectors.into_iter().take(found).collect();
    for _ in 0..6 {
        vs = vs.iter().map(|v| op.solve_shifted(&mu.matvec(v))).collect::<Result<_>>()?;
    }
    Ok(m_orthonormal(vs, mu))
}

/// Löwdin M-orthonormalization of a few vectors.
fn m_orthonormal(vs: Vec<Vec<f64>>, m: &SparseMatrix) -> Vec<Vec<f64>> {
    let p = vs.len();
    if p == 0 {
        return vs;
    }
    let mv: Vec<Vec<f64>> = vs.iter().map(|v| m.matvec(v)).collect();
    let g = DMatrix::from_fn(p, p, |i, j| dot(&vs[i], &mv[j]));
    let eig = SymmetricEigen::new((&g + g.transpose()) * 0.5);
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    (0..p)
        .map(|j| {
            let mut out = vec![0.0; vs[0].len()];
            for i in 0..p {
                let w = inv_sqrt[(i, j)];
                out.iter_mut().zip(&vs[i]).for_each(|(a, b)| *a += w * b);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::m_norm;

    fn mesh(n: usize, m: usize) -> Arc<SimplicialMesh> {
        Arc::new(SimplicialMesh::build_box(n, m, 0.2, 7).unwrap())
    }

    #[test]
    fn harmonic_counts_match_box_cohomology() {
        let m3 = mesh(3, 1);
        let p = HodgePair::canonical(&m3, 1, 4, 1, BcMode::Natural).unwrap();
        assert!(p.harmonic_basis().is_empty());
        let p = HodgePair::canonical(&m3, 3, 4, 1, BcMode::Essential).unwrap();
        assert_eq!(p.harmonic_basis().len(), 1);

        let m2 = mesh(2, 3);
        let p = HodgePair::canonical(&m2, 0, 1, 1, BcMode::Natural).unwrap();
        let h = &p.harmonic_basis()[0].coeffs;
        // Normalized constant on a unit-area domain.
        for v in h {
            assert!((v.abs() - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let p = HodgePair::canonical(&mesh(2, 2), 1, 1, 1, BcMode::Natural).unwrap();
        let sol = p.solve_unperturbed(&vec![0.0; p.u_space().dim()]).unwrap();
        assert!(sol.u.coeffs.iter().chain(&sol.sigma.unwrap().coeffs).all(|v| *v == 0.0));
    }

    #[test]
    fn harmonic_load_lands_in_p() {
        let p = HodgePair::canonical(&mesh(2, 2), 2, 3, 1, BcMode::Essential).unwrap();
        let h = p.harmonic_basis().remove(0).coeffs;
        let f = p.u_space().mass_matrix().matvec(&h);
        let sol = p.solve_unperturbed(&f).unwrap();
        let mu = p.u_space().mass_matrix();
        assert!(m_norm(mu, &sol.u.coeffs) < 1e-9);
        let diff: Vec<f64> = sol.p.coeffs.iter().zip(&h).map(|(a, b)| a - b).collect();
        assert!(m_norm(mu, &diff) < 1e-9);
    }

    #[test]
    fn decomposition_of_exact_form() {
        let p = HodgePair::canonical(&mesh(2, 2), 1, 2, 1, BcMode::Natural).unwrap();
        let tau: Vec<f64> = (0..p.sigma_dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let v = p.d_sigma().unwrap().matvec(&tau);
        let dec = p.hodge_decompose(&v).unwrap();
        let mu = p.u_space().mass_matrix();
        let scale = m_norm(mu, &v);
        assert!(m_norm(mu, &dec.h) <= 1e-9 * scale);
        assert!(m_norm(mu, &dec.b_star) <= 1e-9 * scale);
    }
}
