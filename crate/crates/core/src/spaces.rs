//! Global finite element spaces of k-forms on a mesh.
//!
//! DOFs are owned by mesh entities and defined intrinsically on them (moments
//! over the entity parametrized in ascending global vertex order), so two
//! cells sharing an entity agree on its DOFs without any sign correction:
//! every orientation sign in the local-to-global map is `+1`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::combinat::binomial;
use crate::error::{FeecError, Result};
use crate::linalg::{LuFactor, SparseMatrix};
use crate::mesh::SimplicialMesh;
use crate::refelem::element::face_moments;
use crate::refelem::{compound, quadrature, reference_element, Family, FormField, FormValue, ReferenceElement, MAX_QUADRATURE_DEGREE};

/// Marker for a local DOF removed by an essential boundary condition.
pub const CONSTRAINED: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcMode {
    /// Keep every DOF.
    Natural,
    /// Drop DOFs on boundary entities (zero trace).
    Essential,
}

/// Row-major matrix-valued field `out[i * ncols + j] = A_ij(x)`.
pub type MatrixFn<'a> = &'a (dyn Fn(&[f64], &mut [f64]) + Sync);

pub struct FeSpace {
    mesh: Arc<SimplicialMesh>,
    pub k: usize,
    pub r: usize,
    pub family: Family,
    pub bc: BcMode,
    element: Arc<ReferenceElement>,
    /// `ncells * element.dim()` global indices (or [`CONSTRAINED`]).
    cell_dofs: Vec<usize>,
    /// Owning entity `(dimension, id, test index)` of each global DOF.
    dof_entities: Vec<(usize, usize, usize)>,
    mass: OnceLock<SparseMatrix>,
    mass_lu: OnceLock<std::result::Result<LuFactor, String>>,
}

impl std::fmt::Debug for FeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FeSpace({}_{}Λ^{}, {:?}, dim {})", self.family, self.r, self.k, self.bc, self.dim())
    }
}

/// Coefficient vector of a discrete form.
#[derive(Debug, Clone)]
pub struct Cochain {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

impl Cochain {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(FeecError::ShapeMismatch(format!(
                "cochain of length {} for space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.dim();
        Self { space, coeffs: vec![0.0; n] }
    }
}

/// Physical basis values of one cell at the points of a quadrature rule.
struct CellTable {
    /// `(q * nb + i) * ncomp + c`
    values: Vec<f64>,
    /// `(q * nb + i) * ndcomp + c`
    dvalues: Vec<f64>,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl FeSpace {
    pub fn new(mesh: Arc<SimplicialMesh>, k: usize, r: usize, family: Family, bc: BcMode) -> Result<Self> {
        let n = mesh.dim();
        let element = reference_element(n, k, r, family)?;
        let mut entity_first: Vec<Vec<usize>> = Vec::with_capacity(n + 1);
        let mut dof_entities = Vec::new();
        for d in 0..=n {
            let per = element.dofs_per_entity[d];
            let ne = mesh.num_entities(d);
            let mut first = vec![CONSTRAINED; ne];
            if per > 0 {
                for (id, slot) in first.iter_mut().enumerate() {
                    if bc == BcMode::Essential && mesh.is_boundary(d, id) {
                        continue;
                    }
                    *slot = dof_entities.len();
                    for t in 0..per {
                        dof_entities.push((d, id, t));
                    }
                }
            }
            entity_first.push(first);
        }
        let edim = element.dim();
        // Position of each local DOF within its entity block.
        let mut local_t = vec![0; edim];
        for i in 1..edim {
            if element.dof_assoc[i] == element.dof_assoc[i - 1] {
                local_t[i] = local_t[i - 1] + 1;
            }
        }
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * edim);
        for c in 0..mesh.num_cells() {
            for i in 0..edim {
                let (d, e) = element.dof_assoc[i];
                let id = mesh.cell_entities(d, c)[e];
                let first = entity_first[d][id];
                cell_dofs.push(if first == CONSTRAINED { CONSTRAINED } else { first + local_t[i] });
            }
        }
        Ok(Self {
            mesh,
            k,
            r,
            family,
            bc,
            element,
            cell_dofs,
            dof_entities,
            mass: OnceLock::new(),
            mass_lu: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dof_entities.len()
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn element(&self) -> &Arc<ReferenceElement> {
        &self.element
    }

    pub fn n(&self) -> usize {
        self.mesh.dim()
    }

    pub fn ncomp(&self) -> usize {
        binomial(self.n(), self.k)
    }

    /// Global indices of the local DOFs of `cell` ([`CONSTRAINED`] if removed).
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let e = self.element.dim();
        &self.cell_dofs[cell * e..(cell + 1) * e]
    }

    pub fn dof_entity(&self, dof: usize) -> (usize, usize, usize) {
        self.dof_entities[dof]
    }

    /// Short label such as `P-_1Λ^1`.
    pub fn label(&self) -> String {
        format!("{}_{}Λ^{}", self.family, self.r, self.k)
    }

    fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Default quadrature degree for integrals against non-polynomial data.
    pub fn smooth_degree(&self) -> usize {
        (2 * self.r + self.n() + 4).min(MAX_QUADRATURE_DEGREE)
    }

    fn table(&self, cell: usize, degree: usize) -> Result<CellTable> {
        let n = self.n();
        let rule = quadrature(n, degree.min(MAX_QUADRATURE_DEGREE))?;
        let tab = self.element.tabulate_rule(&rule);
        let geo = self.mesh.geometry(cell);
        let tk = compound(&geo.inv, self.k).transpose();
        let tk1 = compound(&geo.inv, self.k + 1).transpose();
        let (nc, ndc, nb) = (tab.ncomp, tab.ndcomp, tab.nbasis);
        let mut values = vec![0.0; rule.len() * nb * nc];
        let mut dvalues = vec![0.0; rule.len() * nb * ndc];
        let mut points = vec![0.0; rule.len() * n];
        let scale = geo.det.abs();
        for q in 0..rule.len() {
            geo.map(rule.point(q), &mut points[q * n..(q + 1) * n]);
            for i in 0..nb {
                let src = tab.value(q, i);
                let o = (q * nb + i) * nc;
                for c in 0..nc {
                    values[o + c] = (0..nc).map(|a| tk[(c, a)] * src[a]).sum();
                }
                let src = tab.dvalue(q, i);
                let o = (q * nb + i) * ndc;
                for c in 0..ndc {
                    dvalues[o + c] = (0..ndc).map(|a| tk1[(c, a)] * src[a]).sum();
                }
            }
        }
        let weights = rule.weights.iter().map(|w| w * scale).collect();
        Ok(CellTable { values, dvalues, points, weights })
    }

    /// Mass matrix `M_ij = (φ_j, φ_i)`; exact on affine cells.
    pub fn mass_matrix(&self) -> &SparseMatrix {
        self.mass.get_or_init(|| {
            let degree = (2 * self.r + self.n()).min(MAX_QUADRATURE_DEGREE);
            assemble_bilinear(self, false, self, false, None, degree).expect("mass assembly on a valid space")
        })
    }

    /// Factorized mass matrix, built on first use.
    pub fn mass_lu(&self) -> Result<&LuFactor> {
        self.mass_lu
            .get_or_init(|| LuFactor::new(self.mass_matrix()).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| FeecError::SingularMatrix { reason: e.clone(), near_null: None })
    }

    /// Stiffness matrix `(dφ_j, dφ_i)`.
    pub fn stiffness_matrix(&self) -> Result<SparseMatrix> {
        let degree = (2 * self.r + self.n()).min(MAX_QUADRATURE_DEGREE);
        assemble_bilinear(self, true, self, true, None, degree)
    }

    /// `b_i = ∫ w · φ_i` (or `∫ w · dφ_i` when `use_d`).
    pub fn load_vector(&self, w: &FormField, use_d: bool, degree: usize) -> Result<Vec<f64>> {
        let expect_k = if use_d { self.k + 1 } else { self.k };
        if w.k != expect_k || w.n != self.n() {
            return Err(FeecError::ShapeMismatch(format!(
                "load of a {}-form against {} of {}",
                w.k,
                if use_d { "derivatives" } else { "values" },
                self.label()
            )));
        }
        let nb = self.element.dim();
        let nc = w.ncomp();
        let locals: Vec<Result<Vec<f64>>> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let t = self.table(cell, degree)?;
                let n = self.n();
                let mut out = vec![0.0; nb];
                let mut val = vec![0.0; nc];
                for q in 0..t.weights.len() {
                    w.eval_into(&t.points[q * n..(q + 1) * n], &mut val);
                    let basis = if use_d { &t.dvalues } else { &t.values };
                    for (i, o) in out.iter_mut().enumerate() {
                        let b = &basis[(q * nb + i) * nc..(q * nb + i + 1) * nc];
                        *o += t.weights[q] * b.iter().zip(&val).map(|(a, c)| a * c).sum::<f64>();
                    }
                }
                Ok(out)
            })
            .collect();
        let mut b = vec![0.0; self.dim()];
        for (cell, local) in locals.into_iter().enumerate() {
            let local = local?;
            for (i, &g) in self.cell_dofs(cell).iter().enumerate() {
                if g != CONSTRAINED {
                    b[g] += local[i];
                }
            }
        }
        Ok(b)
    }

    /// Value of the discrete form at reference point `xi` of `cell`.
    fn eval_in_cell(&self, coeffs: &[f64], cell: usize, xi: &[f64], use_d: bool) -> Vec<f64> {
        let n = self.n();
        let kk = if use_d { self.k + 1 } else { self.k };
        let nc = binomial(n, kk);
        let mut refval = vec![0.0; nc];
        let mut tmp = vec![0.0; nc];
        let forms = if use_d { &self.element.d_basis } else { &self.element.basis };
        for (i, &g) in self.cell_dofs(cell).iter().enumerate() {
            if g == CONSTRAINED || coeffs[g] == 0.0 {
                continue;
            }
            forms[i].eval(xi, &mut tmp);
            refval.iter_mut().zip(&tmp).for_each(|(a, b)| *a += coeffs[g] * b);
        }
        let t = compound(&self.mesh.geometry(cell).inv, kk);
        (0..nc).map(|c| (0..nc).map(|a| t[(a, c)] * refval[a]).sum()).collect()
    }

    fn evaluate_impl(&self, coeffs: &[f64], points: &[Vec<f64>], use_d: bool) -> Result<Vec<FormValue>> {
        if coeffs.len() != self.dim() {
            return Err(FeecError::ShapeMismatch("coefficient vector length".into()));
        }
        let kk = if use_d { self.k + 1 } else { self.k };
        points
            .iter()
            .map(|p| {
                let (cell, xi) = self.mesh.locate(p).ok_or_else(|| FeecError::PointOutsideMesh(p.clone()))?;
                Ok(FormValue { k: kk, coeffs: self.eval_in_cell(coeffs, cell, &xi, use_d) })
            })
            .collect()
    }

    /// Point values of the discrete form.
    pub fn evaluate(&self, coeffs: &[f64], points: &[Vec<f64>]) -> Result<Vec<FormValue>> {
        self.evaluate_impl(coeffs, points, false)
    }

    /// Point values of the exterior derivative of the discrete form.
    pub fn evaluate_d(&self, coeffs: &[f64], points: &[Vec<f64>]) -> Result<Vec<FormValue>> {
        self.evaluate_impl(coeffs, points, true)
    }

    /// `‖w_h - w‖_{L2}` (or of the derivatives when `use_d`).
    pub fn l2_error(&self, coeffs: &[f64], exact: &FormField, use_d: bool, degree: usize) -> Result<f64> {
        let kk = if use_d { self.k + 1 } else { self.k };
        if exact.k != kk {
            return Err(FeecError::ShapeMismatch(format!("comparing a {}-form with a {kk}-form", exact.k)));
        }
        let nb = self.element.dim();
        let nc = binomial(self.n(), kk);
        let n = self.n();
        let parts: Vec<Result<f64>> = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let t = self.table(cell, degree)?;
                let dofs = self.cell_dofs(cell);
                let basis = if use_d { &t.dvalues } else { &t.values };
                let mut val = vec![0.0; nc];
                let mut acc = 0.0;
                for q in 0..t.weights.len() {
                    exact.eval_into(&t.points[q * n..(q + 1) * n], &mut val);
                    for (i, &g) in dofs.iter().enumerate() {
                        if g == CONSTRAINED {
                            continue;
                        }
                        let b = &basis[(q * nb + i) * nc..(q * nb + i + 1) * nc];
                        val.iter_mut().zip(b).for_each(|(v, bb)| *v -= coeffs[g] * bb);
                    }
                    acc += t.weights[q] * val.iter().map(|v| v * v).sum::<f64>();
                }
                Ok(acc)
            })
            .collect();
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total.sqrt())
    }
}

/// Build a space on a shared mesh.
pub fn build_space(mesh: &Arc<SimplicialMesh>, k: usize, r: usize, family: Family, bc: BcMode) -> Result<Arc<FeSpace>> {
    Ok(Arc::new(FeSpace::new(mesh.clone(), k, r, family, bc)?))
}

/// Canonical interpolant: DOFs of `w` evaluated on the mesh entities.
pub fn interpolate(space: &Arc<FeSpace>, w: &FormField) -> Result<Cochain> {
    if w.k != space.k || w.n != space.n() {
        return Err(FeecError::ShapeMismatch(format!("interpolating a {}-form into {}", w.k, space.label())));
    }
    let n = space.n();
    // Highest rule: moments of smooth data then agree across entity orientations.
    let degree = MAX_QUADRATURE_DEGREE;
    let field = |x: &[f64], out: &mut [f64]| w.eval_into(x, out);
    let mut coeffs = vec![0.0; space.dim()];
    let mut g = 0;
    while g < space.dim() {
        let (d, id, _) = space.dof_entities[g];
        let tests = &space.element.test_forms[d];
        let verts: Vec<&[f64]> = space.mesh.entity(d, id).iter().map(|&v| space.mesh.vertex(v)).collect();
        face_moments(n, space.k, &verts, &field, tests, degree, &mut coeffs[g..g + tests.len()])?;
        g += tests.len();
    }
    Ok(Cochain { space: space.clone(), coeffs })
}

/// L2-orthogonal projection `M c = (w, φ_i)`.
pub fn l2_project(space: &Arc<FeSpace>, w: &FormField) -> Result<Cochain> {
    let b = space.load_vector(w, false, space.smooth_degree())?;
    let coeffs = space.mass_lu()?.solve(&b)?;
    Ok(Cochain { space: space.clone(), coeffs })
}

/// Local matrices `∫ coef · T(φ^trial_j) · S(φ^test_i)` merged in cell order,
/// where `T`, `S` are the value or the exterior derivative.
pub fn assemble_bilinear(
    test: &FeSpace,
    test_d: bool,
    trial: &FeSpace,
    trial_d: bool,
    coef: Option<MatrixFn<'_>>,
    degree: usize,
) -> Result<SparseMatrix> {
    if !test.same_mesh(trial) {
        return Err(FeecError::InvalidArgument("spaces live on different meshes".into()));
    }
    let n = test.n();
    let kt = if test_d { test.k + 1 } else { test.k };
    let ks = if trial_d { trial.k + 1 } else { trial.k };
    let (nct, ncs) = (binomial(n, kt), binomial(n, ks));
    if coef.is_none() && kt != ks {
        return Err(FeecError::ShapeMismatch(format!("pairing a {ks}-form with a {kt}-form")));
    }
    let same = std::ptr::eq(test, trial);
    let (nbt, nbs) = (test.element.dim(), trial.element.dim());
    let locals: Vec<Result<DMatrix<f64>>> = (0..test.mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let tt = test.table(cell, degree)?;
            let ts = if same { None } else { Some(trial.table(cell, degree)?) };
            let ts_ref = ts.as_ref().unwrap_or(&tt);
            let vt = if test_d { &tt.dvalues } else { &tt.values };
            let vs = if trial_d { &ts_ref.dvalues } else { &ts_ref.values };
            let mut local = DMatrix::zeros(nbt, nbs);
            let mut a = vec![0.0; nct * ncs];
            let mut mapped = vec![0.0; nct];
            for q in 0..tt.weights.len() {
                if let Some(f) = coef {
                    f(&tt.points[q * n..(q + 1) * n], &mut a);
                }
                let w = tt.weights[q];
                for j in 0..nbs {
                    let s = &vs[(q * nbs + j) * ncs..(q * nbs + j + 1) * ncs];
                    if coef.is_some() {
                        for (r, m) in mapped.iter_mut().enumerate() {
                            *m = (0..ncs).map(|c| a[r * ncs + c] * s[c]).sum();
                        }
                    } else {
                        mapped.copy_from_slice(s);
                    }
                    for i in 0..nbt {
                        let t = &vt[(q * nbt + i) * nct..(q * nbt + i + 1) * nct];
                        local[(i, j)] += w * t.iter().zip(&mapped).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
            Ok(local)
        })
        .collect();
    let mut triplets = Vec::new();
    for (cell, local) in locals.into_iter().enumerate() {
        let local = local?;
        let rows = test.cell_dofs(cell);
        let cols = trial.cell_dofs(cell);
        for (i, &gi) in rows.iter().enumerate() {
            if gi == CONSTRAINED {
                continue;
            }
            for (j, &gj) in cols.iter().enumerate() {
                if gj != CONSTRAINED && local[(i, j)] != 0.0 {
                    triplets.push((gi, gj, local[(i, j)]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(test.dim(), trial.dim(), &triplets)
}

/// Whether `d(source) ⊂ target` for the given pairing.
pub fn check_subcomplex(source: &FeSpace, target: &FeSpace) -> Result<()> {
    let fail = |why: &str| {
        Err(FeecError::InvalidPair(format!("{} -> {}: {why}", source.label(), target.label())))
    };
    if !source.same_mesh(target) {
        return fail("different meshes");
    }
    if target.k != source.k + 1 {
        return fail("form degrees must differ by one");
    }
    let ok_degree = match target.family {
        Family::Full => target.r + 1 >= source.r,
        Family::Trimmed => target.r >= source.r,
    };
    if !ok_degree {
        return fail("target degree too low to contain the derivative");
    }
    if target.bc == BcMode::Essential && source.bc != BcMode::Essential {
        return fail("essential target needs an essential source");
    }
    Ok(())
}

/// Matrix of `d : source -> target` in the DOF bases.
pub fn derivative_matrix(source: &FeSpace, target: &FeSpace) -> Result<SparseMatrix> {
    check_subcomplex(source, target)?;
    let se = &source.element;
    let te = &target.element;
    let degree = (se.r + te.test_degree()).min(MAX_QUADRATURE_DEGREE);
    // DOF_i^target(d φ_j^source) on the reference cell; affine invariance makes
    // it the same on every cell.
    let mut local = DMatrix::zeros(te.dim(), se.dim());
    for (j, df) in se.d_basis.iter().enumerate() {
        let vals = te.apply_dofs(&|x: &[f64], v: &mut [f64]| df.eval(x, v), degree)?;
        for (i, v) in vals.into_iter().enumerate() {
            local[(i, j)] = v;
        }
    }
    let scale = local.amax().max(1.0);
    local.iter_mut().for_each(|v| {
        if v.abs() < 1e-13 * scale {
            *v = 0.0;
        }
    });
    let mut triplets = Vec::new();
    for cell in 0..source.mesh.num_cells() {
        let rows = target.cell_dofs(cell);
        let cols = source.cell_dofs(cell);
        for (i, &gi) in rows.iter().enumerate() {
            if gi == CONSTRAINED {
                continue;
            }
            for (j, &gj) in cols.iter().enumerate() {
                if gj != CONSTRAINED && local[(i, j)] != 0.0 {
                    triplets.push((gi, gj, local[(i, j)]));
                }
            }
        }
    }
    // Shared entities contribute the same entry from every cell: keep one copy.
    triplets.sort_by_key(|a| (a.0, a.1));
    let mut unique: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    for t in triplets {
        match unique.last() {
            Some(u) if (u.0, u.1) == (t.0, t.1) => {
                if (u.2 - t.2).abs() > 1e-10 * scale {
                    return Err(FeecError::InvalidPair(format!(
                        "inconsistent derivative entry ({}, {}): {} vs {}",
                        t.0, t.1, u.2, t.2
                    )));
                }
            }
            _ => unique.push(t),
        }
    }
    SparseMatrix::from_triplets(target.dim(), source.dim(), &unique)
}

/// `d*_h = M_{k-1}^{-1} D^T M_k`, applied by solves.
pub struct Codifferential {
    lower: Arc<FeSpace>,
    upper: Arc<FeSpace>,
    d: SparseMatrix,
}

impl Codifferential {
    pub fn new(lower: &Arc<FeSpace>, upper: &Arc<FeSpace>) -> Result<Self> {
        let d = derivative_matrix(lower, upper)?;
        lower.mass_lu()?;
        Ok(Self { lower: lower.clone(), upper: upper.clone(), d })
    }

    pub fn derivative(&self) -> &SparseMatrix {
        &self.d
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.upper.dim() {
            return Err(FeecError::ShapeMismatch("codifferential input length".into()));
        }
        let mu = self.upper.mass_matrix().matvec(u);
        self.lower.mass_lu()?.solve(&self.d.matvec_transpose(&mu))
    }
}

/// Convenience constructor matching [`derivative_matrix`].
pub fn codifferential_matrix(lower: &Arc<FeSpace>, upper: &Arc<FeSpace>) -> Result<Codifferential> {
    Codifferential::new(lower, upper)
}
