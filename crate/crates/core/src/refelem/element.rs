//! Reference-simplex bases for `P_r Λ^k` and `P_r^- Λ^k` with moment DOFs.
//!
//! DOFs on a sub-simplex `f` of dimension `d >= k` are `∫_f tr_f u ∧ η`, the
//! face being parametrized from its lowest-numbered vertex in ascending
//! vertex order, and `η` running over a fixed basis of
//!
//! * `P^-_{r+k-d} Λ^{d-k}(f)` for the full family,
//! * `P_{r+k-d-1} Λ^{d-k}(f)` for the trimmed family.
//!
//! `P_r Λ^n` coincides with `P^-_{r+1} Λ^n` and uses the trimmed rule, which
//! also covers `r = 0`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::poly::{wedge_constant, wedge_values, Poly, PolyForm};
use super::pullback::compound;
use super::quadrature::{quadrature, QuadratureRule, MAX_QUADRATURE_DEGREE};
use crate::combinat::{binomial, multi_indices_eq, multi_indices_le, subsets};
use crate::error::{FeecError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `P_r Λ^k`
    Full,
    /// `P_r^- Λ^k`
    Trimmed,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Full => write!(f, "P"),
            Family::Trimmed => write!(f, "P-"),
        }
    }
}

/// Largest supported polynomial degree in dimension `n`.
pub fn max_degree(n: usize) -> usize {
    if n <= 2 {
        4
    } else {
        3
    }
}

fn check_args(n: usize, k: usize, r: usize, family: Family) -> Result<()> {
    if n == 0 || n > 3 {
        return Err(FeecError::UnsupportedElement(format!("dimension {n}")));
    }
    if k > n {
        return Err(FeecError::UnsupportedElement(format!("form degree {k} exceeds dimension {n}")));
    }
    let min_r = if family == Family::Full && k == n { 0 } else { 1 };
    if r < min_r {
        return Err(FeecError::UnsupportedElement(format!("{family}_{r}Λ^{k} in {n}D needs r >= {min_r}")));
    }
    Ok(())
}

/// Dimension of `P_r Λ^k(R^n)` or `P_r^- Λ^k(R^n)`.
pub fn space_dimension(n: usize, k: usize, r: usize, family: Family) -> Result<usize> {
    check_args(n, k, r, family)?;
    Ok(match family {
        Family::Full => binomial(n, k) * binomial(n + r, n),
        Family::Trimmed => binomial(r + k - 1, k) * binomial(n + r, n - k),
    })
}

/// Barycentric coordinates of the reference n-simplex as polynomials, with gradients.
fn barycentric(n: usize) -> Vec<(Poly, Vec<f64>)> {
    let mut out = Vec::with_capacity(n + 1);
    out.push((Poly::affine(n, 1.0, &vec![-1.0; n]), vec![-1.0; n]));
    for i in 0..n {
        let mut g = vec![0.0; n];
        g[i] = 1.0;
        out.push((Poly::affine(n, 0.0, &g), g));
    }
    out
}

/// Whitney form `Σ_i (-1)^i λ_{σ_i} dλ_{σ_0} ∧ .. (omit i) .. ∧ dλ_{σ_k}`.
pub fn whitney_form(n: usize, sigma: &[usize]) -> PolyForm {
    let bary = barycentric(n);
    let k = sigma.len() - 1;
    let mut out = PolyForm::zero(n, k);
    for i in 0..=k {
        let ones: Vec<Vec<f64>> = sigma.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &s)| bary[s].1.clone()).collect();
        let coeffs = wedge_constant(n, &ones);
        let term = PolyForm::from_constant(n, k, &coeffs, &bary[sigma[i]].0);
        out.add_scaled(&term, if i % 2 == 0 { 1.0 } else { -1.0 });
    }
    out
}

fn bary_monomial(bary: &[(Poly, Vec<f64>)], alpha: &[usize], n: usize) -> Poly {
    let mut s = Poly::constant(n, 1.0);
    for (i, &a) in alpha.iter().enumerate() {
        for _ in 0..a {
            s = s.mul(&bary[i].0);
        }
    }
    s
}

/// Spanning set (possibly redundant) of the polynomial form space.
fn spanning_set(n: usize, k: usize, r: usize, family: Family) -> Vec<PolyForm> {
    match family {
        Family::Full => {
            // Barycentric monomials λ^α with |α| = r span P_r and are far
            // better conditioned than x^α on the reference simplex.
            let bary = barycentric(n);
            let mut out = Vec::new();
            for alpha in multi_indices_eq(n + 1, r) {
                let s = bary_monomial(&bary, &alpha, n);
                for idx in subsets(n, k) {
                    out.push(PolyForm::basis_term(n, s.clone(), &idx));
                }
            }
            out
        }
        Family::Trimmed => {
            if r == 0 {
                return Vec::new();
            }
            let bary = barycentric(n);
            let mut out = Vec::new();
            for sigma in subsets(n + 1, k + 1) {
                let w = whitney_form(n, &sigma);
                for alpha in multi_indices_eq(n + 1, r - 1) {
                    out.push(w.times(&bary_monomial(&bary, &alpha, n)));
                }
            }
            out
        }
    }
}

/// Coefficients of a polynomial form in the monomial basis of degree `<= deg`.
pub fn coefficient_vector(form: &PolyForm, deg: usize) -> Vec<f64> {
    let monos = multi_indices_le(form.n, deg);
    let index: HashMap<[u8; 3], usize> = monos
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut e = [0u8; 3];
            for (slot, &v) in e.iter_mut().zip(a) {
                *slot = v as u8;
            }
            (e, i)
        })
        .collect();
    let mut out = vec![0.0; monos.len() * form.comps.len()];
    for (c, p) in form.comps.iter().enumerate() {
        for (e, v) in p.terms() {
            out[c * monos.len() + index[e]] += v;
        }
    }
    out
}

/// Greedy selection of a linearly independent subset.
fn independent_subset(forms: Vec<PolyForm>, deg: usize) -> Vec<PolyForm> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for f in forms {
        let mut v = coefficient_vector(&f, deg);
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &q {
                let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
            out.push(f);
        }
    }
    out
}

/// A basis of the polynomial form space on the reference n-simplex.
pub fn polynomial_basis(n: usize, k: usize, r: usize, family: Family) -> Vec<PolyForm> {
    independent_subset(spanning_set(n, k, r, family), r)
}

/// Test forms for DOFs of a `(family, r, k)` element on a `d`-dimensional face.
fn test_space(k: usize, r: usize, family: Family, n: usize, d: usize) -> Vec<PolyForm> {
    if d < k {
        return Vec::new();
    }
    let j = d - k;
    let (fam, s) = if family == Family::Trimmed || k == n {
        let r_eff = if family == Family::Full { r + 1 } else { r };
        (Family::Full, r_eff as i64 + k as i64 - d as i64 - 1)
    } else {
        (Family::Trimmed, r as i64 + k as i64 - d as i64)
    };
    if s < 0 || (fam == Family::Trimmed && s == 0) {
        return Vec::new();
    }
    let s = s as usize;
    if d == 0 {
        return vec![PolyForm::basis_term(0, Poly::constant(0, 1.0), &[])];
    }
    polynomial_basis(d, j, s, fam)
}

/// `∫_f tr_f w ∧ η` for each test form `η`, where `f` is the simplex spanned
/// by `verts` in the given order and `w` is evaluated in ambient coordinates.
pub fn face_moments(
    n: usize,
    k: usize,
    verts: &[&[f64]],
    field: &dyn Fn(&[f64], &mut [f64]),
    tests: &[PolyForm],
    degree: usize,
    out: &mut [f64],
) -> Result<()> {
    let d = verts.len() - 1;
    let j = d - k;
    let jac = DMatrix::from_fn(n, d, |i, c| verts[c + 1][i] - verts[0][i]);
    let comp = compound(&jac, k);
    let rule = quadrature(d, degree.min(MAX_QUADRATURE_DEGREE))?;
    let mut x = vec![0.0; n];
    let mut val = vec![0.0; binomial(n, k)];
    let mut tr = vec![0.0; binomial(d, k)];
    let mut eta = vec![0.0; binomial(d, j)];
    let mut top = [0.0];
    out.iter_mut().for_each(|o| *o = 0.0);
    for q in 0..rule.len() {
        let s = rule.point(q);
        for i in 0..n {
            x[i] = verts[0][i] + (0..d).map(|c| jac[(i, c)] * s[c]).sum::<f64>();
        }
        field(&x, &mut val);
        for (b, t) in tr.iter_mut().enumerate() {
            *t = (0..val.len()).map(|a| comp[(a, b)] * val[a]).sum();
        }
        for (t, test) in tests.iter().enumerate() {
            test.eval(s, &mut eta);
            wedge_values(d, k, &tr, j, &eta, &mut top);
            out[t] += rule.weights[q] * top[0];
        }
    }
    Ok(())
}

/// Basis values at a set of reference points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub npts: usize,
    pub nbasis: usize,
    /// `C(n, k)`
    pub ncomp: usize,
    /// `C(n, k + 1)`
    pub ndcomp: usize,
    /// Index `(q * nbasis + i) * ncomp + c`.
    pub values: Vec<f64>,
    /// Index `(q * nbasis + i) * ndcomp + c`.
    pub dvalues: Vec<f64>,
}

impl Tabulation {
    pub fn value(&self, q: usize, i: usize) -> &[f64] {
        let o = (q * self.nbasis + i) * self.ncomp;
        &self.values[o..o + self.ncomp]
    }

    pub fn dvalue(&self, q: usize, i: usize) -> &[f64] {
        let o = (q * self.nbasis + i) * self.ndcomp;
        &self.dvalues[o..o + self.ndcomp]
    }
}

#[derive(Debug)]
pub struct ReferenceElement {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub family: Family,
    /// Basis forms, dual to the DOFs.
    pub basis: Vec<PolyForm>,
    pub d_basis: Vec<PolyForm>,
    /// For each DOF: (sub-simplex dimension, local sub-simplex index).
    pub dof_assoc: Vec<(usize, usize)>,
    /// DOFs per sub-simplex, indexed by sub-simplex dimension.
    pub dofs_per_entity: Vec<usize>,
    /// Test forms on the reference d-simplex, indexed by `d`.
    pub test_forms: Vec<Vec<PolyForm>>,
    /// `max |V - I|` of the DOF matrix applied to the final basis.
    pub duality_defect: f64,
    tabulations: Mutex<HashMap<usize, Arc<Tabulation>>>,
}

impl ReferenceElement {
    pub fn build(n: usize, k: usize, r: usize, family: Family) -> Result<Self> {
        check_args(n, k, r, family)?;
        if r > max_degree(n) + 1 {
            return Err(FeecError::UnsupportedElement(format!("degree {r} too high in {n}D")));
        }
        let dim = space_dimension(n, k, r, family)?;
        let span = polynomial_basis(n, k, r, family);
        if span.len() != dim {
            return Err(FeecError::Unisolvence(format!(
                "{family}_{r}Λ^{k} in {n}D: spanning set has rank {} but dimension is {dim}",
                span.len()
            )));
        }
        let test_forms: Vec<Vec<PolyForm>> = (0..=n).map(|d| test_space(k, r, family, n, d)).collect();
        let dofs_per_entity: Vec<usize> = test_forms.iter().map(Vec::len).collect();
        let mut dof_assoc = Vec::new();
        for d in 0..=n {
            for e in 0..binomial(n + 1, d + 1) {
                for _ in 0..dofs_per_entity[d] {
                    dof_assoc.push((d, e));
                }
            }
        }
        if dof_assoc.len() != dim {
            return Err(FeecError::Unisolvence(format!(
                "{family}_{r}Λ^{k} in {n}D: {} DOFs for dimension {dim}",
                dof_assoc.len()
            )));
        }

        let mut shell = Self {
            n,
            k,
            r,
            family,
            basis: Vec::new(),
            d_basis: Vec::new(),
            dof_assoc,
            dofs_per_entity,
            test_forms,
            duality_defect: 0.0,
            tabulations: Mutex::new(HashMap::new()),
        };
        let vander = shell.dof_matrix(&span)?;
        let svd = vander.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-12 * smax) {
            return Err(FeecError::Unisolvence(format!(
                "{family}_{r}Λ^{k} in {n}D: DOF matrix condition number {:.3e}",
                smax / smin
            )));
        }
        let inv = vander
            .try_inverse()
            .ok_or_else(|| FeecError::Unisolvence("DOF matrix is singular".into()))?;
        let basis: Vec<PolyForm> = (0..dim)
            .map(|i| {
                let mut f = PolyForm::zero(n, k);
                for (j, s) in span.iter().enumerate() {
                    let c = inv[(j, i)];
                    if c != 0.0 {
                        f.add_scaled(s, c);
                    }
                }
                f
            })
            .collect();
        // One Newton-Schulz correction B <- B (2I - V B) against rounding.
        let check = shell.dof_matrix(&basis)?;
        let corr = DMatrix::identity(dim, dim) * 2.0 - check;
        let basis: Vec<PolyForm> = (0..dim)
            .map(|i| {
                let mut f = PolyForm::zero(n, k);
                for (j, b) in basis.iter().enumerate() {
                    if corr[(j, i)] != 0.0 {
                        f.add_scaled(b, corr[(j, i)]);
                    }
                }
                f
            })
            .collect();
        let check = shell.dof_matrix(&basis)?;
        let defect = (check - DMatrix::identity(dim, dim)).amax();
        if defect > 1e-10 {
            return Err(FeecError::Unisolvence(format!(
                "{family}_{r}Λ^{k} in {n}D: duality defect {defect:.3e}"
            )));
        }
        shell.d_basis = basis.iter().map(PolyForm::d).collect();
        shell.basis = basis;
        shell.duality_defect = defect;
        Ok(shell)
    }

    pub fn dim(&self) -> usize {
        self.dof_assoc.len()
    }

    pub fn ncomp(&self) -> usize {
        binomial(self.n, self.k)
    }

    /// Highest polynomial degree of the test forms.
    pub fn test_degree(&self) -> usize {
        self.test_forms.iter().flatten().map(PolyForm::degree).max().unwrap_or(0)
    }

    /// DOF values of each form: entry `(i, j)` is `DOF_i(forms[j])`.
    pub fn dof_matrix(&self, forms: &[PolyForm]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.dim(), forms.len());
        let degree = self.r + self.test_degree();
        for (j, f) in forms.iter().enumerate() {
            let vals = self.apply_dofs(&|x: &[f64], v: &mut [f64]| f.eval(x, v), degree)?;
            for (i, v) in vals.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// DOF values of a k-form given in reference coordinates.
    pub fn apply_dofs(&self, field: &dyn Fn(&[f64], &mut [f64]), degree: usize) -> Result<Vec<f64>> {
        let n = self.n;
        let mut verts = vec![vec![0.0; n]; n + 1];
        for i in 0..n {
            verts[i + 1][i] = 1.0;
        }
        let mut out = Vec::with_capacity(self.dim());
        for d in 0..=n {
            let tests = &self.test_forms[d];
            if tests.is_empty() {
                continue;
            }
            let mut buf = vec![0.0; tests.len()];
            for sub in subsets(n + 1, d + 1) {
                let vs: Vec<&[f64]> = sub.iter().map(|&v| verts[v].as_slice()).collect();
                face_moments(n, self.k, &vs, field, tests, degree, &mut buf)?;
                out.extend_from_slice(&buf);
            }
        }
        Ok(out)
    }

    pub fn tabulate(&self, points: &[f64]) -> Tabulation {
        let n = self.n;
        let npts = points.len() / n.max(1);
        let nbasis = self.dim();
        let ncomp = binomial(n, self.k);
        let ndcomp = binomial(n, self.k + 1);
        let mut values = vec![0.0; npts * nbasis * ncomp];
        let mut dvalues = vec![0.0; npts * nbasis * ndcomp];
        for q in 0..npts {
            let x = &points[q * n..(q + 1) * n];
            for i in 0..nbasis {
                let o = (q * nbasis + i) * ncomp;
                self.basis[i].eval(x, &mut values[o..o + ncomp]);
                let o = (q * nbasis + i) * ndcomp;
                self.d_basis[i].eval(x, &mut dvalues[o..o + ndcomp]);
            }
        }
        Tabulation { npts, nbasis, ncomp, ndcomp, values, dvalues }
    }

    /// Tabulation at the points of a quadrature rule on the reference cell, cached per degree.
    pub fn tabulate_rule(&self, rule: &QuadratureRule) -> Arc<Tabulation> {
        let mut cache = self.tabulations.lock().unwrap();
        cache.entry(rule.degree).or_insert_with(|| Arc::new(self.tabulate(&rule.points))).clone()
    }
}

type ElementKey = (usize, usize, usize, Family);

/// Shared, lazily built reference element.
pub fn reference_element(n: usize, k: usize, r: usize, family: Family) -> Result<Arc<ReferenceElement>> {
    static CACHE: OnceLock<Mutex<HashMap<ElementKey, Arc<ReferenceElement>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(e) = cache.lock().unwrap().get(&(n, k, r, family)) {
        return Ok(e.clone());
    }
    let e = Arc::new(ReferenceElement::build(n, k, r, family)?);
    Ok(cache.lock().unwrap().entry((n, k, r, family)).or_insert(e).clone())
}

/// Every element the crate supports in dimension `n`.
pub fn supported_elements(n: usize) -> Vec<(usize, usize, Family)> {
    let mut out = Vec::new();
    for k in 0..=n {
        for r in 0..=max_degree(n) {
            for family in [Family::Full, Family::Trimmed] {
                if check_args(n, k, r, family).is_ok() {
                    out.push((k, r, family));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank(forms: &[PolyForm], deg: usize) -> usize {
        if forms.is_empty() {
            return 0;
        }
        let rows: Vec<Vec<f64>> = forms.iter().map(|f| coefficient_vector(f, deg)).collect();
        let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        m.rank(1e-9 * m.amax())
    }

    #[test]
    fn dimension_formulas() {
        assert_eq!(space_dimension(2, 1, 1, Family::Full).unwrap(), 6);
        assert_eq!(space_dimension(3, 1, 1, Family::Trimmed).unwrap(), 6);
        for n in 2..=3 {
            for r in 1..=3 {
                let lagrange = binomial(n + r, n);
                assert_eq!(space_dimension(n, 0, r, Family::Full).unwrap(), lagrange);
                assert_eq!(space_dimension(n, 0, r, Family::Trimmed).unwrap(), lagrange);
            }
        }
        assert!(space_dimension(2, 3, 1, Family::Full).is_err());
        assert!(space_dimension(2, 1, 0, Family::Full).is_err());
        assert!(space_dimension(2, 2, 0, Family::Trimmed).is_err());
    }

    #[test]
    fn dimension_matches_enumerated_span() {
        for n in 1..=3 {
            for (k, r, family) in supported_elements(n) {
                let span = spanning_set(n, k, r, family);
                assert_eq!(rank(&span, r), space_dimension(n, k, r, family).unwrap(), "{family}_{r}Λ^{k} {n}D");
            }
        }
    }

    #[test]
    fn whitney_element_spans_whitney_forms() {
        let e = ReferenceElement::build(2, 1, 1, Family::Trimmed).unwrap();
        let whitney: Vec<PolyForm> = subsets(3, 2).iter().map(|s| whitney_form(2, s)).collect();
        assert_eq!(rank(&whitney, 1), 3);
        let mut all = whitney.clone();
        all.extend(e.basis.iter().cloned());
        assert_eq!(rank(&all, 1), 3);
    }

    #[test]
    fn hat_functions() {
        let e = ReferenceElement::build(2, 0, 1, Family::Full).unwrap();
        assert_eq!(e.dim(), 3);
        let mut v = [0.0];
        let mut g = [0.0; 2];
        e.basis[0].eval(&[0.0, 0.0], &mut v);
        assert!((v[0] - 1.0).abs() < 1e-14);
        e.basis[0].eval(&[1.0, 0.0], &mut v);
        assert!(v[0].abs() < 1e-14);
        for b in &e.d_basis {
            assert_eq!(b.degree(), 0);
        }
        e.d_basis[0].eval(&[0.3, 0.3], &mut g);
        assert!((g[0] + 1.0).abs() < 1e-14 && (g[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn every_supported_element_is_unisolvent() {
        for n in 2..=3 {
            for (k, r, family) in supported_elements(n) {
                let e = reference_element(n, k, r, family).unwrap();
                assert!(e.duality_defect < 1e-10);
                assert_eq!(e.dim(), space_dimension(n, k, r, family).unwrap());
            }
        }
    }

    #[test]
    fn d_maps_into_next_space() {
        for n in 2..=3 {
            for (k, r, family) in supported_elements(n) {
                if k == n {
                    continue;
                }
                let e = reference_element(n, k, r, family).unwrap();
                let (tf, tr) = match family {
                    Family::Full => (Family::Full, r - 1),
                    Family::Trimmed => (Family::Trimmed, r),
                };
                let target = polynomial_basis(n, k + 1, tr, tf);
                let mut all = target.clone();
                all.extend(e.d_basis.iter().cloned());
                assert_eq!(rank(&all, r), target.len(), "{family}_{r}Λ^{k} {n}D");
            }
        }
    }

    #[test]
    fn lowest_order_dof_counts() {
        let nd = ReferenceElement::build(3, 1, 1, Family::Trimmed).unwrap();
        assert_eq!(nd.dofs_per_entity, vec![0, 1, 0, 0]);
        let bdm = ReferenceElement::build(2, 1, 1, Family::Full).unwrap();
        assert_eq!(bdm.dofs_per_entity, vec![0, 2, 0]);
        let p0 = ReferenceElement::build(2, 2, 0, Family::Full).unwrap();
        assert_eq!(p0.dofs_per_entity, vec![0, 0, 1]);
    }

    #[test]
    fn tabulation_matches_direct_evaluation() {
        let e = reference_element(2, 1, 2, Family::Full).unwrap();
        let rule = quadrature(2, 4).unwrap();
        let tab = e.tabulate_rule(&rule);
        let mut v = [0.0; 2];
        e.basis[3].eval(rule.point(2), &mut v);
        assert_eq!(tab.value(2, 3), &v);
    }
}
