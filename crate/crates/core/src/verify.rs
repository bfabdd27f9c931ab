//! Invariant suites on small fixed instances, each reported as a list of
//! measured defects against tolerances.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinat::{binomial, factorial, multi_indices_le};
use crate::error::{FeecError, Result};
use crate::hodge::HodgePair;
use crate::linalg::{dot, m_norm, LuFactor};
use crate::mesh::SimplicialMesh;
use crate::perturbed::{assemble_operator, solve_perturbed, CoefficientField, LowerOrderTerms};
use crate::refelem::element::supported_elements;
use crate::refelem::{quadrature, reference_element, Family, FormField, MAX_QUADRATURE_DEGREE};
use crate::spaces::{build_space, derivative_matrix, interpolate, l2_project, BcMode, FeSpace};
use crate::study::trig::{Trig, TrigForm};

/// One measured defect.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(suite: Suite, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { suite, name: name.into(), value, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

impl fmt::Display for Check {
    /// `PASS|FAIL suite name value<=tolerance`, one machine-readable line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} {} {:.3e}<={:.1e}", self.suite, self.name, self.value, self.tolerance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Mesh,
    Spaces,
    Hodge,
    Perturbed,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Mesh, Suite::Spaces, Suite::Hodge, Suite::Perturbed];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Mesh => "mesh",
            Suite::Spaces => "spaces",
            Suite::Hodge => "hodge",
            Suite::Perturbed => "perturbed",
        })
    }
}

/// `all` or a single suite name.
pub fn parse_selector(s: &str) -> Result<Vec<Suite>> {
    if s == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    Ok(vec![s.parse()?])
}

impl FromStr for Suite {
    type Err = FeecError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| FeecError::InvalidArgument(format!("unknown suite '{s}' (all, mesh, spaces, hodge, perturbed)")))
    }
}

/// Mesh sizes the suites run on: `(n, m)`.
pub const SUITE_MESHES: [(usize, usize); 3] = [(2, 2), (2, 4), (3, 2)];
const PERTURB: f64 = 0.2;

pub const DD_TOL: f64 = 1e-12;
pub const DUALITY_TOL: f64 = 1e-10;
pub const DECOMPOSITION_TOL: f64 = 1e-9;
pub const PROJECTION_TOL: f64 = 1e-9;
pub const QUADRATURE_TOL: f64 = 1e-13;
pub const REPRODUCTION_TOL: f64 = 1e-11;
pub const RELABEL_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Run one suite on the fixed meshes, or only on `meshes` if given.
pub fn run_suite(suite: Suite, seed: u64, meshes: Option<&[(usize, usize)]>) -> Result<Vec<Check>> {
    let meshes = meshes.unwrap_or(&SUITE_MESHES);
    let mut out = Vec::new();
    for &(n, m) in meshes {
        let mesh = Arc::new(SimplicialMesh::build_box(n, m, PERTURB, seed + m as u64)?);
        let tag = format!("{n}d-m{m}");
        match suite {
            Suite::Mesh => mesh_checks(&mesh, m, &tag, seed, &mut out)?,
            Suite::Spaces => spaces_checks(&mesh, &tag, seed, &mut out)?,
            Suite::Hodge => hodge_checks(&mesh, &tag, seed, &mut out)?,
            Suite::Perturbed => perturbed_checks(&mesh, &tag, seed, &mut out)?,
        }
    }
    if suite == Suite::Spaces {
        for n in 1..=3 {
            quadrature_checks(n, &mut out)?;
        }
    }
    Ok(out)
}

fn mesh_checks(mesh: &SimplicialMesh, m: usize, tag: &str, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let n = mesh.dim();
    let volume: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_geometry(c).map(|g| g.measure)).sum::<Result<f64>>()?;
    out.push(Check::new(Suite::Mesh, format!("{tag}/volume"), (volume - 1.0).abs(), 1e-12));
    let bad = mesh
        .facet_cell_counts()
        .iter()
        .enumerate()
        .filter(|&(f, &c)| c != if mesh.is_boundary(n - 1, f) { 1 } else { 2 })
        .count();
    out.push(Check::new(Suite::Mesh, format!("{tag}/facet-sharing"), bad as f64, 0.0));
    let a = SimplicialMesh::build_box(n, m, PERTURB, seed)?;
    let b = SimplicialMesh::build_box(n, m, PERTURB, seed)?;
    let same = a.coords().iter().zip(b.coords()).all(|(x, y)| x.to_bits() == y.to_bits());
    out.push(Check::new(Suite::Mesh, format!("{tag}/determinism"), if same { 0.0 } else { 1.0 }, 0.0));
    Ok(())
}

/// Space `V^{k+1}` that contains `d V^k` for either family at degree `r`.
fn next_space(mesh: &Arc<SimplicialMesh>, k: usize, r: usize) -> Result<Arc<FeSpace>> {
    build_space(mesh, k + 1, r.max(1), Family::Trimmed, BcMode::Natural)
}

fn sample_points(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.random_range(0.05..0.95)).collect()).collect()
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random polynomial k-form of total degree `<= deg` in physical coordinates.
fn random_poly_form(n: usize, k: usize, deg: usize, rng: &mut ChaCha8Rng) -> FormField {
    let ncomp = binomial(n, k);
    let terms: Vec<(Vec<usize>, Vec<f64>)> =
        multi_indices_le(n, deg).into_iter().map(|a| (a, random_vec(ncomp, rng))).collect();
    FormField::new(n, k, move |x, o| {
        o.fill(0.0);
        for (alpha, c) in &terms {
            let mono: f64 = alpha.iter().enumerate().map(|(i, &p)| x[i].powi(p as i32)).product();
            o.iter_mut().zip(c).for_each(|(a, b)| *a += mono * b);
        }
    })
}

/// Random smooth trigonometric k-form with its exterior derivative.
pub fn random_trig_form(n: usize, k: usize, rng: &mut ChaCha8Rng) -> TrigForm {
    let comps = (0..binomial(n, k))
        .map(|_| {
            let mut t = Trig::constant(n, rng.random_range(-1.0..1.0));
            for axis in 0..n {
                let f = if rng.random_bool(0.5) { Trig::sin(n, axis) } else { Trig::cos(n, axis) };
                t = t.add(&f.scaled(rng.random_range(-1.0..1.0)));
            }
            t.clone() * t.add(&Trig::constant(n, 0.5))
        })
        .collect();
    TrigForm::new(n, k, comps)
}

fn spaces_checks(mesh: &Arc<SimplicialMesh>, tag: &str, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let n = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_points(n, 12, &mut rng);
    for (k, r, family) in supported_elements(n) {
        let name = format!("{tag}/{family}{r}L{k}");
        let el = reference_element(n, k, r, family)?;
        out.push(Check::new(Suite::Spaces, format!("{name}/duality"), el.duality_defect, DUALITY_TOL));
        let v = build_space(mesh, k, r, family, BcMode::Natural)?;

        // Polynomial reproduction: the family contains P_{r-1} always, P_r when full.
        let deg = if family == Family::Full { r } else { r - 1 };
        let w = random_poly_form(n, k, deg, &mut rng);
        let c = interpolate(&v, &w)?;
        let got = v.evaluate(&c.coeffs, &points)?;
        let err = got.iter().zip(&points).map(|(g, x)| max_diff(&g.coeffs, &w.eval(x).coeffs)).fold(0.0, f64::max);
        out.push(Check::new(Suite::Spaces, format!("{name}/reproduction"), err, REPRODUCTION_TOL));

        if k == n {
            continue;
        }
        // d maps into the next space: pointwise agreement of d(u) and D u.
        let next = next_space(mesh, k, r)?;
        let d = derivative_matrix(&v, &next)?;
        let u = random_vec(v.dim(), &mut rng);
        let du = d.matvec(&u);
        let a = v.evaluate_d(&u, &points)?;
        let b = next.evaluate(&du, &points)?;
        let scale = a.iter().flat_map(|f| f.coeffs.iter()).fold(1.0f64, |s, x| s.max(x.abs()));
        let err = a.iter().zip(&b).map(|(x, y)| max_diff(&x.coeffs, &y.coeffs)).fold(0.0, f64::max);
        out.push(Check::new(Suite::Spaces, format!("{name}/d-in-next"), err / scale, DUALITY_TOL));

        if k + 2 <= n {
            let next2 = next_space(mesh, k + 1, r)?;
            let dd = derivative_matrix(&next, &next2)?.mul(&d)?;
            out.push(Check::new(Suite::Spaces, format!("{name}/dd"), dd.max_abs(), DD_TOL));
        }
    }

    // Orientation independence: relabel vertices, interpolate the same 1-form.
    let nv = mesh.num_vertices();
    let mut perm: Vec<usize> = (0..nv).collect();
    for i in (1..nv).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let other = Arc::new(mesh.relabeled(&perm)?);
    let w = random_trig_form(n, 1, &mut rng).field();
    for (r, family) in [(1, Family::Trimmed), (2, Family::Full)] {
        let a = build_space(mesh, 1, r, family, BcMode::Natural)?;
        let b = build_space(&other, 1, r, family, BcMode::Natural)?;
        let fa = a.evaluate(&interpolate(&a, &w)?.coeffs, &points)?;
        let fb = b.evaluate(&interpolate(&b, &w)?.coeffs, &points)?;
        let err = fa.iter().zip(&fb).map(|(x, y)| max_diff(&x.coeffs, &y.coeffs)).fold(0.0, f64::max);
        out.push(Check::new(Suite::Spaces, format!("{tag}/{family}{r}L1/relabel"), err, RELABEL_TOL));
    }
    Ok(())
}

/// Monomials on the reference simplex: `∫ x^α = α! / (n + |α|)!`.
fn quadrature_checks(n: usize, out: &mut Vec<Check>) -> Result<()> {
    for degree in 0..=MAX_QUADRATURE_DEGREE {
        let rule = quadrature(n, degree)?;
        let mut worst = 0.0f64;
        for alpha in multi_indices_le(n, degree) {
            let exact = alpha.iter().map(|&a| factorial(a) as f64).product::<f64>()
                / (1..=n + alpha.iter().sum::<usize>()).map(|i| i as f64).product::<f64>();
            let got: f64 = (0..rule.len())
                .map(|q| rule.weights[q] * alpha.iter().enumerate().map(|(i, &p)| rule.point(q)[i].powi(p as i32)).product::<f64>())
                .sum();
            worst = worst.max((got - exact).abs() / exact);
        }
        out.push(Check::new(Suite::Spaces, format!("quadrature/{n}d-deg{degree}"), worst, QUADRATURE_TOL));
    }
    Ok(())
}

fn hodge_checks(mesh: &Arc<SimplicialMesh>, tag: &str, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let n = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 1..=n {
        for pair_id in 1..=4 {
            for bc in [BcMode::Natural, BcMode::Essential] {
                let name = format!("{tag}/k{k}/pair{pair_id}/{bc:?}").to_lowercase();
                let pair = HodgePair::canonical(mesh, k, pair_id, 1, bc)?;
                decomposition_checks(&pair, &name, &mut rng, out)?;
                projection_checks(&pair, &name, &mut rng, out)?;
            }
        }
    }
    Ok(())
}

fn decomposition_checks(pair: &HodgePair, name: &str, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let mu = pair.u_space().mass_matrix();
    let (mut recon, mut orth) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let v = random_vec(pair.u_space().dim(), rng);
        let dec = pair.hodge_decompose(&v)?;
        let vn = m_norm(mu, &v);
        let rest: Vec<f64> = (0..v.len()).map(|i| v[i] - dec.b[i] - dec.h[i] - dec.b_star[i]).collect();
        recon = recon.max(m_norm(mu, &rest) / vn);
        let parts = [&dec.b, &dec.h, &dec.b_star];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            orth = orth.max(dot(parts[i], &mu.matvec(parts[j])).abs() / (vn * vn));
        }
    }
    out.push(Check::new(Suite::Hodge, format!("{name}/reconstruction"), recon, DECOMPOSITION_TOL));
    out.push(Check::new(Suite::Hodge, format!("{name}/orthogonality"), orth, DECOMPOSITION_TOL));
    Ok(())
}

fn projection_checks(pair: &HodgePair, name: &str, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let space = pair.u_space();
    let mu = space.mass_matrix();
    let mut idem = 0.0f64;
    for _ in 0..5 {
        let v = random_vec(space.dim(), rng);
        let p = pair.pi_h_discrete(&v)?;
        let diff: Vec<f64> = v.iter().zip(&p.coeffs).map(|(a, b)| a - b).collect();
        idem = idem.max(m_norm(mu, &diff) / m_norm(mu, &v));
    }
    out.push(Check::new(Suite::Hodge, format!("{name}/pi-idempotence"), idem, PROJECTION_TOL));

    // d Π_h w = P_B P_h dw, on the pair one level up.
    let (Some(up), Some(d), Some(next)) = (pair.upper()?, pair.d_u(), pair.next_space()) else { return Ok(()) };
    let mn = next.mass_matrix();
    let mut comm = 0.0f64;
    for _ in 0..10 {
        let w = random_trig_form(space.n(), pair.k(), rng);
        let dw = w.d();
        let pi = pair.pi_h(&w.field(), &dw.field())?;
        let lhs = d.matvec(&pi.coeffs);
        let rhs = up.project_exact(&l2_project(next, &dw.field())?.coeffs)?;
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        comm = comm.max(m_norm(mn, &diff) / m_norm(mn, &rhs).max(1e-300));
    }
    out.push(Check::new(Suite::Hodge, format!("{name}/commuting"), comm, PROJECTION_TOL));
    Ok(())
}

fn random_coefficient(n: usize, k_in: usize, k_out: usize, rng: &mut ChaCha8Rng) -> Result<CoefficientField> {
    let rows = binomial(n, k_out);
    let cols = binomial(n, k_in);
    let base = random_vec(rows * cols, rng);
    let freq = random_vec(n, rng);
    CoefficientField::new(n, k_in, k_out, move |x: &[f64], o: &mut [f64]| {
        let s = (freq.iter().zip(x).map(|(f, y)| f * y).sum::<f64>() * 3.0).sin();
        o.iter_mut().zip(&base).for_each(|(a, b)| *a = b * (1.0 + 0.5 * s));
    })
}

fn random_terms(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<LowerOrderTerms> {
    let mut t = LowerOrderTerms::none();
    for i in 1..=5 {
        if let Some((k_in, k_out)) = LowerOrderTerms::level(i, k).filter(|&(a, b)| a <= n && b <= n) {
            t.set(i, Some(random_coefficient(n, k_in, k_out, rng)?));
        }
    }
    Ok(t)
}

fn perturbed_checks(mesh: &Arc<SimplicialMesh>, tag: &str, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let n = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 1..=n {
        for pair_id in 1..=4 {
            let name = format!("{tag}/k{k}/pair{pair_id}");
            let pair = HodgePair::canonical(mesh, k, pair_id, 1, BcMode::Natural)?;
            let sys = assemble_operator(&pair, &LowerOrderTerms::none())?;
            let adj = match (sys.block(0, 1), sys.block(1, 0)) {
                (Some(a), Some(b)) => a.add_scaled(&b.transpose(), 1.0)?.max_abs(),
                _ => f64::INFINITY,
            };
            out.push(Check::new(Suite::Perturbed, format!("{name}/adjoint"), adj, 1e-14));

            let terms = random_terms(n, k, &mut rng)?;
            let b = assemble_operator(&pair, &terms)?.matrix();
            if LuFactor::new(&b).is_err() {
                // A singular draw lies in the exceptional set; nothing to check.
                continue;
            }
            let f = random_vec(pair.u_space().dim(), &mut rng);
            let sol = solve_perturbed(&pair, &terms, &f)?;
            out.push(Check::new(Suite::Perturbed, format!("{name}/residual"), sol.residual, RESIDUAL_TOL));
        }
    }
    Ok(())
}
