//! Manufactured solutions and the built-in test problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trig::{Trig, TrigForm, TrigMatrix};
use crate::coefex::{parse_in_dim, Program};
use crate::combinat::{binomial, subset_index, subsets};
use crate::error::{FeecError, Result};
use crate::perturbed::{LowerOrderTerms, TermMask};
use crate::refelem::FormField;
use crate::spaces::BcMode;

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: [&str; 4] = ["paper3d-1form", "paper3d-2form", "square2d-1form", "mhd-demo"];

/// Differential-form degree, boundary condition and lower-order terms.
#[derive(Debug, Clone)]
pub struct PerturbedProblem {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub bc: BcMode,
    pub terms: LowerOrderTerms,
}

/// Exact `u`, `du`, `σ = (δ + l2) u` and `dσ`.
#[derive(Debug, Clone)]
pub struct ManufacturedSolution {
    pub u: FormField,
    pub du: FormField,
    pub sigma: Option<FormField>,
    pub dsigma: Option<FormField>,
}

impl ManufacturedSolution {
    /// Derive `du`, `σ` and `dσ` exactly from a trigonometric `u` and `l2`.
    pub fn from_trig(u: &TrigForm, l2: Option<&TrigMatrix>) -> Self {
        let mut sigma = u.codiff();
        if let Some(l2) = l2 {
            sigma = sigma.add(&l2.apply(u));
        }
        let (sigma, dsigma) = if u.k == 0 { (None, None) } else { (Some(sigma.field()), Some(sigma.d().field())) };
        Self { u: u.field(), du: u.d().field(), sigma, dsigma }
    }

    /// Every field given by component expressions in the lexicographic basis.
    pub fn from_exprs(n: usize, k: usize, u: &[String], du: &[String], sigma: &[String], dsigma: &[String]) -> Result<Self> {
        let field = |kk: usize, src: &[String], what: &str| -> Result<FormField> {
            if src.len() != binomial(n, kk) {
                return Err(FeecError::ShapeMismatch(format!(
                    "{what} needs {} components, got {}",
                    binomial(n, kk),
                    src.len()
                )));
            }
            let progs: Vec<Program> =
                src.iter().map(|s| parse_in_dim(s, n).map(|e| Program::new(&e))).collect::<std::result::Result<_, _>>()?;
            Ok(FormField::new(n, kk, move |x, out| {
                for (o, p) in out.iter_mut().zip(&progs) {
                    *o = p.eval(x);
                }
            }))
        };
        let (sigma, dsigma) = if k == 0 {
            (None, None)
        } else {
            (Some(field(k - 1, sigma, "sigma")?), Some(field(k, dsigma, "dsigma")?))
        };
        Ok(Self { u: field(k, u, "u")?, du: field(k + 1, du, "du")?, sigma, dsigma })
    }

    /// Largest deviation between the supplied derivatives and central
    /// differences (step `1e-5`) at `points` seeded interior points,
    /// relative to `max(1, |value|)`.
    pub fn check_derivatives(&self, terms: &LowerOrderTerms, points: usize, seed: u64) -> Result<f64> {
        let n = self.u.n;
        let k = self.u.k;
        let step = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let partial = |f: &FormField, x: &[f64], axis: usize| -> Vec<f64> {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[axis] += step;
            b[axis] -= step;
            let (fa, fb) = (f.eval(&a).coeffs, f.eval(&b).coeffs);
            fa.iter().zip(&fb).map(|(p, q)| (p - q) / (2.0 * step)).collect()
        };
        // d and δ from partial derivatives of the components.
        let fd_d = |f: &FormField, x: &[f64]| -> Vec<f64> {
            let kk = f.k;
            let grads: Vec<Vec<f64>> = (0..n).map(|a| partial(f, x, a)).collect();
            subsets(n, kk + 1)
                .iter()
                .map(|j| {
                    (0..j.len())
                        .map(|p| {
                            let rest: Vec<usize> = j.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v).collect();
                            let s = if p % 2 == 0 { 1.0 } else { -1.0 };
                            s * grads[j[p]][subset_index(n, &rest)]
                        })
                        .sum()
                })
                .collect()
        };
        let fd_codiff = |f: &FormField, x: &[f64]| -> Vec<f64> {
            let grads: Vec<Vec<f64>> = (0..n).map(|a| partial(f, x, a)).collect();
            let mut out = vec![0.0; binomial(n, f.k - 1)];
            for (ji, j) in subsets(n, f.k).iter().enumerate() {
                for p in 0..j.len() {
                    let rest: Vec<usize> = j.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v).collect();
                    let s = if p % 2 == 0 { -1.0 } else { 1.0 };
                    out[subset_index(n, &rest)] += s * grads[j[p]][ji];
                }
            }
            out
        };
        let mut compare = |a: &[f64], b: &[f64]| {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs() / y.abs().max(1.0));
            }
        };
        for _ in 0..points {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
            if k < n {
                compare(&self.du.eval(&x).coeffs, &fd_d(&self.u, &x));
            }
            if let (Some(s), Some(ds)) = (&self.sigma, &self.dsigma) {
                let mut expect = fd_codiff(&self.u, &x);
                if let Some(l2) = &terms.l2 {
                    let mut lu = vec![0.0; expect.len()];
                    l2.apply(&x, &self.u.eval(&x).coeffs, &mut lu);
                    expect.iter_mut().zip(&lu).for_each(|(e, l)| *e += l);
                }
                compare(&s.eval(&x).coeffs, &expect);
                compare(&ds.eval(&x).coeffs, &fd_d(s, &x));
            }
        }
        Ok(worst)
    }
}

/// Basis change from vector proxies to lexicographic form coefficients in 3D:
/// identity for 0-, 1- and 3-forms, `(x, y, z) ↦ (z, -y, x)` for 2-forms
/// (`dx∧dy`, `dx∧dz`, `dy∧dz`). It is its own inverse.
pub fn proxy_to_lex(k: usize) -> Vec<f64> {
    match k {
        2 => vec![0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0],
        1 => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        _ => vec![1.0],
    }
}

/// A coefficient given in vector-proxy form, converted to the lexicographic bases.
fn proxy_matrix(k_in: usize, k_out: usize, entries: Vec<Trig>) -> TrigMatrix {
    TrigMatrix::new(3, k_in, k_out, entries).conjugate(&proxy_to_lex(k_out), &proxy_to_lex(k_in))
}

fn s(n: usize, a: usize) -> Trig {
    Trig::sin(n, a)
}

fn c(n: usize, a: usize) -> Trig {
    Trig::cos(n, a)
}

fn k(n: usize, v: f64) -> Trig {
    Trig::constant(n, v)
}

fn consts(n: usize, v: &[f64]) -> Vec<Trig> {
    v.iter().map(|&x| k(n, x)).collect()
}

/// `u` and the five coefficient matrices of a built-in problem.
struct TrigProblem {
    n: usize,
    k: usize,
    bc: BcMode,
    u: TrigForm,
    terms: [Option<TrigMatrix>; 5],
}

fn trig_problem(name: &str) -> Result<TrigProblem> {
    match name {
        "paper3d-1form" => {
            let n = 3;
            let u = TrigForm::new(n, 1, vec![s(n, 0) * c(n, 2), c(n, 0) * s(n, 1), c(n, 1) * s(n, 2)]);
            let l1 = proxy_matrix(
                1,
                2,
                vec![
                    s(n, 1) * s(n, 2),
                    s(n, 2),
                    s(n, 1),
                    s(n, 2),
                    s(n, 0) * s(n, 2),
                    s(n, 0),
                    s(n, 1),
                    s(n, 0),
                    s(n, 0) * s(n, 1),
                ],
            );
            let l2 = proxy_matrix(1, 0, consts(n, &[2.0, 0.0, 1.0]));
            let l3 = proxy_matrix(0, 1, consts(n, &[3.0, 2.0, -1.0]));
            let l4 = proxy_matrix(2, 1, consts(n, &[1.0, 2.0, -1.0, 3.0, -3.0, -3.0, 1.0, 3.0, 1.0]));
            let l5 = proxy_matrix(1, 1, consts(n, &[10.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0]));
            Ok(TrigProblem { n, k: 1, bc: BcMode::Natural, u, terms: [Some(l1), Some(l2), Some(l3), Some(l4), Some(l5)] })
        }
        "paper3d-2form" | "mhd-demo" => {
            let n = 3;
            let proxy = [
                (c(n, 0) + k(n, 3.0)) * s(n, 1) * s(n, 2),
                s(n, 0) * (c(n, 1) + k(n, 2.0)) * s(n, 2),
                s(n, 0) * s(n, 1) * (c(n, 2) + k(n, 2.0)),
            ];
            let u = TrigForm::new(n, 2, vec![proxy[2].clone(), proxy[1].scaled(-1.0), proxy[0].clone()]);
            if name == "mhd-demo" {
                // σ = curl B - v × B with v = (sin πy, sin πz, sin πx).
                let v = [s(n, 1), s(n, 2), s(n, 0)];
                let z = Trig::zero(n);
                let cross = vec![
                    z.clone(),
                    v[2].scaled(-1.0),
                    v[1].clone(),
                    v[2].clone(),
                    z.clone(),
                    v[0].scaled(-1.0),
                    v[1].scaled(-1.0),
                    v[0].clone(),
                    z,
                ];
                let l2 = proxy_matrix(2, 1, cross.into_iter().map(|t| t.scaled(-1.0)).collect());
                return Ok(TrigProblem { n, k: 2, bc: BcMode::Natural, u, terms: [None, Some(l2), None, None, None] });
            }
            let l1 = proxy_matrix(2, 3, vec![s(n, 0), s(n, 1).scaled(-1.0), Trig::zero(n)]);
            let l2 = proxy_matrix(2, 1, consts(n, &[1.0, 2.0, -1.0, 2.0, -2.0, 0.0, 1.0, 3.0, 1.0]));
            let l3 = proxy_matrix(1, 2, consts(n, &[1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 1.0, 2.0, 1.0]));
            let l4 = proxy_matrix(3, 2, consts(n, &[1.0, 2.0, -1.0]));
            let l5 = proxy_matrix(2, 2, consts(n, &[10.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0]));
            Ok(TrigProblem { n, k: 2, bc: BcMode::Natural, u, terms: [Some(l1), Some(l2), Some(l3), Some(l4), Some(l5)] })
        }
        "square2d-1form" => {
            let n = 2;
            let u = TrigForm::new(
                n,
                1,
                vec![s(n, 0) * (c(n, 1) + k(n, 2.0)), s(n, 1) * (c(n, 0).scaled(2.0) + k(n, 1.0))],
            );
            let l1 = TrigMatrix::new(n, 1, 2, vec![s(n, 1), s(n, 0)]);
            let l2 = TrigMatrix::constant(n, 1, 0, &[2.0, 1.0]);
            let l3 = TrigMatrix::constant(n, 0, 1, &[3.0, -1.0]);
            let l4 = TrigMatrix::constant(n, 2, 1, &[1.0, 2.0]);
            let l5 = TrigMatrix::constant(n, 1, 1, &[10.0, 0.0, 0.0, 0.0]);
            Ok(TrigProblem { n, k: 1, bc: BcMode::Natural, u, terms: [Some(l1), Some(l2), Some(l3), Some(l4), Some(l5)] })
        }
        other => Err(FeecError::UnknownProblem(other.to_string())),
    }
}

/// A built-in problem with only the terms selected by `mask` active, and
/// the matching exact solution.
pub fn builtin_problem(name: &str, mask: TermMask) -> Result<(PerturbedProblem, ManufacturedSolution)> {
    let tp = trig_problem(name)?;
    let mut terms = LowerOrderTerms::none();
    let mut l2 = None;
    for (i, t) in tp.terms.iter().enumerate() {
        if let Some(t) = t {
            if mask & (1 << i) != 0 {
                terms.set(i + 1, Some(t.coefficient()?));
                if i == 1 {
                    l2 = Some(t);
                }
            }
        }
    }
    let exact = ManufacturedSolution::from_trig(&tp.u, l2);
    let problem = PerturbedProblem { name: name.to_string(), n: tp.n, k: tp.k, bc: tp.bc, terms };
    Ok((problem, exact))
}
