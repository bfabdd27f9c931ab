//! Polynomial differential forms on a reference simplex, in monomial coordinates.

use std::collections::BTreeMap;

use crate::combinat::{binomial, subset_index, subsets, wedge_sign};

type Exponent = [u8; 3];

/// Polynomial in up to three variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= 3);
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c != 0.0 {
            p.terms.insert([0; 3], c);
        }
        p
    }

    pub fn monomial(nvars: usize, alpha: &[usize], c: f64) -> Self {
        let mut e = [0u8; 3];
        for (slot, &a) in e.iter_mut().zip(alpha) {
            *slot = a as u8;
        }
        let mut p = Self::zero(nvars);
        p.terms.insert(e, c);
        p
    }

    /// Affine polynomial `c0 + sum_i c[i] x_i`.
    pub fn affine(nvars: usize, c0: f64, c: &[f64]) -> Self {
        let mut p = Self::constant(nvars, c0);
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                let mut e = [0u8; 3];
                e[i] = 1;
                p.terms.insert(e, ci);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(e, _)| e.iter().map(|&x| x as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                let mut v = c;
                for i in 0..self.nvars {
                    v *= x[i].powi(e[i] as i32);
                }
                v
            })
            .sum()
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        for (e, &c) in &other.terms {
            *self.terms.entry(*e).or_insert(0.0) += s * c;
        }
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(e, &c)| (*e, c * s)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out
    }

    /// Nonzero terms as (exponent, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (&[u8; 3], f64)> {
        self.terms.iter().filter(|(_, &c)| c != 0.0).map(|(e, &c)| (e, c))
    }

    pub fn deriv(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[var] > 0 {
                let mut e2 = *e;
                e2[var] -= 1;
                *out.terms.entry(e2).or_insert(0.0) += c * e[var] as f64;
            }
        }
        out
    }
}

/// A k-form with polynomial coefficients on `dx_I`, I increasing (lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyForm {
    pub n: usize,
    pub k: usize,
    pub comps: Vec<Poly>,
}

impl PolyForm {
    pub fn zero(n: usize, k: usize) -> Self {
        Self { n, k, comps: vec![Poly::zero(n); binomial(n, k)] }
    }

    /// `p dx_I`.
    pub fn basis_term(n: usize, p: Poly, index: &[usize]) -> Self {
        let mut f = Self::zero(n, index.len());
        f.comps[subset_index(n, index)] = p;
        f
    }

    /// Constant form with the given coefficients, times a scalar polynomial.
    pub fn from_constant(n: usize, k: usize, coeffs: &[f64], scalar: &Poly) -> Self {
        Self { n, k, comps: coeffs.iter().map(|&c| scalar.scaled(c)).collect() }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.comps) {
            *o = p.eval(x);
        }
    }

    pub fn add_scaled(&mut self, other: &PolyForm, s: f64) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.add_scaled(b, s);
        }
    }

    /// Every component multiplied by the scalar polynomial `p`.
    pub fn times(&self, p: &Poly) -> PolyForm {
        PolyForm { n: self.n, k: self.k, comps: self.comps.iter().map(|c| c.mul(p)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    pub fn degree(&self) -> usize {
        self.comps.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Exterior derivative: `(dω)_J = Σ_p (-1)^p ∂_{J_p} ω_{J∖J_p}`.
    pub fn d(&self) -> PolyForm {
        let n = self.n;
        let mut out = PolyForm::zero(n, self.k + 1);
        if self.k + 1 > n {
            return out;
        }
        for (ji, jset) in subsets(n, self.k + 1).iter().enumerate() {
            for p in 0..jset.len() {
                let rest: Vec<usize> = jset.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v).collect();
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                let dp = self.comps[subset_index(n, &rest)].deriv(jset[p]);
                out.comps[ji].add_scaled(&dp, sign);
            }
        }
        out
    }
}

/// Coefficients of the wedge product of constant 1-forms `a_0 ∧ ... ∧ a_{k-1}`.
pub fn wedge_constant(n: usize, ones: &[Vec<f64>]) -> Vec<f64> {
    let k = ones.len();
    subsets(n, k)
        .iter()
        .map(|cols| {
            let m = nalgebra::DMatrix::from_fn(k, k, |i, j| ones[i][cols[j]]);
            if k == 0 {
                1.0
            } else {
                m.determinant()
            }
        })
        .collect()
}

/// Pointwise wedge of coefficient vectors: a (k-form) ∧ b (l-form).
pub fn wedge_values(n: usize, k: usize, a: &[f64], l: usize, b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let ks = subsets(n, k);
    let ls = subsets(n, l);
    for (ia, sa) in ks.iter().enumerate() {
        if a[ia] == 0.0 {
            continue;
        }
        for (ib, sb) in ls.iter().enumerate() {
            if let Some((sign, merged)) = wedge_sign(sa, sb) {
                out[subset_index(n, &merged)] += sign * a[ia] * b[ib];
            }
        }
    }
}
