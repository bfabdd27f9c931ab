//! Sums of products of `sin(π x_i)` and `cos(π x_i)` powers, closed under
//! products and partial derivatives. Exact derivatives for manufactured
//! solutions come from here.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::combinat::{binomial, subset_index, subsets};
use crate::perturbed::CoefficientField;
use crate::refelem::FormField;
use crate::Result;

/// `[sin power, cos power]` for each of up to three axes.
type Powers = [u8; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct Trig {
    n: usize,
    terms: BTreeMap<Powers, f64>,
}

impl Trig {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut t = Self::zero(n);
        if c != 0.0 {
            t.terms.insert([0; 6], c);
        }
        t
    }

    /// `sin(π x_axis)`.
    pub fn sin(n: usize, axis: usize) -> Self {
        let mut p = [0; 6];
        p[2 * axis] = 1;
        Self { n, terms: BTreeMap::from([(p, 1.0)]) }
    }

    /// `cos(π x_axis)`.
    pub fn cos(n: usize, axis: usize) -> Self {
        let mut p = [0; 6];
        p[2 * axis + 1] = 1;
        Self { n, terms: BTreeMap::from([(p, 1.0)]) }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut sc = [(0.0, 0.0); 3];
        for (i, s) in sc.iter_mut().enumerate().take(self.n) {
            *s = ((PI * x[i]).sin(), (PI * x[i]).cos());
        }
        self.terms
            .iter()
            .map(|(p, &c)| {
                let mut v = c;
                for (i, &(s, co)) in sc.iter().enumerate().take(self.n) {
                    v *= s.powi(p[2 * i] as i32) * co.powi(p[2 * i + 1] as i32);
                }
                v
            })
            .sum()
    }

    pub fn add(&self, other: &Trig) -> Trig {
        self.add_scaled(other, 1.0)
    }

    pub fn add_scaled(&self, other: &Trig, s: f64) -> Trig {
        let mut out = self.clone();
        for (p, &c) in &other.terms {
            *out.terms.entry(*p).or_insert(0.0) += s * c;
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn scaled(&self, s: f64) -> Trig {
        self.add_scaled(self, s - 1.0)
    }

    pub fn mul(&self, other: &Trig) -> Trig {
        let mut out = Trig::zero(self.n);
        for (pa, &ca) in &self.terms {
            for (pb, &cb) in &other.terms {
                let mut p = [0; 6];
                for i in 0..6 {
                    p[i] = pa[i] + pb[i];
                }
                *out.terms.entry(p).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    /// `∂/∂x_axis`.
    pub fn deriv(&self, axis: usize) -> Trig {
        let mut out = Trig::zero(self.n);
        for (p, &c) in &self.terms {
            let (s, co) = (p[2 * axis], p[2 * axis + 1]);
            if s > 0 {
                let mut q = *p;
                q[2 * axis] -= 1;
                q[2 * axis + 1] += 1;
                *out.terms.entry(q).or_insert(0.0) += c * PI * s as f64;
            }
            if co > 0 {
                let mut q = *p;
                q[2 * axis] += 1;
                q[2 * axis + 1] -= 1;
                *out.terms.entry(q).or_insert(0.0) -= c * PI * co as f64;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }
}

impl std::ops::Add for Trig {
    type Output = Trig;
    fn add(self, rhs: Trig) -> Trig {
        Trig::add(&self, &rhs)
    }
}

impl std::ops::Mul for Trig {
    type Output = Trig;
    fn mul(self, rhs: Trig) -> Trig {
        Trig::mul(&self, &rhs)
    }
}

/// A k-form with [`Trig`] coefficients in the lexicographic basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigForm {
    pub n: usize,
    pub k: usize,
    pub comps: Vec<Trig>,
}

impl TrigForm {
    pub fn new(n: usize, k: usize, comps: Vec<Trig>) -> Self {
        assert_eq!(comps.len(), binomial(n, k), "component count of a {k}-form in {n} dimensions");
        Self { n, k, comps }
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self::new(n, k, vec![Trig::zero(n); binomial(n, k)])
    }

    /// `(dω)_J = Σ_p (-1)^p ∂_{J_p} ω_{J∖J_p}`.
    pub fn d(&self) -> TrigForm {
        let mut out = TrigForm::zero(self.n, (self.k + 1).min(self.n));
        if self.k >= self.n {
            return out;
        }
        for (ji, j) in subsets(self.n, self.k + 1).iter().enumerate() {
            for p in 0..j.len() {
                let rest: Vec<usize> = j.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v).collect();
                let s = if p % 2 == 0 { 1.0 } else { -1.0 };
                out.comps[ji] = out.comps[ji].add_scaled(&self.comps[subset_index(self.n, &rest)].deriv(j[p]), s);
            }
        }
        out
    }

    /// Euclidean codifferential: `δ(f dx_J) = -Σ_p (-1)^p ∂_{J_p} f dx_{J∖J_p}`.
    pub fn codiff(&self) -> TrigForm {
        let mut out = TrigForm::zero(self.n, self.k.saturating_sub(1));
        if self.k == 0 {
            return out;
        }
        for (ji, j) in subsets(self.n, self.k).iter().enumerate() {
            for p in 0..j.len() {
                let rest: Vec<usize> = j.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &v)| v).collect();
                let s = if p % 2 == 0 { -1.0 } else { 1.0 };
                let ri = subset_index(self.n, &rest);
                out.comps[ri] = out.comps[ri].add_scaled(&self.comps[ji].deriv(j[p]), s);
            }
        }
        out
    }

    pub fn add(&self, other: &TrigForm) -> TrigForm {
        TrigForm::new(self.n, self.k, self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect())
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(x);
        }
    }

    pub fn field(&self) -> FormField {
        let me = Arc::new(self.clone());
        FormField::new(self.n, self.k, move |x, out| me.eval(x, out))
    }
}

/// Matrix of [`Trig`] entries mapping `k_in`-forms to `k_out`-forms.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigMatrix {
    pub n: usize,
    pub k_in: usize,
    pub k_out: usize,
    /// Row-major.
    pub entries: Vec<Trig>,
}

impl TrigMatrix {
    pub fn new(n: usize, k_in: usize, k_out: usize, entries: Vec<Trig>) -> Self {
        assert_eq!(entries.len(), binomial(n, k_in) * binomial(n, k_out));
        Self { n, k_in, k_out, entries }
    }

    pub fn constant(n: usize, k_in: usize, k_out: usize, values: &[f64]) -> Self {
        Self::new(n, k_in, k_out, values.iter().map(|&v| Trig::constant(n, v)).collect())
    }

    /// `T_out · self · T_in` for constant changes of basis on both sides.
    pub fn conjugate(&self, left: &[f64], right: &[f64]) -> TrigMatrix {
        let (r, c) = (binomial(self.n, self.k_out), binomial(self.n, self.k_in));
        let mut entries = vec![Trig::zero(self.n); r * c];
        for i in 0..r {
            for j in 0..c {
                let mut acc = Trig::zero(self.n);
                for a in 0..r {
                    for b in 0..c {
                        let w = left[i * r + a] * right[b * c + j];
                        if w != 0.0 {
                            acc = acc.add_scaled(&self.entries[a * c + b], w);
                        }
                    }
                }
                entries[i * c + j] = acc;
            }
        }
        TrigMatrix::new(self.n, self.k_in, self.k_out, entries)
    }

    pub fn apply(&self, w: &TrigForm) -> TrigForm {
        assert_eq!(w.k, self.k_in);
        let c = binomial(self.n, self.k_in);
        let comps = (0..binomial(self.n, self.k_out))
            .map(|i| (0..c).fold(Trig::zero(self.n), |acc, j| acc.add(&self.entries[i * c + j].mul(&w.comps[j]))))
            .collect();
        TrigForm::new(self.n, self.k_out, comps)
    }

    pub fn coefficient(&self) -> Result<CoefficientField> {
        let me = Arc::new(self.clone());
        CoefficientField::new(self.n, self.k_in, self.k_out, move |x, out| {
            for (o, e) in out.iter_mut().zip(&me.entries) {
                *o = e.eval(x);
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &Trig, x: &[f64], axis: usize) -> f64 {
        let h = 1e-6;
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[axis] += h;
        b[axis] -= h;
        (f.eval(&a) - f.eval(&b)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = Trig::sin(3, 0).mul(&Trig::cos(3, 2)).mul(&Trig::cos(3, 2)).add(&Trig::constant(3, 3.0).mul(&Trig::sin(3, 1)));
        let x = [0.3, 0.71, 0.45];
        for axis in 0..3 {
            assert!((f.deriv(axis).eval(&x) - fd(&f, &x, axis)).abs() < 1e-7);
        }
    }

    #[test]
    fn d_squared_and_codiff_squared_vanish() {
        let n = 3;
        let u = TrigForm::new(
            n,
            1,
            vec![Trig::sin(n, 0).mul(&Trig::cos(n, 2)), Trig::cos(n, 0).mul(&Trig::sin(n, 1)), Trig::cos(n, 1).mul(&Trig::sin(n, 2))],
        );
        let x = [0.2, 0.4, 0.9];
        let mut v = [0.0; 3];
        u.d().d().eval(&x, &mut v[..1]);
        assert!(v[0].abs() < 1e-12);
        let w = u.d();
        let mut out = [0.0; 3];
        w.codiff().codiff().eval(&x, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        // δ on 1-forms is minus the divergence.
        let mut div = [0.0];
        u.codiff().eval(&x, &mut div);
        let expect = -(u.comps[0].deriv(0).eval(&x) + u.comps[1].deriv(1).eval(&x) + u.comps[2].deriv(2).eval(&x));
        assert!((div[0] - expect).abs() < 1e-12);
    }
}
