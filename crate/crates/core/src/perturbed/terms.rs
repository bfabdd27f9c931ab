//! Lower-order coefficient fields: matrix-valued maps between form levels.

use std::fmt;
use std::sync::Arc;

use crate::coefex::{parse_in_dim, Program};
use crate::combinat::binomial;
use crate::error::{FeecError, Result};

type MatrixEval = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Pointwise linear map from `k_in`-forms to `k_out`-forms, as a row-major
/// `C(n, k_out) × C(n, k_in)` matrix field in the lexicographic bases.
#[derive(Clone)]
pub struct CoefficientField {
    pub n: usize,
    pub k_in: usize,
    pub k_out: usize,
    f: MatrixEval,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoefficientField({}x{} on R^{})", self.rows(), self.cols(), self.n)
    }
}

impl CoefficientField {
    pub fn new<F>(n: usize, k_in: usize, k_out: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if k_in > n || k_out > n {
            return Err(FeecError::InvalidArgument(format!("form degrees {k_in} -> {k_out} in {n} dimensions")));
        }
        Ok(Self { n, k_in, k_out, f: Arc::new(f) })
    }

    pub fn constant(n: usize, k_in: usize, k_out: usize, values: Vec<f64>) -> Result<Self> {
        let (r, c) = (binomial(n, k_out), binomial(n, k_in));
        if values.len() != r * c {
            return Err(FeecError::ShapeMismatch(format!("{} entries for a {r}x{c} coefficient", values.len())));
        }
        Self::new(n, k_in, k_out, move |_, out| out.copy_from_slice(&values))
    }

    /// `c` times the identity on k-forms.
    pub fn scalar(n: usize, k: usize, c: f64) -> Result<Self> {
        let d = binomial(n, k);
        let values = (0..d * d).map(|i| if i % (d + 1) == 0 { c } else { 0.0 }).collect();
        Self::constant(n, k, k, values)
    }

    /// Entries given as expression strings, row-major.
    pub fn from_exprs(n: usize, k_in: usize, k_out: usize, entries: &[&str]) -> Result<Self> {
        let (r, c) = (binomial(n, k_out), binomial(n, k_in));
        if entries.len() != r * c {
            return Err(FeecError::ShapeMismatch(format!("{} entries for a {r}x{c} coefficient", entries.len())));
        }
        let programs: Vec<Program> =
            entries.iter().map(|s| parse_in_dim(s, n).map(|e| Program::new(&e))).collect::<std::result::Result<_, _>>()?;
        Self::new(n, k_in, k_out, move |x, out| {
            for (o, p) in out.iter_mut().zip(&programs) {
                *o = p.eval(x);
            }
        })
    }

    pub fn rows(&self) -> usize {
        binomial(self.n, self.k_out)
    }

    pub fn cols(&self) -> usize {
        binomial(self.n, self.k_in)
    }

    /// The raw matrix evaluator, for assembly.
    pub fn as_fn(&self) -> &(dyn Fn(&[f64], &mut [f64]) + Send + Sync) {
        &*self.f
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows() * self.cols()];
        self.eval_into(x, &mut out);
        out
    }

    /// `out = A(x) v`.
    pub fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let a = self.eval(x);
        let c = self.cols();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..c).map(|j| a[i * c + j] * v[j]).sum();
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = self.f.clone();
        Self {
            n: self.n,
            k_in: self.k_in,
            k_out: self.k_out,
            f: Arc::new(move |x, out| {
                f(x, out);
                out.iter_mut().for_each(|v| *v *= s);
            }),
        }
    }

    /// Largest entry magnitude over a uniform sample grid of the unit box,
    /// or an error if any sampled entry is not finite.
    pub fn check_finite(&self, per_axis: usize) -> Result<f64> {
        let total = per_axis.pow(self.n as u32);
        let mut x = vec![0.0; self.n];
        let mut worst = 0.0f64;
        for flat in 0..total {
            let mut rem = flat;
            for xi in x.iter_mut() {
                *xi = (rem % per_axis) as f64 / (per_axis - 1).max(1) as f64;
                rem /= per_axis;
            }
            for v in self.eval(&x) {
                if !v.is_finite() {
                    return Err(FeecError::InvalidArgument(format!("coefficient is not finite at {x:?}")));
                }
                worst = worst.max(v.abs());
            }
        }
        Ok(worst)
    }
}

/// Which of the five terms are present, as bit `i - 1` for `l_i`.
pub type TermMask = u8;

pub const ALL_TERMS: TermMask = 0b1_1111;

/// The lower-order terms `l1: k→k+1`, `l2: k→k-1`, `l3: k-1→k`, `l4: k+1→k`, `l5: k→k`.
#[derive(Debug, Clone, Default)]
pub struct LowerOrderTerms {
    pub l1: Option<CoefficientField>,
    pub l2: Option<CoefficientField>,
    pub l3: Option<CoefficientField>,
    pub l4: Option<CoefficientField>,
    pub l5: Option<CoefficientField>,
}

impl LowerOrderTerms {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, i: usize) -> Option<&CoefficientField> {
        match i {
            1 => self.l1.as_ref(),
            2 => self.l2.as_ref(),
            3 => self.l3.as_ref(),
            4 => self.l4.as_ref(),
            5 => self.l5.as_ref(),
            _ => None,
        }
    }

    fn slot(&mut self, i: usize) -> &mut Option<CoefficientField> {
        match i {
            1 => &mut self.l1,
            2 => &mut self.l2,
            3 => &mut self.l3,
            4 => &mut self.l4,
            _ => &mut self.l5,
        }
    }

    pub fn set(&mut self, i: usize, field: Option<CoefficientField>) {
        assert!((1..=5).contains(&i), "lower-order terms are numbered 1..=5");
        *self.slot(i) = field;
    }

    /// Active-term flags.
    pub fn mask(&self) -> TermMask {
        (1..=5).filter(|&i| self.get(i).is_some()).fold(0, |m, i| m | 1 << (i - 1))
    }

    /// Copy keeping only the terms selected by `mask`.
    pub fn restricted(&self, mask: TermMask) -> Self {
        let mut out = Self::none();
        for i in 1..=5 {
            if mask & (1 << (i - 1)) != 0 {
                out.set(i, self.get(i).cloned());
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::none();
        for i in 1..=5 {
            out.set(i, self.get(i).map(|f| f.scaled(s)));
        }
        out
    }

    /// Expected `(k_in, k_out)` of term `i` for u of degree `k`.
    pub fn level(i: usize, k: usize) -> Option<(usize, usize)> {
        match i {
            1 => Some((k, k + 1)),
            2 => k.checked_sub(1).map(|km| (k, km)),
            3 => k.checked_sub(1).map(|km| (km, k)),
            4 => Some((k + 1, k)),
            5 => Some((k, k)),
            _ => None,
        }
    }

    /// Every present term must map between the right levels for `(n, k)`.
    pub fn check(&self, n: usize, k: usize) -> Result<()> {
        for i in 1..=5 {
            let Some(f) = self.get(i) else { continue };
            let ok = match Self::level(i, k) {
                Some((ki, ko)) => f.n == n && f.k_in == ki && f.k_out == ko && ki <= n && ko <= n,
                None => false,
            };
            if !ok {
                return Err(FeecError::ShapeMismatch(format!(
                    "l{i} maps {}-forms to {}-forms in {} dimensions; the {k}-form problem in {n} dimensions needs {:?}",
                    f.k_in,
                    f.k_out,
                    f.n,
                    Self::level(i, k)
                )));
            }
        }
        Ok(())
    }
}
