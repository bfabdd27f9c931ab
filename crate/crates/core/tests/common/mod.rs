//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use feec_core::coefex;
use feec_core::hodge::HodgePair;
use feec_core::spaces::BcMode;
use feec_core::study::trig::{Trig, TrigForm};
use feec_core::SimplicialMesh;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- dimensions

fn choose(n: usize, k: usize) -> usize {
    (0..1usize << n).filter(|s| s.count_ones() as usize == k).count()
}

/// Exponent vectors of all monomials in `n` variables of degree `<= deg`.
fn monomials(n: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|a| (0..=deg).map(move |e| [a.clone(), vec![e]].concat())).collect();
    }
    out.retain(|a| a.iter().sum::<usize>() <= deg);
    out
}

/// `dim P_r Λ^k(R^n)` by enumerating monomials times basis covectors.
pub fn full_dimension(n: usize, k: usize, r: usize) -> usize {
    monomials(n, r).len() * choose(n, k)
}

/// `dim P_r^- Λ^k(R^n)` as the rank of `P_{r-1}Λ^k + κ H_{r-1}Λ^{k+1}`,
/// with the Koszul operator applied term by term.
pub fn trimmed_dimension(n: usize, k: usize, r: usize) -> usize {
    let monos = monomials(n, r);
    let sets: Vec<u32> = (0..1u32 << n).filter(|s| s.count_ones() as usize == k).collect();
    let col = |alpha: &[usize], set: u32| {
        monos.iter().position(|m| m == alpha).unwrap() * sets.len() + sets.iter().position(|&s| s == set).unwrap()
    };
    let ncols = monos.len() * sets.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for alpha in monos.iter().filter(|a| a.iter().sum::<usize>() < r) {
        for &s in &sets {
            let mut row = vec![0.0; ncols];
            row[col(alpha, s)] = 1.0;
            rows.push(row);
        }
    }
    if k < n {
        let upper: Vec<u32> = (0..1u32 << n).filter(|s| s.count_ones() as usize == k + 1).collect();
        for beta in monos.iter().filter(|a| a.iter().sum::<usize>() + 1 == r) {
            for &j in &upper {
                // κ(x^β dx_J) = Σ_p (-1)^p x^β x_{j_p} dx_{J \ j_p}
                let mut row = vec![0.0; ncols];
                let members: Vec<usize> = (0..n).filter(|i| j & (1 << i) != 0).collect();
                for (p, &i) in members.iter().enumerate() {
                    let mut a = beta.clone();
                    a[i] += 1;
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    row[col(&a, j & !(1 << i))] += sign;
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    m.rank(1e-9)
}

/// `∫_T x^α dx = α! / (n + |α|)!` on the reference simplex.
pub fn simplex_monomial_integral(alpha: &[usize]) -> f64 {
    let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
    alpha.iter().map(|&a| fact(a)).product::<f64>() / fact(alpha.len() + alpha.iter().sum::<usize>())
}

// --------------------------------------------------------------- expressions

/// Expression tree built directly by the tests, evaluated by recursion.
#[derive(Debug, Clone)]
pub enum RefExpr {
    Num(f64),
    Var(usize),
    Pi,
    Neg(Box<RefExpr>),
    Add(Box<RefExpr>, Box<RefExpr>),
    Sub(Box<RefExpr>, Box<RefExpr>),
    Mul(Box<RefExpr>, Box<RefExpr>),
    Div(Box<RefExpr>, Box<RefExpr>),
    Sin(Box<RefExpr>),
    Cos(Box<RefExpr>),
    Exp(Box<RefExpr>),
}

impl RefExpr {
    pub fn random(rng: &mut ChaCha8Rng, depth: usize) -> RefExpr {
        let leaf = depth == 0 || rng.random_bool(0.25);
        if leaf {
            return match rng.random_range(0..4) {
                0 => RefExpr::Pi,
                1 => RefExpr::Num((rng.random_range(-40..40) as f64) / 8.0),
                _ => RefExpr::Var(rng.random_range(0..3)),
            };
        }
        let op = rng.random_range(0..8);
        let mut sub = || Box::new(RefExpr::random(rng, depth - 1));
        match op {
            0 => RefExpr::Neg(sub()),
            1 => RefExpr::Add(sub(), sub()),
            2 => RefExpr::Sub(sub(), sub()),
            3 => RefExpr::Mul(sub(), sub()),
            4 => RefExpr::Div(sub(), sub()),
            5 => RefExpr::Sin(sub()),
            6 => RefExpr::Cos(sub()),
            _ => RefExpr::Exp(sub()),
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            RefExpr::Num(v) => *v,
            RefExpr::Var(i) => p[*i],
            RefExpr::Pi => std::f64::consts::PI,
            RefExpr::Neg(a) => -a.eval(p),
            RefExpr::Add(a, b) => a.eval(p) + b.eval(p),
            RefExpr::Sub(a, b) => a.eval(p) - b.eval(p),
            RefExpr::Mul(a, b) => a.eval(p) * b.eval(p),
            RefExpr::Div(a, b) => a.eval(p) / b.eval(p),
            RefExpr::Sin(a) => a.eval(p).sin(),
            RefExpr::Cos(a) => a.eval(p).cos(),
            RefExpr::Exp(a) => a.eval(p).exp(),
        }
    }

    /// Fully parenthesized source text.
    pub fn render(&self) -> String {
        match self {
            RefExpr::Num(v) => format!("({v:?})"),
            RefExpr::Var(i) => ["x", "y", "z"][*i].to_string(),
            RefExpr::Pi => "pi".into(),
            RefExpr::Neg(a) => format!("(-{})", a.render()),
            RefExpr::Add(a, b) => format!("({} + {})", a.render(), b.render()),
            RefExpr::Sub(a, b) => format!("({} - {})", a.render(), b.render()),
            RefExpr::Mul(a, b) => format!("({} * {})", a.render(), b.render()),
            RefExpr::Div(a, b) => format!("({} / {})", a.render(), b.render()),
            RefExpr::Sin(a) => format!("sin({})", a.render()),
            RefExpr::Cos(a) => format!("cos({})", a.render()),
            RefExpr::Exp(a) => format!("exp({})", a.render()),
        }
    }
}

/// Agreement of the library evaluator with the reference interpreter:
/// `(compared, worst relative difference)` over `cases` seeded pairs.
pub fn coefex_oracle(cases: usize, seed: u64) -> (usize, f64) {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    let mut compared = 0;
    while compared < cases {
        let e = RefExpr::random(&mut rng, 5);
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = e.eval(&p);
        if !want.is_finite() || want.abs() > 1e12 {
            continue;
        }
        let got = coefex::parse(&e.render()).expect("rendered expression parses").eval(&p);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
        compared += 1;
    }
    (compared, worst)
}

// ---------------------------------------------------------- rate table fixture

pub const RATE_TABLE_FIXTURE: &str = include_str!("../fixtures/rate_table.txt");

// ------------------------------------------------------- elliptic projection

/// The 2D manufactured 1-form; it satisfies the natural boundary conditions.
pub fn square_one_form() -> TrigForm {
    let s = |a| Trig::sin(2, a);
    let c = |a| Trig::cos(2, a);
    let k = |v| Trig::constant(2, v);
    TrigForm::new(2, 1, vec![s(0) * (c(1) + k(2.0)), s(1) * (c(0).scaled(2.0) + k(1.0))])
}

/// `‖u - z_h‖` for the modified elliptic projection `z_h` of `u` on each level.
pub fn elliptic_projection_errors(pair_id: usize, r: usize, ms: &[usize], seed: u64) -> Vec<f64> {
    let u = square_one_form();
    let l0u = u.codiff().d().add(&u.d().codiff());
    ms.iter()
        .map(|&m| {
            let mesh = Arc::new(SimplicialMesh::build_box(2, m, 0.2, seed + m as u64).unwrap());
            let pair = HodgePair::canonical(&mesh, 1, pair_id, r, BcMode::Natural).unwrap();
            let z = pair.modified_elliptic_projection(&l0u.field(), None).unwrap();
            let space = pair.u_space();
            space.l2_error(&z.coeffs, &u.field(), false, space.smooth_degree()).unwrap()
        })
        .collect()
}

pub fn rate(e: &[f64], ms: &[usize]) -> f64 {
    let n = e.len();
    (e[n - 2] / e[n - 1]).ln() / (ms[n - 1] as f64 / ms[n - 2] as f64).ln()
}
