mod common;

use std::sync::Arc;

use feec_core::coefex;
use feec_core::hodge::HodgePair;
use feec_core::linalg::factor_solve;
use feec_core::refelem::element::supported_elements;
use feec_core::refelem::{quadrature, reference_element, space_dimension, Family, MAX_QUADRATURE_DEGREE};
use feec_core::spaces::BcMode;
use feec_core::study::{predict_rates, rate_table};
use feec_core::SimplicialMesh;
use nalgebra::DVector;
use rand::Rng;

#[test]
fn space_dimensions_match_enumeration() {
    for n in 1..=3 {
        for (k, r, family) in supported_elements(n) {
            let want = match family {
                Family::Full => common::full_dimension(n, k, r),
                Family::Trimmed => common::trimmed_dimension(n, k, r),
            };
            assert_eq!(space_dimension(n, k, r, family).unwrap(), want, "{family}{r}L{k} in {n}D");
            assert_eq!(reference_element(n, k, r, family).unwrap().dim(), want, "{family}{r}L{k} in {n}D");
        }
    }
}

#[test]
fn known_dimensions() {
    // Lagrange, Nedelec first and second kind, Raviart-Thomas.
    assert_eq!(common::full_dimension(2, 0, 2), 6);
    assert_eq!(common::trimmed_dimension(2, 1, 1), 3);
    assert_eq!(common::full_dimension(2, 1, 1), 6);
    assert_eq!(common::trimmed_dimension(3, 1, 1), 6);
    assert_eq!(common::trimmed_dimension(3, 2, 1), 4);
    assert_eq!(common::trimmed_dimension(3, 1, 2), 20);
}

#[test]
fn quadrature_integrates_monomials() {
    for n in 1..=3 {
        for degree in 0..=MAX_QUADRATURE_DEGREE {
            let rule = quadrature(n, degree).unwrap();
            for alpha in feec_core::combinat::multi_indices_le(n, degree) {
                let got: f64 = (0..rule.len())
                    .map(|q| rule.weights[q] * alpha.iter().enumerate().map(|(i, &p)| rule.point(q)[i].powi(p as i32)).product::<f64>())
                    .sum();
                let want = common::simplex_monomial_integral(&alpha);
                assert!((got - want).abs() <= 1e-13 * want, "{n}D degree {degree} {alpha:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn expression_evaluator_matches_reference_interpreter() {
    let (cases, worst) = common::coefex_oracle(1000, 2024);
    assert_eq!(cases, 1000);
    assert!(worst <= 1e-15, "worst {worst:e}");
}

#[test]
fn expression_display_round_trips() {
    let mut rng = common::rng(77);
    for _ in 0..50 {
        let source = common::RefExpr::random(&mut rng, 4).render();
        let ast = coefex::parse(&source).unwrap();
        let printed = ast.to_string();
        assert_eq!(coefex::parse(&printed).unwrap(), ast, "{source} -> {printed}");
    }
}

#[test]
fn rate_table_matches_fixture() {
    let table = rate_table();
    for (got, want) in table.lines().zip(common::RATE_TABLE_FIXTURE.lines()) {
        assert_eq!(got, want);
    }
    assert_eq!(table, common::RATE_TABLE_FIXTURE);
}

#[test]
fn rate_examples() {
    assert_eq!(predict_rates(1, 1, 0).unwrap(), [3, 2, 2, 1]);
    assert_eq!(predict_rates(1, 1, 0b01000).unwrap(), [2, 1, 2, 1]);
    assert_eq!(predict_rates(2, 1, 0b11111).unwrap(), [2, 1, 2, 1]);
    assert_eq!(predict_rates(3, 2, 0b00010).unwrap(), [2, 2, 2, 2]);
    assert_eq!(predict_rates(3, 2, 0b00101).unwrap(), [3, 2, 2, 2]);
}

#[test]
fn sparse_saddle_solve_matches_dense() {
    let mut rng = common::rng(5);
    for (n, m, pair_id) in [(2, 2, 1), (2, 2, 4), (2, 3, 2), (3, 1, 3)] {
        let mesh = Arc::new(SimplicialMesh::build_box(n, m, 0.2, 3).unwrap());
        let pair = HodgePair::canonical(&mesh, 1, pair_id, 1, BcMode::Natural).unwrap();
        let a = pair.mixed_matrix().unwrap();
        // The plain mixed matrix is singular only with harmonic forms; none here.
        let size = a.nrows();
        assert!(size <= 200, "{size}");
        let b: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = factor_solve(&a, &b).unwrap().x;
        let want = a.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        let scale = want.amax();
        let err = got.iter().zip(want.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9 * scale, "{n}D m={m} pair {pair_id}: {err:e}");
    }
}
