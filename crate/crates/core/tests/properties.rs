use std::sync::Arc;

use feec_core::coefex;
use feec_core::perturbed::ALL_TERMS;
use feec_core::refelem::Family;
use feec_core::spaces::{build_space, derivative_matrix, interpolate, BcMode};
use feec_core::study::{observed_rate, predict_rates};
use feec_core::{FormField, SimplicialMesh};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_meshes_tile_the_unit_box(n in 2usize..=3, m in 1usize..=3, perturb in 0.0f64..0.25, seed in any::<u64>()) {
        let mesh = SimplicialMesh::build_box(n, m, perturb, seed).unwrap();
        let volume: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_geometry(c).unwrap().measure).sum();
        prop_assert!((volume - 1.0).abs() < 1e-12);
        for (f, &count) in mesh.facet_cell_counts().iter().enumerate() {
            prop_assert_eq!(count, if mesh.is_boundary(n - 1, f) { 1 } else { 2 });
        }
        let again = SimplicialMesh::build_box(n, m, perturb, seed).unwrap();
        prop_assert_eq!(mesh.coords(), again.coords());
    }

    #[test]
    fn d_squared_vanishes_on_random_cochains(r in 1usize..=3, seed in any::<u64>(), full in any::<bool>()) {
        let mesh = Arc::new(SimplicialMesh::build_box(3, 1, 0.2, seed).unwrap());
        let family = if full { Family::Full } else { Family::Trimmed };
        let v0 = build_space(&mesh, 0, r, family, BcMode::Natural).unwrap();
        let v1 = build_space(&mesh, 1, r, Family::Trimmed, BcMode::Natural).unwrap();
        let v2 = build_space(&mesh, 2, r, Family::Trimmed, BcMode::Natural).unwrap();
        let d0 = derivative_matrix(&v0, &v1).unwrap();
        let d1 = derivative_matrix(&v1, &v2).unwrap();
        let x: Vec<f64> = (0..v0.dim()).map(|i| ((i as u64 ^ seed) % 17) as f64 - 8.0).collect();
        let ddx = d1.matvec(&d0.matvec(&x));
        let scale = x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        prop_assert!(ddx.iter().all(|v| v.abs() <= 1e-11 * scale));
    }

    #[test]
    fn interpolation_ignores_vertex_labels(seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let mesh = SimplicialMesh::build_box(2, 2, 0.2, 9).unwrap();
        let nv = mesh.num_vertices();
        let mut perm: Vec<usize> = (0..nv).collect();
        let mut s = seed;
        for i in (1..nv).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let other = Arc::new(mesh.relabeled(&perm).unwrap());
        let mesh = Arc::new(mesh);
        let w = FormField::new(2, 1, move |x, o| {
            o[0] = (a * x[1]).sin() + x[0] * x[1];
            o[1] = (b * x[0]).cos() - x[1];
        });
        let pts = [vec![0.3, 0.7], vec![0.61, 0.12], vec![0.9, 0.45]];
        for (r, family) in [(1, Family::Trimmed), (2, Family::Full), (2, Family::Trimmed)] {
            let sa = build_space(&mesh, 1, r, family, BcMode::Natural).unwrap();
            let sb = build_space(&other, 1, r, family, BcMode::Natural).unwrap();
            let fa = sa.evaluate(&interpolate(&sa, &w).unwrap().coeffs, &pts).unwrap();
            let fb = sb.evaluate(&interpolate(&sb, &w).unwrap().coeffs, &pts).unwrap();
            for (x, y) in fa.iter().zip(&fb) {
                for (p, q) in x.coeffs.iter().zip(&y.coeffs) {
                    prop_assert!((p - q).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn extra_terms_never_raise_predicted_rates(pair in 1usize..=4, r in 1usize..=3, mask in 0u8..32, extra in 0u8..32) {
        let base = predict_rates(pair, r, mask).unwrap();
        let more = predict_rates(pair, r, (mask | extra) & ALL_TERMS).unwrap();
        for c in 0..4 {
            prop_assert!(more[c] <= base[c]);
            prop_assert!(base[c] <= more[c] + 1);
        }
    }

    #[test]
    fn observed_rate_of_power_law(p in 0.5f64..5.0, c in 1e-3f64..1e3, h in 0.01f64..0.5) {
        let rate = observed_rate(c * h.powf(p), c * (h / 2.0).powf(p), h, h / 2.0);
        prop_assert!((rate - p).abs() < 1e-9);
    }

    #[test]
    fn affine_expressions_evaluate_exactly(a in -8i32..8, b in -8i32..8, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let e = coefex::parse(&format!("{a} * x - ({b}) * y + 1")).unwrap();
        prop_assert_eq!(e.eval(&[x, y]), a as f64 * x - b as f64 * y + 1.0);
        prop_assert_eq!(coefex::parse(&e.to_string()).unwrap(), e);
    }
}
