//! Benchmark fixtures shared by the targets in `benches/`.

use std::sync::Arc;

use feec_core::hodge::HodgePair;
use feec_core::perturbed::LowerOrderTerms;
use feec_core::study::builtin_problem;
use feec_core::SimplicialMesh;

/// Perturbed box mesh with the seed used throughout the benchmarks.
pub fn mesh(n: usize, m: usize) -> Arc<SimplicialMesh> {
    Arc::new(SimplicialMesh::build_box(n, m, 0.2, 1).expect("valid box mesh"))
}

/// Lowest-order pair for the fully perturbed 2D 1-form problem.
pub fn square_pair(m: usize) -> (HodgePair, LowerOrderTerms) {
    let (problem, _) = builtin_problem("square2d-1form", 0b11111).expect("built-in problem");
    let pair = HodgePair::canonical(&mesh(2, m), problem.k, 1, 1, problem.bc).expect("canonical pair");
    (pair, problem.terms)
}
