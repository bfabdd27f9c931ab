//! Mixed finite element exterior calculus on simplicial meshes of the unit
//! box, for the Hodge Laplacian with lower-order perturbation terms.

// Index loops mirror the tensor notation of the kernels; `!(a <= b)` is
// deliberate where NaN must fail the test.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod coefex;
pub mod combinat;
pub mod error;
pub mod hodge;
pub mod linalg;
pub mod mesh;
pub mod perturbed;
pub mod refelem;
pub mod spaces;
pub mod study;
pub mod verify;

pub use error::{FeecError, Result};
pub use mesh::{CellGeometry, SimplicialMesh};
pub use refelem::{Family, FormField, FormValue, ReferenceElement};
