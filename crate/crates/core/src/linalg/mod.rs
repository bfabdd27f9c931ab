//! Sparse containers, direct solves and extreme eigenpairs.

pub mod eig;
pub mod lu;
pub mod sparse;

pub use eig::{shift_invert_eig, smallest_generalized_eig, EigenPairs, ShiftInvert};
pub use lu::{factor_solve, near_null_vector, LuFactor, SolveReport};
pub use sparse::{axpy, dot, m_norm, norm, BlockSystem, SparseMatrix};
