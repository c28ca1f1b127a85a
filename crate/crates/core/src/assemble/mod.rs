//! Assembly of forms into matrices, vectors and scalars; linear and Newton
//! solvers.

mod assembly;
mod newton;
mod solve;
mod sparse;

pub use assembly::{assemble, assemble_matrix, assemble_scalar, assemble_vector, Assembled};
pub use newton::{solve_newton, LinearSolver, NewtonOptions, NewtonReport};
pub(crate) use newton::solve_with;
pub use solve::{solve_cg, solve_linear, LinearSystem, DIRECT_TOL};
pub use sparse::SparseMatrix;
