//! Goal-oriented adaptive finite elements on triangle meshes.

mod error;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod space;
pub mod forms;
pub mod assemble;
pub mod dwr;
pub mod driver;

pub use error::{Error, Result};
pub use mesh::{CellGeometry, Facet, Lineage, Marker, Mesh, Point};
pub use space::{apply_dirichlet, FEFunction, FunctionSpace};
pub use forms::{Coefficient, Expr, Form, Measure};
pub use assemble::{
    assemble, assemble_matrix, assemble_scalar, assemble_vector, solve_linear, solve_newton, Assembled,
    LinearSolver, LinearSystem, NewtonOptions, NewtonReport, SparseMatrix,
};
pub use dwr::{estimate, extrapolate, indicators, localize, mark_dorfler, Indicators, ResidualRep};
pub use driver::{adapt, uniform_baseline, AdaptOptions, AdaptiveReport, BoundaryFn, IterationRecord, Outcome, Problem, Step};
