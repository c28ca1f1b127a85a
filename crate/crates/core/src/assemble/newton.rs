//! Newton's method for semilinear forms `F(u; v) = 0`.

use std::sync::Arc;

use super::assembly::{assemble_matrix, assemble_vector};
use super::solve::{norm, solve_cg, solve_linear, LinearSystem};
use crate::error::{Error, Result};
use crate::forms::{Coefficient, Form};
use crate::space::FEFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolver {
    /// Sparse LU.
    Direct,
    /// Jacobi-preconditioned CG; symmetric positive definite systems only.
    Cg,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol_rel: f64,
    pub max_iter: usize,
    pub solver: LinearSolver,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-10,
            max_iter: 25,
            solver: LinearSolver::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// `‖F(u_k; φ_i)‖₂` over unconstrained dofs, starting with the initial
    /// guess.
    pub residuals: Vec<f64>,
    /// Residual norm of the zero function with boundary values applied; the
    /// tolerance is relative to it.
    pub reference: f64,
}

pub(crate) fn solve_with(system: &LinearSystem, name: &str, solver: LinearSolver) -> Result<Vec<f64>> {
    match solver {
        LinearSolver::Direct => solve_linear(system, name),
        LinearSolver::Cg => solve_cg(system, name, 1e-12, 10 * system.rhs.len().max(100)),
    }
}

fn with_values(mut f: FEFunction, bcs: &[(usize, f64)]) -> FEFunction {
    for &(d, g) in bcs {
        f.coeffs_mut()[d] = g;
    }
    f
}

/// Residual vector `F(u; φ_i)` with constrained entries zeroed.
fn residual_vector(form: &Form, u: &Coefficient, at: &Arc<FEFunction>, bcs: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut r = assemble_vector(&form.bind(u, at), at.space())?;
    for &(d, _) in bcs {
        r[d] = 0.0;
    }
    Ok(r)
}

/// Solves `F(u; v) = 0` for all test functions vanishing on the constrained
/// dofs, with `u = g` there. Full Newton steps; the iteration stops when the
/// residual drops below `tol_rel` times that of the zero initial guess.
pub fn solve_newton(
    form: &Form,
    u: &Coefficient,
    initial: FEFunction,
    bcs: &[(usize, f64)],
    opts: &NewtonOptions,
) -> Result<(FEFunction, NewtonReport)> {
    if form.arity() != 1 {
        return Err(Error::InvalidArgument("Newton needs a form of arity 1".into()));
    }
    let space = initial.space().clone();
    let cold = Arc::new(with_values(FEFunction::zeros(&space), bcs));
    let reference = norm(&residual_vector(form, u, &cold, bcs)?);
    let mut current = Arc::new(with_values(initial, bcs));
    let mut history = vec![norm(&residual_vector(form, u, &current, bcs)?)];
    let homogeneous: Vec<(usize, f64)> = bcs.iter().map(|&(d, _)| (d, 0.0)).collect();

    let mut k = 0;
    while history[k] > opts.tol_rel * reference {
        if k == opts.max_iter {
            return Err(Error::NewtonDiverged { history });
        }
        let jac = assemble_matrix(&form.derivative(u, &current)?, &space, &space)?;
        let rhs = assemble_vector(&form.residual_form(u, &current)?, &space)?;
        let mut system = LinearSystem::new(jac, rhs)?;
        system.constrain(&homogeneous)?;
        let delta = solve_with(&system, "primal", opts.solver)?;
        let mut next = (*current).clone();
        next.coeffs_mut().iter_mut().zip(&delta).for_each(|(c, d)| *c += d);
        current = Arc::new(next);
        history.push(norm(&residual_vector(form, u, &current, bcs)?));
        k += 1;
        if !history[k].is_finite() {
            return Err(Error::NewtonDiverged { history });
        }
    }
    let report = NewtonReport {
        iterations: k,
        residuals: history,
        reference,
    };
    Ok((Arc::unwrap_or_clone(current), report))
}
