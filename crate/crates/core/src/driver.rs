//! The adaptive loop and its uniform-refinement counterpart.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::assemble::{
    assemble_matrix, assemble_scalar, assemble_vector, solve_newton, solve_with, LinearSystem, NewtonOptions,
};
use crate::dwr::{estimate, extrapolate, indicators, localize, mark_dorfler, Indicators};
use crate::error::{Error, Result};
use crate::forms::{Coefficient, Form};
use crate::mesh::{Marker, Mesh, Point};
use crate::space::{apply_dirichlet, FEFunction, FunctionSpace};

pub type BoundaryFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// A variational problem `F(u; v) = 0` with goal functional `M(u)`.
#[derive(Clone)]
pub struct Problem {
    /// The unknown, as it appears in `residual` and `goal`.
    pub u: Coefficient,
    /// `F(u; v)`, linear in the test function.
    pub residual: Form,
    /// `M(u)`.
    pub goal: Form,
    /// Dirichlet data `u = g` per boundary marker.
    pub dirichlet: Vec<(Marker, BoundaryFn)>,
    /// `M(u)` for the exact solution, when known.
    pub exact_goal: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptOptions {
    pub degree: usize,
    pub tol: f64,
    pub alpha: f64,
    pub max_iter: usize,
    /// Refine every cell instead of the Dörfler-marked ones.
    pub uniform: bool,
    pub newton: NewtonOptions,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            tol: 1e-3,
            alpha: 0.5,
            max_iter: 20,
            uniform: false,
            newton: NewtonOptions::default(),
        }
    }
}

/// One row of the adaptive report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cells: usize,
    pub dofs: usize,
    pub goal: f64,
    pub eta_h: f64,
    pub sum_eta_t: f64,
    /// `|M(u) - M(u_h)|`.
    pub exact_error: Option<f64>,
    pub eff_h: Option<f64>,
    pub eff_sum: Option<f64>,
    pub marked: usize,
    pub newton_iterations: usize,
    /// Newton residual norms relative to the zero-initial-guess residual.
    pub newton_residuals: Vec<f64>,
    /// `max_i |r(φ_i)| / max_i |F(u_0; φ_i)|` over unconstrained dofs, with
    /// `u_0` the zero function carrying the boundary values.
    pub orthogonality: f64,
    /// For linear problems, the largest entry of `A* - Aᵀ` relative to the
    /// largest entry of `A`.
    pub dual_transpose_error: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AdaptiveReport {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.11e}")).unwrap_or_default()
}

impl AdaptiveReport {
    pub const CSV_HEADER: &'static str = "iter,cells,dofs,goal,eta_h,sum_eta_T,exact_error,eff_h,eff_sum,marked";

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.iterations {
            s.push_str(&format!(
                "{},{},{},{:.11e},{:.11e},{:.11e},{},{},{},{}\n",
                r.iter,
                r.cells,
                r.dofs,
                r.goal,
                r.eta_h,
                r.sum_eta_t,
                opt(r.exact_error),
                opt(r.eff_h),
                opt(r.eff_sum),
                r.marked
            ));
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }
}

/// Everything computed on one mesh, handed to observers.
pub struct Step<'a> {
    pub record: &'a IterationRecord,
    pub mesh: &'a Arc<Mesh>,
    pub solution: &'a FEFunction,
    pub dual: &'a FEFunction,
    pub extrapolated_dual: &'a FEFunction,
    pub indicators: &'a Indicators,
    /// Cells marked for refinement, empty on the last iteration.
    pub marked: &'a [usize],
}

pub struct Outcome {
    pub solution: FEFunction,
    pub report: AdaptiveReport,
}

struct Solved {
    record: IterationRecord,
    solution: FEFunction,
    dual: FEFunction,
    ez: FEFunction,
    indicators: Indicators,
}

fn dirichlet_values(problem: &Problem, space: &FunctionSpace) -> Result<Vec<(usize, f64)>> {
    let mut bcs = Vec::new();
    for (m, g) in &problem.dirichlet {
        bcs.extend(apply_dirichlet(space, *m, |x| g(x))?);
    }
    Ok(bcs)
}

fn max_free(v: &[f64], bcs: &[(usize, f64)]) -> f64 {
    let mut v = v.to_vec();
    for &(d, _) in bcs {
        v[d] = 0.0;
    }
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Primal solve, dual solve, extrapolation, estimate and indicators on one
/// mesh.
fn solve_on(problem: &Problem, mesh: &Arc<Mesh>, opts: &AdaptOptions, warm: Option<&FEFunction>, iter: usize) -> Result<Solved> {
    let u = &problem.u;
    let v = FunctionSpace::new(mesh.clone(), opts.degree)?;
    let w = FunctionSpace::new(mesh.clone(), opts.degree + 1)?;
    let bcs = dirichlet_values(problem, &v)?;

    let initial = match warm {
        Some(prev) => prev.prolongate(&v)?,
        None => FEFunction::zeros(&v),
    };
    let (uh, newton) = solve_newton(&problem.residual, u, initial, &bcs, &opts.newton)?;
    let uh_arc = Arc::new(uh);

    let r = problem.residual.residual_form(u, &uh_arc)?;
    let mut cold = FEFunction::zeros(&v);
    for &(d, g) in &bcs {
        cold.coeffs_mut()[d] = g;
    }
    let load = max_free(&assemble_vector(&problem.residual.bind(u, &Arc::new(cold)), &v)?, &bcs);
    let res = max_free(&assemble_vector(&r, &v)?, &bcs);
    let orthogonality = if load > 0.0 { res / load } else { res };

    let jac = problem.residual.derivative(u, &uh_arc)?;
    let dual_form = jac.adjoint()?;
    let dual_matrix = assemble_matrix(&dual_form, &v, &v)?;
    let dual_transpose_error = if jac.depends_on(u) {
        None
    } else {
        let a = assemble_matrix(&jac, &v, &v)?;
        Some(dual_matrix.max_abs_diff(&a.transpose()) / a.max_abs().max(f64::MIN_POSITIVE))
    };
    let dual_rhs = assemble_vector(&problem.goal.derivative(u, &uh_arc)?, &v)?;
    let mut system = LinearSystem::new(dual_matrix, dual_rhs)?;
    let homogeneous: Vec<(usize, f64)> = bcs.iter().map(|&(d, _)| (d, 0.0)).collect();
    system.constrain(&homogeneous)?;
    let z = FEFunction::new(&v, solve_with(&system, "dual", opts.newton.solver)?)?;

    let mut ez = extrapolate(&z, &w)?;
    for (m, _) in &problem.dirichlet {
        for &d in w.boundary_dofs(*m) {
            ez.coeffs_mut()[d] = 0.0;
        }
    }
    let eta_h = estimate(&r, &ez)?;
    let rep = localize(&r, &v)?;
    let ind = indicators(&rep, &ez, &ez.interpolate(&v)?)?;

    let goal = assemble_scalar(&problem.goal.bind(u, &uh_arc), mesh)?;
    let exact_error = problem.exact_goal.map(|g| (g - goal).abs());
    let sum_eta_t = ind.sum();
    let eff = |x: f64| exact_error.filter(|&e| e > 0.0).map(|e| x / e);
    let reference = newton.reference;
    let record = IterationRecord {
        iter,
        cells: mesh.num_cells(),
        dofs: v.dim(),
        goal,
        eta_h,
        sum_eta_t,
        exact_error,
        eff_h: eff(eta_h),
        eff_sum: eff(sum_eta_t),
        marked: 0,
        newton_iterations: newton.iterations,
        newton_residuals: newton
            .residuals
            .iter()
            .map(|r| if reference > 0.0 { r / reference } else { *r })
            .collect(),
        orthogonality,
        dual_transpose_error,
    };
    Ok(Solved {
        record,
        solution: Arc::unwrap_or_clone(uh_arc),
        dual: z,
        ez,
        indicators: ind,
    })
}

fn check_options(opts: &AdaptOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    if !(opts.alpha > 0.0 && opts.alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {} not in (0, 1]", opts.alpha)));
    }
    Ok(())
}

fn in_iteration<T>(iteration: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Iteration {
        iteration,
        source: Box::new(e),
    })
}

/// Goal-oriented adaptive solution: on each mesh solve the primal and dual
/// problems, estimate the goal error and stop once `η_h <= tol`; otherwise
/// refine the Dörfler-marked cells. Newton starts from the previous solution
/// transferred to the new mesh. Reaching `max_iter` meshes without meeting
/// the tolerance is reported through `converged = false`. With
/// `opts.uniform` every cell is refined instead.
pub fn adapt(
    problem: &Problem,
    mesh0: Mesh,
    opts: &AdaptOptions,
    mut observer: impl FnMut(&Step) -> Result<()>,
) -> Result<Outcome> {
    check_options(opts)?;
    let mut mesh = Arc::new(mesh0);
    let mut report = AdaptiveReport::default();
    let mut prev: Option<FEFunction> = None;
    for iter in 0..opts.max_iter.max(1) {
        let mut s = in_iteration(iter, solve_on(problem, &mesh, opts, prev.as_ref(), iter))?;
        let done = s.record.eta_h <= opts.tol;
        let last = iter + 1 == opts.max_iter.max(1);
        let marked = if done || last {
            Vec::new()
        } else if opts.uniform {
            (0..mesh.num_cells()).collect()
        } else {
            let m = in_iteration(iter, mark_dorfler(&s.indicators.eta, opts.alpha))?;
            // All indicators vanish but the estimate does not: refine everywhere.
            if m.is_empty() {
                (0..mesh.num_cells()).collect()
            } else {
                m
            }
        };
        s.record.marked = marked.len();
        observer(&Step {
            record: &s.record,
            mesh: &mesh,
            solution: &s.solution,
            dual: &s.dual,
            extrapolated_dual: &s.ez,
            indicators: &s.indicators,
            marked: &marked,
        })?;
        report.iterations.push(s.record);
        if done || last {
            report.converged = done;
            return Ok(Outcome {
                solution: s.solution,
                report,
            });
        }
        let next = if opts.uniform {
            mesh.refine_uniform()
        } else {
            mesh.mark_and_refine(&marked)
        };
        mesh = Arc::new(in_iteration(iter, next)?);
        prev = Some(s.solution);
    }
    unreachable!("the loop returns on its last iteration")
}

/// The same pipeline on `levels` uniformly refined meshes, for comparison.
/// `converged` reports whether the last level met the tolerance.
pub fn uniform_baseline(
    problem: &Problem,
    mesh0: Mesh,
    opts: &AdaptOptions,
    levels: usize,
    mut observer: impl FnMut(&Step) -> Result<()>,
) -> Result<AdaptiveReport> {
    check_options(opts)?;
    if levels == 0 {
        return Err(Error::InvalidArgument("uniform baseline needs at least one level".into()));
    }
    let mut mesh = Arc::new(mesh0);
    let mut report = AdaptiveReport::default();
    let mut prev: Option<FEFunction> = None;
    for iter in 0..levels {
        let mut s = in_iteration(iter, solve_on(problem, &mesh, opts, prev.as_ref(), iter))?;
        let last = iter + 1 == levels;
        let marked: Vec<usize> = if last { Vec::new() } else { (0..mesh.num_cells()).collect() };
        s.record.marked = marked.len();
        observer(&Step {
            record: &s.record,
            mesh: &mesh,
            solution: &s.solution,
            dual: &s.dual,
            extrapolated_dual: &s.ez,
            indicators: &s.indicators,
            marked: &marked,
        })?;
        report.converged = s.record.eta_h <= opts.tol;
        report.iterations.push(s.record);
        if !last {
            mesh = Arc::new(in_iteration(iter, mesh.refine_uniform())?);
            prev = Some(s.solution);
        }
    }
    Ok(report)
}
