use std::sync::Arc;

use goalfem::forms::{grad, inner};
use goalfem::mesh::square_markers::{BOTTOM, LEFT, RIGHT, TOP};
use goalfem::{
    adapt, apply_dirichlet, estimate, solve_newton, AdaptOptions, BoundaryFn, Coefficient, Expr, FEFunction, Form,
    FunctionSpace, Mesh, Problem,
};

fn poisson() -> Problem {
    let u = Coefficient::new("u");
    let f = Expr::scalar_field("f", |x| 1.0 + x[0] * x[1]);
    let residual = Form::dx(inner(&grad(&u.expr()), &grad(&Expr::test())) - f * Expr::test()).unwrap();
    let goal = Form::dx(Expr::scalar_field("w", |x| x[0]) * u.expr()).unwrap();
    let zero: BoundaryFn = Arc::new(|_| 0.0);
    Problem {
        u,
        residual,
        goal,
        dirichlet: [LEFT, RIGHT, BOTTOM, TOP].into_iter().map(|m| (m, zero.clone())).collect(),
        exact_goal: None,
    }
}

#[test]
fn estimate_vanishes_on_the_discrete_space() {
    let problem = poisson();
    let mesh = Arc::new(Mesh::perturbed_unit_square(6, 0.2, 3).unwrap());
    for p in [1, 2] {
        let v = FunctionSpace::new(mesh.clone(), p).unwrap();
        let w = FunctionSpace::new(mesh.clone(), p + 1).unwrap();
        let bcs: Vec<_> = [LEFT, RIGHT, BOTTOM, TOP]
            .iter()
            .flat_map(|&m| apply_dirichlet(&v, m, |_| 0.0).unwrap())
            .collect();
        let (uh, _) =
            solve_newton(&problem.residual, &problem.u, FEFunction::zeros(&v), &bcs, &Default::default()).unwrap();
        let r = problem.residual.residual_form(&problem.u, &Arc::new(uh)).unwrap();
        // A discrete function vanishing on the boundary, embedded in W.
        let mut z = FEFunction::from_fn(&v, |x| (x[0] + 2.0 * x[1]).cos());
        for &(i, _) in &bcs {
            z.coeffs_mut()[i] = 0.0;
        }
        let z = z.interpolate(&w).unwrap();
        assert!(estimate(&r, &z).unwrap() < 1e-12, "p = {p}");
    }
}

#[test]
fn adaptive_loop_is_deterministic_and_converges() {
    let opts = AdaptOptions {
        tol: 1e-4,
        ..Default::default()
    };
    let run = || adapt(&poisson(), Mesh::unit_square(4).unwrap(), &opts, |_| Ok(())).unwrap().report;
    let (a, b) = (run(), run());
    assert!(a.converged);
    assert_eq!(serde_json::to_string(&a.iterations).unwrap(), serde_json::to_string(&b.iterations).unwrap());
    let last = a.last().unwrap();
    assert!(last.eta_h <= 1e-4);
    assert!(a.iterations.iter().all(|r| r.orthogonality <= 1e-10));
    assert!(a.iterations.windows(2).all(|w| w[1].cells > w[0].cells));
}

#[test]
fn observer_errors_abort_the_loop() {
    let opts = AdaptOptions::default();
    let err = adapt(&poisson(), Mesh::unit_square(2).unwrap(), &opts, |_| {
        Err(goalfem::Error::InvalidArgument("stop".into()))
    });
    assert!(err.is_err());
}
