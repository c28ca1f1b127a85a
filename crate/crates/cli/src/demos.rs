//! Built-in demo problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use goalfem::forms::{grad, inner, pow};
use goalfem::mesh::{l_shape_markers, square_markers};
use goalfem::quadrature::gauss_legendre;
use goalfem::{BoundaryFn, Coefficient, Expr, Form, Mesh, Point, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Demo {
    PoissonSmooth,
    PoissonLshape,
    NonlinearPoisson,
}

impl Demo {
    pub const ALL: [Demo; 3] = [Demo::PoissonSmooth, Demo::PoissonLshape, Demo::NonlinearPoisson];

    pub fn name(self) -> &'static str {
        match self {
            Demo::PoissonSmooth => "poisson-smooth",
            Demo::PoissonLshape => "poisson-lshape",
            Demo::NonlinearPoisson => "nonlinear-poisson",
        }
    }

    pub fn initial_mesh(self) -> Mesh {
        match self {
            Demo::PoissonSmooth | Demo::NonlinearPoisson => Mesh::unit_square(4),
            Demo::PoissonLshape => Mesh::l_shape(2),
        }
        .expect("demo meshes are valid")
    }

    pub fn problem(self) -> Problem {
        match self {
            Demo::PoissonSmooth => poisson_smooth(),
            Demo::PoissonLshape => poisson_lshape(),
            Demo::NonlinearPoisson => nonlinear_poisson(),
        }
    }
}

impl fmt::Display for Demo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Demo {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown demo `{s}`"))
    }
}

fn zero() -> BoundaryFn {
    Arc::new(|_| 0.0)
}

/// `-Δu = f` on the unit square with `u = x(1-x)y(1-y)`, goal `∫ u dx = 1/36`.
fn poisson_smooth() -> Problem {
    let u = Coefficient::new("u");
    let (x, y) = (Expr::x().component(0), Expr::x().component(1));
    let f = 2.0 * (x.clone() * (1.0 - x) + y.clone() * (1.0 - y));
    let v = Expr::test();
    let residual = Form::dx(inner(&grad(&u.expr()), &grad(&v)) - f * v).unwrap();
    let goal = Form::dx(u.expr()).unwrap();
    use square_markers::*;
    Problem {
        u,
        residual,
        goal,
        dirichlet: [LEFT, RIGHT, BOTTOM, TOP].into_iter().map(|m| (m, zero())).collect(),
        exact_goal: Some(1.0 / 36.0),
    }
}

/// `r^{2/3} sin(2θ/3)`, with `θ ∈ [0, 2π)`.
pub fn lshape_exact(p: Point) -> f64 {
    let r = p[0].hypot(p[1]);
    let theta = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    r.powf(2.0 / 3.0) * (2.0 * theta / 3.0).sin()
}

/// `∫ u ds` of the exact solution over `x = -1`, by 64-point Gauss–Legendre.
pub fn lshape_reference_goal() -> f64 {
    let (t, w) = gauss_legendre(64);
    t.iter().zip(&w).map(|(t, w)| w * lshape_exact([-1.0, *t])).sum()
}

/// Laplace's equation on the L-shape with the corner singularity; the goal is
/// the integral of `u` over `x = -1`, where the exact flux is prescribed.
fn poisson_lshape() -> Problem {
    let u = Coefficient::new("u");
    let v = Expr::test();
    // Outward normal on x = -1 is -e_x, so g = ∂_n u = -∂_x u
    // = (2/3) r^{-1/3} sin(θ/3).
    let g = Expr::scalar_field("g", |p| {
        let r = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        2.0 / 3.0 * r.powf(-1.0 / 3.0) * (theta / 3.0).sin()
    });
    let residual =
        Form::dx(inner(&grad(&u.expr()), &grad(&v))).unwrap() - Form::ds(g * v, l_shape_markers::LEFT).unwrap();
    let goal = Form::ds(u.expr(), l_shape_markers::LEFT).unwrap();
    Problem {
        u,
        residual,
        goal,
        dirichlet: vec![(l_shape_markers::OTHER, Arc::new(lshape_exact) as BoundaryFn)],
        exact_goal: Some(lshape_reference_goal()),
    }
}

/// The exact solution of the nonlinear demo, which only depends on `x`:
/// `u + u³/3 = x - x²/2`.
pub fn nonlinear_exact(x: f64) -> f64 {
    let rhs = x - 0.5 * x * x;
    let mut u = rhs;
    for _ in 0..50 {
        let step = (u + u * u * u / 3.0 - rhs) / (1.0 + u * u);
        u -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    u
}

/// `∫_0^1 u(x) dx` for [`nonlinear_exact`].
pub fn nonlinear_reference_goal() -> f64 {
    let (t, w) = gauss_legendre(64);
    t.iter().zip(&w).map(|(t, w)| 0.5 * w * nonlinear_exact(0.5 * (t + 1.0))).sum()
}

/// `-div((1 + u²) ∇u) = 1` on the unit square, `u = 0` on `x = 0`, goal
/// `∫ u dx`.
fn nonlinear_poisson() -> Problem {
    let u = Coefficient::new("u");
    let v = Expr::test();
    let f = Expr::constant(1.0);
    let residual = Form::dx(inner(&((1.0 + pow(&u.expr(), 2)) * grad(&u.expr())), &grad(&v)) - f * v).unwrap();
    let goal = Form::dx(u.expr()).unwrap();
    Problem {
        u,
        residual,
        goal,
        dirichlet: vec![(square_markers::LEFT, zero())],
        exact_goal: Some(nonlinear_reference_goal()),
    }
}
