use std::sync::Arc;

use goalfem::forms::{grad, inner, pow};
use goalfem::mesh::square_markers::LEFT;
use goalfem::{
    assemble_matrix, assemble_vector, extrapolate, localize, mark_dorfler, Coefficient, Expr, FEFunction, Form,
    FunctionSpace, Mesh,
};
use proptest::prelude::*;

fn refined(seed: u64, picks: &[usize]) -> Mesh {
    let mut mesh = Mesh::perturbed_unit_square(3, 0.2, seed).unwrap();
    for &p in picks {
        let marked: Vec<usize> = (0..mesh.num_cells()).filter(|c| (c + p) % 4 == 0).collect();
        mesh = mesh.mark_and_refine(&marked).unwrap();
    }
    mesh
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn refinement_stays_conforming(seed in 0u64..1000, picks in prop::collection::vec(0usize..4, 1..4)) {
        let mesh = refined(seed, &picks);
        mesh.audit_conformity().unwrap();
        prop_assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        prop_assert!(mesh.min_angle() > 0.0);
    }

    #[test]
    fn adjoint_is_transpose(seed in 0u64..1000, b in prop::array::uniform2(-2.0f64..2.0), p in 1usize..=3) {
        let mesh = Arc::new(refined(seed, &[1]));
        let v = FunctionSpace::new(mesh, p).unwrap();
        let (t, s) = (Expr::trial(), Expr::test());
        let a = Form::dx(inner(&grad(&t), &grad(&s)) + inner(&Expr::vector(b), &grad(&t)) * s.clone() + t * s).unwrap();
        let m = assemble_matrix(&a, &v, &v).unwrap();
        let ma = assemble_matrix(&a.adjoint().unwrap(), &v, &v).unwrap();
        prop_assert!(ma.max_abs_diff(&m.transpose()) <= 1e-13 * m.max_abs().max(1.0));
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in 0u64..1000, a in -1.0f64..1.0, c in -1.0f64..1.0) {
        let mesh = Arc::new(refined(seed, &[]));
        let v = FunctionSpace::new(mesh, 1).unwrap();
        let u = Coefficient::new("u");
        let f = Form::dx(inner(&((1.0 + pow(&u.expr(), 2)) * grad(&u.expr())), &grad(&Expr::test())) - Expr::test()).unwrap();
        let uh = Arc::new(FEFunction::from_fn(&v, |x| a * x[0] + c * x[1] * x[1]));
        let dir: Vec<f64> = v.dof_coords().iter().map(|x| (3.0 * x[0] + x[1]).sin()).collect();
        let j = assemble_matrix(&f.derivative(&u, &uh).unwrap(), &v, &v).unwrap();
        let jd = j.mul_vec(&dir);
        let eps = 1e-6;
        let shifted = |s: f64| {
            let w: Vec<f64> = uh.coeffs().iter().zip(&dir).map(|(x, d)| x + s * d).collect();
            let w = Arc::new(FEFunction::new(&v, w).unwrap());
            assemble_vector(&f.bind(&u, &w), &v).unwrap()
        };
        let (plus, minus) = (shifted(eps), shifted(-eps));
        let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
        prop_assert!(max_diff(&jd, &fd) <= 1e-6 * max_abs(&jd).max(1.0));
    }

    #[test]
    fn reconstruction_reproduces_the_residual(
        seed in 0u64..1000,
        coeffs in prop::collection::vec(-1.0f64..1.0, 24),
        p in 1usize..=2,
    ) {
        let mesh = Arc::new(refined(seed, &[0, 2]));
        let v = FunctionSpace::new(mesh.clone(), p).unwrap();
        let w = FunctionSpace::new(mesh, p + 1).unwrap();
        let (x, y) = (Expr::x().component(0), Expr::x().component(1));
        let f = coeffs[0] + coeffs[1] * x.clone() + coeffs[2] * y.clone();
        let u = Coefficient::new("u");
        let form = Form::dx(inner(&grad(&u.expr()), &grad(&Expr::test())) - f * Expr::test()).unwrap()
            - Form::ds((coeffs[3] + coeffs[4] * y) * Expr::test(), LEFT).unwrap();
        let k = coeffs.len();
        let uh: Vec<f64> = (0..v.dim()).map(|i| coeffs[i % k] * (1.0 + i as f64).sqrt()).collect();
        let uh = Arc::new(FEFunction::new(&v, uh).unwrap());
        let r = form.residual_form(&u, &uh).unwrap();
        let direct = assemble_vector(&r, &w).unwrap();
        let local = localize(&r, &v).unwrap().assemble_against(&w).unwrap();
        prop_assert!(max_diff(&direct, &local) <= 1e-9 * max_abs(&direct));
    }

    #[test]
    fn extrapolation_reproduces_polynomials(
        seed in 0u64..1000,
        c in prop::collection::vec(-1.0f64..1.0, 10),
        p in 1usize..=2,
    ) {
        let mesh = Arc::new(refined(seed, &[3]));
        let v = FunctionSpace::new(mesh.clone(), p).unwrap();
        let w = FunctionSpace::new(mesh, p + 1).unwrap();
        let q = |x: [f64; 2]| {
            let (a, b) = (x[0], x[1]);
            let mut s = c[0] + c[1] * a + c[2] * b + c[3] * a * a + c[4] * a * b + c[5] * b * b;
            if p == 2 {
                s += c[6] * a * a * a + c[7] * a * a * b + c[8] * a * b * b + c[9] * b * b * b;
            }
            s
        };
        let e = extrapolate(&FEFunction::from_fn(&v, q), &w).unwrap();
        let exact: Vec<f64> = w.dof_coords().iter().map(|x| q(*x)).collect();
        prop_assert!(max_diff(e.coeffs(), &exact) <= 1e-9);
    }

    #[test]
    fn dorfler_marks_a_minimal_prefix(eta in prop::collection::vec(0.0f64..10.0, 1..100), alpha in 0.01f64..=1.0) {
        let marked = mark_dorfler(&eta, alpha).unwrap();
        let total: f64 = eta.iter().sum();
        let sum: f64 = marked.iter().map(|&c| eta[c]).sum();
        prop_assert!(sum >= alpha * total * (1.0 - 1e-12));
        for pair in marked.windows(2) {
            prop_assert!(eta[pair[0]] >= eta[pair[1]]);
        }
        if alpha < 1.0 {
            let without_last: f64 = marked[..marked.len() - 1].iter().map(|&c| eta[c]).sum();
            prop_assert!(without_last < alpha * total);
        }
        let unmarked_max = (0..eta.len()).filter(|c| !marked.contains(c)).map(|c| eta[c]).fold(0.0, f64::max);
        prop_assert!(marked.iter().all(|&c| eta[c] >= unmarked_max));
    }
}
