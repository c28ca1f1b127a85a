//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits with failure if any of them fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use goalfem::forms::{grad, inner};
use goalfem::mesh::square_markers::{BOTTOM, LEFT, RIGHT, TOP};
use goalfem::{
    adapt, assemble_matrix, assemble_vector, extrapolate, localize, mark_dorfler, uniform_baseline, AdaptOptions,
    AdaptiveReport, Coefficient, Expr, FEFunction, Form, FunctionSpace, Mesh,
};
use goalfem_cli::demos::{nonlinear_reference_goal, Demo};
use goalfem_cli::{run_demo, DemoArgs};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn demo_run(demo: Demo, opts: &AdaptOptions) -> Result<AdaptiveReport, String> {
    adapt(&demo.problem(), demo.initial_mesh(), opts, |_| Ok(()))
        .map(|o| o.report)
        .map_err(|e| format!("{demo}: {e}"))
}

/// Bisects a pseudo-randomly chosen third of the cells, `times` times.
fn bisect_randomly(mut mesh: Mesh, times: usize, salt: usize) -> Mesh {
    for k in 0..times {
        let marked: Vec<usize> = (0..mesh.num_cells())
            .filter(|c| (c * 2654435761 + k * 97 + salt) % 3 == 0)
            .collect();
        mesh = mesh.mark_and_refine(&marked).unwrap();
    }
    mesh
}

fn test_meshes() -> Vec<(&'static str, Mesh)> {
    vec![
        ("unit square 3x3", Mesh::unit_square(3).unwrap()),
        ("unit square 4x4, bisected 3x", bisect_randomly(Mesh::unit_square(4).unwrap(), 3, 1)),
        ("perturbed 5x5", Mesh::perturbed_unit_square(5, 0.25, 11).unwrap()),
        ("perturbed 4x4, bisected 3x", bisect_randomly(Mesh::perturbed_unit_square(4, 0.2, 5).unwrap(), 3, 2)),
        ("L-shape, bisected 3x", bisect_randomly(Mesh::l_shape(2).unwrap(), 3, 3)),
    ]
}

fn galerkin_orthogonality() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for demo in Demo::ALL {
        let rep = demo_run(demo, &AdaptOptions::default())?;
        for it in &rep.iterations {
            worst = worst.max(it.orthogonality);
            count += 1;
        }
    }
    check(
        worst <= 1e-10,
        format!("max |r(phi_i)| / |load|_inf = {worst:.2e} over {count} meshes of 3 demos (limit 1e-10)"),
    )
}

fn reconstruction() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (_, mesh) in test_meshes() {
        let mesh = Arc::new(mesh);
        for p in [1, 2] {
            let v = FunctionSpace::new(mesh.clone(), p).unwrap();
            let w = FunctionSpace::new(mesh.clone(), p + 1).unwrap();
            let (x, y) = (Expr::x().component(0), Expr::x().component(1));
            // Data of degree p, so the residual is exactly representable.
            let f = if p == 1 {
                1.0 + 2.0 * x.clone() - 3.0 * y.clone()
            } else {
                1.0 + x.clone() * y.clone() - 2.0 * x.clone() * x.clone() + y.clone()
            };
            // Neumann data of degree p on the left side, which every mesh here has.
            let g = 0.5 + y;
            let u = Coefficient::new("u");
            let vt = Expr::test();
            let form = Form::dx(inner(&grad(&u.expr()), &grad(&vt)) - f * vt.clone()).unwrap()
                - Form::ds(g * vt, LEFT).unwrap();
            let uh = Arc::new(FEFunction::from_fn(&v, |x| (2.0 * x[0] + 1.0).sin() * (x[1] * 3.0).cos()));
            let r = form.residual_form(&u, &uh).map_err(|e| e.to_string())?;
            let rep = localize(&r, &v).map_err(|e| e.to_string())?;
            let direct = assemble_vector(&r, &w).map_err(|e| e.to_string())?;
            let local = rep.assemble_against(&w).map_err(|e| e.to_string())?;
            let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = direct.iter().zip(&local).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            worst = worst.max(err);
            cases += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 30.0,
        format!("max relative error {worst:.2e} over {cases} mesh/degree cases (limit 1e-9), {secs:.1} s (limit 30 s)"),
    )
}

fn poisson_oracle() -> Outcome {
    let coarse = Arc::new(Mesh::unit_square(2).unwrap());
    let mesh = Arc::new(coarse.refine_uniform().unwrap().refine_uniform().unwrap());
    let v = FunctionSpace::new(mesh.clone(), 1).unwrap();
    // A different constant on each coarse cell.
    let fval = move |x: [f64; 2]| {
        let c = (0..coarse.num_cells())
            .find(|&c| coarse.barycentric(c, x).unwrap().iter().all(|&l| l >= -1e-12))
            .unwrap();
        1.0 + 0.75 * c as f64 - 0.1 * (c * c) as f64
    };
    let u = Coefficient::new("u");
    let f = Expr::scalar_field("f", fval.clone());
    let form = Form::dx(inner(&grad(&u.expr()), &grad(&Expr::test())) - f * Expr::test()).unwrap();
    let bcs: Vec<(usize, f64)> = [LEFT, RIGHT, BOTTOM, TOP]
        .iter()
        .flat_map(|&m| goalfem::apply_dirichlet(&v, m, |_| 0.0).unwrap())
        .collect();
    let (uh, _) = goalfem::solve_newton(&form, &u, FEFunction::zeros(&v), &bcs, &Default::default())
        .map_err(|e| e.to_string())?;
    let uh = Arc::new(uh);
    let rep = localize(&form.residual_form(&u, &uh).unwrap(), &v).map_err(|e| e.to_string())?;
    let (mut cell_err, mut facet_err): (f64, f64) = (0.0, 0.0);
    for c in 0..mesh.num_cells() {
        let geom = mesh.geometry(c);
        let fc = fval(geom.barycenter());
        for r in rep.cell_residual(c) {
            cell_err = cell_err.max((r - fc).abs());
        }
        let gu = uh.gradient(c, geom.barycenter()).unwrap();
        for e in 0..3 {
            let n = geom.normals[e];
            let expect = -(gu[0] * n[0] + gu[1] * n[1]);
            for r in rep.facet_residual(c, e) {
                facet_err = facet_err.max((r - expect).abs());
            }
        }
    }
    check(
        cell_err <= 1e-10 && facet_err <= 1e-10,
        format!(
            "|R_T - f| = {cell_err:.2e}, |R_dT + grad u_h . n| = {facet_err:.2e} on {} cells (limit 1e-10)",
            mesh.num_cells()
        ),
    )
}

fn extrapolation() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let meshes = [
        Mesh::unit_square(4).unwrap(),
        Mesh::perturbed_unit_square(5, 0.25, 21).unwrap(),
        bisect_randomly(Mesh::l_shape(2).unwrap(), 2, 4),
    ];
    for mesh in meshes {
        let mesh = Arc::new(mesh);
        for p in [1, 2] {
            let v = FunctionSpace::new(mesh.clone(), p).unwrap();
            let w = FunctionSpace::new(mesh.clone(), p + 1).unwrap();
            for d in 0..=p + 1 {
                for j in 0..=d {
                    let q = move |x: [f64; 2]| x[0].powi((d - j) as i32) * x[1].powi(j as i32);
                    let e = extrapolate(&FEFunction::from_fn(&v, q), &w).map_err(|e| e.to_string())?;
                    for (x, val) in w.dof_coords().iter().zip(e.coeffs()) {
                        worst = worst.max((q(*x) - val).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    check(
        worst <= 1e-8,
        format!("max |E(I_h q) - q| = {worst:.2e} over {cases} monomial/mesh/degree cases (limit 1e-8)"),
    )
}

fn efficiency() -> Outcome {
    let start = Instant::now();
    let opts = AdaptOptions {
        tol: 1e-5,
        ..Default::default()
    };
    let rep = demo_run(Demo::PoissonSmooth, &opts)?;
    let secs = start.elapsed().as_secs_f64();
    let large: Vec<_> = rep.iterations.iter().filter(|r| r.dofs >= 1000).collect();
    let eff_h: Vec<f64> = large.iter().map(|r| r.eff_h.unwrap()).collect();
    let eff_sum: Vec<f64> = large.iter().map(|r| r.eff_sum.unwrap()).collect();
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (h_lo, h_hi) = range(&eff_h);
    let (s_lo, s_hi) = range(&eff_sum);
    let ok = !large.is_empty()
        && h_lo >= 0.8
        && h_hi <= 1.2
        && s_lo >= 1.0
        && s_hi <= 10.0
        && secs < 60.0;
    check(
        ok,
        format!(
            "{} iterations with N >= 1000: eta_h/eta in [{h_lo:.4}, {h_hi:.4}] (need [0.8, 1.2]), \
             sum eta_T/eta in [{s_lo:.4}, {s_hi:.4}] (need [1, 10]), {secs:.1} s (limit 60 s)",
            large.len()
        ),
    )
}

/// Dofs needed to reach `err`, interpolating log N against log error between
/// the first iteration at or below `err` and its predecessor.
fn dofs_at(rep: &AdaptiveReport, err: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rep
        .iterations
        .iter()
        .map(|r| ((r.dofs as f64).ln(), r.exact_error.unwrap().ln()))
        .collect();
    let target = err.ln();
    let k = pts.iter().position(|&(_, e)| e <= target)?;
    if k == 0 {
        return Some(pts[0].0.exp());
    }
    let ((n0, e0), (n1, e1)) = (pts[k - 1], pts[k]);
    let t = (target - e0) / (e1 - e0);
    Some((n0 + t * (n1 - n0)).exp())
}

fn adaptive_vs_uniform() -> Outcome {
    let start = Instant::now();
    let demo = Demo::PoissonLshape;
    let adaptive = demo_run(
        demo,
        &AdaptOptions {
            tol: 1e-5,
            max_iter: 40,
            ..Default::default()
        },
    )?;
    let uniform = uniform_baseline(&demo.problem(), demo.initial_mesh(), &AdaptOptions::default(), 6, |_| Ok(()))
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    // Matched at the errors reached by uniform refinement. Level 0 is the
    // common initial mesh, so it is excluded.
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for r in &uniform.iterations[1..] {
        let Some(na) = dofs_at(&adaptive, r.exact_error.unwrap()) else {
            continue;
        };
        worst = worst.max(na / r.dofs as f64);
        compared += 1;
    }
    check(
        compared >= 3 && worst <= 0.5 && secs < 60.0,
        format!(
            "max adaptive/uniform dofs at matched error = {worst:.3} over {compared} uniform error levels (limit 0.5), {secs:.1} s (limit 60 s)"
        ),
    )
}

fn nonlinear() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let code = goalfem_cli::main_with_args([
        "goalfem",
        "demo",
        "nonlinear-poisson",
        "--tol",
        "1e-3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let its = json["iterations"].as_array().unwrap();
    let last = its.last().unwrap();
    let eta = last["eta_h"].as_f64().unwrap();
    let goal = last["goal"].as_f64().unwrap();
    let newton_worst = its
        .iter()
        .map(|i| i["newton_residuals"].as_array().unwrap().last().unwrap().as_f64().unwrap())
        .fold(0.0f64, f64::max);

    let demo = Demo::NonlinearPoisson;
    let opts = AdaptOptions {
        degree: 2,
        ..Default::default()
    };
    let reference = uniform_baseline(&demo.problem(), demo.initial_mesh(), &opts, 4, |_| Ok(()))
        .map_err(|e| e.to_string())?;
    let reference_goal = reference.last().unwrap().goal;
    // Printed for comparison; the criterion uses the discrete reference.
    let exact = nonlinear_reference_goal();
    let secs = start.elapsed().as_secs_f64();
    let diff = (goal - reference_goal).abs();
    check(
        code == 0 && eta <= 1e-3 && newton_worst <= 1e-10 && diff <= 1e-3 && secs < 60.0,
        format!(
            "exit {code}, eta_h = {eta:.3e} (limit 1e-3), worst final Newton residual {newton_worst:.1e} (limit 1e-10), \
             |M(u_h) - M_ref| = {diff:.3e} (limit 1e-3; p=2 reference {reference_goal:.10}, exact {exact:.10}), {secs:.1} s"
        ),
    )
}

fn marking() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let indicators = prop::collection::vec(
        prop_oneof![Just(0.0), (0u32..5).prop_map(f64::from), 0.0f64..1e3, 1e-12f64..1e-6],
        0..200,
    );
    let result = runner.run(&(indicators, 1e-3f64..=1.0), |(eta, alpha)| {
        let marked = mark_dorfler(&eta, alpha).unwrap();
        let total: f64 = eta.iter().sum();
        let sum: f64 = marked.iter().map(|&c| eta[c]).sum();
        if total == 0.0 {
            prop_assert!(marked.is_empty());
            return Ok(());
        }
        prop_assert!(sum >= alpha * total * (1.0 - 1e-12));
        let without_last: f64 = marked[..marked.len() - 1].iter().map(|&c| eta[c]).sum();
        prop_assert!(without_last < alpha * total * (1.0 + 1e-12));
        let all = mark_dorfler(&eta, 1.0).unwrap();
        prop_assert_eq!(all.len(), eta.iter().filter(|&&e| e > 0.0).count());
        Ok(())
    });
    match result {
        Ok(()) => Ok("1000 random indicator vectors: threshold met, prefix minimal, alpha = 1 marks all positive".into()),
        Err(e) => Err(format!("{e}")),
    }
}

fn adjoint() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let (t, s) = (Expr::trial(), Expr::test());
    let forms = [
        ("laplace", Form::dx(inner(&grad(&t), &grad(&s))).unwrap()),
        ("mass", Form::dx(t.clone() * s.clone()).unwrap()),
        ("advection", Form::dx(inner(&Expr::vector([0.7, -1.3]), &grad(&t)) * s.clone()).unwrap()),
    ];
    for seed in 0..5 {
        let mesh = Arc::new(bisect_randomly(Mesh::perturbed_unit_square(5, 0.25, seed).unwrap(), 1, seed as usize));
        for p in [1, 2, 3] {
            let v = FunctionSpace::new(mesh.clone(), p).unwrap();
            for (_, a) in &forms {
                let m = assemble_matrix(a, &v, &v).map_err(|e| e.to_string())?;
                let ma = assemble_matrix(&a.adjoint().unwrap(), &v, &v).map_err(|e| e.to_string())?;
                worst = worst.max(ma.max_abs_diff(&m.transpose()));
                cases += 1;
            }
        }
    }
    check(
        worst <= 1e-13,
        format!("max |A* - A^T| = {worst:.2e} over {cases} form/mesh/degree cases (limit 1e-13)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for demo in Demo::ALL {
        let args = DemoArgs {
            name: demo,
            tol: 1e-3,
            alpha: 0.5,
            degree: 1,
            max_iter: 20,
            out: dir.path().join(demo.name()),
            uniform: false,
            svg: false,
            seed: 0,
        };
        run_demo(&args)?;
        let first = std::fs::read(args.out.join("report.json")).map_err(|e| e.to_string())?;
        run_demo(&args)?;
        let second = std::fs::read(args.out.join("report.json")).map_err(|e| e.to_string())?;
        if first != second {
            return Err(format!("{demo}: report.json differs between runs"));
        }
    }
    Ok("report.json byte-identical across two runs of each demo".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("galerkin orthogonality", galerkin_orthogonality),
        ("residual reconstruction", reconstruction),
        ("poisson hand-derived residuals", poisson_oracle),
        ("extrapolation reproduction", extrapolation),
        ("efficiency index, poisson-smooth", efficiency),
        ("adaptive vs uniform, poisson-lshape", adaptive_vs_uniform),
        ("nonlinear pipeline", nonlinear),
        ("dorfler marking properties", marking),
        ("adjoint assembly", adjoint),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
