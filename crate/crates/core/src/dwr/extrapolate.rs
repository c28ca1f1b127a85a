//! Patchwise least-squares extrapolation to one degree higher.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::space::{dim_p, FEFunction, FunctionSpace};

/// Condition number of the scaled normal equations above which the fit
/// switches to an SVD.
const NORMAL_COND_MAX: f64 = 1e8;
/// Relative singular value below which the fit is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Cells sharing a vertex with any cell of `cells`.
fn grow(mesh: &Mesh, cells: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = cells.clone();
    for &c in cells {
        for &v in &mesh.cells()[c] {
            out.extend(mesh.vertex_cells(v).iter().copied());
        }
    }
    out
}

/// Monomials `ξ^i η^j`, `i + j <= degree`, in shifted and scaled coordinates.
struct FitBasis {
    degree: usize,
    center: Point,
    scale: f64,
}

impl FitBasis {
    fn new(points: &[Point], degree: usize) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let scale = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        Self {
            degree,
            center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
            scale: if scale > 0.0 { scale } else { 1.0 },
        }
    }

    fn row(&self, x: Point) -> Vec<f64> {
        let (s, t) = ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale);
        let mut out = Vec::with_capacity(dim_p(self.degree));
        for d in 0..=self.degree {
            for j in 0..=d {
                out.push(s.powi((d - j) as i32) * t.powi(j as i32));
            }
        }
        out
    }
}

/// Least-squares coefficients, or `None` if the system is rank deficient.
fn fit(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() < n {
        return None;
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    if norms.iter().any(|&s| s == 0.0) {
        return None;
    }
    let mut scaled = a.clone();
    for (j, s) in norms.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let normal = scaled.transpose() * &scaled;
    let eig = normal.clone().symmetric_eigen().eigenvalues;
    let (lmin, lmax) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    let y = if lmin > 0.0 && lmax / lmin <= NORMAL_COND_MAX {
        normal.cholesky()?.solve(&(scaled.transpose() * b))
    } else {
        let svd = scaled.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= RANK_TOL * smax {
            return None;
        }
        svd.solve(b, 0.0).ok()?
    };
    Some(DVector::from_iterator(n, y.iter().zip(&norms).map(|(y, s)| y / s)))
}

/// Fits a polynomial of the target degree to the nodal values of `v` on the
/// patch `cells` and evaluates it at `targets`.
fn fit_patch(v: &FEFunction, cells: &BTreeSet<usize>, degree: usize, targets: &[Point]) -> Option<Vec<f64>> {
    let space = v.space();
    let dofs: BTreeSet<usize> = cells.iter().flat_map(|&c| space.cell_dofs(c).iter().copied()).collect();
    let points: Vec<Point> = dofs.iter().map(|&d| space.dof_coords()[d]).collect();
    let basis = FitBasis::new(&points, degree);
    let n = dim_p(degree);
    let a = DMatrix::from_fn(points.len(), n, |r, c| basis.row(points[r])[c]);
    let b = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| v.coeffs()[d]));
    let coef = fit(&a, &b)?;
    Some(
        targets
            .iter()
            .map(|&x| basis.row(x).iter().zip(coef.iter()).map(|(a, b)| a * b).sum())
            .collect(),
    )
}

/// Lifts `v` to `target`, whose degree must be one higher on the same mesh.
///
/// Per cell, a polynomial of the target degree is fitted by least squares to
/// the nodal values of `v` on the cells sharing a vertex with it (one more
/// ring if that gives fewer values than unknowns, and one more if the fit is
/// rank deficient). Values at dofs shared between cells are averaged.
pub fn extrapolate(v: &FEFunction, target: &Arc<FunctionSpace>) -> Result<FEFunction> {
    let space = v.space();
    let mesh = space.mesh();
    if target.mesh().uid() != mesh.uid() || target.degree() != space.degree() + 1 {
        return Err(Error::SpaceMismatch(format!(
            "extrapolation from degree {} needs a degree-{} space on the same mesh",
            space.degree(),
            space.degree() + 1
        )));
    }
    let degree = target.degree();
    let n = dim_p(degree);
    let local: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let targets: Vec<Point> = target.cell_dofs(c).iter().map(|&d| target.dof_coords()[d]).collect();
            let mut patch = grow(mesh, &BTreeSet::from([c]));
            let count = |p: &BTreeSet<usize>| {
                p.iter().flat_map(|&k| space.cell_dofs(k).iter().copied()).collect::<BTreeSet<_>>().len()
            };
            if count(&patch) < n {
                patch = grow(mesh, &patch);
            }
            if let Some(vals) = fit_patch(v, &patch, degree, &targets) {
                return Ok(vals);
            }
            patch = grow(mesh, &patch);
            fit_patch(v, &patch, degree, &targets).ok_or(Error::RankDeficient { cell: c })
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; target.dim()];
    let mut count = vec![0u32; target.dim()];
    for (c, vals) in local.iter().enumerate() {
        for (&d, x) in target.cell_dofs(c).iter().zip(vals) {
            sum[d] += x;
            count[d] += 1;
        }
    }
    let coeffs = sum.iter().zip(&count).map(|(s, &k)| s / k as f64).collect();
    FEFunction::new(target, coeffs)
}
