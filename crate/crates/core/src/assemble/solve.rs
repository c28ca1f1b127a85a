//! Linear systems with Dirichlet constraints and their solution.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};
use faer::Mat;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Required relative residual of direct solves.
pub const DIRECT_TOL: f64 = 1e-10;

/// `A x = b` with optional constrained dofs.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    constraints: Vec<(usize, f64)>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != rhs.len() {
            return Err(Error::InvalidArgument(format!(
                "system of shape {}x{} with right-hand side of length {}",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len()
            )));
        }
        Ok(Self {
            matrix,
            rhs,
            constraints: Vec::new(),
        })
    }

    /// Applies `x_d = g` by symmetric elimination: known values move to the
    /// right-hand side, constrained rows and columns are zeroed and their
    /// diagonal set to one. When a dof is listed twice the last value wins.
    pub fn constrain(&mut self, constraints: &[(usize, f64)]) -> Result<()> {
        let n = self.rhs.len();
        let mut value: Vec<Option<f64>> = vec![None; n];
        for &(d, g) in constraints {
            if d >= n {
                return Err(Error::InvalidArgument(format!("constrained dof {d} out of range")));
            }
            value[d] = Some(g);
        }
        let mut triplets = Vec::with_capacity(self.matrix.nnz());
        for i in 0..n {
            let (cols, vals) = self.matrix.row(i);
            if let Some(g) = value[i] {
                triplets.push((i, i, 1.0));
                self.rhs[i] = g;
                continue;
            }
            for (&j, &a) in cols.iter().zip(vals) {
                match value[j] {
                    Some(g) => self.rhs[i] -= a * g,
                    None => triplets.push((i, j, a)),
                }
            }
        }
        self.matrix = SparseMatrix::from_triplets(n, n, triplets);
        self.constraints = value
            .iter()
            .enumerate()
            .filter_map(|(d, v)| v.map(|g| (d, g)))
            .collect();
        Ok(())
    }

    /// Constrained dofs and values, ascending.
    pub fn constraints(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        norm(&sub(&self.matrix.mul_vec(x), &self.rhs))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a - b).collect()
}

fn to_faer(m: &SparseMatrix) -> SparseRowMat<usize, f64> {
    let symbolic = SymbolicSparseRowMat::new_checked(
        m.nrows(),
        m.ncols(),
        m.row_ptr().to_vec(),
        None,
        m.col_idx().to_vec(),
    );
    SparseRowMat::new(symbolic, m.values().to_vec())
}

/// Sparse LU solve with one step of iterative refinement. `name` identifies
/// the system in errors.
pub fn solve_linear(system: &LinearSystem, name: &str) -> Result<Vec<f64>> {
    let fail = |reason: String| Error::SingularSystem {
        system: name.into(),
        reason,
    };
    let n = system.rhs.len();
    let bnorm = norm(&system.rhs);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let lu = to_faer(&system.matrix)
        .sp_lu()
        .map_err(|e| fail(format!("LU factorization failed: {e:?}")))?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        lu.solve_in_place(x.as_mut());
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let mut x = solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(fail("factorization produced non-finite values".into()));
    }
    let r = sub(&system.rhs, &system.matrix.mul_vec(&x));
    if norm(&r) > 1e-14 * bnorm {
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    let res = system.residual_norm(&x);
    if !(res <= DIRECT_TOL * bnorm) {
        return Err(fail(format!("relative residual {:e}", res / bnorm)));
    }
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// definite systems, to relative residual `tol`.
pub fn solve_cg(system: &LinearSystem, name: &str, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::SingularSystem {
            system: name.into(),
            reason: "non-positive diagonal entry; CG needs an SPD matrix".into(),
        });
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SingularSystem {
        system: name.into(),
        reason: format!("CG did not reach relative residual {tol:e} in {max_iter} iterations"),
    })
}
