//! Localization of a weak residual into cell and facet residuals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::eval::{edge_points, Kernel, LocalBasis};
use crate::forms::Form;
use crate::mesh::Mesh;
use crate::poly::Poly2;
use crate::quadrature::gauss_legendre;
use crate::space::{lagrange, FEFunction, FunctionSpace};

/// Gauss points and weights on `[0, 1]`, exact for degree 15.
fn unit_line() -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(8);
    (x.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// `R_T` and `R_∂T` for every cell of a mesh.
///
/// `R_T` is stored by its values at the Lagrange nodes of degree `p`; the
/// facet residual on local edge `e` by its values at the `p + 1` equispaced
/// nodes running from vertex `(e+1)%3` to vertex `(e+2)%3`.
#[derive(Clone, Debug)]
pub struct ResidualRep {
    mesh: Arc<Mesh>,
    degree: usize,
    cell: Vec<f64>,
    facet: Vec<f64>,
}

struct LocalProblems {
    test: Vec<Poly2>,
    /// Cholesky factor of `∫ b φ_i φ_j` on the reference cell.
    cell_mass: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `∫ β_e ψ_k φ_j` on the reference cell, per edge.
    coupling: [DMatrix<f64>; 3],
    /// `∫_0^1 b_S ψ_k ψ_l dt`, the same for every edge.
    facet_mass: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn local_problems(p: usize) -> Result<LocalProblems> {
    let el = lagrange(p)?;
    let phi = el.basis();
    let n = phi.len();
    let bubble = Poly2::bubble();
    let mut test: Vec<Poly2> = phi.iter().map(|f| &bubble * f).collect();
    let mass = DMatrix::from_fn(n, n, |i, j| (&test[i] * &phi[j]).integrate());
    let mut coupling: [DMatrix<f64>; 3] = Default::default();
    for e in 0..3 {
        let cone = Poly2::cone(e);
        let psi: Vec<Poly2> = el.edge_nodes(e).iter().map(|&k| &cone * &phi[k]).collect();
        coupling[e] = DMatrix::from_fn(p + 1, n, |k, j| (&psi[k] * &phi[j]).integrate());
        test.extend(psi);
    }
    // On edge 0 with parameter t the facet bubble is t(1-t) and ψ_k is the
    // 1D Lagrange function of node k/p.
    let (t, w) = unit_line();
    let pts = edge_points(0, &t);
    let nodes = el.edge_nodes(0);
    let gmat = DMatrix::from_fn(p + 1, p + 1, |k, l| {
        pts.iter()
            .zip(&t)
            .zip(&w)
            .map(|((x, t), w)| w * t * (1.0 - t) * phi[nodes[k]].eval(*x) * phi[nodes[l]].eval(*x))
            .sum()
    });
    let fail = || Error::SingularLocalProblem { cell: 0 };
    Ok(LocalProblems {
        test,
        cell_mass: mass.cholesky().ok_or_else(fail)?,
        coupling,
        facet_mass: gmat.cholesky().ok_or_else(fail)?,
    })
}

/// Computes the cell and facet residuals of the linear form `r` for the
/// polynomial degree of `space`. For each cell, `R_T` solves
/// `⟨R_T, b_T φ_i⟩_T = r_T(b_T φ_i)` and then, per facet `S`,
/// `⟨R_∂T, β_S φ_k⟩_S = r_T(β_S φ_k) - ⟨R_T, β_S φ_k⟩_T` with `φ_k` the
/// basis functions attached to the nodes of `S`.
pub fn localize(r: &Form, space: &FunctionSpace) -> Result<ResidualRep> {
    if r.arity() != 1 {
        return Err(Error::InvalidArgument(format!(
            "localization needs a linear form, got arity {}",
            r.arity()
        )));
    }
    let p = space.degree();
    let mesh = space.mesh();
    let lp = local_problems(p)?;
    let n = space.dofs_per_cell();
    let kernel = Kernel::new(
        r,
        mesh,
        Some(LocalBasis {
            polys: &lp.test,
            degree: p + 3,
        }),
        None,
    )?;
    let per_cell: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let geom = mesh.geometry(c);
            let det = geom.det_jacobian();
            if !(det > 0.0 && det.is_finite()) {
                return Err(Error::SingularLocalProblem { cell: c });
            }
            let mut rhs = vec![0.0; lp.test.len()];
            kernel.integrate(mesh, c, &mut rhs)?;
            let rt = lp.cell_mass.solve(&DVector::from_column_slice(&rhs[..n])) / det;
            let mut facet = Vec::with_capacity(3 * (p + 1));
            for e in 0..3 {
                let off = n + e * (p + 1);
                let b = DVector::from_column_slice(&rhs[off..off + p + 1]) - &lp.coupling[e] * &rt * det;
                let rs = lp.facet_mass.solve(&b) / geom.edge_lengths[e];
                facet.extend(rs.iter());
            }
            let cell: Vec<f64> = rt.iter().copied().collect();
            if cell.iter().chain(&facet).any(|v| !v.is_finite()) {
                return Err(Error::SingularLocalProblem { cell: c });
            }
            Ok((cell, facet))
        })
        .collect::<Result<_>>()?;
    let mut cell = Vec::with_capacity(mesh.num_cells() * n);
    let mut facet = Vec::with_capacity(mesh.num_cells() * 3 * (p + 1));
    for (c, f) in per_cell {
        cell.extend(c);
        facet.extend(f);
    }
    Ok(ResidualRep {
        mesh: mesh.clone(),
        degree: p,
        cell,
        facet,
    })
}

/// Reference integrals pairing the residual bases with another element.
struct Pairing {
    nw: usize,
    /// `∫ φ_j w_k` over the reference cell, row-major `j * nw + k`.
    cell: Vec<f64>,
    /// `∫_0^1 ψ_l(t) w_k(t) dt` per edge, row-major `l * nw + k`.
    edge: [Vec<f64>; 3],
}

impl ResidualRep {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Polynomial degree of both the cell and the facet residuals.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Nodal values of `R_T` in the degree-`p` Lagrange basis of `cell`.
    pub fn cell_residual(&self, cell: usize) -> &[f64] {
        let n = (self.degree + 1) * (self.degree + 2) / 2;
        &self.cell[cell * n..(cell + 1) * n]
    }

    /// Values of `R_∂T` at the nodes of local edge `e` of `cell`.
    pub fn facet_residual(&self, cell: usize, e: usize) -> &[f64] {
        let q = self.degree + 1;
        let start = (cell * 3 + e) * q;
        &self.facet[start..start + q]
    }

    fn pairing(&self, w: &FunctionSpace) -> Result<Pairing> {
        let el = lagrange(self.degree)?;
        let wel = w.element();
        let nw = wel.dim();
        let mut cell = Vec::with_capacity(el.dim() * nw);
        for phi in el.basis() {
            cell.extend(wel.basis().iter().map(|wk| (phi * wk).integrate()));
        }
        let (t, wts) = unit_line();
        let edge = std::array::from_fn(|e| {
            let pts = edge_points(e, &t);
            let mut out = Vec::with_capacity((self.degree + 1) * nw);
            for &l in el.edge_nodes(e) {
                for wk in wel.basis() {
                    out.push(pts.iter().zip(&wts).map(|(x, wt)| wt * el.basis()[l].eval(*x) * wk.eval(*x)).sum());
                }
            }
            out
        });
        Ok(Pairing { nw, cell, edge })
    }

    /// For every cell and every local basis function `w_k` of `space`, the
    /// values `[⟨R_T, w_k⟩_T, ⟨R_∂T, w_k⟩_{S_0}, ⟨R_∂T, w_k⟩_{S_1}, ⟨R_∂T, w_k⟩_{S_2}]`.
    fn local_pairings(&self, space: &FunctionSpace) -> Result<Vec<Vec<[f64; 4]>>> {
        if space.mesh().uid() != self.mesh.uid() {
            return Err(Error::SpaceMismatch("residual and test space live on different meshes".into()));
        }
        let pr = self.pairing(space)?;
        Ok((0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let geom = self.mesh.geometry(c);
                let det = geom.det_jacobian();
                let rt = self.cell_residual(c);
                (0..pr.nw)
                    .map(|k| {
                        let mut v = [0.0; 4];
                        v[0] = det * rt.iter().enumerate().map(|(j, r)| r * pr.cell[j * pr.nw + k]).sum::<f64>();
                        for e in 0..3 {
                            let rs = self.facet_residual(c, e);
                            v[1 + e] = geom.edge_lengths[e]
                                * rs.iter().enumerate().map(|(l, r)| r * pr.edge[e][l * pr.nw + k]).sum::<f64>();
                        }
                        v
                    })
                    .collect()
            })
            .collect())
    }

    /// `Σ_T ⟨R_T, φ_i⟩_T + ⟨R_∂T, φ_i⟩_{∂T}` for every basis function of
    /// `space`; equals the assembled residual when the data are polynomial.
    pub fn assemble_against(&self, space: &FunctionSpace) -> Result<Vec<f64>> {
        let local = self.local_pairings(space)?;
        let mut out = vec![0.0; space.dim()];
        for (c, vals) in local.iter().enumerate() {
            for (&d, v) in space.cell_dofs(c).iter().zip(vals) {
                out[d] += v.iter().sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Per cell, `[⟨R_T, w⟩_T, ⟨R_∂T, w⟩_{S_e} for e = 0, 1, 2]`.
    pub fn cell_terms(&self, w: &FEFunction) -> Result<Vec<[f64; 4]>> {
        let local = self.local_pairings(w.space())?;
        let coeffs = w.coeffs();
        Ok(local
            .iter()
            .enumerate()
            .map(|(c, vals)| {
                let mut t = [0.0; 4];
                for (&d, v) in w.space().cell_dofs(c).iter().zip(vals) {
                    for (a, b) in t.iter_mut().zip(v) {
                        *a += coeffs[d] * b;
                    }
                }
                t
            })
            .collect())
    }

    /// `Σ_T ⟨R_T, w⟩_T + ⟨R_∂T, w⟩_{∂T}`.
    pub fn apply(&self, w: &FEFunction) -> Result<f64> {
        Ok(self.cell_terms(w)?.iter().flatten().sum())
    }
}
