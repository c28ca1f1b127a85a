//! Global assembly of forms.

use rayon::prelude::*;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::forms::eval::{Kernel, LocalBasis};
use crate::forms::Form;
use crate::mesh::Mesh;
use crate::space::FunctionSpace;

/// Result of [`assemble`], by arity.
#[derive(Clone, Debug)]
pub enum Assembled {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(SparseMatrix),
}

fn basis(space: &FunctionSpace) -> LocalBasis<'static> {
    LocalBasis {
        polys: space.element().basis(),
        degree: space.degree(),
    }
}

fn check_arity(form: &Form, arity: usize) -> Result<()> {
    if form.arity() != arity {
        return Err(Error::InvalidArgument(format!(
            "expected a form of arity {arity}, got arity {}",
            form.arity()
        )));
    }
    Ok(())
}

/// Local tensors of every cell, in cell order.
fn local_tensors(kernel: &Kernel, mesh: &Mesh) -> Result<Vec<Vec<f64>>> {
    let n = kernel.local_len();
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = vec![0.0; n];
            kernel.integrate(mesh, c, &mut local)?;
            Ok(local)
        })
        .collect()
}

/// Matrix with entries `a(φ_j, φ_i)`: rows are test dofs, columns trial dofs.
pub fn assemble_matrix(form: &Form, test: &FunctionSpace, trial: &FunctionSpace) -> Result<SparseMatrix> {
    check_arity(form, 2)?;
    let mesh = test.mesh();
    if trial.mesh().uid() != mesh.uid() {
        return Err(Error::SpaceMismatch("test and trial spaces live on different meshes".into()));
    }
    let kernel = Kernel::new(form, mesh, Some(basis(test)), Some(basis(trial)))?;
    let locals = local_tensors(&kernel, mesh)?;
    let (nt, nr) = (test.dofs_per_cell(), trial.dofs_per_cell());
    let mut triplets = Vec::with_capacity(locals.len() * nt * nr);
    for (c, local) in locals.iter().enumerate() {
        let (rows, cols) = (test.cell_dofs(c), trial.cell_dofs(c));
        for (i, &r) in rows.iter().enumerate() {
            for (j, &col) in cols.iter().enumerate() {
                triplets.push((r, col, local[i * nr + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(test.dim(), trial.dim(), triplets))
}

/// Vector with entries `L(φ_i)`.
pub fn assemble_vector(form: &Form, test: &FunctionSpace) -> Result<Vec<f64>> {
    check_arity(form, 1)?;
    let mesh = test.mesh();
    let kernel = Kernel::new(form, mesh, Some(basis(test)), None)?;
    let locals = local_tensors(&kernel, mesh)?;
    let mut out = vec![0.0; test.dim()];
    for (c, local) in locals.iter().enumerate() {
        for (&r, v) in test.cell_dofs(c).iter().zip(local) {
            out[r] += v;
        }
    }
    Ok(out)
}

/// Value of a functional.
pub fn assemble_scalar(form: &Form, mesh: &Mesh) -> Result<f64> {
    check_arity(form, 0)?;
    let kernel = Kernel::new(form, mesh, None, None)?;
    Ok(local_tensors(&kernel, mesh)?.iter().map(|l| l[0]).sum())
}

/// Assembles a form of any arity on the mesh of `test`.
pub fn assemble(form: &Form, test: &FunctionSpace, trial: &FunctionSpace) -> Result<Assembled> {
    Ok(match form.arity() {
        0 => Assembled::Scalar(assemble_scalar(form, test.mesh())?),
        1 => Assembled::Vector(assemble_vector(form, test)?),
        _ => Assembled::Matrix(assemble_matrix(form, test, trial)?),
    })
}
