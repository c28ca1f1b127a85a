//! Continuous Lagrange spaces, finite element functions and Dirichlet data.
//!
//! Global dofs are numbered vertices first, then `p - 1` dofs per facet in
//! facet order (running from the lower to the higher vertex index), then the
//! interior dofs of each cell.

mod element;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

pub use element::{dim_p, lagrange, LagrangeElement, Tabulation, MAX_ELEMENT_DEGREE};

use crate::error::{Error, Result};
use crate::mesh::{Marker, Mesh, Point};

/// Tolerance on barycentric coordinates for point location.
pub const INSIDE_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: &'static LagrangeElement,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<Point>,
    boundary_dofs: BTreeMap<Marker, Vec<usize>>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>> {
        let element = lagrange(degree)?;
        let p = degree;
        let nv = mesh.num_vertices();
        let nf = mesh.num_facets();
        let ni = element.num_interior();
        let ndofs = nv + nf * (p - 1) + mesh.num_cells() * ni;
        let nloc = element.dim();

        let mut dof_coords = vec![[0.0; 2]; ndofs];
        dof_coords[..nv].copy_from_slice(mesh.vertices());
        for (f, facet) in mesh.facet_adjacency().iter().enumerate() {
            let [a, b] = facet.vertices.map(|v| mesh.vertices()[v]);
            for k in 1..p {
                let t = k as f64 / p as f64;
                dof_coords[nv + f * (p - 1) + k - 1] = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            }
        }

        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * nloc);
        let interior_start = nv + nf * (p - 1);
        for (c, cell) in mesh.cells().iter().enumerate() {
            cell_dofs.extend_from_slice(cell);
            let facets = mesh.cell_facets(c);
            for e in 0..3 {
                let forward = cell[(e + 1) % 3] < cell[(e + 2) % 3];
                let base = nv + facets[e] * (p - 1);
                for k in 0..p - 1 {
                    cell_dofs.push(if forward { base + k } else { base + p - 2 - k });
                }
            }
            let geom = mesh.geometry(c);
            for k in 0..ni {
                let dof = interior_start + c * ni + k;
                cell_dofs.push(dof);
                dof_coords[dof] = geom.to_physical(element.nodes()[3 * p + k]);
            }
        }

        let mut boundary_dofs: BTreeMap<Marker, Vec<usize>> = BTreeMap::new();
        for facet in mesh.facet_adjacency() {
            let Some(m) = facet.marker else { continue };
            let (c, e) = facet.incident[0];
            let local = &cell_dofs[c * nloc..(c + 1) * nloc];
            let list = boundary_dofs.entry(m).or_default();
            list.extend(element.edge_nodes(e).iter().map(|&k| local[k]));
        }
        for list in boundary_dofs.values_mut() {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Arc::new(Self {
            mesh,
            element,
            cell_dofs,
            dof_coords,
            boundary_dofs,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &'static LagrangeElement {
        self.element
    }

    pub fn dim(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.element.dim()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.element.dim();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Dofs on facets carrying `marker`, ascending.
    pub fn boundary_dofs(&self, marker: Marker) -> &[usize] {
        self.boundary_dofs.get(&marker).map_or(&[], |v| v.as_slice())
    }

    /// Whether two spaces can share coefficient vectors.
    pub fn same_as(&self, other: &FunctionSpace) -> bool {
        self.mesh.uid() == other.mesh.uid() && self.degree() == other.degree()
    }
}

/// Dirichlet values `(dof, g(x_dof))` on all dofs of facets with `marker`, in
/// ascending dof order.
pub fn apply_dirichlet(space: &FunctionSpace, marker: Marker, g: impl Fn(Point) -> f64) -> Result<Vec<(usize, f64)>> {
    if !space.boundary_dofs.contains_key(&marker) {
        return Err(Error::InvalidArgument(format!("no boundary facets carry marker {marker}")));
    }
    Ok(space
        .boundary_dofs(marker)
        .iter()
        .map(|&d| (d, g(space.dof_coords[d])))
        .collect())
}

/// A coefficient vector over a function space.
#[derive(Clone, Debug)]
pub struct FEFunction {
    space: Arc<FunctionSpace>,
    coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn zeros(space: &Arc<FunctionSpace>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![0.0; space.dim()],
        }
    }

    pub fn new(space: &Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::SpaceMismatch(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {i} is not finite")));
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    /// Nodal interpolant of a callable.
    pub fn from_fn(space: &Arc<FunctionSpace>, f: impl Fn(Point) -> f64) -> Self {
        Self {
            space: space.clone(),
            coeffs: space.dof_coords.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    fn locate(&self, cell: usize, point: Point) -> Result<[f64; 2]> {
        let mesh = self.space.mesh();
        let lambda = mesh.barycentric(cell, point)?;
        if lambda.iter().any(|&l| l < -INSIDE_TOL) {
            return Err(Error::OutsideCell {
                cell,
                x: point[0],
                y: point[1],
            });
        }
        Ok([lambda[1], lambda[2]])
    }

    pub fn evaluate(&self, cell: usize, point: Point) -> Result<f64> {
        let xi = self.locate(cell, point)?;
        let dofs = self.space.cell_dofs(cell);
        Ok(self
            .space
            .element
            .basis()
            .iter()
            .zip(dofs)
            .map(|(phi, &d)| self.coeffs[d] * phi.eval(xi))
            .sum())
    }

    pub fn gradient(&self, cell: usize, point: Point) -> Result<[f64; 2]> {
        let xi = self.locate(cell, point)?;
        let dofs = self.space.cell_dofs(cell);
        let mut g = [0.0; 2];
        for (phi, &d) in self.space.element.basis().iter().zip(dofs) {
            let (_, gr, _) = phi.eval_all(xi);
            g[0] += self.coeffs[d] * gr[0];
            g[1] += self.coeffs[d] * gr[1];
        }
        Ok(self.space.mesh().geometry(cell).push_gradient(g))
    }

    /// Nodal interpolation into another space on the same mesh.
    pub fn interpolate(&self, into: &Arc<FunctionSpace>) -> Result<FEFunction> {
        if into.mesh.uid() != self.space.mesh.uid() {
            return Err(Error::SpaceMismatch("interpolation between different meshes".into()));
        }
        if into.degree() == self.space.degree() {
            return Ok(FEFunction {
                space: into.clone(),
                coeffs: self.coeffs.clone(),
            });
        }
        let tab = self.space.element.tabulate(into.element.nodes());
        let mut coeffs = vec![0.0; into.dim()];
        for c in 0..into.mesh.num_cells() {
            let src = self.space.cell_dofs(c);
            for (q, &d) in into.cell_dofs(c).iter().enumerate() {
                coeffs[d] = (0..tab.n).map(|i| tab.values[q * tab.n + i] * self.coeffs[src[i]]).sum();
            }
        }
        Ok(FEFunction {
            space: into.clone(),
            coeffs,
        })
    }

    /// Transfers the function to a refinement of its mesh by evaluating it at
    /// the new dof coordinates inside the parent cells.
    pub fn prolongate(&self, into: &Arc<FunctionSpace>) -> Result<FEFunction> {
        let lineage = into
            .mesh
            .lineage()
            .filter(|l| l.parent_uid == self.space.mesh.uid())
            .ok_or_else(|| Error::SpaceMismatch("target mesh is not a refinement of the source mesh".into()))?;
        let mut coeffs = vec![0.0; into.dim()];
        let mut done = vec![false; into.dim()];
        for c in 0..into.mesh.num_cells() {
            let parent = lineage.parent_cell[c];
            for &d in into.cell_dofs(c) {
                if !done[d] {
                    coeffs[d] = self.evaluate(parent, into.dof_coords[d])?;
                    done[d] = true;
                }
            }
        }
        Ok(FEFunction {
            space: into.clone(),
            coeffs,
        })
    }

    /// CSV rows `dof_index,x,y,value`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut s = String::from("dof_index,x,y,value\n");
        for (i, (x, v)) in self.space.dof_coords.iter().zip(&self.coeffs).enumerate() {
            s.push_str(&format!("{i},{},{},{v}\n", x[0], x[1]));
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::square_markers::{LEFT, TOP};

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n).unwrap())
    }

    #[test]
    fn dimensions() {
        let m = square(3);
        let (nv, nf, nc) = (m.num_vertices(), m.num_facets(), m.num_cells());
        assert_eq!(FunctionSpace::new(m.clone(), 1).unwrap().dim(), nv);
        assert_eq!(FunctionSpace::new(m.clone(), 2).unwrap().dim(), nv + nf);
        assert_eq!(FunctionSpace::new(m.clone(), 3).unwrap().dim(), nv + 2 * nf + nc);
    }

    #[test]
    fn shared_dofs_have_matching_coordinates() {
        let m = Arc::new(Mesh::perturbed_unit_square(3, 0.2, 7).unwrap().mark_and_refine(&[0, 5]).unwrap());
        for p in 1..=4 {
            let v = FunctionSpace::new(m.clone(), p).unwrap();
            for c in 0..m.num_cells() {
                let g = m.geometry(c);
                for (k, &d) in v.cell_dofs(c).iter().enumerate() {
                    let x = g.to_physical(v.element().nodes()[k]);
                    let y = v.dof_coords()[d];
                    assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn evaluation_reproduces_polynomials() {
        let m = Arc::new(Mesh::perturbed_unit_square(4, 0.2, 3).unwrap());
        let p1 = FunctionSpace::new(m.clone(), 1).unwrap();
        let p2 = FunctionSpace::new(m.clone(), 2).unwrap();
        let f1 = FEFunction::from_fn(&p1, |x| x[0] + 2.0 * x[1]);
        let f2 = FEFunction::from_fn(&p2, |x| x[0] * x[0]);
        for c in 0..m.num_cells() {
            let x = m.geometry(c).to_physical([0.2, 0.3]);
            assert!((f1.evaluate(c, x).unwrap() - (x[0] + 2.0 * x[1])).abs() < 1e-13);
            let g = f1.gradient(c, x).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
            assert!((f2.evaluate(c, x).unwrap() - x[0] * x[0]).abs() < 1e-13);
        }
        assert!(matches!(f1.evaluate(0, [5.0, 5.0]), Err(Error::OutsideCell { .. })));
    }

    #[test]
    fn interpolation() {
        let m = square(1);
        let p1 = FunctionSpace::new(m.clone(), 1).unwrap();
        let p2 = FunctionSpace::new(m.clone(), 2).unwrap();
        let sq = FEFunction::from_fn(&p2, |x| x[0] * x[0]);
        let down = sq.interpolate(&p1).unwrap();
        // Vertices of unit_square(1): (0,0), (1,0), (0,1), (1,1).
        assert_eq!(down.coeffs(), &[0.0, 1.0, 0.0, 1.0]);
        let same = sq.interpolate(&p2).unwrap();
        assert_eq!(same.coeffs(), sq.coeffs());
        let affine = FEFunction::from_fn(&p2, |x| 3.0 * x[0] - x[1] + 0.5);
        let lin = affine.interpolate(&p1).unwrap();
        for c in 0..m.num_cells() {
            let x = m.geometry(c).to_physical([0.31, 0.17]);
            assert!((lin.evaluate(c, x).unwrap() - affine.evaluate(c, x).unwrap()).abs() < 1e-13);
        }
        let other = FunctionSpace::new(square(2), 1).unwrap();
        assert!(sq.interpolate(&other).is_err());
    }

    #[test]
    fn prolongation_is_exact_for_space_members() {
        let m = Arc::new(Mesh::perturbed_unit_square(3, 0.1, 1).unwrap());
        let r = Arc::new(m.mark_and_refine(&[2, 3, 7]).unwrap());
        let coarse = FunctionSpace::new(m, 2).unwrap();
        let fine = FunctionSpace::new(r.clone(), 2).unwrap();
        let f = FEFunction::from_fn(&coarse, |x| x[0] * x[1] - x[1] * x[1]);
        let g = f.prolongate(&fine).unwrap();
        for (d, x) in fine.dof_coords().iter().enumerate() {
            assert!((g.coeffs()[d] - (x[0] * x[1] - x[1] * x[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn dirichlet_dofs() {
        let m = square(1);
        let p1 = FunctionSpace::new(m.clone(), 1).unwrap();
        let bc = apply_dirichlet(&p1, LEFT, |_| 0.0).unwrap();
        assert_eq!(bc, vec![(0, 0.0), (2, 0.0)]);
        let bc = apply_dirichlet(&p1, LEFT, |x| x[1]).unwrap();
        assert_eq!(bc, vec![(0, 0.0), (2, 1.0)]);
        let p2 = FunctionSpace::new(m, 2).unwrap();
        assert_eq!(apply_dirichlet(&p2, TOP, |_| 1.0).unwrap().len(), 3);
        assert!(apply_dirichlet(&p2, 99, |_| 1.0).is_err());
    }

    #[test]
    fn csv_export() {
        let p1 = FunctionSpace::new(square(1), 1).unwrap();
        let f = FEFunction::from_fn(&p1, |x| x[0]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "dof_index,x,y,value\n0,0,0,0\n1,1,0,1\n2,0,1,0\n3,1,1,1\n");
    }
}
