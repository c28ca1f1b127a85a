//! Conforming triangle meshes.
//!
//! A [`Mesh`] is immutable once built. Cells are counter-clockwise vertex
//! triples; local edge `e` of a cell is the edge opposite its local vertex `e`,
//! running from local vertex `(e + 1) % 3` to `(e + 2) % 3`. Facets are
//! unordered vertex pairs stored in ascending order and sorted
//! lexicographically, so facet ids are deterministic.

mod generate;
mod io;
mod refine;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub use generate::{l_shape_markers, square_markers};
pub use io::{read_msh2, write_msh2, write_svg};

/// A point in the plane.
pub type Point = [f64; 2];

/// Integer tag attached to boundary facets.
pub type Marker = i32;

/// Marker given to boundary facets that were not tagged explicitly.
pub const DEFAULT_MARKER: Marker = 0;

static NEXT_MESH_UID: AtomicU64 = AtomicU64::new(1);

/// A facet together with the cells incident to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// Vertex indices, ascending.
    pub vertices: [usize; 2],
    /// `(cell, local edge)` pairs; one for boundary facets, two for interior
    /// facets, the lower cell id first.
    pub incident: Vec<(usize, usize)>,
    /// Boundary marker, `None` for interior facets.
    pub marker: Option<Marker>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.incident.len() == 1
    }
}

/// Parent/child relation between a refined mesh and the mesh it came from.
#[derive(Clone, Debug)]
pub struct Lineage {
    pub parent_uid: u64,
    /// For every cell of the child mesh, the parent cell containing it.
    pub parent_cell: Vec<usize>,
}

/// Conforming 2D simplicial mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    uid: u64,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    facets: Vec<Facet>,
    cell_facets: Vec<[usize; 3]>,
    vertex_cell_offsets: Vec<usize>,
    vertex_cells: Vec<usize>,
    lineage: Option<Lineage>,
}

/// Affine geometry of a single cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    /// Outward unit normal of each local edge.
    pub normals: [[f64; 2]; 3],
    pub edge_lengths: [f64; 3],
    /// Columns are `x1 - x0` and `x2 - x0`: `x = x0 + J ξ`.
    pub jacobian: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical gradients.
    pub inv_jacobian_t: [[f64; 2]; 2],
}

impl CellGeometry {
    fn new(vertices: [Point; 3]) -> Self {
        let [a, b, c] = vertices;
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        let mut normals = [[0.0; 2]; 3];
        let mut edge_lengths = [0.0; 3];
        for e in 0..3 {
            let p = vertices[(e + 1) % 3];
            let q = vertices[(e + 2) % 3];
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            edge_lengths[e] = len;
            // Counter-clockwise cells have the interior on the left of each edge.
            normals[e] = [t[1] / len, -t[0] / len];
        }
        Self {
            vertices,
            area: 0.5 * det,
            normals,
            edge_lengths,
            jacobian: j,
            inv_jacobian_t: inv_t,
        }
    }

    /// `|det J| = 2 |T|`.
    pub fn det_jacobian(&self) -> f64 {
        2.0 * self.area
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        let [x0, _, _] = self.vertices;
        let j = &self.jacobian;
        [
            x0[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            x0[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let [x0, _, _] = self.vertices;
        let d = [x[0] - x0[0], x[1] - x0[1]];
        // J^{-1} = (J^{-T})^T
        let m = &self.inv_jacobian_t;
        [m[0][0] * d[0] + m[1][0] * d[1], m[0][1] * d[0] + m[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_jacobian_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }

    /// Physical Laplacian from a reference Hessian `[h_xx, h_xy, h_yy]`.
    pub fn push_laplacian(&self, h: [f64; 3]) -> f64 {
        // trace(K H K^T) with K = J^{-T}
        let k = &self.inv_jacobian_t;
        let mut lap = 0.0;
        for row in k {
            lap += row[0] * row[0] * h[0] + 2.0 * row[0] * row[1] * h[1] + row[1] * row[1] * h[2];
        }
        lap
    }

    pub fn barycenter(&self) -> Point {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self) -> f64 {
        self.edge_lengths.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest interior angle in radians.
    pub fn min_angle(&self) -> f64 {
        let l = self.edge_lengths;
        (0..3)
            .map(|i| {
                let (a, b, c) = (l[i], l[(i + 1) % 3], l[(i + 2) % 3]);
                ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Local index of the longest edge; ties go to the lexicographically smallest
/// vertex pair.
fn longest_edge(vertices: &[Point], cell: [usize; 3]) -> u8 {
    let mut best = 0;
    let mut best_len = -1.0;
    let mut best_key = [usize::MAX; 2];
    for e in 0..3 {
        let (a, b) = (cell[(e + 1) % 3], cell[(e + 2) % 3]);
        let len = dist2(vertices[a], vertices[b]);
        let key = sorted_pair(a, b);
        if len > best_len || (len == best_len && key < best_key) {
            best = e;
            best_len = len;
            best_key = key;
        }
    }
    best as u8
}

impl Mesh {
    /// Builds a mesh from vertices, counter-clockwise cells and markers for
    /// boundary facets. Boundary facets without a marker get
    /// [`DEFAULT_MARKER`]. The refinement edge of every cell is its longest
    /// edge.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        boundary_markers: impl IntoIterator<Item = ([usize; 2], Marker)>,
    ) -> Result<Self> {
        let refinement_edge = cells.iter().map(|&c| longest_edge(&vertices, c)).collect();
        Self::build(vertices, cells, refinement_edge, boundary_markers, None)
    }

    /// Builds a mesh and tags each boundary facet with `marker(a, b)` where
    /// `a` and `b` are its endpoints.
    pub fn with_boundary_fn(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        marker: impl Fn(Point, Point) -> Marker,
    ) -> Result<Self> {
        let untagged = Self::new(vertices, cells, std::iter::empty())?;
        let markers: Vec<_> = untagged
            .facets
            .iter()
            .filter(|f| f.is_boundary())
            .map(|f| {
                let [a, b] = f.vertices;
                (f.vertices, marker(untagged.vertices[a], untagged.vertices[b]))
            })
            .collect();
        Self::build(
            untagged.vertices,
            untagged.cells,
            untagged.refinement_edge,
            markers,
            None,
        )
    }

    fn build(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        boundary_markers: impl IntoIterator<Item = ([usize; 2], Marker)>,
        lineage: Option<Lineage>,
    ) -> Result<Self> {
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let nv = vertices.len();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let bbox_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("cell {c} references a missing vertex")));
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if !(area >= 1e-14 * bbox_area) || area <= 0.0 {
                return Err(Error::DegenerateCell { cell: c, area });
            }
        }

        // (facet, cell, local edge) sorted by facet then cell.
        let mut edges: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * cells.len());
        for (c, cell) in cells.iter().enumerate() {
            for e in 0..3 {
                edges.push((sorted_pair(cell[(e + 1) % 3], cell[(e + 2) % 3]), c, e));
            }
        }
        edges.sort_unstable();

        let mut facets: Vec<Facet> = Vec::with_capacity(edges.len() / 2 + 1);
        let mut cell_facets = vec![[usize::MAX; 3]; cells.len()];
        for (key, c, e) in edges {
            match facets.last_mut() {
                Some(f) if f.vertices == key => {
                    if f.incident.len() == 2 {
                        return Err(Error::NonManifold(key[0], key[1]));
                    }
                    f.incident.push((c, e));
                }
                _ => facets.push(Facet {
                    vertices: key,
                    incident: vec![(c, e)],
                    marker: None,
                }),
            }
            cell_facets[c][e] = facets.len() - 1;
        }

        for (key, marker) in boundary_markers {
            let key = sorted_pair(key[0], key[1]);
            let id = facets
                .binary_search_by(|f| f.vertices.cmp(&key))
                .map_err(|_| Error::InvalidMesh(format!("marker given for unknown facet {key:?}")))?;
            if !facets[id].is_boundary() {
                return Err(Error::InvalidMesh(format!("marker given for interior facet {key:?}")));
            }
            facets[id].marker = Some(marker);
        }
        for f in facets.iter_mut().filter(|f| f.is_boundary() && f.marker.is_none()) {
            f.marker = Some(DEFAULT_MARKER);
        }

        let mut counts = vec![0usize; nv + 1];
        for cell in &cells {
            for &v in cell {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut vertex_cells = vec![0; 3 * cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[fill[v]] = c;
                fill[v] += 1;
            }
        }

        Ok(Self {
            uid: NEXT_MESH_UID.fetch_add(1, Ordering::Relaxed),
            vertices,
            cells,
            refinement_edge,
            facets,
            cell_facets,
            vertex_cell_offsets: counts,
            vertex_cells,
            lineage,
        })
    }

    /// Process-unique identifier of this mesh instance.
    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Local index of the refinement edge of each cell.
    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    /// All facets with their incident `(cell, local edge)` pairs.
    pub fn facet_adjacency(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, id: usize) -> &Facet {
        &self.facets[id]
    }

    /// Facet ids of the three local edges of `cell`.
    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    /// Looks up the facet between two vertices.
    pub fn find_facet(&self, a: usize, b: usize) -> Option<usize> {
        let key = sorted_pair(a, b);
        self.facets.binary_search_by(|f| f.vertices.cmp(&key)).ok()
    }

    /// Cells containing vertex `v`, ascending.
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[self.vertex_cell_offsets[v]..self.vertex_cell_offsets[v + 1]]
    }

    pub fn lineage(&self) -> Option<&Lineage> {
        self.lineage.as_ref()
    }

    /// Boundary facets as `(vertices, marker)`, in facet order.
    pub fn boundary_facets(&self) -> impl Iterator<Item = ([usize; 2], Marker)> + '_ {
        self.facets
            .iter()
            .filter_map(|f| f.marker.map(|m| (f.vertices, m)))
    }

    /// Distinct boundary markers, ascending.
    pub fn markers(&self) -> Vec<Marker> {
        let mut m: Vec<_> = self.boundary_facets().map(|(_, m)| m).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell < self.cells.len() {
            Ok(())
        } else {
            Err(Error::InvalidCell(cell))
        }
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.cell_vertices(cell))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.geometry(c).area).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.geometry(c).min_angle())
            .fold(f64::INFINITY, f64::min)
    }

    /// Barycentric coordinates of `point` with respect to `cell`.
    pub fn barycentric(&self, cell: usize, point: Point) -> Result<[f64; 3]> {
        self.check_cell(cell)?;
        if !point[0].is_finite() || !point[1].is_finite() {
            return Err(Error::InvalidArgument("non-finite point".into()));
        }
        let [a, b, c] = self.cell_vertices(cell);
        let area = signed_area(a, b, c);
        let (lo, hi) = self.bounding_box();
        if area <= 1e-14 * (hi[0] - lo[0]) * (hi[1] - lo[1]) {
            return Err(Error::DegenerateCell { cell, area });
        }
        let l1 = signed_area(point, b, c) / area;
        let l2 = signed_area(a, point, c) / area;
        Ok([l1, l2, 1.0 - l1 - l2])
    }

    /// Checks that every facet has one or two incident cells and that no
    /// vertex hangs on the interior of a boundary facet.
    pub fn audit_conformity(&self) -> Result<()> {
        for f in &self.facets {
            if f.incident.is_empty() || f.incident.len() > 2 {
                return Err(Error::NonManifold(f.vertices[0], f.vertices[1]));
            }
        }
        // Sort vertices by x so only a window has to be scanned per facet.
        let mut order: Vec<usize> = (0..self.num_vertices()).collect();
        order.sort_by(|&i, &j| self.vertices[i][0].total_cmp(&self.vertices[j][0]));
        let xs: Vec<f64> = order.iter().map(|&i| self.vertices[i][0]).collect();
        for f in self.facets.iter().filter(|f| f.is_boundary()) {
            let [a, b] = f.vertices.map(|v| self.vertices[v]);
            let len2 = dist2(a, b);
            let tol = 1e-12 * len2.sqrt();
            let (xmin, xmax) = (a[0].min(b[0]) - tol, a[0].max(b[0]) + tol);
            let start = xs.partition_point(|&x| x < xmin);
            for &v in order[start..].iter().take_while(|&&v| self.vertices[v][0] <= xmax) {
                if f.vertices.contains(&v) {
                    continue;
                }
                let p = self.vertices[v];
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
                if cross.abs() <= tol * len2.sqrt() && t > 1e-12 && t < 1.0 - 1e-12 {
                    return Err(Error::InvalidMesh(format!(
                        "hanging vertex {v} on facet {:?}",
                        f.vertices
                    )));
                }
            }
        }
        Ok(())
    }

    /// Boundary markers keyed by facet, for serialization.
    pub(crate) fn marker_map(&self) -> BTreeMap<[usize; 2], Marker> {
        self.boundary_facets().collect()
    }
}
