//! Newest-vertex bisection with recursive closure.
//!
//! A marked cell forces its refinement edge to be bisected. Closure then
//! marks the refinement edge of every cell that has any marked edge, until a
//! fixed point is reached. Each cell is split along its refinement edge and
//! the two children (whose refinement edges are the parent's remaining edges)
//! are split again if those edges are marked. Every marked edge is therefore
//! bisected from both sides and the result is conforming.

use std::collections::HashMap;

use super::{sorted_pair, Lineage, Mesh, Point};
use crate::error::{Error, Result};

impl Mesh {
    /// Refines every cell in `marked` at least once, plus whatever closure
    /// requires. An empty marking returns a copy with identity lineage.
    pub fn mark_and_refine(&self, marked: &[usize]) -> Result<Mesh> {
        let mut edge_marked = vec![false; self.num_facets()];
        let mut stack = Vec::new();
        for &c in marked {
            self.check_cell(c)?;
            let f = self.cell_facets(c)[self.refinement_edge[c] as usize];
            if !edge_marked[f] {
                edge_marked[f] = true;
                stack.push(f);
            }
        }
        while let Some(f) = stack.pop() {
            for &(c, _) in &self.facet(f).incident {
                let r = self.cell_facets(c)[self.refinement_edge[c] as usize];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    stack.push(r);
                }
            }
        }
        self.bisect_marked_edges(&edge_marked)
    }

    /// Bisects every edge: each cell is replaced by four children.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        self.bisect_marked_edges(&vec![true; self.num_facets()])
    }

    fn bisect_marked_edges(&self, edge_marked: &[bool]) -> Result<Mesh> {
        let mut vertices: Vec<Point> = self.vertices.clone();
        let mut midpoints: HashMap<[usize; 2], usize> = HashMap::new();
        for (f, facet) in self.facets.iter().enumerate() {
            if edge_marked[f] {
                let [a, b] = facet.vertices.map(|v| self.vertices[v]);
                midpoints.insert(facet.vertices, vertices.len());
                vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }

        let mut cells = Vec::with_capacity(self.num_cells() + 2 * midpoints.len());
        let mut refinement_edge = Vec::with_capacity(cells.capacity());
        let mut parent_cell = Vec::with_capacity(cells.capacity());
        for (c, &tri) in self.cells.iter().enumerate() {
            let mut out = Vec::new();
            bisect(tri, self.refinement_edge[c], &midpoints, &mut out);
            for (child, r) in out {
                cells.push(child);
                refinement_edge.push(r);
                parent_cell.push(c);
            }
        }

        let mut markers = Vec::new();
        for (key, marker) in self.boundary_facets() {
            match midpoints.get(&key) {
                Some(&m) => {
                    markers.push(([key[0], m], marker));
                    markers.push(([m, key[1]], marker));
                }
                None => markers.push((key, marker)),
            }
        }

        let lineage = Lineage {
            parent_uid: self.uid,
            parent_cell,
        };
        Mesh::build(vertices, cells, refinement_edge, markers, Some(lineage)).map_err(|e| {
            Error::InvalidMesh(format!("refinement produced an invalid mesh: {e}"))
        })
    }
}

fn bisect(
    tri: [usize; 3],
    r: u8,
    midpoints: &HashMap<[usize; 2], usize>,
    out: &mut Vec<([usize; 3], u8)>,
) {
    let r = r as usize;
    let apex = tri[r];
    let p = tri[(r + 1) % 3];
    let q = tri[(r + 2) % 3];
    match midpoints.get(&sorted_pair(p, q)) {
        Some(&m) => {
            // The new vertex is opposite the refinement edge of both children.
            bisect([apex, p, m], 2, midpoints, out);
            bisect([apex, m, q], 1, midpoints, out);
        }
        None => out.push((tri, r as u8)),
    }
}
