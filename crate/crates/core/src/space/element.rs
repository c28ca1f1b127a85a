//! Lagrange elements on the reference triangle.
//!
//! Node order: the three vertices, then `p - 1` nodes on each local edge `e`
//! (running from vertex `(e+1)%3` to `(e+2)%3`), then interior lattice points.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poly::Poly2;

/// Highest element degree. Degree 4 exists only as the enriched space for
/// cubic primal spaces.
pub const MAX_ELEMENT_DEGREE: usize = 4;

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug)]
pub struct LagrangeElement {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    basis: Vec<Poly2>,
    edge_nodes: [Vec<usize>; 3],
}

/// Basis values, reference gradients and reference Hessians at a set of
/// points, indexed `q * n + i`.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub n: usize,
    pub nq: usize,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

impl Tabulation {
    pub fn of(polys: &[Poly2], points: &[[f64; 2]]) -> Self {
        let n = polys.len();
        let mut t = Tabulation {
            n,
            nq: points.len(),
            values: Vec::with_capacity(n * points.len()),
            grads: Vec::with_capacity(n * points.len()),
            hessians: Vec::with_capacity(n * points.len()),
        };
        for &x in points {
            for p in polys {
                let (v, g, h) = p.eval_all(x);
                t.values.push(v);
                t.grads.push(g);
                t.hessians.push(h);
            }
        }
        t
    }
}

/// Number of basis functions of the degree-`p` Lagrange element.
pub fn dim_p(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

fn reference_nodes(p: usize) -> (Vec<[f64; 2]>, [Vec<usize>; 3]) {
    let mut nodes: Vec<[f64; 2]> = REF_VERTICES.to_vec();
    let mut edge_nodes: [Vec<usize>; 3] = Default::default();
    for e in 0..3 {
        let (a, b) = (REF_VERTICES[(e + 1) % 3], REF_VERTICES[(e + 2) % 3]);
        edge_nodes[e].push((e + 1) % 3);
        for k in 1..p {
            let t = k as f64 / p as f64;
            edge_nodes[e].push(nodes.len());
            nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        edge_nodes[e].push((e + 2) % 3);
    }
    for i in 1..p {
        for j in 1..p - i {
            nodes.push([i as f64 / p as f64, j as f64 / p as f64]);
        }
    }
    (nodes, edge_nodes)
}

fn build(p: usize) -> LagrangeElement {
    let (nodes, edge_nodes) = reference_nodes(p);
    let n = nodes.len();
    let monomials: Vec<(usize, usize)> = (0..=p).flat_map(|i| (0..=p - i).map(move |j| (i, j))).collect();
    let v = DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = monomials[c];
        nodes[r][0].powi(i as i32) * nodes[r][1].powi(j as i32)
    });
    let inv = v.try_inverse().expect("Lagrange nodes are unisolvent");
    let basis = (0..n)
        .map(|k| {
            let mut poly = Poly2::zero(p);
            for (c, &(i, j)) in monomials.iter().enumerate() {
                poly.set(i, j, inv[(c, k)]);
            }
            poly
        })
        .collect();
    LagrangeElement {
        degree: p,
        nodes,
        basis,
        edge_nodes,
    }
}

/// The cached Lagrange element of the given degree.
pub fn lagrange(degree: usize) -> Result<&'static LagrangeElement> {
    static ELEMENTS: [OnceLock<LagrangeElement>; MAX_ELEMENT_DEGREE] = [const { OnceLock::new() }; MAX_ELEMENT_DEGREE];
    if !(1..=MAX_ELEMENT_DEGREE).contains(&degree) {
        return Err(Error::Unsupported(format!("Lagrange degree {degree}")));
    }
    Ok(ELEMENTS[degree - 1].get_or_init(|| build(degree)))
}

impl LagrangeElement {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn basis(&self) -> &[Poly2] {
        &self.basis
    }

    /// Local nodes on edge `e`, from vertex `(e+1)%3` to `(e+2)%3`
    /// inclusive.
    pub fn edge_nodes(&self, e: usize) -> &[usize] {
        &self.edge_nodes[e]
    }

    pub fn num_interior(&self) -> usize {
        self.dim() - 3 * self.degree
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        Tabulation::of(&self.basis, points)
    }
}
