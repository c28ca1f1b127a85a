//! Structured mesh generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Marker, Mesh, Point};
use crate::error::{Error, Result};

/// Markers used by [`Mesh::rectangle`] and [`Mesh::unit_square`].
pub mod square_markers {
    use super::Marker;
    pub const LEFT: Marker = 1;
    pub const RIGHT: Marker = 2;
    pub const BOTTOM: Marker = 3;
    pub const TOP: Marker = 4;
}

/// Markers used by [`Mesh::l_shape`].
pub mod l_shape_markers {
    use super::Marker;
    /// The segment `x = -1`.
    pub const LEFT: Marker = 1;
    /// Every other boundary facet.
    pub const OTHER: Marker = 2;
}

impl Mesh {
    /// `nx × ny` rectangles, each split along its lower-left to upper-right
    /// diagonal. Sides are tagged with [`square_markers`].
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::InvalidArgument("empty rectangle".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    x0 + (x1 - x0) * i as f64 / nx as f64,
                    y0 + (y1 - y0) * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                cells.push([a, b, d]);
                cells.push([a, d, c]);
            }
        }
        let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
        Self::with_boundary_fn(vertices, cells, move |p, q| {
            let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
            if (mid[0] - x0).abs() < 1e-9 * hx {
                square_markers::LEFT
            } else if (mid[0] - x1).abs() < 1e-9 * hx {
                square_markers::RIGHT
            } else if (mid[1] - y0).abs() < 1e-9 * hy {
                square_markers::BOTTOM
            } else {
                square_markers::TOP
            }
        })
    }

    /// The unit square with `n × n` subdivisions (`2 n²` triangles).
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle(0.0, 1.0, 0.0, 1.0, n, n)
    }

    /// Unit square with interior vertices displaced by up to
    /// `amplitude × h` in each direction, deterministically from `seed`.
    pub fn perturbed_unit_square(n: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let base = Self::unit_square(n)?;
        let h = 1.0 / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vertices: Vec<Point> = base
            .vertices()
            .iter()
            .map(|&p| {
                let (dx, dy): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let interior = p.iter().all(|&c| c > 1e-12 && c < 1.0 - 1e-12);
                if interior {
                    [p[0] + amplitude * h * dx, p[1] + amplitude * h * dy]
                } else {
                    p
                }
            })
            .collect();
        let markers: Vec<_> = base.boundary_facets().collect();
        Self::new(vertices, base.cells().to_vec(), markers)
    }

    /// The L-shaped domain `(-1,1)² \ [0,1)×(-1,0]` built from squares of
    /// side `1/n`, each split in two. The segment `x = -1` carries
    /// [`l_shape_markers::LEFT`], the rest [`l_shape_markers::OTHER`].
    pub fn l_shape(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let m = 2 * n;
        let h = 1.0 / n as f64;
        let coord = |k: usize| -1.0 + k as f64 * h;
        let inside = |i: usize, j: usize| !(i >= n && j < n);
        let mut index = vec![usize::MAX; (m + 1) * (m + 1)];
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| {
            let k = j * (m + 1) + i;
            if index[k] == usize::MAX {
                index[k] = vertices.len();
                vertices.push([coord(i), coord(j)]);
            }
            index[k]
        };
        for j in 0..m {
            for i in 0..m {
                if !inside(i, j) {
                    continue;
                }
                let a = vid(i, j, &mut vertices);
                let b = vid(i + 1, j, &mut vertices);
                let c = vid(i, j + 1, &mut vertices);
                let d = vid(i + 1, j + 1, &mut vertices);
                cells.push([a, b, d]);
                cells.push([a, d, c]);
            }
        }
        Self::with_boundary_fn(vertices, cells, move |p, q| {
            if (p[0] + 1.0).abs() < 1e-12 && (q[0] + 1.0).abs() < 1e-12 {
                l_shape_markers::LEFT
            } else {
                l_shape_markers::OTHER
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts_and_markers() {
        let m = Mesh::unit_square(4).unwrap();
        assert_eq!(m.num_cells(), 32);
        assert_eq!(m.num_vertices(), 25);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        let left: Vec<_> = m.boundary_facets().filter(|&(_, k)| k == square_markers::LEFT).collect();
        assert_eq!(left.len(), 4);
        for (f, _) in left {
            assert!(f.iter().all(|&v| m.vertices()[v][0] == 0.0));
        }
    }

    #[test]
    fn l_shape_area_and_markers() {
        let m = Mesh::l_shape(2).unwrap();
        assert!((m.total_area() - 3.0).abs() < 1e-14);
        assert_eq!(m.num_cells(), 24);
        let left = m.boundary_facets().filter(|&(_, k)| k == l_shape_markers::LEFT).count();
        assert_eq!(left, 4);
        m.audit_conformity().unwrap();
    }

    #[test]
    fn perturbed_square_is_deterministic_and_valid() {
        let a = Mesh::perturbed_unit_square(5, 0.25, 7).unwrap();
        let b = Mesh::perturbed_unit_square(5, 0.25, 7).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert!((a.total_area() - 1.0).abs() < 1e-14);
        assert_ne!(a.vertices(), Mesh::unit_square(5).unwrap().vertices());
    }
}
