//! Plain-text `mesh2d` format and SVG snapshots.
//!
//! ```text
//! mesh2d 1
//! <nv> <nc> <nbf>
//! <x> <y>            (nv lines)
//! <v0> <v1> <v2>     (nc lines, counter-clockwise)
//! <v0> <v1> <marker> (nbf lines, boundary facets only)
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the same `f64`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Marker, Mesh};
use crate::error::{Error, Result};

pub fn write_msh2(mesh: &Mesh, mut out: impl Write) -> Result<()> {
    let markers = mesh.marker_map();
    let mut s = String::new();
    writeln!(s, "mesh2d 1").unwrap();
    writeln!(s, "{} {} {}", mesh.num_vertices(), mesh.num_cells(), markers.len()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{} {}", p[0], p[1]).unwrap();
    }
    for c in mesh.cells() {
        writeln!(s, "{} {} {}", c[0], c[1], c[2]).unwrap();
    }
    for (f, m) in &markers {
        writeln!(s, "{} {} {}", f[0], f[1], m).unwrap();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_msh2(input: impl BufRead) -> Result<Mesh> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    fn fields<T: std::str::FromStr, const N: usize>(line: usize, s: &str) -> Result<[T; N]> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != N {
            return Err(Error::Parse {
                line,
                message: format!("expected {N} fields, found {}", parts.len()),
            });
        }
        let mut out = Vec::with_capacity(N);
        for p in parts {
            out.push(p.parse::<T>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{p}`"),
            })?);
        }
        Ok(out.try_into().ok().expect("length checked"))
    }

    let (n, header) = next("header")?;
    if header.trim() != "mesh2d 1" {
        return Err(Error::Parse {
            line: n,
            message: format!("bad header `{header}`"),
        });
    }
    let (n, counts) = next("counts")?;
    let [nv, nc, nbf] = fields::<usize, 3>(n, &counts)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next("vertex")?;
        vertices.push(fields::<f64, 2>(n, &l)?);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (n, l) = next("cell")?;
        cells.push(fields::<usize, 3>(n, &l)?);
    }
    let mut markers = Vec::with_capacity(nbf);
    for _ in 0..nbf {
        let (n, l) = next("boundary facet")?;
        let [a, b, m] = fields::<i64, 3>(n, &l)?;
        if a < 0 || b < 0 {
            return Err(Error::Parse {
                line: n,
                message: "negative vertex index".into(),
            });
        }
        markers.push(([a as usize, b as usize], m as Marker));
    }
    Mesh::new(vertices, cells, markers)
}

/// SVG 1.1 drawing with one `<path>` per cell. The view box is the mesh
/// bounding box; `y` is mirrored so the picture is upright.
pub fn write_svg(mesh: &Mesh, mut out: impl Write) -> Result<()> {
    let (lo, hi) = mesh.bounding_box();
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let stroke = 1e-3 * w.max(h);
    let flip = |y: f64| lo[1] + hi[1] - y;
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        lo[0], lo[1], w, h
    )
    .unwrap();
    writeln!(s, r#"<g fill="none" stroke="black" stroke-width="{stroke}">"#).unwrap();
    for c in 0..mesh.num_cells() {
        let [a, b, d] = mesh.cell_vertices(c);
        writeln!(
            s,
            r#"<path d="M {} {} L {} {} L {} {} Z"/>"#,
            a[0],
            flip(a[1]),
            b[0],
            flip(b[1]),
            d[0],
            flip(d[1])
        )
        .unwrap();
    }
    writeln!(s, "</g>\n</svg>").unwrap();
    out.write_all(s.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_text_for_single_triangle() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.5]], vec![[0, 1, 2]], [([0, 1], 3)]).unwrap();
        let mut buf = Vec::new();
        write_msh2(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "mesh2d 1\n3 1 3\n0 0\n1 0\n0 0.5\n0 1 2\n0 1 3\n0 2 0\n1 2 0\n");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "mesh2d 1\n3 1 0\n0 0\n1 x\n0 1\n0 1 2\n";
        match read_msh2(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_msh2("mesh3d 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_msh2("mesh2d 1\n3 1 0\n0 0\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn svg_has_one_path_per_cell() {
        let m = Mesh::l_shape(2).unwrap();
        let mut buf = Vec::new();
        write_svg(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("<path").count(), m.num_cells());
        assert!(text.contains(r#"viewBox="-1 -1 2 2""#));
    }

    proptest! {
        #[test]
        fn msh2_round_trip_is_exact(n in 1usize..5, amp in 0.0f64..0.3, seed in 0u64..1000, refine in 0usize..3) {
            let mut m = Mesh::perturbed_unit_square(n, amp, seed).unwrap();
            for _ in 0..refine {
                m = m.mark_and_refine(&[0]).unwrap();
            }
            let mut buf = Vec::new();
            write_msh2(&m, &mut buf).unwrap();
            let back = read_msh2(buf.as_slice()).unwrap();
            prop_assert_eq!(back.vertices(), m.vertices());
            prop_assert_eq!(back.cells(), m.cells());
            prop_assert_eq!(back.marker_map(), m.marker_map());
        }
    }
}
