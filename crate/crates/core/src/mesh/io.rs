//! `.tetmesh` reading and writing.

use std::fmt::Write as _;
use std::path::Path;

use super::{MeshDefect, TetMesh};
use crate::error::Result;
use crate::geom::Point3;
use crate::textio::{join, write_file, Lines};

pub fn load_mesh(path: &Path) -> Result<TetMesh> {
    read(Lines::open(path)?)
}

/// Parses `.tetmesh` text; `path` is only used in error messages.
pub fn parse_mesh(path: &Path, text: &str) -> Result<TetMesh> {
    read(Lines::from_str(path, text))
}

fn read(mut lines: Lines) -> Result<TetMesh> {
    let (header_line, h) = lines.header("tetmesh", 3)?;
    let (nv, nt) = (h[0], h[1]);
    let has_density = lines.flag(header_line, h[2])?;
    let per_vertex = if has_density { 4 } else { 3 };

    let mut vertices = Vec::with_capacity(nv);
    let mut vertex_lines = Vec::with_capacity(nv);
    let mut density = has_density.then(|| Vec::with_capacity(nv));
    for _ in 0..nv {
        let (line, f) = lines.next_fields("a vertex line")?;
        if f.len() != per_vertex {
            return Err(lines.error(line, format!("expected {per_vertex} fields on a vertex line, got {}", f.len())));
        }
        let x = lines.parse_finite(line, &f[0])?;
        let y = lines.parse_finite(line, &f[1])?;
        let z = lines.parse_finite(line, &f[2])?;
        vertices.push(Point3::new(x, y, z));
        vertex_lines.push(line);
        if let Some(d) = &mut density {
            let rho = lines.parse_finite(line, &f[3])?;
            if rho < 0.0 {
                return Err(lines.error(line, "negative density"));
            }
            d.push(rho);
        }
    }

    let mut tets = Vec::with_capacity(nt);
    let mut tet_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = lines.next_fields("a tetrahedron line")?;
        if f.len() != 4 {
            return Err(lines.error(line, format!("expected 4 vertex indices, got {}", f.len())));
        }
        let mut tet = [0usize; 4];
        for (slot, field) in tet.iter_mut().zip(&f) {
            *slot = lines.parse(line, field)?;
            if *slot >= nv {
                return Err(lines.error(line, format!("vertex index {} out of range (mesh has {nv} vertices)", *slot)));
            }
        }
        tets.push(tet);
        tet_lines.push(line);
    }
    lines.expect_end()?;

    TetMesh::assemble(vertices, tets, density).map_err(|d| {
        let line = match d {
            MeshDefect::Degenerate(t) | MeshDefect::IndexOutOfRange { tet: t, .. } => tet_lines[t],
            MeshDefect::VertexNotFinite(v) | MeshDefect::DensityInvalid(v) => vertex_lines[v],
            MeshDefect::Empty | MeshDefect::DensityCount => header_line,
        };
        lines.error(line, d.to_string())
    })
}

pub fn write_mesh(mesh: &TetMesh) -> String {
    let mut out = String::new();
    let density = mesh.density();
    let _ = writeln!(out, "tetmesh {} {} {}", mesh.num_vertices(), mesh.num_tets(), u8::from(density.is_some()));
    for (v, p) in mesh.vertices().iter().enumerate() {
        match density {
            Some(d) => {
                let _ = writeln!(out, "{}", join([p.x, p.y, p.z, d[v]]));
            }
            None => {
                let _ = writeln!(out, "{}", join([p.x, p.y, p.z]));
            }
        }
    }
    for t in mesh.tets() {
        let _ = writeln!(out, "{}", join(t));
    }
    out
}

pub fn save_mesh(mesh: &TetMesh, path: &Path) -> Result<()> {
    write_file(path, &write_mesh(mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mesh::generators::{ball, unit_cube};

    const CUBE: &str = "# unit cube\ntetmesh 8 5 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n\
                        1 2 4 7\n0 1 2 4\n3 1 2 7\n5 1 4 7\n6 2 4 7\n";

    #[test]
    fn parses_unit_cube() {
        let m = parse_mesh(Path::new("cube.tetmesh"), CUBE).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (8, 5));
        assert!((m.measure().total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_density_scales_measure() {
        let text: String = CUBE
            .replace("tetmesh 8 5 0", "tetmesh 8 5 1")
            .lines()
            .enumerate()
            .map(|(i, l)| if (2..10).contains(&i) { format!("{l} 2.0\n") } else { format!("{l}\n") })
            .collect();
        let m = parse_mesh(Path::new("c.tetmesh"), &text).unwrap();
        assert!((m.measure().total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let text = CUBE.replace("6 2 4 7", "6 2 4 99");
        match parse_mesh(Path::new("bad.tetmesh"), &text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 15);
                assert!(message.contains("99"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_volume_tet_names_line() {
        let text = CUBE.replace("6 2 4 7", "0 1 3 2");
        match parse_mesh(Path::new("flat.tetmesh"), &text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 15),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_truncated() {
        assert!(parse_mesh(Path::new("x"), &CUBE.replace("1 1 1\n", "1 nan 1\n")).is_err());
        assert!(parse_mesh(Path::new("x"), "tetmesh 8 5 0\n0 0 0\n").is_err());
        assert!(parse_mesh(Path::new("x"), "tetmesh 8 5 2\n").is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = ball(3, 0.7, Point3::new(0.1, -0.2, 1.0 / 3.0));
        let text = write_mesh(&m);
        let back = parse_mesh(Path::new("r"), &text).unwrap();
        assert_eq!(back, m);
        let cube = unit_cube();
        assert_eq!(parse_mesh(Path::new("r"), &write_mesh(&cube)).unwrap(), cube);
    }
}
