//! `.morph` reading and writing, and frame export as `.tetmesh` text.

use std::fmt::Write as _;
use std::path::Path;

use super::{Frame, MorphMesh};
use crate::error::Result;
use crate::geom::Point3;
use crate::textio::{join, write_file, Lines};

pub fn load_morph(path: &Path) -> Result<MorphMesh> {
    read(Lines::open(path)?)
}

pub fn parse_morph(path: &Path, text: &str) -> Result<MorphMesh> {
    read(Lines::from_str(path, text))
}

fn read(mut lines: Lines) -> Result<MorphMesh> {
    let (_, h) = lines.header("morph", 2)?;
    let (k, nt) = (h[0], h[1]);
    let mut start = Vec::with_capacity(k);
    let mut end = Vec::with_capacity(k);
    for _ in 0..k {
        let (line, f) = lines.next_fields("a vertex")?;
        if f.len() != 6 {
            return Err(lines.error(line, "expected `x0 y0 z0 x1 y1 z1`"));
        }
        let v = f.iter().map(|s| lines.parse_finite(line, s)).collect::<Result<Vec<_>>>()?;
        start.push(Point3::new(v[0], v[1], v[2]));
        end.push(Point3::new(v[3], v[4], v[5]));
    }
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = lines.next_fields("a tetrahedron")?;
        if f.len() != 4 {
            return Err(lines.error(line, "expected four vertex indices"));
        }
        let mut tet = [0usize; 4];
        for (slot, s) in tet.iter_mut().zip(&f) {
            *slot = lines.parse(line, s)?;
            if *slot >= k {
                return Err(lines.error(line, format!("vertex index {slot} out of range")));
            }
        }
        tets.push(tet);
    }
    lines.expect_end()?;
    Ok(MorphMesh { start, end, tets })
}

pub fn write_morph(morph: &MorphMesh) -> String {
    let mut out = format!("morph {} {}\n", morph.len(), morph.tets.len());
    for (a, b) in morph.start.iter().zip(&morph.end) {
        let _ = writeln!(out, "{}", join([a.x, a.y, a.z, b.x, b.y, b.z]));
    }
    for t in &morph.tets {
        let _ = writeln!(out, "{}", join(t));
    }
    out
}

pub fn save_morph(morph: &MorphMesh, path: &Path) -> Result<()> {
    write_file(path, &write_morph(morph))
}

/// A frame in the `.tetmesh` format, without density.
pub fn write_frame(frame: &Frame) -> String {
    let mut out = format!("tetmesh {} {} 0\n", frame.vertices.len(), frame.tets.len());
    for p in &frame.vertices {
        let _ = writeln!(out, "{}", join([p.x, p.y, p.z]));
    }
    for t in &frame.tets {
        let _ = writeln!(out, "{}", join(t));
    }
    out
}
