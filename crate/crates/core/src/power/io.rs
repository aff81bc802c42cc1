//! `.sites` reading and writing.

use std::fmt::Write as _;
use std::path::Path;

use super::SiteSet;
use crate::error::Result;
use crate::geom::Point3;
use crate::textio::{join, write_file, Lines};

pub fn load_sites(path: &Path) -> Result<SiteSet> {
    read(Lines::open(path)?)
}

pub fn parse_sites(path: &Path, text: &str) -> Result<SiteSet> {
    read(Lines::from_str(path, text))
}

fn read(mut lines: Lines) -> Result<SiteSet> {
    let (header_line, h) = lines.header("sites", 3)?;
    let k = h[0];
    if k == 0 {
        return Err(lines.error(header_line, "site count must be at least 1"));
    }
    let has_weights = lines.flag(header_line, h[1])?;
    let has_masses = lines.flag(header_line, h[2])?;
    let fields = 3 + usize::from(has_weights) + usize::from(has_masses);
    let mut points = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    let mut masses = Vec::with_capacity(k);
    for _ in 0..k {
        let (line, f) = lines.next_fields("a site line")?;
        if f.len() != fields {
            return Err(lines.error(line, format!("expected {fields} fields on a site line, got {}", f.len())));
        }
        let mut vals = f.iter().map(|s| lines.parse_finite(line, s));
        let mut next = || vals.next().expect("field count checked");
        points.push(Point3::new(next()?, next()?, next()?));
        weights.push(if has_weights { next()? } else { 0.0 });
        if has_masses {
            let nu = next()?;
            if nu <= 0.0 {
                return Err(lines.error(line, "prescribed mass must be positive"));
            }
            masses.push(nu);
        }
    }
    lines.expect_end()?;
    Ok(SiteSet { points, weights, masses: has_masses.then_some(masses) })
}

/// Serializes `sites`; the weight column is written only when `with_weights`.
pub fn write_sites(sites: &SiteSet, with_weights: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sites {} {} {}", sites.len(), u8::from(with_weights), u8::from(sites.masses.is_some()));
    for (i, p) in sites.points.iter().enumerate() {
        let mut row = vec![p.x, p.y, p.z];
        if with_weights {
            row.push(sites.weights[i]);
        }
        if let Some(m) = &sites.masses {
            row.push(m[i]);
        }
        let _ = writeln!(out, "{}", join(row));
    }
    out
}

pub fn save_sites(sites: &SiteSet, with_weights: bool, path: &Path) -> Result<()> {
    write_file(path, &write_sites(sites, with_weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_column_layouts() {
        let s = parse_sites(Path::new("a"), "sites 2 0 0\n0 0 0\n1 2 3\n").unwrap();
        assert_eq!(s.weights, vec![0.0, 0.0]);
        assert!(s.masses.is_none());
        let s = parse_sites(Path::new("a"), "sites 2 1 1\n0.25 0.5 0.5 0.1 0.6\n0.75 0.5 0.5 0 0.4\n").unwrap();
        assert_eq!(s.weights, vec![0.1, 0.0]);
        assert_eq!(s.masses, Some(vec![0.6, 0.4]));
        let s = parse_sites(Path::new("a"), "sites 1 0 1\n0 0 0 2\n").unwrap();
        assert_eq!(s.masses, Some(vec![2.0]));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_sites(Path::new("a"), "sites 0 0 0\n").is_err());
        assert!(parse_sites(Path::new("a"), "sites 1 1 0\n0 0 0\n").is_err());
        assert!(parse_sites(Path::new("a"), "sites 1 0 1\n0 0 0 -1\n").is_err());
        assert!(parse_sites(Path::new("a"), "sites 1 0 0\n0 0 0\n1 1 1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let s = SiteSet::new(vec![Point3::new(0.1, 1.0 / 3.0, -2.5e-7), Point3::new(1e10, 0.0, 7.0)])
            .with_weights(vec![0.3, -1.0 / 7.0])
            .with_masses(vec![0.5, 0.25]);
        assert_eq!(parse_sites(Path::new("r"), &write_sites(&s, true)).unwrap(), s);
        let plain = parse_sites(Path::new("r"), &write_sites(&s, false)).unwrap();
        assert_eq!(plain.points, s.points);
        assert_eq!(plain.weights, vec![0.0, 0.0]);
    }
}
