//! `.weights` reading and writing.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::textio::{write_file, Lines};

pub fn load_weights(path: &Path) -> Result<Vec<f64>> {
    read(Lines::open(path)?)
}

pub fn parse_weights(path: &Path, text: &str) -> Result<Vec<f64>> {
    read(Lines::from_str(path, text))
}

fn read(mut lines: Lines) -> Result<Vec<f64>> {
    let (_, h) = lines.header("weights", 1)?;
    let mut out = Vec::with_capacity(h[0]);
    for _ in 0..h[0] {
        let (line, f) = lines.next_fields("a weight")?;
        if f.len() != 1 {
            return Err(lines.error(line, "expected one weight per line"));
        }
        out.push(lines.parse_finite(line, &f[0])?);
    }
    lines.expect_end()?;
    Ok(out)
}

pub fn write_weights(weights: &[f64]) -> String {
    let mut out = format!("weights {}\n", weights.len());
    for w in weights {
        let _ = writeln!(out, "{w}");
    }
    out
}

pub fn save_weights(weights: &[f64], path: &Path) -> Result<()> {
    write_file(path, &write_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = vec![0.1, -1.0 / 3.0, 1e-300, 12345.678];
        assert_eq!(parse_weights(Path::new("w"), &write_weights(&w)).unwrap(), w);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        assert!(parse_weights(Path::new("w"), "weights 2\n0.1\n").is_err());
        assert!(parse_weights(Path::new("w"), "weights 1\n0.1\n0.2\n").is_err());
    }
}
