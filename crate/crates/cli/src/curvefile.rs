//! Plain-text curve files: one `x y` pair per line, closed implicitly.
//!
//! A blank line starts the next front; lines beginning with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use fmcf_core::{ClosedCurve, Vec2};

use crate::CliError;

pub fn parse_curves(text: &str, origin: &str) -> Result<Vec<ClosedCurve>, CliError> {
    let mut fronts = Vec::new();
    let mut nodes = Vec::new();
    let mut flush = |nodes: &mut Vec<Vec2>, line: usize| -> Result<(), CliError> {
        if nodes.is_empty() {
            return Ok(());
        }
        let curve = ClosedCurve::new(std::mem::take(nodes)).map_err(|e| CliError::Usage(format!("{origin}: front ending before line {line}: {e}")))?;
        fronts.push(curve);
        Ok(())
    };
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            flush(&mut nodes, k + 1)?;
            continue;
        }
        let mut parts = line.split_whitespace();
        let coord = |v: Option<&str>| -> Result<f64, CliError> {
            let v = v.ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `x y`", k + 1)))?;
            let x: f64 = v.parse().map_err(|_| CliError::Usage(format!("{origin}:{}: `{v}` is not a number", k + 1)))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(CliError::Usage(format!("{origin}:{}: coordinate `{v}` is not finite", k + 1)))
            }
        };
        let (x, y) = (coord(parts.next())?, coord(parts.next())?);
        if parts.next().is_some() {
            return Err(CliError::Usage(format!("{origin}:{}: expected exactly two columns", k + 1)));
        }
        nodes.push(Vec2::new(x, y));
    }
    flush(&mut nodes, text.lines().count() + 1)?;
    if fronts.is_empty() {
        return Err(CliError::Usage(format!("{origin}: no curve nodes")));
    }
    Ok(fronts)
}

pub fn read_curves(path: &Path) -> Result<Vec<ClosedCurve>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("curve: cannot read {}: {e}", path.display())))?;
    parse_curves(&text, &path.display().to_string())
}

/// Inverse of [`parse_curves`]; `{}` formatting of f64 round-trips exactly.
pub fn format_curves(fronts: &[ClosedCurve]) -> String {
    let mut out = String::new();
    for (k, f) in fronts.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for p in f.nodes() {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
    }
    out
}
