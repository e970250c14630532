//! File formats: boundary and point CSVs, boundary comparison, run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boundary::{Boundary, BoundaryCurve};
use crate::error::{Error, Result};

/// Decimal text with 12 significant digits, trailing zeros removed.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 {
            "0".to_string()
        } else {
            v.to_string()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = 11 - exp;
    if !(0..=40).contains(&decimals) {
        return format!("{v:.11e}");
    }
    let mut s = format!("{:.*}", decimals as usize, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// CSV text with header `x,b` and one row per node.
pub fn boundary_to_csv(b: &Boundary) -> String {
    let mut out = String::from("x,b\n");
    for (x, v) in b.xs().iter().zip(b.bs()) {
        let _ = writeln!(out, "{},{}", format_sig12(*x), format_sig12(*v));
    }
    out
}

pub fn write_boundary_csv(path: &Path, b: &Boundary) -> Result<()> {
    fs::write(path, boundary_to_csv(b))?;
    Ok(())
}

/// Parses numeric CSV rows under an exact header; `origin` is used in errors.
fn parse_rows(text: &str, origin: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((i, first)) = lines.next() else {
        return Err(err(
            1,
            format!("empty file, expected header '{}'", header.join(",")),
        ));
    };
    let got: Vec<&str> = first.split(',').map(str::trim).collect();
    if got != header {
        return Err(err(
            i + 1,
            format!(
                "expected header '{}', found '{}'",
                header.join(","),
                first.trim()
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(err(
                i + 1,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| err(i + 1, format!("'{f}' is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(err(i + 1, "values must be finite".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_boundary_csv(text: &str, origin: &Path) -> Result<Boundary> {
    let rows = parse_rows(text, origin, &["x", "b"])?;
    let (xs, bs) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    Boundary::from_nodes(xs, bs).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })
}

pub fn read_boundary_csv(path: &Path) -> Result<Boundary> {
    parse_boundary_csv(&fs::read_to_string(path)?, path)
}

/// Evaluation points from a CSV with header `x,y`.
pub fn parse_points_csv(text: &str, origin: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = parse_rows(text, origin, &["x", "y"])?;
    for (k, r) in rows.iter().enumerate() {
        if r[0] < 0.0 || r[1] < 0.0 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: k + 2,
                msg: "prices must be nonnegative".into(),
            });
        }
    }
    Ok(rows.into_iter().map(|r| (r[0], r[1])).collect())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    parse_points_csv(&fs::read_to_string(path)?, path)
}

/// Tolerances of a boundary comparison: a point passes when
/// `|a - b| <= max(relative * max(|a|, |b|), absolute)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareTolerance {
    pub relative: f64,
    pub absolute: f64,
    /// Compare on `[0, range_fraction * min(x_end_a, x_end_b)]`.
    pub range_fraction: f64,
}

impl Default for CompareTolerance {
    fn default() -> Self {
        CompareTolerance {
            relative: 0.05,
            absolute: 0.0,
            range_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub range: (f64, f64),
    pub points: usize,
    pub sup_abs_diff: f64,
    pub mean_abs_diff: f64,
    pub sup_rel_diff: f64,
    /// Extremes of the signed gap `a - b`.
    pub min_gap: f64,
    pub max_gap: f64,
    pub worst_x: f64,
    pub failures: usize,
    pub tolerance: CompareTolerance,
    pub pass: bool,
}

/// Compares two boundaries on the union of their grids (plus 200 uniform
/// points) over the comparison range.
pub fn compare_boundaries<A: BoundaryCurve + ?Sized, B: BoundaryCurve + ?Sized>(
    a: &A,
    a_end: f64,
    b: &B,
    b_end: f64,
    tol: &CompareTolerance,
) -> Result<CompareReport> {
    if !(tol.relative >= 0.0
        && tol.absolute >= 0.0
        && tol.range_fraction > 0.0
        && tol.range_fraction <= 1.0)
    {
        return Err(Error::Param(format!(
            "invalid comparison tolerances {tol:?}"
        )));
    }
    let end = tol.range_fraction * a_end.min(b_end);
    let mut xs: Vec<f64> = a
        .kinks()
        .into_iter()
        .chain(b.kinks())
        .filter(|&x| (0.0..=end).contains(&x))
        .collect();
    xs.extend((0..=200).map(|k| end * k as f64 / 200.0));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut rep = CompareReport {
        range: (0.0, end),
        points: xs.len(),
        sup_abs_diff: 0.0,
        mean_abs_diff: 0.0,
        sup_rel_diff: 0.0,
        min_gap: f64::INFINITY,
        max_gap: f64::NEG_INFINITY,
        worst_x: 0.0,
        failures: 0,
        tolerance: *tol,
        pass: true,
    };
    let mut worst_excess = f64::NEG_INFINITY;
    for &x in &xs {
        let (va, vb) = (a.eval(x), b.eval(x));
        let gap = va - vb;
        let diff = gap.abs();
        let scale = va.abs().max(vb.abs());
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        let allowed = (tol.relative * scale).max(tol.absolute);
        rep.sup_abs_diff = rep.sup_abs_diff.max(diff);
        rep.mean_abs_diff += diff / xs.len() as f64;
        rep.sup_rel_diff = rep.sup_rel_diff.max(rel);
        rep.min_gap = rep.min_gap.min(gap);
        rep.max_gap = rep.max_gap.max(gap);
        if diff - allowed > worst_excess {
            worst_excess = diff - allowed;
            rep.worst_x = x;
        }
        if diff > allowed {
            rep.failures += 1;
        }
    }
    rep.pass = rep.failures == 0;
    Ok(rep)
}

/// Provenance record written next to CLI outputs as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub flags: BTreeMap<String, String>,
    /// Verbatim text of the configuration file.
    pub config: String,
    pub seed: Option<u64>,
    /// File name to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: Option<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            flags: BTreeMap::new(),
            config,
            seed,
            artifacts: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    /// Records the digest of a written file under its file name.
    pub fn add_artifact(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.artifacts.insert(name, sha256_file(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(100.36126343151007), "100.361263432");
        assert_eq!(format_sig12(56.00000000000001), "56");
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(format_sig12(1234567.0), "1234567");
    }

    #[test]
    fn csv_round_trip() {
        let b =
            Boundary::from_nodes(vec![0.0, 1.5, 100.361263432], vec![56.0, 55.25, 0.0]).unwrap();
        let text = boundary_to_csv(&b);
        assert!(text.starts_with("x,b\n0,56\n"));
        assert_eq!(parse_boundary_csv(&text, Path::new("b.csv")).unwrap(), b);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let origin = Path::new("b.csv");
        match parse_boundary_csv("x,b\n0,56\n1,abc\n", origin) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_boundary_csv("x,y\n0,1\n", origin) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_boundary_csv("x,b\n0,56\n1,2,3\n", origin) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_points_csv("x,y\n1,-2\n", origin).is_err());
        assert_eq!(
            parse_points_csv("x,y\n1,2\n\n3,4\n", origin).unwrap(),
            vec![(1.0, 2.0), (3.0, 4.0)]
        );
    }

    #[test]
    fn comparing_a_boundary_with_itself() {
        let b = Boundary::from_nodes(vec![0.0, 50.0, 100.0], vec![56.0, 14.0, 0.0]).unwrap();
        let r = compare_boundaries(&b, 100.0, &b, 100.0, &CompareTolerance::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.sup_abs_diff, 0.0);
        assert_eq!(r.mean_abs_diff, 0.0);
    }

    #[test]
    fn comparison_detects_a_gap() {
        let a = Boundary::from_nodes(vec![0.0, 100.0], vec![50.0, 0.0]).unwrap();
        let b = Boundary::from_nodes(vec![0.0, 100.0], vec![40.0, 0.0]).unwrap();
        let r = compare_boundaries(
            &a,
            100.0,
            &b,
            100.0,
            &CompareTolerance {
                range_fraction: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!r.pass);
        assert!((r.max_gap - 10.0).abs() < 1e-12 && r.min_gap > 0.0);
        assert_eq!(r.range, (0.0, 50.0));
    }

    #[test]
    fn manifest_hashes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        fs::write(&f, "x,b\n").unwrap();
        let mut m = RunManifest::new("solve", String::new(), Some(1));
        m.add_artifact(&f).unwrap();
        assert_eq!(m.artifacts["a.csv"], sha256_hex(b"x,b\n"));
        let path = m.write(dir.path()).unwrap();
        assert!(fs::read_to_string(path).unwrap().contains("\"a.csv\""));
    }
}
