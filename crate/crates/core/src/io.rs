//! Plain-text serialization: point clouds, calibration tables, stencil
//! dumps, and Matrix Market output.

use crate::calibrate::{Band, CalibrationTable};
use crate::domain::Domain;
use crate::geometry::Point;
use crate::pointcloud::{compute_kappa, compute_separation, PointCloud};
use crate::solver::Csr;
use crate::stencil::Stencil;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing or malformed header: {0}")]
    BadHeader(String),
    #[error("line {line}: {msg}")]
    BadLine { line: usize, msg: String },
    #[error("expected {expected} points, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: file has d={file}, expected d={expected}")]
    DimMismatch { file: usize, expected: usize },
    #[error("invalid calibration table: {0}")]
    BadCalibration(String),
}

/// Cloud text format: header `# d=<d> N=<interior> M=<total> h=<h>`,
/// then one point per line, coordinates with 17 significant digits.
pub fn write_cloud<const D: usize>(cloud: &PointCloud<D>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# d={} N={} M={} h={:.17e}\n",
        D,
        cloud.n_interior,
        cloud.n_total(),
        cloud.h
    ));
    for p in &cloud.points {
        let words: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

/// Raw contents of a cloud file, before domain-dependent quantities
/// (separation, boundary clearance) are reconstructed.
#[derive(Debug, Clone)]
pub struct RawCloud {
    pub dim: usize,
    pub n_interior: usize,
    pub n_total: usize,
    pub h: f64,
    /// Flattened coordinates, `dim` per point.
    pub coords: Vec<f64>,
}

pub fn parse_cloud(text: &str) -> Result<RawCloud, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| IoError::BadHeader("empty input".into()))?;
    let header = header.trim();
    if !header.starts_with('#') {
        return Err(IoError::BadHeader("first line must start with '#'".into()));
    }
    let mut dim = None;
    let mut n_interior = None;
    let mut n_total = None;
    let mut h = None;
    for word in header[1..].split_whitespace() {
        let (key, val) = word
            .split_once('=')
            .ok_or_else(|| IoError::BadHeader(format!("expected key=value, got '{word}'")))?;
        match key {
            "d" => {
                dim = Some(val.parse::<usize>().map_err(|e| {
                    IoError::BadHeader(format!("d: {e}"))
                })?);
            }
            "N" => {
                n_interior = Some(val.parse::<usize>().map_err(|e| {
                    IoError::BadHeader(format!("N: {e}"))
                })?);
            }
            "M" => {
                n_total = Some(val.parse::<usize>().map_err(|e| {
                    IoError::BadHeader(format!("M: {e}"))
                })?);
            }
            "h" => {
                h = Some(val.parse::<f64>().map_err(|e| {
                    IoError::BadHeader(format!("h: {e}"))
                })?);
            }
            other => {
                return Err(IoError::BadHeader(format!("unknown header key '{other}'")));
            }
        }
    }
    let dim = dim.ok_or_else(|| IoError::BadHeader("missing d".into()))?;
    let n_interior = n_interior.ok_or_else(|| IoError::BadHeader("missing N".into()))?;
    let n_total = n_total.ok_or_else(|| IoError::BadHeader("missing M".into()))?;
    let h = h.ok_or_else(|| IoError::BadHeader("missing h".into()))?;
    if !(dim == 2 || dim == 3) {
        return Err(IoError::BadHeader(format!("unsupported dimension {dim}")));
    }
    if n_interior > n_total {
        return Err(IoError::BadHeader(format!(
            "N={n_interior} exceeds M={n_total}"
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(IoError::BadHeader(format!("h={h} must be positive")));
    }

    let mut coords = Vec::with_capacity(n_total * dim);
    let mut found = 0usize;
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parsed = 0usize;
        for word in line.split_whitespace() {
            let v: f64 = word.parse().map_err(|e| IoError::BadLine {
                line: idx + 1,
                msg: format!("'{word}': {e}"),
            })?;
            if !v.is_finite() {
                return Err(IoError::BadLine {
                    line: idx + 1,
                    msg: format!("non-finite coordinate {v}"),
                });
            }
            coords.push(v);
            parsed += 1;
        }
        if parsed != dim {
            return Err(IoError::BadLine {
                line: idx + 1,
                msg: format!("expected {dim} coordinates, found {parsed}"),
            });
        }
        found += 1;
    }
    if found != n_total {
        return Err(IoError::CountMismatch {
            expected: n_total,
            found,
        });
    }
    Ok(RawCloud {
        dim,
        n_interior,
        n_total,
        h,
        coords,
    })
}

/// Rebuild a typed cloud from parsed data, recomputing separation and
/// boundary clearance against the given domain.
pub fn raw_to_cloud<const D: usize>(
    raw: &RawCloud,
    dom: &Domain<D>,
) -> Result<PointCloud<D>, IoError> {
    if raw.dim != D {
        return Err(IoError::DimMismatch {
            file: raw.dim,
            expected: D,
        });
    }
    let points: Vec<Point<D>> = raw
        .coords
        .chunks_exact(D)
        .map(|c| {
            let mut p = [0.0; D];
            p.copy_from_slice(c);
            p
        })
        .collect();
    let zeta = compute_separation(&points).map_err(|e| IoError::BadHeader(e.to_string()))?;
    let kappa = compute_kappa(&points, dom);
    Ok(PointCloud {
        points,
        n_interior: raw.n_interior,
        h: raw.h,
        zeta,
        kappa,
    })
}

/// Calibration table text format:
/// ```text
/// dim 2
/// reduction 0.5773502691896258
/// band 0 0.01 2.836
/// band 0.01 0.1 2.901
/// band 0.1 1 3.614
/// ```
/// Blank lines and `#` comments are ignored. Bands must tile (0, 1]
/// contiguously in ascending order.
pub fn write_calibration(table: &CalibrationTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("dim {}\n", table.dim));
    out.push_str(&format!("reduction {:.17e}\n", table.reduction));
    for b in &table.bands {
        out.push_str(&format!("band {:.17e} {:.17e} {:.17e}\n", b.lo, b.hi, b.c));
    }
    out
}

pub fn parse_calibration(text: &str) -> Result<CalibrationTable, IoError> {
    let mut dim = None;
    let mut reduction = None;
    let mut bands: Vec<Band> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| IoError::BadLine {
            line: idx + 1,
            msg,
        };
        match words[0] {
            "dim" => {
                if words.len() != 2 {
                    return Err(bad("dim takes one value".into()));
                }
                dim = Some(
                    words[1]
                        .parse::<usize>()
                        .map_err(|e| bad(format!("dim: {e}")))?,
                );
            }
            "reduction" => {
                if words.len() != 2 {
                    return Err(bad("reduction takes one value".into()));
                }
                let r: f64 = words[1]
                    .parse()
                    .map_err(|e| bad(format!("reduction: {e}")))?;
                if !(r.is_finite() && r > 0.0 && r <= 1.0) {
                    return Err(bad(format!("reduction {r} must be in (0, 1]")));
                }
                reduction = Some(r);
            }
            "band" => {
                if words.len() != 4 {
                    return Err(bad("band takes lo hi c".into()));
                }
                let mut vals = [0.0f64; 3];
                for (slot, w) in vals.iter_mut().zip(&words[1..]) {
                    *slot = w.parse().map_err(|e| bad(format!("band: {e}")))?;
                    if !slot.is_finite() {
                        return Err(bad("band values must be finite".into()));
                    }
                }
                if !(vals[0] >= 0.0 && vals[0] < vals[1] && vals[1] <= 1.0) {
                    return Err(bad(format!(
                        "band edges ({}, {}] must satisfy 0 <= lo < hi <= 1",
                        vals[0], vals[1]
                    )));
                }
                if vals[2] <= 0.0 {
                    return Err(bad(format!("band constant {} must be positive", vals[2])));
                }
                bands.push(Band {
                    lo: vals[0],
                    hi: vals[1],
                    c: vals[2],
                });
            }
            other => {
                return Err(bad(format!("unknown directive '{other}'")));
            }
        }
    }
    let dim = dim.ok_or_else(|| IoError::BadCalibration("missing dim".into()))?;
    if !(dim == 2 || dim == 3) {
        return Err(IoError::BadCalibration(format!(
            "unsupported dimension {dim}"
        )));
    }
    if bands.is_empty() {
        return Err(IoError::BadCalibration("no bands".into()));
    }
    if bands[0].lo != 0.0 || bands[bands.len() - 1].hi != 1.0 {
        return Err(IoError::BadCalibration(
            "bands must start at 0 and end at 1".into(),
        ));
    }
    for pair in bands.windows(2) {
        if (pair[0].hi - pair[1].lo).abs() > 1e-15 {
            return Err(IoError::BadCalibration(format!(
                "bands must be contiguous: gap between {} and {}",
                pair[0].hi, pair[1].lo
            )));
        }
    }
    let reduction =
        reduction.unwrap_or_else(|| CalibrationTable::defaults(dim).reduction);
    Ok(CalibrationTable {
        dim,
        bands,
        reduction,
    })
}

/// Debug dump: one line per stencil, `i : (j, β, usedBoundary) ...`.
pub fn format_stencil<const D: usize>(s: &Stencil<D>) -> String {
    let mut out = format!("{} :", s.center_id);
    for k in 0..s.neighbor_ids.len() {
        out.push_str(&format!(
            " ({}, {:.17e}, {})",
            s.neighbor_ids[k], s.coefficients[k], s.uses_boundary[k]
        ));
    }
    out
}

pub fn dump_stencils<const D: usize>(stencils: &[Stencil<D>]) -> String {
    let mut out = String::new();
    for s in stencils {
        out.push_str(&format_stencil(s));
        out.push('\n');
    }
    out
}

/// Matrix Market coordinate format (1-based indices, general real).
pub fn write_matrix_market(m: &Csr) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", m.n, m.n, m.vals.len()));
    for i in 0..m.n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            out.push_str(&format!("{} {} {:.17e}\n", i + 1, m.col_idx[k] + 1, m.vals[k]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{lshape2, Domain};
    use crate::pointcloud::{generate_cloud, ProperConstants};

    #[test]
    fn cloud_roundtrip_exact() {
        let dom: Domain<2> = Domain::unit_ball();
        let cloud = generate_cloud(&dom, 0.25, 0.7, &ProperConstants::default(), 30).unwrap();
        let text = write_cloud(&cloud);
        let raw = parse_cloud(&text).unwrap();
        assert_eq!(raw.dim, 2);
        assert_eq!(raw.n_interior, cloud.n_interior);
        assert_eq!(raw.n_total, cloud.n_total());
        let back = raw_to_cloud::<2>(&raw, &dom).unwrap();
        // 17 significant digits round-trips f64 exactly
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.h.to_bits(), cloud.h.to_bits());
        assert!((back.zeta - cloud.zeta).abs() < 1e-15);
    }

    #[test]
    fn cloud_parse_rejects_malformed() {
        assert!(parse_cloud("").is_err());
        assert!(parse_cloud("no header\n0 0\n").is_err());
        assert!(parse_cloud("# d=2 N=1 M=1 h=0.1\n0.0\n").is_err()); // short line
        assert!(parse_cloud("# d=2 N=1 M=2 h=0.1\n0 0\n").is_err()); // count
        assert!(parse_cloud("# d=2 N=3 M=2 h=0.1\n0 0\n1 0\n").is_err()); // N > M
        assert!(parse_cloud("# d=2 N=1 M=1 h=-1\n0 0\n").is_err()); // bad h
        assert!(parse_cloud("# d=4 N=1 M=1 h=0.1\n0 0 0 0\n").is_err()); // dim
        assert!(parse_cloud("# d=2 N=1 M=1 h=0.1\n0 nan\n").is_err()); // nan
        assert!(parse_cloud("# d=2 N=1 M=1 h=0.1\nx y\n").is_err()); // words
    }

    #[test]
    fn dim_mismatch_detected() {
        let raw = parse_cloud("# d=3 N=1 M=1 h=0.1\n0 0 0\n").unwrap();
        let dom: Domain<2> = Domain::unit_ball();
        assert!(matches!(
            raw_to_cloud::<2>(&raw, &dom),
            Err(IoError::DimMismatch { file: 3, expected: 2 })
        ));
    }

    #[test]
    fn calibration_roundtrip() {
        for d in [2usize, 3] {
            let table = CalibrationTable::defaults(d);
            let text = write_calibration(&table);
            let back = parse_calibration(&text).unwrap();
            assert_eq!(back.dim, table.dim);
            assert_eq!(back.bands.len(), table.bands.len());
            for (a, b) in back.bands.iter().zip(&table.bands) {
                assert_eq!(a.lo.to_bits(), b.lo.to_bits());
                assert_eq!(a.hi.to_bits(), b.hi.to_bits());
                assert_eq!(a.c.to_bits(), b.c.to_bits());
            }
            assert_eq!(back.reduction.to_bits(), table.reduction.to_bits());
        }
    }

    #[test]
    fn calibration_rejects_malformed() {
        assert!(parse_calibration("").is_err()); // missing dim
        assert!(parse_calibration("dim 2\n").is_err()); // no bands
        assert!(parse_calibration("dim 2\nband 0 0.5 2.8\n").is_err()); // no cover
        assert!(parse_calibration("dim 2\nband 0 0.5 2.8\nband 0.6 1 3.0\n").is_err()); // gap
        assert!(parse_calibration("dim 2\nband 0.5 0.2 2.8\n").is_err()); // lo > hi
        assert!(parse_calibration("dim 2\nband 0 1 -2.0\n").is_err()); // negative c
        assert!(parse_calibration("dim 5\nband 0 1 2.0\n").is_err()); // dim
        assert!(parse_calibration("dim 2\nreduction 0\nband 0 1 2.0\n").is_err());
        assert!(parse_calibration("bogus 1\n").is_err());
    }

    #[test]
    fn calibration_default_reduction_when_absent() {
        let t = parse_calibration("dim 2\nband 0 1 3.0\n").unwrap();
        assert_eq!(
            t.reduction.to_bits(),
            CalibrationTable::defaults(2).reduction.to_bits()
        );
    }

    #[test]
    fn stencil_dump_format() {
        let s = Stencil::<2> {
            center_id: 7,
            center: [0.0, 0.0],
            neighbor_ids: vec![1, 2],
            projected: vec![[0.1, 0.0], [0.0, 0.1]],
            uses_boundary: vec![false, true],
            weights: vec![1.0, 2.0],
            coefficients: vec![0.5, 0.25],
            delta: 0.3,
            retried: false,
        };
        let line = format_stencil(&s);
        assert!(line.starts_with("7 : (1, "));
        assert!(line.contains(", false) (2, "));
        assert!(line.ends_with(", true)"));
    }

    #[test]
    fn matrix_market_layout() {
        let m = Csr {
            n: 2,
            row_ptr: vec![0, 2, 3],
            col_idx: vec![0, 1, 1],
            vals: vec![2.0, -1.0, 3.0],
        };
        let text = write_matrix_market(&m);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "2 2 3");
        assert!(lines[2].starts_with("1 1 2"));
        assert!(lines[4].starts_with("2 2 3"));
    }

    #[test]
    fn lshape_cloud_roundtrip() {
        let dom = lshape2();
        let cloud = generate_cloud(&dom, 0.3, 0.8, &ProperConstants::default(), 30).unwrap();
        let text = write_cloud(&cloud);
        let back = raw_to_cloud::<2>(&parse_cloud(&text).unwrap(), &dom).unwrap();
        assert_eq!(back.points, cloud.points);
    }
}
