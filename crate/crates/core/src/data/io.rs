//! Text formats for datasets.
//!
//! Elevation/interchange CSV: header `x1,x2[,x3],y`, one sample per line.
//! Point clouds: `x y z` per line, whitespace- or comma-separated, `#`
//! comments. Grid dumps: a rectangular matrix of heights, one grid row per
//! line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::dataset::Dataset;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_number(tok: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{what}: '{}' is not a number", tok.trim())))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("{what}: non-finite value")));
    }
    Ok(v)
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Reads `x1,x2[,x3],y` CSV into a raw dataset.
pub fn load_elevation_grid(path: &Path) -> Result<Dataset> {
    parse_dataset_csv(&read(path)?, path)
}

pub fn parse_dataset_csv(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    if !(2..=3).contains(&d) || cols != expected {
        return Err(Error::parse(path, hline, format!("expected header x1,x2,y or x1,x2,x3,y, got '{header}'")));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::parse(path, no, format!("expected {} fields, got {}", d + 1, fields.len())));
        }
        for (j, f) in fields[..d].iter().enumerate() {
            inputs.push(parse_number(f, path, no, &expected[j])?);
        }
        targets.push(parse_number(fields[d], path, no, "y")?);
    }
    if targets.is_empty() {
        return Err(Error::parse(path, hline, "no data rows"));
    }
    Dataset::new(Matrix::from_vec(targets.len(), d, inputs)?, targets)
}

/// Writes `x1,..,y` CSV in raw units. Values use shortest round-trip formatting.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let (x, y) = ds.raw()?;
    let mut out = String::new();
    for j in 1..=x.cols() {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("y\n");
    for (i, yi) in y.iter().enumerate() {
        for v in x.row(i) {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{yi:?}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a 3-D point cloud and multiplies every coordinate by `scale`.
pub fn load_point_cloud(path: &Path, scale: f64) -> Result<Matrix> {
    parse_point_cloud(&read(path)?, path, scale)
}

pub fn parse_point_cloud(text: &str, path: &Path, scale: f64) -> Result<Matrix> {
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::contract("point-cloud scale factor must be finite and non-zero"));
    }
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields = split_fields(body);
        if fields.len() < 3 {
            return Err(Error::parse(path, no, format!("expected 3 coordinates, got {}", fields.len())));
        }
        // PLY-style extras (confidence, intensity) after x y z are ignored.
        for (f, name) in fields[..3].iter().zip(["x", "y", "z"]) {
            data.push(scale * parse_number(f, path, no, name)?);
        }
    }
    if data.is_empty() {
        return Err(Error::parse(path, 1, "point cloud is empty"));
    }
    Matrix::from_vec(data.len() / 3, 3, data)
}

/// Converts a rectangular height matrix (one grid row per line) into the
/// interchange format. Row `i`, column `j` lands at `(x1, x2) = (i·spacing, j·spacing)`.
pub fn convert_grid_dump(text: &str, path: &Path, spacing: f64) -> Result<Dataset> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::contract("grid spacing must be positive"));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    let mut row = 0usize;
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields = split_fields(body);
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::parse(path, no, format!("ragged grid: expected {w} values, got {}", fields.len())));
            }
            _ => {}
        }
        for (j, f) in fields.iter().enumerate() {
            targets.push(parse_number(f, path, no, "height")?);
            inputs.push(row as f64 * spacing);
            inputs.push(j as f64 * spacing);
        }
        row += 1;
    }
    if targets.is_empty() {
        return Err(Error::parse(path, 1, "grid dump is empty"));
    }
    Dataset::new(Matrix::from_vec(targets.len(), 2, inputs)?, targets)
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
