//! Snapshot, trace and benchmark files, and readers for the snapshot formats.
//!
//! Every file starts with a `# cryocell <version> config=<hash>` line. Floats
//! are written with Rust's shortest round-trip formatting, so reading a file
//! back reproduces the values bit for bit. The layouts are described in
//! `docs/formats.md`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Grid;
use crate::runner::{PhaseSample, TraceRow};
use crate::solver::Field;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("snapshot does not match the grid: {0}")]
    GridMismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn bad(path: &Path, line: usize, message: impl Into<String>) -> OutputError {
    OutputError::Format {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Provenance stamped into every file header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub config_hash: String,
    /// Extra `key=value` pairs appended to the header line.
    pub extra: Vec<(String, String)>,
}

impl Header {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Header {
            config_hash: config_hash.into(),
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!("cryocell {VERSION} config={}", self.config_hash);
        for (k, v) in &self.extra {
            let _ = write!(s, " {k}={v}");
        }
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, OutputError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<(), OutputError> {
    w.flush().map_err(io_err(path))
}

/// Masked cells as `r,z,layer,T` rows, in row-major cell order.
pub fn write_snapshot_csv(path: &Path, grid: &Grid, field: &Field, header: &Header) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let mut body = String::new();
    let _ = writeln!(body, "# {}", header.line());
    body.push_str("r,z,layer,T\n");
    for (i, j) in grid.cells() {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            grid.r_centers[i],
            grid.z_centers[j],
            grid.layer_of_col[i],
            field.get(i, j)
        );
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub r: f64,
    pub z: f64,
    pub layer: usize,
    pub t: f64,
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<SnapshotRow>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != "r,z,layer,T" {
                return Err(bad(path, line_no, format!("expected column header, found `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(path, line_no, "expected 4 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(path, line_no, e.to_string()));
        rows.push(SnapshotRow {
            r: num(parts[0])?,
            z: num(parts[1])?,
            layer: parts[2].parse().map_err(|_| bad(path, line_no, "bad layer index"))?,
            t: num(parts[3])?,
        });
    }
    Ok(rows)
}

/// Rebuilds a field from CSV rows written for `grid`.
pub fn field_from_rows(grid: &Grid, rows: &[SnapshotRow]) -> Result<Field, OutputError> {
    if rows.len() != grid.active_cells() {
        return Err(OutputError::GridMismatch(format!(
            "{} rows for {} cells",
            rows.len(),
            grid.active_cells()
        )));
    }
    let mut field = Field::uniform(grid, 0.0);
    for (row, (i, j)) in rows.iter().zip(grid.cells()) {
        if row.r != grid.r_centers[i] || row.z != grid.z_centers[j] {
            return Err(OutputError::GridMismatch(format!("row for ({}, {}) is not at cell ({i}, {j})", row.r, row.z)));
        }
        field.set(i, j, row.t);
    }
    Ok(field)
}

/// Legacy ASCII VTK structured grid over all `nr x nz` cell centres.
/// Cells outside the mask carry `nan` and are hidden through `vtkGhostType`.
pub fn write_snapshot_vtk(path: &Path, grid: &Grid, field: &Field, header: &Header) -> Result<(), OutputError> {
    let (nr, nz) = (grid.nr(), grid.nz());
    let n = nr * nz;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{}", header.line());
    s.push_str("ASCII\nDATASET STRUCTURED_GRID\n");
    let _ = writeln!(s, "DIMENSIONS {nr} {nz} 1");
    let _ = writeln!(s, "POINTS {n} double");
    for j in 0..nz {
        for i in 0..nr {
            let _ = writeln!(s, "{} {} 0", grid.r_centers[i], grid.z_centers[j]);
        }
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("SCALARS temperature double 1\nLOOKUP_TABLE default\n");
    for j in 0..nz {
        for i in 0..nr {
            if grid.in_mask(i, j) {
                let _ = writeln!(s, "{}", field.get(i, j));
            } else {
                s.push_str("nan\n");
            }
        }
    }
    s.push_str("SCALARS layer int 1\nLOOKUP_TABLE default\n");
    for _ in 0..nz {
        for i in 0..nr {
            let _ = writeln!(s, "{}", grid.layer_of_col[i]);
        }
    }
    s.push_str("SCALARS vtkGhostType unsigned_char 1\nLOOKUP_TABLE default\n");
    for j in 0..nz {
        for i in 0..nr {
            s.push_str(if grid.in_mask(i, j) { "0\n" } else { "2\n" });
        }
    }
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(io_err(path))?;
    finish(w, path)
}

/// Contents of a VTK snapshot, row-major with `r` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub header: String,
    pub dims: (usize, usize),
    pub points: Vec<(f64, f64)>,
    pub temperature: Vec<f64>,
    pub layer: Vec<usize>,
    pub ghost: Vec<u8>,
}

impl VtkSnapshot {
    pub fn to_field(&self, grid: &Grid) -> Result<Field, OutputError> {
        if self.dims != (grid.nr(), grid.nz()) {
            return Err(OutputError::GridMismatch(format!(
                "dimensions {:?} for a {}x{} grid",
                self.dims,
                grid.nr(),
                grid.nz()
            )));
        }
        let mut field = Field::uniform(grid, 0.0);
        for (i, j) in grid.cells() {
            field.set(i, j, self.temperature[grid.index(i, j)]);
        }
        Ok(field)
    }
}

pub fn read_snapshot_vtk(path: &Path) -> Result<VtkSnapshot, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(path, 0, format!("truncated before {what}")));
    let (_, magic) = next("magic")?;
    if !magic.starts_with("# vtk DataFile") {
        return Err(bad(path, 1, "not a legacy VTK file"));
    }
    let (_, header) = next("header")?;
    let header = header.to_string();
    for expect in ["ASCII", "DATASET STRUCTURED_GRID"] {
        let (k, l) = next(expect)?;
        if l != expect {
            return Err(bad(path, k, format!("expected `{expect}`")));
        }
    }
    let (k, l) = next("DIMENSIONS")?;
    let dims: Vec<usize> = l
        .strip_prefix("DIMENSIONS ")
        .ok_or_else(|| bad(path, k, "expected DIMENSIONS"))?
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| bad(path, k, "bad dimension")))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 || dims[2] != 1 {
        return Err(bad(path, k, "expected `DIMENSIONS nr nz 1`"));
    }
    let n = dims[0] * dims[1];
    let (k, l) = next("POINTS")?;
    if l != format!("POINTS {n} double") {
        return Err(bad(path, k, "unexpected POINTS line"));
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, l) = next("point")?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| bad(path, k, "bad coordinate")))
            .collect::<Result<_, _>>()?;
        if v.len() != 3 {
            return Err(bad(path, k, "expected 3 coordinates"));
        }
        points.push((v[0], v[1]));
    }
    let (k, l) = next("POINT_DATA")?;
    if l != format!("POINT_DATA {n}") {
        return Err(bad(path, k, "unexpected POINT_DATA line"));
    }
    let mut temperature = Vec::new();
    let mut layer = Vec::new();
    let mut ghost = Vec::new();
    while let Ok((k, l)) = next("SCALARS") {
        let mut parts = l.split_whitespace();
        if parts.next() != Some("SCALARS") {
            return Err(bad(path, k, "expected SCALARS"));
        }
        let name = parts.next().unwrap_or("").to_string();
        let (k2, lut) = next("LOOKUP_TABLE")?;
        if lut != "LOOKUP_TABLE default" {
            return Err(bad(path, k2, "expected LOOKUP_TABLE default"));
        }
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let (k, l) = next("value")?;
            vals.push((k, l.trim().to_string()));
        }
        match name.as_str() {
            "temperature" => {
                temperature = vals
                    .iter()
                    .map(|(k, v)| v.parse::<f64>().map_err(|_| bad(path, *k, "bad temperature")))
                    .collect::<Result<_, _>>()?
            }
            "layer" => {
                layer = vals
                    .iter()
                    .map(|(k, v)| v.parse::<usize>().map_err(|_| bad(path, *k, "bad layer")))
                    .collect::<Result<_, _>>()?
            }
            "vtkGhostType" => {
                ghost = vals
                    .iter()
                    .map(|(k, v)| v.parse::<u8>().map_err(|_| bad(path, *k, "bad ghost flag")))
                    .collect::<Result<_, _>>()?
            }
            other => return Err(bad(path, k, format!("unknown array `{other}`"))),
        }
    }
    if temperature.len() != n {
        return Err(bad(path, 0, "missing temperature array"));
    }
    Ok(VtkSnapshot {
        header,
        dims: (dims[0], dims[1]),
        points,
        temperature,
        layer,
        ghost,
    })
}

/// Probe trace: `t,probe_1,...,probe_k`, one row per accepted step.
pub fn write_trace(path: &Path, trace: &[TraceRow], probes: usize, header: &Header) -> Result<(), OutputError> {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", header.line());
    s.push('t');
    for k in 1..=probes {
        let _ = write!(s, ",probe_{k}");
    }
    s.push('\n');
    for row in trace {
        s.push_str(&row.t.to_string());
        for v in &row.values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(io_err(path))?;
    finish(w, path)
}

/// Trace resampled at fixed phases: `t,period,phase_index,probe_1,...`.
pub fn write_phase_trace(path: &Path, samples: &[PhaseSample], probes: usize, header: &Header) -> Result<(), OutputError> {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", header.line());
    s.push_str("t,period,phase_index");
    for k in 1..=probes {
        let _ = write!(s, ",probe_{k}");
    }
    s.push('\n');
    for p in samples {
        let _ = write!(s, "{},{},{}", p.t, p.period, p.phase_index);
        for v in &p.values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(io_err(path))?;
    finish(w, path)
}

/// Numeric CSV body with its column names; comment lines are skipped.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut columns = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if columns.is_none() {
            columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.parse().map_err(|_| bad(path, n + 1, format!("bad number `{v}`"))))
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    Ok((columns.unwrap_or_default(), rows))
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub wall_s: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

/// `workers,wall_s,speedup,efficiency`, preceded by `# key=value` lines
/// describing the machine and the run.
pub fn write_bench(path: &Path, rows: &[BenchRow], env: &[(String, String)], header: &Header) -> Result<(), OutputError> {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", header.line());
    for (k, v) in env {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str("workers,wall_s,speedup,efficiency\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.workers, r.wall_s, r.speedup, r.efficiency);
    }
    let mut w = create(path)?;
    w.write_all(s.as_bytes()).map_err(io_err(path))?;
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, GridSpec};

    fn grid(stepped: bool) -> Grid {
        Grid::build(
            &DomainSpec {
                layer_radii: vec![0.5, 1.0],
                core_length: 1.0,
                outer_length: if stepped { 0.5 } else { 1.0 },
                layer_materials: vec!["a".into(), "b".into()],
                source_layer: 1,
            },
            &GridSpec {
                radial_divisions: vec![1, 1],
                axial_divisions_core: 2,
                axial_divisions_outer: if stepped { 1 } else { 2 },
            },
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_equilibrium_csv() {
        let g = grid(false);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_snapshot_csv(&p, &g, &Field::uniform(&g, 4.2), &Header::new("abc")).unwrap();
        let rows = read_snapshot_csv(&p).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.t == 4.2));
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(&format!("# cryocell {VERSION} config=abc\n")));
    }

    #[test]
    fn stepped_cell_is_omitted() {
        let g = grid(true);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_snapshot_csv(&p, &g, &Field::uniform(&g, 4.2), &Header::new("x")).unwrap();
        let rows = read_snapshot_csv(&p).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows.iter().any(|r| r.layer == 1 && r.z > 0.5));
    }

    #[test]
    fn round_trips_are_exact() {
        let g = grid(true);
        let f = Field::from_fn(&g, |i, j| 4.2 + 0.1 * i as f64 + 1.0 / (3.0 + j as f64));
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("s.csv");
        let vtk = dir.path().join("s.vtk");
        let h = Header::new("h").with("t", 0.1);
        write_snapshot_csv(&csv, &g, &f, &h).unwrap();
        write_snapshot_vtk(&vtk, &g, &f, &h).unwrap();
        let back = field_from_rows(&g, &read_snapshot_csv(&csv).unwrap()).unwrap();
        assert!(back.bitwise_eq(&f));
        let v = read_snapshot_vtk(&vtk).unwrap();
        assert!(v.to_field(&g).unwrap().bitwise_eq(&f));
        assert_eq!(v.ghost, vec![0, 0, 0, 2]);
        assert!(v.temperature[3].is_nan());
        assert!(v.header.ends_with("t=0.1"));
    }

    #[test]
    fn trace_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let trace = vec![
            TraceRow {
                t: 0.5,
                tau: 0.5,
                values: vec![4.2, 5.0],
            },
            TraceRow {
                t: 1.0,
                tau: 0.5,
                values: vec![4.25, 5.5],
            },
        ];
        write_trace(&p, &trace, 2, &Header::new("x")).unwrap();
        let (cols, rows) = read_numeric_csv(&p).unwrap();
        assert_eq!(cols, ["t", "probe_1", "probe_2"]);
        assert_eq!(rows, vec![vec![0.5, 4.2, 5.0], vec![1.0, 4.25, 5.5]]);
    }

    #[test]
    fn malformed_snapshot_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "# x\nr,z,layer,T\n0.1,0.2,0,abc\n").unwrap();
        match read_snapshot_csv(&p) {
            Err(OutputError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
