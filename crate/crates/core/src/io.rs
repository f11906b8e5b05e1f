//! Configuration parsing and file formats: CSV tables, VTK legacy output, Gmsh
//! MSH 2.2 (ASCII subset), a plain-text mesh format and MatrixMarket dumps.
//!
//! All writers format floats deterministically, so identical inputs give
//! identical bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adaptivity::{
    AdaptivityError, ConvergenceTable, EstimatorKind, IterationRecord, RefineMode, RunConfig,
};
use crate::assembly::Scheme;
use crate::linalg::{CsrMatrix, LinalgError};
use crate::mesh::{Domain, Mesh, MeshError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {origin}: {source}")]
    Json {
        origin: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Config(#[from] AdaptivityError),
    #[error("refusing to write an empty table")]
    EmptyTable,
    #[error("{what} has length {found}, expected {expected}")]
    SizeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported MSH format version {0} (only 2.x ASCII is read)")]
    UnsupportedMshVersion(String),
    #[error("MSH element {id} has unsupported type {kind} (only lines and triangles)")]
    UnsupportedElement { id: u64, kind: u32 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(file_err(path))
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(file_err(path))
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub domain: Option<Domain>,
    pub scheme: Option<Scheme>,
    pub refine: Option<RefineMode>,
    pub estimator: Option<EstimatorKind>,
    pub mu: Option<f64>,
    pub n0: Option<usize>,
    pub max_iter: Option<usize>,
    pub dof_cap: Option<usize>,
    pub fraction: Option<f64>,
    pub shift: Option<f64>,
    pub nev: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub lambda_ref: Option<f64>,
    pub out: Option<String>,
}

impl ConfigOverrides {
    pub fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        set!(domain, scheme, refine, estimator, mu, n0, max_iter, dof_cap, fraction, shift, nev, tol, seed);
        if self.lambda_ref.is_some() {
            c.lambda_ref = self.lambda_ref;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
    }
}

/// Parses a JSON config. Missing fields take their defaults, unknown ones are
/// rejected.
pub fn parse_config_str(json: &str, overrides: &ConfigOverrides) -> Result<RunConfig, IoError> {
    let mut config: RunConfig = serde_json::from_str(json).map_err(|source| IoError::Json {
        origin: "<inline>".into(),
        source,
    })?;
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

/// Reads `path` if given, applies `overrides` and validates the result.
pub fn parse_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<RunConfig, IoError> {
    let mut config = match path {
        Some(p) => {
            let text = read_file(p)?;
            serde_json::from_str(&text).map_err(|source| IoError::Json {
                origin: p.display().to_string(),
                source,
            })?
        }
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

/// Six significant digits with a signed two-digit exponent, e.g. `2.18027e+01`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.5e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub const CSV_HEADER: &str = "iter,N,lambda_h1,err,estimator_sq,effectivity,elements,seconds";

pub fn format_csv_row(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.iter,
        r.n_dofs,
        format_sci(r.lambda_h1),
        format_sci(r.err),
        format_sci(r.estimator_sq),
        format_sci(r.effectivity),
        r.elements,
        format_sci(r.seconds)
    )
}

/// Appends rows as they complete, flushing after each one. The file is created
/// with the first row.
pub struct CsvWriter {
    path: PathBuf,
    out: Option<BufWriter<File>>,
}

impl CsvWriter {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            out: None,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &IterationRecord) -> Result<(), IoError> {
        let path = self.path.clone();
        if self.out.is_none() {
            let f = File::create(&path).map_err(file_err(&path))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{CSV_HEADER}").map_err(file_err(&path))?;
            self.out = Some(w);
        }
        let w = self.out.as_mut().expect("opened above");
        writeln!(w, "{}", format_csv_row(record)).map_err(file_err(&path))?;
        w.flush().map_err(file_err(&path))
    }
}

pub fn csv_string(table: &ConvergenceTable) -> Result<String, IoError> {
    if table.is_empty() {
        return Err(IoError::EmptyTable);
    }
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &table.records {
        s.push_str(&format_csv_row(r));
        s.push('\n');
    }
    Ok(s)
}

pub fn write_csv_table(table: &ConvergenceTable, path: &Path) -> Result<(), IoError> {
    let s = csv_string(table)?;
    write_file(path, &s)
}

/// Parses a table written by [`write_csv_table`]. `lambdas` holds only `lambda_h1`.
pub fn parse_csv_table(text: &str) -> Result<ConvergenceTable, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header `{CSV_HEADER}`"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 8 {
            return Err(parse_err(line_no, format!("expected 8 columns, found {}", cols.len())));
        }
        let int = |k: usize| -> Result<usize, IoError> {
            cols[k].parse().map_err(|_| parse_err(line_no, format!("bad integer `{}`", cols[k])))
        };
        let float = |k: usize| -> Result<f64, IoError> {
            cols[k].parse().map_err(|_| parse_err(line_no, format!("bad number `{}`", cols[k])))
        };
        let lambda_h1 = float(2)?;
        records.push(IterationRecord {
            iter: int(0)?,
            n_dofs: int(1)?,
            lambda_h1,
            lambdas: vec![lambda_h1],
            err: float(3)?,
            estimator_sq: float(4)?,
            effectivity: float(5)?,
            elements: int(6)?,
            seconds: float(7)?,
        });
    }
    Ok(ConvergenceTable { records })
}

pub fn read_csv_table(path: &Path) -> Result<ConvergenceTable, IoError> {
    parse_csv_table(&read_file(path)?)
}

/// Per-cell or per-vertex data for [`write_vtk`].
#[derive(Clone, Debug, PartialEq)]
pub enum VtkData {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
}

impl VtkData {
    fn len(&self) -> usize {
        match self {
            VtkData::Scalar(v) => v.len(),
            VtkData::Vector(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VtkField {
    pub name: String,
    pub data: VtkData,
}

impl VtkField {
    pub fn scalar(name: &str, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            data: VtkData::Scalar(data),
        }
    }

    pub fn vector(name: &str, data: Vec<[f64; 2]>) -> Self {
        Self {
            name: name.into(),
            data: VtkData::Vector(data),
        }
    }
}

fn write_vtk_fields(s: &mut String, fields: &[VtkField]) {
    for f in fields {
        let name = f.name.replace(char::is_whitespace, "_");
        match &f.data {
            VtkData::Scalar(v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
            VtkData::Vector(v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for [x, y] in v {
                    let _ = writeln!(s, "{x:e} {y:e} 0e0");
                }
            }
        }
    }
}

/// VTK legacy 2.0 ASCII unstructured grid of triangles (cell type 5).
pub fn vtk_string(mesh: &Mesh, cell_fields: &[VtkField], point_fields: &[VtkField]) -> Result<String, IoError> {
    let check = |fields: &[VtkField], n: usize, kind: &str| {
        for f in fields {
            if f.data.len() != n {
                return Err(IoError::SizeMismatch {
                    what: format!("{kind} field `{}`", f.name),
                    expected: n,
                    found: f.data.len(),
                });
            }
        }
        Ok(())
    };
    check(cell_fields, mesh.n_triangles(), "cell")?;
    check(point_fields, mesh.n_vertices(), "point")?;

    let nt = mesh.n_triangles();
    let mut s = String::from("# vtk DataFile Version 2.0\nstokes-afem\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for [x, y] in mesh.vertices() {
        let _ = writeln!(s, "{x:e} {y:e} 0e0");
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nt}");
        write_vtk_fields(&mut s, cell_fields);
    }
    if !point_fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        write_vtk_fields(&mut s, point_fields);
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, cell_fields: &[VtkField], point_fields: &[VtkField], path: &Path) -> Result<(), IoError> {
    let s = vtk_string(mesh, cell_fields, point_fields)?;
    write_file(path, &s)
}

/// A mesh read from MSH together with its line elements (0-based vertex pairs).
#[derive(Clone, Debug, PartialEq)]
pub struct MshMesh {
    pub mesh: Mesh,
    pub boundary_lines: Vec<[usize; 2]>,
}

/// MSH 2.2 ASCII with 1-based nodes, boundary edges as 2-node lines (type 1,
/// physical tag 1) and triangles (type 2, physical tag 2).
pub fn msh_string(mesh: &Mesh) -> String {
    let mut s = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_vertices());
    for (i, [x, y]) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {x:e} {y:e} 0", i + 1);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let boundary: Vec<usize> = (0..mesh.n_edges()).filter(|&e| mesh.is_boundary(e)).collect();
    let _ = writeln!(s, "{}", boundary.len() + mesh.n_triangles());
    let mut id = 1;
    for &e in &boundary {
        let [a, b] = mesh.edges()[e];
        let _ = writeln!(s, "{id} 1 2 1 1 {} {}", a + 1, b + 1);
        id += 1;
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "{id} 2 2 2 1 {} {} {}", a + 1, b + 1, c + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

pub fn export_mesh(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    write_file(path, &msh_string(mesh))
}

/// Reads nodes, 2-node lines and 3-node triangles. Point elements are skipped,
/// every other element type is an error. Clockwise triangles are reoriented
/// keeping their first vertex; line elements must be boundary edges.
pub fn parse_msh(text: &str) -> Result<MshMesh, IoError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    let next = |k: &mut usize| -> Result<(usize, &str), IoError> {
        while *k < lines.len() {
            let l = lines[*k].trim();
            *k += 1;
            if !l.is_empty() {
                return Ok((*k, l));
            }
        }
        Err(parse_err(lines.len(), "unexpected end of file"))
    };
    let mut version_seen = false;
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut raw_lines = Vec::new();

    while k < lines.len() {
        let (ln, header) = next(&mut k)?;
        match header {
            "$MeshFormat" => {
                let (ln, v) = next(&mut k)?;
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() < 3 {
                    return Err(parse_err(ln, "malformed $MeshFormat"));
                }
                if !parts[0].starts_with("2.") || parts[1] != "0" {
                    return Err(IoError::UnsupportedMshVersion(format!("{} (file-type {})", parts[0], parts[1])));
                }
                version_seen = true;
                expect_end(next(&mut k)?, "$EndMeshFormat")?;
            }
            "$Nodes" => {
                let (ln, n) = next(&mut k)?;
                let n: usize = n.parse().map_err(|_| parse_err(ln, "bad node count"))?;
                for _ in 0..n {
                    let (ln, l) = next(&mut k)?;
                    let p: Vec<&str> = l.split_whitespace().collect();
                    if p.len() < 3 {
                        return Err(parse_err(ln, "node needs an id and coordinates"));
                    }
                    let id: u64 = p[0].parse().map_err(|_| parse_err(ln, "bad node id"))?;
                    let x: f64 = p[1].parse().map_err(|_| parse_err(ln, "bad coordinate"))?;
                    let y: f64 = p[2].parse().map_err(|_| parse_err(ln, "bad coordinate"))?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(parse_err(ln, format!("duplicate node {id}")));
                    }
                    vertices.push([x, y]);
                }
                expect_end(next(&mut k)?, "$EndNodes")?;
            }
            "$Elements" => {
                let (ln, n) = next(&mut k)?;
                let n: usize = n.parse().map_err(|_| parse_err(ln, "bad element count"))?;
                for _ in 0..n {
                    let (ln, l) = next(&mut k)?;
                    let p: Vec<u64> = l
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad integer `{t}`"))))
                        .collect::<Result<_, _>>()?;
                    if p.len() < 3 {
                        return Err(parse_err(ln, "malformed element"));
                    }
                    let (id, kind, ntags) = (p[0], p[1] as u32, p[2] as usize);
                    let nodes = p.get(3 + ntags..).unwrap_or(&[]);
                    let want = match kind {
                        1 => 2,
                        2 => 3,
                        15 => 1,
                        _ => return Err(IoError::UnsupportedElement { id, kind }),
                    };
                    if nodes.len() != want {
                        return Err(parse_err(ln, format!("element {id} has {} nodes, expected {want}", nodes.len())));
                    }
                    let mut idx = [0usize; 3];
                    for (j, node) in nodes.iter().enumerate() {
                        idx[j] = *node_index
                            .get(node)
                            .ok_or_else(|| parse_err(ln, format!("element {id} references unknown node {node}")))?;
                    }
                    match kind {
                        1 => raw_lines.push([idx[0], idx[1]]),
                        2 => triangles.push(idx),
                        _ => {}
                    }
                }
                expect_end(next(&mut k)?, "$EndElements")?;
            }
            other if other.starts_with("$End") => return Err(parse_err(ln, format!("unexpected {other}"))),
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = next(&mut k)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => return Err(parse_err(ln, format!("expected a section header, found `{other}`"))),
        }
    }
    if !version_seen {
        return Err(parse_err(1, "missing $MeshFormat"));
    }
    for tri in triangles.iter_mut() {
        let [a, b, c] = tri.map(|v| vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if det < 0.0 {
            tri.swap(1, 2);
        }
    }
    let mesh = Mesh::from_parts(vertices, triangles)?;
    let lookup = mesh.edge_lookup();
    for &[a, b] in &raw_lines {
        match lookup.get(&(a.min(b), a.max(b))) {
            Some(&e) if mesh.is_boundary(e) => {}
            _ => {
                return Err(parse_err(0, format!("line element ({}, {}) is not a boundary edge", a + 1, b + 1)));
            }
        }
    }
    Ok(MshMesh {
        mesh,
        boundary_lines: raw_lines,
    })
}

fn expect_end((ln, l): (usize, &str), end: &str) -> Result<(), IoError> {
    if l == end {
        Ok(())
    } else {
        Err(parse_err(ln, format!("expected {end}, found `{l}`")))
    }
}

pub fn import_mesh(path: &Path) -> Result<MshMesh, IoError> {
    parse_msh(&read_file(path)?)
}

/// Plain-text mesh: `#` comments, then `vertices n` followed by `n` lines `x y`,
/// then `triangles m` followed by `m` lines of 0-based counterclockwise vertex
/// indices, refinement vertex first.
pub fn mesh_text_string(mesh: &Mesh) -> String {
    let mut s = String::from("# stokes-afem mesh, 0-based indices\n");
    let _ = writeln!(s, "vertices {}", mesh.n_vertices());
    for [x, y] in mesh.vertices() {
        let _ = writeln!(s, "{x:e} {y:e}");
    }
    let _ = writeln!(s, "triangles {}", mesh.n_triangles());
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "{a} {b} {c}");
    }
    s
}

pub fn parse_mesh_text(text: &str) -> Result<Mesh, IoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut section = |key: &str| -> Result<Vec<(usize, Vec<&str>)>, IoError> {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, format!("missing `{key}` section")))?;
        let n: usize = l
            .strip_prefix(key)
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, format!("expected `{key} <count>`")))?;
        (0..n)
            .map(|_| {
                let (ln, l) = lines.next().ok_or_else(|| parse_err(0, format!("too few {key}")))?;
                Ok((ln, l.split_whitespace().collect()))
            })
            .collect()
    };
    let vertices = section("vertices")?
        .into_iter()
        .map(|(ln, p)| match p.as_slice() {
            [x, y] => match (x.parse(), y.parse()) {
                (Ok(x), Ok(y)) => Ok([x, y]),
                _ => Err(parse_err(ln, "bad coordinate")),
            },
            _ => Err(parse_err(ln, "vertex needs 2 coordinates")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let triangles = section("triangles")?
        .into_iter()
        .map(|(ln, p)| {
            let idx: Vec<usize> = p
                .iter()
                .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad index `{t}`"))))
                .collect::<Result<_, _>>()?;
            match idx.as_slice() {
                &[a, b, c] => Ok([a, b, c]),
                _ => Err(parse_err(ln, "triangle needs 3 indices")),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((ln, l)) = lines.next() {
        return Err(parse_err(ln, format!("trailing content `{l}`")));
    }
    Ok(Mesh::from_parts(vertices, triangles)?)
}

pub fn write_mesh_text(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    write_file(path, &mesh_text_string(mesh))
}

pub fn read_mesh_text(path: &Path) -> Result<Mesh, IoError> {
    parse_mesh_text(&read_file(path)?)
}

/// MatrixMarket coordinate real general, 1-based, shortest round-trip floats.
pub fn matrix_market_string(a: &CsrMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.dim(), a.dim(), a.nnz());
    for i in 0..a.dim() {
        for (j, v) in a.row(i) {
            let _ = writeln!(s, "{} {} {v:e}", i + 1, j + 1);
        }
    }
    s
}

/// Reads square `general` or `symmetric` real coordinate matrices.
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let b: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if b.len() != 5 || b[0] != "%%matrixmarket" || b[1] != "matrix" || b[2] != "coordinate" || b[3] != "real" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix coordinate real <symmetry>`"));
    }
    let symmetric = match b[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry `{other}`"))),
    };
    let mut lines = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (ln, size) = lines.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(ln, "bad size line")))
        .collect::<Result<_, _>>()?;
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(parse_err(ln, "expected a square `rows cols nnz` line"));
    }
    let (n, nnz) = (dims[0], dims[2]);
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for _ in 0..nnz {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "too few entries"))?;
        let p: Vec<&str> = l.split_whitespace().collect();
        if p.len() != 3 {
            return Err(parse_err(ln, "entry needs `row col value`"));
        }
        let i: usize = p[0].parse().map_err(|_| parse_err(ln, "bad row"))?;
        let j: usize = p[1].parse().map_err(|_| parse_err(ln, "bad column"))?;
        let v: f64 = p[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
        if i == 0 || j == 0 {
            return Err(parse_err(ln, "indices are 1-based"));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    Ok(CsrMatrix::from_triplets(n, &triplets)?)
}

pub fn write_matrix_market(a: &CsrMatrix, path: &Path) -> Result<(), IoError> {
    write_file(path, &matrix_market_string(a))
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix, IoError> {
    parse_matrix_market(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_domain;

    fn two_triangles() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[1, 2, 0], [3, 0, 2]],
        )
        .unwrap()
    }

    fn record(iter: usize) -> IterationRecord {
        IterationRecord {
            iter,
            n_dofs: 3961,
            lambda_h1: 80.1234567,
            lambdas: vec![80.1234567],
            err: 21.8027,
            estimator_sq: 171.691,
            effectivity: 0.126988,
            elements: 600,
            seconds: 0.0123456,
        }
    }

    #[test]
    fn sci_format() {
        assert_eq!(format_sci(21.8027), "2.18027e+01");
        assert_eq!(format_sci(171.691), "1.71691e+02");
        assert_eq!(format_sci(0.126988), "1.26988e-01");
        assert_eq!(format_sci(0.0), "0.00000e+00");
        assert_eq!(format_sci(-3.5e-120), "-3.50000e-120");
    }

    #[test]
    fn scientific_row_format() {
        let row = format_csv_row(&record(0));
        assert!(row.contains(",2.18027e+01,1.71691e+02,1.26988e-01,"), "{row}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let table = ConvergenceTable { records: vec![record(0)] };
        write_csv_table(&table, &path).unwrap();
        let first = fs::read(&path).unwrap();
        assert!(!first.contains(&b'\r'));
        let back = read_csv_table(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.records[0].err, 21.8027);
        write_csv_table(&back, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn empty_table_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        assert!(matches!(
            write_csv_table(&ConvergenceTable::default(), &path),
            Err(IoError::EmptyTable)
        ));
        assert!(!path.exists());
        let w = CsvWriter::new(&path);
        assert!(!w.path().exists());
    }

    #[test]
    fn streaming_writer_matches_batch() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let table = ConvergenceTable { records: vec![record(0), record(1)] };
        let mut w = CsvWriter::new(&a);
        w.append(&table.records[0]).unwrap();
        assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 2);
        w.append(&table.records[1]).unwrap();
        write_csv_table(&table, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn unwritable_path() {
        let table = ConvergenceTable { records: vec![record(0)] };
        let r = write_csv_table(&table, Path::new("/nonexistent-dir/t.csv"));
        assert!(matches!(r, Err(IoError::File { .. })));
    }

    #[test]
    fn config_defaults_and_precedence() {
        let c = parse_config_str(r#"{"domain": "tshape"}"#, &ConfigOverrides::default()).unwrap();
        assert_eq!(c.scheme, Scheme::Full);
        assert_eq!(c.estimator, EstimatorKind::Eta);
        assert_eq!(c.mu, 0.5);

        let o = ConfigOverrides {
            max_iter: Some(15),
            ..Default::default()
        };
        let c = parse_config_str(r#"{"domain": "tshape", "max_iter": 20}"#, &o).unwrap();
        assert_eq!(c.max_iter, 15);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"domain": "lshape", "n0": 4}"#).unwrap();
        let c = parse_config(Some(&p), &ConfigOverrides::default()).unwrap();
        assert_eq!((c.domain, c.n0), (Domain::LShape, 4));
    }

    #[test]
    fn config_rejections() {
        let none = ConfigOverrides::default();
        let r = parse_config_str(r#"{"scheme": "reduced", "estimator": "eta"}"#, &none);
        assert!(matches!(r, Err(IoError::Config(_))));
        let r = parse_config_str(r#"{"scheme": "reduced"}"#, &ConfigOverrides {
            estimator: Some(EstimatorKind::Theta),
            ..Default::default()
        });
        assert!(r.is_ok());
        let msg = parse_config_str(r#"{"domian": "tshape"}"#, &none).unwrap_err().to_string();
        assert!(msg.contains("domian"), "{msg}");
        let msg = parse_config_str(r#"{"n0": "six"}"#, &none).unwrap_err().to_string();
        assert!(msg.contains("invalid type"), "{msg}");
    }

    #[test]
    fn vtk_two_triangles() {
        let m = two_triangles();
        let s = vtk_string(
            &m,
            &[
                VtkField::vector("u_h", vec![[1.0, -0.5], [0.25, 0.0]]),
                VtkField::scalar("p_h", vec![0.5, -0.5]),
                VtkField::scalar("eta_T", vec![1e-3, 2.5e-2]),
            ],
            &[VtkField::vector("theta_u", vec![[0.0, 0.0], [0.5, 0.5], [1.0, 0.0], [0.5, -0.5]])],
        )
        .unwrap();
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
        assert_eq!(s, include_str!("../tests/golden/two_triangles.vtk"));
    }

    #[test]
    fn vtk_size_mismatch() {
        let m = two_triangles();
        let r = vtk_string(&m, &[VtkField::scalar("eta_T", vec![1.0; 3])], &[]);
        assert!(matches!(r, Err(IoError::SizeMismatch { expected: 2, found: 3, .. })));
    }

    #[test]
    fn msh_round_trip() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        let s = msh_string(&m);
        let back = parse_msh(&s).unwrap();
        assert_eq!(back.mesh.vertices(), m.vertices());
        assert_eq!(back.mesh.triangles(), m.triangles());
        assert_eq!(back.boundary_lines.len(), m.n_boundary_edges());
        assert_eq!(msh_string(&back.mesh), s);
    }

    #[test]
    fn msh_rebases_and_reorients() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n1\n2 1 \"dom\"\n$EndPhysicalNames\n\
                    $Nodes\n4\n10 0 0 0\n20 1 0 0\n30 1 1 0\n40 0 1 0\n$EndNodes\n\
                    $Elements\n4\n1 15 2 0 1 10\n2 1 2 1 1 10 20\n3 2 2 2 1 10 30 20\n4 2 2 2 1 10 30 40\n$EndElements\n";
        let r = parse_msh(text).unwrap();
        assert_eq!(r.mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(r.boundary_lines, vec![[0, 1]]);
        assert!((r.mesh.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn msh_rejects_quads_and_versions() {
        let quad = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n\
                    $Elements\n1\n7 3 2 1 1 1 2 3 4\n$EndElements\n";
        assert!(matches!(parse_msh(quad), Err(IoError::UnsupportedElement { id: 7, kind: 3 })));
        let v4 = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n";
        assert!(matches!(parse_msh(v4), Err(IoError::UnsupportedMshVersion(_))));
        let binary = "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n";
        assert!(matches!(parse_msh(binary), Err(IoError::UnsupportedMshVersion(_))));
    }

    #[test]
    fn msh_interior_line_rejected() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n\
                    $Elements\n3\n1 1 2 1 1 1 3\n2 2 2 2 1 1 2 3\n3 2 2 2 1 1 3 4\n$EndElements\n";
        assert!(matches!(parse_msh(text), Err(IoError::Parse { .. })));
    }

    #[test]
    fn text_mesh_round_trip() {
        let m = generate_domain(Domain::TShape, 6).unwrap().uniform_refine();
        let back = parse_mesh_text(&mesh_text_string(&m)).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert!(parse_mesh_text("vertices 1\n0 0\ntriangles 1\n0 1 2\n").is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 2.0), (0, 2, -1.0 / 3.0), (2, 0, -1.0 / 3.0), (1, 1, 1e-300)]).unwrap();
        let back = parse_matrix_market(&matrix_market_string(&a)).unwrap();
        assert_eq!(back, a);
        let sym = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 -1\n";
        let s = parse_matrix_market(sym).unwrap();
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(s.get(1, 0), -1.0);
    }
}
