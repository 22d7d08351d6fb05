//! Text and binary file formats.
//!
//! Readers take any `BufRead`/`Read` and report the 1-based line number on
//! malformed input; the `*_file` helpers wrap them with path-aware I/O
//! errors. Writers are deterministic: the same values always produce the
//! same bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::constraints::{GrayImage, PointNormalCloud, SdfGrid};
use crate::error::{Error, Result};
use crate::extract::{Polyline2D, TriMesh};
use crate::geometry::{Constraint, Point};
use crate::kernel::KernelKind;
use crate::model::RbfModel;
use crate::scalar::Real;
use crate::warp::CorrespondenceSet;

/// Overrides the significant digits of geometry outputs (OBJ, polylines,
/// constraint files).
pub const PRECISION_ENV: &str = "VARIMORPH_PRECISION";

/// Digits that round-trip any `f64` exactly.
pub const MODEL_DIGITS: usize = 17;

pub const GEOMETRY_DIGITS: usize = 9;

const MODEL_MAGIC: &str = "varimorph-model 1";

/// Significant digits for geometry outputs, honoring [`PRECISION_ENV`]
/// when it holds an integer in `1..=17`.
pub fn geometry_digits() -> usize {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|d| (1..=MODEL_DIGITS).contains(d))
        .unwrap_or(GEOMETRY_DIGITS)
}

/// Formats `v` with `digits` significant digits, `%g` style: fixed
/// notation for moderate exponents, scientific otherwise, no trailing zeros.
pub fn format_sig(v: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Runs a writer against a file and flushes it.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Re-labels a stream error with the file it came from.
fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn stream_error(e: io::Error) -> Error {
    Error::io("<stream>", e)
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(stream_error(e))),
        Ok(l) => {
            let body = l.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then(|| Ok((i + 1, body.to_string())))
        }
    })
}

fn parse_real<T: Real>(line: usize, field: &str) -> Result<T> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number '{field}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite number '{field}'")));
    }
    Ok(T::lit(v))
}

fn parse_reals<T: Real>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace().map(|f| parse_real(line, f)).collect()
}

fn parse_count(line: usize, field: Option<&str>, what: &str) -> Result<usize> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::parse(line, format!("expected an integer {what}")))
}

fn join<T: Real>(values: &[T], digits: usize) -> String {
    values
        .iter()
        .map(|v| format_sig(v.as_f64(), digits))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------- PGM

fn pgm_token<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read(&mut byte) {
            Ok(0) => {
                if token.is_empty() {
                    return Err(stream_error(io::Error::new(
                        io::ErrorKind::UnexpectedEof,
                        format!("truncated PGM header: missing {what}"),
                    )));
                }
                break;
            }
            Ok(_) => {}
            Err(e) => return Err(stream_error(e)),
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            // Skip the comment up to the end of its line.
            loop {
                match r.read(&mut byte) {
                    Ok(0) => break,
                    Ok(_) if byte[0] == b'\n' || byte[0] == b'\r' => break,
                    Ok(_) => {}
                    Err(e) => return Err(stream_error(e)),
                }
            }
        } else if c.is_ascii_whitespace() {
            if !token.is_empty() {
                break;
            }
        } else {
            token.push(c);
        }
    }
    Ok(String::from_utf8_lossy(&token).into_owned())
}

/// Reads a binary P5 image with maxval 255.
pub fn read_pgm<T: Real, R: Read>(mut r: R) -> Result<GrayImage<T>> {
    let magic = pgm_token(&mut r, "magic number")?;
    if magic != "P5" {
        return Err(Error::UnsupportedFormat(format!(
            "expected binary PGM header P5, found '{magic}'"
        )));
    }
    let dims: Vec<usize> = ["width", "height"]
        .iter()
        .map(|what| {
            let tok = pgm_token(&mut r, what)?;
            tok.parse()
                .ok()
                .filter(|&n: &usize| n > 0)
                .ok_or_else(|| Error::UnsupportedFormat(format!("invalid PGM {what} '{tok}'")))
        })
        .collect::<Result<_>>()?;
    let maxval = pgm_token(&mut r, "maxval")?;
    if maxval != "255" {
        return Err(Error::UnsupportedFormat(format!(
            "P5 with maxval {maxval}; only 255 is supported"
        )));
    }
    let (w, h) = (dims[0], dims[1]);
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data).map_err(stream_error)?;
    GrayImage::new(w, h, data.into_iter().map(|b| T::lit(f64::from(b))).collect())
}

/// Writes a P5 image; pixel values are rounded and clamped to `0..=255`.
pub fn write_pgm<T: Real, W: Write>(img: &GrayImage<T>, mut w: W) -> io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|p| p.as_f64().round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)
}

pub fn load_pgm<T: Real>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    with_path(path, read_pgm(open(path)?))
}

pub fn save_pgm<T: Real>(img: &GrayImage<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_pgm(img, w))
}

/// Linear map used to store a signed distance field as 8-bit pixels:
/// `pixel = (value - min) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfScale {
    pub min: f64,
    pub max: f64,
    pub scale: f64,
}

impl SdfScale {
    pub fn to_value(&self, pixel: f64) -> f64 {
        if self.scale == 0.0 {
            self.min
        } else {
            self.min + pixel / self.scale
        }
    }
}

/// Sidecar path for an SDF image: `name.pgm` → `name.pgm.scale`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Writes the field as a rescaled P5 image plus a sidecar text file
/// recording the map back to distances.
pub fn save_sdf_pgm<T: Real>(sdf: &SdfGrid<T>, path: impl AsRef<Path>) -> Result<SdfScale> {
    let path = path.as_ref();
    let (min, max) = sdf
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.as_f64()), hi.max(v.as_f64()))
        });
    let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
    let img = GrayImage::<f64>::new(
        sdf.width,
        sdf.height,
        sdf.values.iter().map(|v| (v.as_f64() - min) * scale).collect(),
    )?;
    save_pgm(&img, path)?;
    let info = SdfScale { min, max, scale };
    write_file(&sidecar_path(path), |w| {
        writeln!(w, "min {}", format_sig(min, MODEL_DIGITS))?;
        writeln!(w, "max {}", format_sig(max, MODEL_DIGITS))?;
        writeln!(w, "scale {}", format_sig(scale, MODEL_DIGITS))
    })?;
    Ok(info)
}

pub fn load_sdf_scale(path: impl AsRef<Path>) -> Result<SdfScale> {
    let path = path.as_ref();
    let mut fields = [None; 3];
    for line in content_lines(open(path)?) {
        let (n, text) = with_path(path, line)?;
        let (key, value) = text
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(n, "expected 'key value'"))?;
        let slot = match key {
            "min" => 0,
            "max" => 1,
            "scale" => 2,
            other => return Err(Error::parse(n, format!("unknown key '{other}'"))),
        };
        fields[slot] = Some(parse_real::<f64>(n, value.trim())?);
    }
    match fields {
        [Some(min), Some(max), Some(scale)] => Ok(SdfScale { min, max, scale }),
        _ => Err(Error::parse(0, "scale file needs min, max and scale")),
    }
}

// ---------------------------------------------------------------- OBJ

/// Vertices, triangles and optional per-vertex normals of an OBJ file.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjData<T> {
    pub vertices: Vec<[T; 3]>,
    pub normals: Vec<[T; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Normal index referenced by each corner of each triangle, when given.
    pub corner_normals: Vec<[Option<usize>; 3]>,
}

fn obj_index(line: usize, field: &str, count: usize, what: &str) -> Result<usize> {
    let raw: i64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} index '{field}'")))?;
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::parse(
            line,
            format!("{what} index {raw} out of range (have {count})"),
        ));
    }
    Ok(idx as usize)
}

fn vec3<T: Real>(line: usize, rest: &[&str]) -> Result<[T; 3]> {
    if rest.len() < 3 {
        return Err(Error::parse(line, "expected three coordinates"));
    }
    Ok([
        parse_real(line, rest[0])?,
        parse_real(line, rest[1])?,
        parse_real(line, rest[2])?,
    ])
}

/// Parses `v`, `vn` and `f` records; polygons are fan-triangulated and
/// other records ignored.
pub fn read_obj<T: Real, R: BufRead>(reader: R) -> Result<ObjData<T>> {
    let mut data = ObjData {
        vertices: Vec::new(),
        normals: Vec::new(),
        triangles: Vec::new(),
        corner_normals: Vec::new(),
    };
    for line in content_lines(reader) {
        let (n, text) = line?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        match fields[0] {
            "v" => data.vertices.push(vec3(n, &fields[1..])?),
            "vn" => data.normals.push(vec3(n, &fields[1..])?),
            "f" => {
                if fields.len() < 4 {
                    return Err(Error::parse(n, "face needs at least three vertices"));
                }
                let mut corners = Vec::with_capacity(fields.len() - 1);
                for f in &fields[1..] {
                    let mut parts = f.split('/');
                    let v = obj_index(n, parts.next().unwrap_or(""), data.vertices.len(), "vertex")?;
                    let _texture = parts.next();
                    let vn = match parts.next() {
                        Some(s) if !s.is_empty() => {
                            Some(obj_index(n, s, data.normals.len(), "normal")?)
                        }
                        _ => None,
                    };
                    corners.push((v, vn));
                }
                for i in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[i], corners[i + 1]];
                    data.triangles.push(tri.map(|c| c.0));
                    data.corner_normals.push(tri.map(|c| c.1));
                }
            }
            _ => {}
        }
    }
    Ok(data)
}

fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Area-weighted average of incident face normals, unit length.
pub fn vertex_normals<T: Real>(vertices: &[[T; 3]], triangles: &[[usize; 3]]) -> Result<Vec<[T; 3]>> {
    let mut acc = vec![[T::zero(); 3]; vertices.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i]);
        // |cross| is twice the area, so summing it weights by area.
        let n = cross(sub(b, a), sub(c, a));
        for &i in t {
            for axis in 0..3 {
                acc[i][axis] = acc[i][axis] + n[axis];
            }
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = crate::scalar::norm(&n);
            if len > T::zero() {
                Ok(n.map(|c| c / len))
            } else {
                Err(Error::InvalidNormal {
                    index: i,
                    length: len.as_f64(),
                })
            }
        })
        .collect()
}

impl<T: Real> ObjData<T> {
    /// Points with normals: explicit `vn` records when present (paired by
    /// index, or through face references), otherwise computed from faces.
    pub fn into_cloud(self) -> Result<PointNormalCloud<T>> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyShape("OBJ input has no vertices".into()));
        }
        if self.normals.is_empty() {
            let normals = vertex_normals(&self.vertices, &self.triangles)?;
            return PointNormalCloud::new(self.vertices, normals);
        }
        if self.normals.len() == self.vertices.len() {
            return PointNormalCloud::new(self.vertices, self.normals);
        }
        let mut assigned: Vec<Option<[T; 3]>> = vec![None; self.vertices.len()];
        for (tri, refs) in self.triangles.iter().zip(&self.corner_normals) {
            for (&v, r) in tri.iter().zip(refs) {
                if let Some(r) = r {
                    assigned[v].get_or_insert(self.normals[*r]);
                }
            }
        }
        let normals = assigned
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                n.ok_or_else(|| {
                    Error::SizeMismatch(format!("vertex {} has no normal record", i + 1))
                })
            })
            .collect::<Result<_>>()?;
        PointNormalCloud::new(self.vertices, normals)
    }

    pub fn into_mesh(self) -> TriMesh<T> {
        TriMesh {
            vertices: self.vertices,
            triangles: self.triangles,
        }
    }
}

pub fn load_obj<T: Real>(path: impl AsRef<Path>) -> Result<PointNormalCloud<T>> {
    let path = path.as_ref();
    with_path(path, read_obj(open(path)?).and_then(ObjData::into_cloud))
}

pub fn load_obj_mesh<T: Real>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    with_path(path, read_obj(open(path)?).map(ObjData::into_mesh))
}

/// `v` and `f` records with 1-based indices.
pub fn write_obj<T: Real, W: Write>(mesh: &TriMesh<T>, mut w: W, digits: usize) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {}", join(v, digits))?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn save_obj<T: Real>(mesh: &TriMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let digits = geometry_digits();
    write_file(path.as_ref(), |w| write_obj(mesh, w, digits))
}

// ---------------------------------------------------------------- constraints

/// Reads `dim <d>` followed by lines of `d` coordinates and a value.
pub fn read_constraints<T: Real, R: BufRead>(reader: R) -> Result<Vec<Constraint<T>>> {
    let mut dim = None;
    let mut out = Vec::new();
    for line in content_lines(reader) {
        let (n, text) = line?;
        let Some(d) = dim else {
            let mut f = text.split_whitespace();
            if f.next() != Some("dim") {
                return Err(Error::parse(n, "expected header 'dim <d>'"));
            }
            dim = Some(parse_count(n, f.next(), "dimension")?);
            continue;
        };
        let values: Vec<T> = parse_reals(n, &text)?;
        if values.len() != d + 1 {
            return Err(Error::parse(
                n,
                format!("expected {} fields, found {}", d + 1, values.len()),
            ));
        }
        let value = values[d];
        let position = Point::new(values[..d].to_vec()).map_err(|e| Error::parse(n, e.to_string()))?;
        out.push(Constraint::new(position, value).map_err(|e| Error::parse(n, e.to_string()))?);
    }
    if dim.is_none() {
        return Err(Error::parse(0, "missing header 'dim <d>'"));
    }
    Ok(out)
}

pub fn write_constraints<T: Real, W: Write>(
    dim: usize,
    constraints: &[Constraint<T>],
    mut w: W,
    digits: usize,
) -> io::Result<()> {
    writeln!(w, "dim {dim}")?;
    for c in constraints {
        writeln!(
            w,
            "{} {}",
            join(c.position.coords(), digits),
            format_sig(c.value.as_f64(), digits)
        )?;
    }
    Ok(())
}

pub fn load_constraints<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Constraint<T>>> {
    let path = path.as_ref();
    with_path(path, read_constraints(open(path)?))
}

pub fn save_constraints<T: Real>(dim: usize, constraints: &[Constraint<T>], path: impl AsRef<Path>) -> Result<()> {
    let digits = geometry_digits();
    write_file(path.as_ref(), |w| write_constraints(dim, constraints, w, digits))
}

// ---------------------------------------------------------------- model

/// Header, one line per center (coordinates then weight), then the
/// polynomial `p0 p1 .. pd`; always 17 significant digits.
pub fn write_model<T: Real, W: Write>(model: &RbfModel<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "dim {}", model.dim())?;
    writeln!(w, "kernel {}", model.kernel().name())?;
    writeln!(w, "k {}", model.len())?;
    for (i, c) in model.centers().enumerate() {
        writeln!(
            w,
            "{} {}",
            join(c, MODEL_DIGITS),
            format_sig(model.weights()[i].as_f64(), MODEL_DIGITS)
        )?;
    }
    writeln!(w, "poly {}", join(model.poly(), MODEL_DIGITS))
}

fn header_value<'a>(
    lines: &mut impl Iterator<Item = Result<(usize, String)>>,
    key: &str,
    buf: &'a mut String,
) -> Result<(usize, &'a str)> {
    let (n, text) = lines
        .next()
        .ok_or_else(|| Error::parse(0, format!("missing '{key}' line")))??;
    *buf = text;
    let rest = buf
        .strip_prefix(key)
        .filter(|r| r.starts_with(char::is_whitespace))
        .ok_or_else(|| Error::parse(n, format!("expected '{key} ...'")))?;
    Ok((n, rest.trim()))
}

pub fn read_model<T: Real, R: BufRead>(reader: R) -> Result<RbfModel<T>> {
    let mut lines = content_lines(reader);
    let (n, magic) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty model file"))??;
    if magic != MODEL_MAGIC {
        return Err(Error::parse(n, format!("expected '{MODEL_MAGIC}'")));
    }
    let mut buf = String::new();
    let (n, dim) = header_value(&mut lines, "dim", &mut buf)?;
    let dim = parse_count(n, Some(dim), "dimension")?;
    let (n, kernel) = header_value(&mut lines, "kernel", &mut buf)?;
    let kernel: KernelKind = kernel
        .parse()
        .map_err(|_| Error::parse(n, format!("unknown kernel '{kernel}'")))?;
    let (n, k) = header_value(&mut lines, "k", &mut buf)?;
    let k = parse_count(n, Some(k), "center count")?;
    let mut centers = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for _ in 0..k {
        let (n, text) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("expected {k} center lines")))??;
        let values: Vec<T> = parse_reals(n, &text)?;
        if values.len() != dim + 1 {
            return Err(Error::parse(
                n,
                format!("expected {} fields, found {}", dim + 1, values.len()),
            ));
        }
        weights.push(values[dim]);
        centers.push(Point::new(values[..dim].to_vec()).map_err(|e| Error::parse(n, e.to_string()))?);
    }
    let (n, poly) = header_value(&mut lines, "poly", &mut buf)?;
    let poly: Vec<T> = parse_reals(n, poly)?;
    if let Some(extra) = lines.next() {
        let (n, _) = extra?;
        return Err(Error::parse(n, "unexpected trailing content"));
    }
    if poly.len() != dim + 1 {
        return Err(Error::parse(
            n,
            format!("expected {} polynomial coefficients", dim + 1),
        ));
    }
    RbfModel::from_parts(centers, weights, poly, kernel)
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<RbfModel<T>> {
    let path = path.as_ref();
    with_path(path, read_model(open(path)?))
}

pub fn save_model<T: Real>(model: &RbfModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_model(model, w))
}

// ---------------------------------------------------------------- polylines

/// One `x y` pair per line, loops separated by blank lines. A closed loop
/// repeats its first point at the end.
pub fn write_polyline<T: Real, W: Write>(poly: &Polyline2D<T>, mut w: W, digits: usize) -> io::Result<()> {
    for (i, (pts, &closed)) in poly.loops.iter().zip(&poly.closed).enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        let first = pts.first().filter(|_| closed);
        for p in pts.iter().chain(first) {
            writeln!(w, "{}", join(p, digits))?;
        }
    }
    Ok(())
}

pub fn read_polyline<T: Real, R: BufRead>(reader: R) -> Result<Polyline2D<T>> {
    let mut poly = Polyline2D {
        loops: Vec::new(),
        closed: Vec::new(),
    };
    let mut current: Vec<[T; 2]> = Vec::new();
    let finish = |current: &mut Vec<[T; 2]>, poly: &mut Polyline2D<T>| {
        if current.is_empty() {
            return;
        }
        let closed = current.len() > 2 && current.first() == current.last();
        if closed {
            current.pop();
        }
        poly.loops.push(std::mem::take(current));
        poly.closed.push(closed);
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(stream_error)?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            finish(&mut current, &mut poly);
            continue;
        }
        let v: Vec<T> = parse_reals(i + 1, text)?;
        if v.len() != 2 {
            return Err(Error::parse(i + 1, format!("expected 2 fields, found {}", v.len())));
        }
        current.push([v[0], v[1]]);
    }
    finish(&mut current, &mut poly);
    Ok(poly)
}

pub fn save_polyline<T: Real>(poly: &Polyline2D<T>, path: impl AsRef<Path>) -> Result<()> {
    let digits = geometry_digits();
    write_file(path.as_ref(), |w| write_polyline(poly, w, digits))
}

pub fn load_polyline<T: Real>(path: impl AsRef<Path>) -> Result<Polyline2D<T>> {
    let path = path.as_ref();
    with_path(path, read_polyline(open(path)?))
}

// ---------------------------------------------------------------- correspondences

/// `dim <d> count <k>`, then `k` lines of `2d` reals: a point on A followed
/// by its partner on B.
pub fn read_correspondences<T: Real, R: BufRead>(reader: R) -> Result<CorrespondenceSet<T>> {
    let mut lines = content_lines(reader);
    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "missing header 'dim <d> count <k>'"))??;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 4 || f[0] != "dim" || f[2] != "count" {
        return Err(Error::parse(n, "expected header 'dim <d> count <k>'"));
    }
    let dim = parse_count(n, Some(f[1]), "dimension")?;
    let count = parse_count(n, Some(f[3]), "count")?;
    let mut a = Vec::with_capacity(count);
    let mut b = Vec::with_capacity(count);
    for line in lines {
        let (n, text) = line?;
        let v: Vec<T> = parse_reals(n, &text)?;
        if v.len() != 2 * dim {
            return Err(Error::parse(
                n,
                format!("expected {} fields, found {}", 2 * dim, v.len()),
            ));
        }
        a.push(Point::new(v[..dim].to_vec())?);
        b.push(Point::new(v[dim..].to_vec())?);
    }
    if a.len() != count {
        return Err(Error::parse(
            0,
            format!("header declares {count} correspondences, found {}", a.len()),
        ));
    }
    CorrespondenceSet::new(a, b)
}

pub fn write_correspondences<T: Real, W: Write>(corr: &CorrespondenceSet<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "dim {} count {}", corr.dim(), corr.len())?;
    for (a, b) in corr.a_points.iter().zip(&corr.b_points) {
        writeln!(w, "{} {}", join(a.coords(), MODEL_DIGITS), join(b.coords(), MODEL_DIGITS))?;
    }
    Ok(())
}

pub fn load_correspondences<T: Real>(path: impl AsRef<Path>) -> Result<CorrespondenceSet<T>> {
    let path = path.as_ref();
    with_path(path, read_correspondences(open(path)?))
}

// ---------------------------------------------------------------- slice manifest

#[derive(Debug, Clone, PartialEq)]
pub enum SlicePlacement<T> {
    /// Parallel slice at height `z`.
    Height(T),
    /// Row-major 3×4 rigid transform.
    Rigid([T; 12]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceEntry<T> {
    /// Constraint file, resolved against the manifest's directory.
    pub path: PathBuf,
    pub placement: SlicePlacement<T>,
}

/// Lines of `<path> z <pos>` or `<path> transform <12 reals>`. Relative
/// paths are resolved against `base`.
pub fn read_slice_manifest<T: Real, R: BufRead>(reader: R, base: &Path) -> Result<Vec<SliceEntry<T>>> {
    let mut out = Vec::new();
    for line in content_lines(reader) {
        let (n, text) = line?;
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() < 3 {
            return Err(Error::parse(n, "expected '<path> z <pos>' or '<path> transform <12 reals>'"));
        }
        let placement = match f[1] {
            "z" if f.len() == 3 => SlicePlacement::Height(parse_real(n, f[2])?),
            "transform" if f.len() == 14 => {
                let v: Vec<T> = f[2..].iter().map(|s| parse_real(n, s)).collect::<Result<_>>()?;
                SlicePlacement::Rigid(v.try_into().expect("twelve values"))
            }
            "z" | "transform" => {
                return Err(Error::parse(n, format!("wrong field count for '{}'", f[1])))
            }
            other => return Err(Error::parse(n, format!("unknown placement '{other}'"))),
        };
        out.push(SliceEntry {
            path: base.join(f[0]),
            placement,
        });
    }
    Ok(out)
}

pub fn load_slice_manifest<T: Real>(path: impl AsRef<Path>) -> Result<Vec<SliceEntry<T>>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    with_path(path, read_slice_manifest(open(path)?, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(123456789012.0, 9), "1.23456789e11");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(format_sig(31.5, 9), "31.5");
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-9, -7.123456789012345e200] {
            assert_eq!(format_sig(v, 17).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn pgm_bytes_in_row_major_order() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let img: GrayImage<f64> = read_pgm(&bytes[..]).unwrap();
        assert_eq!(img.pixels(), &[0.0, 255.0, 128.0, 64.0]);
        assert_eq!(img.get(1, 0), 255.0);
        let mut out = Vec::new();
        write_pgm(&img, &mut out).unwrap();
        assert_eq!(out, bytes);
    }

    #[test]
    fn pgm_header_comments() {
        let bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n\x01\x02";
        let img: GrayImage<f32> = read_pgm(&bytes[..]).unwrap();
        assert_eq!(img.pixels(), &[1.0, 2.0]);
    }

    #[test]
    fn pgm_rejects_other_headers() {
        for (bytes, needle) in [
            (&b"P2\n1 1\n255\n0"[..], "P2"),
            (&b"P6\n1 1\n255\n\x00\x00\x00"[..], "P6"),
            (&b"P5\n1 1\n65535\n\x00\x00"[..], "65535"),
        ] {
            let err = read_pgm::<f64, _>(bytes).unwrap_err();
            assert!(matches!(err, Error::UnsupportedFormat(_)));
            assert!(err.to_string().contains(needle), "{err}");
        }
    }

    #[test]
    fn truncated_pgm_is_io_error() {
        let err = read_pgm::<f64, _>(&b"P5\n4 4\n255\n\x00\x01"[..]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        let err = read_pgm::<f64, _>(&b"P5\n4"[..]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn obj_with_normals_passes_through() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nvn 0 0 2\nvn 0 0 2\nf 1//1 2//2 3//3\n";
        let cloud: PointNormalCloud<f64> = read_obj(text.as_bytes()).unwrap().into_cloud().unwrap();
        assert_eq!(cloud.normals, vec![[0.0, 0.0, 2.0]; 3]);
    }

    #[test]
    fn obj_face_index_out_of_range() {
        let text = "v 0 0 0\nv 1 0 0\n\nf 1 2 3\n";
        match read_obj::<f64, _>(text.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn empty_obj_is_empty_cloud() {
        let err = read_obj::<f64, _>(&b""[..]).unwrap().into_cloud().unwrap_err();
        assert!(matches!(err, Error::EmptyShape(_)));
    }

    #[test]
    fn obj_round_trip() {
        let mesh = TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.25]],
            triangles: vec![[0, 1, 2]],
        };
        let mut out = Vec::new();
        write_obj(&mesh, &mut out, 9).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "v 0 0 0\nv 1 0 0\nv 0 1 0.25\nf 1 2 3\n"
        );
        let back: TriMesh<f64> = read_obj(&out[..]).unwrap().into_mesh();
        assert_eq!(back, mesh);
    }

    #[test]
    fn constraints_round_trip() {
        let cs = vec![
            Constraint::at(&[0.1, 0.2], 0.0),
            Constraint::at(&[1.0 / 3.0, -4.0], 1.0),
        ];
        let mut out = Vec::new();
        write_constraints(2, &cs, &mut out, 17).unwrap();
        let back: Vec<Constraint<f64>> = read_constraints(&out[..]).unwrap();
        assert_eq!(back, cs);
        let err = read_constraints::<f64, _>(&b"dim 2\n# c\n1 2 3\n1 2\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn polyline_round_trip() {
        let poly = Polyline2D {
            loops: vec![
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
                vec![[5.0, 5.0], [6.0, 5.5]],
            ],
            closed: vec![true, false],
        };
        let mut out = Vec::new();
        write_polyline(&poly, &mut out, 9).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "0 0\n1 0\n1 1\n0 0\n\n5 5\n6 5.5\n"
        );
        let back: Polyline2D<f64> = read_polyline(&out[..]).unwrap();
        assert_eq!(back, poly);
    }

    #[test]
    fn manifest_entries() {
        let text = "a.txt z 0\nb.txt z 1.5\nc.txt transform 1 0 0 0  0 0 -1 0  0 1 0 2\n";
        let m: Vec<SliceEntry<f64>> = read_slice_manifest(text.as_bytes(), Path::new("dir")).unwrap();
        assert_eq!(m[0].path, Path::new("dir/a.txt"));
        assert_eq!(m[1].placement, SlicePlacement::Height(1.5));
        assert!(matches!(m[2].placement, SlicePlacement::Rigid(r) if r[11] == 2.0));
        assert!(read_slice_manifest::<f64, _>(&b"a.txt y 3\n"[..], Path::new("")).is_err());
    }

    #[test]
    fn correspondence_header_checked() {
        let text = "dim 2 count 3\n0 0 1 1\n1 0 2 1\n0 1 1 2\n";
        let c: CorrespondenceSet<f64> = read_correspondences(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.b_points[2].coords(), &[1.0, 2.0]);
        let bad = "dim 2 count 4\n0 0 1 1\n1 0 2 1\n0 1 1 2\n";
        assert!(read_correspondences::<f64, _>(bad.as_bytes()).is_err());
    }
}
