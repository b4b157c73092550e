//! File formats: manifold JSON, field and coefficient CSV, operator cache, and
//! JSON output with 17 significant digits.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteManifold, Edge, GraphSpec};
use crate::scalar::Real;
use crate::spectral::{EdgeCoefficients, SpectralOperator};

/// Pretty JSON whose floats carry 17 significant digits, so that parsing and
/// re-emitting is byte-identical.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Formats a float for CSV output with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub id: usize,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    pub len: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GraphSpec>,
}

impl ManifoldFile {
    pub fn from_manifold<T: Real>(m: &DiscreteManifold<T>) -> Self {
        let coords = m.coords();
        Self {
            vertices: m
                .measure()
                .iter()
                .enumerate()
                .map(|(id, &mu)| VertexRecord {
                    id,
                    mu: mu.to_f64_lossy(),
                    coords: coords.map(|c| c[id]),
                })
                .collect(),
            edges: m
                .edges()
                .iter()
                .map(|e| EdgeRecord {
                    u: e.u,
                    v: e.v,
                    w: e.weight.to_f64_lossy(),
                    len: e.length.to_f64_lossy(),
                    a: e.coefficient.map(|a| a.to_f64_lossy()),
                })
                .collect(),
            generator: m.generator().cloned(),
        }
    }

    pub fn build<T: Real>(&self) -> Result<DiscreteManifold<T>> {
        let n = self.vertices.len();
        let mut measure = vec![None; n];
        let mut coords = vec![None; n];
        for v in &self.vertices {
            if v.id >= n || measure[v.id].is_some() {
                return Err(Error::Parse(format!(
                    "vertex ids must be a permutation of 0..{n}, found {}",
                    v.id
                )));
            }
            measure[v.id] = Some(T::lit(v.mu));
            coords[v.id] = v.coords;
        }
        let measure: Vec<T> = measure.into_iter().map(|m| m.expect("filled")).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut edge = Edge::new(e.u, e.v, T::lit(e.w), T::lit(e.len));
                edge.coefficient = e.a.map(T::lit);
                edge
            })
            .collect();
        let mut m = DiscreteManifold::new(measure, edges)?;
        if coords.iter().all(Option::is_some) && n > 0 {
            m = m.with_coords(coords.into_iter().map(|c| c.expect("checked")).collect());
        }
        if let Some(g) = &self.generator {
            m = m.with_generator(g.clone());
        }
        Ok(m)
    }
}

pub fn write_manifold<T: Real>(path: &Path, m: &DiscreteManifold<T>) -> Result<()> {
    write_json(path, &ManifoldFile::from_manifold(m))
}

/// Reads a manifold file together with the SHA-256 of its bytes.
pub fn read_manifold<T: Real>(path: &Path) -> Result<(DiscreteManifold<T>, String)> {
    let bytes = fs::read(path)?;
    let file: ManifoldFile = serde_json::from_slice(&bytes)?;
    Ok((file.build()?, sha256_hex(&bytes)))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Records of a CSV file, skipping a leading header line.
fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for (i, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        if i == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn parse_num<F: std::str::FromStr>(s: &str, path: &Path, line: usize) -> Result<F> {
    s.parse()
        .map_err(|_| Error::Parse(format!("{}: row {line}: cannot parse `{s}`", path.display())))
}

/// A field read from `vertex_id,value_re[,value_im]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldData<T> {
    pub re: DVector<T>,
    pub im: Option<DVector<T>>,
}

impl<T: Real> FieldData<T> {
    pub fn complex(&self) -> DVector<Complex<T>> {
        let zero = DVector::zeros(self.re.len());
        let im = self.im.as_ref().unwrap_or(&zero);
        DVector::from_iterator(
            self.re.len(),
            self.re.iter().zip(im.iter()).map(|(&a, &b)| Complex::new(a, b)),
        )
    }
}

/// Reads a field; every vertex `0..n` must appear exactly once when `n` is
/// given, otherwise ids must be `0..count`.
pub fn read_field<T: Real>(path: &Path, n: Option<usize>) -> Result<FieldData<T>> {
    let rows = csv_rows(path)?;
    let n = n.unwrap_or(rows.len());
    if rows.len() != n {
        return Err(Error::FieldLength {
            expected: n,
            got: rows.len(),
        });
    }
    let mut re = vec![None; n];
    let mut im = vec![T::zero(); n];
    let mut has_im = false;
    for (line, row) in rows.iter().enumerate() {
        if row.len() < 2 {
            return Err(Error::Parse(format!(
                "{}: row {line}: expected vertex_id,value_re[,value_im]",
                path.display()
            )));
        }
        let id: usize = parse_num(&row[0], path, line)?;
        if id >= n || re[id].is_some() {
            return Err(Error::Parse(format!(
                "{}: vertex id {id} out of range or repeated",
                path.display()
            )));
        }
        re[id] = Some(T::lit(parse_num(&row[1], path, line)?));
        if let Some(v) = row.get(2).filter(|s| !s.is_empty()) {
            im[id] = T::lit(parse_num(v, path, line)?);
            has_im = true;
        }
    }
    Ok(FieldData {
        re: DVector::from_iterator(n, re.into_iter().map(|v| v.expect("all ids present"))),
        im: has_im.then(|| DVector::from_vec(im)),
    })
}

pub fn write_field<T: Real>(path: &Path, re: &DVector<T>, im: Option<&DVector<T>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let header: &[&str] = if im.is_some() {
        &["vertex_id", "value_re", "value_im"]
    } else {
        &["vertex_id", "value_re"]
    };
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for (i, &v) in re.iter().enumerate() {
        let mut row = vec![i.to_string(), format_float(v.to_f64_lossy())];
        if let Some(im) = im {
            row.push(format_float(im[i].to_f64_lossy()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_complex_field<T: Real>(path: &Path, f: &DVector<Complex<T>>) -> Result<()> {
    write_field(path, &f.map(|z| z.re), Some(&f.map(|z| z.im)))
}

/// Edge coefficients from `u,v,a`; every edge must receive one value.
pub fn read_coefficients<T: Real>(
    path: &Path,
    manifold: &DiscreteManifold<T>,
) -> Result<EdgeCoefficients<T>> {
    let index: HashMap<(usize, usize), usize> = manifold
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.u.min(e.v), e.u.max(e.v)), i))
        .collect();
    let mut values = vec![None; manifold.edges().len()];
    for (line, row) in csv_rows(path)?.iter().enumerate() {
        if row.len() < 3 {
            return Err(Error::Parse(format!("{}: row {line}: expected u,v,a", path.display())));
        }
        let u: usize = parse_num(&row[0], path, line)?;
        let v: usize = parse_num(&row[1], path, line)?;
        let a: f64 = parse_num(&row[2], path, line)?;
        let Some(&e) = index.get(&(u.min(v), u.max(v))) else {
            return Err(Error::Parse(format!("{}: ({u}, {v}) is not an edge", path.display())));
        };
        values[e] = Some(T::lit(a));
    }
    let values: Vec<T> = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("edge {i} has no coefficient"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Parse("no coefficients".into()));
    }
    let lower = values.iter().copied().fold(values[0], |a, b| a.min(b));
    let upper = values.iter().copied().fold(values[0], |a, b| a.max(b));
    Ok(EdgeCoefficients {
        values,
        lower,
        upper,
    })
}

/// Eigenpairs stored next to the hash of the manifold file they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorCache {
    pub manifold_sha256: String,
    pub form: String,
    pub order: f64,
    pub kernel_dim: usize,
    pub measure: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Column-major.
    pub eigenvectors: Vec<f64>,
}

impl OperatorCache {
    pub fn new<T: Real>(op: &SpectralOperator<T>, manifold_sha256: &str, form: &str) -> Self {
        let f = |x: &T| x.to_f64_lossy();
        Self {
            manifold_sha256: manifold_sha256.to_string(),
            form: form.to_string(),
            order: op.order().to_f64_lossy(),
            kernel_dim: op.kernel_dim(),
            measure: op.measure().iter().map(f).collect(),
            eigenvalues: op.eigenvalues().iter().map(f).collect(),
            eigenvectors: op.eigenvectors().iter().map(f).collect(),
        }
    }

    pub fn operator<T: Real>(&self) -> Result<SpectralOperator<T>> {
        let n = self.eigenvalues.len();
        if self.eigenvectors.len() != n * n {
            return Err(Error::Parse("cached eigenvector block has the wrong size".into()));
        }
        SpectralOperator::from_parts(
            DVector::from_iterator(n, self.eigenvalues.iter().map(|&x| T::lit(x))),
            DMatrix::from_iterator(n, n, self.eigenvectors.iter().map(|&x| T::lit(x))),
            DVector::from_iterator(n, self.measure.iter().map(|&x| T::lit(x))),
            T::lit(self.order),
            self.kernel_dim,
        )
    }
}

pub fn save_operator<T: Real>(
    path: &Path,
    op: &SpectralOperator<T>,
    manifold_sha256: &str,
    form: &str,
) -> Result<()> {
    write_json(path, &OperatorCache::new(op, manifold_sha256, form))
}

/// The cached operator, or `None` when the file is missing, unreadable or was
/// built from a different manifold or form.
pub fn load_operator<T: Real>(
    path: &Path,
    manifold_sha256: &str,
    form: &str,
) -> Option<SpectralOperator<T>> {
    let bytes = fs::read(path).ok()?;
    let cache: OperatorCache = serde_json::from_slice(&bytes).ok()?;
    if cache.manifold_sha256 != manifold_sha256 || cache.form != form {
        return None;
    }
    cache.operator().ok()
}
