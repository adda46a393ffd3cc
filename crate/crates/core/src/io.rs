//! File formats: point clouds, keypoint pairings, plans, reports and plot
//! data.
//!
//! - Points: CSV with header `x0,x1,...` followed by optional `weight` and
//!   `label` columns. Missing weights mean uniform.
//! - Keypoints: JSON `{"indexing": 0, "pairs": [[i, j], ...]}`; `indexing: 1`
//!   is accepted and converted.
//! - Plans: dense CSV without header when `min(m, n) <= 512`, otherwise
//!   sparse `i,j,value` triplets with a header line. Values are written in
//!   shortest round-trip form, so reading a plan back is exact.
//! - Reports: JSON described by `schema/report.schema.json`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::distribution::{make_distribution, DiscreteDistribution, KeypointPairing};
use crate::error::{Error, Result};

/// Largest `min(m, n)` written as a dense matrix.
pub const DENSE_LIMIT: usize = 512;

/// JSON schema of report files.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// A point cloud as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFile {
    pub points: Array2<f64>,
    pub weights: Option<Array1<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl PointFile {
    /// Distribution with the file's weights (uniform if absent).
    pub fn distribution(&self, raw_mass: bool) -> Result<DiscreteDistribution> {
        let n = self.points.nrows();
        let w = self
            .weights
            .clone()
            .unwrap_or_else(|| Array1::from_elem(n, 1.0 / n as f64));
        make_distribution(self.points.clone(), w, raw_mass)
    }
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what} on record {line}: cannot parse '{field}'")))
}

pub fn parse_points(text: &str) -> Result<PointFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let mut dim = 0;
    let (mut weight_col, mut label_col) = (None, None);
    for (c, h) in headers.iter().enumerate() {
        if h == format!("x{dim}") && weight_col.is_none() && label_col.is_none() {
            dim += 1;
        } else if h == "weight" && weight_col.is_none() && label_col.is_none() {
            weight_col = Some(c);
        } else if h == "label" && label_col.is_none() {
            label_col = Some(c);
        } else {
            return Err(Error::Parse(format!(
                "unexpected column '{h}'; expected x0,x1,... then optional weight and label"
            )));
        }
    }
    if dim == 0 {
        return Err(Error::Parse("point file has no coordinate columns".into()));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::Parse(format!(
                "record {} has {} fields, header has {}",
                r + 1,
                rec.len(),
                headers.len()
            )));
        }
        for c in 0..dim {
            coords.push(parse_f64(&rec[c], "coordinate", r + 1)?);
        }
        if let Some(c) = weight_col {
            weights.push(parse_f64(&rec[c], "weight", r + 1)?);
        }
        if let Some(c) = label_col {
            labels.push(rec[c].trim().parse::<usize>().map_err(|_| {
                Error::Parse(format!("label on record {}: cannot parse '{}'", r + 1, &rec[c]))
            })?);
        }
    }
    let n = coords.len() / dim;
    if n == 0 {
        return Err(Error::Parse("point file has no records".into()));
    }
    let points = Array2::from_shape_vec((n, dim), coords).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(PointFile {
        points,
        weights: weight_col.map(|_| Array1::from(weights)),
        labels: label_col.map(|_| labels),
    })
}

pub fn read_points(path: &Path) -> Result<PointFile> {
    parse_points(&read_to_string(path)?)
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_points(
    path: &Path,
    dist: &DiscreteDistribution,
    labels: Option<&[usize]>,
) -> Result<()> {
    let mut w = create(path)?;
    let mut header: Vec<String> = (0..dist.dim()).map(|d| format!("x{d}")).collect();
    header.push("weight".into());
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in dist.points().outer_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(dist.weights()[i].to_string());
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct KeypointFile {
    #[serde(default)]
    indexing: usize,
    pairs: Vec<(usize, usize)>,
}

pub fn parse_keypoints(text: &str) -> Result<KeypointPairing> {
    let file: KeypointFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("keypoints: {e}")))?;
    let pairs = match file.indexing {
        0 => file.pairs,
        1 => file
            .pairs
            .iter()
            .map(|&(i, j)| {
                if i == 0 || j == 0 {
                    Err(Error::Parse(format!("pair ({i}, {j}) is not 1-based")))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<_>>()?,
        other => return Err(Error::Parse(format!("indexing must be 0 or 1, got {other}"))),
    };
    KeypointPairing::new(pairs)
}

pub fn read_keypoints(path: &Path) -> Result<KeypointPairing> {
    parse_keypoints(&read_to_string(path)?)
}

pub fn write_keypoints(path: &Path, kp: &KeypointPairing) -> Result<()> {
    let file = KeypointFile {
        indexing: 0,
        pairs: kp.pairs().to_vec(),
    };
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Plan in the file format, as a string.
pub fn format_plan(plan: ArrayView2<f64>) -> String {
    let (m, n) = plan.dim();
    let mut out = String::new();
    if m.min(n) <= DENSE_LIMIT {
        for row in plan.outer_iter() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    } else {
        out.push_str(&format!("i,j,value\n# shape {m} {n}\n"));
        for ((i, j), &v) in plan.indexed_iter() {
            if v != 0.0 {
                out.push_str(&format!("{i},{j},{v}\n"));
            }
        }
    }
    out
}

pub fn write_plan(path: &Path, plan: ArrayView2<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(format_plan(plan).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads either plan layout. Sparse files carry a `# shape m n` line.
pub fn parse_plan(text: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    if lines.peek().map(|l| l.trim()) == Some("i,j,value") {
        lines.next();
        let shape = lines
            .next()
            .and_then(|l| l.strip_prefix("# shape "))
            .ok_or_else(|| Error::Parse("sparse plan lacks '# shape m n' line".into()))?;
        let dims: Vec<usize> = shape
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("plan shape: {e}")))?;
        if dims.len() != 2 {
            return Err(Error::Parse(format!("plan shape '{shape}'")));
        }
        let mut plan = Array2::zeros((dims[0], dims[1]));
        for (r, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("sparse plan record {}: '{line}'", r + 1)));
            }
            let i: usize = f[0].trim().parse().map_err(|_| Error::Parse(format!("row index '{}'", f[0])))?;
            let j: usize = f[1].trim().parse().map_err(|_| Error::Parse(format!("column index '{}'", f[1])))?;
            if i >= dims[0] || j >= dims[1] {
                return Err(Error::Parse(format!("entry ({i}, {j}) outside {}x{}", dims[0], dims[1])));
            }
            plan[[i, j]] = parse_f64(f[2], "plan value", r + 1)?;
        }
        return Ok(plan);
    }
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (r, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| parse_f64(f, "plan value", r + 1))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!("plan row {} has {} entries, expected {c}", r + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse("empty plan file".into()))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_plan(path: &Path) -> Result<Array2<f64>> {
    parse_plan(&read_to_string(path)?)
}

/// One solver run inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub solver: String,
    pub objective: f64,
    pub row_marginal_error: f64,
    pub col_marginal_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub accuracy: Option<f64>,
    pub wall_ms: Option<f64>,
    /// Fraction of transported mass sent by sources of an unshared class,
    /// for scenarios that have one.
    pub unshared_mass_fraction: Option<f64>,
    pub plan_file: Option<String>,
}

/// Configuration echoed into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub epsilon: f64,
    pub relative_epsilon: bool,
    pub rho: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub divergence: String,
    pub backend: String,
    pub mass_budget: Option<f64>,
    pub seed: u64,
}

/// Top-level report written by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub scenario: Option<String>,
    pub config: ConfigEcho,
    pub results: Vec<MethodReport>,
    pub warnings: Vec<String>,
}

pub fn report_to_string(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Validates, then writes.
pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    let text = report_to_string(report)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    validate_report(&value)?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn validate_report(value: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).map_err(|e| Error::Parse(format!("report schema: {e}")))?;
    validate_against_schema(value, &schema, &schema, "$")
}

/// Checks `value` against the JSON-schema subset used by the report schema:
/// `type` (string or list), `required`, `properties`,
/// `additionalProperties: false`, `items`, `enum`, `minimum`, `maximum` and
/// local `$ref`s into `$defs`.
pub fn validate_against_schema(value: &Value, schema: &Value, root: &Value, at: &str) -> Result<()> {
    let fail = |msg: String| Err(Error::Parse(format!("report {at}: {msg}")));
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r
            .strip_prefix("#/$defs/")
            .ok_or_else(|| Error::Parse(format!("unsupported $ref '{r}'")))?;
        let target = root
            .get("$defs")
            .and_then(|d| d.get(name))
            .ok_or_else(|| Error::Parse(format!("unresolved $ref '{r}'")))?;
        return validate_against_schema(value, target, root, at);
    }
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = allowed.iter().any(|t| match *t {
            "null" => value.is_null(),
            "boolean" => value.is_boolean(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "object" => value.is_object(),
            "array" => value.is_array(),
            _ => false,
        });
        if !ok {
            return fail(format!("expected type {allowed:?}, found {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return fail(format!("{value} not in {options:?}"));
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
            if x < min {
                return fail(format!("{x} below minimum {min}"));
            }
        }
        if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
            if x > max {
                return fail(format!("{x} above maximum {max}"));
            }
        }
    }
    if let Some(obj) = value.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(req) = schema.get("required").and_then(Value::as_array) {
            for key in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    return fail(format!("missing field '{key}'"));
                }
            }
        }
        let closed = schema.get("additionalProperties") == Some(&Value::Bool(false));
        for (key, v) in obj {
            match props.and_then(|p| p.get(key)) {
                Some(sub) => validate_against_schema(v, sub, root, &format!("{at}.{key}"))?,
                None if closed => return fail(format!("unexpected field '{key}'")),
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (k, v) in arr.iter().enumerate() {
            validate_against_schema(v, items, root, &format!("{at}[{k}]"))?;
        }
    }
    Ok(())
}

/// One row of the matching plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingRow {
    pub source_index: usize,
    pub target_index: Option<usize>,
    pub mass: f64,
}

/// Writes `matching.csv`: for each source point, its dominant target, both
/// coordinates, both labels and whether the labels agree.
pub fn write_matching(
    path: &Path,
    method: &str,
    rows: &[MatchingRow],
    source: ArrayView2<f64>,
    target: ArrayView2<f64>,
    source_labels: &[usize],
    target_labels: &[usize],
    append: bool,
) -> Result<()> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let (ds, dt) = (source.ncols(), target.ncols());
    if !append {
        let mut header = vec!["method".to_string(), "source_index".into(), "target_index".into()];
        header.extend((0..ds).map(|d| format!("source_x{d}")));
        header.extend((0..dt).map(|d| format!("target_x{d}")));
        header.extend(["source_label", "target_label", "correct", "mass"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
    }
    for row in rows {
        let i = row.source_index;
        let mut f = vec![method.to_string(), i.to_string()];
        match row.target_index {
            Some(j) => {
                f.push(j.to_string());
                f.extend(source.row(i).iter().map(|v| v.to_string()));
                f.extend(target.row(j).iter().map(|v| v.to_string()));
                f.push(source_labels[i].to_string());
                f.push(target_labels[j].to_string());
                f.push((source_labels[i] == target_labels[j]).to_string());
            }
            None => {
                f.push(String::new());
                f.extend(source.row(i).iter().map(|v| v.to_string()));
                f.extend(std::iter::repeat_n(String::new(), dt));
                f.push(source_labels[i].to_string());
                f.push(String::new());
                f.push("false".into());
            }
        }
        f.push(row.mass.to_string());
        writeln!(w, "{}", f.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn points_with_and_without_weights() {
        let pf = parse_points("x0,x1\n0,1\n2,3\n").unwrap();
        assert_eq!(pf.points, array![[0.0, 1.0], [2.0, 3.0]]);
        assert!(pf.weights.is_none());
        let d = pf.distribution(false).unwrap();
        assert_eq!(d.weights().to_vec(), vec![0.5, 0.5]);

        let pf = parse_points("x0,weight,label\n1.5,2,0\n-1,6,1\n").unwrap();
        assert_eq!(pf.weights.unwrap().to_vec(), vec![2.0, 6.0]);
        assert_eq!(pf.labels.unwrap(), vec![0, 1]);
    }

    #[test]
    fn points_reject_bad_header() {
        assert!(parse_points("x1,x0\n1,2\n").is_err());
        assert!(parse_points("x0,weight,x1\n1,2,3\n").is_err());
        assert!(parse_points("x0\nabc\n").is_err());
    }

    #[test]
    fn keypoints_json() {
        let kp = parse_keypoints(r#"{"indexing": 0, "pairs": [[2, 1], [5, 4]]}"#).unwrap();
        assert_eq!(kp.pairs(), &[(2, 1), (5, 4)]);
        let kp = parse_keypoints(r#"{"indexing": 1, "pairs": [[3, 2], [6, 5]]}"#).unwrap();
        assert_eq!(kp.pairs(), &[(2, 1), (5, 4)]);
        assert!(parse_keypoints(r#"{"indexing": 1, "pairs": [[0, 2]]}"#).is_err());
        assert!(parse_keypoints(r#"{"indexing": 0, "pairs": [[0, 2], [0, 3]]}"#).is_err());
    }

    #[test]
    fn dense_plan_round_trip() {
        let plan = array![[0.1, 0.2 / 3.0], [1e-17, 0.0]];
        let back = parse_plan(&format_plan(plan.view())).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn sparse_plan_round_trip() {
        let mut plan = Array2::zeros((DENSE_LIMIT + 1, DENSE_LIMIT + 2));
        plan[[3, 7]] = 1.0 / 3.0;
        plan[[DENSE_LIMIT, DENSE_LIMIT + 1]] = 2e-9;
        let text = format_plan(plan.view());
        assert!(text.starts_with("i,j,value\n"));
        assert_eq!(parse_plan(&text).unwrap(), plan);
    }

    #[test]
    fn schema_subset() {
        let schema: Value = serde_json::from_str(
            r#"{"type": "object", "required": ["a"], "additionalProperties": false,
                "properties": {"a": {"type": "number", "minimum": 0}, "b": {"enum": ["x", "y"]}}}"#,
        )
        .unwrap();
        let ok: Value = serde_json::from_str(r#"{"a": 1, "b": "x"}"#).unwrap();
        assert!(validate_against_schema(&ok, &schema, &schema, "$").is_ok());
        for bad in [r#"{"b": "x"}"#, r#"{"a": -1}"#, r#"{"a": 1, "b": "z"}"#, r#"{"a": 1, "c": 0}"#] {
            let v: Value = serde_json::from_str(bad).unwrap();
            assert!(validate_against_schema(&v, &schema, &schema, "$").is_err(), "{bad}");
        }
    }
}
