//! JSON file formats.
//!
//! State: `{"dims":[d_a,d_b],"matrix":[[[re,im],...],...]}`, row-major.
//! Decomposition: `{"dims":[d_a,d_b],"terms":[{"weight":w,"a":[[re,im],...],"b":[...]},...]}`.
//! Reports carry `dims` and `terms` at the top level, so an analysis report
//! is itself a readable decomposition file.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::linalg::{CMatrix, CVector, C64};
use crate::optimize::{AnalysisReport, SolverSummary};
use crate::oracle::PptReport;
use crate::sep_eigen::{SolutionSet, SolverConfig};
use crate::state::{validate_density, DensityOperator, Dims, Ket, ProductState, QuasiDistribution};

/// Kets read from files must be normalized to this tolerance.
pub const KET_FILE_TOL: f64 = 1e-9;

/// A malformed input, located by a JSON path such as `matrix[1][0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormatError {
    pub field: String,
    pub message: String,
}

impl FormatError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for FormatError {}

type Parsed<T> = std::result::Result<T, FormatError>;

fn root(text: &str) -> Parsed<Map<String, Value>> {
    let v: Value = serde_json::from_str(text).map_err(|e| FormatError::new("<root>", format!("invalid JSON: {e}")))?;
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(FormatError::new("<root>", "expected a JSON object")),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Parsed<&'a Value> {
    obj.get(name)
        .ok_or_else(|| FormatError::new(join(path, name), "missing"))
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Parsed<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| FormatError::new(path, "expected an array"))
}

fn number(v: &Value, path: &str) -> Parsed<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(FormatError::new(path, "expected a finite number")),
    }
}

fn complex(v: &Value, path: &str) -> Parsed<C64> {
    let pair = array(v, path)?;
    if pair.len() != 2 {
        return Err(FormatError::new(path, "expected a [re, im] pair"));
    }
    Ok(C64::new(number(&pair[0], &format!("{path}[0]"))?, number(&pair[1], &format!("{path}[1]"))?))
}

fn dims(obj: &Map<String, Value>) -> Parsed<Dims> {
    let v = field(obj, "dims", "")?;
    let arr = array(v, "dims")?;
    if arr.len() != 2 {
        return Err(FormatError::new("dims", "expected [d_a, d_b]"));
    }
    let mut out = [0usize; 2];
    for (k, x) in arr.iter().enumerate() {
        out[k] = x
            .as_u64()
            .filter(|&d| d >= 1)
            .ok_or_else(|| FormatError::new(format!("dims[{k}]"), "expected a positive integer"))?
            as usize;
    }
    Ok(Dims {
        d_a: out[0],
        d_b: out[1],
    })
}

fn ket(v: &Value, dim: usize, path: &str) -> Parsed<Ket> {
    let arr = array(v, path)?;
    if arr.len() != dim {
        return Err(FormatError::new(path, format!("expected {dim} amplitudes, found {}", arr.len())));
    }
    let amps = arr
        .iter()
        .enumerate()
        .map(|(i, z)| complex(z, &format!("{path}[{i}]")))
        .collect::<Parsed<Vec<_>>>()?;
    let v = CVector::from_vec(amps);
    let norm = v.norm();
    if (norm - 1.0).abs() > KET_FILE_TOL {
        return Err(FormatError::new(path, format!("ket is not normalized (norm {norm})")));
    }
    Ket::new(v).map_err(|e| FormatError::new(path, e.to_string()))
}

/// Raw matrix and dims of a state file, before physical validation.
pub fn parse_matrix(text: &str) -> Parsed<(Dims, CMatrix)> {
    let obj = root(text)?;
    let dims = dims(&obj)?;
    let rows = array(field(&obj, "matrix", "")?, "matrix")?;
    let n = dims.total();
    if rows.len() != n {
        return Err(FormatError::new("matrix", format!("expected {n} rows, found {}", rows.len())));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let path = format!("matrix[{i}]");
        let cols = array(row, &path)?;
        if cols.len() != n {
            return Err(FormatError::new(path, format!("expected {n} entries, found {}", cols.len())));
        }
        for (j, z) in cols.iter().enumerate() {
            m[(i, j)] = complex(z, &format!("matrix[{i}][{j}]"))?;
        }
    }
    Ok((dims, m))
}

/// Parses and validates a density operator.
pub fn parse_state(text: &str) -> Parsed<DensityOperator> {
    let (dims, m) = parse_matrix(text)?;
    validate_density(&m, dims).map_err(|e| FormatError::new("matrix", e.to_string()))
}

pub fn parse_decomposition(text: &str) -> Parsed<QuasiDistribution> {
    let obj = root(text)?;
    let dims = dims(&obj)?;
    let terms = array(field(&obj, "terms", "")?, "terms")?;
    let mut qd = QuasiDistribution::new(dims);
    for (k, t) in terms.iter().enumerate() {
        let path = format!("terms[{k}]");
        let t = t
            .as_object()
            .ok_or_else(|| FormatError::new(path.clone(), "expected an object"))?;
        let w = number(field(t, "weight", &path)?, &join(&path, "weight"))?;
        let a = ket(field(t, "a", &path)?, dims.d_a, &join(&path, "a"))?;
        let b = ket(field(t, "b", &path)?, dims.d_b, &join(&path, "b"))?;
        qd.push(w, ProductState::new(a, b))
            .map_err(|e| FormatError::new(path, e.to_string()))?;
    }
    Ok(qd)
}

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn ket_json(k: &Ket) -> Value {
    Value::Array(k.amplitudes().iter().map(|z| complex_json(*z)).collect())
}

fn dims_json(d: Dims) -> Value {
    json!([d.d_a, d.d_b])
}

pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn state_json(dims: Dims, m: &CMatrix) -> Value {
    json!({ "dims": dims_json(dims), "matrix": matrix_json(m) })
}

fn terms_json(qd: &QuasiDistribution) -> Value {
    Value::Array(
        qd.terms()
            .iter()
            .map(|t| json!({ "weight": t.weight, "a": ket_json(&t.state.a), "b": ket_json(&t.state.b) }))
            .collect(),
    )
}

pub fn decomposition_json(qd: &QuasiDistribution) -> Value {
    json!({ "dims": dims_json(qd.dims()), "terms": terms_json(qd) })
}

pub fn config_json(cfg: &SolverConfig, tol_neg: Option<f64>) -> Value {
    let mut v = serde_json::to_value(cfg).expect("plain data");
    if let (Some(t), Value::Object(m)) = (tol_neg, &mut v) {
        m.insert("tol_neg".into(), json!(t));
    }
    v
}

fn summary_json(s: &SolverSummary) -> Value {
    serde_json::to_value(s).expect("plain data")
}

pub fn analysis_json(rep: &AnalysisReport, cfg: &SolverConfig) -> Value {
    json!({
        "dims": dims_json(rep.quasi_dist.dims()),
        "verdict": rep.verdict,
        "min_weight": rep.min_weight,
        "reassembly_residual": finite_or_null(rep.reassembly_residual),
        "gram_residual": finite_or_null(rep.gram_residual),
        "purity": rep.purity,
        "separability_norm": rep.max_g,
        "used_residual_split": rep.used_residual_split,
        "terms": terms_json(&rep.quasi_dist),
        "solver": Value::Array(rep.solver.iter().map(summary_json).collect()),
        "diagnostics": rep.diagnostics,
        "config": config_json(cfg, Some(rep.tol_neg)),
    })
}

pub fn solution_set_json(set: &SolutionSet, cfg: &SolverConfig) -> Value {
    json!({
        "dims": dims_json(set.dims),
        "solutions": set.solutions.iter().map(|s| json!({
            "g": s.g,
            "a": ket_json(&s.state.a),
            "b": ket_json(&s.state.b),
            "residual": s.residual,
            "excluded": s.excluded,
        })).collect::<Vec<_>>(),
        "families": set.families.iter().map(|f| json!({ "g": f.g, "members": f.members })).collect::<Vec<_>>(),
        "restarts_used": set.restarts_used,
        "coverage": set.coverage,
        "config": config_json(cfg, None),
    })
}

pub fn ppt_json(rep: &PptReport) -> Value {
    serde_json::to_value(rep).expect("plain data")
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
