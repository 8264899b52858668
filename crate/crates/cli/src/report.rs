//! JSON reports and per-point CSV tables.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use waveobs_core::linalg::{Positivity, CMat, RMat, C64};
use waveobs_core::phase_flow::{Branch, PhasePoint};

use crate::CliError;

/// Finite numbers as JSON numbers, others as the strings `inf`, `-inf`, `nan`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn complex(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn cmat(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect())).collect())
}

pub fn rmat(m: &RMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect())).collect())
}

pub fn point(p: &PhasePoint) -> Value {
    json!({
        "x": p.x().iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "xi": p.xi().iter().map(|&v| num(v)).collect::<Vec<_>>(),
    })
}

pub fn verdict(p: Positivity) -> Value {
    json!(match p {
        Positivity::Positive => "positive",
        Positivity::Singular => "singular",
        Positivity::Indeterminate => "indeterminate",
    })
}

pub fn scenario_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Wraps a result object with metadata. Keys come out sorted.
pub fn document(metadata: Map<String, Value>, result: Value) -> String {
    let doc = json!({ "metadata": Value::Object(metadata), "result": result });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Scenario(format!("writing {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Scenario(format!("writing report: {e}"))),
    }
}

/// One CSV row: point, branch and smallest Gramian eigenvalue.
pub struct Row {
    pub point: PhasePoint,
    pub branch: Branch,
    pub min_eig: f64,
}

pub fn write_csv(path: &Path, dim: usize, rows: &[Row]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Scenario(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend((1..=dim).map(|i| format!("xi{i}")));
    header.push("branch".into());
    header.push("min_eig".into());
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec: Vec<String> = r.point.x().iter().chain(r.point.xi()).map(|v| format!("{v:?}")).collect();
        rec.push(r.branch.as_str().into());
        rec.push(format!("{:?}", r.min_eig));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Scenario(format!("writing {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_become_strings() {
        assert_eq!(num(1.5), json!(1.5));
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
    }

    #[test]
    fn document_keys_are_sorted() {
        let mut meta = Map::new();
        meta.insert("zeta".into(), json!(1));
        meta.insert("alpha".into(), json!(2));
        let doc = document(meta, json!({ "b": 1, "a": 2 }));
        assert!(doc.find("alpha").unwrap() < doc.find("zeta").unwrap());
        assert!(doc.find("\"a\"").unwrap() < doc.find("\"b\"").unwrap());
        assert!(doc.ends_with('\n'));
    }

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(scenario_hash(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
