//! Dataset, weight-matrix and weights files.

use std::path::Path;

use mlp_logdet::{Dataset, ParamVector, SpdMatrix};
use ndarray::Array2;

use crate::error::CliError;

/// Reads a `z1..zq,y1..yd` CSV. Errors carry the 1-based file line and column.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let shown = path.display().to_string();
    let parse_err = |row: usize, column: usize, msg: String| CliError::Parse {
        path: shown.clone(),
        row,
        column,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, 1, e.to_string()))?
        .clone();
    let q = header.iter().take_while(|h| h.starts_with('z')).count();
    let d = header.len() - q;
    for (i, name) in header.iter().enumerate() {
        let expected = if i < q { format!("z{}", i + 1) } else { format!("y{}", i - q + 1) };
        if name.trim() != expected {
            return Err(parse_err(1, i + 1, format!("expected column `{expected}`, found `{name}`")));
        }
    }
    if q == 0 || d == 0 {
        return Err(parse_err(1, 1, "header needs at least one z and one y column".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, 1, e.to_string()))?;
        if rec.len() != q + d {
            return Err(parse_err(line, rec.len().min(q + d) + 1, format!("expected {} fields, found {}", q + d, rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("`{field}` is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(2, 1, "no observations".into()));
    }
    let all = Array2::from_shape_vec((rows, q + d), values).expect("row-major fill");
    let inputs = all.slice(ndarray::s![.., ..q]).to_owned();
    let targets = all.slice(ndarray::s![.., q..]).to_owned();
    Ok(Dataset::new(inputs, targets)?)
}

/// Weight matrix for GLS: either a bare `d × d` JSON array or an object with a
/// `gamma0` field (as in truth files).
pub fn read_gamma(path: &Path) -> Result<SpdMatrix, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(CliError::io(shown.clone()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
    let rows_value = match &value {
        serde_json::Value::Object(map) => map
            .get("gamma0")
            .ok_or_else(|| CliError::Config(format!("{shown}: object without a `gamma0` field")))?,
        other => other,
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows_value.clone())
        .map_err(|e| CliError::Config(format!("{shown}: weight matrix must be an array of rows: {e}")))?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Config(format!("{shown}: weight matrix must be square and non-empty")));
    }
    let m = Array2::from_shape_fn((d, d), |(i, j)| rows[i][j]);
    SpdMatrix::new(&m).map_err(|e| CliError::Config(format!("{shown}: {e}")))
}

pub fn read_weights(path: &Path) -> Result<ParamVector, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(CliError::io(shown.clone()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{shown}: {e}")))
}
