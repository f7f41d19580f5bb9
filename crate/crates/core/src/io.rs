//! JSON interchange for matrices, problems and networks.
//!
//! Matrix files hold `{precision, level, rows, cols, values, indices?}`.
//! Dense files list `rows * cols` values row-major; compressed files list
//! the stored values and their in-group positions. int8 values are JSON
//! integers; bfloat16 values are numbers rounded to nearest even.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::error::{Error, Result};
use crate::fabric::{AMatrix, GemmProblem};
use crate::matrix::{AccumMatrix, DenseMatrix};
use crate::perf_model::NetworkSpec;
use crate::precision::{Precision, Word};
use crate::sparse_format::{padded_cols, CompressedMatrix, SparsityLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub precision: Precision,
    #[serde(default = "dense")]
    pub level: SparsityLevel,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<u8>>,
}

fn dense() -> SparsityLevel {
    SparsityLevel::Dense
}

fn to_words(p: Precision, values: &[Number], what: &str) -> Result<Vec<Word>> {
    values
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let v = &n.as_f64().unwrap_or(f64::NAN);
            let bad = |m: &str| Error::Schema {
                path: format!("{what}[{i}]"),
                message: format!("{v} {m}"),
            };
            if !v.is_finite() {
                return Err(bad("is not finite"));
            }
            if p == Precision::Int8 && (v.fract() != 0.0 || !(-128.0..=127.0).contains(v)) {
                return Err(bad("is not an int8 value"));
            }
            Ok(p.word_from_f64(*v))
        })
        .collect()
}

/// Integers stay integers; other values become JSON floats.
fn number(v: f64) -> Number {
    if v.fract() == 0.0 && v.abs() < 1e15 && !(v == 0.0 && v.is_sign_negative()) {
        Number::from(v as i64)
    } else {
        Number::from_f64(v).expect("finite value")
    }
}

fn from_words(p: Precision, words: &[Word]) -> Vec<Number> {
    words.iter().map(|w| number(p.word_to_f64(*w))).collect()
}

impl MatrixFile {
    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self {
            precision: m.precision,
            level: SparsityLevel::Dense,
            rows: m.rows,
            cols: m.cols,
            values: from_words(m.precision, &m.data),
            indices: None,
        }
    }

    pub fn from_compressed(c: &CompressedMatrix) -> Self {
        Self {
            precision: c.precision,
            level: c.level,
            rows: c.rows,
            cols: c.cols,
            values: from_words(c.precision, &c.values),
            indices: Some(c.indices.clone()),
        }
    }

    pub fn from_a(a: &AMatrix) -> Self {
        match a {
            AMatrix::Dense(m) => Self::from_dense(m),
            AMatrix::Compressed(c) => Self::from_compressed(c),
        }
    }

    /// Dense view (compressed files are decoded).
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self.to_a()? {
            AMatrix::Dense(m) => Ok(m),
            AMatrix::Compressed(c) => Ok(crate::sparse_format::decode(&c)?.resized(c.rows, c.cols)),
        }
    }

    pub fn to_a(&self) -> Result<AMatrix> {
        let words = to_words(self.precision, &self.values, "values")?;
        match &self.indices {
            None => Ok(AMatrix::Dense(DenseMatrix::from_words(self.precision, self.rows, self.cols, words)?)),
            Some(indices) => {
                let c = CompressedMatrix {
                    precision: self.precision,
                    level: self.level,
                    rows: self.rows,
                    cols: self.cols,
                    logical_cols: padded_cols(self.cols, self.level),
                    values: words,
                    indices: indices.clone(),
                };
                c.check()?;
                Ok(AMatrix::Compressed(c))
            }
        }
    }
}

/// A GEMM problem file: `{a: MatrixFile, b: MatrixFile}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub a: MatrixFile,
    pub b: MatrixFile,
}

impl ProblemFile {
    pub fn to_problem(&self) -> Result<GemmProblem> {
        GemmProblem::new(self.a.to_a()?, self.b.to_dense()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumFile {
    pub precision: Precision,
    pub rows: usize,
    pub cols: usize,
    /// int32 values, or fp32 values widened to f64.
    pub values: Vec<Number>,
}

impl AccumFile {
    pub fn from_matrix(c: &AccumMatrix) -> Self {
        Self {
            precision: c.precision,
            rows: c.rows,
            cols: c.cols,
            values: c.data.iter().map(|w| number(c.precision.acc_to_f64(*w))).collect(),
        }
    }
}

/// Parses JSON, reporting line and column of the first problem.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Schema {
        path: origin.into(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_network(path: &Path) -> Result<NetworkSpec> {
    let net: NetworkSpec = read_json(path)?;
    net.validate().map_err(|e| match e {
        Error::Schema { path: field, message } => Error::Schema {
            path: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })?;
    Ok(net)
}

/// Networks shipped with the crate, by file stem.
pub const BUNDLED_NETWORKS: [(&str, &str); 3] = [
    ("deit_s_2of4", include_str!("../data/networks/deit_s_2of4.json")),
    ("deit_b_1of4", include_str!("../data/networks/deit_b_1of4.json")),
    ("convnext_s_2of4", include_str!("../data/networks/convnext_s_2of4.json")),
];

pub fn bundled_network(name: &str) -> Option<NetworkSpec> {
    BUNDLED_NETWORKS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_json(text, n).expect("bundled network parses"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_format::encode;

    #[test]
    fn compressed_round_trip() {
        let m = DenseMatrix::from_f32(2, 4, &[0.0, 1.5, 0.0, -2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        let c = encode(&m, SparsityLevel::S2of4).unwrap();
        let f = MatrixFile::from_compressed(&c);
        let text = serde_json::to_string(&f).unwrap();
        let back: MatrixFile = parse_json(&text, "mem").unwrap();
        assert_eq!(back.to_a().unwrap(), AMatrix::Compressed(c));
        assert_eq!(back.to_dense().unwrap(), m);
    }

    #[test]
    fn bundled_networks_validate() {
        for (name, _) in BUNDLED_NETWORKS {
            bundled_network(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn rejects_fractional_int8() {
        let f = MatrixFile {
            precision: Precision::Int8,
            level: SparsityLevel::Dense,
            rows: 1,
            cols: 1,
            values: vec![Number::from_f64(1.5).unwrap()],
            indices: None,
        };
        assert!(matches!(f.to_a(), Err(Error::Schema { .. })));
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = parse_json::<MatrixFile>("{\n \"precision\": \"int9\"}", "x.json").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
