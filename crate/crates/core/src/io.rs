//! JSON exchange format for matrix functions:
//! `{"n": n, "N": N, "values": [[[re, im], ...], ...]}` with `2^n` atoms of
//! `N*N` row-major entries each. A single matrix is a function with `n = 0`.

use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CMat, DyadicMatrixFunction};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct FunctionFile {
    n: usize,
    #[serde(rename = "N")]
    dim: usize,
    values: Vec<Vec<[f64; 2]>>,
}

impl From<&DyadicMatrixFunction> for FunctionFile {
    fn from(f: &DyadicMatrixFunction) -> Self {
        let values = (0..f.num_atoms())
            .map(|j| f.atom(j).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            n: f.resolution(),
            dim: f.dim(),
            values,
        }
    }
}

impl TryFrom<FunctionFile> for DyadicMatrixFunction {
    type Error = Error;

    fn try_from(file: FunctionFile) -> Result<Self> {
        let block = file.dim * file.dim;
        if file.n >= usize::BITS as usize || file.values.len() != 1usize << file.n {
            return Err(Error::ShapeMismatch(format!(
                "n = {} needs 2^n atoms, file has {}",
                file.n,
                file.values.len()
            )));
        }
        let mut data = Vec::with_capacity(block * file.values.len());
        for (j, atom) in file.values.iter().enumerate() {
            if atom.len() != block {
                return Err(Error::ShapeMismatch(format!(
                    "atom {j} has {} entries, expected {block}",
                    atom.len()
                )));
            }
            for &[re, im] in atom {
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::Invalid(format!("non-finite entry in atom {j}")));
                }
                data.push(C64::new(re, im));
            }
        }
        DyadicMatrixFunction::from_flat(file.n, file.dim, data)
    }
}

pub fn function_to_json(f: &DyadicMatrixFunction) -> String {
    serde_json::to_string(&FunctionFile::from(f)).expect("plain data serializes")
}

pub fn function_from_json(s: &str) -> Result<DyadicMatrixFunction> {
    let file: FunctionFile = serde_json::from_str(s)?;
    file.try_into()
}

/// Parses either one function object or an array of them.
pub fn sequence_from_json(s: &str) -> Result<Vec<DyadicMatrixFunction>> {
    let value: serde_json::Value = serde_json::from_str(s)?;
    match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|v| serde_json::from_value::<FunctionFile>(v)?.try_into())
            .collect(),
        other => Ok(vec![serde_json::from_value::<FunctionFile>(other)?.try_into()?]),
    }
}

pub fn sequence_to_json(seq: &[DyadicMatrixFunction]) -> String {
    let files: Vec<FunctionFile> = seq.iter().map(FunctionFile::from).collect();
    serde_json::to_string(&files).expect("plain data serializes")
}

pub fn matrix_to_json(m: &CMat) -> String {
    function_to_json(&DyadicMatrixFunction::from_matrices(0, std::slice::from_ref(m)).expect("square matrix"))
}

pub fn real_matrix_to_json(m: &nalgebra::DMatrix<f64>) -> String {
    matrix_to_json(&m.map(|x| C64::new(x, 0.0)))
}

pub fn read_function(path: &Path) -> Result<DyadicMatrixFunction> {
    function_from_json(&fs::read_to_string(path)?)
}

pub fn read_sequence(path: &Path) -> Result<Vec<DyadicMatrixFunction>> {
    sequence_from_json(&fs::read_to_string(path)?)
}

pub fn write_function(path: &Path, f: &DyadicMatrixFunction) -> Result<()> {
    fs::write(path, function_to_json(f))?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// A coefficient vector: JSON array of reals or `[re, im]` pairs.
pub fn alpha_from_json(s: &str) -> Result<Vec<C64>> {
    let entries: Vec<Entry> = serde_json::from_str(s)?;
    Ok(entries
        .into_iter()
        .map(|e| match e {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        })
        .collect())
}
