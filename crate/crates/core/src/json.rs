//! JSON exchange format for operators, states and Kraus sets.
//!
//! Operators are `{"dim": n, "re": [[..]], "im": [[..]]}` with row-major
//! nested arrays. States use the same shape as an `n x 1` column; flat
//! arrays are also accepted on input. A channel is either a bare array of
//! operators or `{"dim": n, "ops": [{"label": .., "re": .., "im": ..}]}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{KrausChannel, Operator, StateVector, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Entries {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Entries {
    fn into_flat(self) -> Vec<f64> {
        match self {
            Entries::Nested(v) => v.into_iter().flatten().collect(),
            Entries::Flat(v) => v,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
struct StateJsonIn {
    dim: usize,
    re: Entries,
    im: Option<Entries>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledMatrixJson {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim: usize,
    pub ops: Vec<LabeledMatrixJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChannelJsonIn {
    Wrapped(ChannelJson),
    Bare(Vec<LabeledMatrixJson>),
}

fn matrix_from_parts(dim: usize, re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<DMatrix<C64>> {
    let shape_ok = |m: &[Vec<f64>]| m.len() == dim && m.iter().all(|r| r.len() == dim);
    if !shape_ok(re) || !(im.is_empty() || shape_ok(im)) {
        return Err(Error::Json(format!("expected {dim}x{dim} re/im arrays")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        C64::new(re[i][j], if im.is_empty() { 0.0 } else { im[i][j] })
    }))
}

impl Operator {
    pub fn to_json(&self) -> MatrixJson {
        let m = self.matrix();
        let dim = self.dim();
        MatrixJson {
            dim,
            re: (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        Operator::new(matrix_from_parts(j.dim, &j.re, &j.im)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(s)?)
    }
}

impl StateVector {
    pub fn to_json(&self) -> MatrixJson {
        let a = self.amplitudes();
        MatrixJson {
            dim: self.dim(),
            re: a.iter().map(|z| vec![z.re]).collect(),
            im: a.iter().map(|z| vec![z.im]).collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: StateJsonIn = serde_json::from_str(s)?;
        let re = j.re.into_flat();
        let im = j.im.map(Entries::into_flat).unwrap_or_else(|| vec![0.0; re.len()]);
        if re.len() != j.dim || im.len() != j.dim {
            return Err(Error::Json(format!("expected {} amplitudes", j.dim)));
        }
        StateVector::new(DVector::from_iterator(j.dim, re.into_iter().zip(im).map(|(r, i)| C64::new(r, i))))
    }
}

impl KrausChannel {
    pub fn to_json(&self) -> ChannelJson {
        ChannelJson {
            dim: self.dim(),
            ops: self
                .ops()
                .iter()
                .zip(self.labels())
                .map(|(op, label)| {
                    let m = op.to_json();
                    LabeledMatrixJson { label: Some(label.clone()), dim: None, re: m.re, im: m.im }
                })
                .collect(),
        }
    }
}

/// Reads a list of labeled operators without checking completeness (error
/// sets for the Knill-Laflamme check need not be trace preserving).
pub fn operators_from_json_str(s: &str) -> Result<(Vec<Operator>, Vec<String>)> {
    let (dim, entries) = match serde_json::from_str::<ChannelJsonIn>(s)? {
        ChannelJsonIn::Wrapped(c) => (Some(c.dim), c.ops),
        ChannelJsonIn::Bare(v) => (None, v),
    };
    let mut ops = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    for (k, e) in entries.into_iter().enumerate() {
        let d = dim.or(e.dim).unwrap_or(e.re.len());
        ops.push(Operator::new(matrix_from_parts(d, &e.re, &e.im)?)?);
        labels.push(e.label.unwrap_or_else(|| format!("K{k}")));
    }
    if ops.is_empty() {
        return Err(Error::Json("no operators".into()));
    }
    Ok((ops, labels))
}

pub fn channel_from_json_str(s: &str) -> Result<KrausChannel> {
    let (ops, labels) = operators_from_json_str(s)?;
    KrausChannel::new(ops, labels)
}
