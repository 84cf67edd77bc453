use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{DenseVector, Real};

/// Parameter-free operator combining two representation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionOpKind {
    /// Elementwise sum; operands must share a dimension.
    Addition,
    /// First operand followed by the second.
    Concatenation,
    /// Elementwise mean; operands must share a dimension.
    Average,
}

impl FusionOpKind {
    pub const ALL: [FusionOpKind; 3] = [
        FusionOpKind::Addition,
        FusionOpKind::Concatenation,
        FusionOpKind::Average,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            FusionOpKind::Addition => "add",
            FusionOpKind::Concatenation => "concat",
            FusionOpKind::Average => "avg",
        }
    }
}

impl fmt::Display for FusionOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FusionOpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "add" | "addition" | "sum" => Ok(FusionOpKind::Addition),
            "concat" | "concatenation" | "cat" => Ok(FusionOpKind::Concatenation),
            "avg" | "average" | "mean" => Ok(FusionOpKind::Average),
            other => Err(Error::config(format!("unknown fusion operator {other:?}"))),
        }
    }
}

/// Output dimension of `kind` applied to operands of dimension `d1` and `d2`.
pub fn fused_dim(kind: FusionOpKind, d1: usize, d2: usize) -> Result<usize> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::shape(format!("{kind} operand"), 1, d1.min(d2)));
    }
    match kind {
        FusionOpKind::Concatenation => Ok(d1 + d2),
        FusionOpKind::Addition | FusionOpKind::Average if d1 == d2 => Ok(d1),
        _ => Err(Error::shape(format!("{kind} operands"), d1, d2)),
    }
}

pub fn fuse<T: Real>(kind: FusionOpKind, x1: &DenseVector<T>, x2: &DenseVector<T>) -> Result<DenseVector<T>> {
    fused_dim(kind, x1.dim(), x2.dim())?;
    let (a, b) = (x1.as_slice(), x2.as_slice());
    let out = match kind {
        FusionOpKind::Addition => a.iter().zip(b).map(|(&p, &q)| p + q).collect(),
        FusionOpKind::Average => {
            let half = T::lit(0.5);
            a.iter().zip(b).map(|(&p, &q)| (p + q) * half).collect()
        }
        FusionOpKind::Concatenation => {
            let mut v = Vec::with_capacity(a.len() + b.len());
            v.extend_from_slice(a);
            v.extend_from_slice(b);
            v
        }
    };
    Ok(DenseVector::new(out))
}

/// Splits the gradient of a fused vector back onto its operands.
pub fn fuse_backward<T: Real>(
    kind: FusionOpKind,
    d1: usize,
    d2: usize,
    grad: &DenseVector<T>,
) -> Result<(DenseVector<T>, DenseVector<T>)> {
    let out_dim = fused_dim(kind, d1, d2)?;
    if grad.dim() != out_dim {
        return Err(Error::shape(format!("{kind} backward"), out_dim, grad.dim()));
    }
    Ok(match kind {
        FusionOpKind::Addition => (grad.clone(), grad.clone()),
        FusionOpKind::Average => {
            let half = grad.scale(T::lit(0.5));
            (half.clone(), half)
        }
        FusionOpKind::Concatenation => {
            let g = grad.as_slice();
            (DenseVector::new(g[..d1].to_vec()), DenseVector::new(g[d1..].to_vec()))
        }
    })
}
