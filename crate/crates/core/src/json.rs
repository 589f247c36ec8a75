//! Dense complex matrix interchange: `{"dim": rows, "cols": cols, "entries": [[re, im], ...]}`
//! in row-major order. `cols` is omitted for square matrices.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{malformed, Result};
use crate::linalg::CMat;
use crate::scalar::{Real, C};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    pub entries: Vec<[f64; 2]>,
}

impl DenseMatrix {
    pub fn from_cmat<T: Real>(m: &CMat<T>) -> Self {
        let (r, c) = m.shape();
        let mut entries = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                let z = m[(i, j)];
                entries.push([z.re.to_f64_lossy(), z.im.to_f64_lossy()]);
            }
        }
        DenseMatrix {
            dim: r,
            cols: (r != c).then_some(c),
            entries,
        }
    }

    pub fn to_cmat<T: Real>(&self) -> Result<CMat<T>> {
        let cols = self.cols.unwrap_or(self.dim);
        if self.entries.len() != self.dim * cols {
            return Err(malformed(format!(
                "matrix of shape {}x{} needs {} entries, got {}",
                self.dim,
                cols,
                self.dim * cols,
                self.entries.len()
            )));
        }
        if self.entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(malformed("non-finite matrix entry"));
        }
        Ok(CMat::from_fn(self.dim, cols, |i, j| {
            let [re, im] = self.entries[i * cols + j];
            C::new(T::lit(re), T::lit(im))
        }))
    }
}

/// Pair of dense matrices as exchanged by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensePairJson {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

pub fn ser_mat<T: Real, S: Serializer>(m: &CMat<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    DenseMatrix::from_cmat(m).serialize(s)
}

pub fn ser_mats<T: Real, S: Serializer>(
    ms: &[CMat<T>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let v: Vec<DenseMatrix> = ms.iter().map(DenseMatrix::from_cmat).collect();
    v.serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rectangular() {
        let m = CMat::<f64>::from_fn(2, 3, |i, j| C::new(i as f64, j as f64));
        let d = DenseMatrix::from_cmat(&m);
        assert_eq!(d.cols, Some(3));
        let back: CMat<f64> = d.to_cmat().unwrap();
        assert_eq!(back, m);
        let text = serde_json::to_string(&DenseMatrix::from_cmat(&CMat::<f64>::identity(1, 1))).unwrap();
        assert_eq!(text, r#"{"dim":1,"entries":[[1.0,0.0]]}"#);
    }

    #[test]
    fn rejects_wrong_length() {
        let d = DenseMatrix {
            dim: 2,
            cols: None,
            entries: vec![[1.0, 0.0]],
        };
        assert!(d.to_cmat::<f64>().is_err());
    }
}
