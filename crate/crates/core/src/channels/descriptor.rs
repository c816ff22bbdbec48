use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelLaw;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};

/// One matrix entry: `[re, im]` or a bare real number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Pair([f64; 2]),
    Real(f64),
}

/// Row-major nested arrays.
pub type MatrixJson = Vec<Vec<Entry>>;

/// JSON form of a [`ChannelLaw`], tagged by `"type"`.
///
/// ```json
/// {"type": "kronecker", "rx": 2, "tx": 2, "tx_corr": [[1.5, 0], [0, 0.5]]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawDescriptor {
    /// Missing matrices default to a zero mean and identity correlations.
    Kronecker {
        rx: usize,
        tx: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<MatrixJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rx_corr: Option<MatrixJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tx_corr: Option<MatrixJson>,
        /// Require `tr(R) = r` and `tr(T) = t`.
        #[serde(default)]
        normalized: bool,
    },
    /// `cov` indexes column-stacked `vec(H)`.
    Gaussian {
        mean: MatrixJson,
        cov: MatrixJson,
    },
    Point {
        h: MatrixJson,
    },
    Interp {
        kappa: f64,
        m0: MatrixJson,
        noise_cov: MatrixJson,
    },
    Mixture {
        weights: Vec<f64>,
        atoms: Vec<MatrixJson>,
    },
    Onoff {
        m: usize,
        p: f64,
    },
}

fn descriptor_err(msg: impl Into<String>) -> Error {
    Error::Descriptor(msg.into())
}

/// Converts nested entry arrays to a matrix.
pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(descriptor_err("matrix must be non-empty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(descriptor_err("matrix rows differ in length"));
    }
    let data = rows
        .iter()
        .flatten()
        .map(|e| match *e {
            Entry::Pair([re, im]) => Complex64::new(re, im),
            Entry::Real(re) => Complex64::new(re, 0.0),
        })
        .collect();
    ComplexMatrix::new(r, c, data).map_err(|e| descriptor_err(e.to_string()))
}

/// Converts a matrix to `[re, im]` pairs.
pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| Entry::Pair([m[(i, j)].re, m[(i, j)].im]))
                .collect()
        })
        .collect()
}

fn hermitian(rows: &MatrixJson) -> Result<HermitianMatrix> {
    HermitianMatrix::new(matrix_from_json(rows)?)
}

impl LawDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| descriptor_err(format!("invalid channel descriptor: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }

    /// Validates and builds the law.
    pub fn into_law(self) -> Result<ChannelLaw> {
        match self {
            Self::Kronecker {
                rx,
                tx,
                mean,
                rx_corr,
                tx_corr,
                normalized,
            } => {
                if rx == 0 || tx == 0 {
                    return Err(descriptor_err("kronecker law needs rx, tx ≥ 1"));
                }
                let mean = mean
                    .as_ref()
                    .map(matrix_from_json)
                    .transpose()?
                    .unwrap_or_else(|| ComplexMatrix::zeros(rx, tx));
                if mean.rows() != rx || mean.cols() != tx {
                    return Err(descriptor_err(format!("mean must be {rx}x{tx}")));
                }
                let r = rx_corr
                    .as_ref()
                    .map(hermitian)
                    .transpose()?
                    .unwrap_or_else(|| HermitianMatrix::identity(rx));
                let t = tx_corr
                    .as_ref()
                    .map(hermitian)
                    .transpose()?
                    .unwrap_or_else(|| HermitianMatrix::identity(tx));
                let law = ChannelLaw::kronecker(mean, r, t)?;
                if normalized {
                    if let ChannelLaw::Kronecker(k) = &law {
                        if !k.is_normalized() {
                            return Err(Error::Domain(
                                "correlations must satisfy tr(R) = r and tr(T) = t".into(),
                            ));
                        }
                    }
                }
                Ok(law)
            }
            Self::Gaussian { mean, cov } => {
                ChannelLaw::matrix_gaussian(matrix_from_json(&mean)?, hermitian(&cov)?)
            }
            Self::Point { h } => Ok(ChannelLaw::point(matrix_from_json(&h)?)),
            Self::Interp {
                kappa,
                m0,
                noise_cov,
            } => ChannelLaw::interpolated(kappa, matrix_from_json(&m0)?, hermitian(&noise_cov)?),
            Self::Mixture { weights, atoms } => {
                let atoms = atoms
                    .iter()
                    .map(matrix_from_json)
                    .collect::<Result<Vec<_>>>()?;
                ChannelLaw::mixture(weights, atoms)
            }
            Self::Onoff { m, p } => ChannelLaw::on_off(m, p),
        }
    }
}

impl ChannelLaw {
    /// Parses a JSON descriptor and builds the law.
    pub fn from_json(text: &str) -> Result<Self> {
        LawDescriptor::from_json(text)?.into_law()
    }

    /// Descriptor that rebuilds this law.
    pub fn to_descriptor(&self) -> LawDescriptor {
        let herm = |h: &HermitianMatrix| matrix_to_json(h.as_matrix());
        match self {
            Self::PointMass(l) => LawDescriptor::Point {
                h: matrix_to_json(l.matrix()),
            },
            Self::MatrixGaussian(l) => LawDescriptor::Gaussian {
                mean: matrix_to_json(l.mean()),
                cov: herm(l.cov()),
            },
            Self::Kronecker(l) => LawDescriptor::Kronecker {
                rx: l.mean().rows(),
                tx: l.mean().cols(),
                mean: Some(matrix_to_json(l.mean())),
                rx_corr: Some(herm(l.rx_corr())),
                tx_corr: Some(herm(l.tx_corr())),
                normalized: false,
            },
            Self::Interpolated(l) => LawDescriptor::Interp {
                kappa: l.kappa(),
                m0: matrix_to_json(l.m0()),
                noise_cov: herm(l.noise_cov()),
            },
            Self::Mixture(l) => LawDescriptor::Mixture {
                weights: l.weights().to_vec(),
                atoms: l.atoms().iter().map(matrix_to_json).collect(),
            },
            Self::OnOff(l) => LawDescriptor::Onoff { m: l.m(), p: l.p() },
        }
    }
}
