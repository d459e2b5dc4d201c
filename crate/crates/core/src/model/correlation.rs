use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::scalar::Scalar;

pub type Matrix4<T> = [[T; 4]; 4];

/// Smallest admissible diagonal pivot of the Cholesky factor.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Pairwise instantaneous correlations of the driving Brownian motions,
/// indexed by the factor they drive (`s`, `v`, `d` = domestic, `f` = foreign).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlations<T> {
    pub sv: T,
    pub sd: T,
    pub sf: T,
    pub vd: T,
    #[serde(default)]
    pub vf: T,
    #[serde(default)]
    pub df: T,
}

impl<T: Scalar> Correlations<T> {
    /// Correlations of the FX reference set. `vf` and `df` are not pinned by
    /// the reference experiments and default to zero.
    pub fn fx_reference() -> Self {
        Self {
            sv: T::lit(-0.1),
            sd: T::lit(-0.15),
            sf: T::lit(-0.15),
            vd: T::lit(0.12),
            vf: T::zero(),
            df: T::zero(),
        }
    }

    pub fn independent() -> Self {
        Self::default()
    }

    pub fn to_matrix(&self) -> Matrix4<T> {
        let o = T::one();
        [
            [o, self.sv, self.sd, self.sf],
            [self.sv, o, self.vd, self.vf],
            [self.sd, self.vd, o, self.df],
            [self.sf, self.vf, self.df, o],
        ]
    }
}

/// Correlation matrix together with its lower-triangular Cholesky factor `H`
/// (`H Hᵀ = rho`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStructure<T> {
    rho: Matrix4<T>,
    cholesky: Matrix4<T>,
}

impl<T: Scalar> CorrelationStructure<T> {
    pub fn new(c: Correlations<T>) -> Result<Self, ModelError> {
        Self::from_matrix(c.to_matrix())
    }

    /// Validates a full matrix (symmetric, unit diagonal, off-diagonal in
    /// `(-1, 1)`) and factors it.
    pub fn from_matrix(rho: Matrix4<T>) -> Result<Self, ModelError> {
        for i in 0..4 {
            if rho[i][i] != T::one() {
                return Err(ModelError::InvalidCorrelation(format!(
                    "diagonal entry ({i},{i}) = {} is not 1",
                    rho[i][i]
                )));
            }
            for j in 0..i {
                if rho[i][j] != rho[j][i] {
                    return Err(ModelError::InvalidCorrelation(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                let r = rho[i][j];
                if !(r > -T::one() && r < T::one()) {
                    return Err(ModelError::InvalidCorrelation(format!(
                        "entry ({i},{j}) = {r} outside (-1, 1)"
                    )));
                }
            }
        }
        let cholesky = cholesky_factor(&rho)?;
        Ok(Self { rho, cholesky })
    }

    pub fn identity() -> Self {
        Self::new(Correlations::independent()).expect("identity is positive definite")
    }

    pub fn rho(&self) -> &Matrix4<T> {
        &self.rho
    }

    pub fn cholesky(&self) -> &Matrix4<T> {
        &self.cholesky
    }

    /// Correlation between the spot and the foreign rate drivers.
    pub fn rho_sf(&self) -> T {
        self.rho[0][3]
    }

    /// `H z` for an uncorrelated 4-vector `z`, evaluated row by row as
    /// `H_{i,1} z_1 + ... + H_{i,i} z_i`.
    pub fn correlate(&self, z: &[T; 4]) -> [T; 4] {
        let h = &self.cholesky;
        [
            h[0][0] * z[0],
            h[1][0] * z[0] + h[1][1] * z[1],
            h[2][0] * z[0] + h[2][1] * z[1] + h[2][2] * z[2],
            h[3][0] * z[0] + h[3][1] * z[1] + h[3][2] * z[2] + h[3][3] * z[3],
        ]
    }
}

/// Cholesky–Banachiewicz factorization of a symmetric 4×4 matrix.
///
/// Fails with [`ModelError::NotPositiveDefinite`] when a squared pivot drops
/// to `PIVOT_TOLERANCE` or below.
pub fn cholesky_factor<T: Scalar>(rho: &Matrix4<T>) -> Result<Matrix4<T>, ModelError> {
    let tol = T::lit(PIVOT_TOLERANCE);
    let mut h = [[T::zero(); 4]; 4];
    for j in 0..4 {
        let mut diag = rho[j][j];
        for k in 0..j {
            diag = diag - h[j][k] * h[j][k];
        }
        if !(diag > tol) {
            return Err(ModelError::NotPositiveDefinite {
                row: j,
                pivot: diag.to_f64_lossy(),
            });
        }
        h[j][j] = diag.sqrt();
        for i in (j + 1)..4 {
            let mut acc = rho[i][j];
            for k in 0..j {
                acc = acc - h[i][k] * h[j][k];
            }
            h[i][j] = acc / h[j][j];
        }
    }
    Ok(h)
}
