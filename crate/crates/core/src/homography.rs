//! 3×3 projective transforms.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;

use crate::{DfmError, Result};

const W_EPS: f64 = 1e-12;
const DET_EPS: f64 = 1e-12;

/// Homography normalized so that `h33 = 1`, or to unit Frobenius norm when
/// `h33` vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(DfmError::SingularMatrix);
        }
        let h = normalize(m).ok_or(DfmError::SingularMatrix)?;
        if h.determinant().abs() <= DET_EPS {
            return Err(DfmError::SingularMatrix);
        }
        Ok(Self(h))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` radians and isotropic `scale` about `(cx, cy)`,
    /// followed by a translation.
    pub fn similarity(angle: f64, scale: f64, cx: f64, cy: f64, tx: f64, ty: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let (a, b) = (scale * c, scale * s);
        Self::new(Matrix3::new(
            a,
            -b,
            cx - a * cx + b * cy + tx,
            b,
            a,
            cy - b * cx - a * cy + ty,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let m = &self.0;
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        if w.abs() < W_EPS {
            return Err(DfmError::PointAtInfinity);
        }
        Ok((
            (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / w,
            (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / w,
        ))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.0.try_inverse().ok_or(DfmError::SingularMatrix)?;
        Self::new(inv)
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Homography) -> Result<Self> {
        Self::new(other.0 * self.0)
    }

    /// Largest absolute entry-wise difference after normalization.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }

    /// Three lines of three space-separated numbers, row-major.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            out.push_str(&format!("{:e} {:e} {:e}\n", row[0], row[1], row[2]));
        }
        out
    }
}

fn normalize(m: Matrix3<f64>) -> Option<Matrix3<f64>> {
    let fro = m.norm();
    if fro == 0.0 {
        return None;
    }
    let h33 = m[(2, 2)];
    if h33.abs() > W_EPS * fro {
        Some(m / h33)
    } else {
        Some(m / fro)
    }
}

impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Homography {
    type Err = DfmError;

    /// Accepts any whitespace layout of exactly nine numbers.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| DfmError::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 9 {
            return Err(DfmError::Parse(format!(
                "homography needs 9 numbers, found {}",
                values.len()
            )));
        }
        Self::new(Matrix3::from_row_slice(&values))
    }
}
