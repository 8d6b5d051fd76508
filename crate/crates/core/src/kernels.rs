//! Normalized radial kernels.
//!
//! All three families depend only on `r = ‖x − y‖₂` and satisfy `K(x, x) = 1`:
//!
//! | family        | K(r)                                  |
//! |---------------|---------------------------------------|
//! | `gaussian`    | `exp(−r² / (2ℓ²))`                    |
//! | `matern32`    | `(1 + √3·r/ℓ) · exp(−√3·r/ℓ)`         |
//! | `exponential` | `exp(−r/ℓ)`                           |
//!
//! The alternative Gaussian convention `exp(−r²/ℓ²)` corresponds to
//! `ℓ_here = ℓ_there / √2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Matern32,
    Exponential,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Gaussian,
        KernelFamily::Matern32,
        KernelFamily::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Exponential => "exponential",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "matern32" => Ok(KernelFamily::Matern32),
            "exponential" => Ok(KernelFamily::Exponential),
            other => Err(Error::input(format!(
                "unknown kernel family '{other}' (expected gaussian, matern32 or exponential)"
            ))),
        }
    }
}

/// Kernel family plus isotropic length scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    family: KernelFamily,
    length_scale: f64,
}

impl KernelConfig {
    pub fn new(family: KernelFamily, length_scale: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::InvalidLengthScale(length_scale));
        }
        Ok(Self {
            family,
            length_scale,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// `K(x, y)`, validating dimensions and finiteness.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel argument"));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// `K(x, y)` for inputs already known to be finite and of equal length.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        // per-coordinate differences keep small radii accurate
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.radial(sq)
    }

    #[inline]
    fn radial(&self, sq_dist: f64) -> f64 {
        let l = self.length_scale;
        match self.family {
            KernelFamily::Gaussian => (-sq_dist / (2.0 * l * l)).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * sq_dist.sqrt() / l;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Exponential => (-sq_dist.sqrt() / l).exp(),
        }
    }

    /// `[K(x₁, y), …, K(xₙ, y)]`.
    pub fn kernel_column(&self, points: &PointSet, y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(points, y)?;
        Ok(self.column_unchecked(points, y))
    }

    pub(crate) fn column_unchecked(&self, points: &PointSet, y: &[f64]) -> Vec<f64> {
        points.rows().map(|x| self.eval_unchecked(x, y)).collect()
    }

    /// Dense Gram matrix `G[i][j] = K(xᵢ, xⱼ)`.
    pub fn gram(&self, points: &PointSet) -> Result<Vec<Vec<f64>>> {
        if points.is_empty() {
            return Err(Error::input("gram matrix of an empty point set"));
        }
        let n = points.len();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            g[i][i] = 1.0;
            for j in 0..i {
                let v = self.eval_unchecked(points.row(i), points.row(j));
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        Ok(g)
    }

    pub(crate) fn check_point(&self, points: &PointSet, y: &[f64]) -> Result<()> {
        if !points.is_empty() && y.len() != points.dim() {
            return Err(Error::DimensionMismatch {
                expected: points.dim(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query point"));
        }
        Ok(())
    }
}
