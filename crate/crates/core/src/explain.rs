//! Kernel-translate coefficients, observation-specific explanations and
//! per-observation errors derived from a greedy fit.
//!
//! Substituting the Newton basis into `f* = Σ_j a*_j N_j` gives
//! `f*(x) = Σ_k c_{i_k} K(x_{i_k}, x)` with `c_{i_k} = Σ_{j ≥ k} d_{k,j} a*_j`.
//! Unselected samples get `c_i = 0`, and the explanation of sample `i` is
//! `γ_i = |c_i| / max_l |c_l|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, KernelFamily};
use crate::omp::{self, NewtonFactorization, OmpConfig, StopReason, SELECTION_RULE};
use crate::points::PointSet;

/// Relative tolerance for the runtime cross-check between the kernel-translate
/// and Newton representations of the surrogate.
pub const REPRESENTATION_TOLERANCE: f64 = 1e-8;

/// Kernel surrogate `f*(x) = Σ_i c_i K(x_i, x)` with sparse support.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    kernel: KernelConfig,
    selected_points: PointSet,
    kernel_coeffs: Vec<f64>,
    newton: NewtonFactorization,
}

impl SurrogateModel {
    /// Runs the greedy fit and converts it to kernel-translate form.
    pub fn fit(
        points: &PointSet,
        f_vals: &[f64],
        kernel: KernelConfig,
        cfg: &OmpConfig,
    ) -> Result<Self> {
        let newton = omp::fit(points, f_vals, &kernel, cfg)?;
        Ok(Self::from_factorization(points, kernel, newton))
    }

    pub fn from_factorization(
        points: &PointSet,
        kernel: KernelConfig,
        newton: NewtonFactorization,
    ) -> Self {
        let selected_points = points.subset(newton.selected());
        let kernel_coeffs = kernel_coefficients(&newton);
        Self {
            kernel,
            selected_points,
            kernel_coeffs,
            newton,
        }
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn selected_indices(&self) -> &[usize] {
        self.newton.selected()
    }

    pub fn selected_points(&self) -> &PointSet {
        &self.selected_points
    }

    /// Length-`n` coefficient vector `c`, zero off the selected set.
    pub fn kernel_coeffs(&self) -> &[f64] {
        &self.kernel_coeffs
    }

    pub fn newton(&self) -> &NewtonFactorization {
        &self.newton
    }

    /// `f*(y) = Σ_k c_{i_k} K(x_{i_k}, y)`.
    pub fn predict(&self, y: &[f64]) -> Result<f64> {
        if self.selected_points.is_empty() {
            // still validate the query
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("query point"));
            }
            return Ok(0.0);
        }
        let k_col = self.kernel.kernel_column(&self.selected_points, y)?;
        Ok(self
            .newton
            .selected()
            .iter()
            .zip(&k_col)
            .map(|(&i, k)| self.kernel_coeffs[i] * k)
            .sum())
    }

    /// `f*(y) = Σ_j a*_j N_j(y)`, the Newton-basis form of the same surrogate.
    pub fn predict_newton(&self, y: &[f64]) -> Result<f64> {
        if self.selected_points.is_empty() {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("query point"));
            }
            return Ok(0.0);
        }
        let basis = self
            .newton
            .evaluate_newton(&self.kernel, &self.selected_points, y)?;
        Ok(basis
            .iter()
            .zip(self.newton.newton_coeffs())
            .map(|(n, a)| n * a)
            .sum())
    }

    /// Evaluates both representations at every row of `points` and fails if
    /// they differ by more than `REPRESENTATION_TOLERANCE · (1 + |f*|)`.
    pub fn cross_check(&self, points: &PointSet) -> Result<()> {
        for (index, y) in points.rows().enumerate() {
            let via_kernel = self.predict(y)?;
            let via_newton = self.predict_newton(y)?;
            let diff = (via_kernel - via_newton).abs();
            if diff > REPRESENTATION_TOLERANCE * (1.0 + via_newton.abs()) {
                return Err(Error::RepresentationMismatch { index, diff });
            }
        }
        Ok(())
    }
}

/// Back-substitutes the change of basis: `c_{i_k} = Σ_{j ≥ k} d_{k,j} a*_j`.
pub fn kernel_coefficients(fact: &NewtonFactorization) -> Vec<f64> {
    let mut c = vec![0.0; fact.n_samples()];
    let a = fact.newton_coeffs();
    for (k, &i) in fact.selected().iter().enumerate() {
        c[i] = (k..a.len())
            .map(|j| fact.change_of_basis(k, j) * a[j])
            .sum();
    }
    c
}

/// Normalized explanations `γ_i = |c_i| / max |c|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanations {
    pub gamma: Vec<f64>,
    /// Set when every coefficient is zero and `γ` is reported as all zeros.
    pub degenerate: bool,
}

pub fn explanations(c: &[f64]) -> Explanations {
    let max = c.iter().filter(|v| !v.is_nan()).fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Explanations {
            gamma: vec![0.0; c.len()],
            degenerate: true,
        };
    }
    Explanations {
        gamma: c.iter().map(|v| v.abs() / max).collect(),
        degenerate: false,
    }
}

/// Absolute and normalized observation-specific errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationErrors {
    /// `|f(x_i) − f*(x_i)|`.
    pub absolute: Vec<f64>,
    /// `|f(x_i) − f*(x_i)| / (1 + |f(x_i)|)`.
    pub normalized: Vec<f64>,
}

pub fn observation_errors(
    model: &SurrogateModel,
    points: &PointSet,
    f_vals: &[f64],
) -> Result<ObservationErrors> {
    if points.len() != f_vals.len() {
        return Err(Error::input(format!(
            "{} target values for {} points",
            f_vals.len(),
            points.len()
        )));
    }
    let mut absolute = Vec::with_capacity(f_vals.len());
    let mut normalized = Vec::with_capacity(f_vals.len());
    for (y, &f) in points.rows().zip(f_vals) {
        let err = (f - model.predict(y)?).abs();
        absolute.push(err);
        normalized.push(err / (1.0 + f.abs()));
    }
    Ok(ObservationErrors {
        absolute,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub kernel: KernelFamily,
    pub length_scale: f64,
    pub tolerance: f64,
    pub max_points: Option<usize>,
    pub selection_rule: String,
    pub stop_reason: StopReason,
}

/// Per-observation explanations and errors for one surrogate fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub gamma: Vec<f64>,
    pub errors: Vec<f64>,
    pub normalized_errors: Vec<f64>,
    pub kernel_coeffs: Vec<f64>,
    pub selected_indices: Vec<usize>,
    /// Largest absolute error over all samples.
    pub achieved_tolerance: f64,
    pub n_selected: usize,
    /// True when all coefficients vanish (e.g. `f ≡ 0`).
    pub degenerate: bool,
    pub metadata: RunMetadata,
}

impl ExplanationReport {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.selected_indices.contains(&i)
    }

    /// Indices ordered by decreasing `γ`, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.gamma.len()).collect();
        idx.sort_by(|&a, &b| self.gamma[b].total_cmp(&self.gamma[a]).then(a.cmp(&b)));
        idx
    }
}

/// Fits the surrogate, cross-checks both representations on the samples and
/// assembles the explanation report.
pub fn explain(
    points: &PointSet,
    f_vals: &[f64],
    kernel: KernelConfig,
    cfg: &OmpConfig,
) -> Result<(SurrogateModel, ExplanationReport)> {
    let model = SurrogateModel::fit(points, f_vals, kernel, cfg)?;
    let report = report_for(&model, points, f_vals, cfg)?;
    Ok((model, report))
}

pub fn report_for(
    model: &SurrogateModel,
    points: &PointSet,
    f_vals: &[f64],
    cfg: &OmpConfig,
) -> Result<ExplanationReport> {
    model.cross_check(points)?;
    let expl = explanations(model.kernel_coeffs());
    let errors = observation_errors(model, points, f_vals)?;

    let support = expl.gamma.iter().filter(|&&g| g > 0.0).count();
    if !expl.degenerate && support != model.selected_indices().len() {
        return Err(Error::Degenerate(format!(
            "{} selected points but {support} nonzero kernel coefficients",
            model.selected_indices().len()
        )));
    }

    let achieved = errors.absolute.iter().fold(0.0f64, |m, &e| m.max(e));
    Ok(ExplanationReport {
        gamma: expl.gamma,
        errors: errors.absolute,
        normalized_errors: errors.normalized,
        kernel_coeffs: model.kernel_coeffs().to_vec(),
        selected_indices: model.selected_indices().to_vec(),
        achieved_tolerance: achieved,
        n_selected: model.selected_indices().len(),
        degenerate: expl.degenerate,
        metadata: RunMetadata {
            kernel: model.kernel().family(),
            length_scale: model.kernel().length_scale(),
            tolerance: cfg.tolerance,
            max_points: cfg.max_points,
            selection_rule: SELECTION_RULE.to_string(),
            stop_reason: model.newton().stop_reason(),
        },
    })
}
