//! Greedy orthogonal matching pursuit over kernel translates.
//!
//! Each step picks the sample with the largest absolute residual (f-greedy),
//! orthonormalizes its kernel translate against the translates picked so far
//! and updates residuals and the squared power function in place. The
//! resulting Newton basis satisfies
//!
//! ```text
//! N_j(x) = Σ_{k ≤ j} d_{k,j} K(x_{i_k}, x),      N_j(x_{i_k}) = 0 for k < j,
//! ```
//!
//! and the surrogate is `f*(x) = Σ_j a*_j N_j(x)`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::points::PointSet;

/// Candidates whose squared power function falls below `POWER_FLOOR · K(x, x)`
/// are never selected.
pub const POWER_FLOOR: f64 = 1e-12;

/// Name of the selection criterion, recorded in run metadata.
pub const SELECTION_RULE: &str = "f-greedy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Among equal maximal residuals the lowest sample index wins.
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    /// Stop once `max_k |f(x_k) − f*(x_k)| ≤ tolerance`.
    pub tolerance: f64,
    /// Upper bound on the number of selected points; `None` means `n`.
    pub max_points: Option<usize>,
    pub tie_break: TieBreak,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_points: None,
            tie_break: TieBreak::LowestIndex,
        }
    }
}

impl OmpConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::input(format!(
                "tolerance must be finite and nonnegative, got {}",
                self.tolerance
            )));
        }
        if self.max_points == Some(0) {
            return Err(Error::input("max_points must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Maximum residual reached the tolerance.
    Tolerance,
    /// The cap on selected points was hit.
    MaxPoints,
    /// No unselected candidate has a power function above the floor.
    PowerFloor,
}

/// Result of a greedy fit: selection order, Newton basis values at every
/// sample, the triangular change of basis and the residual state.
#[derive(Debug, Clone)]
pub struct NewtonFactorization {
    selected: Vec<usize>,
    /// `newton[j][k] = N_j(x_k)`, one column per selected point.
    newton: Vec<Vec<f64>>,
    /// `change_of_basis[j][k] = d_{k,j}` for `k ≤ j`.
    change_of_basis: Vec<Vec<f64>>,
    newton_coeffs: Vec<f64>,
    power_diag: Vec<f64>,
    residuals: Vec<f64>,
    /// Max residual before the first step and after every step.
    history: Vec<f64>,
    stop_reason: StopReason,
}

/// Fit the greedy surrogate to `f_vals` sampled at `points`.
pub fn fit(
    points: &PointSet,
    f_vals: &[f64],
    kernel: &KernelConfig,
    cfg: &OmpConfig,
) -> Result<NewtonFactorization> {
    cfg.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(Error::input("cannot fit an empty sample"));
    }
    if f_vals.len() != n {
        return Err(Error::input(format!(
            "{} target values for {n} points",
            f_vals.len()
        )));
    }
    if f_vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target values"));
    }

    let cap = cfg.max_points.unwrap_or(n).min(n);
    let mut residuals = f_vals.to_vec();
    // normalized kernels: P_0(x)² = K(x, x) = 1
    let mut power = vec![1.0; n];
    let mut is_selected = vec![false; n];
    let mut selected = Vec::new();
    let mut newton: Vec<Vec<f64>> = Vec::new();
    let mut change_of_basis: Vec<Vec<f64>> = Vec::new();
    let mut coeffs = Vec::new();
    let mut history = Vec::new();

    let stop_reason = loop {
        let max_res = max_abs(&residuals);
        history.push(max_res);
        if max_res <= cfg.tolerance {
            break StopReason::Tolerance;
        }
        if selected.len() == cap {
            break StopReason::MaxPoints;
        }

        let Some(pivot) = select_pivot(&residuals, &power, &is_selected) else {
            if selected.is_empty() {
                return Err(Error::Degenerate(format!(
                    "no candidate has squared power function above {POWER_FLOOR:e}"
                )));
            }
            warn!(
                "power floor {POWER_FLOOR:e} reached after {} points; max residual {max_res:e} > tolerance {:e}",
                selected.len(),
                cfg.tolerance
            );
            break StopReason::PowerFloor;
        };

        let m = selected.len();
        let scale = power[pivot].sqrt();

        // u = K(·, x_pivot) − Σ_j N_j(·) N_j(x_pivot), then normalize
        let mut column = kernel.column_unchecked(points, points.row(pivot));
        for basis in &newton {
            let w = basis[pivot];
            for (u, v) in column.iter_mut().zip(basis) {
                *u -= w * v;
            }
        }
        column.iter_mut().for_each(|u| *u /= scale);

        // d_{k,m} = −(Σ_{j=k}^{m−1} N_j(x_pivot) d_{k,j}) / scale,  d_{m,m} = 1 / scale
        let mut d_col = vec![0.0; m + 1];
        for (j, d_j) in change_of_basis.iter().enumerate() {
            let w = newton[j][pivot];
            for (acc, d) in d_col.iter_mut().zip(d_j) {
                *acc -= w * d;
            }
        }
        d_col[..m].iter_mut().for_each(|d| *d /= scale);
        d_col[m] = 1.0 / scale;

        let a = residuals[pivot] / column[pivot];
        for k in 0..n {
            residuals[k] -= a * column[k];
            power[k] -= column[k] * column[k];
        }

        is_selected[pivot] = true;
        selected.push(pivot);
        newton.push(column);
        change_of_basis.push(d_col);
        coeffs.push(a);
    };

    Ok(NewtonFactorization {
        selected,
        newton,
        change_of_basis,
        newton_coeffs: coeffs,
        power_diag: power,
        residuals,
        history,
        stop_reason,
    })
}

/// Argmax of `|r_k|` over unselected candidates above the power floor;
/// strict comparison in index order keeps the lowest index on ties.
fn select_pivot(residuals: &[f64], power: &[f64], is_selected: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, (&r, &p)) in residuals.iter().zip(power).enumerate() {
        if is_selected[k] || p <= POWER_FLOOR {
            continue;
        }
        let r = r.abs();
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((k, r));
        }
    }
    best.map(|(k, _)| k)
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl NewtonFactorization {
    pub fn n_samples(&self) -> usize {
        self.residuals.len()
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    /// Selected sample indices in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// `N_j(x_k)`.
    pub fn newton_at(&self, k: usize, j: usize) -> f64 {
        self.newton[j][k]
    }

    /// Values of `N_j` at all samples.
    pub fn newton_column(&self, j: usize) -> &[f64] {
        &self.newton[j]
    }

    /// `d_{k,j}`; zero below the diagonal (`k > j`).
    pub fn change_of_basis(&self, k: usize, j: usize) -> f64 {
        self.change_of_basis[j].get(k).copied().unwrap_or(0.0)
    }

    /// Column `j` of the triangular change of basis, `[d_{0,j}, …, d_{j,j}]`.
    pub fn change_of_basis_column(&self, j: usize) -> &[f64] {
        &self.change_of_basis[j]
    }

    /// Coefficients `a*` in the Newton basis.
    pub fn newton_coeffs(&self) -> &[f64] {
        &self.newton_coeffs
    }

    /// Final squared power function at every sample.
    pub fn power_diag(&self) -> &[f64] {
        &self.power_diag
    }

    /// `f(x_k) − f*(x_k)` at every sample.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        max_abs(&self.residuals)
    }

    /// Max residual before any selection (index 0) and after each step.
    pub fn residual_history(&self) -> &[f64] {
        &self.history
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    /// `[N_1(y), …, N_{n*}(y)]` from the kernel translates of the selected points.
    ///
    /// `selected_points` must hold the selected rows in selection order.
    pub fn evaluate_newton(
        &self,
        kernel: &KernelConfig,
        selected_points: &PointSet,
        y: &[f64],
    ) -> Result<Vec<f64>> {
        if selected_points.len() != self.selected.len() {
            return Err(Error::input(format!(
                "{} selected points supplied for a basis of size {}",
                selected_points.len(),
                self.selected.len()
            )));
        }
        let k_col = kernel.kernel_column(selected_points, y)?;
        Ok(self.newton_from_kernel_column(&k_col))
    }

    pub(crate) fn newton_from_kernel_column(&self, k_col: &[f64]) -> Vec<f64> {
        self.change_of_basis
            .iter()
            .map(|d| d.iter().zip(k_col).map(|(d, k)| d * k).sum())
            .collect()
    }
}
