//! K-fold cross-validation of the kernel length scale.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::SurrogateModel;
use crate::kernels::{KernelConfig, KernelFamily};
use crate::omp::OmpConfig;
use crate::points::PointSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k_folds: usize,
    pub grid: Vec<f64>,
    pub shuffle_seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_folds: 5,
            grid: log_grid(1e-4, 1e2, 25),
            shuffle_seed: 42,
        }
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Seeded shuffle of `0..n` split into `k` contiguous folds whose sizes
/// differ by at most one.
pub fn folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub length_scale: f64,
    /// Mean held-out squared error; `None` when the candidate failed.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_length_scale: f64,
    pub best_error: f64,
    pub curve: Vec<CvPoint>,
}

/// Held-out mean squared error of the surrogate for one length scale.
pub fn cv_error(
    points: &PointSet,
    f_vals: &[f64],
    kernel: KernelConfig,
    folds: &[Vec<usize>],
    omp_cfg: &OmpConfig,
) -> Result<f64> {
    let n = points.len();
    let mut total = 0.0;
    for held_out in folds {
        let mut in_fold = vec![false; n];
        held_out.iter().for_each(|&i| in_fold[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
        let train_f: Vec<f64> = train.iter().map(|&i| f_vals[i]).collect();
        let model = SurrogateModel::fit(&points.subset(&train), &train_f, kernel, omp_cfg)?;
        let mut sq = 0.0;
        for &i in held_out {
            let d = f_vals[i] - model.predict(points.row(i))?;
            sq += d * d;
        }
        total += sq / held_out.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// Grid search over `cfg.grid`; the smallest length scale wins ties.
pub fn cv_select(
    points: &PointSet,
    f_vals: &[f64],
    family: KernelFamily,
    cfg: &CvConfig,
    omp_cfg: &OmpConfig,
) -> Result<CvResult> {
    let n = points.len();
    if cfg.k_folds < 2 {
        return Err(Error::input("k_folds must be at least 2"));
    }
    if cfg.k_folds > n {
        return Err(Error::input(format!(
            "k_folds = {} exceeds the {n} available samples",
            cfg.k_folds
        )));
    }
    if f_vals.len() != n {
        return Err(Error::input(format!("{} target values for {n} points", f_vals.len())));
    }
    if cfg.grid.is_empty() {
        return Err(Error::input("length-scale grid is empty"));
    }
    let kernels = cfg
        .grid
        .iter()
        .map(|&l| KernelConfig::new(family, l))
        .collect::<Result<Vec<_>>>()?;

    let folds = folds(n, cfg.k_folds, cfg.shuffle_seed);
    if folds.iter().any(|f| n - f.len() < 1) {
        return Err(Error::input("a fold leaves no training points"));
    }

    let mut curve = Vec::with_capacity(kernels.len());
    let mut best: Option<(f64, f64)> = None;
    for kernel in kernels {
        let l = kernel.length_scale();
        let error = match cv_error(points, f_vals, kernel, &folds, omp_cfg) {
            Ok(e) if e.is_finite() => Some(e),
            Ok(e) => {
                warn!("length scale {l:e}: non-finite CV error {e}, skipped");
                None
            }
            Err(e) => {
                warn!("length scale {l:e}: {e}, skipped");
                None
            }
        };
        if let Some(e) = error {
            let better = match best {
                None => true,
                Some((bl, be)) => e < be || (e == be && l < bl),
            };
            if better {
                best = Some((l, e));
            }
        }
        curve.push(CvPoint {
            length_scale: l,
            error,
        });
    }

    let (best_length_scale, best_error) =
        best.ok_or_else(|| Error::Degenerate("no grid candidate produced a finite CV error".into()))?;
    Ok(CvResult {
        best_length_scale,
        best_error,
        curve,
    })
}
