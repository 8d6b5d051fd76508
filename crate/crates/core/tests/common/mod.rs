//! Dense linear-algebra oracles and random instance generators shared by the
//! integration tests. Nothing here goes through the greedy Newton update.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use obs_explain::{KernelConfig, KernelFamily, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gram_matrix(kernel: &KernelConfig, rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| kernel.eval(&rows[i], &rows[j]).unwrap())
}

/// Solves `K c = f` on the full Gram matrix.
pub fn dense_solve(kernel: &KernelConfig, rows: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    let k = gram_matrix(kernel, rows);
    let rhs = DVector::from_column_slice(f);
    k.lu().solve(&rhs).expect("singular Gram matrix").iter().copied().collect()
}

/// Dense interpolant `Σ c_i K(x_i, y)`.
pub fn dense_predict(kernel: &KernelConfig, rows: &[Vec<f64>], c: &[f64], y: &[f64]) -> f64 {
    rows.iter()
        .zip(c)
        .map(|(x, ci)| ci * kernel.eval(x, y).unwrap())
        .sum()
}

/// Newton basis values at `y` from a Cholesky factor of the selected block:
/// `N(y) = L⁻¹ k_S(y)` with `K_SS = L Lᵀ`, `S` in selection order.
pub fn cholesky_newton(kernel: &KernelConfig, selected: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let l = gram_matrix(kernel, selected)
        .cholesky()
        .expect("selected block not positive definite")
        .l();
    let k = DVector::from_iterator(
        selected.len(),
        selected.iter().map(|x| kernel.eval(x, y).unwrap()),
    );
    l.solve_lower_triangular(&k).unwrap().iter().copied().collect()
}

pub fn rows_of(points: &PointSet) -> Vec<Vec<f64>> {
    points.rows().map(<[f64]>::to_vec).collect()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Small, well-separated random instance for dense comparisons.
pub struct Instance {
    pub points: PointSet,
    pub f: Vec<f64>,
    pub kernel: KernelConfig,
}

pub fn random_instance(rng: &mut ChaCha8Rng, family: KernelFamily, max_n: usize, max_p: usize) -> Instance {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(1..=max_p);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while rows.len() < n {
        attempts += 1;
        if attempts.is_multiple_of(1000) {
            // jammed: start over
            rows.clear();
        }
        let cand: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let far = rows.iter().all(|r| {
            r.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > 0.15
        });
        if far {
            rows.push(cand);
        }
    }
    let length_scale = match family {
        KernelFamily::Gaussian => rng.random_range(0.1..0.4),
        _ => rng.random_range(0.2..1.5),
    };
    let f = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    Instance {
        points: PointSet::from_rows(&rows).unwrap(),
        f,
        kernel: KernelConfig::new(family, length_scale).unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
