mod common;

use common::*;
use obs_explain::explain::{self, kernel_coefficients, SurrogateModel};
use obs_explain::{omp, KernelFamily, OmpConfig, PointSet};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Gaussian),
        Just(KernelFamily::Matern32),
        Just(KernelFamily::Exponential)
    ]
}

fn tolerance() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-6f64..1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn factorization_structure(seed in any::<u64>(), fam in family(), eps in tolerance()) {
        let inst = random_instance(&mut rng(seed), fam, 10, 3);
        let fact = omp::fit(&inst.points, &inst.f, &inst.kernel, &OmpConfig::with_tolerance(eps)).unwrap();
        let sel = fact.selected();

        let mut seen = sel.to_vec();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), sel.len());

        // N_j(x_{i_k}) = 0 for k < j
        for j in 0..sel.len() {
            for &i in &sel[..j] {
                prop_assert!(fact.newton_at(i, j).abs() <= 1e-9);
            }
        }

        // V_S V_Sᵀ = K_SS
        for (a, &ia) in sel.iter().enumerate() {
            for &ib in &sel[..=a] {
                let recon: f64 = (0..sel.len()).map(|j| fact.newton_at(ia, j) * fact.newton_at(ib, j)).sum();
                let k = inst.kernel.eval(inst.points.row(ia), inst.points.row(ib)).unwrap();
                prop_assert!((recon - k).abs() <= 1e-8);
            }
        }

        for k in 0..inst.points.len() {
            let p = fact.power_diag()[k];
            prop_assert!((-1e-10..=1.0).contains(&p));
            let direct = 1.0 - (0..sel.len()).map(|j| fact.newton_at(k, j).powi(2)).sum::<f64>();
            prop_assert!((p - direct).abs() <= 1e-12);
        }
        for &i in sel {
            prop_assert!(fact.residuals()[i].abs() <= 1e-9 * (1.0 + inst.f[i].abs()));
            prop_assert!(fact.power_diag()[i] <= 1e-9);
        }
        if fact.stop_reason() == obs_explain::StopReason::Tolerance {
            prop_assert!(fact.max_residual() <= eps);
        }
    }

    #[test]
    fn representations_agree(seed in any::<u64>(), fam in family(), eps in tolerance()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, fam, 10, 3);
        let model = SurrogateModel::fit(&inst.points, &inst.f, inst.kernel, &OmpConfig::with_tolerance(eps)).unwrap();
        for _ in 0..20 {
            let y: Vec<f64> = (0..inst.points.dim()).map(|_| r.random_range(-2.0..2.0)).collect();
            let a = model.predict(&y).unwrap();
            let b = model.predict_newton(&y).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
        for (k, y) in inst.points.rows().enumerate() {
            let fitted = inst.f[k] - model.newton().residuals()[k];
            prop_assert!((model.predict(y).unwrap() - fitted).abs() <= 1e-7 * (1.0 + fitted.abs()));
        }
    }

    #[test]
    fn explanation_invariants(seed in any::<u64>(), fam in family(), eps in tolerance()) {
        let inst = random_instance(&mut rng(seed), fam, 10, 3);
        let (model, report) = explain::explain(&inst.points, &inst.f, inst.kernel, &OmpConfig::with_tolerance(eps)).unwrap();
        let c = model.kernel_coeffs();
        prop_assert!(report.gamma.iter().all(|g| (0.0..=1.0).contains(g)));
        if report.n_selected > 0 {
            prop_assert_eq!(report.gamma.iter().cloned().fold(0.0, f64::max), 1.0);
        }
        let support: Vec<usize> = (0..c.len()).filter(|&i| report.gamma[i] > 0.0).collect();
        let mut sel = report.selected_indices.clone();
        sel.sort_unstable();
        prop_assert_eq!(support, sel);

        // γ ordering is |c| ordering
        let mut by_gamma: Vec<usize> = (0..c.len()).collect();
        let mut by_coeff = by_gamma.clone();
        by_gamma.sort_by(|&a, &b| report.gamma[a].total_cmp(&report.gamma[b]).then(a.cmp(&b)));
        by_coeff.sort_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()).then(a.cmp(&b)));
        prop_assert_eq!(by_gamma, by_coeff);

        for (i, e) in report.errors.iter().enumerate() {
            prop_assert!(*e >= 0.0);
            if report.is_selected(i) {
                prop_assert!(*e <= 1e-9 * (1.0 + inst.f[i].abs()));
            }
        }
    }

    #[test]
    fn scale_equivariance(seed in any::<u64>(), fam in family(), lambda in 0.01f64..100.0) {
        let inst = random_instance(&mut rng(seed), fam, 10, 3);
        let cfg = OmpConfig::with_tolerance(0.0);
        let scaled: Vec<f64> = inst.f.iter().map(|v| lambda * v).collect();
        let a = omp::fit(&inst.points, &inst.f, &inst.kernel, &cfg).unwrap();
        let b = omp::fit(&inst.points, &scaled, &inst.kernel, &cfg).unwrap();
        prop_assert_eq!(a.selected(), b.selected());
        let (ca, cb) = (kernel_coefficients(&a), kernel_coefficients(&b));
        let scale = max_abs(ca.iter().copied()).max(f64::MIN_POSITIVE);
        for (x, y) in ca.iter().zip(&cb) {
            prop_assert!((lambda * x - y).abs() <= 1e-10 * lambda * scale);
        }
        for (x, y) in a.newton_coeffs().iter().zip(b.newton_coeffs()) {
            prop_assert!((lambda * x - y).abs() <= 1e-10 * lambda * x.abs().max(1.0));
        }
        let (ga, gb) = (explain::explanations(&ca).gamma, explain::explanations(&cb).gamma);
        for (x, y) in ga.iter().zip(&gb) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn permutation_equivariance(seed in any::<u64>(), fam in family()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, fam, 10, 3);
        let n = inst.points.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| inst.points.row(i).to_vec()).collect();
        let f: Vec<f64> = perm.iter().map(|&i| inst.f[i]).collect();
        let permuted = PointSet::from_rows(&rows).unwrap();

        let cfg = OmpConfig::with_tolerance(1e-3);
        let a = omp::fit(&inst.points, &inst.f, &inst.kernel, &cfg).unwrap();
        let b = omp::fit(&permuted, &f, &inst.kernel, &cfg).unwrap();
        let mapped: Vec<usize> = b.selected().iter().map(|&j| perm[j]).collect();
        prop_assert_eq!(a.selected(), &mapped[..]);
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((a.residuals()[i] - b.residuals()[j]).abs() <= 1e-12);
            prop_assert!((a.power_diag()[i] - b.power_diag()[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic(seed in any::<u64>(), fam in family()) {
        let inst = random_instance(&mut rng(seed), fam, 10, 3);
        let cfg = OmpConfig::with_tolerance(1e-4);
        let a = omp::fit(&inst.points, &inst.f, &inst.kernel, &cfg).unwrap();
        let b = omp::fit(&inst.points, &inst.f, &inst.kernel, &cfg).unwrap();
        prop_assert_eq!(a.selected(), b.selected());
        prop_assert_eq!(a.residuals(), b.residuals());
        prop_assert_eq!(a.newton_coeffs(), b.newton_coeffs());
    }
}
