use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use quadvar_core::cumulants::{domination_ratio, kappa3_exact, kappa4_exact};
use quadvar_core::rates::BertrandSum;
use quadvar_core::{CovarianceModel, CumulantEngine};

fn toeplitz(rho: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho[i.abs_diff(j)])
}

/// `(v_n, κ₃, κ₄)` from the spectrum of the covariance matrix: `F_n` is the
/// quadratic form `Σ μ_i (Z_i² − 1) / sqrt(n v_n)` with `μ` the eigenvalues of `R`,
/// so `κ_p = 2^{p−1}(p−1)! Σ μᵖ / (n v_n)^{p/2}`.
fn spectral_oracle(rho: &[f64], n: usize) -> (f64, f64, f64) {
    let mu = SymmetricEigen::new(toeplitz(rho, n)).eigenvalues;
    let power = |p: i32| mu.iter().map(|m| m.powi(p)).sum::<f64>();
    let nv = 2.0 * power(2);
    (nv / n as f64, 8.0 * power(3) / nv.powf(1.5), 48.0 * power(4) / (nv * nv))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn independent_sequence_has_chi_square_cumulants() {
    let model = CovarianceModel::iid();
    for n in [1usize, 2, 7, 100, 4096] {
        let nf = n as f64;
        assert!(close(kappa3_exact(&model, n), 2f64.powf(1.5) / nf.sqrt(), 1e-14));
        assert!(close(kappa4_exact(&model, n), 12.0 / nf, 1e-14));
    }
    assert!(close(domination_ratio(&model, 1000).unwrap(), 12f64.powf(0.75) / 2f64.powf(1.5), 1e-14));
}

#[test]
fn finite_range_table_matches_spectrum() {
    let model = CovarianceModel::tabulated(vec![1.0, 0.4, -0.1]).unwrap();
    let rho = model.autocovariances(60);
    let engine = CumulantEngine::new(&model, 60);
    for n in [3, 10, 37, 60] {
        let (v, k3, k4) = spectral_oracle(&rho, n);
        assert!(close(engine.variance_vn(n), v, 1e-12));
        assert!(close(engine.kappa3(n), k3, 1e-11), "n={n}");
        assert!(close(engine.kappa4(n), k4, 1e-11), "n={n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fgn_cumulants_match_spectrum(h in 0.05f64..0.95, n in 2usize..40) {
        let model = CovarianceModel::fgn(h).unwrap();
        let rho = model.autocovariances(n);
        let engine = CumulantEngine::new(&model, n);
        let (v, k3, k4) = spectral_oracle(&rho, n);
        prop_assert!(close(engine.variance_vn(n), v, 1e-11));
        prop_assert!(close(engine.kappa3(n), k3, 1e-10));
        prop_assert!(close(engine.kappa4(n), k4, 1e-10));
    }

    #[test]
    fn log_power_cumulants_match_spectrum(h in 0.55f64..0.95, beta in -1.0f64..1.0, n in 2usize..32) {
        // Not necessarily positive definite; the trace identities hold regardless.
        let model = CovarianceModel::log_power(h, beta, false).unwrap();
        let rho = model.autocovariances(n);
        let engine = CumulantEngine::new(&model, n);
        let (_, k3, k4) = spectral_oracle(&rho, n);
        prop_assert!(close(engine.kappa3(n), k3, 1e-9));
        prop_assert!(close(engine.kappa4(n), k4, 1e-9));
    }

    #[test]
    fn covariance_is_even(h in 0.05f64..0.95, k in 0i64..10_000) {
        let model = CovarianceModel::fgn(h).unwrap();
        prop_assert_eq!(model.rho(k), model.rho(-k));
    }

    #[test]
    fn third_cumulant_sandwich(h in 0.5f64..0.95, log2n in 6u32..13) {
        let n = 1usize << log2n;
        let engine = CumulantEngine::new(&CovarianceModel::fgn(h).unwrap(), n);
        let (lo, hi) = engine.kappa3_bounds(n);
        let k3 = engine.kappa3(n).abs();
        prop_assert!(lo <= k3 && k3 <= hi, "{lo} <= {k3} <= {hi}");
    }

    #[test]
    fn bertrand_dichotomy(alpha in -3.0f64..0.0, beta in -3.0f64..3.0) {
        let s = BertrandSum::new(alpha, beta);
        prop_assert_eq!(s.converges(), alpha < -1.0);
        let tail = s.tail_integral(1000);
        prop_assert_eq!(tail.is_ok(), alpha < -1.0);
    }

    #[test]
    fn bertrand_critical_line(beta in -3.0f64..3.0) {
        let s = BertrandSum::new(-1.0, beta);
        prop_assert_eq!(s.converges(), beta < -1.0);
        if beta < -1.0 {
            let t0 = 1000f64.ln();
            let tail = s.tail_integral(1000).unwrap();
            prop_assert!(close(tail, -t0.powf(beta + 1.0) / (beta + 1.0), 1e-12));
        }
    }
}
