use proptest::prelude::*;

use quadvar_core::numeric::{integrate_with_breaks, Tolerance};
use quadvar_core::tvbound::{gn_minus_g, weighted_kernel_mass, TvBoundEvaluator};
use quadvar_core::TvBoundConfig;

fn h2(s: f64) -> f64 {
    if s.abs() <= 1.0 {
        1.0
    } else {
        1.0 / (s * s)
    }
}

/// `∫_{−L}^{L} |y|^{−c} φ(y) dy` with `y = ±t^{1/(1−c)}` on each side, which
/// absorbs the singularity at the origin.
fn singular_line<F: Fn(f64) -> f64>(phi: F, c: f64, side: f64, kinks: &[f64]) -> f64 {
    let p = 1.0 / (1.0 - c);
    let tol = Tolerance::new(1e-15, 1e-13).with_max_intervals(4000);
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let t_max = side.powf(1.0 - c);
        let mut pts = vec![0.0, t_max];
        for &k in kinks {
            let y = sign * k;
            if y > 0.0 && y < side {
                pts.push(y.powf(1.0 - c));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        total += integrate_with_breaks(|t| p * phi(sign * t.powf(p)), &pts, tol).unwrap().value;
    }
    total
}

/// `∬_{[−L,L]²} |xy|^{−c} h²(x+y)` over the whole square, no symmetry used.
fn full_square_mass(c: f64, side: f64) -> f64 {
    let inner = |x: f64| singular_line(|y| h2(x + y), c, side, &[1.0 - x, -1.0 - x, x - 1.0, x + 1.0]);
    let outer_kinks = [1.0, side - 1.0, side + 1.0];
    singular_line(inner, c, side, &outer_kinks)
}

#[test]
fn folded_mass_matches_full_square() {
    let cfg = TvBoundConfig::new(0.85, 1.0);
    let c = 2.0 * cfg.hurst - 1.0;
    let eval = TvBoundEvaluator::new(cfg, 16).unwrap();
    for side in [0.7, 2.5, 9.0] {
        let folded = eval.kernel_mass_on_square(side).unwrap();
        let full = full_square_mass(c, side);
        assert!((folded - full).abs() < 1e-8 * full, "L={side}: {folded} vs {full}");
    }
}

#[test]
fn kernel_mass_on_growing_squares_approaches_closed_form() {
    // The mass outside [−L, L]² decays like L^{1−2c}.
    let cfg = TvBoundConfig::new(0.8, 1.0);
    let c = 2.0 * cfg.hurst - 1.0;
    let eval = TvBoundEvaluator::new(cfg, 16).unwrap();
    let total = weighted_kernel_mass(0.8);
    let gaps: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&l| total - eval.kernel_mass_on_square(l).unwrap())
        .collect();
    assert!(gaps.iter().all(|&g| g > 0.0), "{gaps:?}");
    for w in gaps.windows(2) {
        let exponent = (w[1] / w[0]).log10();
        assert!((exponent - (1.0 - 2.0 * c)).abs() < 0.01, "{gaps:?}");
    }
}

#[test]
fn third_term_scales_like_power_of_n() {
    let cfg = TvBoundConfig::new(0.85, 1.0);
    let eval = TvBoundEvaluator::new(cfg.clone(), 1024).unwrap();
    let scaled: Vec<f64> = [16usize, 64, 1024]
        .iter()
        .map(|&n| eval.t3(n) * (n as f64).powf(2.0 - 2.0 * cfg.alpha))
        .collect();
    for s in &scaled {
        assert!((s - scaled[0]).abs() <= 1e-12 * scaled[0]);
    }
}

#[test]
fn terms_are_positive_and_first_term_decays() {
    let cfg = TvBoundConfig::new(0.85, 1.0);
    let eval = TvBoundEvaluator::new(cfg, 512).unwrap();
    let terms = eval.scan(&[64, 128, 256, 512]).unwrap();
    for t in &terms {
        assert!(t.t1 > 0.0 && t.t2 > 0.0 && t.t3 > 0.0);
    }
    assert!(terms.windows(2).all(|w| w[1].t1 < w[0].t1));
    assert!(eval.terms(4).is_err());
    assert!(eval.terms(1024).is_err());
}

#[test]
fn increment_inequality_fails_near_the_dirichlet_peak() {
    // g_n(s) returns to 1 at s = 2πn while g(s) is small there.
    let n = 64.0;
    let (lhs, rhs) = gn_minus_g(n, std::f64::consts::PI * n, std::f64::consts::PI * n * (1.0 - 1e-7));
    assert!(lhs > 0.9 && rhs < 0.01, "{lhs} {rhs}");
    // Violations already start around |s| = n, where |e^{is} − 1| = 2.
    let s = 21.0 * std::f64::consts::PI;
    let (lhs, rhs) = gn_minus_g(n, 0.5 * s, 0.5 * s);
    assert!(lhs > rhs, "{lhs} {rhs}");
}

proptest! {
    #[test]
    fn increment_inequality_holds_away_from_the_peak(
        n in 8.0f64..4096.0,
        u in -0.9f64..0.9,
        split in 0.0f64..1.0,
    ) {
        let s = u * n;
        let (lhs, rhs) = gn_minus_g(n, split * s, (1.0 - split) * s);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "s={s}: {lhs} > {rhs}");
    }
}
