//! Reference computations written directly from definitions, used to check
//! the optimized paths in `quadvar-core`.

use std::f64::consts::PI;

use quadvar_core::numeric::{CompensatedSum, GaussLegendre};

/// `(v_n, κ₃, κ₄)` by quadruple loops over the covariance matrix:
/// `κ₃ = 8 tr(R³) / (n v_n)^{3/2}` and `κ₄ = 48 tr(R⁴) / (n v_n)²`.
pub fn brute_force_cumulants(rho: &[f64], n: usize) -> (f64, f64, f64) {
    assert!(rho.len() >= n, "need rho(0..n)");
    let r = |i: usize, j: usize| rho[i.abs_diff(j)];
    let mut t2 = CompensatedSum::new();
    let mut t3 = CompensatedSum::new();
    let mut t4 = CompensatedSum::new();
    for i in 0..n {
        for j in 0..n {
            let rij = r(i, j);
            t2.add(rij * rij);
            for k in 0..n {
                let rijk = rij * r(j, k);
                t3.add(rijk * r(k, i));
                for l in 0..n {
                    t4.add(rijk * r(k, l) * r(l, i));
                }
            }
        }
    }
    let v = 2.0 * t2.value() / n as f64;
    let nv = n as f64 * v;
    (v, 8.0 * t3.value() / nv.powf(1.5), 48.0 * t4.value() / (nv * nv))
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `(1/π) ∫_0^∞ x^{1−2H} cos x dx` for `1/2 < H < 1` by Gauss panels over half
/// periods and repeated averaging of the alternating partial sums.
pub fn cosine_integral(hurst: f64) -> f64 {
    let gl = GaussLegendre::new(30);
    let s = 2.0 - 2.0 * hurst;
    // x = t^{1/s} removes the endpoint singularity on [0, π/2].
    let head = gl.integrate(0.0, (PI / 2.0).powf(s), |t| t.powf(1.0 / s).cos() / s);
    let panel = |a: f64, b: f64| gl.integrate(a, b, |x| x.powf(1.0 - 2.0 * hurst) * x.cos());
    let mut partial = Vec::with_capacity(60);
    let mut acc = head;
    for j in 0..60 {
        let a = PI / 2.0 + j as f64 * PI;
        acc += panel(a, a + PI);
        partial.push(acc);
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    partial[0] / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_integral_matches_mellin_transform() {
        // ∫_0^∞ x^{s−1} cos x dx = Γ(s) cos(πs/2); Γ(0.3) and Γ(0.5) = √π.
        let gamma_03 = 2.991_568_987_687_590_6;
        let expected = gamma_03 * (0.15 * PI).cos() / PI;
        assert!((cosine_integral(0.85) - expected).abs() < 1e-10 * expected);
        let expected = PI.sqrt() * (0.25 * PI).cos() / PI;
        assert!((cosine_integral(0.75) - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn brute_force_of_identity_is_chi_square() {
        let (v, k3, k4) = brute_force_cumulants(&[1.0, 0.0, 0.0, 0.0], 4);
        assert_eq!(v, 2.0);
        assert!((k3 - 2f64.powf(1.5) / 2.0).abs() < 1e-15);
        assert!((k4 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        assert!((slope(&pts) + 0.5).abs() < 1e-15);
    }
}
