//! Log-modulated spectral densities on the circle and their Fourier coefficients.
//!
//! The density is `q(x) = C |x|^{1−2H} log^{2β}(eπ/|x|)` on `[−π, π]`, normalized so
//! that `∫ q dx / 2π = 1`. Fourier inversion handles the integrable singularity at
//! zero with the substitution `x = x₀ u^{1/(2−2H)}`, which turns the power factor
//! into a constant and leaves only a logarithmic singularity in `u`; that one is
//! resolved by geometrically graded Gauss panels towards `u = 0`.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::{integrate_with_breaks, sum_alternating, CompensatedSum, GaussLegendre, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    /// `|x|^{1−2H} log^{2β}(eπ/|x|)`, `β ≥ 0`.
    LogModulated,
    /// `|x|^{1−2H} |log(1/|x|)|^{−2β}`, `β ≤ 0`. Vanishes at `|x| = 1` when `β < 0`.
    LogInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Nodes per Gauss–Legendre panel.
    pub gauss_order: usize,
    /// Panels per half period of `cos(kx)` in single-lag inversion.
    pub panels_per_half_period: usize,
    /// Ratio between consecutive graded panels near the singularity.
    pub grading_ratio: f64,
    /// Number of graded panels; the innermost one ends at `grading_ratio^levels`.
    pub grading_levels: usize,
    /// Stopping increment of the accelerated oscillatory integrals.
    pub oscillatory_tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            gauss_order: 16,
            panels_per_half_period: 1,
            grading_ratio: 0.25,
            grading_levels: 52,
            oscillatory_tolerance: 1e-12,
        }
    }
}

impl QuadratureConfig {
    /// Same rule with twice as many panels everywhere.
    pub fn refined(&self) -> Self {
        Self {
            panels_per_half_period: 2 * self.panels_per_half_period,
            grading_ratio: self.grading_ratio.sqrt(),
            grading_levels: 2 * self.grading_levels,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gauss_order < 2 || self.panels_per_half_period == 0 || self.grading_levels == 0 {
            return Err(Error::domain("quadrature config needs gauss_order >= 2 and positive panel counts"));
        }
        if !(self.grading_ratio > 0.0 && self.grading_ratio < 1.0) {
            return Err(Error::domain("grading ratio must lie in (0, 1)"));
        }
        if !(self.oscillatory_tolerance > 0.0) {
            return Err(Error::domain("oscillatory tolerance must be positive"));
        }
        Ok(())
    }

    /// Nodes and weights on `[0, 1]`, geometrically graded towards 0.
    fn graded_unit_rule(&self) -> Vec<(f64, f64)> {
        let rule = GaussLegendre::new(self.gauss_order);
        let mut out = Vec::with_capacity(rule.order() * (self.grading_levels + 1));
        let mut hi = 1.0;
        for _ in 0..self.grading_levels {
            let lo = hi * self.grading_ratio;
            out.extend(rule.on(lo, hi));
            hi = lo;
        }
        out.extend(rule.on(0.0, hi));
        out
    }
}

/// Integrable singular factor `x^{γ−1} (log(A/x))^p` near zero.
#[derive(Debug, Clone, Copy)]
struct SingularFactor {
    gamma: f64,
    scale: f64,
    power: f64,
}

impl SingularFactor {
    /// Nodes and weights integrating `x^{γ−1}(log(A/x))^p φ(x)` over `[0, x0]`,
    /// obtained from `x = x0 u^{1/γ}`. Requires `x0 < A`.
    fn rule(&self, x0: f64, unit: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let log0 = (self.scale / x0).ln();
        let pre = x0.powf(self.gamma) / self.gamma;
        unit.iter()
            .map(|&(u, w)| {
                let x = x0 * u.powf(1.0 / self.gamma);
                let l = log0 - u.ln() / self.gamma;
                let lp = if self.power == 0.0 { 1.0 } else { l.powf(self.power) };
                (x, pre * w * lp)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDensity {
    kind: SpectralKind,
    hurst: f64,
    beta: f64,
    normalization: f64,
    quad: QuadratureConfig,
}

impl SpectralDensity {
    pub fn new(kind: SpectralKind, hurst: f64, beta: f64, quad: QuadratureConfig) -> Result<Self> {
        let normalization = normalization_constant_of(kind, hurst, beta, &quad)?;
        Ok(Self {
            kind,
            hurst,
            beta,
            normalization,
            quad,
        })
    }

    pub fn log_modulated(hurst: f64, beta: f64) -> Result<Self> {
        Self::new(SpectralKind::LogModulated, hurst, beta, QuadratureConfig::default())
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The constant `C` making `∫ q dx / 2π = 1`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    fn gamma(&self) -> f64 {
        2.0 - 2.0 * self.hurst
    }

    fn singular_factor(&self) -> SingularFactor {
        match self.kind {
            SpectralKind::LogModulated => SingularFactor {
                gamma: self.gamma(),
                scale: E * PI,
                power: 2.0 * self.beta,
            },
            SpectralKind::LogInverse => SingularFactor {
                gamma: self.gamma(),
                scale: 1.0,
                power: -2.0 * self.beta,
            },
        }
    }

    /// Points in `(0, π)` where the unnormalized density is not analytic.
    fn breakpoints(&self) -> &'static [f64] {
        match self.kind {
            SpectralKind::LogInverse if self.beta != 0.0 => &[1.0],
            _ => &[],
        }
    }

    /// Unnormalized density on `(0, π]`.
    fn shape(&self, x: f64) -> f64 {
        let power = x.powf(1.0 - 2.0 * self.hurst);
        match self.kind {
            SpectralKind::LogModulated => {
                if self.beta == 0.0 {
                    power
                } else {
                    power * (E * PI / x).ln().powf(2.0 * self.beta)
                }
            }
            SpectralKind::LogInverse => {
                if self.beta == 0.0 {
                    power
                } else {
                    power * x.ln().abs().powf(-2.0 * self.beta)
                }
            }
        }
    }

    /// `q(x)` for `0 < |x| ≤ π`.
    pub fn q_eval(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::domain("spectral density is singular at 0"));
        }
        if !(x.abs() <= PI) {
            return Err(Error::domain(format!("spectral density is defined on [-pi, pi], got {x}")));
        }
        Ok(self.normalization * self.shape(x.abs()))
    }

    /// End of the substitution region near zero for panels of width `h`.
    fn singular_cutoff(&self, h: f64) -> f64 {
        match self.breakpoints().first() {
            Some(&b) => h.min(0.5 * b),
            None => h.min(PI),
        }
    }

    /// `∫_0^π shape(x) cos(kx) dx` with panels of width `π / (k · panels_per_half_period)`.
    fn cosine_integral(&self, k: u64, quad: &QuadratureConfig) -> Result<f64> {
        let kf = k.max(1) as f64;
        let h = PI / (kf * quad.panels_per_half_period as f64);
        let x0 = self.singular_cutoff(h);
        let unit = quad.graded_unit_rule();
        let mut acc = CompensatedSum::new();
        for (x, w) in self.singular_factor().rule(x0, &unit) {
            acc.add(w * (k as f64 * x).cos());
        }
        let rule = GaussLegendre::new(quad.gauss_order);
        let mut edges = vec![x0];
        let mut j = 1u64;
        loop {
            let e = j as f64 * h;
            if e >= PI * (1.0 - 1e-14) {
                break;
            }
            if e > x0 {
                edges.push(e);
            }
            j += 1;
        }
        for &b in self.breakpoints() {
            if b > x0 {
                edges.push(b);
            }
        }
        edges.push(PI);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let breaks = self.breakpoints();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let touches = breaks.iter().any(|&p| p == a || p == b);
            if touches {
                let q = integrate_with_breaks(
                    |x| self.shape(x) * (k as f64 * x).cos(),
                    &[a, b],
                    Tolerance::new(1e-15, 1e-13).with_max_intervals(10_000),
                )?;
                acc.add(q.value);
            } else {
                for (x, wt) in rule.on(a, b) {
                    acc.add(wt * self.shape(x) * (k as f64 * x).cos());
                }
            }
        }
        Ok(acc.value())
    }

    /// `ρ(k) = (1/2π) ∫_{−π}^{π} q(x) cos(kx) dx` for a single lag.
    ///
    /// Evaluated with the configured rule and with the refined rule; the refined
    /// value is returned if both agree to `1e−9` relative (or `1e−13` absolute).
    pub fn rho_from_q(&self, k: u64) -> Result<f64> {
        let coarse = self.rho_with(k, &self.quad)?;
        let fine = self.rho_with(k, &self.quad.refined())?;
        let diff = (fine - coarse).abs();
        let wanted = (1e-9 * fine.abs()).max(1e-13);
        if diff > wanted {
            return Err(Error::Convergence {
                what: "spectral Fourier inversion",
                achieved: diff,
                wanted,
            });
        }
        Ok(fine)
    }

    /// Single-lag inversion with an explicit rule, without the refinement check.
    pub fn rho_with(&self, k: u64, quad: &QuadratureConfig) -> Result<f64> {
        quad.validate()?;
        Ok(self.normalization / PI * self.cosine_integral(k, quad)?)
    }

    /// `ρ(0), …, ρ(len − 1)` in one pass.
    ///
    /// Uses panels of width `π/M` with `M ≥ len`; the regular panels are summed for
    /// all lags at once with one FFT of length `2M` per Gauss node offset.
    pub fn rho_table(&self, len: usize) -> Result<Vec<f64>> {
        self.quad.validate()?;
        if len == 0 {
            return Ok(Vec::new());
        }
        let m = len.max(8);
        let h = PI / m as f64;
        let x0 = self.singular_cutoff(h);
        debug_assert!(x0 == h);
        let rule = GaussLegendre::new(self.quad.gauss_order);
        let unit_offsets = rule.unit();
        let special: Vec<usize> = self
            .breakpoints()
            .iter()
            .map(|&b| ((b / h).floor() as usize).min(m - 1))
            .collect();
        let fft_len = 2 * m;
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(fft_len);

        let regular: Vec<Vec<f64>> = unit_offsets
            .par_iter()
            .map(|&(t, w)| {
                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                for (j, slot) in buf.iter_mut().enumerate().take(m).skip(1) {
                    if special.contains(&j) {
                        continue;
                    }
                    let x = (j as f64 + t) * h;
                    *slot = Complex64::new(w * h * self.shape(x), 0.0);
                }
                fft.process(&mut buf);
                (0..len)
                    .map(|k| {
                        let phase = Complex64::from_polar(1.0, k as f64 * t * h);
                        (phase * buf[k]).re
                    })
                    .collect()
            })
            .collect();

        let singular = self.singular_factor().rule(x0, &self.quad.graded_unit_rule());
        let breaks = self.breakpoints();
        let out: Result<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|k| {
                let kf = k as f64;
                let mut acc = CompensatedSum::new();
                for &(x, w) in &singular {
                    acc.add(w * (kf * x).cos());
                }
                for offset in &regular {
                    acc.add(offset[k]);
                }
                for &j in &special {
                    let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
                    let mut pts = vec![a];
                    pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
                    pts.push(b);
                    let q = integrate_with_breaks(
                        |x| self.shape(x) * (kf * x).cos(),
                        &pts,
                        Tolerance::new(1e-15, 1e-13).with_max_intervals(10_000),
                    )?;
                    acc.add(q.value);
                }
                Ok(self.normalization / PI * acc.value())
            })
            .collect();
        out
    }

    /// Asymptotic constants for this density's Hurst parameter.
    pub fn asymptotic_constants(&self) -> Result<AsymptoticConstants> {
        AsymptoticConstants::compute(self.hurst, &self.quad)
    }

    /// Leading-order prediction `C · K · log^{2β}(k) · k^{2H−2}` with the numerically
    /// evaluated cosine integral `K`.
    pub fn rho_asymptotic(&self, consts: &AsymptoticConstants, k: u64) -> f64 {
        let kf = k as f64;
        self.normalization * consts.numeric_k_h * log_power(kf, 2.0 * self.beta) * kf.powf(2.0 * self.hurst - 2.0)
    }

    /// Prediction that keeps every power of `log k` from expanding
    /// `log^{2β}(eπk/y) = (log k + log(eπ/y))^{2β}` under the cosine integral.
    /// Available for integer `2β`.
    pub fn rho_asymptotic_refined(&self, k: u64) -> Result<f64> {
        let order = 2.0 * self.beta;
        if self.kind != SpectralKind::LogModulated || order.fract() != 0.0 || order < 0.0 {
            return Err(Error::domain("refined asymptotics need the log-modulated kind with integer 2*beta"));
        }
        let order = order as u32;
        let gamma_exp = self.gamma();
        let logk = (k as f64).ln();
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=order {
            let kj = cosine_log_moment(gamma_exp, j, E * PI, self.quad.oscillatory_tolerance)?;
            acc += binom * logk.powi((order - j) as i32) * kj;
            binom *= (order - j) as f64 / (j + 1) as f64;
        }
        Ok(self.normalization * acc * (k as f64).powf(-gamma_exp))
    }

    /// `C² K'_H n^{4H−2} log^{4β}(n)` with the closed-form constant `K'_H`.
    pub fn nvn_asymptotic(&self, consts: &AsymptoticConstants, n: u64) -> Result<f64> {
        let kp = consts.k_h_prime.ok_or_else(|| {
            Error::Regime(format!("variance asymptotics need H > 3/4, got {}", self.hurst))
        })?;
        Ok(self.nvn_shape(n) * kp)
    }

    /// Same shape with `K'_eff = 4 K_num² / ((4H−2)(4H−3))`, the constant that matches
    /// `n v_n = (2/n)·n Σ_{k,ℓ<n} ρ(k−ℓ)²` to leading order.
    pub fn nvn_asymptotic_effective(&self, consts: &AsymptoticConstants, n: u64) -> Result<f64> {
        let kp = consts.k_h_prime_effective.ok_or_else(|| {
            Error::Regime(format!("variance asymptotics need H > 3/4, got {}", self.hurst))
        })?;
        Ok(self.nvn_shape(n) * kp)
    }

    fn nvn_shape(&self, n: u64) -> f64 {
        let nf = n as f64;
        self.normalization.powi(2) * nf.powf(4.0 * self.hurst - 2.0) * log_power(nf, 4.0 * self.beta)
    }
}

fn log_power(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.ln().powf(p)
    }
}

fn check_parameters(kind: SpectralKind, hurst: f64, beta: f64) -> Result<()> {
    crate::covariance::check_hurst(hurst)?;
    match kind {
        SpectralKind::LogModulated if !(beta >= 0.0 && beta.is_finite()) => {
            Err(Error::domain(format!("log-modulated density needs beta >= 0, got {beta}")))
        }
        SpectralKind::LogInverse if !(beta <= 0.0 && beta.is_finite()) => {
            Err(Error::domain(format!("log-inverse density needs beta <= 0, got {beta}")))
        }
        _ => Ok(()),
    }
}

/// `∫_0^π shape(x) dx` with the given rule.
fn half_mass(kind: SpectralKind, hurst: f64, beta: f64, quad: &QuadratureConfig) -> Result<f64> {
    let probe = SpectralDensity {
        kind,
        hurst,
        beta,
        normalization: 1.0,
        quad: *quad,
    };
    probe.cosine_integral(0, &QuadratureConfig {
        panels_per_half_period: 1,
        ..*quad
    })
}

fn normalization_constant_of(kind: SpectralKind, hurst: f64, beta: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_parameters(kind, hurst, beta)?;
    quad.validate()?;
    let coarse = half_mass(kind, hurst, beta, quad)?;
    let fine = half_mass(kind, hurst, beta, &quad.refined())?;
    let rel = ((fine - coarse) / fine).abs();
    if !(rel <= 1e-10) {
        return Err(Error::Convergence {
            what: "spectral normalization",
            achieved: rel,
            wanted: 1e-10,
        });
    }
    // 2π / ∫_{−π}^{π}
    Ok(PI / fine)
}

/// `2π / ∫_{−π}^{π} |x|^{1−2H} log^{2β}(eπ/|x|) dx`.
pub fn normalization_constant(hurst: f64, beta: f64, quad: &QuadratureConfig) -> Result<f64> {
    normalization_constant_of(SpectralKind::LogModulated, hurst, beta, quad)
}

/// `(1/π) ∫_0^∞ x^{γ−1} cos(x) log^j(A/x) dx` for `0 < γ < 1`, summed half period by
/// half period with Euler acceleration.
pub fn cosine_log_moment(gamma_exp: f64, j: u32, scale: f64, tol: f64) -> Result<f64> {
    if !(gamma_exp > 0.0 && gamma_exp < 1.0) {
        return Err(Error::domain(format!("cosine integral needs exponent in (0, 1), got {gamma_exp}")));
    }
    let quad = QuadratureConfig::default();
    let unit = quad.graded_unit_rule();
    let x0 = 0.5 * PI;
    let log_factor = |x: f64| if j == 0 { 1.0 } else { (scale / x).ln().powi(j as i32) };
    let first: f64 = if scale > x0 {
        SingularFactor {
            gamma: gamma_exp,
            scale,
            power: j as f64,
        }
        .rule(x0, &unit)
        .into_iter()
        .map(|(x, w)| w * x.cos())
        .sum::<CompensatedSum>()
        .value()
    } else {
        // log(A/x) changes sign inside the first piece; integer powers stay analytic.
        SingularFactor {
            gamma: gamma_exp,
            scale: 1.0,
            power: 0.0,
        }
        .rule(x0, &unit)
        .into_iter()
        .map(|(x, w)| w * x.cos() * log_factor(x))
        .sum::<CompensatedSum>()
        .value()
    };
    let rule = GaussLegendre::new(24);
    let term = |m: usize| {
        if m == 0 {
            return first;
        }
        let a = x0 + (m - 1) as f64 * PI;
        rule.integrate(a, a + PI, |x| x.powf(gamma_exp - 1.0) * x.cos() * log_factor(x))
    };
    let s = sum_alternating(term, 6, tol, 4000)?;
    Ok(s.value / PI)
}

/// Constants of the power-law asymptotics of `ρ` and of `n v_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub hurst: f64,
    /// Closed form `2Γ(2−2H) cos(π(1−H))`.
    pub k_h: f64,
    /// `k_h² / ((4H−2)(4H−3))`; defined for `H > 3/4`.
    pub k_h_prime: Option<f64>,
    /// `(1/π) ∫_0^∞ x^{1−2H} cos x dx`, evaluated numerically.
    pub numeric_k_h: f64,
    /// `numeric_k_h / k_h`.
    pub ratio: f64,
    /// `4 numeric_k_h² / ((4H−2)(4H−3))`; defined for `H > 3/4`.
    pub k_h_prime_effective: Option<f64>,
}

impl AsymptoticConstants {
    pub fn compute(hurst: f64, quad: &QuadratureConfig) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::domain(format!(
                "cosine-integral constants need H in (1/2, 1), got {hurst}"
            )));
        }
        let gamma_exp = 2.0 - 2.0 * hurst;
        let k_h = 2.0 * gamma(gamma_exp) * (PI * (1.0 - hurst)).cos();
        let numeric_k_h = cosine_log_moment(gamma_exp, 0, 1.0, quad.oscillatory_tolerance)?;
        let denom = (4.0 * hurst - 2.0) * (4.0 * hurst - 3.0);
        let (k_h_prime, k_h_prime_effective) = if hurst > 0.75 {
            (Some(k_h * k_h / denom), Some(4.0 * numeric_k_h * numeric_k_h / denom))
        } else {
            (None, None)
        };
        Ok(Self {
            hurst,
            k_h,
            k_h_prime,
            numeric_k_h,
            ratio: numeric_k_h / k_h,
            k_h_prime_effective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::function::gamma::gamma_ur;

    /// Closed form of `∫_0^π x^{γ−1} log^{2β}(eπ/x) dx = π^γ γ^{−2β−1} e^γ Γ(2β+1, γ)`.
    fn half_mass_closed_form(hurst: f64, beta: f64) -> f64 {
        let g = 2.0 - 2.0 * hurst;
        let a = 2.0 * beta + 1.0;
        PI.powf(g) * g.powf(-a) * g.exp() * gamma_ur(a, g) * gamma(a)
    }

    #[test]
    fn normalization_matches_closed_forms() {
        let c = normalization_constant(0.75, 0.0, &QuadratureConfig::default()).unwrap();
        assert!((c - 0.5 * PI.sqrt()).abs() < 1e-13, "{c}");
        for (h, b) in [(0.8, 1.0), (0.6, 0.5), (0.9, 2.0), (0.3, 0.25), (0.99, 1.5)] {
            let c = normalization_constant(h, b, &QuadratureConfig::default()).unwrap();
            let exact = PI / half_mass_closed_form(h, b);
            assert!(((c - exact) / exact).abs() < 1e-11, "H={h} beta={b}: {c} vs {exact}");
        }
    }

    #[test]
    fn normalization_by_stratified_monte_carlo() {
        // ∫_{−π}^{π} q / 2π via x = π u^{1/γ}, one uniform draw per stratum of u.
        let (h, b) = (0.8, 1.0);
        let sd = SpectralDensity::log_modulated(h, b).unwrap();
        let g = 2.0 - 2.0 * h;
        let strata = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = 0.0;
        for i in 0..strata {
            let u = (i as f64 + rng.random::<f64>()) / strata as f64;
            let x = PI * u.powf(1.0 / g);
            // dx = (π/γ) u^{1/γ − 1} du
            acc += sd.q_eval(x).unwrap() * PI / g * u.powf(1.0 / g - 1.0);
        }
        let integral = 2.0 * acc / strata as f64 / (2.0 * PI);
        assert!((integral - 1.0).abs() < 1e-4, "{integral}");
    }

    #[test]
    fn q_eval_examples() {
        let sd = SpectralDensity::log_modulated(0.8, 0.0).unwrap();
        let c = PI / half_mass_closed_form(0.8, 0.0);
        assert!((sd.q_eval(PI).unwrap() - c * PI.powf(-0.6)).abs() < 1e-12);
        let sd1 = SpectralDensity::log_modulated(0.8, 1.0).unwrap();
        assert!((sd1.q_eval(PI).unwrap() - sd1.normalization() * PI.powf(-0.6)).abs() < 1e-14);
        for x in [1e-8, 0.3, 2.0, PI] {
            assert_eq!(sd1.q_eval(x).unwrap(), sd1.q_eval(-x).unwrap());
            assert!(sd1.q_eval(x).unwrap() > 0.0);
        }
        assert!(matches!(sd1.q_eval(0.0), Err(Error::Domain(_))));
        assert!(sd1.q_eval(3.5).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralDensity::log_modulated(0.8, -0.1).is_err());
        assert!(SpectralDensity::log_modulated(1.0, 0.0).is_err());
        assert!(SpectralDensity::new(SpectralKind::LogInverse, 0.8, 0.5, QuadratureConfig::default()).is_err());
    }

    /// Trapezoid rule for `(1/π)∫_0^π q cos(kx)` after `x = π v^{m/γ}`, which makes
    /// the integrand vanish smoothly at `v = 0`.
    fn trapezoid_rho(sd: &SpectralDensity, k: f64, nodes: usize) -> f64 {
        let g = 2.0 - 2.0 * sd.hurst();
        let m = 4.0;
        let p = m / g;
        let step = 1.0 / nodes as f64;
        let f = |v: f64| {
            if v == 0.0 {
                return 0.0;
            }
            let x = PI * v.powf(p);
            sd.q_eval(x).unwrap() * (k * x).cos() * PI * p * v.powf(p - 1.0)
        };
        let mut acc = CompensatedSum::new();
        acc.add(0.5 * f(0.0) + 0.5 * f(1.0));
        for i in 1..nodes {
            acc.add(f(i as f64 * step));
        }
        acc.value() * step / PI
    }

    #[test]
    fn rho_matches_dense_trapezoid() {
        let sd = SpectralDensity::log_modulated(0.8, 1.0).unwrap();
        let oracle = trapezoid_rho(&sd, 1.0, 10_000_000);
        let got = sd.rho_from_q(1).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
        assert!((sd.rho_from_q(0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn batch_table_matches_single_lag() {
        for (h, b) in [(0.8, 1.0), (0.85, 0.0), (0.6, 0.5)] {
            let sd = SpectralDensity::log_modulated(h, b).unwrap();
            let table = sd.rho_table(1500).unwrap();
            for k in [0usize, 1, 2, 7, 100, 999, 1499] {
                let single = sd.rho_from_q(k as u64).unwrap();
                assert!(
                    (table[k] - single).abs() < 1e-11 + 1e-9 * single.abs(),
                    "H={h} beta={b} k={k}: {} vs {single}",
                    table[k]
                );
            }
        }
    }

    #[test]
    fn doubling_panels_is_stable() {
        let sd = SpectralDensity::log_modulated(0.85, 1.0).unwrap();
        let base = QuadratureConfig::default();
        for k in [1u64, 10, 333, 10_000] {
            let a = sd.rho_with(k, &base).unwrap();
            let b = sd.rho_with(k, &base.refined()).unwrap();
            assert!(((a - b) / b).abs() < 1e-9, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn numeric_constant_is_mellin_integral() {
        for h in [0.8, 0.85, 0.9] {
            let c = AsymptoticConstants::compute(h, &QuadratureConfig::default()).unwrap();
            let g = 2.0 - 2.0 * h;
            let mellin = gamma(g) * (PI * g / 2.0).cos() / PI;
            assert!(c.numeric_k_h > 0.0);
            assert!((c.numeric_k_h - mellin).abs() < 1e-10, "H={h}: {} vs {mellin}", c.numeric_k_h);
            assert!((c.ratio - 1.0 / (2.0 * PI)).abs() < 1e-9, "H={h}: ratio {}", c.ratio);
            let kp = c.k_h_prime.unwrap();
            let expect = (2.0 * gamma(g) * (PI * (1.0 - h)).cos()).powi(2) / ((4.0 * h - 2.0) * (4.0 * h - 3.0));
            assert_eq!(kp, expect);
            assert!((c.k_h_prime_effective.unwrap() - kp / (PI * PI)).abs() < 1e-9 * kp);
        }
        assert!(AsymptoticConstants::compute(0.7, &QuadratureConfig::default()).unwrap().k_h_prime.is_none());
    }

    #[test]
    fn first_log_moment_matches_digamma_formula() {
        // d/ds [Γ(s) cos(πs/2)] = Γ(s) cos(πs/2) (ψ(s) − (π/2) tan(πs/2)), and
        // ∫ x^{s−1} cos(x) log(A/x) = log(A) M(s) − M'(s).
        let g: f64 = 0.3;
        let m0 = gamma(g) * (PI * g / 2.0).cos();
        let psi = statrs::function::gamma::digamma(g);
        let dm = m0 * (psi - PI / 2.0 * (PI * g / 2.0).tan());
        let scale = E * PI;
        let exact = (scale.ln() * m0 - dm) / PI;
        let got = cosine_log_moment(g, 1, scale, 1e-13).unwrap();
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn power_law_asymptotics_for_beta_zero() {
        let sd = SpectralDensity::log_modulated(0.8, 0.0).unwrap();
        let consts = sd.asymptotic_constants().unwrap();
        let r3 = sd.rho_from_q(1000).unwrap() / sd.rho_asymptotic(&consts, 1000);
        let r4 = sd.rho_from_q(10_000).unwrap() / sd.rho_asymptotic(&consts, 10_000);
        assert!((0.95..=1.05).contains(&r4), "{r4}");
        assert!((r4 - 1.0).abs() < (r3 - 1.0).abs());
    }

    #[test]
    fn refined_asymptotics_track_quadrature() {
        let sd = SpectralDensity::log_modulated(0.85, 1.0).unwrap();
        for k in [1000u64, 10_000] {
            let r = sd.rho_from_q(k).unwrap() / sd.rho_asymptotic_refined(k).unwrap();
            assert!((r - 1.0).abs() < 0.01, "k={k}: {r}");
        }
    }

    #[test]
    fn nvn_regime_error() {
        let sd = SpectralDensity::log_modulated(0.74, 0.0).unwrap();
        let consts = sd.asymptotic_constants().unwrap();
        assert!(matches!(sd.nvn_asymptotic(&consts, 1024), Err(Error::Regime(_))));
    }

    #[test]
    fn log_inverse_kind() {
        let sd = SpectralDensity::new(SpectralKind::LogInverse, 0.8, -0.5, QuadratureConfig::default()).unwrap();
        // ∫_0^π x^{γ−1}|log x| dx split at 1: ∫_0^1 = 1/γ², ∫_1^π = π^γ(γ log π − 1)/γ² + 1/γ².
        let g: f64 = 0.4;
        let mass = 1.0 / (g * g) + PI.powf(g) * (g * PI.ln() - 1.0) / (g * g) + 1.0 / (g * g);
        assert!(((sd.normalization() - PI / mass) / (PI / mass)).abs() < 1e-10);
        let table = sd.rho_table(64).unwrap();
        assert!((table[0] - 1.0).abs() < 1e-10);
        for k in [1usize, 5, 40] {
            let single = sd.rho_from_q(k as u64).unwrap();
            assert!((table[k] - single).abs() < 1e-10, "k={k}: {} vs {single}", table[k]);
        }
        assert_eq!(sd.q_eval(1.0).unwrap(), 0.0);
    }
}
