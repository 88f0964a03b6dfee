//! Three-term `L²` bound between `F_n` and its second-chaos limit for the
//! log-modulated spectral class, and the resulting total-variation rate.
//!
//! With `c = 2H − 1`, `h(x) = min(1, 1/|x|)` and `A = π n^α`:
//!
//! - `T1 = 5 ∬_{R² \ [−A,A]²} |f|² h²(x+y)`
//! - `T2 = 16 ∬_{[−πn,πn]²} |f_n − f|² h²(x+y)`
//! - `T3 = 4 n^{2α−2} ∬_{R²} |f|² h²(x+y)`
//!
//! where `f = |xy|^{−c/2} / sqrt(K'_eff)` and
//! `f_n = sqrt(q(x/n) q(y/n) / (n v_n))`. Every integrand is even in each
//! variable, so integrals over the plane are folded onto the quarter plane:
//! `∬ φ(|x|,|y|) h²(x+y) = 2 ∬_{x,y>0} φ (h²(x+y) + h²(x−y))`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::Serialize;
use statrs::function::beta::beta;

use crate::covariance::CovarianceModel;
use crate::cumulants::CumulantEngine;
use crate::error::{Error, Result};
use crate::numeric::{integrate, linear_fit, Tolerance};
use crate::simulate::increment_transform;
use crate::spectral::{AsymptoticConstants, QuadratureConfig, SpectralDensity};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvBoundConfig {
    pub hurst: f64,
    pub beta: f64,
    /// Split exponent `α ∈ (0, 1)`.
    pub alpha: f64,
    /// Constant of the `L²`-to-total-variation inequality; unknown, default 1.
    pub c_finf: f64,
    /// Relative tolerance of each one-dimensional quadrature.
    pub rel_tolerance: f64,
    pub quad: QuadratureConfig,
}

impl TvBoundConfig {
    pub fn new(hurst: f64, beta: f64) -> Self {
        Self {
            hurst,
            beta,
            alpha: 0.5,
            c_finf: 1.0,
            rel_tolerance: 1e-10,
            quad: QuadratureConfig::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.75 && self.hurst < 1.0) {
            return Err(Error::domain(format!("TV bound needs H in (3/4, 1), got {}", self.hurst)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(format!("TV bound needs beta >= 0, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.c_finf > 0.0 && self.c_finf.is_finite()) {
            return Err(Error::domain("c_finf must be positive"));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1e-3) {
            return Err(Error::domain("quadrature tolerance must lie in (0, 1e-3)"));
        }
        self.quad.validate()
    }

    /// `γ = 2 − 2H`.
    pub fn gamma_exp(&self) -> f64 {
        2.0 - 2.0 * self.hurst
    }

    /// Exponent of `T1 ≍ n^{−α(1−2γ)}`.
    pub fn t1_exponent(&self) -> f64 {
        -self.alpha * (1.0 - 2.0 * self.gamma_exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvTerms {
    pub n: usize,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl TvTerms {
    pub const CSV_HEADER: &'static str = "n,T1,T2,T3,bound,bound_sqrt_log_n";

    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3
    }

    /// `c (T1 + T2 + T3)^{1/4}`, a bound on `d_TV(F_n, F_∞)` up to the constant `c`.
    pub fn bound(&self, c_finf: f64) -> f64 {
        c_finf * self.total().powf(0.25)
    }

    pub fn csv_row(&self, c_finf: f64) -> String {
        let b = self.bound(c_finf);
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.n,
            self.t1,
            self.t2,
            self.t3,
            b,
            b * (self.n as f64).ln().sqrt()
        )
    }
}

/// `∬_{R²} |xy|^{−c} h²(x+y) dx dy` in closed form.
pub fn weighted_kernel_mass(hurst: f64) -> f64 {
    let c = 2.0 * hurst - 1.0;
    // ∫ |u|^{−c} |1−u|^{−c} du over R, then ∫ h²(s)|s|^{1−2c} ds.
    let convolution = beta(1.0 - c, 1.0 - c) + 2.0 * beta(2.0 * c - 1.0, 1.0 - c);
    let radial = 2.0 * (1.0 / (2.0 - 2.0 * c) + 1.0 / (2.0 * c));
    convolution * radial
}

fn h2(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else {
        1.0 / (a * a)
    }
}

/// `h²(x+y) + h²(x−y)` for `x, y ≥ 0`.
fn folded_weight(x: f64, y: f64) -> f64 {
    h2(x + y) + h2(x - y)
}

/// Integrates `f` over `[lo, hi]` (`hi` may be infinite) split at `breaks`.
///
/// A leading segment starting at 0 is mapped by `y = b u^{1/(1−sing)}` to remove
/// a `y^{−sing}` singularity; an infinite last segment is mapped so that a
/// `y^{−decay}` tail becomes bounded; long finite segments are integrated in `log y`.
struct HalfLine {
    sing: f64,
    decay: f64,
    tol: Tolerance,
}

impl HalfLine {
    fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
        let mut points = vec![lo];
        let finite_hi = if hi.is_finite() { hi } else { f64::INFINITY };
        let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < finite_hi).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        points.extend(inner);
        if hi.is_finite() {
            points.push(hi);
        } else if points.len() == 1 {
            points.push(lo.max(1.0));
        }
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            total += if a == 0.0 {
                let p = 1.0 / (1.0 - self.sing);
                integrate(|u| f(b * u.powf(p)) * b * p * u.powf(p - 1.0), 0.0, 1.0, self.tol)?.value
            } else if b / a > 2.0 {
                integrate(
                    |t| {
                        let y = t.exp();
                        f(y) * y
                    },
                    a.ln(),
                    b.ln(),
                    self.tol,
                )?
                .value
            } else {
                integrate(&f, a, b, self.tol)?.value
            };
        }
        if !hi.is_finite() {
            let a = *points.last().expect("nonempty");
            let e = 1.0 / (self.decay - 1.0);
            total += integrate(|u| f(a * u.powf(-e)) * a * e * u.powf(-e - 1.0), 0.0, 1.0, self.tol)?.value;
        }
        Ok(total)
    }
}

/// Kink locations in `y` of `h²(x+y) + h²(x−y)` for fixed `x ≥ 0`.
fn kinks(x: f64) -> [f64; 3] {
    [(1.0 - x).abs(), x, x + 1.0]
}

/// Evaluates the bound terms for one configuration; holds the covariance table
/// needed for `n v_n` up to `max_n`.
#[derive(Debug, Clone)]
pub struct TvBoundEvaluator {
    cfg: TvBoundConfig,
    density: SpectralDensity,
    consts: AsymptoticConstants,
    engine: CumulantEngine,
}

impl TvBoundEvaluator {
    pub fn new(cfg: TvBoundConfig, max_n: usize) -> Result<Self> {
        cfg.validate()?;
        if max_n < 8 {
            return Err(Error::domain(format!("TV bound needs n >= 8, got {max_n}")));
        }
        let density = SpectralDensity::new(crate::spectral::SpectralKind::LogModulated, cfg.hurst, cfg.beta, cfg.quad)?;
        let consts = AsymptoticConstants::compute(cfg.hurst, &cfg.quad)?;
        let model = CovarianceModel::from_spectral(&density, max_n)?;
        let engine = CumulantEngine::new(&model, max_n);
        Ok(Self {
            cfg,
            density,
            consts,
            engine,
        })
    }

    pub fn config(&self) -> &TvBoundConfig {
        &self.cfg
    }

    fn k_eff(&self) -> f64 {
        self.consts
            .k_h_prime_effective
            .expect("H > 3/4 was validated")
    }

    fn half_line(&self, sing: f64, decay: f64) -> HalfLine {
        HalfLine {
            sing,
            decay,
            tol: Tolerance::new(1e-16, self.cfg.rel_tolerance).with_max_intervals(2000),
        }
    }

    /// `∫_{lo}^{hi} φ(x,y) (h²(x+y) + h²(x−y)) dy` for `x ≥ 0`.
    ///
    /// Away from the origin the band `|y − x| ≤ 1` and its neighbourhood are
    /// parametrized by `d = y − x`, so the kinks stay resolvable for any `x`.
    fn inner<P: Fn(f64, f64) -> f64>(&self, phi: &P, x: f64, lo: f64, hi: f64) -> Result<f64> {
        let c = 2.0 * self.cfg.hurst - 1.0;
        let rule = self.half_line(c, 2.0 + c);
        if x <= 2.0 {
            return rule.integrate(|y| phi(x, y) * folded_weight(x, y), lo, hi, &kinks(x));
        }
        let mut total = 0.0;
        // y < x − 1: y itself near the axis, d = x − y near the band.
        let left_hi = (x - 1.0).min(hi);
        let split = 0.5 * x;
        if lo < split.min(left_hi) {
            total += rule.integrate(
                |y| phi(x, y) * ((x + y).powi(-2) + (x - y).powi(-2)),
                lo,
                split.min(left_hi),
                &[],
            )?;
        }
        let d_max = x - lo.max(split);
        let d_min = (x - hi).max(1.0);
        if d_max > d_min {
            total += rule.integrate(
                |d| phi(x, x - d) * ((2.0 * x - d).powi(-2) + d.powi(-2)),
                d_min,
                d_max,
                &[],
            )?;
        }
        let (s_lo, s_hi) = ((lo - x).max(-1.0), (hi - x).min(1.0));
        if s_hi > s_lo {
            total += integrate(
                |s| phi(x, x + s) * ((2.0 * x + s).powi(-2) + 1.0),
                s_lo,
                s_hi,
                rule.tol,
            )?
            .value;
        }
        let (d_lo, d_hi) = ((lo - x).max(1.0), hi - x);
        if d_hi > d_lo {
            total += rule.integrate(|d| phi(x, x + d) * ((2.0 * x + d).powi(-2) + d.powi(-2)), d_lo, d_hi, &[x])?;
        }
        Ok(total)
    }

    /// `∫_{x_lo}^{x_hi} ∫_{y_lo}^{y_hi} φ (h²(x+y) + h²(x−y)) dy dx` over part of
    /// the quarter plane, for `φ` behaving like `(xy)^{−c}`.
    fn quarter<P: Fn(f64, f64) -> f64>(&self, phi: P, x: (f64, f64), y: (f64, f64)) -> Result<f64> {
        let c = 2.0 * self.cfg.hurst - 1.0;
        let rule = self.half_line(c, 2.0 * c);
        let failure = RefCell::new(None);
        let outer = |t: f64| match self.inner(&phi, t, y.0, y.1) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let breaks = [1.0, 2.0, y.0 - 1.0, y.0 + 1.0, y.1 - 1.0, y.1 + 1.0];
        let value = rule.integrate(outer, x.0, x.1, &breaks)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(value)
    }

    /// `∬ φ(|x|,|y|) h²(x+y)` over `[−L,L]²` (`L` may be infinite).
    fn folded_square<P: Fn(f64, f64) -> f64>(&self, phi: P, side: f64) -> Result<f64> {
        Ok(2.0 * self.quarter(phi, (0.0, side), (0.0, side))?)
    }

    /// `∬_{R² \ [−A,A]²} |xy|^{−c} h²(x+y)`, integrated over the complement directly.
    fn outer_mass(&self, side: f64) -> Result<f64> {
        let c = 2.0 * self.cfg.hurst - 1.0;
        let w = |x: f64, y: f64| (x * y).powf(-c);
        // Q \ [0,A]² = {x > A} ∪ {y > A}; by symmetry 2·{x > A, y > 0} − {x > A, y > A}.
        let strip = self.quarter(w, (side, f64::INFINITY), (0.0, f64::INFINITY))?;
        let corner = self.quarter(w, (side, f64::INFINITY), (side, f64::INFINITY))?;
        Ok(2.0 * (2.0 * strip - corner))
    }

    /// `n v_n` from the exact covariance table.
    pub fn nvn(&self, n: usize) -> f64 {
        n as f64 * self.engine.variance_vn(n)
    }

    pub fn t1(&self, n: usize) -> Result<f64> {
        let side = PI * (n as f64).powf(self.cfg.alpha);
        Ok(5.0 * self.outer_mass(side)? / self.k_eff())
    }

    pub fn t2(&self, n: usize) -> Result<f64> {
        let c = 2.0 * self.cfg.hurst - 1.0;
        let nf = n as f64;
        let a_n = self.density.normalization() * nf.powf(c) / self.nvn(n).sqrt();
        let b = 1.0 / self.k_eff().sqrt();
        let beta = self.cfg.beta;
        let ell = |x: f64| (std::f64::consts::E * PI * nf / x).ln().powf(beta);
        let phi = |x: f64, y: f64| {
            let d = a_n * ell(x) * ell(y) - b;
            (x * y).powf(-c) * d * d
        };
        Ok(16.0 * self.folded_square(phi, PI * nf)?)
    }

    pub fn t3(&self, n: usize) -> f64 {
        let mass = weighted_kernel_mass(self.cfg.hurst) / self.k_eff();
        4.0 * (n as f64).powf(2.0 * self.cfg.alpha - 2.0) * mass
    }

    pub fn terms(&self, n: usize) -> Result<TvTerms> {
        if n < 8 {
            return Err(Error::domain(format!("TV bound needs n >= 8, got {n}")));
        }
        if n > self.engine.max_n() {
            return Err(Error::domain(format!(
                "n = {n} exceeds the prepared covariance table ({})",
                self.engine.max_n()
            )));
        }
        Ok(TvTerms {
            n,
            t1: self.t1(n)?,
            t2: self.t2(n)?,
            t3: self.t3(n),
        })
    }

    pub fn scan(&self, ns: &[usize]) -> Result<Vec<TvTerms>> {
        ns.iter().map(|&n| self.terms(n)).collect()
    }

    /// Quarter-plane folding of `∬_{[−L,L]²} |xy|^{−c} h²(x+y)`; exposed for checks.
    pub fn kernel_mass_on_square(&self, side: f64) -> Result<f64> {
        let c = 2.0 * self.cfg.hurst - 1.0;
        self.folded_square(|x, y| (x * y).powf(-c), side)
    }
}

pub fn cor2chaos_terms(cfg: &TvBoundConfig, n: usize) -> Result<TvTerms> {
    TvBoundEvaluator::new(cfg.clone(), n.max(8))?.terms(n)
}

pub fn tnns_bound(cfg: &TvBoundConfig, n: usize) -> Result<f64> {
    Ok(cor2chaos_terms(cfg, n)?.bound(cfg.c_finf))
}

/// `(1/n)(e^{iz} − 1)/(e^{iz/n} − 1)`, the finite-`n` counterpart of
/// `(e^{iz} − 1)/(iz)`; equals 1 at `z = 0`.
pub fn finite_increment_transform(n: f64, z: f64) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    // e^{iw} − 1 = −2 sin²(w/2) + i sin w, free of cancellation for small w.
    let em1 = |w: f64| Complex64::new(-2.0 * (0.5 * w).sin().powi(2), w.sin());
    em1(z) / (n * em1(z / n))
}

/// Both sides of `|g_n(s) − g(s)| ≤ 2 h(s) / (1 + n/|s|)` at `s = x + y`.
pub fn gn_minus_g(n: f64, x: f64, y: f64) -> (f64, f64) {
    let s = x + y;
    let (gr, gi) = increment_transform(s);
    let lhs = (finite_increment_transform(n, s) - Complex64::new(gr, gi)).norm();
    let rhs = if s == 0.0 {
        0.0
    } else {
        2.0 * h2(s).sqrt() / (1.0 + n / s.abs())
    };
    (lhs, rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `C n^a`
    Power,
    /// `C log^b n`
    LogPower,
    /// `C (log log n)^b`
    LogLog,
}

impl std::str::FromStr for DecayModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "log_power" | "log-power" => Ok(Self::LogPower),
            "loglog" | "log_log" => Ok(Self::LogLog),
            other => Err(Error::Parse(format!("unknown decay model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub exponent: f64,
    /// `log C`
    pub log_constant: f64,
    pub rms_residual: f64,
}

pub fn decay_fit(series: &[(f64, f64)], model: DecayModel) -> Result<DecayFit> {
    if series.len() < 6 {
        return Err(Error::Fit(format!("decay fit needs at least 6 points, got {}", series.len())));
    }
    let mut xs = Vec::with_capacity(series.len());
    let mut ys = Vec::with_capacity(series.len());
    for &(n, v) in series {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Fit(format!("decay fit needs positive values, got {v} at n = {n}")));
        }
        let x = match model {
            DecayModel::Power => n.ln(),
            DecayModel::LogPower => n.ln().ln(),
            DecayModel::LogLog => n.ln().ln().ln(),
        };
        if !x.is_finite() {
            return Err(Error::Fit(format!("n = {n} is too small for the {model:?} model")));
        }
        xs.push(x);
        ys.push(v.ln());
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayFit {
        model,
        exponent: fit.slope,
        log_constant: fit.intercept,
        rms_residual: fit.rms_residual,
    })
}
