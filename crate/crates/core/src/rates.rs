//! Rates of normal convergence for quadratic variations of log-modulated
//! power-law covariances `|ρ(k)| ~ k^{2H−2} log^{2β} k`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Serialize;

use crate::covariance::CovarianceModel;
use crate::cumulants::CumulantEngine;
use crate::error::{Error, Result};
use crate::numeric::{integrate, linear_fit, CompensatedSum, LinearFit, Tolerance};

/// A real parameter that remembers whether it was given exactly.
///
/// Boundary comparisons (`H = 2/3`, `β = −1/4`, …) are exact for rationals and
/// use plain `f64` comparison against the rounded threshold otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Rational(Ratio<i64>),
    Real(f64),
}

impl Exponent {
    pub fn rational(numer: i64, denom: i64) -> Self {
        Exponent::Rational(Ratio::new(numer, denom))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Exponent::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::Real(x) => x,
        }
    }

    /// Compares against `numer/denom`.
    pub fn cmp_ratio(&self, numer: i64, denom: i64) -> Ordering {
        match *self {
            Exponent::Rational(r) => r.cmp(&Ratio::new(numer, denom)),
            Exponent::Real(x) => x.total_cmp(&(numer as f64 / denom as f64)),
        }
    }
}

impl From<f64> for Exponent {
    fn from(x: f64) -> Self {
        Exponent::Real(x)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Rational(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Exponent::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Exponent::Real(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    /// Accepts `p/q`, plain decimals (kept exact) and any other float syntax.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a number: {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            return Ok(Exponent::Rational(Ratio::new(p, q)));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits_ok = !body.is_empty()
            && (int.len() + frac.len()) <= 15
            && int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
            && !(int.is_empty() && frac.is_empty());
        if digits_ok {
            let mut numer: i64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
            if neg {
                numer = -numer;
            }
            return Ok(Exponent::Rational(Ratio::new(numer, 10i64.pow(frac.len() as u32))));
        }
        s.parse::<f64>().map(Exponent::Real).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeCase {
    SubCritical,
    LogLogCritical,
    LogCritical,
    PowerLog,
    H34LogLog,
    H34Log,
    NonNormal,
}

impl RegimeCase {
    pub fn id(&self) -> &'static str {
        match self {
            RegimeCase::SubCritical => "SubCritical",
            RegimeCase::LogLogCritical => "LogLogCritical",
            RegimeCase::LogCritical => "LogCritical",
            RegimeCase::PowerLog => "PowerLog",
            RegimeCase::H34LogLog => "H34LogLog",
            RegimeCase::H34Log => "H34Log",
            RegimeCase::NonNormal => "NonNormal",
        }
    }
}

/// `M_n = n^a · log(n)^b · log(log(n))^c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFormula {
    pub n_exponent: f64,
    pub log_exponent: f64,
    pub loglog_exponent: f64,
}

impl RateFormula {
    pub fn eval(&self, n: f64) -> f64 {
        let mut m = n.powf(self.n_exponent);
        if self.log_exponent != 0.0 {
            m *= n.ln().powf(self.log_exponent);
        }
        if self.loglog_exponent != 0.0 {
            m *= n.ln().ln().powf(self.loglog_exponent);
        }
        m
    }
}

impl fmt::Display for RateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 6H − 9/2 picks up representation noise; print exponents rounded.
        let e = |x: f64| (x * 1e12).round() / 1e12;
        let mut parts = Vec::new();
        if self.n_exponent != 0.0 {
            parts.push(format!("n^{}", e(self.n_exponent)));
        }
        if self.log_exponent != 0.0 {
            parts.push(format!("log(n)^{}", e(self.log_exponent)));
        }
        if self.loglog_exponent != 0.0 {
            parts.push(format!("log(log(n))^{}", e(self.loglog_exponent)));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join(" * "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRegime {
    pub case: RegimeCase,
    /// `None` for the non-normal regime.
    pub formula: Option<RateFormula>,
    pub v_n_converges: bool,
}

impl RateRegime {
    pub fn m_n(&self, n: f64) -> Option<f64> {
        self.formula.map(|f| f.eval(n))
    }
}

/// Classifies `(H, β)` into the rate regime of `d_TV(F_n, N) ≍ M_n`.
///
/// Boundaries are closed only where a dedicated case exists:
/// `H < 2/3` or (`H = 2/3`, `β < −1/3`) is sub-critical, `H = 2/3` splits at
/// `β = −1/3` (log-log case exactly there), `2/3 < H < 3/4` or (`H = 3/4`, `β < −1/4`)
/// is the power-log case, `H = 3/4` splits at `β = −1/4`, and `H > 3/4` is non-normal.
pub fn classify_rate(hurst: Exponent, beta: Exponent) -> Result<RateRegime> {
    let h = hurst.value();
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::domain(format!("H must lie in (0, 1], got {hurst}")));
    }
    let b = beta.value();
    let formula = |a: f64, lb: f64, llb: f64| {
        Some(RateFormula {
            n_exponent: a,
            log_exponent: lb,
            loglog_exponent: llb,
        })
    };
    let (case, formula) = match hurst.cmp_ratio(2, 3) {
        Ordering::Less => (RegimeCase::SubCritical, formula(-0.5, 0.0, 0.0)),
        Ordering::Equal => match beta.cmp_ratio(-1, 3) {
            Ordering::Less => (RegimeCase::SubCritical, formula(-0.5, 0.0, 0.0)),
            Ordering::Equal => (RegimeCase::LogLogCritical, formula(-0.5, 0.0, 2.0)),
            Ordering::Greater => (RegimeCase::LogCritical, formula(-0.5, 2.0 * (3.0 * b + 1.0), 0.0)),
        },
        Ordering::Greater => match hurst.cmp_ratio(3, 4) {
            Ordering::Less => (RegimeCase::PowerLog, formula(6.0 * h - 4.5, 6.0 * b, 0.0)),
            Ordering::Equal => match beta.cmp_ratio(-1, 4) {
                Ordering::Less => (RegimeCase::PowerLog, formula(6.0 * h - 4.5, 6.0 * b, 0.0)),
                Ordering::Equal => (RegimeCase::H34LogLog, formula(0.0, -1.5, -1.5)),
                Ordering::Greater => (RegimeCase::H34Log, formula(0.0, -1.5, 0.0)),
            },
            Ordering::Greater => (RegimeCase::NonNormal, None),
        },
    };
    let v_n_converges = match hurst.cmp_ratio(3, 4) {
        Ordering::Less => true,
        Ordering::Equal => beta.cmp_ratio(-1, 4) == Ordering::Less,
        Ordering::Greater => false,
    };
    Ok(RateRegime {
        case,
        formula,
        v_n_converges,
    })
}

/// The Bertrand series `Σ_{k≥2} k^α log^β k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BertrandSum {
    pub alpha: f64,
    pub beta: f64,
}

impl BertrandSum {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    fn term(&self, x: f64) -> f64 {
        x.powf(self.alpha) * x.ln().powf(self.beta)
    }

    fn term_derivative(&self, x: f64) -> f64 {
        let l = x.ln();
        x.powf(self.alpha - 1.0) * l.powf(self.beta - 1.0) * (self.alpha * l + self.beta)
    }

    pub fn converges(&self) -> bool {
        self.alpha < -1.0 || (self.alpha == -1.0 && self.beta < -1.0)
    }

    /// `Σ_{k=2}^{n} k^α log^β k`.
    pub fn partial(&self, n: u64) -> f64 {
        (2..=n).map(|k| self.term(k as f64)).sum::<CompensatedSum>().value()
    }

    /// Leading-order equivalent of the partial sum of a divergent series.
    pub fn equivalent(&self, n: u64) -> Option<f64> {
        let (a, b) = (self.alpha, self.beta);
        let nf = n as f64;
        if self.converges() {
            None
        } else if a == -1.0 && b == -1.0 {
            Some(nf.ln().ln())
        } else if a == -1.0 {
            Some(nf.ln().powf(b + 1.0) / (b + 1.0))
        } else {
            Some(nf.powf(a + 1.0) * nf.ln().powf(b) / (a + 1.0))
        }
    }

    /// `∫_n^∞ x^α log^β x dx`; for `α < −1` integrated in `t = log x` over a
    /// compactified range, closed form for `α = −1`.
    pub fn tail_integral(&self, n: u64) -> Result<f64> {
        let t0 = (n as f64).ln();
        let (a1, b) = (self.alpha + 1.0, self.beta);
        let diverges = || Error::Convergence {
            what: "Bertrand tail integral",
            achieved: f64::INFINITY,
            wanted: 1e-13,
        };
        if a1 > 0.0 || (a1 == 0.0 && b >= -1.0) {
            return Err(diverges());
        }
        if a1 == 0.0 {
            return Ok(-t0.powf(b + 1.0) / (b + 1.0));
        }
        // x = e^t, t = t0 + s/(1−s)
        let f = |s: f64| {
            let t = t0 + s / (1.0 - s);
            let jac = 1.0 / ((1.0 - s) * (1.0 - s));
            let v = (a1 * t).exp() * t.powf(b) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let q = integrate(f, 0.0, 1.0, Tolerance::new(1e-15, 1e-13).with_max_intervals(2000))?;
        if !q.value.is_finite() {
            return Err(diverges());
        }
        Ok(q.value)
    }

    /// Estimate of the full sum from `n` terms plus an Euler–Maclaurin tail.
    pub fn limit_estimate(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        Ok(self.partial(n) + self.tail_integral(n)? - 0.5 * self.term(nf) - self.term_derivative(nf) / 12.0)
    }

    /// Whether the tail-corrected partial sums settle: estimates at `n` and `10 n`
    /// exist and differ by less than `tol`.
    pub fn stabilizes(&self, n: u64, tol: f64) -> bool {
        match (self.limit_estimate(n), self.limit_estimate(10 * n)) {
            (Ok(a), Ok(b)) => (a - b).abs() < tol,
            _ => false,
        }
    }
}

pub fn bertrand_partial(alpha: f64, beta: f64, n: u64) -> f64 {
    BertrandSum::new(alpha, beta).partial(n)
}

/// Finite-n proxy for normal convergence: `r_n = S32² / (v_n^{3/2} √n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceEvidence {
    /// `(n, r_n)`
    pub table: Vec<(usize, f64)>,
    pub fit: LinearFit,
    /// `r_n` decreases across the grid and its log-log slope is below the threshold.
    pub normal: bool,
}

pub const NORMAL_SLOPE_THRESHOLD: f64 = -0.02;

pub fn normal_convergence_test(model: &CovarianceModel, n_grid: &[usize]) -> Result<ConvergenceEvidence> {
    check_grid(n_grid, 4)?;
    let engine = CumulantEngine::new(model, *n_grid.last().expect("grid checked"));
    let table: Vec<(usize, f64)> = n_grid
        .iter()
        .map(|&n| {
            let s = engine.s32(n);
            (n, s * s / (engine.variance_vn(n).powf(1.5) * (n as f64).sqrt()))
        })
        .collect();
    let xs: Vec<f64> = table.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = table.iter().map(|&(_, r)| r.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let decreasing = table.first().map(|f| f.1) > table.last().map(|l| l.1);
    Ok(ConvergenceEvidence {
        normal: decreasing && fit.slope < NORMAL_SLOPE_THRESHOLD,
        table,
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub kappa3: f64,
    pub m_n: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommensurabilityScan {
    pub regime: RateRegime,
    pub rows: Vec<RateRow>,
    /// `max ratio / min ratio` over the grid.
    pub band_factor: f64,
    /// Log-log slope of the ratio against `n`.
    pub slope: f64,
}

impl CommensurabilityScan {
    pub const CSV_HEADER: &'static str = "n,kappa3,M_n,ratio,regime_id";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.rows.iter().map(move |r| {
            format!("{},{},{},{},{}", r.n, r.kappa3, r.m_n, r.ratio, self.regime.case.id())
        })
    }
}

/// `|κ₃(F_n)| / M_n` across `n_grid` for the regime of `(H, β)`.
pub fn commensurability_scan(
    model: &CovarianceModel,
    hurst: Exponent,
    beta: Exponent,
    n_grid: &[usize],
) -> Result<CommensurabilityScan> {
    check_grid(n_grid, 2)?;
    let regime = classify_rate(hurst, beta)?;
    let formula = regime
        .formula
        .ok_or_else(|| Error::Regime(format!("(H={hurst}, beta={beta}) is outside the normal-convergence regimes")))?;
    if n_grid[0] < 3 {
        return Err(Error::domain("commensurability scans need n >= 3 so that log log n > 0"));
    }
    let engine = CumulantEngine::new(model, *n_grid.last().expect("grid checked"));
    let rows: Vec<RateRow> = n_grid
        .iter()
        .map(|&n| {
            let kappa3 = engine.kappa3(n);
            let m_n = formula.eval(n as f64);
            RateRow {
                n,
                kappa3,
                m_n,
                ratio: kappa3.abs() / m_n,
            }
        })
        .collect();
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let slope = linear_fit(&xs, &ys)?.slope;
    Ok(CommensurabilityScan {
        regime,
        rows,
        band_factor: hi / lo,
        slope,
    })
}

fn check_grid(n_grid: &[usize], min_points: usize) -> Result<()> {
    if n_grid.len() < min_points {
        return Err(Error::domain(format!("n grid needs at least {min_points} points")));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("n grid must be positive and strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Exponent {
        Exponent::rational(p, q)
    }

    #[test]
    fn parses_exponents() {
        assert_eq!("2/3".parse::<Exponent>().unwrap(), r(2, 3));
        assert_eq!("-1/4".parse::<Exponent>().unwrap(), r(-1, 4));
        assert_eq!("0.75".parse::<Exponent>().unwrap(), r(3, 4));
        assert_eq!("-0.25".parse::<Exponent>().unwrap(), r(-1, 4));
        assert_eq!("1e-3".parse::<Exponent>().unwrap(), Exponent::Real(1e-3));
        assert!("abc".parse::<Exponent>().is_err());
        assert!("1/0".parse::<Exponent>().is_err());
    }

    #[test]
    fn regime_examples() {
        let c = |h: Exponent, b: Exponent| classify_rate(h, b).unwrap();
        let sub = c(r(1, 2), r(0, 1));
        assert_eq!(sub.case, RegimeCase::SubCritical);
        assert!((sub.m_n(1e4).unwrap() - 1e-2).abs() < 1e-15);

        let ll = c(r(2, 3), r(-1, 3));
        assert_eq!(ll.case, RegimeCase::LogLogCritical);
        let n: f64 = 1e6;
        assert!((ll.m_n(n).unwrap() - n.ln().ln().powi(2) / n.sqrt()).abs() < 1e-15);

        let pl = c(r(7, 10), r(0, 1));
        assert_eq!(pl.case, RegimeCase::PowerLog);
        assert!((pl.formula.unwrap().n_exponent + 0.3).abs() < 1e-12);

        let h34 = c(r(3, 4), r(0, 1));
        assert_eq!(h34.case, RegimeCase::H34Log);
        assert!(!h34.v_n_converges);
        assert!((h34.m_n(n).unwrap() - n.ln().powf(-1.5)).abs() < 1e-15);

        assert_eq!(c(r(9, 10), r(5, 1)).case, RegimeCase::NonNormal);
        assert_eq!(c(0.9.into(), (-3.0).into()).case, RegimeCase::NonNormal);
        assert_eq!(c(r(3, 4), r(-1, 4)).case, RegimeCase::H34LogLog);
        assert_eq!(c(r(2, 3), r(0, 1)).case, RegimeCase::LogCritical);
        assert!(classify_rate(r(0, 1), r(0, 1)).is_err());
        assert!(classify_rate(r(1, 1), r(0, 1)).is_ok());
    }

    #[test]
    fn boundaries_split_neighbours() {
        let eps = r(1, 1_000_000);
        let third = r(-1, 3);
        let quarter = r(-1, 4);
        let add = |a: Exponent, b: Exponent| match (a, b) {
            (Exponent::Rational(x), Exponent::Rational(y)) => Exponent::Rational(x + y),
            _ => unreachable!(),
        };
        let sub = |a: Exponent, b: Exponent| match (a, b) {
            (Exponent::Rational(x), Exponent::Rational(y)) => Exponent::Rational(x - y),
            _ => unreachable!(),
        };
        let case = |h, b| classify_rate(h, b).unwrap().case;
        assert_ne!(case(r(2, 3), sub(third, eps)), case(r(2, 3), third));
        assert_ne!(case(r(2, 3), add(third, eps)), case(r(2, 3), third));
        assert_ne!(case(r(3, 4), sub(quarter, eps)), case(r(3, 4), quarter));
        assert_ne!(case(r(3, 4), add(quarter, eps)), case(r(3, 4), quarter));
        assert_ne!(case(sub(r(2, 3), eps), r(0, 1)), case(r(2, 3), r(0, 1)));
        assert_ne!(case(add(r(2, 3), eps), r(0, 1)), case(r(2, 3), r(0, 1)));
        assert_ne!(case(sub(r(3, 4), eps), r(0, 1)), case(r(3, 4), r(0, 1)));
        assert_ne!(case(add(r(3, 4), eps), r(0, 1)), case(r(3, 4), r(0, 1)));
        assert!(classify_rate(r(3, 4), sub(quarter, eps)).unwrap().v_n_converges);
        assert!(!classify_rate(r(3, 4), quarter).unwrap().v_n_converges);
    }

    #[test]
    fn bertrand_examples() {
        assert_eq!(bertrand_partial(0.0, 0.0, 1000), 999.0);
        let n = 10_000_000u64;
        let s = BertrandSum::new(-1.0, 1.0);
        let ratio = s.partial(n) / s.equivalent(n).unwrap();
        assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
        // log log n grows so slowly that the ratio only drifts towards 1.
        let s = BertrandSum::new(-1.0, -1.0);
        let r1 = s.partial(10_000) / s.equivalent(10_000).unwrap();
        let r2 = s.partial(n) / s.equivalent(n).unwrap();
        assert!((r2 - 1.0).abs() < (r1 - 1.0).abs(), "{r1} {r2}");
        assert!(BertrandSum::new(-2.0, 3.0).equivalent(100).is_none());
    }

    #[test]
    fn bertrand_stabilization_matches_convergence_condition() {
        let grid = [
            (-2.0, 0.0),
            (-1.5, 3.0),
            (-1.1, 1.0),
            (-1.0, -3.0),
            (-1.0, -1.5),
            (-1.0, -1.0),
            (-1.0, -0.5),
            (-1.0, 0.0),
            (-0.9, -2.0),
            (-0.5, 0.0),
            (0.0, -1.0),
            (0.5, 1.0),
        ];
        for (a, b) in grid {
            let s = BertrandSum::new(a, b);
            assert_eq!(s.stabilizes(10_000, 1e-10), s.converges(), "alpha={a} beta={b}");
        }
    }

    #[test]
    fn grid_validation() {
        let m = CovarianceModel::fgn(0.5).unwrap();
        assert!(normal_convergence_test(&m, &[8, 16, 32]).is_err());
        assert!(normal_convergence_test(&m, &[8, 16, 16, 32]).is_err());
        let scan = commensurability_scan(&m, r(9, 10), r(0, 1), &[8, 16]);
        assert!(matches!(scan, Err(Error::Regime(_))));
    }

    #[test]
    fn normal_convergence_examples() {
        let grid: Vec<usize> = (8..=16).map(|p| 1usize << p).collect();
        let half = normal_convergence_test(&CovarianceModel::fgn(0.5).unwrap(), &grid).unwrap();
        assert!(half.normal);
        assert!((half.fit.slope + 0.5).abs() < 1e-9);
        let h34 = normal_convergence_test(&CovarianceModel::fgn(0.75).unwrap(), &grid).unwrap();
        assert!(h34.normal, "{:?}", h34.fit);
        let h9 = normal_convergence_test(&CovarianceModel::fgn(0.9).unwrap(), &grid).unwrap();
        assert!(!h9.normal, "{:?}", h9.fit);
    }

    #[test]
    fn iid_ratio_is_flat() {
        let grid: Vec<usize> = (8..=16).map(|p| 1usize << p).collect();
        let scan = commensurability_scan(&CovarianceModel::fgn(0.5).unwrap(), r(1, 2), r(0, 1), &grid).unwrap();
        assert!(scan.band_factor < 1.0 + 1e-9);
        let expected = 2f64.powf(1.5);
        assert!(scan.rows.iter().all(|row| (row.ratio - expected).abs() < 1e-9));
    }
}
