//! Covariance sequences of stationary Gaussian sequences.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;

/// Relative slack allowed when checking that `|ρ|` is non-increasing.
pub const MONOTONE_TOLERANCE: f64 = 1e-14;
/// Smallest admissible pivot in [`CovarianceModel::psd_check`].
pub const PIVOT_TOLERANCE: f64 = -1e-10;
/// Largest Toeplitz dimension accepted by [`CovarianceModel::psd_check`].
pub const PSD_MAX_DIM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Fractional Gaussian noise.
    Fgn { hurst: f64 },
    /// Fourier coefficients of a log-modulated spectral density.
    LogModSpectral { hurst: f64, beta: f64 },
    /// Finite table extended by zeros.
    Tabulated { len: usize },
    /// `sign * min(1, k^{2H-2} log^{2β}(k + e))` for `k ≥ 1`.
    LogPower { hurst: f64, beta: f64, negative: bool },
}

/// A covariance function `ρ` with `ρ(0) = 1`, stored one-sided.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    kind: ModelKind,
    table: Option<Arc<[f64]>>,
    spectral: Option<Arc<SpectralDensity>>,
    monotone_from: usize,
}

/// Outcome of [`CovarianceModel::validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub k_max: usize,
    pub constant_sign: bool,
    /// First lag whose sign differs from the earlier nonzero lags.
    pub sign_change_at: Option<usize>,
    /// Smallest `k₀ ≥ 1` with `|ρ|` non-increasing on `[k₀, k_max]`; `None` if the
    /// last step still increases.
    pub monotone_from: Option<usize>,
    pub unit_at_zero: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.constant_sign && self.monotone_from.is_some() && self.unit_at_zero
    }
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Hurst parameter must lie in (0, 1), got {hurst}")))
    }
}

/// Fractional Gaussian noise covariance `½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})`.
pub fn fgn_rho(hurst: f64, k: i64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(fgn_rho_unchecked(hurst, k.unsigned_abs()))
}

fn fgn_rho_unchecked(hurst: f64, k: u64) -> f64 {
    let two_h = 2.0 * hurst;
    match k {
        0 => 1.0,
        _ if hurst == 0.5 => 0.0,
        1..=7 => {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
        }
        _ => {
            // k^{2H} Σ_{j≥1} binom(2H, 2j) k^{-2j}; the closed form cancels badly for large k.
            let kf = k as f64;
            let inv2 = 1.0 / (kf * kf);
            let mut binom = two_h * (two_h - 1.0) / 2.0;
            let mut power = inv2;
            let mut acc = binom * power;
            let mut m = 2.0;
            loop {
                binom *= (two_h - m) * (two_h - m - 1.0) / ((m + 1.0) * (m + 2.0));
                power *= inv2;
                let term = binom * power;
                acc += term;
                if term.abs() <= 1e-18 * acc.abs() {
                    break;
                }
                m += 2.0;
            }
            kf.powf(two_h) * acc
        }
    }
}

fn log_power_value(hurst: f64, beta: f64, k: u64) -> f64 {
    let kf = k as f64;
    let l = (kf + std::f64::consts::E).ln();
    (kf.powf(2.0 * hurst - 2.0) * l.powf(2.0 * beta)).min(1.0)
}

impl CovarianceModel {
    pub fn fgn(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self {
            kind: ModelKind::Fgn { hurst },
            table: None,
            spectral: None,
            monotone_from: 1,
        })
    }

    /// Independent standard normals, `ρ = δ₀`.
    pub fn iid() -> Self {
        Self::tabulated(vec![1.0]).expect("unit table is valid")
    }

    /// Table `ρ(0), ρ(1), …`; lags beyond the table evaluate to zero.
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => return Err(Error::domain("covariance table is empty")),
            Some(&first) if (first - 1.0).abs() > 1e-12 => {
                return Err(Error::domain(format!("covariance table must start with 1, got {first}")))
            }
            _ => {}
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite covariance at lag {bad}")));
        }
        let mut values = values;
        values[0] = 1.0;
        let len = values.len();
        let mut model = Self {
            kind: ModelKind::Tabulated { len },
            table: Some(values.into()),
            spectral: None,
            monotone_from: 1,
        };
        model.monotone_from = model.scan_monotone_from(len + 1).unwrap_or(len + 1);
        Ok(model)
    }

    /// Reads a single-column text table. Blank lines and `#` comments are skipped.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {line:?}: {e}", lineno + 1)))?;
            values.push(v);
        }
        Self::tabulated(values)
    }

    /// `ρ(k) = sign * min(1, k^{2H−2} log^{2β}(k + e))` for `k ≥ 1`, `ρ(0) = 1`.
    ///
    /// Not necessarily positive definite; intended for trace formulas whose
    /// rates only depend on the tail.
    pub fn log_power(hurst: f64, beta: f64, negative: bool) -> Result<Self> {
        check_hurst(hurst)?;
        if !beta.is_finite() {
            return Err(Error::domain("beta must be finite"));
        }
        // d/dk log|ρ| = (2H−2)/k + 2β/((k+e) log(k+e)) is negative once log(k+e) > β/(1−H).
        let mut last_increase = 0;
        if beta > 0.0 {
            let bound = (beta / (1.0 - hurst)).exp().min(1e7) as u64 + 2;
            let mut prev = log_power_value(hurst, beta, 1);
            for k in 2..=bound {
                let cur = log_power_value(hurst, beta, k);
                if cur > prev * (1.0 + MONOTONE_TOLERANCE) {
                    last_increase = k;
                }
                prev = cur;
            }
        }
        Ok(Self {
            kind: ModelKind::LogPower {
                hurst,
                beta,
                negative,
            },
            table: None,
            spectral: None,
            monotone_from: last_increase.max(1) as usize,
        })
    }

    /// Covariance generated by a spectral density, tabulated on `0..=k_max`.
    /// Lags beyond the table fall back to single-lag quadrature.
    pub fn from_spectral(density: &SpectralDensity, k_max: usize) -> Result<Self> {
        let mut values = density.rho_table(k_max + 1)?;
        let r0 = values[0];
        if (r0 - 1.0).abs() > 1e-9 {
            return Err(Error::Internal(format!("spectral covariance at lag 0 is {r0}")));
        }
        values[0] = 1.0;
        let kind = ModelKind::LogModSpectral {
            hurst: density.hurst(),
            beta: density.beta(),
        };
        let mut model = Self {
            kind,
            table: Some(values.into()),
            spectral: Some(Arc::new(density.clone())),
            monotone_from: 1,
        };
        model.monotone_from = model.scan_monotone_from(k_max).unwrap_or(k_max);
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Fgn { hurst }
            | ModelKind::LogModSpectral { hurst, .. }
            | ModelKind::LogPower { hurst, .. } => Some(hurst),
            ModelKind::Tabulated { .. } => None,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            ModelKind::LogModSpectral { beta, .. } | ModelKind::LogPower { beta, .. } => Some(beta),
            ModelKind::Fgn { .. } => Some(0.0),
            ModelKind::Tabulated { .. } => None,
        }
    }

    /// Short identifier used in file headers and reports.
    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::Fgn { hurst } => format!("fgn(H={hurst})"),
            ModelKind::LogModSpectral { hurst, beta } => format!("spectral(H={hurst},beta={beta})"),
            ModelKind::Tabulated { len } => format!("table(len={len})"),
            ModelKind::LogPower {
                hurst,
                beta,
                negative,
            } => format!(
                "logpower(H={hurst},beta={beta},sign={})",
                if negative { "-" } else { "+" }
            ),
        }
    }

    /// Index beyond which `|ρ|` is non-increasing, as known to the model.
    pub fn monotone_from(&self) -> usize {
        self.monotone_from
    }

    /// `ρ(k)`, symmetric in `k`.
    pub fn rho(&self, k: i64) -> f64 {
        let k = k.unsigned_abs();
        match self.kind {
            ModelKind::Fgn { hurst } => fgn_rho_unchecked(hurst, k),
            ModelKind::LogPower {
                hurst,
                beta,
                negative,
            } => {
                if k == 0 {
                    1.0
                } else {
                    let v = log_power_value(hurst, beta, k);
                    if negative {
                        -v
                    } else {
                        v
                    }
                }
            }
            ModelKind::Tabulated { .. } => {
                let table = self.table.as_ref().expect("tabulated model has a table");
                table.get(k as usize).copied().unwrap_or(0.0)
            }
            ModelKind::LogModSpectral { .. } => {
                let table = self.table.as_ref().expect("spectral model has a table");
                match table.get(k as usize) {
                    Some(&v) => v,
                    None => self
                        .spectral
                        .as_ref()
                        .and_then(|sd| sd.rho_from_q(k).ok())
                        .unwrap_or(f64::NAN),
                }
            }
        }
    }

    /// `ρ(0), …, ρ(len − 1)`.
    pub fn autocovariances(&self, len: usize) -> Vec<f64> {
        if let (ModelKind::LogModSpectral { .. }, Some(table), Some(sd)) =
            (self.kind, self.table.as_ref(), self.spectral.as_ref())
        {
            if len > table.len() {
                if let Ok(mut values) = sd.rho_table(len) {
                    values[0] = 1.0;
                    return values;
                }
            }
        }
        (0..len as i64).map(|k| self.rho(k)).collect()
    }

    fn scan_monotone_from(&self, k_max: usize) -> Option<usize> {
        let rho: Vec<f64> = (0..=k_max as i64).map(|k| self.rho(k).abs()).collect();
        monotone_start(&rho)
    }

    pub fn validate_assumptions(&self, k_max: usize) -> Result<ValidationReport> {
        if k_max < 2 {
            return Err(Error::domain(format!("k_max must be at least 2, got {k_max}")));
        }
        let rho = self.autocovariances(k_max + 1);
        let mut sign = 0.0f64;
        let mut sign_change_at = None;
        for (k, &r) in rho.iter().enumerate().skip(1) {
            if r == 0.0 {
                continue;
            }
            if sign == 0.0 {
                sign = r.signum();
            } else if r.signum() != sign {
                sign_change_at = Some(k);
                break;
            }
        }
        let abs: Vec<f64> = rho.iter().map(|r| r.abs()).collect();
        Ok(ValidationReport {
            k_max,
            constant_sign: sign_change_at.is_none(),
            sign_change_at,
            monotone_from: monotone_start(&abs),
            unit_at_zero: rho[0] == 1.0,
        })
    }

    /// Whether the `m × m` Toeplitz matrix `ρ(k − ℓ)` is positive semidefinite, decided
    /// by an unpivoted `LDLᵀ` factorization whose pivots must stay above
    /// [`PIVOT_TOLERANCE`].
    pub fn psd_check(&self, m: usize) -> Result<bool> {
        if m > PSD_MAX_DIM {
            return Err(Error::Resource(format!(
                "psd_check is limited to {PSD_MAX_DIM}x{PSD_MAX_DIM}, got {m}"
            )));
        }
        let rho = self.autocovariances(m);
        Ok(toeplitz_ldl_nonnegative(&rho))
    }
}

/// Smallest `k₀ ≥ 1` such that `values[k+1] ≤ values[k]` (up to tolerance) for all `k ≥ k₀`.
fn monotone_start(values: &[f64]) -> Option<usize> {
    let last = values.len().checked_sub(1)?;
    if last < 1 {
        return Some(1);
    }
    let mut k0 = last;
    while k0 > 1 {
        let (a, b) = (values[k0 - 1], values[k0]);
        if b > a + MONOTONE_TOLERANCE * a.max(b) {
            break;
        }
        k0 -= 1;
    }
    if k0 == last && last >= 2 && values[last] > values[last - 1] * (1.0 + MONOTONE_TOLERANCE) {
        return None;
    }
    Some(k0)
}

fn toeplitz_ldl_nonnegative(rho: &[f64]) -> bool {
    let m = rho.len();
    // Column-major lower factor; l[j][i] holds L(i, j) for i > j.
    let mut l = vec![vec![0.0f64; m]; m];
    let mut d = vec![0.0f64; m];
    let mut col = vec![0.0f64; m];
    for j in 0..m {
        let mut dj = rho[0];
        for k in 0..j {
            let ljk = l[k][j];
            dj -= ljk * ljk * d[k];
        }
        if dj < PIVOT_TOLERANCE {
            return false;
        }
        for i in (j + 1)..m {
            col[i] = rho[i - j];
        }
        for k in 0..j {
            let w = l[k][j] * d[k];
            if w == 0.0 {
                continue;
            }
            let lk = &l[k];
            for i in (j + 1)..m {
                col[i] -= lk[i] * w;
            }
        }
        d[j] = dj;
        if dj <= -PIVOT_TOLERANCE {
            // Numerically zero pivot: the rest of the column must vanish too.
            if col[(j + 1)..m].iter().any(|c| c.abs() > 1e-8) {
                return false;
            }
            d[j] = 0.0;
            continue;
        }
        let lj = &mut l[j];
        for i in (j + 1)..m {
            lj[i] = col[i] / dj;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fgn_examples() {
        assert_eq!(fgn_rho(0.5, 0).unwrap(), 1.0);
        assert_eq!(fgn_rho(0.5, 3).unwrap(), 0.0);
        assert!((fgn_rho(0.75, 1).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(matches!(fgn_rho(1.0, 1), Err(Error::Domain(_))));
        assert!(matches!(fgn_rho(0.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn fgn_series_matches_closed_form_at_moderate_lags() {
        for h in [0.1, 0.3, 0.6, 0.75, 0.9, 0.99] {
            for k in 8..200u64 {
                let kf = k as f64;
                let closed = 0.5 * ((kf + 1.0).powf(2.0 * h) - 2.0 * kf.powf(2.0 * h) + (kf - 1.0).powf(2.0 * h));
                let series = fgn_rho_unchecked(h, k);
                // The closed form itself loses ~ε·k^{2H} to cancellation.
                let slack = 1e-11 * closed.abs() + 8.0 * f64::EPSILON * (kf + 1.0).powf(2.0 * h);
                assert!((closed - series).abs() <= slack, "H={h} k={k}: {closed} vs {series}");
            }
        }
    }

    #[test]
    fn fgn_asymptotic_power_law() {
        for h in [0.6, 0.75, 0.9] {
            for k in [100i64, 1000, 10_000, 1_000_000] {
                let r = fgn_rho(h, k).unwrap() / (h * (2.0 * h - 1.0) * (k as f64).powf(2.0 * h - 2.0));
                assert!((r - 1.0).abs() < 0.01, "H={h} k={k} ratio={r}");
            }
        }
    }

    #[test]
    fn fgn_half_is_kronecker_delta() {
        let m = CovarianceModel::fgn(0.5).unwrap();
        assert_eq!(m.rho(0), 1.0);
        assert!((1..500).all(|k| m.rho(k) == 0.0 && m.rho(-k) == 0.0));
    }

    #[test]
    fn validation_examples() {
        let fgn = CovarianceModel::fgn(0.75).unwrap();
        let rep = fgn.validate_assumptions(10_000).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.monotone_from, Some(1));
        let direct = (1..=10_000i64).all(|k| fgn.rho(k) > 0.0);
        assert!(direct);

        let iid = CovarianceModel::fgn(0.5).unwrap().validate_assumptions(50).unwrap();
        assert!(iid.passed());

        let bad = CovarianceModel::tabulated(vec![1.0, -0.5, 0.6]).unwrap();
        let rep = bad.validate_assumptions(10).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.sign_change_at, Some(2));

        assert!(fgn.validate_assumptions(1).is_err());
    }

    #[test]
    fn tabulated_extends_by_zero() {
        let m = CovarianceModel::tabulated(vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(m.rho(-2), 0.25);
        assert_eq!(m.rho(3), 0.0);
        assert_eq!(m.rho(-100), 0.0);
        assert!(CovarianceModel::tabulated(vec![0.9, 0.1]).is_err());
        assert!(CovarianceModel::tabulated(vec![]).is_err());
    }

    #[test]
    fn psd_examples() {
        assert!(CovarianceModel::fgn(0.7).unwrap().psd_check(256).unwrap());
        assert!(CovarianceModel::iid().psd_check(300).unwrap());
        assert!(matches!(
            CovarianceModel::iid().psd_check(PSD_MAX_DIM + 1),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn psd_detects_indefinite_tables() {
        // ρ = (1, 0.9, 0.9, 0, …): eigenvalues of the 3x3 block are fine but larger
        // sections become indefinite.
        let m = CovarianceModel::tabulated(vec![1.0, 0.9, 0.9]).unwrap();
        assert!(!m.psd_check(32).unwrap());
        // Nearly constant tails, checked against the smallest eigenvalue.
        for (len, m) in [(64usize, 64usize), (40, 64), (10, 48)] {
            let mut t = vec![1.0];
            t.extend(std::iter::repeat(0.999).take(len - 1));
            let model = CovarianceModel::tabulated(t).unwrap();
            let rho = model.autocovariances(m);
            let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| rho[i.abs_diff(j)]);
            let min_eig = dense.symmetric_eigenvalues().min();
            assert_eq!(model.psd_check(m).unwrap(), min_eig >= -1e-10, "len={len} m={m} min_eig={min_eig}");
        }
        // Rank-one all-ones matrix is PSD with zero pivots.
        let ones = CovarianceModel::tabulated(vec![1.0; 16]).unwrap();
        assert!(ones.psd_check(16).unwrap());
    }

    #[test]
    fn log_power_sign_and_monotone_index() {
        let m = CovarianceModel::log_power(0.7, 1.0, true).unwrap();
        assert_eq!(m.rho(0), 1.0);
        assert!((1..100).all(|k| m.rho(k) < 0.0));
        let rep = m.validate_assumptions(100_000).unwrap();
        assert!(rep.passed());
        assert!(rep.monotone_from.unwrap() <= m.monotone_from());
    }
}
