//! Exact cumulants of the normalized quadratic variation
//! `F_n = n^{-1/2} Σ_{k<n} (X_k² − 1) / sqrt(v_n)`.
//!
//! With `R` the `n × n` Toeplitz covariance matrix, the `p`-th cumulant of
//! `Σ (X_k² − 1)` is `2^{p−1} (p−1)! tr(Rᵖ)`. The variance normalization is
//! `v_n = (2/n) Σ_{k,ℓ<n} ρ(k−ℓ)² = 2 tr(R²)/n`, so `Var F_n = 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::numeric::{autoconvolution, autoconvolution_direct, CompensatedSum};

/// Above this length the lag autoconvolution is computed by FFT.
const DIRECT_CONVOLUTION_MAX: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CumulantReport {
    pub n: usize,
    pub v_n: f64,
    pub kappa3: f64,
    pub kappa3_lower: f64,
    pub kappa3_upper: f64,
    pub kappa4: f64,
    pub kappa4_bound: f64,
    /// `n^{1/4} κ₄^{3/4} / |κ₃|`; NaN when `κ₃ = 0`.
    pub domination_ratio: f64,
    /// `Σ_{|k|<n} |ρ(k)|^{3/2}`
    pub s32: f64,
    /// `Σ_{|k|<n} |ρ(k)|^{4/3}`
    pub s43: f64,
}

impl CumulantReport {
    pub const CSV_HEADER: &'static str =
        "n,v_n,kappa3,kappa3_lower,kappa3_upper,kappa4,kappa4_bound_shape,domination_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.v_n,
            self.kappa3,
            self.kappa3_lower,
            self.kappa3_upper,
            self.kappa4,
            self.kappa4_bound,
            self.domination_ratio
        )
    }

    /// `lower ≤ |κ₃| ≤ upper`.
    pub fn sandwich_holds(&self) -> bool {
        self.kappa3_lower <= self.kappa3.abs() && self.kappa3.abs() <= self.kappa3_upper
    }
}

/// Lag tables shared by all horizons `n ≤ max_n` of a scan.
#[derive(Debug, Clone)]
pub struct CumulantEngine {
    rho: Vec<f64>,
    /// `conv[s] = Σ_{d=1}^{s−1} ρ(d) ρ(s−d)`
    conv: Vec<f64>,
    /// Largest lag with `ρ ≠ 0`.
    reach: usize,
}

impl CumulantEngine {
    pub fn new(model: &CovarianceModel, max_n: usize) -> Self {
        Self::from_autocovariances(model.autocovariances(max_n.max(1)))
    }

    /// Builds the engine from `ρ(0), …, ρ(N−1)`.
    pub fn from_autocovariances(rho: Vec<f64>) -> Self {
        assert!(!rho.is_empty(), "need at least rho(0)");
        let conv = if rho.len() <= DIRECT_CONVOLUTION_MAX {
            autoconvolution_direct(&rho)
        } else {
            autoconvolution(&rho)
        };
        let reach = rho.iter().rposition(|&r| r != 0.0).unwrap_or(0);
        Self { rho, conv, reach }
    }

    pub fn max_n(&self) -> usize {
        self.rho.len()
    }

    fn check(&self, n: usize) {
        assert!(
            n >= 1 && n <= self.rho.len(),
            "horizon {n} outside 1..={}",
            self.rho.len()
        );
    }

    /// `tr(R²) = n + 2 Σ_{d≥1} (n−d) ρ(d)²`
    pub fn trace2(&self, n: usize) -> f64 {
        self.check(n);
        let mut acc = CompensatedSum::new();
        acc.add(n as f64);
        for d in 1..n {
            acc.add(2.0 * (n - d) as f64 * self.rho[d] * self.rho[d]);
        }
        acc.value()
    }

    /// `tr(R³)`, grouping index triples by their sorted gaps.
    pub fn trace3(&self, n: usize) -> f64 {
        self.check(n);
        let mut acc = CompensatedSum::new();
        acc.add(n as f64);
        for d in 1..n {
            acc.add(6.0 * (n - d) as f64 * self.rho[d] * self.rho[d]);
        }
        for s in 2..n {
            acc.add(6.0 * (n - s) as f64 * self.rho[s] * self.conv[s]);
        }
        acc.value()
    }

    /// `tr(R⁴) = Σ_{i,k} (R²)_{ik}²`, filling `R²` diagonal by diagonal with the
    /// Toeplitz displacement recurrence
    /// `P(i+1, k+1) = P(i, k) + ρ(i+1)ρ(k+1) − ρ(n−1−i)ρ(n−1−k)`.
    /// Diagonals beyond twice the covariance range vanish and are skipped.
    pub fn trace4(&self, n: usize) -> f64 {
        self.check(n);
        let rho = &self.rho[..n];
        let band = (2 * self.reach + 1).min(n);
        let diagonals: Vec<CompensatedSum> = (0..band)
            .into_par_iter()
            .map(|d| {
                // P(0, d) = Σ_j ρ(j) ρ(j − d)
                let mut first = CompensatedSum::new();
                for (j, &r) in rho.iter().enumerate() {
                    first.add(r * rho[j.abs_diff(d)]);
                }
                let mut p = first.value();
                let mut acc = CompensatedSum::new();
                acc.add(p * p);
                for i in 0..(n - 1 - d) {
                    let k = i + d;
                    p += rho[i + 1] * rho[k + 1] - rho[n - 1 - i] * rho[n - 1 - k];
                    acc.add(p * p);
                }
                acc
            })
            .collect();
        let mut total = CompensatedSum::new();
        for (d, part) in diagonals.iter().enumerate() {
            let w = if d == 0 { 1.0 } else { 2.0 };
            total.add(w * part.value());
        }
        total.value()
    }

    pub fn variance_vn(&self, n: usize) -> f64 {
        2.0 * self.trace2(n) / n as f64
    }

    pub fn kappa3(&self, n: usize) -> f64 {
        let nv = n as f64 * self.variance_vn(n);
        8.0 * self.trace3(n) / nv.powf(1.5)
    }

    pub fn kappa4(&self, n: usize) -> f64 {
        let nv = n as f64 * self.variance_vn(n);
        48.0 * self.trace4(n) / (nv * nv)
    }

    fn abs_power_sum(&self, n: usize, p: f64) -> f64 {
        self.check(n);
        let mut acc = CompensatedSum::new();
        acc.add(self.rho[0].abs().powf(p));
        for &r in &self.rho[1..n] {
            acc.add(2.0 * r.abs().powf(p));
        }
        acc.value()
    }

    /// `Σ_{|k|<n} |ρ(k)|^{3/2}`
    pub fn s32(&self, n: usize) -> f64 {
        self.abs_power_sum(n, 1.5)
    }

    /// `Σ_{|k|<n} |ρ(k)|^{4/3}`
    pub fn s43(&self, n: usize) -> f64 {
        self.abs_power_sum(n, 4.0 / 3.0)
    }

    /// Two-sided bound on `|κ₃|`: upper is `8 v_n^{−3/2} n^{−1/2} S32²` and lower is a quarter of it.
    pub fn kappa3_bounds(&self, n: usize) -> (f64, f64) {
        let v = self.variance_vn(n);
        let s = self.s32(n);
        let upper = 8.0 * v.powf(-1.5) * (n as f64).powf(-0.5) * s * s;
        (upper / 4.0, upper)
    }

    /// `v_n^{−2} n^{−1} S43³`, the shape of the upper bound on `κ₄`.
    pub fn kappa4_bound_shape(&self, n: usize) -> f64 {
        let v = self.variance_vn(n);
        self.s43(n).powi(3) / (v * v * n as f64)
    }

    pub fn domination_ratio(&self, n: usize) -> Result<f64> {
        let k3 = self.kappa3(n);
        if k3 == 0.0 {
            return Err(Error::Degenerate(format!("third cumulant vanishes at n = {n}")));
        }
        Ok((n as f64).powf(0.25) * self.kappa4(n).powf(0.75) / k3.abs())
    }

    pub fn report(&self, n: usize) -> CumulantReport {
        let v_n = self.variance_vn(n);
        let nv = n as f64 * v_n;
        let kappa3 = 8.0 * self.trace3(n) / nv.powf(1.5);
        let kappa4 = 48.0 * self.trace4(n) / (nv * nv);
        let (kappa3_lower, kappa3_upper) = self.kappa3_bounds(n);
        let domination_ratio = if kappa3 == 0.0 {
            f64::NAN
        } else {
            (n as f64).powf(0.25) * kappa4.powf(0.75) / kappa3.abs()
        };
        CumulantReport {
            n,
            v_n,
            kappa3,
            kappa3_lower,
            kappa3_upper,
            kappa4,
            kappa4_bound: self.kappa4_bound_shape(n),
            domination_ratio,
            s32: self.s32(n),
            s43: self.s43(n),
        }
    }

    pub fn scan(&self, ns: &[usize]) -> Vec<CumulantReport> {
        ns.iter().map(|&n| self.report(n)).collect()
    }
}

pub fn variance_vn(model: &CovarianceModel, n: usize) -> f64 {
    CumulantEngine::new(model, n).variance_vn(n)
}

pub fn kappa3_exact(model: &CovarianceModel, n: usize) -> f64 {
    CumulantEngine::new(model, n).kappa3(n)
}

pub fn kappa3_bounds(model: &CovarianceModel, n: usize) -> (f64, f64) {
    CumulantEngine::new(model, n).kappa3_bounds(n)
}

pub fn kappa4_exact(model: &CovarianceModel, n: usize) -> f64 {
    CumulantEngine::new(model, n).kappa4(n)
}

pub fn kappa4_bound_shape(model: &CovarianceModel, n: usize) -> f64 {
    CumulantEngine::new(model, n).kappa4_bound_shape(n)
}

pub fn domination_ratio(model: &CovarianceModel, n: usize) -> Result<f64> {
    CumulantEngine::new(model, n).domination_ratio(n)
}

/// Geometric grid `start, start·factor, …` up to `stop` inclusive.
pub fn geometric_grid(start: usize, stop: usize, factor: usize) -> Vec<usize> {
    assert!(start >= 1 && factor >= 2, "grid needs start >= 1 and factor >= 2");
    let mut out = Vec::new();
    let mut n = start;
    while n <= stop {
        out.push(n);
        match n.checked_mul(factor) {
            Some(next) => n = next,
            None => break,
        }
    }
    out
}
