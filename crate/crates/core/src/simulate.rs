//! Exact Gaussian path sampling, Monte Carlo statistics of `F_n`, and a
//! finite-grid approximation of the second-chaos limit law.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use statrs::function::erf::erfc;
use std::sync::Arc;

use crate::covariance::CovarianceModel;
use crate::cumulants::CumulantEngine;
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, GaussLegendre};
use crate::spectral::{AsymptoticConstants, QuadratureConfig};

/// Largest relative mass of negative circulant eigenvalues that may be clipped.
pub const CLIP_TOLERANCE: f64 = 1e-8;
const PATHS_PER_TASK: usize = 256;

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub model: CovarianceModel,
    pub n: usize,
    pub paths: usize,
    pub seed: u64,
    pub workers: usize,
}

impl SamplerConfig {
    pub fn new(model: CovarianceModel, n: usize, paths: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            paths,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.paths == 0 || self.workers == 0 {
            return Err(Error::domain("sampler needs n >= 1, paths >= 1 and workers >= 1"));
        }
        Ok(())
    }
}

/// Runs `f` on a pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Generator of stream `index` for a given seed.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Circulant embedding of a Toeplitz covariance of size `n` into size `2(n−1)`.
#[derive(Clone)]
pub struct CirculantSampler {
    n: usize,
    /// `sqrt(λ_j / m)`
    scales: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
    pub min_eigenvalue: f64,
    pub clipped_mass: f64,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("n", &self.n)
            .field("embedding", &self.scales.len())
            .field("min_eigenvalue", &self.min_eigenvalue)
            .field("clipped_mass", &self.clipped_mass)
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(model: &CovarianceModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("path length must be positive"));
        }
        if n == 1 {
            return Ok(Self {
                n,
                scales: vec![1.0],
                fft: None,
                min_eigenvalue: 1.0,
                clipped_mass: 0.0,
            });
        }
        let rho = model.autocovariances(n);
        let m = 2 * (n - 1);
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(rho[if j < n { j } else { m - j }], 0.0))
            .collect();
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(m).process(&mut row);
        let eig: Vec<f64> = row.iter().map(|z| z.re).collect();
        let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let total: f64 = eig.iter().map(|l| l.abs()).sum();
        let negative: f64 = eig.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
        let clipped_mass = negative / total;
        if clipped_mass > CLIP_TOLERANCE {
            return Err(Error::Sampler {
                min_eigenvalue,
                clip_mass: clipped_mass,
            });
        }
        let scales = eig.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self {
            n,
            scales,
            fft: Some(planner.plan_fft_forward(m)),
            min_eigenvalue,
            clipped_mass,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Two independent paths from one complex Gaussian draw.
    fn sample_pair(&self, rng: &mut ChaCha8Rng, buf: &mut [Complex64], first: &mut [f64], second: &mut [f64]) {
        match &self.fft {
            None => {
                first[0] = StandardNormal.sample(rng);
                second[0] = StandardNormal.sample(rng);
            }
            Some(fft) => {
                for (slot, &s) in buf.iter_mut().zip(&self.scales) {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    *slot = Complex64::new(s * re, s * im);
                }
                fft.process(buf);
                for k in 0..self.n {
                    first[k] = buf[k].re;
                    second[k] = buf[k].im;
                }
            }
        }
    }

    /// Calls `visit(path_index, path)` for every path; pairs `(2i, 2i+1)` share stream `i`.
    fn for_each_path<T, F>(&self, paths: usize, seed: u64, visit: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        let pairs = paths.div_ceil(2);
        let tasks = pairs.div_ceil(PATHS_PER_TASK / 2);
        let chunks: Vec<Vec<T>> = (0..tasks)
            .into_par_iter()
            .map(|task| {
                let lo = task * PATHS_PER_TASK / 2;
                let hi = ((task + 1) * PATHS_PER_TASK / 2).min(pairs);
                let mut buf = vec![Complex64::new(0.0, 0.0); self.scales.len()];
                let mut a = vec![0.0; self.n];
                let mut b = vec![0.0; self.n];
                let mut out = Vec::with_capacity(2 * (hi - lo));
                for pair in lo..hi {
                    let mut rng = stream(seed, pair as u64);
                    self.sample_pair(&mut rng, &mut buf, &mut a, &mut b);
                    out.push(visit(2 * pair, &a));
                    if 2 * pair + 1 < paths {
                        out.push(visit(2 * pair + 1, &b));
                    }
                }
                out
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }
}

/// Paths stored row-major, `paths × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub model_id: String,
    pub n: usize,
    pub seed: u64,
    pub data: Vec<f64>,
}

impl PathBatch {
    pub fn paths(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.data.len() / self.n
        }
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    /// One text header line followed by little-endian `f64` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "quadvar-paths v1 model={} n={} paths={} seed={}",
            self.model_id.replace(' ', "_"),
            self.n,
            self.paths(),
            self.seed
        )?;
        let mut bytes = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("quadvar-paths") || fields.next() != Some("v1") {
            return Err(Error::Parse(format!("not a path batch header: {:?}", header.trim_end())));
        }
        let mut model_id = None;
        let mut n = None;
        let mut paths = None;
        let mut seed = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
            let num = || value.parse::<u64>().map_err(|e| Error::Parse(format!("{key}: {e}")));
            match key {
                "model" => model_id = Some(value.to_string()),
                "n" => n = Some(num()? as usize),
                "paths" => paths = Some(num()? as usize),
                "seed" => seed = Some(num()?),
                _ => {}
            }
        }
        let (Some(model_id), Some(n), Some(paths), Some(seed)) = (model_id, n, paths, seed) else {
            return Err(Error::Parse("path batch header is missing fields".into()));
        };
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n * paths {
            return Err(Error::Parse(format!(
                "expected {} bytes of path data, found {}",
                8 * n * paths,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            model_id,
            n,
            seed,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Draws `cfg.paths` stationary Gaussian paths by circulant embedding.
pub fn sample_paths(cfg: &SamplerConfig) -> Result<PathBatch> {
    cfg.validate()?;
    let sampler = CirculantSampler::new(&cfg.model, cfg.n)?;
    let rows = with_workers(cfg.workers, || sampler.for_each_path(cfg.paths, cfg.seed, |_, p| p.to_vec()))?;
    Ok(PathBatch {
        model_id: cfg.model.id(),
        n: cfg.n,
        seed: cfg.seed,
        data: rows.concat(),
    })
}

/// `F_n` of one path given `v_n`.
pub fn normalized_quadratic_variation(path: &[f64], v_n: f64) -> f64 {
    let n = path.len() as f64;
    let s = path.iter().map(|x| x * x - 1.0).sum::<CompensatedSum>().value();
    s / (n.sqrt() * v_n.sqrt())
}

/// `F_n` for every path, streamed without storing the paths. Matches
/// `fn_statistics(sample_paths(cfg))` value for value.
pub fn sample_fn_values(cfg: &SamplerConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let v_n = CumulantEngine::new(&cfg.model, cfg.n).variance_vn(cfg.n);
    let sampler = CirculantSampler::new(&cfg.model, cfg.n)?;
    with_workers(cfg.workers, || {
        sampler.for_each_path(cfg.paths, cfg.seed, |_, p| normalized_quadratic_variation(p, v_n))
    })
}

/// Empirical summary of a sample with grouped-jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_kappa3: f64,
    pub se_kappa4: f64,
    /// Kolmogorov–Smirnov distance to the standard normal law.
    pub ks_distance: f64,
}

const JACKKNIFE_GROUPS: usize = 100;

#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    count: f64,
    s: [f64; 4],
}

impl PowerSums {
    fn add(&mut self, other: &PowerSums) {
        self.count += other.count;
        for p in 0..4 {
            self.s[p] += other.s[p];
        }
    }

    fn sub(&self, other: &PowerSums) -> PowerSums {
        let mut out = *self;
        out.count -= other.count;
        for p in 0..4 {
            out.s[p] -= other.s[p];
        }
        out
    }

    /// `(mean, variance, κ₃, κ₄)` with moments about `shift`.
    fn cumulants(&self, shift: f64) -> [f64; 4] {
        let n = self.count;
        let [a1, a2, a3, a4] = self.s.map(|s| s / n);
        let m2 = a2 - a1 * a1;
        let m3 = a3 - 3.0 * a1 * a2 + 2.0 * a1.powi(3);
        let m4 = a4 - 4.0 * a1 * a3 + 6.0 * a1 * a1 * a2 - 3.0 * a1.powi(4);
        [shift + a1, m2, m3, m4 - 3.0 * m2 * m2]
    }
}

fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn empirical_stats(values: &[f64]) -> Result<EmpiricalStats> {
    let count = values.len();
    if count < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let shift = values.iter().copied().sum::<CompensatedSum>().value() / count as f64;
    let groups = JACKKNIFE_GROUPS.min(count);
    let group_sums: Vec<PowerSums> = (0..groups)
        .map(|g| {
            let lo = g * count / groups;
            let hi = (g + 1) * count / groups;
            let mut acc = [CompensatedSum::new(); 4];
            for &x in &values[lo..hi] {
                let d = x - shift;
                let mut p = d;
                for slot in acc.iter_mut() {
                    slot.add(p);
                    p *= d;
                }
            }
            PowerSums {
                count: (hi - lo) as f64,
                s: acc.map(|a| a.value()),
            }
        })
        .collect();
    let mut total = PowerSums::default();
    for g in &group_sums {
        total.add(g);
    }
    let full = total.cumulants(shift);
    let mut se = [0.0; 4];
    if groups >= 2 {
        let reps: Vec<[f64; 4]> = group_sums.iter().map(|g| total.sub(g).cumulants(shift)).collect();
        let gf = groups as f64;
        for p in 0..4 {
            let mean = reps.iter().map(|r| r[p]).sum::<f64>() / gf;
            let ss: f64 = reps.iter().map(|r| (r[p] - mean).powi(2)).sum();
            se[p] = ((gf - 1.0) / gf * ss).sqrt();
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = count as f64;
    let ks_distance = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = standard_normal_cdf(x);
            ((i + 1) as f64 / nf - c).max(c - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(EmpiricalStats {
        samples: count,
        mean: full[0],
        variance: full[1],
        kappa3: full[2],
        kappa4: full[3],
        se_mean: se[0],
        se_variance: se[1],
        se_kappa3: se[2],
        se_kappa4: se[3],
        ks_distance,
    })
}

/// Statistics of `F_n` over a stored batch.
pub fn fn_statistics(batch: &PathBatch, model: &CovarianceModel, n: usize) -> Result<EmpiricalStats> {
    if batch.n != n {
        return Err(Error::domain(format!("batch has paths of length {}, expected {n}", batch.n)));
    }
    let v_n = CumulantEngine::new(model, n).variance_vn(n);
    let values: Vec<f64> = batch.iter().map(|p| normalized_quadratic_variation(p, v_n)).collect();
    empirical_stats(&values)
}

/// `(e^{iz} − 1)/(iz)` as `(re, im)`, with `g(0) = 1`.
pub fn increment_transform(z: f64) -> (f64, f64) {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        // 1 + iz/2 − z²/6 − iz³/24 + z⁴/120 + iz⁵/720
        let re = 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
        let im = z / 2.0 - z * z2 / 24.0 + z * z2 * z2 / 720.0;
        (re, im)
    } else {
        (z.sin() / z, 2.0 * (0.5 * z).sin().powi(2) / z)
    }
}

/// Nodes and weights on `(0, ∞)` for a given number of positive nodes.
///
/// Two Gauss panels in `u` on `[0, 1]` with `x = u^{1/γ}` (so that
/// `sqrt(w) |x|^{1/2−H}` is smooth), then 8-node panels of width `2π`.
fn rosenblatt_grid(hurst: f64, half_size: usize) -> Vec<(f64, f64)> {
    let gamma_exp = 2.0 - 2.0 * hurst;
    let order = 8;
    let rule = GaussLegendre::new(order);
    let mut out = Vec::with_capacity(half_size);
    for panel in 0..2 {
        for (u, w) in rule.on(panel as f64 / 2.0, (panel + 1) as f64 / 2.0) {
            let x = u.powf(1.0 / gamma_exp);
            out.push((x, w * x / (gamma_exp * u)));
        }
    }
    let width = 2.0 * PI;
    let mut left = 1.0;
    while out.len() < half_size {
        let nodes = (half_size - out.len()).min(order);
        let panel_rule = if nodes == order { rule.clone() } else { GaussLegendre::new(nodes) };
        let right = left + width * nodes as f64 / order as f64;
        out.extend(panel_rule.on(left, right));
        left = right;
    }
    out
}

/// Finite-dimensional approximation of `∬ f(x,y) g(x+y) W(dx) W(dy)` with
/// `f(x, y) = |xy|^{1/2−H} / sqrt(K'_eff)` and `g(z) = (e^{iz} − 1)/(iz)`.
///
/// The white noise is discretized on a symmetric frequency grid as
/// `W(x_a) = sqrt(w_a / 4π) (ξ_a ± i η_a)`, which turns the double integral into a
/// real quadratic form in `(ξ, η)` with spectrum `λ`. The part of the unit
/// variance not resolved by the grid is carried by an independent Gaussian term.
#[derive(Debug, Clone, Serialize)]
pub struct RosenblattApproximant {
    pub hurst: f64,
    /// Number of positive frequency nodes.
    pub half_size: usize,
    /// Symmetric nodes, ascending.
    pub x_grid: Vec<f64>,
    pub weights: Vec<f64>,
    /// Eigenvalues of the realified quadratic form.
    pub eigenvalues: Vec<f64>,
    /// Variance of the independent Gaussian component.
    pub gaussian_variance: f64,
    /// `2 Σ λ²` before completion.
    pub captured_variance: f64,
    /// Kernel prefactor used, `1 / sqrt(K'_eff)`.
    pub prefactor: f64,
    /// `prefactor / (1 / sqrt(K'_H))` for the closed-form constant.
    pub prefactor_ratio: f64,
    #[serde(skip)]
    kernel: Vec<Complex64>,
    #[serde(skip)]
    realified: Vec<f64>,
}

impl RosenblattApproximant {
    pub fn variance(&self) -> f64 {
        2.0 * self.eigenvalues.iter().map(|l| l * l).sum::<CompensatedSum>().value() + self.gaussian_variance
    }

    /// `κ_p = 2^{p−1}(p−1)! Σ λᵖ` for `p ≥ 3`, `κ₂ = 1`.
    pub fn cumulant(&self, p: u32) -> f64 {
        assert!(p >= 2, "cumulants of order >= 2");
        if p == 2 {
            return self.variance();
        }
        let factor = 2f64.powi(p as i32 - 1) * (1..p).product::<u32>() as f64;
        factor * self.eigenvalues.iter().map(|l| l.powi(p as i32)).sum::<CompensatedSum>().value()
    }

    pub fn kappa3(&self) -> f64 {
        self.cumulant(3)
    }

    pub fn kappa4(&self) -> f64 {
        self.cumulant(4)
    }

    /// Complex kernel entry at grid indices `(a, b)`.
    pub fn kernel(&self, a: usize, b: usize) -> Complex64 {
        self.kernel[a * self.x_grid.len() + b]
    }

    /// `K(−x, −y) = conj K(x, y)` bit for bit on the whole grid.
    pub fn hermitian_even(&self) -> bool {
        let m = self.x_grid.len();
        (0..m).all(|a| (0..m).all(|b| self.kernel(m - 1 - a, m - 1 - b) == self.kernel(a, b).conj()))
    }

    /// The realified symmetric matrix acting on `(ξ_1..ξ_M, η_1..η_M)`.
    pub fn realified(&self) -> DMatrix<f64> {
        let d = 2 * self.half_size;
        DMatrix::from_row_slice(d, d, &self.realified)
    }

    /// Draws `count` samples; sample `i` uses generator stream `i`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let lambdas: Vec<f64> = self.eigenvalues.clone();
        let gauss = self.gaussian_variance.sqrt();
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let mut acc = 0.0;
                for &l in &lambdas {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc += l * (z * z - 1.0);
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                acc + gauss * z
            })
            .collect()
    }
}

pub fn build_rosenblatt(hurst: f64, half_size: usize, consts: &AsymptoticConstants) -> Result<RosenblattApproximant> {
    if !(hurst > 0.75 && hurst < 1.0) {
        return Err(Error::domain(format!("second-chaos limit needs H in (3/4, 1), got {hurst}")));
    }
    if half_size < 16 {
        return Err(Error::domain(format!("grid half-size must be at least 16, got {half_size}")));
    }
    if consts.hurst != hurst {
        return Err(Error::domain("asymptotic constants were computed for a different H"));
    }
    let k_eff = consts
        .k_h_prime_effective
        .ok_or_else(|| Error::Regime("effective variance constant undefined".into()))?;
    let k_closed = consts
        .k_h_prime
        .ok_or_else(|| Error::Regime("closed-form variance constant undefined".into()))?;
    let prefactor = 1.0 / k_eff.sqrt();

    let positive = rosenblatt_grid(hurst, half_size);
    let m = half_size;
    let mut x_grid = Vec::with_capacity(2 * m);
    let mut weights = Vec::with_capacity(2 * m);
    for &(x, w) in positive.iter().rev() {
        x_grid.push(-x);
        weights.push(w);
    }
    for &(x, w) in &positive {
        x_grid.push(x);
        weights.push(w);
    }
    let d = 2 * m;
    let scale: Vec<f64> = weights.iter().map(|w| (w / (4.0 * PI)).sqrt()).collect();
    let exponent = 0.5 - hurst;
    let kernel: Vec<Complex64> = (0..d)
        .into_par_iter()
        .flat_map_iter(|a| {
            let (xa, sa) = (x_grid[a], scale[a]);
            let x_grid = &x_grid;
            let scale = &scale;
            (0..d).map(move |b| {
                let (xb, sb) = (x_grid[b], scale[b]);
                let f = prefactor * (xa.abs() * xb.abs()).powf(exponent);
                let (gr, gi) = increment_transform(xa + xb);
                Complex64::new(sa * sb * f * gr, sa * sb * f * gi)
            })
        })
        .collect();

    // Positive node j sits at grid index m + j, its mirror at m − 1 − j.
    // W(±x_j) = s_j (ξ_j ± i η_j); collect the coefficients of ξξ, ξη, ηξ, ηη.
    let mut q = vec![0.0f64; d * d];
    let mut max_abs: f64 = 0.0;
    let mut max_imag: f64 = 0.0;
    let idx = |j: usize, sign: f64| if sign > 0.0 { m + j } else { m - 1 - j };
    for a in 0..m {
        for b in 0..m {
            let mut xx = Complex64::new(0.0, 0.0);
            let mut xy = Complex64::new(0.0, 0.0);
            let mut yx = Complex64::new(0.0, 0.0);
            let mut yy = Complex64::new(0.0, 0.0);
            for sa in [1.0, -1.0] {
                for sb in [1.0, -1.0] {
                    let k = kernel[idx(a, sa) * d + idx(b, sb)];
                    xx += k;
                    xy += k * Complex64::new(0.0, sb);
                    yx += k * Complex64::new(0.0, sa);
                    yy += k * (-sa * sb);
                }
            }
            for (row, col, z) in [(a, b, xx), (a, m + b, xy), (m + a, b, yx), (m + a, m + b, yy)] {
                q[row * d + col] = z.re;
                max_abs = max_abs.max(z.re.abs());
                max_imag = max_imag.max(z.im.abs());
            }
        }
    }
    if max_imag > 1e-12 * max_abs.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "realified kernel has imaginary residue {max_imag:.3e}"
        )));
    }
    let mut asym: f64 = 0.0;
    for r in 0..d {
        for c in (r + 1)..d {
            asym = asym.max((q[r * d + c] - q[c * d + r]).abs());
            let s = 0.5 * (q[r * d + c] + q[c * d + r]);
            q[r * d + c] = s;
            q[c * d + r] = s;
        }
    }
    if asym > 1e-12 * max_abs.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!("realified kernel is not symmetric ({asym:.3e})")));
    }

    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &q));
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let captured_variance = 2.0 * eigenvalues.iter().map(|l| l * l).sum::<CompensatedSum>().value();
    let gaussian_variance = if captured_variance <= 1.0 {
        1.0 - captured_variance
    } else {
        // The grid over-resolves the variance; fall back to rescaling the form.
        let s = captured_variance.sqrt().recip();
        for l in eigenvalues.iter_mut() {
            *l *= s;
        }
        0.0
    };
    Ok(RosenblattApproximant {
        hurst,
        half_size,
        x_grid,
        weights,
        eigenvalues,
        gaussian_variance,
        captured_variance,
        prefactor,
        prefactor_ratio: prefactor * k_closed.sqrt(),
        kernel,
        realified: q,
    })
}

/// Convenience: constants computed with the default quadrature.
pub fn build_rosenblatt_default(hurst: f64, half_size: usize) -> Result<RosenblattApproximant> {
    let consts = AsymptoticConstants::compute(hurst, &QuadratureConfig::default())?;
    build_rosenblatt(hurst, half_size, &consts)
}

pub fn sample_rosenblatt(approx: &RosenblattApproximant, count: usize, seed: u64) -> Vec<f64> {
    approx.sample(count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_transform_limits() {
        assert_eq!(increment_transform(0.0), (1.0, 0.0));
        for z in [1e-4, 9.99e-4, 1.001e-3, 0.5, 3.0, -2.0] {
            let (re, im) = increment_transform(z);
            // (e^{iz} − 1)/(iz) written without cancellation.
            let (er, ei) = (z.sin() / z, (1.0 - z.cos()) / z);
            let ei_stable = 2.0 * (0.5 * z).sin().powi(2) / z;
            assert!((re - er).abs() < 1e-15 && (im - ei_stable).abs() < 1e-15 * ei_stable.abs().max(1e-3), "z={z}");
            assert!((im - ei).abs() < 1e-9);
            let (rm, imm) = increment_transform(-z);
            assert_eq!((rm, imm), (re, -im));
        }
    }

    #[test]
    fn all_zero_paths() {
        let n = 16;
        let model = CovarianceModel::fgn(0.7).unwrap();
        let v_n = CumulantEngine::new(&model, n).variance_vn(n);
        let f = normalized_quadratic_variation(&vec![0.0; n], v_n);
        assert_eq!(f, -(n as f64).sqrt() / v_n.sqrt());
    }

    #[test]
    fn path_batch_roundtrip() {
        let cfg = SamplerConfig::new(CovarianceModel::fgn(0.6).unwrap(), 8, 5, 3);
        let batch = sample_paths(&cfg).unwrap();
        assert_eq!(batch.paths(), 5);
        let mut bytes = Vec::new();
        batch.write_to(&mut bytes).unwrap();
        let back = PathBatch::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, batch);
        assert!(PathBatch::read_from(&b"garbage\n"[..]).is_err());
        bytes.pop();
        assert!(PathBatch::read_from(bytes.as_slice()).is_err());
    }

    #[test]
    fn streamed_values_match_stored_paths() {
        let model = CovarianceModel::fgn(0.8).unwrap();
        let cfg = SamplerConfig::new(model.clone(), 33, 301, 9);
        let batch = sample_paths(&cfg).unwrap();
        let v_n = CumulantEngine::new(&model, 33).variance_vn(33);
        let stored: Vec<f64> = batch.iter().map(|p| normalized_quadratic_variation(p, v_n)).collect();
        assert_eq!(stored, sample_fn_values(&cfg).unwrap());
    }

    #[test]
    fn rejects_bad_rosenblatt_inputs() {
        let consts = AsymptoticConstants::compute(0.85, &QuadratureConfig::default()).unwrap();
        assert!(build_rosenblatt(0.7, 64, &consts).is_err());
        assert!(build_rosenblatt(0.85, 8, &consts).is_err());
        assert!(build_rosenblatt(0.9, 64, &consts).is_err());
    }

    #[test]
    fn grid_is_symmetric_and_avoids_zero() {
        let a = build_rosenblatt_default(0.85, 40).unwrap();
        assert_eq!(a.x_grid.len(), 80);
        assert!(a.x_grid.iter().all(|&x| x != 0.0));
        for i in 0..80 {
            assert_eq!(a.x_grid[i], -a.x_grid[79 - i]);
        }
        assert!(a.hermitian_even());
        assert!((a.variance() - 1.0).abs() < 1e-12);
    }
}
