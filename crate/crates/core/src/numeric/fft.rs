use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::sum::CompensatedSum;

/// `c[s] = Σ_{d=1}^{s-1} a[d] a[s-d]` for `s < a.len()`, with compensated sums.
pub fn autoconvolution_direct(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for s in 2..n {
        let mut acc = CompensatedSum::new();
        for d in 1..s {
            acc.add(a[d] * a[s - d]);
        }
        out[s] = acc.value();
    }
    out
}

/// Same as [`autoconvolution_direct`] through a zero-padded FFT.
pub fn autoconvolution(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let len = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for d in 1..n {
        buf[d] = Complex64::new(a[d], 0.0);
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = *z * *z;
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    let mut out: Vec<f64> = buf[..n].iter().map(|z| z.re * scale).collect();
    out[0] = 0.0;
    out[1] = 0.0;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..300).map(|k| 1.0 / (1.0 + k as f64).powf(0.4)).collect();
        let d = autoconvolution_direct(&a);
        let f = autoconvolution(&a);
        for s in 0..a.len() {
            assert!((d[s] - f[s]).abs() < 1e-12 * (1.0 + d[s].abs()), "s={s}");
        }
    }
}
