use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingSum {
    pub value: f64,
    /// Last change of the accelerated estimate.
    pub increment: f64,
    pub terms: usize,
}

/// Sums a series whose terms eventually alternate in sign with smoothly
/// decreasing magnitude, using Euler averaging of the partial sums.
///
/// The first `skip` partial sums are taken as they are; averaging starts from
/// there. Stops once two consecutive estimates differ by less than `tol`.
pub fn sum_alternating<F: FnMut(usize) -> f64>(
    mut term: F,
    skip: usize,
    tol: f64,
    max_terms: usize,
) -> Result<AlternatingSum> {
    let mut partial = 0.0;
    let mut sums = Vec::new();
    for j in 0..=skip {
        partial += term(j);
        if j == skip {
            sums.push(partial);
        }
    }
    let mut previous = f64::NAN;
    let mut last_increment = f64::INFINITY;
    let mut scratch = Vec::new();
    for j in (skip + 1)..max_terms {
        partial += term(j);
        sums.push(partial);
        scratch.clear();
        scratch.extend_from_slice(&sums);
        while scratch.len() > 1 {
            for i in 0..scratch.len() - 1 {
                scratch[i] = 0.5 * (scratch[i] + scratch[i + 1]);
            }
            scratch.pop();
        }
        let estimate = scratch[0];
        let increment = (estimate - previous).abs();
        if increment < tol && last_increment < tol {
            return Ok(AlternatingSum {
                value: estimate,
                increment,
                terms: j + 1,
            });
        }
        previous = estimate;
        last_increment = increment;
    }
    Err(Error::Convergence {
        what: "alternating series acceleration",
        achieved: last_increment,
        wanted: tol,
    })
}
