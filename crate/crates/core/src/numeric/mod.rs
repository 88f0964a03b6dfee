//! Numerical building blocks shared by the modelling modules.

mod adaptive;
mod alternating;
mod fft;
mod fit;
mod gauss;
mod sum;

pub use adaptive::{integrate, integrate_with_breaks, Quadrature, Tolerance};
pub use alternating::{sum_alternating, AlternatingSum};
pub use fft::{autoconvolution, autoconvolution_direct};
pub use fit::{linear_fit, LinearFit};
pub use gauss::GaussLegendre;
pub use sum::{compensated_sum, CompensatedSum};
