//! Exact cumulants, convergence-rate regimes and limit-law approximations for
//! normalized quadratic variations of stationary Gaussian sequences.
//!
//! The central object is `F_n = n^{-1/2} Σ_{k<n} (X_k² − 1) / sqrt(v_n)` for a
//! centered stationary Gaussian sequence with covariance `ρ`, where `v_n` is
//! chosen so that `Var F_n = 1`.

pub mod covariance;
pub mod cumulants;
mod error;
pub mod numeric;
pub mod rates;
pub mod simulate;
pub mod spectral;
pub mod tvbound;

pub use covariance::{CovarianceModel, ModelKind, ValidationReport};
pub use cumulants::{CumulantEngine, CumulantReport};
pub use error::{Error, Result};
pub use rates::{Exponent, RateRegime, RegimeCase};
pub use simulate::{PathBatch, RosenblattApproximant, SamplerConfig};
pub use spectral::{AsymptoticConstants, QuadratureConfig, SpectralDensity, SpectralKind};
pub use tvbound::{TvBoundConfig, TvTerms};
