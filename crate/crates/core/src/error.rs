use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the computation is defined.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// The requested formula does not apply to the given parameter regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// An iterative or adaptive numerical procedure did not reach its tolerance.
    #[error("{what} did not converge (achieved {achieved:.3e}, wanted {wanted:.3e})")]
    Convergence {
        what: &'static str,
        achieved: f64,
        wanted: f64,
    },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("resource limit: {0}")]
    Resource(String),

    /// Circulant embedding produced negative eigenvalues beyond the clipping allowance.
    #[error("circulant embedding failed: most negative eigenvalue {min_eigenvalue:.6e}, clipped mass {clip_mass:.3e}")]
    Sampler { min_eigenvalue: f64, clip_mass: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by a numerical procedure rather than by the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::Sampler { .. } | Error::Internal(_)
        )
    }
}
