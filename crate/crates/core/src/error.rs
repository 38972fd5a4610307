use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("complex state is not the image of a real state (deviation {deviation:.3e})")]
    NotRealImage { deviation: f64 },

    #[error("state is off the orbit (Casimir residual {residual:.3e})")]
    OffOrbit { residual: f64 },

    #[error("matrix D is singular")]
    SingularD,

    #[error("force fields are dependent: {0}")]
    DependentFields(String),

    #[error("step size controller failed at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },

    #[error("pendulum family {0} is not admissible for a nonzero gyrostatic momentum")]
    InadmissibleFamily(&'static str),

    #[error("no branch q with |q^4 - 2Qq^2 + 1| below tolerance (best {residual:.3e})")]
    BranchFailure { residual: f64 },

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(&'static str),

    #[error("determinant of the multiplier system vanishes")]
    SingularDelta,

    #[error("spectral parameter must be nonzero")]
    ZeroKappa,

    #[error("curve parameter s must be nonzero")]
    SZero,

    #[error("grid too coarse on branch {branch} near s = {s}")]
    GridTooCoarse { branch: String, s: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad input rather than by a numerical procedure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::NotRealImage { .. }
                | Error::OffOrbit { .. }
                | Error::SingularD
                | Error::DependentFields(_)
                | Error::InadmissibleFamily(_)
                | Error::ZeroKappa
                | Error::SZero
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
