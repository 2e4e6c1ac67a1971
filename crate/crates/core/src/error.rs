use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin quantum number j = {0} (need 2j a positive integer)")]
    InvalidSpin(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("drive mismatch: expected a {expected} drive")]
    WrongDrive { expected: &'static str },
    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("outside the regular regime: {0}")]
    OutsideRegularRegime(String),
    #[error("singular diagonal argument x = {0} in the kicked effective Hamiltonian")]
    SingularArgument(f64),
    #[error("landscape singularity at K·Z = {0}")]
    LandscapeSingularity(f64),
    #[error("point ({q}, {p}) outside the Bloch disc")]
    OutsideDomain { q: f64, p: f64 },
    #[error("stereographic map is singular at the south pole")]
    SouthPole,
    #[error("no saddle point present")]
    NoSaddle,
    #[error("no isocontour at energy {0}")]
    EmptyContour(f64),
    #[error("polylogarithm Li_{order} diverges at theta = 0")]
    Divergence { order: u32 },
    #[error("missing Hessian data for critical point {0}")]
    MissingHessian(usize),
    #[error("quantum kernel undefined: {0}")]
    Kernel(String),
    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal a numerically invalid request rather than
    /// malformed input or I/O trouble.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotUnitary(_)
                | Error::NotHermitian(_)
                | Error::Eigen(_)
                | Error::OutsideRegularRegime(_)
                | Error::SingularArgument(_)
                | Error::LandscapeSingularity(_)
                | Error::Divergence { .. }
                | Error::Kernel(_)
                | Error::Linalg(_)
        )
    }
}
