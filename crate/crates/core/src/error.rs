use thiserror::Error;

/// Errors raised by the navigation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The closed-loop state matrix is not Hurwitz.
    #[error("closed-loop matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },

    /// Two eigenvalues of the Lyapunov operator sum to (numerically) zero.
    #[error("Lyapunov operator is singular: eigenvalues {0} and {1} sum to zero")]
    EigenvaluePairing(String, String),

    /// The exact peak search could not certify that no later peak exists.
    #[error("output peak not certified within {horizon:.3} s horizon")]
    BoundUncertain { horizon: f64 },

    /// A numerical routine failed to converge or produced an invalid value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The simulated state became non-finite.
    #[error("numerical blow-up at t = {t:.4} s")]
    NumericalBlowup { t: f64 },

    /// A* found no path between start and goal.
    #[error("planning failure: {0}")]
    Planning(String),

    /// The lidar origin lies inside an obstacle.
    #[error("sensor origin ({0:.3}, {1:.3}) is not in free space")]
    SensorPose(f64, f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
