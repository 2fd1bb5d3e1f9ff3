use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("speed must be positive and finite, got {0}")]
    NonPositiveSpeed(f64),
    #[error("switching rate must be non-negative and finite, got {0}")]
    NegativeRate(f64),
    #[error("speed {v} is not below the light speed {c}")]
    SuperluminalSpeed { v: f64, c: f64 },
    #[error("light speed is required for relativistic operations")]
    MissingLightSpeed,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time {t} outside [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },
    #[error("grid [{x_min}, {x_max}] does not contain the reachable interval [{lo}, {hi}]")]
    GridTooSmall {
        x_min: f64,
        x_max: f64,
        lo: f64,
        hi: f64,
    },
    #[error("mass {lost} left the grid through the boundary (total {total})")]
    MassLeftGrid { lost: f64, total: f64 },
    #[error("need at least 3 uniformly spaced snapshots, got {0}")]
    InsufficientSnapshots(usize),
    #[error("moving-frame point (t'={t}, x'={x}) pulls back outside the stored lab solution")]
    DomainNotCovered { t: f64, x: f64 },
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by a grid or solve domain that is too small.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            Error::GridTooSmall { .. }
                | Error::MassLeftGrid { .. }
                | Error::InvalidGrid(_)
                | Error::TimeOutOfRange { .. }
                | Error::InsufficientSnapshots(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
