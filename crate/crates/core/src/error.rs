use crate::bcd::SolveState;
use crate::cap::CapSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("harvester saturated: {requested} W has no preimage below saturation {saturation} W")]
    Saturation { requested: f64, saturation: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("access-probability solver did not converge in {} iterations", .0.iterations)]
    CapNotConverged(Box<CapSolution>),

    #[error("block-coordinate descent did not converge in {} iterations", .0.iterations)]
    BcdNotConverged(Box<SolveState>),

    #[error("every trial was infeasible for every algorithm")]
    AllInfeasible,

    #[error("empty report set")]
    EmptyReports,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    /// True for outcomes that mean "this scheme cannot serve this channel
    /// draw" rather than a programming or input error.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::Saturation { .. } | Error::BcdNotConverged(_)
        )
    }
}
