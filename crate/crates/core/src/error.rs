use thiserror::Error;

use crate::geometry::Axis;

/// Errors raised by the kinematic model, the estimators and the file layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A square root or discriminant went negative: the pose or joint set is unreachable.
    #[error("unreachable configuration: {0}")]
    Domain(String),

    /// A joint value lies outside the software limits.
    #[error("joint limit violated on axis {axis}: {value:.6} mm outside [{min:.6}, {max:.6}]")]
    Limit {
        axis: Axis,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A denominator vanished, or no root of the direct kinematics lies on the assembly branch.
    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("design matrix is rank deficient (rank {rank} < 3)")]
    Rank { rank: usize },

    #[error("solver did not converge after {iterations} iterations (last step {last_step:e} mm)")]
    Convergence { iterations: usize, last_step: f64 },

    #[error("{failed} of {total} Monte-Carlo runs failed to identify")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of the numerics, as opposed to bad user input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
