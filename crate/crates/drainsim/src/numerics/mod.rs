//! Self-contained numerical kernels shared by the rest of the crate:
//! shape-preserving interpolation, adaptive RK4 stepping, reproducible RNG
//! streams, truncated-normal sampling, exponential-relaxation fitting, and
//! nearest-rank quantiles.

pub mod fit;
pub mod interp;
pub mod ode;
pub mod quantile;
pub mod rng;
pub mod sample;

pub use fit::{fit_exponential_relaxation, RelaxationFit};
pub use interp::MonotoneInterpolant;
pub use ode::{rk4_adaptive_step, rk4_step};
pub use quantile::empirical_quantile;
pub use rng::RngStream;
pub use sample::{exponential_from_uniform, sample_truncated_normal};

/// Errors from the numerical kernels.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("knot abscissae must be strictly increasing")]
    NonMonotoneAbscissa,
    #[error("at least {min} knots required, got {got}")]
    TooFewKnots { min: usize, got: usize },
    #[error("step size underflow at t = {t}: dynamics too stiff or non-finite")]
    StepUnderflow { t: f64 },
    #[error("degenerate truncation bounds: lo >= hi")]
    DegenerateBounds,
    #[error("relaxation fit diverged for all seeds")]
    FitDiverged,
    #[error("at least {min} samples required, got {got}")]
    InsufficientSamples { min: usize, got: usize },
    #[error("empty sample set")]
    EmptySamples,
}
