use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step size underflow at t={t} (h={h}); tolerances too tight or field too stiff")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("too many steps ({steps}) before reaching t={t_end}")]
    TooManySteps { steps: usize, t_end: f64 },

    #[error("no plane crossing within t_max={t_max}")]
    NoCrossing { t_max: f64 },

    #[error("shooting objective has no sign change on [{lo}, {hi}] (f(lo)={f_lo}, f(hi)={f_hi})")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("closure residual {residual:e} exceeds tolerance {tolerance:e}")]
    ClosureExceeded { residual: f64, tolerance: f64 },

    #[error("time step {dt} exceeds the eikonal stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value in the solution at step {step} (t={t})")]
    Instability { step: usize, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
