//! Manufactured problems, error norms, rate prediction and convergence studies.

mod convergence;
mod problems;
mod rates;
mod stability;
pub mod trig;

pub use convergence::{
    error_norms, mask_label, observed_rate, one_sided_columns, run_convergence, weak_rhs, ConvergenceReport, LevelResult,
    StudyOptions, COLUMNS, DEFAULT_PERTURB, DEFAULT_TOLERANCE,
};
pub use problems::{builtin_problem, proxy_to_lex, ManufacturedSolution, PerturbedProblem, BUILTIN_PROBLEMS};
pub use rates::{effective_rates, predict_rates, rate_table};
pub use stability::{fit_slope, run_infsup, InfsupReport, DEFAULT_SLOPE_TOLERANCE};
