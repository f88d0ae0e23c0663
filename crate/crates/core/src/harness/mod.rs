//! Episode sampling, evaluation with confidence intervals, reports and split
//! construction.

mod episode;
mod eval;
mod report;
mod splits;
mod stats;

pub use episode::{sample_episode, split_supports, Episode};
pub use eval::{episode_outcomes, evaluate, threads_from_env, EvalConfig, THREADS_ENV};
pub use report::{EvalReport, ReportFormat};
pub use splits::{build_splits, SplitRequest};
pub use stats::mean_ci95;
