//! Importance-sampling reward estimation, spectrum fitting, value
//! prediction and policy search.

mod fit;
mod importance;
mod search;

pub use fit::{
    coefficient_residual, fit_adaptive, fit_basic, geometric_product, geometric_sum, max_residual,
    AdaptiveFitter, BasicFitter, FitConfig, FitResult, FitterRegistry, Objective, SpectrumFitter,
};
pub use importance::{adaptive_residual_cap, is_error_bound, is_reward_estimates};
pub use search::{
    estimate_policy_value, monte_carlo_value, parse_report_jsonl, policy_search, predict_value,
    rank_adaptive_search, report_records, write_report_jsonl, PolicyEstimate, RankCandidate,
    ReportRecord, SearchConfig, SearchData, SearchRegistry, SearchReport, SearchStrategy,
    ValueEstimate,
};
