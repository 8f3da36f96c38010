use super::fit::{fit_adaptive, fit_basic, FitConfig, FitResult, Objective};
use super::importance::{adaptive_residual_cap, is_reward_estimates};
use crate::coeffs::extrapolate;
use crate::error::{invalid, Error, Result};
use crate::mdp::{
    episode_seed, Dataset, EpisodeSource, Policy, PolicyClass, ProfileKind, RewardProfile,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Value prediction for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    /// `None` when the horizon is shorter than `3d` and the value is the
    /// plain importance-sampling sum.
    pub fit: Option<FitResult>,
    pub estimates: RewardProfile,
    pub predicted: RewardProfile,
    /// The adaptive fit found no feasible point and the basic fit was used.
    pub infeasible_fallback: bool,
}

fn fit_with_fallback(estimates: &[f64], config: &FitConfig) -> Result<(FitResult, bool)> {
    match config.objective {
        Objective::BasicMinimaxResidual => Ok((fit_basic(estimates, config)?, false)),
        Objective::AdaptiveGeometricProduct => match fit_adaptive(estimates, config) {
            Ok(r) => Ok((r, false)),
            Err(Error::Infeasible { .. }) => Ok((fit_basic(estimates, config)?, true)),
            Err(e) => Err(e),
        },
    }
}

/// Predicts the value over `horizon` steps from reward estimates of the
/// first `3d` steps (or of all steps when `horizon < 3d`).
pub fn predict_value(
    estimates: &[f64],
    horizon: usize,
    config: &FitConfig,
) -> Result<ValueEstimate> {
    let d = config.d;
    if d == 0 {
        return Err(invalid("rank d must be at least 1"));
    }
    if horizon < d {
        return Err(invalid(format!(
            "horizon {horizon} is shorter than rank {d}"
        )));
    }
    let est = RewardProfile::new(ProfileKind::Estimated, estimates.to_vec());
    if 3 * d > horizon {
        if estimates.len() != horizon {
            return Err(invalid(format!(
                "need {horizon} estimates for a horizon shorter than 3d, got {}",
                estimates.len()
            )));
        }
        return Ok(ValueEstimate {
            value: est.total(),
            fit: None,
            predicted: RewardProfile::new(ProfileKind::Predicted, estimates.to_vec()),
            estimates: est,
            infeasible_fallback: false,
        });
    }
    let (fit, fallback) = fit_with_fallback(estimates, config)?;
    let predicted = extrapolate(fit.lambda_hat.values(), &estimates[..d], horizon)?;
    Ok(ValueEstimate {
        value: predicted.total(),
        fit: Some(fit),
        estimates: est,
        predicted,
        infeasible_fallback: fallback,
    })
}

/// Importance-sampling estimates followed by spectrum fit and extrapolation.
pub fn estimate_policy_value(
    dataset: &Dataset,
    policy: &Policy,
    horizon: usize,
    config: &FitConfig,
) -> Result<ValueEstimate> {
    let steps = (3 * config.d).min(horizon);
    let est = is_reward_estimates(dataset, policy, steps)?;
    predict_value(&est.values, horizon, config)
}

/// Mean return of `m` fresh episodes under `policy`.
pub fn monte_carlo_value(
    source: &dyn EpisodeSource,
    policy: &Policy,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if m == 0 {
        return Err(invalid("monte-carlo evaluation needs at least one episode"));
    }
    policy.validate(source.num_observations(), source.num_actions())?;
    let returns: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| source.rollout(policy, episode_seed(seed, i)).total_reward())
        .collect();
    Ok(returns.iter().sum::<f64>() / m as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Rank used by fixed-rank searches.
    pub rank: usize,
    pub horizon: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub fit_seed: u64,
    /// Failure probability entering the adaptive residual cap.
    pub delta: f64,
    /// Overrides the computed adaptive residual cap.
    pub residual_cap: Option<f64>,
    /// Fit objective used inside the rank-adaptive search.
    pub inner: Objective,
}

impl SearchConfig {
    pub fn new(rank: usize, horizon: usize) -> Self {
        Self {
            rank,
            horizon,
            restarts: 16,
            iterations: 400,
            fit_seed: 0,
            delta: 0.1,
            residual_cap: None,
            inner: Objective::BasicMinimaxResidual,
        }
    }

    fn fit_config(
        &self,
        d: usize,
        mode: Objective,
        dataset: &Dataset,
        class_size: usize,
    ) -> FitConfig {
        let mut cfg = FitConfig::basic(d);
        cfg.restarts = self.restarts;
        cfg.iterations = self.iterations;
        cfg.seed = self.fit_seed;
        if mode == Objective::AdaptiveGeometricProduct {
            cfg.objective = mode;
            cfg.horizon = self.horizon;
            cfg.residual_cap = self.residual_cap.unwrap_or_else(|| {
                adaptive_residual_cap(
                    dataset.num_actions(),
                    d,
                    class_size,
                    self.delta,
                    dataset.len(),
                )
            });
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEstimate {
    pub policy_index: usize,
    pub value: f64,
    pub fit: Option<FitResult>,
    pub infeasible_fallback: bool,
}

/// Fresh Monte-Carlo evaluation of the policy picked at one candidate rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCandidate {
    pub rank: usize,
    pub policy_index: usize,
    pub evaluated_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub strategy: String,
    pub chosen_policy_index: usize,
    pub estimates: Vec<PolicyEstimate>,
    pub dataset_seed: u64,
    pub rank: usize,
    pub rank_candidates: Vec<RankCandidate>,
}

impl SearchReport {
    pub fn estimated_values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn any_infeasible_fallback(&self) -> bool {
        self.estimates.iter().any(|e| e.infeasible_fallback)
    }
}

/// First index attaining the maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn check_class(class: &PolicyClass) -> Result<()> {
    if class.is_empty() {
        return Err(invalid("policy class is empty"));
    }
    if let Some(i) = class.iter().position(|p| !p.is_deterministic()) {
        return Err(invalid(format!("policy {i} is not deterministic")));
    }
    Ok(())
}

/// Estimates every policy in `class` from the same dataset and returns the
/// one with the largest predicted value.
pub fn policy_search(
    dataset: &Dataset,
    class: &PolicyClass,
    mode: Objective,
    config: &SearchConfig,
) -> Result<SearchReport> {
    check_class(class)?;
    let d = config.rank;
    let fit_cfg = config.fit_config(d, mode, dataset, class.len());
    let estimates: Vec<PolicyEstimate> = class
        .policies()
        .par_iter()
        .enumerate()
        .map(|(i, policy)| {
            let est = estimate_policy_value(dataset, policy, config.horizon, &fit_cfg)?;
            Ok(PolicyEstimate {
                policy_index: i,
                value: est.value,
                fit: est.fit,
                infeasible_fallback: est.infeasible_fallback,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SearchReport {
        strategy: mode.name().to_string(),
        chosen_policy_index: argmax(estimates.iter().map(|e| e.value)),
        estimates,
        dataset_seed: dataset.seed(),
        rank: d,
        rank_candidates: Vec::new(),
    })
}

const EVAL_SEED_SALT: u64 = 0x5EED_E7A1_0000_0001;

/// Search without a known rank: one shared uniform dataset of `n/2`
/// episodes feeds a search at every rank `d in 1..=H`, then each winner is
/// scored on `floor(n / 2H)` fresh episodes.
pub fn rank_adaptive_search(
    source: &dyn EpisodeSource,
    class: &PolicyClass,
    n: usize,
    seed: u64,
    config: &SearchConfig,
) -> Result<SearchReport> {
    check_class(class)?;
    class.validate(source.num_observations(), source.num_actions())?;
    let horizon = source.horizon();
    if n < 4 * horizon {
        return Err(invalid(format!(
            "rank-adaptive search needs n >= 4H = {}, got {n}",
            4 * horizon
        )));
    }
    let dataset = source.uniform_dataset(n / 2, seed)?;
    let eval_episodes = n / (2 * horizon);
    let cfg = SearchConfig {
        horizon,
        ..config.clone()
    };
    let mut reports = Vec::with_capacity(horizon);
    let mut candidates = Vec::with_capacity(horizon);
    for d in 1..=horizon {
        let report = policy_search(
            &dataset,
            class,
            config.inner,
            &SearchConfig {
                rank: d,
                ..cfg.clone()
            },
        )?;
        let idx = report.chosen_policy_index;
        let value = monte_carlo_value(
            source,
            class.get(idx),
            eval_episodes,
            episode_seed(seed ^ EVAL_SEED_SALT, d as u64),
        )?;
        candidates.push(RankCandidate {
            rank: d,
            policy_index: idx,
            evaluated_value: value,
        });
        reports.push(report);
    }
    let best = argmax(candidates.iter().map(|c| c.evaluated_value));
    let chosen = reports.swap_remove(best);
    Ok(SearchReport {
        strategy: "rank_adaptive".to_string(),
        chosen_policy_index: chosen.chosen_policy_index,
        estimates: chosen.estimates,
        dataset_seed: dataset.seed(),
        rank: best + 1,
        rank_candidates: candidates,
    })
}

/// Data a search strategy may draw on.
#[derive(Clone, Copy)]
pub enum SearchData<'a> {
    Fixed(&'a Dataset),
    Live {
        source: &'a dyn EpisodeSource,
        n: usize,
        seed: u64,
    },
}

/// A named policy-search procedure.
pub trait SearchStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn search(
        &self,
        data: SearchData<'_>,
        class: &PolicyClass,
        config: &SearchConfig,
    ) -> Result<SearchReport>;
}

struct FixedRankSearch(Objective);

impl SearchStrategy for FixedRankSearch {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn search(
        &self,
        data: SearchData<'_>,
        class: &PolicyClass,
        config: &SearchConfig,
    ) -> Result<SearchReport> {
        match data {
            SearchData::Fixed(ds) => policy_search(ds, class, self.0, config),
            SearchData::Live { source, n, seed } => {
                let ds = source.uniform_dataset(n, seed)?;
                policy_search(&ds, class, self.0, config)
            }
        }
    }
}

struct RankAdaptiveSearch;

impl SearchStrategy for RankAdaptiveSearch {
    fn name(&self) -> &'static str {
        "rank_adaptive"
    }

    fn search(
        &self,
        data: SearchData<'_>,
        class: &PolicyClass,
        config: &SearchConfig,
    ) -> Result<SearchReport> {
        match data {
            SearchData::Live { source, n, seed } => {
                rank_adaptive_search(source, class, n, seed, config)
            }
            SearchData::Fixed(_) => Err(invalid("rank-adaptive search needs live sampling access")),
        }
    }
}

/// Search strategies selectable by name.
pub struct SearchRegistry {
    entries: Vec<Box<dyn SearchStrategy>>,
}

impl Default for SearchRegistry {
    fn default() -> Self {
        Self {
            entries: vec![
                Box::new(FixedRankSearch(Objective::BasicMinimaxResidual)),
                Box::new(FixedRankSearch(Objective::AdaptiveGeometricProduct)),
                Box::new(RankAdaptiveSearch),
            ],
        }
    }
}

impl SearchRegistry {
    pub fn register(&mut self, strategy: Box<dyn SearchStrategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SearchStrategy> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| {
                invalid(format!(
                    "unknown search strategy `{name}` (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportRecord {
    Policy {
        policy_index: usize,
        v_hat: f64,
        delta_hat: Option<f64>,
        /// (modulus, phase) pairs.
        lambda_hat: Vec<(f64, f64)>,
        infeasible_fallback: bool,
    },
    Candidate(RankCandidate),
    Summary {
        strategy: String,
        chosen_index: usize,
        rank: usize,
        dataset_seed: u64,
        wall_clock_secs: f64,
    },
}

/// One JSON record per policy, one per rank candidate, then a summary.
pub fn report_records(report: &SearchReport, wall_clock_secs: f64) -> Vec<ReportRecord> {
    let mut out: Vec<ReportRecord> = report
        .estimates
        .iter()
        .map(|e| ReportRecord::Policy {
            policy_index: e.policy_index,
            v_hat: e.value,
            delta_hat: e.fit.as_ref().map(|f| f.delta_hat),
            lambda_hat: e
                .fit
                .as_ref()
                .map(|f| {
                    f.lambda_hat
                        .values()
                        .iter()
                        .map(|z| (z.norm(), z.arg()))
                        .collect()
                })
                .unwrap_or_default(),
            infeasible_fallback: e.infeasible_fallback,
        })
        .collect();
    out.extend(
        report
            .rank_candidates
            .iter()
            .cloned()
            .map(ReportRecord::Candidate),
    );
    out.push(ReportRecord::Summary {
        strategy: report.strategy.clone(),
        chosen_index: report.chosen_policy_index,
        rank: report.rank,
        dataset_seed: report.dataset_seed,
        wall_clock_secs,
    });
    out
}

pub fn write_report_jsonl(report: &SearchReport, wall_clock_secs: f64) -> String {
    let mut s = String::new();
    for rec in report_records(report, wall_clock_secs) {
        s.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn parse_report_jsonl(text: &str) -> Result<Vec<ReportRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}
