use crate::config::ExperimentConfig;
use crate::env::{EnvRegistry, Environment};
use anyhow::{Context, Result};
use arps_core::estimator::{RankCandidate, SearchConfig, SearchData, SearchRegistry};
use arps_core::lock::verify_lock_spectrum;
use arps_core::mdp::{
    episode_seed, exact_value, induced_transition, spectrum_of, DEFAULT_RANK_TOL,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

/// Outcome of one repetition, with oracle values from dynamic programming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub repetition: usize,
    pub seed: u64,
    pub strategy: String,
    pub rank: usize,
    pub chosen_policy: usize,
    /// Predicted value of the chosen policy.
    pub v_tilde: f64,
    /// Exact value of the chosen policy.
    pub exact_value: f64,
    pub best_policy: usize,
    pub best_value: f64,
    pub suboptimality: f64,
    pub estimated_values: Vec<f64>,
    pub exact_values: Vec<f64>,
    /// Predicted minus exact value, per policy.
    pub estimation_errors: Vec<f64>,
    pub infeasible_fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rank_candidates: Vec<RankCandidate>,
    pub wall_clock_secs: f64,
}

impl ResultRecord {
    /// Recomputes the suboptimality from the stored exact values.
    pub fn recomputed_suboptimality(&self) -> f64 {
        let best = self
            .exact_values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.exact_values[self.chosen_policy]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum OutputLine {
    Config { config: ExperimentConfig },
    Result(ResultRecord),
}

pub fn repetition_seed(seed: u64, repetition: usize) -> u64 {
    episode_seed(seed, repetition as u64)
}

fn run_one(cfg: &ExperimentConfig, envs: &EnvRegistry, repetition: usize) -> Result<ResultRecord> {
    let seed = repetition_seed(cfg.seed, repetition);
    let s = &cfg.search;
    let env = envs
        .generate(&cfg.env, s.class_size, episode_seed(seed, 0))
        .with_context(|| format!("generating environment for repetition {repetition}"))?;
    let horizon = env.mdp.horizon();
    let search_cfg = SearchConfig {
        rank: s.rank,
        horizon,
        restarts: s.restarts,
        iterations: s.iterations,
        fit_seed: episode_seed(seed, 3),
        delta: s.delta,
        residual_cap: s.residual_cap,
        inner: s.inner,
    };
    let strategies = SearchRegistry::default();
    let strategy = strategies.get(s.mode.strategy_name())?;
    let start = Instant::now();
    let report = strategy.search(
        SearchData::Live {
            source: &env.mdp,
            n: s.episodes,
            seed: episode_seed(seed, 2),
        },
        &env.class,
        &search_cfg,
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    let exact_values: Vec<f64> = env
        .class
        .policies()
        .par_iter()
        .map(|p| exact_value(&env.mdp, p))
        .collect();
    let estimated_values = report.estimated_values();
    let chosen = report.chosen_policy_index;
    let mut best_policy = 0;
    for (i, v) in exact_values.iter().enumerate() {
        if *v > exact_values[best_policy] {
            best_policy = i;
        }
    }
    Ok(ResultRecord {
        repetition,
        seed,
        strategy: report.strategy.clone(),
        rank: report.rank,
        chosen_policy: chosen,
        v_tilde: estimated_values[chosen],
        exact_value: exact_values[chosen],
        best_policy,
        best_value: exact_values[best_policy],
        suboptimality: exact_values[best_policy] - exact_values[chosen],
        estimation_errors: estimated_values
            .iter()
            .zip(&exact_values)
            .map(|(e, v)| e - v)
            .collect(),
        estimated_values,
        exact_values,
        infeasible_fallback: report.any_infeasible_fallback(),
        rank_candidates: report.rank_candidates,
        wall_clock_secs: if cfg.timing { elapsed } else { 0.0 },
    })
}

/// Runs every repetition, concurrently, with per-repetition derived seeds.
/// Records are ordered by repetition index.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    run_with(cfg, &EnvRegistry::default())
}

pub fn run_with(cfg: &ExperimentConfig, envs: &EnvRegistry) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_one(cfg, envs, r))
        .collect()
}

/// The resolved config followed by one line per record.
pub fn render_results(cfg: &ExperimentConfig, records: &[ResultRecord]) -> String {
    let mut out = String::new();
    let header = OutputLine::Config {
        config: cfg.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("config serializes"));
    out.push('\n');
    for r in records {
        out.push_str(
            &serde_json::to_string(&OutputLine::Result(r.clone())).expect("record serializes"),
        );
        out.push('\n');
    }
    out
}

pub fn append_results(path: &Path, cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    f.write_all(render_results(cfg, records).as_bytes())
        .with_context(|| format!("writing {}", path.display()))
}

/// Parses a result stream; a truncated final line is ignored.
pub fn parse_results(text: &str) -> Result<Vec<OutputLine>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => return Err(e).with_context(|| format!("result line {}", i + 1)),
        }
    }
    Ok(out)
}

/// Per-policy structure of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDescription {
    pub index: usize,
    pub rank: usize,
    pub spectrum: Vec<arps_core::Complex64>,
    pub exact_value: f64,
    /// Lock instances only.
    pub lock_match_error: Option<f64>,
    pub lock_nonzero_eigenvalues: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvDescription {
    pub num_observations: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub lock_rank_bound: Option<usize>,
    pub policies: Vec<PolicyDescription>,
}

pub fn describe(env: &Environment) -> Result<EnvDescription> {
    let lock = match &env.lock {
        Some(sc) => Some((sc.params.clone(), sc.latent_map()?, sc.pi_star_policy())),
        None => None,
    };
    let policies = env
        .class
        .policies()
        .par_iter()
        .enumerate()
        .map(|(index, pi)| {
            let (spec, rank) = spectrum_of(&induced_transition(&env.mdp, pi), DEFAULT_RANK_TOL)?;
            let (err, nonzero) = match &lock {
                Some((params, phi, star)) => {
                    let r = verify_lock_spectrum(&env.mdp, pi, star.as_ref(), phi, params)?;
                    (Some(r.max_error), Some(r.nonzero_eigenvalues))
                }
                None => (None, None),
            };
            Ok(PolicyDescription {
                index,
                rank,
                spectrum: spec.leading(rank.max(1)).values().to_vec(),
                exact_value: exact_value(&env.mdp, pi),
                lock_match_error: err,
                lock_nonzero_eigenvalues: nonzero,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvDescription {
        num_observations: env.mdp.num_observations(),
        num_actions: env.mdp.num_actions(),
        horizon: env.mdp.horizon(),
        lock_rank_bound: lock.map(|(p, _, _)| 2 * p.d - 1),
        policies,
    })
}

impl EnvDescription {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "observations {}  actions {}  horizon {}",
            self.num_observations, self.num_actions, self.horizon
        );
        if let Some(b) = self.lock_rank_bound {
            let _ = writeln!(
                s,
                "lock instance: closed-form spectrum comparison, rank bound 2d-1 = {b}"
            );
        }
        for p in &self.policies {
            let _ = write!(
                s,
                "policy {:>3}  value {:.10}  rank {:>3}",
                p.index, p.exact_value, p.rank
            );
            if let (Some(e), Some(nz)) = (p.lock_match_error, p.lock_nonzero_eigenvalues) {
                let _ = write!(
                    s,
                    "  nonzero eigenvalues {nz:>3}  closed-form error {e:.2e}"
                );
            }
            let _ = writeln!(s);
            let eig: Vec<String> = p
                .spectrum
                .iter()
                .map(|z| {
                    if z.im == 0.0 {
                        format!("{:.6}", z.re)
                    } else {
                        format!("{:.6}{:+.6}i", z.re, z.im)
                    }
                })
                .collect();
            let _ = writeln!(s, "    spectrum [{}]", eig.join(", "));
        }
        s
    }
}
