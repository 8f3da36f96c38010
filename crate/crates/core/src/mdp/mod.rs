//! Finite episodic MDPs, policies, sampling and exact dynamic-programming oracles.

mod dp;
pub mod io;
mod linalg;
mod lowrank;
mod sampling;
mod spectrum;

pub use dp::{exact_reward_profile, exact_value, induced_transition, ProfileKind, RewardProfile};
pub(crate) use linalg::lstsq;
pub use lowrank::{random_low_rank_mdp, random_policy_class, LowRankSpec};
pub use sampling::{
    episode_seed, sample_episode, sample_uniform_dataset, Dataset, Episode, EpisodeSource,
};
pub use spectrum::{
    bottleneck_match, complex_spectrum_of, spectrum_of, Spectrum, DEFAULT_RANK_TOL,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub(crate) const PROB_TOL: f64 = 1e-12;

/// How realized rewards are drawn around `reward_mean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    Deterministic,
    Bernoulli,
}

/// A finite episodic MDP with a stationary kernel.
///
/// The kernel is stored action-major: `T(x' | x, a)` lives at
/// `(a * |X| + x) * |X| + x'`, so each conditional distribution is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_observations: usize,
    num_actions: usize,
    horizon: usize,
    transition: Vec<f64>,
    reward_mean: Vec<f64>,
    reward_noise: RewardNoise,
    initial_dist: Vec<f64>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has entry {v}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {s}")));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds an MDP from an action-major kernel (see type docs) and an
    /// observation-major reward table `reward_mean[x * K + a]`.
    pub fn new(
        num_observations: usize,
        num_actions: usize,
        horizon: usize,
        transition: Vec<f64>,
        reward_mean: Vec<f64>,
        reward_noise: RewardNoise,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let (nx, k) = (num_observations, num_actions);
        if nx == 0 || k == 0 || horizon == 0 {
            return Err(Error::InvalidModel(
                "observation count, action count and horizon must be positive".into(),
            ));
        }
        if transition.len() != k * nx * nx {
            return Err(Error::InvalidModel(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                k * nx * nx
            )));
        }
        if reward_mean.len() != nx * k {
            return Err(Error::InvalidModel(format!(
                "reward table has {} entries, expected {}",
                reward_mean.len(),
                nx * k
            )));
        }
        if initial_dist.len() != nx {
            return Err(Error::InvalidModel(
                "initial distribution has wrong length".into(),
            ));
        }
        for a in 0..k {
            for x in 0..nx {
                let off = (a * nx + x) * nx;
                check_distribution(
                    &transition[off..off + nx],
                    &format!("transition column (obs {x}, action {a})"),
                )?;
            }
        }
        if let Some(r) = reward_mean.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidModel(format!(
                "reward mean {r} outside [0, 1]"
            )));
        }
        check_distribution(&initial_dist, "initial distribution")?;
        Ok(Self {
            num_observations,
            num_actions,
            horizon,
            transition,
            reward_mean,
            reward_noise,
            initial_dist,
        })
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// `T(· | x, a)` as a slice over next observations.
    pub fn next_dist(&self, x: usize, a: usize) -> &[f64] {
        let nx = self.num_observations;
        let off = (a * nx + x) * nx;
        &self.transition[off..off + nx]
    }

    pub fn reward_mean(&self, x: usize, a: usize) -> f64 {
        self.reward_mean[x * self.num_actions + a]
    }

    pub(crate) fn reward_raw(&self) -> &[f64] {
        &self.reward_mean
    }

    /// Same model with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        let mut m = self.clone();
        m.horizon = horizon;
        Ok(m)
    }
}

/// A map from observations to actions or action distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
}

impl Policy {
    /// Uniform stochastic policy.
    pub fn uniform(num_observations: usize, num_actions: usize) -> Self {
        Policy::Stochastic(vec![
            vec![1.0 / num_actions as f64; num_actions];
            num_observations
        ])
    }

    pub fn constant(num_observations: usize, action: usize) -> Self {
        Policy::Deterministic(vec![action; num_observations])
    }

    pub fn num_observations(&self) -> usize {
        match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Stochastic(p) => p.len(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Deterministic(_))
    }

    /// Action at `x` for a deterministic policy.
    pub fn action(&self, x: usize) -> Option<usize> {
        match self {
            Policy::Deterministic(a) => Some(a[x]),
            Policy::Stochastic(_) => None,
        }
    }

    /// `π(a | x)`.
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(acts) => (acts[x] == a) as u8 as f64,
            Policy::Stochastic(p) => p[x][a],
        }
    }

    /// Checks that the policy is defined on every observation of a model
    /// with `num_observations` observations and `num_actions` actions.
    pub fn validate(&self, num_observations: usize, num_actions: usize) -> Result<()> {
        if self.num_observations() != num_observations {
            return Err(Error::InvalidModel(format!(
                "policy covers {} observations, model has {num_observations}",
                self.num_observations()
            )));
        }
        match self {
            Policy::Deterministic(acts) => {
                if let Some(a) = acts.iter().find(|a| **a >= num_actions) {
                    return Err(Error::InvalidModel(format!(
                        "action {a} out of range for {num_actions} actions"
                    )));
                }
            }
            Policy::Stochastic(rows) => {
                for (x, row) in rows.iter().enumerate() {
                    if row.len() != num_actions {
                        return Err(Error::InvalidModel(format!(
                            "policy row {x} has {} entries",
                            row.len()
                        )));
                    }
                    check_distribution(row, &format!("policy row {x}"))?;
                }
            }
        }
        Ok(())
    }
}

/// A finite, indexed policy class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyClass {
    policies: Vec<Policy>,
}

impl PolicyClass {
    pub fn new(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::InvalidArgument("policy class is empty".into()));
        }
        Ok(Self { policies })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn get(&self, i: usize) -> &Policy {
        &self.policies[i]
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Policy> {
        self.policies.iter()
    }

    pub fn validate(&self, num_observations: usize, num_actions: usize) -> Result<()> {
        self.policies
            .iter()
            .try_for_each(|p| p.validate(num_observations, num_actions))
    }
}
