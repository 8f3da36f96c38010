use super::{Policy, RewardNoise, TabularMdp};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One episode of `H` (observation, action, reward) triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// `n` episodes collected with uniformly random actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    episodes: Vec<Episode>,
    seed: u64,
    horizon: usize,
    num_actions: usize,
}

impl Dataset {
    pub fn new(
        episodes: Vec<Episode>,
        seed: u64,
        horizon: usize,
        num_actions: usize,
    ) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::InvalidArgument("dataset has no episodes".into()));
        }
        if num_actions == 0 {
            return Err(Error::InvalidArgument(
                "dataset needs at least one action".into(),
            ));
        }
        for (i, ep) in episodes.iter().enumerate() {
            if ep.observations.len() != horizon
                || ep.actions.len() != horizon
                || ep.rewards.len() != horizon
            {
                return Err(Error::InvalidArgument(format!(
                    "episode {i} does not have length {horizon}"
                )));
            }
            if let Some(a) = ep.actions.iter().find(|a| **a >= num_actions) {
                return Err(Error::InvalidArgument(format!(
                    "episode {i} has action {a} >= {num_actions}"
                )));
            }
        }
        Ok(Self {
            episodes,
            seed,
            horizon,
            num_actions,
        })
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}

/// Counter-based seed for episode `index` of a collection seeded by `seed`
/// (splitmix64 finalizer over the pair).
pub fn episode_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn draw_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn draw_reward<R: Rng>(rng: &mut R, noise: RewardNoise, mean: f64) -> f64 {
    match noise {
        RewardNoise::Deterministic => mean,
        RewardNoise::Bernoulli => (rng.random::<f64>() < mean) as u8 as f64,
    }
}

fn rollout<R: Rng>(
    mdp: &TabularMdp,
    rng: &mut R,
    mut choose: impl FnMut(&mut R, usize) -> usize,
) -> Episode {
    let h = mdp.horizon();
    let mut ep = Episode {
        observations: Vec::with_capacity(h),
        actions: Vec::with_capacity(h),
        rewards: Vec::with_capacity(h),
    };
    let mut x = draw_categorical(rng, mdp.initial_dist());
    for step in 0..h {
        let a = choose(rng, x);
        let r = draw_reward(rng, mdp.reward_noise(), mdp.reward_mean(x, a));
        ep.observations.push(x);
        ep.actions.push(a);
        ep.rewards.push(r);
        if step + 1 < h {
            x = draw_categorical(rng, mdp.next_dist(x, a));
        }
    }
    ep
}

/// Rolls out `policy` for one episode; deterministic given `seed`.
pub fn sample_episode(mdp: &TabularMdp, policy: &Policy, seed: u64) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rollout(mdp, &mut rng, |rng, x| match policy {
        Policy::Deterministic(acts) => acts[x],
        Policy::Stochastic(rows) => draw_categorical(rng, &rows[x]),
    })
}

fn uniform_episode(mdp: &TabularMdp, seed: u64) -> Episode {
    let k = mdp.num_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rollout(mdp, &mut rng, |rng, _| rng.random_range(0..k))
}

/// `n` episodes with i.i.d. uniform actions. Episode `t` uses
/// `episode_seed(seed, t)`, so the result does not depend on scheduling.
pub fn sample_uniform_dataset(mdp: &TabularMdp, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "dataset size must be at least 1".into(),
        ));
    }
    let episodes: Vec<Episode> = (0..n as u64)
        .into_par_iter()
        .map(|t| uniform_episode(mdp, episode_seed(seed, t)))
        .collect();
    Dataset::new(episodes, seed, mdp.horizon(), mdp.num_actions())
}

/// Live sampling access to an environment.
pub trait EpisodeSource: Sync {
    fn horizon(&self) -> usize;
    fn num_observations(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// `n` episodes with uniform actions.
    fn uniform_dataset(&self, n: usize, seed: u64) -> Result<Dataset>;
    /// One episode following `policy`.
    fn rollout(&self, policy: &Policy, seed: u64) -> Episode;
}

impl EpisodeSource for TabularMdp {
    fn horizon(&self) -> usize {
        TabularMdp::horizon(self)
    }

    fn num_observations(&self) -> usize {
        TabularMdp::num_observations(self)
    }

    fn num_actions(&self) -> usize {
        TabularMdp::num_actions(self)
    }

    fn uniform_dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        sample_uniform_dataset(self, n, seed)
    }

    fn rollout(&self, policy: &Policy, seed: u64) -> Episode {
        sample_episode(self, policy, seed)
    }
}
