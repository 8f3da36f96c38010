use crate::config::EnvSpec;
use anyhow::{anyhow, Context, Result};
use arps_core::lock::{
    build_lock_mdp, build_null_lock, gv_policy_class, LatentMap, LockParams, LockSidecar,
};
use arps_core::mdp::io::{parse_mdp, parse_policy_class};
use arps_core::mdp::{
    random_low_rank_mdp, random_policy_class, LowRankSpec, PolicyClass, RewardNoise, TabularMdp,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::path::PathBuf;

/// A generated instance with its policy class.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mdp: TabularMdp,
    pub class: PolicyClass,
    /// Latent structure of lock instances.
    pub lock: Option<LockSidecar>,
}

/// Builds environments of one kind from generator-specific parameters.
pub trait EnvGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, params: &toml::Table, class_size: usize, seed: u64) -> Result<Environment>;
}

fn params_as<T: DeserializeOwned>(kind: &str, params: &toml::Table) -> Result<T> {
    toml::Value::Table(params.clone())
        .try_into()
        .with_context(|| format!("invalid parameters for environment `{kind}`"))
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    arps_core::mdp::episode_seed(seed, stream)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LowRankParams {
    num_observations: usize,
    num_actions: usize,
    rank: usize,
    horizon: usize,
    #[serde(default = "bernoulli")]
    reward_noise: RewardNoise,
    #[serde(default = "unit")]
    skew: f64,
}

fn bernoulli() -> RewardNoise {
    RewardNoise::Bernoulli
}

fn unit() -> f64 {
    1.0
}

pub struct RandomLowRank;

impl EnvGenerator for RandomLowRank {
    fn name(&self) -> &'static str {
        "random_low_rank"
    }

    fn generate(&self, params: &toml::Table, class_size: usize, seed: u64) -> Result<Environment> {
        let p: LowRankParams = params_as(self.name(), params)?;
        let spec = LowRankSpec {
            num_observations: p.num_observations,
            num_actions: p.num_actions,
            rank: p.rank,
            horizon: p.horizon,
            reward_noise: p.reward_noise,
            skew: p.skew,
        };
        let mdp = random_low_rank_mdp(&spec, sub_seed(seed, 0))?;
        let class = random_policy_class(
            p.num_observations,
            p.num_actions,
            class_size,
            sub_seed(seed, 1),
        )?;
        Ok(Environment {
            mdp,
            class,
            lock: None,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LockEnvParams {
    d: usize,
    horizon: usize,
    epsilon: f64,
    #[serde(default = "default_cells")]
    cells_per_state: usize,
    #[serde(default)]
    progress_probs: Option<Vec<f64>>,
    /// Build the action-independent variant.
    #[serde(default)]
    null: bool,
}

fn default_cells() -> usize {
    arps_core::lock::DEFAULT_CELLS_PER_STATE
}

pub struct Lock;

impl EnvGenerator for Lock {
    fn name(&self) -> &'static str {
        "lock"
    }

    /// The policy class is a well-separated binary class; its member at a
    /// seed-dependent index is the lock's designated policy.
    fn generate(&self, params: &toml::Table, class_size: usize, seed: u64) -> Result<Environment> {
        let p: LockEnvParams = params_as(self.name(), params)?;
        let mut lp = LockParams::new(p.d, p.horizon, p.epsilon)?;
        lp.cells_per_state = p.cells_per_state;
        if let Some(probs) = p.progress_probs {
            lp.progress_probs = probs;
        }
        lp.validate()?;
        let phi = LatentMap::random(lp.d, lp.cells_per_state, sub_seed(seed, 0))?;
        let class = gv_policy_class(lp.num_observations(), class_size, sub_seed(seed, 1))?;
        let (mdp, star) = if p.null {
            (build_null_lock(&phi, &lp)?, None)
        } else {
            let star = class
                .get((sub_seed(seed, 2) % class_size as u64) as usize)
                .clone();
            (build_lock_mdp(&star, &phi, &lp)?, Some(star))
        };
        let lock = LockSidecar::new(&lp, &phi, star.as_ref())?;
        Ok(Environment {
            mdp,
            class,
            lock: Some(lock),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileParams {
    path: PathBuf,
    #[serde(default)]
    class: Option<PathBuf>,
    #[serde(default)]
    sidecar: Option<PathBuf>,
}

pub struct FromFile;

impl EnvGenerator for FromFile {
    fn name(&self) -> &'static str {
        "file"
    }

    /// Loads the MDP as is; without a class file, a random class is drawn.
    fn generate(&self, params: &toml::Table, class_size: usize, seed: u64) -> Result<Environment> {
        let p: FileParams = params_as(self.name(), params)?;
        let mdp = load_mdp(&p.path)?;
        let class = match &p.class {
            Some(path) => load_class(path)?,
            None => random_policy_class(
                mdp.num_observations(),
                mdp.num_actions(),
                class_size,
                sub_seed(seed, 1),
            )?,
        };
        let lock = match &p.sidecar {
            Some(path) => Some(load_sidecar(path)?),
            None => None,
        };
        Ok(Environment { mdp, class, lock })
    }
}

pub fn load_mdp(path: &std::path::Path) -> Result<TabularMdp> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mdp(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_class(path: &std::path::Path) -> Result<PolicyClass> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_policy_class(&text)
        .with_context(|| format!("parsing {}", path.display()))?
        .0)
}

pub fn load_sidecar(path: &std::path::Path) -> Result<LockSidecar> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    arps_core::lock::parse_sidecar(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Environment generators selectable by name.
pub struct EnvRegistry {
    entries: Vec<Box<dyn EnvGenerator>>,
}

impl Default for EnvRegistry {
    fn default() -> Self {
        Self {
            entries: vec![Box::new(RandomLowRank), Box::new(Lock), Box::new(FromFile)],
        }
    }
}

impl EnvRegistry {
    pub fn register(&mut self, generator: Box<dyn EnvGenerator>) {
        self.entries.retain(|g| g.name() != generator.name());
        self.entries.push(generator);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EnvGenerator> {
        self.entries
            .iter()
            .find(|g| g.name() == name)
            .map(|g| g.as_ref())
            .ok_or_else(|| {
                anyhow!(
                    "unknown environment kind `{name}` (known: {})",
                    self.names().join(", ")
                )
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|g| g.name()).collect()
    }

    pub fn generate(&self, spec: &EnvSpec, class_size: usize, seed: u64) -> Result<Environment> {
        self.get(&spec.kind)?
            .generate(&spec.params, class_size, seed)
    }
}
