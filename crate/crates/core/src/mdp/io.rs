//! Text formats for models, datasets and policy classes.
//!
//! Model documents are `key = value` lines. Tensors are written flat in
//! row-major order with 17 significant digits, so a write/parse round trip
//! is bit-exact:
//!
//! ```text
//! format = arps-mdp-1
//! num_observations = 2
//! num_actions = 1
//! horizon = 3
//! reward_noise = deterministic
//! initial_dist = 1.0000000000000000e0 0.0000000000000000e0
//! reward_mean = ...        # indexed (obs, action)
//! transition = ...         # indexed (next_obs, obs, action)
//! ```
//!
//! Dataset files start with a header line `H K n seed` followed by one line
//! per step: `episode_index h obs action reward`, with `h` counted from 1.
//!
//! Policy class files start with `num_observations num_actions size` and
//! list one deterministic policy per line as its action for every
//! observation.

use super::{Dataset, Episode, Policy, PolicyClass, RewardNoise, TabularMdp};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

const MDP_FORMAT: &str = "arps-mdp-1";

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn join17(vals: impl IntoIterator<Item = f64>) -> String {
    vals.into_iter().map(fmt17).collect::<Vec<_>>().join(" ")
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn write_mdp(mdp: &TabularMdp) -> String {
    let (nx, k) = (mdp.num_observations(), mdp.num_actions());
    let mut s = String::new();
    let noise = match mdp.reward_noise() {
        RewardNoise::Deterministic => "deterministic",
        RewardNoise::Bernoulli => "bernoulli",
    };
    writeln!(s, "format = {MDP_FORMAT}").unwrap();
    writeln!(s, "num_observations = {nx}").unwrap();
    writeln!(s, "num_actions = {k}").unwrap();
    writeln!(s, "horizon = {}", mdp.horizon()).unwrap();
    writeln!(s, "reward_noise = {noise}").unwrap();
    writeln!(
        s,
        "initial_dist = {}",
        join17(mdp.initial_dist().iter().copied())
    )
    .unwrap();
    writeln!(
        s,
        "reward_mean = {}",
        join17(mdp.reward_raw().iter().copied())
    )
    .unwrap();
    let tensor = (0..nx)
        .flat_map(|xn| (0..nx).flat_map(move |x| (0..k).map(move |a| mdp.next_dist(x, a)[xn])));
    writeln!(s, "transition = {}", join17(tensor)).unwrap();
    s
}

/// Parses `key = value` lines into a map of (line number, value).
pub(crate) fn parse_kv(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| perr(i + 1, format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim().to_string();
        if map
            .insert(key.clone(), (i + 1, v.trim().to_string()))
            .is_some()
        {
            return Err(perr(i + 1, format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

fn field<'a>(map: &'a BTreeMap<String, (usize, String)>, key: &str) -> Result<(usize, &'a str)> {
    map.get(key)
        .map(|(l, v)| (*l, v.as_str()))
        .ok_or_else(|| perr(0, format!("missing field `{key}`")))
}

fn scalar<T: FromStr>(map: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T> {
    let (line, v) = field(map, key)?;
    v.parse()
        .map_err(|_| perr(line, format!("cannot parse `{key}` from `{v}`")))
}

fn floats(map: &BTreeMap<String, (usize, String)>, key: &str, len: usize) -> Result<Vec<f64>> {
    let (line, v) = field(map, key)?;
    let out: Vec<f64> = v
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| perr(line, format!("bad number `{t}` in `{key}`")))
        })
        .collect::<Result<_>>()?;
    if out.len() != len {
        return Err(perr(
            line,
            format!("`{key}` has {} values, expected {len}", out.len()),
        ));
    }
    Ok(out)
}

pub fn parse_mdp(text: &str) -> Result<TabularMdp> {
    let map = parse_kv(text)?;
    let (line, fmt) = field(&map, "format")?;
    if fmt != MDP_FORMAT {
        return Err(perr(line, format!("unsupported format `{fmt}`")));
    }
    let nx: usize = scalar(&map, "num_observations")?;
    let k: usize = scalar(&map, "num_actions")?;
    let horizon: usize = scalar(&map, "horizon")?;
    let (line, noise) = field(&map, "reward_noise")?;
    let noise = match noise {
        "deterministic" => RewardNoise::Deterministic,
        "bernoulli" => RewardNoise::Bernoulli,
        other => return Err(perr(line, format!("unknown reward noise `{other}`"))),
    };
    let mu0 = floats(&map, "initial_dist", nx)?;
    let reward = floats(&map, "reward_mean", nx * k)?;
    let flat = floats(&map, "transition", nx * nx * k)?;
    let mut transition = vec![0.0; k * nx * nx];
    for xn in 0..nx {
        for x in 0..nx {
            for a in 0..k {
                transition[(a * nx + x) * nx + xn] = flat[(xn * nx + x) * k + a];
            }
        }
    }
    TabularMdp::new(nx, k, horizon, transition, reward, noise, mu0)
}

pub fn write_dataset(ds: &Dataset) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{} {} {} {}",
        ds.horizon(),
        ds.num_actions(),
        ds.len(),
        ds.seed()
    )
    .unwrap();
    for (t, ep) in ds.episodes().iter().enumerate() {
        for h in 0..ep.len() {
            writeln!(
                s,
                "{t} {} {} {} {}",
                h + 1,
                ep.observations[h],
                ep.actions[h],
                ep.rewards[h]
            )
            .unwrap();
        }
    }
    s
}

fn tok<T: FromStr>(t: Option<&str>, line: usize, what: &str) -> Result<T> {
    let t = t.ok_or_else(|| perr(line, format!("missing {what}")))?;
    t.parse()
        .map_err(|_| perr(line, format!("cannot parse {what} from `{t}`")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty dataset file"))?;
    let mut it = header.split_whitespace();
    let horizon: usize = tok(it.next(), hl, "H")?;
    let k: usize = tok(it.next(), hl, "K")?;
    let n: usize = tok(it.next(), hl, "n")?;
    let seed: u64 = tok(it.next(), hl, "seed")?;
    if it.next().is_some() {
        return Err(perr(hl, "header must be `H K n seed`"));
    }
    if n == 0 || horizon == 0 {
        return Err(perr(
            hl,
            "dataset must contain at least one episode of positive length",
        ));
    }
    let mut episodes = Vec::with_capacity(n);
    let mut cur = Episode {
        observations: vec![],
        actions: vec![],
        rewards: vec![],
    };
    let mut seen = 0usize;
    for (line, l) in lines {
        let mut it = l.split_whitespace();
        let t: usize = tok(it.next(), line, "episode index")?;
        let h: usize = tok(it.next(), line, "step")?;
        let x: usize = tok(it.next(), line, "observation")?;
        let a: usize = tok(it.next(), line, "action")?;
        let r: f64 = tok(it.next(), line, "reward")?;
        if it.next().is_some() {
            return Err(perr(line, "expected `episode_index h obs action reward`"));
        }
        let expect_t = seen / horizon;
        let expect_h = seen % horizon + 1;
        if t != expect_t || h != expect_h {
            return Err(perr(
                line,
                format!("expected episode {expect_t} step {expect_h}, got {t} {h}"),
            ));
        }
        if a >= k {
            return Err(perr(line, format!("action {a} out of range for K = {k}")));
        }
        cur.observations.push(x);
        cur.actions.push(a);
        cur.rewards.push(r);
        seen += 1;
        if h == horizon {
            episodes.push(std::mem::replace(
                &mut cur,
                Episode {
                    observations: vec![],
                    actions: vec![],
                    rewards: vec![],
                },
            ));
        }
    }
    if episodes.len() != n || !cur.observations.is_empty() {
        return Err(perr(
            0,
            format!("header announces {n} episodes, file holds {seen} steps"),
        ));
    }
    Dataset::new(episodes, seed, horizon, k)
}

pub fn write_policy_class(class: &PolicyClass, num_actions: usize) -> Result<String> {
    let nx = class.get(0).num_observations();
    let mut s = String::new();
    writeln!(s, "{nx} {num_actions} {}", class.len()).unwrap();
    for (i, p) in class.iter().enumerate() {
        let acts = match p {
            Policy::Deterministic(a) => a,
            Policy::Stochastic(_) => {
                return Err(Error::InvalidArgument(format!(
                    "policy {i} is stochastic; only deterministic classes are serialized"
                )))
            }
        };
        let row: Vec<String> = acts.iter().map(|a| a.to_string()).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    Ok(s)
}

pub fn parse_policy_class(text: &str) -> Result<(PolicyClass, usize)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty policy file"))?;
    let mut it = header.split_whitespace();
    let nx: usize = tok(it.next(), hl, "num_observations")?;
    let k: usize = tok(it.next(), hl, "num_actions")?;
    let size: usize = tok(it.next(), hl, "class size")?;
    let mut policies = Vec::with_capacity(size);
    for (line, l) in lines {
        let acts: Vec<usize> = l
            .split_whitespace()
            .map(|t| tok(Some(t), line, "action"))
            .collect::<Result<_>>()?;
        if acts.len() != nx {
            return Err(perr(
                line,
                format!("policy has {} actions, expected {nx}", acts.len()),
            ));
        }
        if let Some(a) = acts.iter().find(|a| **a >= k) {
            return Err(perr(line, format!("action {a} out of range for K = {k}")));
        }
        policies.push(Policy::Deterministic(acts));
    }
    if policies.len() != size {
        return Err(perr(
            0,
            format!("header announces {size} policies, found {}", policies.len()),
        ));
    }
    Ok((PolicyClass::new(policies)?, k))
}
