use super::{LatentMap, LatentState, LockParams};
use crate::error::{invalid, Error, Result};
use crate::mdp::Policy;
use serde::{Deserialize, Serialize};

pub const SIDECAR_FORMAT: &str = "arps-lock-1";

/// Latent structure stored next to a lock's MDP file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockSidecar {
    pub format: String,
    pub params: LockParams,
    /// Latent label of each observation (`"1g"`, `"2b"`, `"+"`, `"-"`).
    pub phi: Vec<String>,
    /// Actions of the designated policy; absent for the null lock.
    pub pi_star: Option<Vec<usize>>,
}

impl LockSidecar {
    pub fn new(params: &LockParams, phi: &LatentMap, pi_star: Option<&Policy>) -> Result<Self> {
        phi.check(params)?;
        let pi_star = match pi_star {
            None => None,
            Some(Policy::Deterministic(a)) => Some(a.clone()),
            Some(Policy::Stochastic(_)) => return Err(invalid("pi_star must be deterministic")),
        };
        Ok(Self {
            format: SIDECAR_FORMAT.to_string(),
            params: params.clone(),
            phi: (0..phi.num_observations())
                .map(|x| phi.latent_of(x).to_string())
                .collect(),
            pi_star,
        })
    }

    pub fn latent_map(&self) -> Result<LatentMap> {
        let d = self.params.d;
        let idx = self
            .phi
            .iter()
            .map(|s| {
                LatentState::parse(s)
                    .filter(|l| match l {
                        LatentState::Good(i) | LatentState::Bad(i) => *i <= d,
                        _ => true,
                    })
                    .map(|l| l.index(d))
                    .ok_or_else(|| invalid(format!("bad latent label `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let map = LatentMap::new(d, idx)?;
        map.check(&self.params)?;
        Ok(map)
    }

    pub fn pi_star_policy(&self) -> Option<Policy> {
        self.pi_star.clone().map(Policy::Deterministic)
    }
}

pub fn write_sidecar(sidecar: &LockSidecar) -> String {
    let mut s = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    s.push('\n');
    s
}

pub fn parse_sidecar(text: &str) -> Result<LockSidecar> {
    let sc: LockSidecar = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if sc.format != SIDECAR_FORMAT {
        return Err(invalid(format!("unknown sidecar format `{}`", sc.format)));
    }
    sc.params.validate()?;
    sc.latent_map()?;
    if let Some(p) = &sc.pi_star {
        Policy::Deterministic(p.clone()).validate(sc.phi.len(), 2)?;
    }
    Ok(sc)
}
