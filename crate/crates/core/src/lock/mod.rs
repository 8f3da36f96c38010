//! Contextual combination-lock instances.
//!
//! Observations are partitioned into equally sized cells, one per latent
//! state `(i, g)`, `(i, b)` for `i in 1..=d`, `+` and `-`. The latent state
//! advances along a chain with probabilities `p_i`; leaving the action of a
//! designated policy `pi*` moves the agent from the good to the bad chain for
//! good. The goal level `d` leads to `+` (reward 1) with probability
//! `1/2 + eps` from the good chain and `1/2` from the bad one.

mod build;
mod goal;
mod gv;
mod sidecar;
mod verify;

pub use build::{build_lock_mdp, build_null_lock};
pub use goal::{
    goal_time_cdf, goal_time_stats, suboptimality_gap, BoundCheck, GapReport, GoalTimeStats,
};
pub use gv::{gv_policy_class, min_pairwise_disagreement};
pub use sidecar::{parse_sidecar, write_sidecar, LockSidecar};
pub use verify::{
    lock_closed_form_spectrum, null_closed_form_spectrum, verify_lock_spectrum, LockSpectrumReport,
};

use crate::error::{invalid, Result};
use crate::mdp::Policy;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DEFAULT_CELLS_PER_STATE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockParams {
    /// Chain length.
    pub d: usize,
    pub horizon: usize,
    /// Progress probabilities `p_1..p_{d-1}`.
    pub progress_probs: Vec<f64>,
    /// Bias of the good goal state.
    pub epsilon: f64,
    pub cells_per_state: usize,
}

impl LockParams {
    /// Equal progress probabilities `p_i = d / H` and default cell size.
    pub fn new(d: usize, horizon: usize, epsilon: f64) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        let p = d as f64 / horizon as f64;
        let params = Self {
            d,
            horizon,
            progress_probs: vec![p; d.saturating_sub(1)],
            epsilon,
            cells_per_state: DEFAULT_CELLS_PER_STATE,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn num_latent(&self) -> usize {
        2 * self.d + 2
    }

    pub fn num_observations(&self) -> usize {
        self.num_latent() * self.cells_per_state
    }

    /// Whether `8 d ln(H/d) <= N`, the regime where well-separated policy
    /// classes of size `(H/d)^d` are guaranteed to exist.
    pub fn gv_feasible(&self) -> bool {
        8.0 * self.d as f64 * (self.horizon as f64 / self.d as f64).ln()
            <= self.num_observations() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("chain length d must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        if self.cells_per_state == 0 {
            return Err(invalid("cells_per_state must be positive"));
        }
        if self.progress_probs.len() != self.d - 1 {
            return Err(invalid(format!(
                "need {} progress probabilities, got {}",
                self.d - 1,
                self.progress_probs.len()
            )));
        }
        if let Some(p) = self
            .progress_probs
            .iter()
            .find(|p| !(**p > 0.0 && **p <= 1.0))
        {
            return Err(invalid(format!("progress probability {p} outside (0, 1]")));
        }
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(invalid(format!("bias {} outside [0, 1/2)", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentState {
    /// `(i, g)` with `i` 1-based.
    Good(usize),
    /// `(i, b)` with `i` 1-based.
    Bad(usize),
    Plus,
    Minus,
}

impl LatentState {
    /// Position in the order `(1,g)..(d,g), (1,b)..(d,b), +, -`.
    pub fn index(self, d: usize) -> usize {
        match self {
            LatentState::Good(i) => i - 1,
            LatentState::Bad(i) => d + i - 1,
            LatentState::Plus => 2 * d,
            LatentState::Minus => 2 * d + 1,
        }
    }

    pub fn from_index(idx: usize, d: usize) -> Option<Self> {
        match idx {
            i if i < d => Some(LatentState::Good(i + 1)),
            i if i < 2 * d => Some(LatentState::Bad(i - d + 1)),
            i if i == 2 * d => Some(LatentState::Plus),
            i if i == 2 * d + 1 => Some(LatentState::Minus),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "+" => Some(LatentState::Plus),
            "-" => Some(LatentState::Minus),
            _ => {
                let (num, tag) = s.split_at(s.len().checked_sub(1)?);
                let i: usize = num.parse().ok().filter(|i| *i >= 1)?;
                match tag {
                    "g" => Some(LatentState::Good(i)),
                    "b" => Some(LatentState::Bad(i)),
                    _ => None,
                }
            }
        }
    }
}

impl fmt::Display for LatentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatentState::Good(i) => write!(f, "{i}g"),
            LatentState::Bad(i) => write!(f, "{i}b"),
            LatentState::Plus => write!(f, "+"),
            LatentState::Minus => write!(f, "-"),
        }
    }
}

/// Observation-to-latent-state map with equally sized cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMap {
    d: usize,
    phi: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

impl LatentMap {
    /// `phi[x]` is the latent index of observation `x`.
    pub fn new(d: usize, phi: Vec<usize>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("chain length d must be at least 1"));
        }
        let s = 2 * d + 2;
        let mut cells = vec![Vec::new(); s];
        for (x, &l) in phi.iter().enumerate() {
            cells
                .get_mut(l)
                .ok_or_else(|| invalid(format!("observation {x} maps to latent index {l} >= {s}")))?
                .push(x);
        }
        let size = cells[0].len();
        if size == 0 || cells.iter().any(|c| c.len() != size) {
            return Err(invalid("latent cells must be non-empty and of equal size"));
        }
        Ok(Self { d, phi, cells })
    }

    /// Uniformly random partition into `2d + 2` cells of `cells_per_state`.
    pub fn random(d: usize, cells_per_state: usize, seed: u64) -> Result<Self> {
        let s = 2 * d + 2;
        let mut phi: Vec<usize> = (0..s * cells_per_state)
            .map(|x| x / cells_per_state.max(1))
            .collect();
        phi.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(d, phi)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_observations(&self) -> usize {
        self.phi.len()
    }

    pub fn cells_per_state(&self) -> usize {
        self.cells[0].len()
    }

    pub fn latent_of(&self, x: usize) -> LatentState {
        LatentState::from_index(self.phi[x], self.d).expect("validated latent index")
    }

    pub fn latent_index(&self, x: usize) -> usize {
        self.phi[x]
    }

    pub fn cell(&self, s: LatentState) -> &[usize] {
        &self.cells[s.index(self.d)]
    }

    pub(crate) fn check(&self, params: &LockParams) -> Result<()> {
        params.validate()?;
        if self.d != params.d || self.cells_per_state() != params.cells_per_state {
            return Err(invalid(format!(
                "latent map (d = {}, {} per cell) does not fit parameters (d = {}, {} per cell)",
                self.d,
                self.cells_per_state(),
                params.d,
                params.cells_per_state
            )));
        }
        Ok(())
    }
}

/// Fraction of observations of `cell` on which `pi` and `pi_star` agree.
pub fn match_fraction(pi: &Policy, pi_star: &Policy, cell: &[usize]) -> f64 {
    let agree = cell
        .iter()
        .filter(|&&x| pi.action(x) == pi_star.action(x))
        .count();
    agree as f64 / cell.len() as f64
}

fn check_binary_policy(p: &Policy, n: usize, what: &str) -> Result<()> {
    if !p.is_deterministic() {
        return Err(invalid(format!("{what} must be deterministic")));
    }
    p.validate(n, 2)
}
