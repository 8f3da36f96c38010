use super::{check_binary_policy, LatentMap, LatentState, LockParams};
use crate::error::Result;
use crate::mdp::{Policy, RewardNoise, TabularMdp};

const K: usize = 2;

/// Latent next-state distribution written as `(state, mass)` pairs.
type LatentDist = Vec<(LatentState, f64)>;

fn chain_step(params: &LockParams, i: usize, good: bool) -> LatentDist {
    let p = params.progress_probs[i - 1];
    let wrap = |j| {
        if good {
            LatentState::Good(j)
        } else {
            LatentState::Bad(j)
        }
    };
    vec![(wrap(i + 1), p), (wrap(i), 1.0 - p)]
}

fn goal_step(bias: f64) -> LatentDist {
    vec![
        (LatentState::Plus, 0.5 + bias),
        (LatentState::Minus, 0.5 - bias),
    ]
}

fn assemble(
    phi: &LatentMap,
    params: &LockParams,
    next: impl Fn(usize, usize) -> LatentDist,
) -> Result<TabularMdp> {
    phi.check(params)?;
    let n = phi.num_observations();
    let mut transition = vec![0.0; K * n * n];
    for a in 0..K {
        for x in 0..n {
            let row = &mut transition[(a * n + x) * n..(a * n + x + 1) * n];
            for (s, mass) in next(x, a) {
                let cell = phi.cell(s);
                let share = mass / cell.len() as f64;
                for &y in cell {
                    row[y] += share;
                }
            }
        }
    }
    let mut reward = vec![0.0; n * K];
    for &x in phi.cell(LatentState::Plus) {
        reward[x * K] = 1.0;
        reward[x * K + 1] = 1.0;
    }
    let mut mu0 = vec![0.0; n];
    let start = phi.cell(LatentState::Good(1));
    for &x in start {
        mu0[x] = 1.0 / start.len() as f64;
    }
    TabularMdp::new(
        n,
        K,
        params.horizon,
        transition,
        reward,
        RewardNoise::Deterministic,
        mu0,
    )
}

/// The lock in which `pi_star` is the unique action sequence that keeps the
/// agent on the good chain.
pub fn build_lock_mdp(
    pi_star: &Policy,
    phi: &LatentMap,
    params: &LockParams,
) -> Result<TabularMdp> {
    check_binary_policy(pi_star, phi.num_observations(), "pi_star")?;
    let d = params.d;
    assemble(phi, params, |x, a| match phi.latent_of(x) {
        LatentState::Good(i) if i < d => chain_step(params, i, pi_star.action(x) == Some(a)),
        LatentState::Bad(i) if i < d => chain_step(params, i, false),
        LatentState::Good(_) => goal_step(params.epsilon),
        LatentState::Bad(_) => goal_step(0.0),
        LatentState::Plus | LatentState::Minus => vec![(LatentState::Minus, 1.0)],
    })
}

/// The action-independent lock in which good and bad states behave alike.
pub fn build_null_lock(phi: &LatentMap, params: &LockParams) -> Result<TabularMdp> {
    let d = params.d;
    assemble(phi, params, |x, _| match phi.latent_of(x) {
        LatentState::Good(i) | LatentState::Bad(i) if i < d => {
            let p = params.progress_probs[i - 1];
            vec![
                (LatentState::Bad(i + 1), p / 2.0),
                (LatentState::Bad(i), (1.0 - p) / 2.0),
                (LatentState::Good(i + 1), p / 2.0),
                (LatentState::Good(i), (1.0 - p) / 2.0),
            ]
        }
        LatentState::Good(_) | LatentState::Bad(_) => goal_step(0.0),
        LatentState::Plus | LatentState::Minus => vec![(LatentState::Minus, 1.0)],
    })
}
