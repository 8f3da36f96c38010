use super::{Policy, PolicyClass, RewardNoise, TabularMdp};
use crate::error::{invalid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Shape of a random low-rank instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankSpec {
    pub num_observations: usize,
    pub num_actions: usize,
    pub rank: usize,
    pub horizon: usize,
    pub reward_noise: RewardNoise,
    /// Exponent applied to the exponential draws behind every random
    /// distribution; values above 1 concentrate mass on fewer entries.
    #[serde(default = "default_skew")]
    pub skew: f64,
}

fn default_skew() -> f64 {
    1.0
}

fn random_simplex<R: Rng>(rng: &mut R, len: usize, skew: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).powf(skew))
        .collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|v| *v /= s);
    } else {
        w = vec![1.0 / len as f64; len];
    }
    // absorb rounding into the largest entry so the sum is 1 to machine precision
    let s: f64 = w.iter().sum();
    let imax = (0..len).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap_or(0);
    w[imax] += 1.0 - s;
    w
}

/// Random MDP with `T(.|., a) = Psi Phi_a`: one shared nonnegative
/// `|X| x d` emission factor `Psi` (columns are distributions) and per-action
/// `d x |X|` factors `Phi_a` (columns are distributions over `d` latents).
/// Every induced `T^pi = Psi sum_a Phi_a diag(pi(a|.))` then has rank at most
/// `d`. The initial distribution is drawn inside the column space of `Psi`.
pub fn random_low_rank_mdp(spec: &LowRankSpec, seed: u64) -> Result<TabularMdp> {
    let (nx, k, d) = (spec.num_observations, spec.num_actions, spec.rank);
    if d == 0 || d > nx {
        return Err(invalid(format!("rank {d} must lie in 1..={nx}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi: Vec<Vec<f64>> = (0..d)
        .map(|_| random_simplex(&mut rng, nx, spec.skew))
        .collect();
    let mut transition = vec![0.0; k * nx * nx];
    for a in 0..k {
        for x in 0..nx {
            let phi = random_simplex(&mut rng, d, spec.skew);
            let col = &mut transition[(a * nx + x) * nx..(a * nx + x + 1) * nx];
            for (j, w) in phi.iter().enumerate() {
                for (xn, p) in psi[j].iter().enumerate() {
                    col[xn] += w * p;
                }
            }
        }
    }
    let reward_mean: Vec<f64> = (0..nx * k).map(|_| rng.random::<f64>()).collect();
    let w = random_simplex(&mut rng, d, 1.0);
    let mut mu0 = vec![0.0; nx];
    for (j, wj) in w.iter().enumerate() {
        for (x, p) in psi[j].iter().enumerate() {
            mu0[x] += wj * p;
        }
    }
    renormalize(&mut mu0);
    for col in transition.chunks_mut(nx) {
        renormalize(col);
    }
    TabularMdp::new(
        nx,
        k,
        spec.horizon,
        transition,
        reward_mean,
        spec.reward_noise,
        mu0,
    )
}

fn renormalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
}

/// `size` uniformly random deterministic policies.
pub fn random_policy_class(
    num_observations: usize,
    num_actions: usize,
    size: usize,
    seed: u64,
) -> Result<PolicyClass> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policies = (0..size)
        .map(|_| {
            Policy::Deterministic(
                (0..num_observations)
                    .map(|_| rng.random_range(0..num_actions))
                    .collect(),
            )
        })
        .collect();
    PolicyClass::new(policies)
}
