use super::{check_binary_policy, match_fraction, LatentMap, LatentState, LockParams};
use crate::error::{invalid, Result};
use crate::mdp::{exact_value, Policy, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sampled goal times `G`: the first step spent at chain level `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalTimeStats {
    pub d: usize,
    pub samples: Vec<usize>,
}

/// Outcome of comparing an empirical probability against a bound with a
/// three-standard-error slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub empirical: f64,
    pub bound: f64,
    pub sigma: f64,
    pub holds: bool,
}

impl GoalTimeStats {
    /// Empirical `Pr(G <= h)`.
    pub fn cdf(&self, h: f64) -> f64 {
        self.samples.iter().filter(|&&g| g as f64 <= h).count() as f64 / self.samples.len() as f64
    }

    fn sigma(&self, prob: f64) -> f64 {
        (prob * (1.0 - prob) / self.samples.len() as f64).sqrt()
    }

    /// `Pr(G <= (2d/p) ln(1/delta)) >= 1 - delta`, for equal progress
    /// probabilities `p`.
    pub fn check_upper_tail(&self, p: f64, delta: f64) -> BoundCheck {
        let h = 2.0 * self.d as f64 / p * (1.0 / delta).ln();
        let empirical = self.cdf(h);
        let sigma = self.sigma(delta);
        let bound = 1.0 - delta;
        BoundCheck {
            empirical,
            bound,
            sigma,
            holds: empirical >= bound - 3.0 * sigma,
        }
    }

    /// `Pr(G <= h) <= (h - d + 1) (2 p e h / d)^{d-1}`, for equal progress
    /// probabilities `p` and `h >= d`.
    pub fn check_lower_tail(&self, p: f64, h: usize) -> BoundCheck {
        let d = self.d as f64;
        let hf = h as f64;
        let bound = (hf - d + 1.0) * (2.0 * p * std::f64::consts::E * hf / d).powf(d - 1.0);
        let empirical = self.cdf(hf);
        let sigma = self.sigma(empirical.clamp(1.0 / self.samples.len() as f64, 0.5));
        BoundCheck {
            empirical,
            bound,
            sigma,
            holds: empirical <= bound + 3.0 * sigma,
        }
    }
}

/// `G = 1 + sum_{i<d} T_i` with `T_i ~ Geometric(p_i)` on `{1, 2, ...}`.
pub fn goal_time_stats(
    params: &LockParams,
    num_samples: usize,
    seed: u64,
) -> Result<GoalTimeStats> {
    params.validate()?;
    if num_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..num_samples)
        .map(|_| {
            1 + params
                .progress_probs
                .iter()
                .map(|&p| {
                    if p >= 1.0 {
                        1
                    } else {
                        let u: f64 = rng.random();
                        ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0) as usize
                    }
                })
                .sum::<usize>()
        })
        .collect();
    Ok(GoalTimeStats {
        d: params.d,
        samples,
    })
}

/// Exact `Pr(G <= h)` by propagating the chain-level distribution.
pub fn goal_time_cdf(params: &LockParams, h: usize) -> f64 {
    let d = params.d;
    if h == 0 {
        return 0.0;
    }
    // level[i] is the mass at level i+1 that has not reached level d
    let mut level = vec![0.0; d];
    level[0] = 1.0;
    let mut arrived = if d == 1 { 1.0 } else { 0.0 };
    for _ in 1..h {
        let mut next = vec![0.0; d];
        for i in 0..d.saturating_sub(1) {
            let p = params.progress_probs[i];
            next[i] += level[i] * (1.0 - p);
            if i + 1 == d - 1 {
                arrived += level[i] * p;
            } else {
                next[i + 1] += level[i] * p;
            }
        }
        level = next;
    }
    arrived
}

/// Both sides of the suboptimality-gap identity
/// `V(pi*) - V(pi) = eps Pr(G <= H - 1, pi leaves pi* before G)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// Difference of dynamic-programming values on the observation MDP.
    pub dp_gap: f64,
    /// `eps` times the joint probability, from a latent-chain recursion.
    pub latent_gap: f64,
    /// `eps Pr(G <= H - 1) Pr(pi leaves pi* before G)`, which treats the two
    /// events as independent.
    pub product_form: f64,
    pub difference: f64,
}

struct ArrivalSplit {
    good: Vec<f64>,
    bad: Vec<f64>,
}

/// Per-step probability of first reaching level `d` on the good or bad chain.
fn arrivals(q: &[f64], params: &LockParams, steps: usize) -> ArrivalSplit {
    let d = params.d;
    let mut good = vec![0.0; steps + 1];
    let mut bad = vec![0.0; steps + 1];
    if d == 1 {
        if steps >= 1 {
            good[1] = 1.0;
        }
        return ArrivalSplit { good, bad };
    }
    let mut g = vec![0.0; d - 1];
    let mut b = vec![0.0; d - 1];
    g[0] = 1.0;
    for t in 1..steps {
        let mut ng = vec![0.0; d - 1];
        let mut nb = vec![0.0; d - 1];
        for i in 0..d - 1 {
            let p = params.progress_probs[i];
            let stay_good = g[i] * q[i];
            let to_bad = g[i] * (1.0 - q[i]) + b[i];
            ng[i] += stay_good * (1.0 - p);
            nb[i] += to_bad * (1.0 - p);
            if i + 1 == d - 1 {
                good[t + 1] += stay_good * p;
                bad[t + 1] += to_bad * p;
            } else {
                ng[i + 1] += stay_good * p;
                nb[i + 1] += to_bad * p;
            }
        }
        g = ng;
        b = nb;
    }
    ArrivalSplit { good, bad }
}

/// Computes the gap of `pi` in the lock of `pi_star` twice: from exact
/// values of the observation MDP and from the latent chain.
pub fn suboptimality_gap(
    mdp: &TabularMdp,
    pi: &Policy,
    pi_star: &Policy,
    phi: &LatentMap,
    params: &LockParams,
) -> Result<GapReport> {
    phi.check(params)?;
    let n = phi.num_observations();
    check_binary_policy(pi, n, "policy")?;
    check_binary_policy(pi_star, n, "pi_star")?;
    if mdp.horizon() != params.horizon || mdp.num_observations() != n {
        return Err(invalid("MDP does not match the lock parameters"));
    }
    let dp_gap = exact_value(mdp, pi_star) - exact_value(mdp, pi);
    let q: Vec<f64> = (1..params.d)
        .map(|i| match_fraction(pi, pi_star, phi.cell(LatentState::Good(i))))
        .collect();
    let h = params.horizon;
    let within = arrivals(&q, params, h.saturating_sub(1));
    let latent_gap = params.epsilon * within.bad.iter().sum::<f64>();

    // long-run probability of arriving on the bad chain
    let long_steps = long_run_steps(params);
    let all = arrivals(&q, params, long_steps);
    let p_bad: f64 = all.bad.iter().sum();
    let p_arrive: f64 = all.good.iter().sum::<f64>() + p_bad;
    let p_bad = if p_arrive > 0.0 {
        p_bad / p_arrive
    } else {
        0.0
    };
    let p_goal = goal_time_cdf(params, h.saturating_sub(1));
    let product_form = params.epsilon * p_goal * p_bad;
    Ok(GapReport {
        dp_gap,
        latent_gap,
        product_form,
        difference: (dp_gap - latent_gap).abs(),
    })
}

/// Steps after which the chain has reached level `d` with probability
/// `1 - 1e-15` or more.
fn long_run_steps(params: &LockParams) -> usize {
    let mut steps = 1usize;
    for p in &params.progress_probs {
        if *p < 1.0 {
            steps += ((1e-17f64).ln() / (1.0 - p).ln()).ceil() as usize;
        } else {
            steps += 1;
        }
    }
    steps.min(10_000_000)
}
