use crate::error::{invalid, Result};
use crate::mdp::{Dataset, Policy, ProfileKind, RewardProfile};

/// Importance-sampling estimates of the first `steps` expected rewards of a
/// deterministic policy from uniformly collected episodes:
///
/// `R_h = (1/n) sum_t r_h^t prod_{h' <= h} K 1{pi(x_{h'}^t) = a_{h'}^t}`.
pub fn is_reward_estimates(
    dataset: &Dataset,
    policy: &Policy,
    steps: usize,
) -> Result<RewardProfile> {
    if steps > dataset.horizon() {
        return Err(invalid(format!(
            "requested {steps} steps from episodes of length {}",
            dataset.horizon()
        )));
    }
    let acts = match policy {
        Policy::Deterministic(a) => a,
        Policy::Stochastic(_) => {
            return Err(invalid(
                "importance-sampling estimation needs a deterministic policy",
            ))
        }
    };
    let k = dataset.num_actions() as f64;
    let mut sums = vec![0.0; steps];
    for ep in dataset.episodes() {
        let mut weight = 1.0;
        for h in 0..steps {
            let x = ep.observations[h];
            let a = *acts
                .get(x)
                .ok_or_else(|| invalid(format!("observation {x} not covered by the policy")))?;
            if a != ep.actions[h] {
                break;
            }
            weight *= k;
            sums[h] += weight * ep.rewards[h];
        }
    }
    let n = dataset.len() as f64;
    Ok(RewardProfile::new(
        ProfileKind::Estimated,
        sums.into_iter().map(|s| s / n).collect(),
    ))
}

fn log_term(d: usize, class_size: usize, delta: f64) -> f64 {
    (6.0 * d as f64 * class_size as f64 / delta).ln()
}

/// Uniform deviation bound on the first `3d` importance-sampling estimates
/// over a class of `class_size` policies, holding with probability `1 - delta`:
/// `sqrt(2 K^{3d} L / n) + 2 K^{3d} L / n` with `L = ln(6 d |Pi| / delta)`.
pub fn is_error_bound(
    num_actions: usize,
    d: usize,
    class_size: usize,
    delta: f64,
    n: usize,
) -> f64 {
    let kk = (num_actions as f64).powi(3 * d as i32);
    let l = log_term(d, class_size, delta);
    let n = n as f64;
    (2.0 * kk * l / n).sqrt() + 2.0 * kk * l / n
}

/// Residual cap of the spectrum-adaptive fit:
/// `2 d 4^d min{ sqrt(8 K^{3d} L / n), 4 K^{3d} L / n }`.
pub fn adaptive_residual_cap(
    num_actions: usize,
    d: usize,
    class_size: usize,
    delta: f64,
    n: usize,
) -> f64 {
    let kk = (num_actions as f64).powi(3 * d as i32);
    let l = log_term(d, class_size, delta);
    let n = n as f64;
    let dev = (8.0 * kk * l / n).sqrt().min(4.0 * kk * l / n);
    2.0 * d as f64 * 4f64.powi(d as i32) * dev
}
