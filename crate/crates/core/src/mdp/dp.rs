use super::{Policy, TabularMdp};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Exact,
    Estimated,
    Predicted,
}

/// Per-step expected rewards `R_1..R_H` of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardProfile {
    pub kind: ProfileKind,
    pub values: Vec<f64>,
}

impl RewardProfile {
    pub fn new(kind: ProfileKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of the per-step values.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `[T^pi]_{x', x} = E_{a ~ pi(x)} T(x' | x, a)`.
pub fn induced_transition(mdp: &TabularMdp, policy: &Policy) -> DMatrix<f64> {
    let nx = mdp.num_observations();
    let mut t = DMatrix::zeros(nx, nx);
    for x in 0..nx {
        match policy {
            Policy::Deterministic(acts) => {
                for (xn, p) in mdp.next_dist(x, acts[x]).iter().enumerate() {
                    t[(xn, x)] = *p;
                }
            }
            Policy::Stochastic(rows) => {
                for (a, w) in rows[x].iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    for (xn, p) in mdp.next_dist(x, a).iter().enumerate() {
                        t[(xn, x)] += w * p;
                    }
                }
            }
        }
    }
    t
}

fn expected_reward_vector(mdp: &TabularMdp, policy: &Policy) -> DVector<f64> {
    let nx = mdp.num_observations();
    DVector::from_fn(nx, |x, _| {
        (0..mdp.num_actions())
            .map(|a| policy.prob(x, a) * mdp.reward_mean(x, a))
            .sum()
    })
}

/// Exact `R_h = <nu^pi, mu_h>` for `h = 1..H`, where `x_1 ~ mu_0` and
/// `mu_{h+1} = T^pi mu_h`.
pub fn exact_reward_profile(mdp: &TabularMdp, policy: &Policy) -> RewardProfile {
    let t = induced_transition(mdp, policy);
    let nu = expected_reward_vector(mdp, policy);
    let mut mu = DVector::from_column_slice(mdp.initial_dist());
    let mut values = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        if h > 0 {
            mu = &t * &mu;
        }
        values.push(nu.dot(&mu).clamp(0.0, 1.0));
    }
    RewardProfile::new(super::ProfileKind::Exact, values)
}

/// `V^pi = sum_h R_h`.
pub fn exact_value(mdp: &TabularMdp, policy: &Policy) -> f64 {
    exact_reward_profile(mdp, policy).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{RewardNoise, TabularMdp};

    fn two_action_mdp() -> TabularMdp {
        // obs 0 -> {0: 0.3, 1: 0.7} under a=0, {0: 1.0} under a=1
        // obs 1 -> {0: 0.5, 1: 0.5} under a=0, {1: 1.0} under a=1
        TabularMdp::new(
            2,
            2,
            4,
            vec![0.3, 0.7, 0.5, 0.5, 1.0, 0.0, 0.0, 1.0],
            vec![0.1, 0.9, 0.4, 0.2],
            RewardNoise::Deterministic,
            vec![0.6, 0.4],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_policy_selects_slice() {
        let m = two_action_mdp();
        let t = induced_transition(&m, &Policy::constant(2, 0));
        assert_eq!(t[(0, 0)], 0.3);
        assert_eq!(t[(1, 0)], 0.7);
        assert_eq!(t[(0, 1)], 0.5);
        assert_eq!(t[(1, 1)], 0.5);
    }

    #[test]
    fn uniform_policy_averages_slices() {
        let m = two_action_mdp();
        let t = induced_transition(&m, &Policy::uniform(2, 2));
        let t0 = induced_transition(&m, &Policy::constant(2, 0));
        let t1 = induced_transition(&m, &Policy::constant(2, 1));
        let avg = (t0 + t1) * 0.5;
        assert!((t - avg).amax() < 1e-15);
    }

    #[test]
    fn constant_reward_profile() {
        let m = TabularMdp::new(
            2,
            1,
            5,
            vec![0.5, 0.5, 0.2, 0.8],
            vec![0.37, 0.37],
            RewardNoise::Deterministic,
            vec![1.0, 0.0],
        )
        .unwrap();
        let p = exact_reward_profile(&m, &Policy::constant(2, 0));
        assert!(p.values.iter().all(|r| (r - 0.37).abs() < 1e-15));
        assert!((exact_value(&m, &Policy::constant(2, 0)) - 5.0 * 0.37).abs() < 1e-14);
    }

    #[test]
    fn value_is_profile_sum() {
        let m = two_action_mdp();
        let pi = Policy::Deterministic(vec![1, 0]);
        assert_eq!(exact_value(&m, &pi), exact_reward_profile(&m, &pi).total());
    }
}
