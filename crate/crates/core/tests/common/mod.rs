//! Independent oracles shared by the integration tests. Nothing here calls
//! the library routine it is used to check.
#![allow(dead_code)]

use arps_core::mdp::{Dataset, Episode, Policy, RewardNoise, TabularMdp};
use arps_core::Complex64;
use nalgebra::DMatrix;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Elementary symmetric polynomial by enumerating every subset.
pub fn elem_sym_subsets(lambda: &[Complex64], k: usize) -> Complex64 {
    let d = lambda.len();
    let mut total = c(0.0, 0.0);
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut prod = c(1.0, 0.0);
        for (j, z) in lambda.iter().enumerate() {
            if mask & (1 << j) != 0 {
                prod *= z;
            }
        }
        total += prod;
    }
    total
}

/// `alpha_{m,k}` by enumerating exponent vectors in `{0..m}^d` with exactly
/// `k` positive entries summing to `m`.
pub fn alpha_enumerated(lambda: &[Complex64], m: usize, k: usize) -> Complex64 {
    let d = lambda.len();
    let mut y = vec![0usize; d];
    let mut total = c(0.0, 0.0);
    loop {
        let sum: usize = y.iter().sum();
        let support = y.iter().filter(|&&v| v > 0).count();
        if sum == m && support == k {
            let mut prod = c(1.0, 0.0);
            for (z, &e) in lambda.iter().zip(&y) {
                prod *= z.powu(e as u32);
            }
            total += prod;
        }
        // odometer over {0..m}^d
        let mut i = 0;
        loop {
            if i == d {
                return total;
            }
            if y[i] < m {
                y[i] += 1;
                break;
            }
            y[i] = 0;
            i += 1;
        }
    }
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed form `sum_{j=k}^{min(m+k,d)} C(j-1,k-1) alpha_{m+k,j}` built on
/// the enumeration oracle.
pub fn beta_closed_enumerated(lambda: &[Complex64], m: usize, k: usize) -> Complex64 {
    let d = lambda.len();
    (k..=(m + k).min(d))
        .map(|j| alpha_enumerated(lambda, m + k, j) * binom(j - 1, k - 1))
        .sum()
}

/// Coefficients of `prod_j (z - lambda_j)`, highest degree first.
pub fn char_poly(lambda: &[Complex64]) -> Vec<Complex64> {
    let mut p = vec![c(1.0, 0.0)];
    for z in lambda {
        let mut next = vec![c(0.0, 0.0); p.len() + 1];
        for (i, a) in p.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * z;
        }
        p = next;
    }
    p
}

/// Real recurrence coefficients `(-1)^{k+1} alpha_k` from the expanded
/// characteristic polynomial.
pub fn recurrence_from_poly(lambda: &[Complex64]) -> Vec<f64> {
    char_poly(lambda)[1..].iter().map(|a| -a.re).collect()
}

/// Point uniform in the closed unit disk.
pub fn unit_disk<R: Rng>(rng: &mut R) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    let t = rng.random::<f64>() * std::f64::consts::TAU;
    Complex64::from_polar(r, t)
}

/// Random conjugate-closed spectrum of length `d` inside the unit disk.
pub fn conjugate_closed<R: Rng>(rng: &mut R, d: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        if d - out.len() >= 2 && rng.random_bool(0.5) {
            let z = unit_disk(rng);
            out.push(z);
            out.push(z.conj());
        } else {
            out.push(c(rng.random_range(-1.0..=1.0), 0.0));
        }
    }
    out
}

/// `T^pi` entry `(x', x)` recomputed from the kernel accessors.
pub fn induced_entry(mdp: &TabularMdp, policy: &Policy, xn: usize, x: usize) -> f64 {
    (0..mdp.num_actions())
        .map(|a| policy.prob(x, a) * mdp.next_dist(x, a)[xn])
        .sum()
}

fn expected_reward(mdp: &TabularMdp, policy: &Policy, x: usize) -> f64 {
    (0..mdp.num_actions())
        .map(|a| policy.prob(x, a) * mdp.reward_mean(x, a))
        .sum()
}

/// Expected rewards as a sum over every observation path of length `H`,
/// each weighted by its full probability.
pub fn path_sum_profile(mdp: &TabularMdp, policy: &Policy) -> Vec<f64> {
    let nx = mdp.num_observations();
    let h = mdp.horizon();
    let mut out = vec![0.0; h];
    let mut path = vec![0usize; h];
    loop {
        let mut prob = mdp.initial_dist()[path[0]];
        for t in 1..h {
            prob *= induced_entry(mdp, policy, path[t], path[t - 1]);
        }
        for t in 0..h {
            out[t] += prob * expected_reward(mdp, policy, path[t]);
        }
        let mut i = 0;
        loop {
            if i == h {
                return out;
            }
            if path[i] + 1 < nx {
                path[i] += 1;
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Every uniform-collection episode of `mdp` together with its probability,
/// enumerated over (observation, action, realized reward) outcomes.
pub fn outcome_tree(mdp: &TabularMdp) -> Vec<(Episode, f64)> {
    let nx = mdp.num_observations();
    let k = mdp.num_actions();
    let h = mdp.horizon();
    let mut leaves = Vec::new();
    let mut stack = vec![(
        Episode {
            observations: vec![],
            actions: vec![],
            rewards: vec![],
        },
        1.0,
    )];
    while let Some((ep, prob)) = stack.pop() {
        let t = ep.observations.len();
        if t == h {
            leaves.push((ep, prob));
            continue;
        }
        for x in 0..nx {
            let px = if t == 0 {
                mdp.initial_dist()[x]
            } else {
                mdp.next_dist(ep.observations[t - 1], ep.actions[t - 1])[x]
            };
            if px == 0.0 {
                continue;
            }
            for a in 0..k {
                let mean = mdp.reward_mean(x, a);
                let outcomes = match mdp.reward_noise() {
                    RewardNoise::Deterministic => vec![(mean, 1.0)],
                    RewardNoise::Bernoulli => vec![(1.0, mean), (0.0, 1.0 - mean)],
                };
                for (r, pr) in outcomes {
                    let mut next = ep.clone();
                    next.observations.push(x);
                    next.actions.push(a);
                    next.rewards.push(r);
                    stack.push((next, prob * px * pr / k as f64));
                }
            }
        }
    }
    leaves
}

/// Wraps one episode as a dataset.
pub fn single_episode(ep: Episode, horizon: usize, k: usize) -> Dataset {
    Dataset::new(vec![ep], 0, horizon, k).unwrap()
}

/// Random `n x n` matrix of rank `d` with Gaussian-like factors.
pub fn random_rank_matrix<R: Rng>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let cm = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
    let a = b * cm;
    // keep the spectral radius moderate so powers stay well scaled
    let scale: f64 = a.norm() / (n as f64).sqrt();
    a / scale.max(1e-300)
}

/// Table `a[m][k] = alpha_{m,k}` for `m <= m_max`, read off the generating
/// function `prod_j (1 + s sum_{e >= 1} (lambda_j t)^e)`.
pub fn alpha_generating_table(lambda: &[Complex64], m_max: usize) -> Vec<Vec<Complex64>> {
    let d = lambda.len();
    // poly[m][k]: coefficient of t^m s^k
    let mut poly = vec![vec![c(0.0, 0.0); d + 1]; m_max + 1];
    poly[0][0] = c(1.0, 0.0);
    for z in lambda {
        let mut next = poly.clone();
        for m in 0..=m_max {
            for k in 0..d {
                if poly[m][k] == c(0.0, 0.0) {
                    continue;
                }
                let mut pow = *z;
                for e in 1..=m_max - m {
                    next[m + e][k + 1] += poly[m][k] * pow;
                    pow *= z;
                }
            }
        }
        poly = next;
    }
    poly
}
