use crate::error::{invalid, Error, Result};
use crate::mdp::{Policy, PolicyClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disagreement(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Smallest number of observations on which two distinct members disagree;
/// `None` for classes with fewer than two policies.
pub fn min_pairwise_disagreement(class: &PolicyClass) -> Result<Option<usize>> {
    let tables: Vec<&[usize]> = class
        .iter()
        .map(|p| match p {
            Policy::Deterministic(a) => Ok(a.as_slice()),
            Policy::Stochastic(_) => Err(invalid("policy class must be deterministic")),
        })
        .collect::<Result<_>>()?;
    let mut best = None;
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let dis = disagreement(tables[i], tables[j]);
            best = Some(best.map_or(dis, |b: usize| b.min(dis)));
        }
    }
    Ok(best)
}

/// Binary policies over `n` observations that pairwise disagree on at
/// least `n / 4` observations, built by rejection sampling.
pub fn gv_policy_class(n: usize, class_size: usize, seed: u64) -> Result<PolicyClass> {
    if n < 2 {
        return Err(invalid("need at least two observations"));
    }
    if class_size == 0 {
        return Err(invalid("class size must be positive"));
    }
    if class_size as f64 > (n as f64 / 8.0).exp().max(1.0) {
        return Err(invalid(format!(
            "class size {class_size} exceeds exp(N/8) for N = {n}"
        )));
    }
    let need = n.div_ceil(4);
    let budget = 1000 * class_size + 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<Vec<usize>> = Vec::with_capacity(class_size);
    let mut attempts = 0;
    while accepted.len() < class_size {
        if attempts == budget {
            return Err(Error::BudgetExhausted {
                attempts,
                accepted: accepted.len(),
                requested: class_size,
            });
        }
        attempts += 1;
        let cand: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if accepted.iter().all(|a| disagreement(a, &cand) >= need) {
            accepted.push(cand);
        }
    }
    let class = PolicyClass::new(accepted.into_iter().map(Policy::Deterministic).collect())?;
    if let Some(min) = min_pairwise_disagreement(&class)? {
        if min < need {
            return Err(invalid(format!("pairwise check failed: {min} < {need}")));
        }
    }
    Ok(class)
}
