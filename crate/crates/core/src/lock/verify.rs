use super::{check_binary_policy, match_fraction, LatentMap, LatentState, LockParams};
use crate::error::Result;
use crate::mdp::{
    bottleneck_match, induced_transition, spectrum_of, Policy, Spectrum, TabularMdp,
    DEFAULT_RANK_TOL,
};
use num_complex::Complex64;
use std::fmt::Write;

/// Tolerance for matching numerical against closed-form eigenvalues.
pub const SPECTRUM_TOL: f64 = 1e-8;
/// Eigenvalues below this modulus count as zero.
const NONZERO_TOL: f64 = 1e-6;

/// Nonzero eigenvalues of `T^pi` in the lock of `pi_star`: per level
/// `i < d`, `1 - p_i` on the bad chain and `(1 - p_i) q_i` on the good one,
/// where `q_i` is the fraction of the `(i, g)` cell on which the policies
/// agree; plus `1` for the absorbing state `-`.
pub fn lock_closed_form_spectrum(
    pi: &Policy,
    pi_star: &Policy,
    phi: &LatentMap,
    params: &LockParams,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * params.d - 1);
    for i in 1..params.d {
        let p = params.progress_probs[i - 1];
        out.push(1.0 - p);
        out.push((1.0 - p) * match_fraction(pi, pi_star, phi.cell(LatentState::Good(i))));
    }
    out.push(1.0);
    out
}

/// Spectrum of `T^pi` in the null lock: the two chains share each level's
/// transitions, so level `i < d` contributes `1 - p_i` and `0`; `-`
/// contributes `1`.
pub fn null_closed_form_spectrum(params: &LockParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * params.d - 1);
    for p in &params.progress_probs {
        out.push(1.0 - p);
        out.push(0.0);
    }
    out.push(1.0);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockSpectrumReport {
    /// Closed-form eigenvalues padded with zeros to the compared length.
    pub expected: Vec<Complex64>,
    /// Leading numerical eigenvalues, same length as `expected`.
    pub numerical: Vec<Complex64>,
    /// `numerical[assignment[i]]` is matched to `expected[i]`.
    pub assignment: Vec<usize>,
    pub max_error: f64,
    /// Singular-value rank of `T^pi`.
    pub numerical_rank: usize,
    pub nonzero_eigenvalues: usize,
    /// `2d - 1`.
    pub rank_bound: usize,
}

impl LockSpectrumReport {
    pub fn spectrum_ok(&self) -> bool {
        self.max_error <= SPECTRUM_TOL
    }

    pub fn rank_ok(&self) -> bool {
        self.numerical_rank <= self.rank_bound
    }

    pub fn nonzero_count_ok(&self) -> bool {
        self.nonzero_eigenvalues <= self.rank_bound
    }

    /// Human-readable side-by-side table of matched eigenvalues.
    pub fn diff(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4} {:>26} {:>26} {:>10}",
            "#", "expected", "numerical", "error"
        );
        for (i, e) in self.expected.iter().enumerate() {
            let n = self.numerical[self.assignment[i]];
            let _ = writeln!(
                s,
                "{:>4} {:>12.9}{:+.9}i {:>12.9}{:+.9}i {:>10.2e}",
                i,
                e.re,
                e.im,
                n.re,
                n.im,
                (e - n).norm()
            );
        }
        let _ = writeln!(
            s,
            "max error {:.3e}; rank {} (bound {}); nonzero eigenvalues {}",
            self.max_error, self.numerical_rank, self.rank_bound, self.nonzero_eigenvalues
        );
        s
    }
}

/// Compares the numerical spectrum of `T^pi` with the closed form. Pass
/// `pi_star = None` for the null lock.
pub fn verify_lock_spectrum(
    mdp: &TabularMdp,
    policy: &Policy,
    pi_star: Option<&Policy>,
    phi: &LatentMap,
    params: &LockParams,
) -> Result<LockSpectrumReport> {
    phi.check(params)?;
    let n = phi.num_observations();
    check_binary_policy(policy, n, "policy")?;
    let closed = match pi_star {
        Some(star) => {
            check_binary_policy(star, n, "pi_star")?;
            lock_closed_form_spectrum(policy, star, phi, params)
        }
        None => null_closed_form_spectrum(params),
    };
    let t = induced_transition(mdp, policy);
    let (spec, rank) = spectrum_of(&t, DEFAULT_RANK_TOL)?;
    let len = rank.max(closed.len());
    let numerical = spec.leading(len).values().to_vec();
    let mut expected: Vec<Complex64> = closed.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    expected.resize(len, Complex64::new(0.0, 0.0));
    let expected = Spectrum::new(expected).values().to_vec();
    let (max_error, assignment) = bottleneck_match(&expected, &numerical);
    let nonzero_eigenvalues = spec
        .values()
        .iter()
        .filter(|z| z.norm() > NONZERO_TOL)
        .count();
    Ok(LockSpectrumReport {
        expected,
        numerical,
        assignment,
        max_error,
        numerical_rank: rank,
        nonzero_eigenvalues,
        rank_bound: 2 * params.d - 1,
    })
}
