//! Symmetric-polynomial coefficients behind the rank-`d` Cayley-Hamilton
//! recurrences.
//!
//! For a spectrum `lambda` of length `d`:
//!
//! * `alpha_k` is the `k`-th elementary symmetric polynomial;
//! * `alpha_{m,k}` sums `prod_j lambda_j^{y_j}` over exponent vectors with
//!   exactly `k` positive entries summing to `m` (so `alpha_{k,k} = alpha_k`);
//! * `beta_{m,k}` expresses `A^{d+m+1}` in terms of `A^d, ..., A`.

mod companion;

pub use companion::{
    ch_extension_check, companion, extrapolate, extrapolate_real, recurrence_coefficients,
    ChResidual, CompanionMatrix,
};

use crate::error::{invalid, Result};
use crate::mdp::Spectrum;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `e_0, e_1, ..., e_d` of `lambda` by incremental expansion of
/// `prod_j (1 + lambda_j t)`.
pub(crate) fn elementary_all(lambda: &[Complex64]) -> Vec<Complex64> {
    let d = lambda.len();
    let mut e = vec![ZERO; d + 1];
    e[0] = ONE;
    for (j, l) in lambda.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            let prev = e[k - 1];
            e[k] += l * prev;
        }
    }
    e
}

/// `alpha_k(lambda)`, the sum of all products of `k` distinct entries.
pub fn elem_sym(lambda: &[Complex64], k: usize) -> Result<Complex64> {
    let d = lambda.len();
    if k == 0 || k > d {
        return Err(invalid(format!(
            "elementary symmetric index {k} outside 1..={d}"
        )));
    }
    Ok(elementary_all(lambda)[k])
}

/// Table `t[m][k] = alpha_{m,k}` for `m <= m_max`, `k <= d`.
fn alpha_grid(lambda: &[Complex64], m_max: usize) -> Vec<Vec<Complex64>> {
    let d = lambda.len();
    // c[k][m] over the variables processed so far
    let mut c = vec![vec![ZERO; m_max + 1]; d + 1];
    c[0][0] = ONE;
    for (j, l) in lambda.iter().enumerate() {
        let mut pow = vec![ONE; m_max + 1];
        for y in 1..=m_max {
            pow[y] = pow[y - 1] * l;
        }
        for k in (1..=(j + 1).min(d)).rev() {
            for m in (1..=m_max).rev() {
                let mut add = ZERO;
                for y in 1..=m {
                    add += pow[y] * c[k - 1][m - y];
                }
                c[k][m] += add;
            }
        }
    }
    (0..=m_max)
        .map(|m| (0..=d).map(|k| c[k][m]).collect())
        .collect()
}

/// `alpha_{m,k}(lambda)`; zero when `m < k` or `k > d`.
pub fn alpha_mk(lambda: &[Complex64], m: usize, k: usize) -> Complex64 {
    if k > lambda.len() || m < k {
        return ZERO;
    }
    alpha_grid(lambda, m)[m][k]
}

/// `alpha`, `alpha_{m,k}` and `beta_{m,k}` for one spectrum.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    lambda: Spectrum,
    alpha: Vec<Complex64>,
    alpha_mk: Vec<Vec<Complex64>>,
    beta: Vec<Vec<Complex64>>,
}

impl CoefficientTable {
    pub fn lambda(&self) -> &Spectrum {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn m_max(&self) -> usize {
        self.beta.len() - 1
    }

    /// `alpha_k` for `k = 1..=d`.
    pub fn alpha(&self, k: usize) -> Complex64 {
        self.alpha[k - 1]
    }

    /// `alpha_{m,k}` for `m <= m_max + d`.
    pub fn alpha_mk(&self, m: usize, k: usize) -> Complex64 {
        if k > self.dim() || m < k {
            return ZERO;
        }
        self.alpha_mk[m][k]
    }

    /// `beta_{m,k}` for `m <= m_max`, `k = 1..=d`.
    pub fn beta(&self, m: usize, k: usize) -> Complex64 {
        self.beta[m][k - 1]
    }

    pub fn beta_row(&self, m: usize) -> &[Complex64] {
        &self.beta[m]
    }

    /// `sum_{j=k}^{min(m+k, d)} C(j-1, k-1) alpha_{m+k, j}`, the closed form
    /// of `beta_{m,k}`. Kept alongside the recursion as a cross-check.
    pub fn beta_closed_form(&self, m: usize, k: usize) -> Complex64 {
        let d = self.dim();
        (k..=(m + k).min(d))
            .map(|j| self.alpha_mk(m + k, j) * binomial(j - 1, k - 1))
            .sum()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `beta_{m,k}` for `0 <= m <= m_max` by the recursion
/// `beta_{m,k} = beta_{m-1,1} alpha_k - beta_{m-1,k+1}` (`beta_{m-1,d+1} = 0`),
/// starting from `beta_0 = (alpha_1, ..., alpha_d)`.
pub fn beta_table(lambda: &[Complex64], m_max: usize) -> Result<CoefficientTable> {
    let d = lambda.len();
    if d == 0 {
        return Err(invalid("beta table needs a nonempty spectrum"));
    }
    let e = elementary_all(lambda);
    let alpha: Vec<Complex64> = e[1..].to_vec();
    let mut beta = Vec::with_capacity(m_max + 1);
    beta.push(alpha.clone());
    for m in 1..=m_max {
        let prev: &Vec<Complex64> = &beta[m - 1];
        let row: Vec<Complex64> = (0..d)
            .map(|k| {
                let next = if k + 1 < d { prev[k + 1] } else { ZERO };
                prev[0] * alpha[k] - next
            })
            .collect();
        beta.push(row);
    }
    Ok(CoefficientTable {
        lambda: Spectrum::new(lambda.to_vec()),
        alpha,
        alpha_mk: alpha_grid(lambda, m_max + d),
        beta,
    })
}
