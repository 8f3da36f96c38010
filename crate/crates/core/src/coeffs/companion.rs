use super::{beta_table, elementary_all};
use crate::error::{invalid, Result};
use crate::mdp::{spectrum_of, ProfileKind, RewardProfile, Spectrum, DEFAULT_RANK_TOL};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Relative tolerance for treating a spectrum as closed under conjugation.
const CONJ_TOL: f64 = 1e-9;
/// Largest imaginary residue of a recurrence coefficient that is discarded.
const IMAG_TOL: f64 = 1e-10;

/// `d x d` matrix with first row `(-1)^{k+1} alpha_k` and ones on the whole
/// subdiagonal; its characteristic polynomial is `prod_k (z - lambda_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    matrix: DMatrix<Complex64>,
}

impl CompanionMatrix {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Real part, valid when the spectrum is conjugate-closed.
    pub fn real(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }

    /// `det(z I - P)` by Gaussian elimination with partial pivoting.
    pub fn characteristic_at(&self, z: Complex64) -> Complex64 {
        let d = self.dim();
        let mut a = -self.matrix.clone();
        for i in 0..d {
            a[(i, i)] += z;
        }
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
                .unwrap();
            if a[(piv, col)].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if piv != col {
                a.swap_rows(piv, col);
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for i in col + 1..d {
                let f = a[(i, col)] / p;
                for j in col..d {
                    let v = a[(col, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }
}

pub fn companion(lambda: &[Complex64]) -> Result<CompanionMatrix> {
    let d = lambda.len();
    if d == 0 {
        return Err(invalid("companion matrix needs d >= 1"));
    }
    let e = elementary_all(lambda);
    let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for k in 1..=d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        m[(0, k - 1)] = e[k] * sign;
    }
    for i in 1..d {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    Ok(CompanionMatrix { matrix: m })
}

/// Real recurrence coefficients `c_k = (-1)^{k+1} alpha_k(lambda)`.
///
/// Fails unless `lambda` is closed under complex conjugation.
pub fn recurrence_coefficients(lambda: &[Complex64]) -> Result<Vec<f64>> {
    let spec = Spectrum::new(lambda.to_vec());
    let scale = spec.max_modulus().max(1.0);
    if !spec.is_conjugate_closed(CONJ_TOL * scale) {
        return Err(invalid("spectrum is not closed under complex conjugation"));
    }
    let e = elementary_all(lambda);
    let d = lambda.len();
    let mut out = Vec::with_capacity(d);
    for k in 1..=d {
        let mag = e[k].norm().max(1.0);
        if e[k].im.abs() > IMAG_TOL * mag * scale.powi(k as i32) {
            return Err(invalid(format!(
                "coefficient alpha_{k} has imaginary part {:.3e}",
                e[k].im
            )));
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out.push(sign * e[k].re);
    }
    Ok(out)
}

/// Unrolls `R_h = sum_k c_k R_{h-k}` from `seed = (R_1, ..., R_d)` up to `horizon`.
pub fn extrapolate_real(coeffs: &[f64], seed: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let d = coeffs.len();
    if seed.len() != d {
        return Err(invalid(format!("need {d} seed values, got {}", seed.len())));
    }
    if horizon < d {
        return Err(invalid(format!("horizon {horizon} shorter than order {d}")));
    }
    let mut r = Vec::with_capacity(horizon);
    r.extend_from_slice(seed);
    for h in d..horizon {
        let v: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * r[h - 1 - k])
            .sum();
        r.push(v);
    }
    Ok(r)
}

/// Predicted rewards: the seed for `h <= d`, then the order-`d`
/// recurrence with coefficients `(-1)^{k+1} alpha_k(lambda)`.
pub fn extrapolate(lambda: &[Complex64], seed: &[f64], horizon: usize) -> Result<RewardProfile> {
    let coeffs = recurrence_coefficients(lambda)?;
    Ok(RewardProfile::new(
        ProfileKind::Predicted,
        extrapolate_real(&coeffs, seed, horizon)?,
    ))
}

/// Residual of `A^{d+m+1} = sum_k (-1)^{k+1} beta_{m,k}(lambda) A^{d+1-k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChResidual {
    /// Max-norm of the difference.
    pub absolute: f64,
    /// `absolute` over the larger of the left side's max-norm and the
    /// largest right-side term.
    pub relative: f64,
}

/// Checks the extended Cayley-Hamilton identity for a matrix of numerical
/// rank at most `d`, using its `d` leading eigenvalues.
pub fn ch_extension_check(a: &DMatrix<f64>, d: usize, m: usize) -> Result<ChResidual> {
    if d == 0 {
        return Err(invalid("rank bound d must be positive"));
    }
    let (spec, rank) = spectrum_of(a, DEFAULT_RANK_TOL)?;
    if rank > d {
        return Err(invalid(format!("matrix has numerical rank {rank} > {d}")));
    }
    let lambda = spec.leading(d);
    let table = beta_table(lambda.values(), m)?;
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let n = a.nrows();
    // powers[j] = A^j for j = 0..=d+m+1
    let mut powers = vec![DMatrix::<Complex64>::identity(n, n)];
    for j in 1..=d + m + 1 {
        let next = &powers[j - 1] * &ac;
        powers.push(next);
    }
    let lhs = &powers[d + m + 1];
    let mut rhs = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 1..=d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let coef = table.beta(m, k) * sign;
        let term = &powers[d + 1 - k] * coef;
        scale = scale.max(term.iter().map(|z| z.norm()).fold(0.0, f64::max));
        rhs += term;
    }
    let absolute = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let relative = if scale > 0.0 {
        absolute / scale
    } else {
        absolute
    };
    Ok(ChResidual { absolute, relative })
}
