//! One-sided Jacobi SVD. nalgebra's bidiagonal SVD can return inaccurate
//! factors on rank-deficient matrices with repeated columns, which the
//! lifted latent-state models produce routinely.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(sigma) V^T` with singular values in descending order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> Result<Svd> {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * m as f64;
    // columns below this squared norm are numerically zero
    let negligible = (f64::EPSILON * a.norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = u.column(p);
                    let cq = u.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut uu = DMatrix::<f64>::zeros(m, n);
    let mut vv = DMatrix::<f64>::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        if s > 0.0 {
            uu.set_column(k, &(u.column(j) / s));
        }
        vv.set_column(k, &v.column(j));
    }
    Ok(Svd {
        u: uu,
        sigma,
        v: vv,
    })
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Minimum-norm least-squares solution, dropping singular values below
/// `rel_tol * sigma_max`.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    let svd = jacobi_svd(a)?;
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(a.ncols());
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s > rel_tol * smax && s > 0.0 {
            let coef = svd.u.column(k).dot(b) / s;
            x += svd.v.column(k) * coef;
        }
    }
    Ok(x)
}
