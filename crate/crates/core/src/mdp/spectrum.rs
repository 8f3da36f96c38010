use super::linalg::jacobi_svd;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use std::cmp::Ordering;

/// Relative singular-value threshold used for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const EIG_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 20_000;

/// Eigenvalues ordered by non-increasing modulus; equal moduli are ordered
/// by descending real part, then descending imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

fn modulus_bucket(z: &Complex64) -> i64 {
    (z.norm() * 1e10).round() as i64
}

fn order(a: &Complex64, b: &Complex64) -> Ordering {
    modulus_bucket(b)
        .cmp(&modulus_bucket(a))
        .then_with(|| b.re.total_cmp(&a.re))
        .then_with(|| b.im.total_cmp(&a.im))
}

impl Spectrum {
    pub fn new(mut values: Vec<Complex64>) -> Self {
        values.sort_by(order);
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.first().map_or(0.0, |z| z.norm())
    }

    /// The `d` leading eigenvalues (zero-padded when fewer are stored).
    pub fn leading(&self, d: usize) -> Spectrum {
        let mut v: Vec<Complex64> = self.values.iter().take(d).copied().collect();
        v.resize(d, Complex64::new(0.0, 0.0));
        Spectrum::new(v)
    }

    /// Whether the multiset equals its own complex conjugate within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let conj: Vec<Complex64> = self.values.iter().map(|z| z.conj()).collect();
        bottleneck_match(&self.values, &conj).0 <= tol
    }
}

/// Minimum over permutations of the maximum pairwise distance between two
/// equally sized multisets, with the assignment `a[i] <-> b[assign[i]]`.
pub fn bottleneck_match(a: &[Complex64], b: &[Complex64]) -> (f64, Vec<usize>) {
    assert_eq!(a.len(), b.len(), "multisets must have equal size");
    let n = a.len();
    if n == 0 {
        return (0.0, vec![]);
    }
    let dist: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| (x - y).norm()))
        .collect();
    let mut cands = dist.clone();
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    let try_match = |thr: f64| -> Option<Vec<usize>> {
        let mut owner = vec![usize::MAX; n];
        for i in 0..n {
            let mut seen = vec![false; n];
            if !augment(i, thr, n, &dist, &mut owner, &mut seen) {
                return None;
            }
        }
        let mut assign = vec![0; n];
        for (j, &i) in owner.iter().enumerate() {
            assign[i] = j;
        }
        Some(assign)
    };

    let (mut lo, mut hi) = (0, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if try_match(cands[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let assign = try_match(cands[lo]).expect("largest threshold always matches");
    (cands[lo], assign)
}

fn augment(
    i: usize,
    thr: f64,
    n: usize,
    dist: &[f64],
    owner: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for j in 0..n {
        if dist[i * n + j] <= thr && !seen[j] {
            seen[j] = true;
            if owner[j] == usize::MAX || augment(owner[j], thr, n, dist, owner, seen) {
                owner[j] = i;
                return true;
            }
        }
    }
    false
}

/// All eigenvalues of a square real matrix together with its numerical
/// rank (singular values above `rank_tol * sigma_max`).
///
/// The eigenvalues are computed on the `r x r` compression
/// `Sigma_r V_r^T U_r` of the truncated SVD, which carries the same nonzero
/// eigenvalues as the input; the remaining `n - r` eigenvalues are exact zeros.
pub fn spectrum_of(m: &DMatrix<f64>, rank_tol: f64) -> Result<(Spectrum, usize)> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "spectrum of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Spectrum::new(vec![]), 0));
    }
    let svd = jacobi_svd(m)?;
    let sigma_max = svd.sigma[0];
    let r = svd
        .sigma
        .iter()
        .take_while(|&&s| sigma_max > 0.0 && s > rank_tol * sigma_max)
        .count();
    let mut values = Vec::with_capacity(n);
    if r > 0 {
        let u_r = svd.u.columns(0, r);
        let mut vt_r = svd.v.columns(0, r).transpose();
        for k in 0..r {
            vt_r.row_mut(k).scale_mut(svd.sigma[k]);
        }
        let compressed = vt_r * u_r;
        let schur =
            Schur::try_new(compressed, EIG_EPS, MAX_SWEEPS).ok_or(Error::EigenNonConvergence(r))?;
        values.extend(schur.complex_eigenvalues().iter().copied());
    }
    values.resize(n, Complex64::new(0.0, 0.0));
    Ok((Spectrum::new(values), r))
}

/// Eigenvalues of a square complex matrix via the complex Schur form.
pub fn complex_spectrum_of(m: &DMatrix<Complex64>) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(
            "spectrum of a non-square matrix".into(),
        ));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum::new(vec![]));
    }
    if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        return Ok(spectrum_of(&re, 0.0)?.0);
    }
    let schur =
        Schur::try_new(m.clone(), EIG_EPS, MAX_SWEEPS).ok_or(Error::EigenNonConvergence(n))?;
    let (_, t) = schur.unpack();
    Ok(Spectrum::new((0..n).map(|i| t[(i, i)]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ordering_by_modulus_then_real_then_imag() {
        let s = Spectrum::new(vec![
            c(0.0, -1.0),
            c(0.5, 0.0),
            c(0.0, 1.0),
            c(-1.0, 0.0),
            c(1.0, 0.0),
        ]);
        assert_eq!(
            s.values(),
            &[
                c(1.0, 0.0),
                c(0.0, 1.0),
                c(0.0, -1.0),
                c(-1.0, 0.0),
                c(0.5, 0.0)
            ]
        );
    }

    #[test]
    fn identity_spectrum_and_rank() {
        let (s, r) = spectrum_of(&DMatrix::identity(2, 2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r, 2);
        for z in s.values() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rank_one_stochastic() {
        let q = [0.2, 0.5, 0.3];
        let m = DMatrix::from_fn(3, 3, |i, _| q[i]);
        let (s, r) = spectrum_of(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r, 1);
        assert!((s.values()[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(s.values()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let (s, _) = spectrum_of(&m, DEFAULT_RANK_TOL).unwrap();
        assert!((s.values()[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((s.values()[1] - c(0.0, -1.0)).norm() < 1e-12);
        assert!(s.is_conjugate_closed(1e-12));
    }

    #[test]
    fn non_square_rejected() {
        assert!(spectrum_of(&DMatrix::zeros(2, 3), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn complex_triangular_spectrum() {
        let m =
            DMatrix::from_row_slice(2, 2, &[c(0.5, 0.5), c(1.0, 0.0), c(0.0, 0.0), c(-0.2, 0.1)]);
        let s = complex_spectrum_of(&m).unwrap();
        let (err, _) = bottleneck_match(s.values(), &[c(0.5, 0.5), c(-0.2, 0.1)]);
        assert!(err < 1e-12);
    }

    #[test]
    fn bottleneck_prefers_global_assignment() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(1.1, 0.0), c(0.1, 0.0)];
        let (err, assign) = bottleneck_match(&a, &b);
        assert!((err - 0.1).abs() < 1e-12);
        assert_eq!(assign, vec![1, 0]);
    }
}
