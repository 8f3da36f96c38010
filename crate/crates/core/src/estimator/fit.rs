use crate::coeffs::recurrence_coefficients;
use crate::error::{invalid, Error, Result};
use crate::mdp::{spectrum_of, Spectrum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::PI;

/// Which eigenvalue program a fit solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Minimize the max recurrence residual over unit-disk spectra.
    BasicMinimaxResidual,
    /// Fix `lambda_1 = 1` and minimize the product of geometric sums of the
    /// remaining moduli subject to a residual cap.
    AdaptiveGeometricProduct,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::BasicMinimaxResidual => "basic",
            Objective::AdaptiveGeometricProduct => "adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub d: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub objective: Objective,
    /// Residual cap; only read by the adaptive objective.
    pub residual_cap: f64,
    /// Horizon of the geometric sums; only read by the adaptive objective.
    pub horizon: usize,
    /// Extra spectra used as additional restart points.
    pub warm_starts: Vec<Spectrum>,
}

impl FitConfig {
    pub fn basic(d: usize) -> Self {
        Self {
            d,
            restarts: 16,
            iterations: 400,
            seed: 0,
            objective: Objective::BasicMinimaxResidual,
            residual_cap: 0.0,
            horizon: 0,
            warm_starts: Vec::new(),
        }
    }

    pub fn adaptive(d: usize, residual_cap: f64, horizon: usize) -> Self {
        Self {
            objective: Objective::AdaptiveGeometricProduct,
            residual_cap,
            horizon,
            ..Self::basic(d)
        }
    }

    fn validate(&self, estimates: &[f64]) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("rank d must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if estimates.len() != 3 * self.d {
            return Err(invalid(format!(
                "fit needs exactly {} estimates, got {}",
                3 * self.d,
                estimates.len()
            )));
        }
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(invalid("estimates must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(with = "spectrum_serde")]
    pub lambda_hat: Spectrum,
    pub delta_hat: f64,
    pub objective_value: f64,
}

mod spectrum_serde {
    use crate::mdp::Spectrum;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: &Spectrum, ser: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(f64, f64)> = s.values().iter().map(|z| (z.re, z.im)).collect();
        pairs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Spectrum, D::Error> {
        let pairs: Vec<(f64, f64)> = Vec::deserialize(de)?;
        Ok(Spectrum::new(
            pairs
                .into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        ))
    }
}

/// `max_{h = d+1..3d} |sum_k c_k R_{h-k} - R_h|` for recurrence coefficients `c`.
pub fn coefficient_residual(coeffs: &[f64], estimates: &[f64]) -> f64 {
    let d = coeffs.len();
    let mut worst = 0.0f64;
    for i in d..estimates.len() {
        let pred: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * estimates[i - 1 - k])
            .sum();
        worst = worst.max((pred - estimates[i]).abs());
    }
    worst
}

/// Max recurrence residual of `lambda` on `estimates` over steps `d+1..len`.
pub fn max_residual(lambda: &Spectrum, estimates: &[f64]) -> Result<f64> {
    let coeffs = recurrence_coefficients(lambda.values())?;
    Ok(coefficient_residual(&coeffs, estimates))
}

/// `sum_{h<H} rho^h`.
pub fn geometric_sum(rho: f64, horizon: usize) -> f64 {
    if (rho - 1.0).abs() < 1e-15 {
        horizon as f64
    } else {
        (1.0 - rho.powi(horizon as i32)) / (1.0 - rho)
    }
}

/// Adaptive objective: product of geometric sums over every eigenvalue but
/// the leading one.
pub fn geometric_product(lambda: &Spectrum, horizon: usize) -> f64 {
    lambda
        .values()
        .iter()
        .skip(1)
        .map(|z| geometric_sum(z.norm(), horizon))
        .product()
}

/// Split of `free` roots into `reals` real roots and `pairs` conjugate pairs.
/// Parameters are laid out as the real roots followed by (modulus, phase).
#[derive(Debug, Clone, Copy)]
struct Layout {
    fixed_one: bool,
    reals: usize,
    pairs: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        self.reals + 2 * self.pairs
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        if i < self.reals {
            (-1.0, 1.0)
        } else if (i - self.reals) % 2 == 0 {
            (0.0, 1.0)
        } else {
            (0.0, PI)
        }
    }

    /// Monic characteristic polynomial, lowest degree first.
    fn poly(&self, p: &[f64]) -> Vec<f64> {
        let mut poly = vec![1.0];
        let mul = |poly: &mut Vec<f64>, factor: &[f64]| {
            let mut out = vec![0.0; poly.len() + factor.len() - 1];
            for (i, a) in poly.iter().enumerate() {
                for (j, b) in factor.iter().enumerate() {
                    out[i + j] += a * b;
                }
            }
            *poly = out;
        };
        if self.fixed_one {
            mul(&mut poly, &[-1.0, 1.0]);
        }
        for r in &p[..self.reals] {
            mul(&mut poly, &[-r, 1.0]);
        }
        for c in 0..self.pairs {
            let rho = p[self.reals + 2 * c];
            let theta = p[self.reals + 2 * c + 1];
            mul(&mut poly, &[rho * rho, -2.0 * rho * theta.cos(), 1.0]);
        }
        poly
    }

    fn coeffs(&self, p: &[f64]) -> Vec<f64> {
        let poly = self.poly(p);
        let d = poly.len() - 1;
        (1..=d).map(|k| -poly[d - k]).collect()
    }

    fn roots(&self, p: &[f64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.dim() + 1);
        if self.fixed_one {
            out.push(Complex64::new(1.0, 0.0));
        }
        out.extend(p[..self.reals].iter().map(|r| Complex64::new(*r, 0.0)));
        for c in 0..self.pairs {
            let z = Complex64::from_polar(p[self.reals + 2 * c], p[self.reals + 2 * c + 1]);
            out.push(z);
            out.push(z.conj());
        }
        out
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self.bounds(i);
                rng.random_range(lo..=hi)
            })
            .collect()
    }

    /// Maps arbitrary roots onto this layout: radial projection to the unit
    /// disk, then pairs are split or real roots merged until the counts fit.
    fn from_roots(&self, roots: &[Complex64]) -> Vec<f64> {
        let mut reals = Vec::new();
        let mut pairs = Vec::new();
        for z in roots {
            let z = if z.norm() > 1.0 { z / z.norm() } else { *z };
            if z.im.abs() <= 1e-9 * z.norm().max(1.0) {
                reals.push(z.re.clamp(-1.0, 1.0));
            } else if z.im > 0.0 {
                pairs.push((z.norm().min(1.0), z.arg()));
            }
        }
        pairs.sort_by(|a, b| (a.0 * a.1.sin()).total_cmp(&(b.0 * b.1.sin())));
        while pairs.len() > self.pairs {
            let (rho, theta) = pairs.remove(0);
            reals.push(rho * theta.cos());
            reals.push(rho * theta.cos());
        }
        reals.sort_by(|a, b| b.total_cmp(a));
        while pairs.len() < self.pairs && reals.len() >= 2 {
            let a = reals.remove(0);
            let b = reals.remove(0);
            let rho = (a * b).abs().sqrt().min(1.0);
            let theta = if rho > 0.0 {
                ((a + b) / (2.0 * rho)).clamp(-1.0, 1.0).acos()
            } else {
                PI / 2.0
            };
            pairs.push((rho, theta));
        }
        while pairs.len() < self.pairs {
            pairs.push((0.0, PI / 2.0));
        }
        reals.resize(self.reals, 0.0);
        let mut p = reals;
        for (rho, theta) in pairs.into_iter().take(self.pairs) {
            p.push(rho);
            p.push(theta);
        }
        p
    }
}

/// Lexicographic fit score: infeasible points rank after feasible ones.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    infeasible: bool,
    value: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        match (self.infeasible, other.infeasible) {
            (false, true) => true,
            (true, false) => false,
            _ => self.value < other.value,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        self.infeasible
            .cmp(&other.infeasible)
            .then_with(|| self.value.total_cmp(&other.value))
    }
}

struct Problem<'a> {
    layout: Layout,
    estimates: &'a [f64],
    objective: Objective,
    cap: f64,
    horizon: usize,
}

impl Problem<'_> {
    fn score(&self, p: &[f64]) -> Score {
        let residual = coefficient_residual(&self.layout.coeffs(p), self.estimates);
        match self.objective {
            Objective::BasicMinimaxResidual => Score {
                infeasible: false,
                value: residual,
            },
            Objective::AdaptiveGeometricProduct => {
                if residual <= self.cap {
                    let mut prod = 1.0;
                    for r in &p[..self.layout.reals] {
                        prod *= geometric_sum(r.abs(), self.horizon);
                    }
                    for c in 0..self.layout.pairs {
                        let g = geometric_sum(p[self.layout.reals + 2 * c], self.horizon);
                        prod *= g * g;
                    }
                    Score {
                        infeasible: false,
                        value: prod,
                    }
                } else {
                    Score {
                        infeasible: true,
                        value: residual,
                    }
                }
            }
        }
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        let (lo, hi) = self.layout.bounds(i);
        v.clamp(lo, hi)
    }

    /// Coordinate pattern search with random-direction polls before each
    /// step contraction.
    fn pattern_search(
        &self,
        mut x: Vec<f64>,
        iterations: usize,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<f64>, Score) {
        let n = x.len();
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.clamp(i, *v);
        }
        let mut best = self.score(&x);
        if n == 0 {
            return (x, best);
        }
        let widths: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = self.layout.bounds(i);
                hi - lo
            })
            .collect();
        let mut scale = 0.25;
        for _ in 0..iterations {
            if scale < 1e-14 {
                break;
            }
            let mut improved = false;
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] = self.clamp(i, x[i] + sign * scale * widths[i]);
                    if y[i] == x[i] {
                        continue;
                    }
                    let s = self.score(&y);
                    if s.better_than(&best) {
                        x = y;
                        best = s;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                for _ in 0..2 * n {
                    let y: Vec<f64> = (0..n)
                        .map(|i| {
                            let u: f64 = rng.random_range(-1.0..=1.0);
                            self.clamp(i, x[i] + u * scale * widths[i])
                        })
                        .collect();
                    let s = self.score(&y);
                    if s.better_than(&best) {
                        x = y;
                        best = s;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                scale *= 0.5;
            }
        }
        (x, best)
    }
}

/// Unconstrained least-squares recurrence of order `order` on `data`,
/// returned as the roots of its characteristic polynomial.
fn least_squares_roots(data: &[f64], order: usize) -> Vec<Complex64> {
    if order == 0 || data.len() <= order {
        return Vec::new();
    }
    let rows = data.len() - order;
    let a = DMatrix::from_fn(rows, order, |r, k| data[order + r - 1 - k]);
    let b = DVector::from_fn(rows, |r, _| data[order + r]);
    let coeffs = match crate::mdp::lstsq(&a, &b, 1e-12) {
        Ok(c) => c,
        Err(_) => return vec![Complex64::new(0.0, 0.0); order],
    };
    if coeffs.iter().any(|c| !c.is_finite()) {
        return vec![Complex64::new(0.0, 0.0); order];
    }
    let mut comp = DMatrix::<f64>::zeros(order, order);
    for k in 0..order {
        comp[(0, k)] = coeffs[k];
    }
    for i in 1..order {
        comp[(i, i - 1)] = 1.0;
    }
    match spectrum_of(&comp, 0.0) {
        Ok((s, _)) => s.leading(order).values().to_vec(),
        Err(_) => vec![Complex64::new(0.0, 0.0); order],
    }
}

fn partitions(free: usize, fixed_one: bool) -> Vec<Layout> {
    (0..=free / 2)
        .map(|pairs| Layout {
            fixed_one,
            reals: free - 2 * pairs,
            pairs,
        })
        .collect()
}

fn run_fit(estimates: &[f64], config: &FitConfig) -> Result<(Spectrum, Score)> {
    config.validate(estimates)?;
    let d = config.d;
    let fixed_one = config.objective == Objective::AdaptiveGeometricProduct;
    if fixed_one && !(config.residual_cap >= 0.0) {
        return Err(invalid("residual cap must be non-negative"));
    }
    let free = if fixed_one { d - 1 } else { d };
    let ls_roots = if fixed_one {
        let diffs: Vec<f64> = estimates.windows(2).map(|w| w[1] - w[0]).collect();
        least_squares_roots(&diffs, free)
    } else {
        least_squares_roots(estimates, free)
    };
    let warm: Vec<Vec<Complex64>> = config
        .warm_starts
        .iter()
        .map(|s| {
            let mut v = s.values().to_vec();
            if fixed_one {
                // drop the root closest to 1, which the layout supplies
                if let Some(pos) = (0..v.len())
                    .min_by(|&i, &j| (v[i] - 1.0).norm().total_cmp(&(v[j] - 1.0).norm()))
                {
                    v.remove(pos);
                }
            }
            v.resize(free, Complex64::new(0.0, 0.0));
            v
        })
        .collect();

    let layouts = partitions(free, fixed_one);
    let starts_per_layout = config.restarts.max(1 + warm.len());
    let jobs: Vec<(usize, usize)> = (0..layouts.len())
        .flat_map(|l| (0..starts_per_layout).map(move |s| (l, s)))
        .collect();

    let results: Vec<(Vec<f64>, Score)> = jobs
        .par_iter()
        .map(|&(l, s)| {
            let layout = layouts[l];
            let problem = Problem {
                layout,
                estimates,
                objective: config.objective,
                cap: config.residual_cap + 1e-12,
                horizon: config.horizon,
            };
            let job_seed = config
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(((l as u64) << 32) | s as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(job_seed);
            let x0 = if s == 0 {
                layout.from_roots(&ls_roots)
            } else if s <= warm.len() {
                layout.from_roots(&warm[s - 1])
            } else {
                layout.random_point(&mut rng)
            };
            problem.pattern_search(x0, config.iterations, &mut rng)
        })
        .collect();

    // jobs are in (layout, restart) order, so the first minimum wins ties
    let mut best: Option<(usize, Score)> = None;
    for (idx, (_, score)) in results.iter().enumerate() {
        match &best {
            Some((_, b)) if score.cmp(b) != Ordering::Less => {}
            _ => best = Some((idx, *score)),
        }
    }
    let (idx, score) = best.expect("at least one fit job");
    let (l, _) = jobs[idx];
    let lambda = Spectrum::new(layouts[l].roots(&results[idx].0));
    Ok((lambda, score))
}

/// Minimax-residual spectrum fit over the closed unit disk.
pub fn fit_basic(estimates: &[f64], config: &FitConfig) -> Result<FitResult> {
    let config = FitConfig {
        objective: Objective::BasicMinimaxResidual,
        ..config.clone()
    };
    let (lambda_hat, _) = run_fit(estimates, &config)?;
    let delta_hat = max_residual(&lambda_hat, estimates)?;
    Ok(FitResult {
        lambda_hat,
        delta_hat,
        objective_value: delta_hat,
    })
}

/// Spectrum fit with `lambda_1 = 1` minimizing the product of geometric sums
/// of the remaining moduli subject to `max residual <= residual_cap`.
pub fn fit_adaptive(estimates: &[f64], config: &FitConfig) -> Result<FitResult> {
    let config = FitConfig {
        objective: Objective::AdaptiveGeometricProduct,
        ..config.clone()
    };
    let (lambda_hat, score) = run_fit(estimates, &config)?;
    let delta_hat = max_residual(&lambda_hat, estimates)?;
    if score.infeasible || delta_hat > config.residual_cap + 1e-12 {
        return Err(Error::Infeasible {
            cap: config.residual_cap,
            best_residual: delta_hat,
        });
    }
    Ok(FitResult {
        objective_value: geometric_product(&lambda_hat, config.horizon),
        lambda_hat,
        delta_hat,
    })
}

/// A named spectrum-fitting strategy.
pub trait SpectrumFitter: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, estimates: &[f64], config: &FitConfig) -> Result<FitResult>;
}

pub struct BasicFitter;

impl SpectrumFitter for BasicFitter {
    fn name(&self) -> &'static str {
        Objective::BasicMinimaxResidual.name()
    }

    fn fit(&self, estimates: &[f64], config: &FitConfig) -> Result<FitResult> {
        fit_basic(estimates, config)
    }
}

pub struct AdaptiveFitter;

impl SpectrumFitter for AdaptiveFitter {
    fn name(&self) -> &'static str {
        Objective::AdaptiveGeometricProduct.name()
    }

    fn fit(&self, estimates: &[f64], config: &FitConfig) -> Result<FitResult> {
        fit_adaptive(estimates, config)
    }
}

/// Fitters selectable by name.
pub struct FitterRegistry {
    entries: Vec<Box<dyn SpectrumFitter>>,
}

impl Default for FitterRegistry {
    fn default() -> Self {
        Self {
            entries: vec![Box::new(BasicFitter), Box::new(AdaptiveFitter)],
        }
    }
}

impl FitterRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Adds a fitter, replacing any existing one with the same name.
    pub fn register(&mut self, fitter: Box<dyn SpectrumFitter>) {
        self.entries.retain(|f| f.name() != fitter.name());
        self.entries.push(fitter);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SpectrumFitter> {
        self.entries
            .iter()
            .find(|f| f.name() == name)
            .map(|f| f.as_ref())
            .ok_or_else(|| {
                invalid(format!(
                    "unknown fitter `{name}` (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|f| f.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::extrapolate_real;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_data_rank_one() {
        let r = fit_basic(&[1.0, 1.0, 1.0], &FitConfig::basic(1)).unwrap();
        assert!((r.lambda_hat.values()[0] - c(1.0, 0.0)).norm() < 1e-9);
        assert!(r.delta_hat < 1e-12);
    }

    #[test]
    fn geometric_data_rank_one() {
        let r = fit_basic(&[0.5, 0.25, 0.125], &FitConfig::basic(1)).unwrap();
        assert!((r.lambda_hat.values()[0] - c(0.5, 0.0)).norm() < 1e-9);
        assert!(r.delta_hat <= 1e-10);
    }

    #[test]
    fn layout_poly_matches_recurrence_coefficients() {
        let layout = Layout {
            fixed_one: true,
            reals: 1,
            pairs: 1,
        };
        let p = [0.3, 0.8, 1.1];
        let ours = layout.coeffs(&p);
        let reference = recurrence_coefficients(&layout.roots(&p)).unwrap();
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn from_roots_respects_partition() {
        let layout = Layout {
            fixed_one: false,
            reals: 3,
            pairs: 0,
        };
        let p = layout.from_roots(&[c(0.2, 0.5), c(0.2, -0.5), c(2.0, 0.0)]);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], 1.0);
        let layout = Layout {
            fixed_one: false,
            reals: 0,
            pairs: 1,
        };
        let p = layout.from_roots(&[c(0.5, 0.0), c(0.5, 0.0)]);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn complex_pair_recovered() {
        let lambda = [
            c(0.9, 0.0),
            Complex64::from_polar(0.7, 1.2),
            Complex64::from_polar(0.7, -1.2),
        ];
        let coeffs = recurrence_coefficients(&lambda).unwrap();
        let data = extrapolate_real(&coeffs, &[0.8, 0.3, 0.5], 9).unwrap();
        let r = fit_basic(&data, &FitConfig::basic(3)).unwrap();
        assert!(r.delta_hat < 1e-8, "{}", r.delta_hat);
        assert!(r.lambda_hat.is_conjugate_closed(1e-12));
    }

    #[test]
    fn adaptive_rank_one_is_unit() {
        let mut cfg = FitConfig::adaptive(1, 0.1, 10);
        cfg.restarts = 2;
        let r = fit_adaptive(&[0.5, 0.5, 0.55], &cfg).unwrap();
        assert_eq!(r.lambda_hat.values(), &[c(1.0, 0.0)]);
        assert_eq!(r.objective_value, 1.0);
    }

    #[test]
    fn adaptive_infeasible_reports_residual() {
        let cfg = FitConfig::adaptive(1, 0.0, 10);
        match fit_adaptive(&[1.0, 0.0, 1.0], &cfg) {
            Err(Error::Infeasible { best_residual, .. }) => assert!(best_residual > 0.5),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(fit_basic(&[1.0, 1.0], &FitConfig::basic(1)).is_err());
        assert!(fit_basic(&[], &FitConfig::basic(0)).is_err());
    }

    #[test]
    fn registry_lookup() {
        let reg = FitterRegistry::default();
        assert_eq!(reg.names(), vec!["basic", "adaptive"]);
        assert!(reg.get("basic").is_ok());
        assert!(reg.get("nope").is_err());
    }
}
