//! Scaling experiments for mollification estimates: gradient growth, product
//! and power commutators, and the Taylor-type inequality behind the
//! compressible bound.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Mask;
use crate::error::{Error, Result};
use crate::field::{lp_norm, Field};
use crate::mollify::{KernelProfile, Mollifier, MollifierKernel};

/// Least-squares power law `value ~ C eps^s` in log-log coordinates.
///
/// Values at or below `zero_floor` count as exact zeros and are left out of
/// the regression; when fewer than two values remain the fit is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub exact_zero: Vec<bool>,
    pub zero_floor: f64,
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    /// Largest absolute deviation of the fit from the data in log space.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub theory_exponent: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub all_zero: bool,
    pub pass: bool,
}

impl ScalingFit {
    pub fn fit(epsilons: &[f64], values: &[f64]) -> Result<Self> {
        Self::fit_with_floor(epsilons, values, 0.0)
    }

    pub fn fit_with_floor(epsilons: &[f64], values: &[f64], zero_floor: f64) -> Result<Self> {
        if epsilons.len() != values.len() || epsilons.is_empty() {
            return Err(Error::Shape(format!(
                "{} scales against {} values",
                epsilons.len(),
                values.len()
            )));
        }
        if epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Parameter("scales must be positive and strictly decreasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter("measured values must be finite and nonnegative".into()));
        }
        let exact_zero: Vec<bool> = values.iter().map(|&v| v <= zero_floor).collect();
        let pts: Vec<(f64, f64)> = epsilons
            .iter()
            .zip(values)
            .zip(&exact_zero)
            .filter(|(_, z)| !**z)
            .map(|((e, v), _)| (e.ln(), v.ln()))
            .collect();
        let (exponent, intercept, residual) = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let s = sxy / sxx;
            let c = my - s * mx;
            let r = pts.iter().map(|p| (c + s * p.0 - p.1).abs()).fold(0.0, f64::max);
            (Some(s), Some(c), Some(r))
        } else {
            (None, None, None)
        };
        Ok(Self {
            epsilons: epsilons.to_vec(),
            values: values.to_vec(),
            exact_zero,
            zero_floor,
            exponent,
            intercept,
            residual,
        })
    }

    pub fn all_zero(&self) -> bool {
        self.exact_zero.iter().all(|&z| z)
    }

    /// One-sided check of the exponent against `theory -/+ tolerance`.
    /// Identically vanishing data satisfies any lower bound.
    pub fn summary(&self, theory_exponent: f64, tolerance: f64, bound: Bound) -> FitSummary {
        let (threshold, pass) = match bound {
            Bound::AtLeast => {
                let t = theory_exponent - tolerance;
                (t, self.all_zero() || self.exponent.is_some_and(|s| s >= t))
            }
            Bound::AtMost => {
                let t = theory_exponent + tolerance;
                (t, self.exponent.is_some_and(|s| s <= t))
            }
        };
        FitSummary {
            exponent: self.exponent,
            intercept: self.intercept,
            residual: self.residual,
            theory_exponent,
            threshold,
            bound,
            all_zero: self.all_zero(),
            pass,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "epsilon,value")?;
        for (e, v) in self.epsilons.iter().zip(&self.values) {
            writeln!(f, "{e:e},{v:e}")?;
        }
        Ok(())
    }
}

/// `{period * 2^-k : k = from..=to}`.
pub fn dyadic_epsilons(period: f64, from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| period * 2f64.powi(-k)).collect()
}

fn mollifiers(field: &Field, profile: KernelProfile, epsilons: &[f64]) -> Result<Vec<Mollifier>> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("scales must be nonempty and strictly decreasing".into()));
    }
    epsilons
        .par_iter()
        .map(|&e| Mollifier::new(field.grid(), MollifierKernel::new(profile, e)?))
        .collect()
}

/// Common region for all scales: the validity region of the coarsest one.
fn common_region(outputs: &[Field]) -> Option<Mask> {
    outputs.first().and_then(|f| f.mask().cloned())
}

/// `||grad f^eps||_p` over a dyadic scale list.
pub fn grad_scaling(field: &Field, p: f64, epsilons: &[f64], profile: KernelProfile) -> Result<ScalingFit> {
    let ms = mollifiers(field, profile, epsilons)?;
    let grads = ms.par_iter().map(|m| m.apply_gradient(field)).collect::<Result<Vec<_>>>()?;
    let region = common_region(&grads);
    let values = grads
        .par_iter()
        .map(|g| lp_norm(g, p, region.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ScalingFit::fit(epsilons, &values)
}

/// Mollification defect `(g1 g2)^eps - g1^eps g2^eps` at one scale.
pub fn product_defect(g1: &Field, g2: &Field, m: &Mollifier) -> Result<Field> {
    let prod = g1.mul(g2)?;
    m.apply(&prod)?.sub(&m.apply(g1)?.mul(&m.apply(g2)?)?)
}

fn holder_conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `||(g1 g2)^eps - g1^eps g2^eps||_p` over a dyadic scale list, with
/// `1/p >= 1/p1 + 1/p2` (equality is the Holder pairing; larger `1/p` is
/// admissible on the finite-measure lattice domains used here).
///
/// Values below `1e-13 ||g1||_inf ||g2||_inf` are at the rounding level of
/// the transforms and are reported as exact zeros.
pub fn product_commutator(
    g1: &Field,
    g2: &Field,
    p: f64,
    p1: f64,
    p2: f64,
    epsilons: &[f64],
    profile: KernelProfile,
) -> Result<ScalingFit> {
    if [p, p1, p2].iter().any(|e| !(*e >= 1.0)) {
        return Err(Error::Parameter("exponents must lie in [1, inf]".into()));
    }
    let gap = holder_conjugate(p) - holder_conjugate(p1) - holder_conjugate(p2);
    if gap < -1e-12 {
        return Err(Error::Parameter(format!("1/{p} < 1/{p1} + 1/{p2}")));
    }
    if g1.grid() != g2.grid() {
        return Err(Error::Shape("commutator inputs live on different lattices".into()));
    }
    let ms = mollifiers(g1, profile, epsilons)?;
    let defects = ms
        .par_iter()
        .map(|m| product_defect(g1, g2, m))
        .collect::<Result<Vec<_>>>()?;
    let region = common_region(&defects);
    let values = defects
        .par_iter()
        .map(|d| lp_norm(d, p, region.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let scale = lp_norm(g1, f64::INFINITY, None)? * lp_norm(g2, f64::INFINITY, None)?;
    ScalingFit::fit_with_floor(epsilons, &values, 1e-13 * scale)
}

/// `||(rho^gamma)^eps - (rho^eps)^gamma||_inf` over a dyadic scale list.
pub fn power_commutator_scaling(
    rho: &Field,
    gamma: f64,
    epsilons: &[f64],
    profile: KernelProfile,
) -> Result<ScalingFit> {
    if !rho.is_positive() {
        return Err(Error::Parameter("density must be flagged positive".into()));
    }
    if !(gamma > 1.0) {
        return Err(Error::Parameter(format!("exponent must exceed 1, got {gamma}")));
    }
    let ms = mollifiers(rho, profile, epsilons)?;
    let pow = rho.map(|r| r.powf(gamma))?;
    let defects = ms
        .par_iter()
        .map(|m| {
            let a = m.apply(&pow)?;
            let b = m.apply(rho)?.map(|r| r.max(0.0).powf(gamma))?;
            a.sub(&b)
        })
        .collect::<Result<Vec<_>>>()?;
    let region = common_region(&defects);
    let values = defects
        .par_iter()
        .map(|d| lp_norm(d, f64::INFINITY, region.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ScalingFit::fit(epsilons, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub gamma: f64,
    pub samples: usize,
    pub max_ratio: f64,
    pub argmax: Option<(f64, f64)>,
    /// Samples whose ratio is not a finite number.
    pub violations: usize,
}

fn binomial(gamma: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |c, j| c * (gamma - j as f64) / (j + 1) as f64)
}

/// `|(a+b)^g - a^g - g a^(g-1) b|`, summed as a binomial series where that
/// avoids cancellation.
pub fn taylor_remainder(a: f64, b: f64, gamma: f64) -> f64 {
    let t = b / a;
    if gamma.fract() == 0.0 && gamma > 0.0 && gamma <= 64.0 {
        let g = gamma as i32;
        return (2..=g)
            .map(|k| binomial(gamma, k as u32) * a.powi(g - k) * b.powi(k))
            .sum::<f64>()
            .abs();
    }
    if t.abs() < 0.5 {
        let mut sum = 0.0;
        let mut c = binomial(gamma, 2);
        let mut tk = t * t;
        for k in 2..200u32 {
            let term = c * tk;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            c *= (gamma - k as f64) / (k + 1) as f64;
            tk *= t;
        }
        return (a.powf(gamma) * sum).abs();
    }
    ((a + b).powf(gamma) - a.powf(gamma) - gamma * a.powf(gamma - 1.0) * b).abs()
}

/// `|b|^g + (a+b)^(g-2) b^2`.
pub fn taylor_majorant(a: f64, b: f64, gamma: f64) -> f64 {
    if gamma.fract() == 0.0 && gamma.abs() <= 64.0 {
        let g = gamma as i32;
        return b.abs().powi(g) + (a + b).powi(g - 2) * (b * b);
    }
    b.abs().powf(gamma) + (a + b).powf(gamma - 2.0) * (b * b)
}

/// Ratio `L / R` over paired samples of `(a, b)` with `a > 0`, `a + b > 0`.
/// Samples with `b = 0` have `L = 0` and contribute ratio 0.
pub fn taylor_defect_check(a: &[f64], b: &[f64], gamma: f64) -> Result<TaylorReport> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} values of a against {} of b", a.len(), b.len())));
    }
    if !(gamma > 1.0) {
        return Err(Error::Parameter(format!("exponent must exceed 1, got {gamma}")));
    }
    if let Some(i) = (0..a.len()).find(|&i| !(a[i] > 0.0 && a[i] + b[i] > 0.0)) {
        return Err(Error::Parameter(format!(
            "sample {i} violates a > 0, a + b > 0 (a = {}, b = {})",
            a[i], b[i]
        )));
    }
    let ratios: Vec<f64> = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(&a, &b)| {
            if b == 0.0 {
                0.0
            } else {
                taylor_remainder(a, b, gamma) / taylor_majorant(a, b, gamma)
            }
        })
        .collect();
    let violations = ratios.iter().filter(|r| !r.is_finite()).count();
    let mut best: Option<usize> = None;
    for (i, r) in ratios.iter().enumerate() {
        if r.is_finite() && best.map_or(true, |j| *r > ratios[j]) {
            best = Some(i);
        }
    }
    Ok(TaylorReport {
        gamma,
        samples: a.len(),
        max_ratio: best.map_or(0.0, |i| ratios[i]),
        argmax: best.map(|i| (a[i], b[i])),
        violations,
    })
}

/// Per-sample ratios, for callers that need the full distribution.
pub fn taylor_ratios(a: &[f64], b: &[f64], gamma: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&a, &b)| {
            if b == 0.0 {
                0.0
            } else {
                taylor_remainder(a, b, gamma) / taylor_majorant(a, b, gamma)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Grid};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus1(n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(1).unwrap()), n).unwrap()
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let eps = dyadic_epsilons(1.0, 3, 7);
        for s in [-1.5, 0.0, 0.75, 2.0] {
            let v: Vec<f64> = eps.iter().map(|e| 3.0 * e.powf(s)).collect();
            let f = ScalingFit::fit(&eps, &v).unwrap();
            assert!((f.exponent.unwrap() - s).abs() < 1e-10);
            assert!((f.intercept.unwrap() - 3f64.ln()).abs() < 1e-10);
            assert!(f.residual.unwrap() < 1e-10);
        }
    }

    #[test]
    fn fit_rejects_bad_input_and_handles_zeros() {
        assert!(ScalingFit::fit(&[0.1, 0.2], &[1.0, 1.0]).is_err());
        assert!(ScalingFit::fit(&[0.2, 0.1], &[1.0, f64::NAN]).is_err());
        let f = ScalingFit::fit(&[0.4, 0.2, 0.1], &[0.0, 0.0, 0.0]).unwrap();
        assert!(f.all_zero() && f.exponent.is_none());
        assert!(f.summary(1.0, 0.15, Bound::AtLeast).pass);
        assert!(!f.summary(1.0, 0.15, Bound::AtMost).pass);
        let f = ScalingFit::fit(&[0.4, 0.2, 0.1], &[0.0, 2.0, 1.0]).unwrap();
        assert_eq!(f.exact_zero, vec![true, false, false]);
        assert!((f.exponent.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_factor_commutator_vanishes() {
        let g = torus1(512);
        let g1 = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin() + (14.0 * PI * x[0]).cos()).unwrap();
        let g2 = Field::constant(g.clone(), 1, 1.3).unwrap();
        let eps = dyadic_epsilons(1.0, 3, 6);
        let f = product_commutator(&g1, &g2, 2.0, 2.0, f64::INFINITY, &eps, KernelProfile::Bump).unwrap();
        assert!(f.all_zero(), "{:?}", f.values);
        assert!(product_commutator(&g1, &g2, 2.0, 2.0, 2.0, &eps, KernelProfile::Bump).is_err());
    }

    #[test]
    fn commutator_is_symmetric() {
        let g = torus1(256);
        let a = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin().exp()).unwrap();
        let b = Field::from_fn(g.clone(), |x| (6.0 * PI * x[0]).cos() + 0.2 * x[0].sin()).unwrap();
        let eps = dyadic_epsilons(1.0, 3, 5);
        let f = product_commutator(&a, &b, 1.5, 3.0, 3.0, &eps, KernelProfile::Bump).unwrap();
        let r = product_commutator(&b, &a, 1.5, 3.0, 3.0, &eps, KernelProfile::Bump).unwrap();
        for (x, y) in f.values.iter().zip(&r.values) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn smooth_power_commutator_is_second_order() {
        let g = torus1(1024);
        let rho = Field::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin())
            .unwrap()
            .into_positive()
            .unwrap();
        let eps = dyadic_epsilons(1.0, 3, 7);
        let f = power_commutator_scaling(&rho, 1.5, &eps, KernelProfile::Bump).unwrap();
        assert!(f.exponent.unwrap() >= 1.8, "{:?}", f.exponent);
        let c = Field::constant(rho.grid().clone(), 1, 1.7).unwrap().into_positive().unwrap();
        let f = power_commutator_scaling(&c, 1.5, &eps, KernelProfile::Bump).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn taylor_quadratic_case_is_one_half() {
        let a = [0.5, 1.0, 2.0, 3.0, 1.0];
        let b = [-0.2, 0.7, 1.9, -1.0, 0.0];
        let r = taylor_ratios(&a, &b, 2.0);
        for (ri, bi) in r.iter().zip(&b) {
            if *bi != 0.0 {
                assert_eq!(*ri, 0.5);
            } else {
                assert_eq!(*ri, 0.0);
            }
        }
        assert!(taylor_defect_check(&[1.0], &[-1.5], 2.0).is_err());
        assert!(taylor_defect_check(&[0.0], &[0.5], 2.0).is_err());
    }

    #[test]
    fn series_matches_direct_formula_away_from_cancellation() {
        for &g in &[1.2, 1.5, 2.7] {
            for &(a, b) in &[(1.0f64, 0.3f64), (2.0, -0.7), (0.5, 0.2)] {
                let direct = (a + b).powf(g) - a.powf(g) - g * a.powf(g - 1.0) * b;
                assert!((taylor_remainder(a, b, g) - direct.abs()).abs() < 1e-12);
            }
        }
    }
}
