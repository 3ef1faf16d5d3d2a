//! Smoothing by convolution with a compactly supported unit-mass kernel.
//!
//! The kernel is sampled on the lattice and renormalised to unit discrete
//! mass for every (epsilon, lattice) pair, and constant inputs are returned
//! unchanged. On the torus convolution is a Fourier multiplier; on bounded
//! domains it is a direct masked sum and the result is valid only where the
//! whole kernel support lies inside the input's valid region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Grid, Mask};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::spectral::Spectral;

/// Radial profile of the mollifier on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelProfile {
    /// `exp(-1 / (1 - r^2))`.
    Bump,
    /// `exp(-r^2 / (2 s^2))` with `s = 1/3`, cut off at `r = 1`.
    TruncatedGaussian,
}

impl KernelProfile {
    pub fn value(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            KernelProfile::Bump => (-1.0 / (1.0 - r * r)).exp(),
            KernelProfile::TruncatedGaussian => (-4.5 * r * r).exp(),
        }
    }

    /// Radial derivative of the profile.
    pub fn derivative(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            KernelProfile::Bump => {
                let q = 1.0 - r * r;
                self.value(r) * (-2.0 * r / (q * q))
            }
            KernelProfile::TruncatedGaussian => -9.0 * r * self.value(r),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bump" => Ok(KernelProfile::Bump),
            "gaussian" | "truncated_gaussian" => Ok(KernelProfile::TruncatedGaussian),
            other => Err(Error::Parameter(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub profile: KernelProfile,
    pub epsilon: f64,
}

impl MollifierKernel {
    pub fn new(profile: KernelProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!("mollifier scale must be positive, got {epsilon}")));
        }
        Ok(Self { profile, epsilon })
    }

    pub fn bump(epsilon: f64) -> Result<Self> {
        Self::new(KernelProfile::Bump, epsilon)
    }

    /// Lattice samples of the scaled kernel and its gradient.
    pub fn discretize(&self, grid: &Grid) -> Result<DiscreteKernel> {
        let h = grid.spacing();
        let hmax = h.iter().cloned().fold(0.0, f64::max);
        if self.epsilon < 2.0 * hmax {
            return Err(Error::Resolution(format!(
                "eps = {} is below two lattice spacings ({})",
                self.epsilon,
                2.0 * hmax
            )));
        }
        if grid.is_periodic() {
            let min_period = grid.extent().iter().cloned().fold(f64::INFINITY, f64::min);
            if self.epsilon >= 0.5 * min_period {
                return Err(Error::Parameter(format!(
                    "eps = {} must be below half the smallest period",
                    self.epsilon
                )));
            }
        }
        let d = grid.dim();
        let reach: Vec<i64> = h.iter().map(|hi| (self.epsilon / hi).floor() as i64).collect();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut gradients = Vec::new();
        let mut idx = vec![0i64; d];
        let total: usize = reach.iter().map(|r| (2 * r + 1) as usize).product();
        for mut k in 0..total {
            for a in (0..d).rev() {
                let w = (2 * reach[a] + 1) as usize;
                idx[a] = (k % w) as i64 - reach[a];
                k /= w;
            }
            let y: Vec<f64> = idx.iter().zip(h).map(|(&i, hi)| i as f64 * hi).collect();
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt() / self.epsilon;
            let w = self.profile.value(r);
            if w <= 0.0 {
                continue;
            }
            let dw = self.profile.derivative(r);
            let grad: Vec<f64> = if r > 0.0 {
                y.iter().map(|v| dw * v / (r * self.epsilon) / self.epsilon).collect()
            } else {
                vec![0.0; d]
            };
            offsets.push(idx.clone());
            weights.push(w);
            gradients.push(grad);
        }
        let mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= mass);
        gradients.iter_mut().flatten().for_each(|g| *g /= mass);
        Ok(DiscreteKernel {
            offsets,
            weights,
            gradients,
        })
    }
}

/// Kernel weights on lattice offsets (unit discrete mass) and the matching
/// samples of the kernel gradient.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub offsets: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

/// Reusable convolution operator for one kernel on one lattice.
#[derive(Debug, Clone)]
pub struct Mollifier {
    grid: Grid,
    kernel: MollifierKernel,
    discrete: DiscreteKernel,
    spectral: Option<(Spectral, Vec<f64>)>,
}

impl Mollifier {
    pub fn new(grid: &Grid, kernel: MollifierKernel) -> Result<Self> {
        let discrete = kernel.discretize(grid)?;
        let spectral = if grid.is_periodic() {
            let sp = Spectral::new(grid.shape(), &grid.extent());
            let mut arr = vec![0.0; grid.len()];
            for (off, w) in discrete.offsets.iter().zip(&discrete.weights) {
                let i = grid.offset(0, off).expect("periodic offset");
                arr[i] += w;
            }
            // The kernel is symmetric, so its transform is real.
            let khat = sp.forward(&arr).into_iter().map(|c| c.re).collect();
            Some((sp, khat))
        } else {
            None
        };
        Ok(Self {
            grid: grid.clone(),
            kernel,
            discrete,
            spectral,
        })
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    pub fn discrete(&self) -> &DiscreteKernel {
        &self.discrete
    }

    /// Fourier multiplier of the discrete kernel (torus only).
    pub fn multiplier(&self) -> Option<&[f64]> {
        self.spectral.as_ref().map(|(_, k)| k.as_slice())
    }

    /// Output validity: points whose kernel support stays inside `valid`.
    pub fn shrink_mask(&self, valid: &Mask) -> Mask {
        if self.grid.is_periodic() {
            return valid.clone();
        }
        let bits = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                valid.get(i)
                    && self.discrete.offsets.iter().all(|off| {
                        let neg: Vec<i64> = off.iter().map(|o| -o).collect();
                        self.grid.offset(i, &neg).is_some_and(|j| valid.get(j))
                    })
            })
            .collect();
        Mask::new(bits)
    }

    /// Convolve one scalar component, `sum_j f(x - y_j) w_j`.
    pub fn smooth(&self, data: &[f64]) -> Vec<f64> {
        match &self.spectral {
            Some((sp, khat)) => sp.apply_multiplier(data, |i| khat[i]),
            None => self.direct(data, &self.discrete.weights, None),
        }
    }

    /// Convolution by direct summation, on the torus or masked to `valid`.
    pub fn smooth_direct(&self, data: &[f64], valid: Option<&Mask>) -> Vec<f64> {
        self.direct(data, &self.discrete.weights, valid)
    }

    fn direct(&self, data: &[f64], weights: &[f64], valid: Option<&Mask>) -> Vec<f64> {
        let grid = &self.grid;
        let neg: Vec<Vec<i64>> = self
            .discrete
            .offsets
            .iter()
            .map(|o| o.iter().map(|v| -v).collect())
            .collect();
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if valid.is_some_and(|m| !m.get(i)) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (off, w) in neg.iter().zip(weights) {
                    if let Some(j) = grid.offset(i, off) {
                        acc += data[j] * w;
                    }
                }
                acc
            })
            .collect()
    }

    /// Gradient of the mollified component by convolution with the sampled
    /// kernel gradient.
    pub fn gradient_direct(&self, data: &[f64], valid: Option<&Mask>) -> Vec<Vec<f64>> {
        (0..self.grid.dim())
            .map(|a| {
                let w: Vec<f64> = self.discrete.gradients.iter().map(|g| g[a]).collect();
                self.direct(data, &w, valid)
            })
            .collect()
    }

    /// Gradient of the mollified component; spectral on the torus.
    pub fn gradient(&self, data: &[f64], valid: Option<&Mask>) -> Vec<Vec<f64>> {
        match &self.spectral {
            Some((sp, khat)) => {
                let mut spec = sp.forward(data);
                spec.iter_mut().zip(khat).for_each(|(s, k)| *s *= k);
                (0..self.grid.dim()).map(|a| sp.derivative_of_spectrum(&spec, a)).collect()
            }
            None => self.gradient_direct(data, valid),
        }
    }

    pub fn apply(&self, field: &Field) -> Result<Field> {
        self.check_grid(field)?;
        let valid = field.valid_mask();
        let mut data = Vec::with_capacity(field.data().len());
        for c in 0..field.components() {
            let comp = field.component(c);
            if let Some(v) = constant_value(comp, &valid) {
                // Unit mass reproduces constants; skip the rounding of the transform.
                data.extend(std::iter::repeat(v).take(comp.len()));
            } else if self.grid.is_periodic() {
                data.extend(self.smooth(comp));
            } else {
                data.extend(self.direct(comp, &self.discrete.weights, Some(&valid)));
            }
        }
        let out = Field::new(self.grid.clone(), field.components(), data)?;
        self.finish(out, field, &valid)
    }

    fn finish(&self, out: Field, input: &Field, valid: &Mask) -> Result<Field> {
        let out = if self.grid.is_periodic() {
            match input.mask() {
                Some(m) => out.with_mask(m.clone())?,
                None => out,
            }
        } else {
            let shrunk = self.shrink_mask(valid);
            if shrunk.count() == 0 {
                return Err(Error::EmptyRegion(format!(
                    "no point lies at distance eps = {} inside the valid region",
                    self.kernel.epsilon
                )));
            }
            // Zero samples outside the shrunk region.
            let npts = self.grid.len();
            let data = out
                .data()
                .iter()
                .enumerate()
                .map(|(k, v)| if shrunk.get(k % npts) { *v } else { 0.0 })
                .collect();
            Field::new(self.grid.clone(), out.components(), data)?.with_mask(shrunk)?
        };
        if input.is_positive() {
            out.into_positive()
        } else {
            Ok(out)
        }
    }

    pub fn apply_gradient(&self, field: &Field) -> Result<Field> {
        self.check_grid(field)?;
        if field.components() != 1 {
            return Err(Error::Shape("gradient of mollification expects a scalar field".into()));
        }
        let valid = field.valid_mask();
        let grads = self.gradient(field.data(), Some(&valid));
        let out = Field::new(self.grid.clone(), self.grid.dim(), grads.concat())?;
        let out = self.finish(out, &field.clone().without_positive(), &valid)?;
        Ok(out)
    }

    fn check_grid(&self, field: &Field) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::Shape("field lattice differs from the mollifier's".into()));
        }
        Ok(())
    }
}

fn constant_value(data: &[f64], valid: &Mask) -> Option<f64> {
    let mut it = data.iter().enumerate().filter(|(i, _)| valid.get(*i)).map(|(_, v)| *v);
    let first = it.next()?;
    it.all(|v| v == first).then_some(first)
}

/// `f * omega_eps`.
pub fn mollify(field: &Field, kernel: &MollifierKernel) -> Result<Field> {
    Mollifier::new(field.grid(), *kernel)?.apply(field)
}

/// `grad (f * omega_eps)` for a scalar field.
pub fn grad_mollified(field: &Field, kernel: &MollifierKernel) -> Result<Field> {
    Mollifier::new(field.grid(), *kernel)?.apply_gradient(field)
}

/// Gradient through direct convolution with the sampled kernel gradient on
/// every domain kind (the cross-check path for the spectral torus route).
pub fn grad_mollified_direct(field: &Field, kernel: &MollifierKernel) -> Result<Field> {
    let m = Mollifier::new(field.grid(), *kernel)?;
    if field.components() != 1 {
        return Err(Error::Shape("gradient of mollification expects a scalar field".into()));
    }
    let valid = field.valid_mask();
    let grads = m.gradient_direct(field.data(), Some(&valid));
    let out = Field::new(field.grid().clone(), field.grid().dim(), grads.concat())?;
    m.finish(out, &field.clone().without_positive(), &valid)
}

/// `((rho^gamma)^eps, (rho^eps)^gamma)` on their common validity region.
pub fn mollify_power(rho: &Field, kernel: &MollifierKernel, gamma: f64) -> Result<(Field, Field)> {
    if !(gamma > 1.0) {
        return Err(Error::Parameter(format!("exponent must exceed 1, got {gamma}")));
    }
    if rho.components() != 1 {
        return Err(Error::Shape("density must be scalar".into()));
    }
    let valid = rho.valid_mask();
    let npts = rho.grid().len();
    for (i, v) in rho.data().iter().enumerate() {
        if valid.get(i % npts) && *v <= 0.0 {
            return Err(Error::Positivity { index: i, value: *v });
        }
    }
    let m = Mollifier::new(rho.grid(), *kernel)?;
    // Invalid samples are never read by the masked convolution; clamp them so
    // the power stays finite.
    let pow = rho.map(|r| r.max(0.0).powf(gamma))?;
    let a = m.apply(&pow)?;
    let b = m.apply(rho)?.map(|r| r.max(0.0).powf(gamma))?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::field::lp_norm;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(d: usize, n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(d).unwrap()), n).unwrap()
    }

    #[test]
    fn discrete_kernel_has_unit_mass_and_support_eps() {
        let g = torus(2, 64);
        for profile in [KernelProfile::Bump, KernelProfile::TruncatedGaussian] {
            let k = MollifierKernel::new(profile, 0.1).unwrap().discretize(&g).unwrap();
            assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(k.weights.iter().all(|&w| w >= 0.0));
            for off in &k.offsets {
                let r = off.iter().map(|&o| (o as f64 / 64.0).powi(2)).sum::<f64>().sqrt();
                assert!(r < 0.1);
            }
            let gsum: f64 = k.gradients.iter().map(|g| g[0]).sum();
            assert!(gsum.abs() < 1e-10);
        }
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        let g = torus(1, 32);
        let k = MollifierKernel::bump(1.5 / 32.0).unwrap();
        assert!(matches!(k.discretize(&g), Err(Error::Resolution(_))));
    }

    #[test]
    fn constants_are_reproduced() {
        let g = torus(2, 32);
        let f = Field::constant(g, 1, 3.5).unwrap();
        let k = MollifierKernel::bump(0.15).unwrap();
        let m = mollify(&f, &k).unwrap();
        assert!(m.data().iter().all(|v| (v - 3.5).abs() < 1e-13));
        let gm = grad_mollified(&f, &k).unwrap();
        assert!(gm.data().iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn spike_stays_nonnegative_and_keeps_mass() {
        let g = torus(1, 128);
        let mut data = vec![0.0; 128];
        data[17] = 1.0;
        let f = Field::scalar(g, data).unwrap();
        let m = mollify(&f, &MollifierKernel::bump(0.1).unwrap()).unwrap();
        assert!(m.data().iter().all(|&v| v > -1e-15));
        assert!((m.data().iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_and_direct_paths_agree_on_torus() {
        let g = torus(2, 64);
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + x[0].cos())
            .unwrap();
        let k = MollifierKernel::bump(0.125).unwrap();
        let m = Mollifier::new(f.grid(), k).unwrap();
        let a = m.smooth(f.data());
        let b = m.smooth_direct(f.data(), None);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bounded_mollification_shrinks_validity() {
        let g = Grid::square(Arc::new(Domain::unit_disk()), 64).unwrap();
        let f = Field::constant(g.clone(), 1, 2.0).unwrap();
        let eps = 0.1;
        let m = mollify(&f, &MollifierKernel::bump(eps).unwrap()).unwrap();
        let mask = m.mask().unwrap();
        for i in 0..g.len() {
            let p = g.point(i);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if mask.get(i) {
                assert!(r < 1.0 - eps + 2.0 * g.spacing()[0]);
                assert!((m.data()[i] - 2.0).abs() < 1e-13);
            }
            if r < 1.0 - eps - 2.0 * g.spacing()[0] {
                assert!(mask.get(i));
            }
        }
    }

    #[test]
    fn gamma_two_defect_is_a_variance() {
        let g = torus(1, 512);
        let rho = Field::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())
            .unwrap()
            .into_positive()
            .unwrap();
        let (a, b) = mollify_power(&rho, &MollifierKernel::bump(0.1).unwrap(), 2.0).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!(x - y >= -1e-12);
        }
        let c = Field::constant(rho.grid().clone(), 1, 1.7).unwrap();
        let (a, b) = mollify_power(&c, &MollifierKernel::bump(0.1).unwrap(), 1.5).unwrap();
        let expect = 1.7f64.powf(1.5);
        assert!(a.data().iter().chain(b.data()).all(|v| (v - expect).abs() < 1e-12));
        let bad = Field::from_fn(rho.grid().clone(), |x| x[0] - 0.5).unwrap();
        assert!(matches!(
            mollify_power(&bad, &MollifierKernel::bump(0.1).unwrap(), 2.0),
            Err(Error::Positivity { .. })
        ));
    }

    #[test]
    fn young_contraction() {
        let g = torus(2, 64);
        let f = Field::from_fn(g, |x| ((13.0 * x[0]).sin() * 7.0 * x[1]).cos().powi(3)).unwrap();
        let m = mollify(&f, &MollifierKernel::bump(0.1).unwrap()).unwrap();
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            assert!(lp_norm(&m, p, None).unwrap() <= lp_norm(&f, p, None).unwrap() + 1e-8);
        }
    }
}
