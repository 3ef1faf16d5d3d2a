//! Synthetic fields with prescribed increment exponents: lacunary cosine
//! series, positive densities squashed into a band, divergence-free
//! projections and white noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::{lp_norm, Field};
use crate::spectral::Spectral;

/// Parameters of a lacunary series
/// `A sum_{j=0}^{J} 2^(-alpha j) cos(2^j k_j . x + phi_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughSpec {
    pub alpha: f64,
    pub octaves: u32,
    pub seed: u64,
    pub amplitude: f64,
}

impl RoughSpec {
    pub fn new(alpha: f64, octaves: u32, seed: u64, amplitude: f64) -> Result<Self> {
        let s = Self {
            alpha,
            octaves,
            seed,
            amplitude,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Parameter("amplitude must be finite".into()));
        }
        if self.octaves > 40 {
            return Err(Error::Parameter(format!("{} octaves is beyond any lattice", self.octaves)));
        }
        Ok(())
    }
}

/// One term of the series: integer direction, octave and phase.
#[derive(Debug, Clone, PartialEq)]
struct Octave {
    direction: Vec<i64>,
    weight: f64,
    frequency: f64,
    phase: f64,
}

fn octaves(grid: &Grid, spec: &RoughSpec, stream: u64) -> Result<Vec<Octave>> {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(spec.octaves as usize + 1);
    for j in 0..=spec.octaves {
        let direction: Vec<i64> = loop {
            let m: Vec<i64> = (0..d).map(|_| rng.gen_range(-1..=1)).collect();
            if m.iter().any(|&c| c != 0) {
                break m;
            }
        };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        out.push(Octave {
            direction,
            weight: 2f64.powf(-spec.alpha * j as f64),
            frequency: 2f64.powi(j as i32),
            phase,
        });
    }
    for o in &out {
        for (a, &m) in o.direction.iter().enumerate() {
            let mode = o.frequency * m.unsigned_abs() as f64;
            if mode >= grid.shape()[a] as f64 / 2.0 {
                return Err(Error::Resolution(format!(
                    "mode {} along axis {a} reaches the Nyquist limit of a {}-point lattice",
                    mode,
                    grid.shape()[a]
                )));
            }
        }
    }
    Ok(out)
}

fn require_torus(grid: &Grid) -> Result<()> {
    if !grid.is_periodic() {
        return Err(Error::DomainKind("synthetic rough fields are generated on the torus".into()));
    }
    Ok(())
}

fn lacunary_stream(grid: &Grid, spec: &RoughSpec, stream: u64) -> Result<Vec<f64>> {
    let terms = octaves(grid, spec, stream)?;
    let lengths = grid.extent();
    let pts = grid.points();
    Ok(pts
        .par_iter()
        .map(|x| {
            spec.amplitude
                * terms
                    .iter()
                    .map(|o| {
                        let arg: f64 = o
                            .direction
                            .iter()
                            .zip(x)
                            .zip(&lengths)
                            .map(|((&m, xi), l)| m as f64 * xi / l)
                            .sum();
                        o.weight * (std::f64::consts::TAU * o.frequency * arg + o.phase).cos()
                    })
                    .sum::<f64>()
        })
        .collect())
}

/// Weierstrass-type scalar field on the torus, deterministic per seed.
pub fn lacunary_scalar(grid: &Grid, spec: &RoughSpec) -> Result<Field> {
    require_torus(grid)?;
    spec.validate()?;
    Field::scalar(grid.clone(), lacunary_stream(grid, spec, 0)?)
}

/// Component-wise lacunary vector field (independent streams per component),
/// Leray-projected.
pub fn lacunary_velocity(grid: &Grid, spec: &RoughSpec) -> Result<Field> {
    require_torus(grid)?;
    spec.validate()?;
    let parts = (0..grid.dim())
        .map(|c| Field::scalar(grid.clone(), lacunary_stream(grid, spec, c as u64 + 1)?))
        .collect::<Result<Vec<_>>>()?;
    leray_project(&Field::stack(&parts)?)
}

/// Affine squash of `base` into `[lo, hi]` centred at `(lo + hi) / 2`.
pub fn bounded_density(base: &Field, lo: f64, hi: f64) -> Result<Field> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < m < M, got m = {lo}, M = {hi}")));
    }
    if base.components() != 1 {
        return Err(Error::Shape("density base must be scalar".into()));
    }
    let sup = lp_norm(base, f64::INFINITY, None)?;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let s = if sup > 0.0 { half / sup } else { 0.0 };
    base.map(|b| (mid + s * b).clamp(lo, hi))?.into_positive()
}

/// Spectral projection onto divergence-free fields on the torus; the mean is
/// untouched. Derivative wavenumbers are used, so the spectral divergence of
/// the result vanishes to rounding.
pub fn leray_project(u: &Field) -> Result<Field> {
    let grid = u.grid();
    require_torus(grid)?;
    let d = grid.dim();
    if !(d == 2 || d == 3) || u.components() != d {
        return Err(Error::Shape(format!(
            "projection needs a {d}-component field in 2 or 3 dimensions, got {} components",
            u.components()
        )));
    }
    let sp = Spectral::new(grid.shape(), &grid.extent());
    let specs: Vec<_> = (0..d).map(|c| sp.forward(u.component(c))).collect();
    let ks: Vec<Vec<f64>> = (0..d).map(|a| sp.deriv_wavenumbers_flat(a)).collect();
    let mut out = specs.clone();
    for i in 0..grid.len() {
        let k2: f64 = ks.iter().map(|k| k[i] * k[i]).sum();
        if k2 == 0.0 {
            continue;
        }
        let kdotu = (0..d).fold(rustfft::num_complex::Complex64::default(), |acc, a| {
            acc + specs[a][i] * ks[a][i]
        });
        for a in 0..d {
            out[a][i] = specs[a][i] - kdotu * (ks[a][i] / k2);
        }
    }
    let data: Vec<f64> = out.into_iter().flat_map(|s| sp.inverse(s)).collect();
    let f = Field::new(grid.clone(), d, data)?;
    match u.mask() {
        Some(m) => f.with_mask(m.clone()),
        None => Ok(f),
    }
}

/// Spectral divergence, sup norm.
pub fn spectral_divergence_max(u: &Field) -> Result<f64> {
    let grid = u.grid();
    require_torus(grid)?;
    let sp = Spectral::new(grid.shape(), &grid.extent());
    let mut div = vec![0.0; grid.len()];
    for a in 0..grid.dim() {
        for (acc, v) in div.iter_mut().zip(sp.derivative(u.component(a), a)) {
            *acc += v;
        }
    }
    Ok(div.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Independent standard normal samples scaled by `amplitude`.
pub fn white_noise(grid: &Grid, seed: u64, amplitude: f64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|_| amplitude * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Field::scalar(grid.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(d: usize, n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(d).unwrap()), n).unwrap()
    }

    #[test]
    fn single_octave_is_a_cosine() {
        let g = torus(1, 64);
        let spec = RoughSpec::new(0.5, 0, 3, 2.0).unwrap();
        let f = lacunary_scalar(&g, &spec).unwrap();
        let phase = {
            // Recover the phase from the sample at 0.
            let c = f.data()[0] / 2.0;
            let s = -(f.data()[16]) / 2.0;
            s.atan2(c)
        };
        for (i, v) in f.data().iter().enumerate() {
            let x = i as f64 / 64.0;
            assert!((v - 2.0 * (2.0 * PI * x + phase).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let g = torus(2, 64);
        let spec = RoughSpec::new(1.0 / 3.0, 4, 11, 1.0).unwrap();
        assert_eq!(lacunary_scalar(&g, &spec).unwrap(), lacunary_scalar(&g, &spec).unwrap());
        let other = RoughSpec { seed: 12, ..spec };
        assert_ne!(lacunary_scalar(&g, &spec).unwrap(), lacunary_scalar(&g, &other).unwrap());
    }

    #[test]
    fn nyquist_guard() {
        let g = torus(1, 64);
        assert!(lacunary_scalar(&g, &RoughSpec::new(0.5, 4, 1, 1.0).unwrap()).is_ok());
        assert!(matches!(
            lacunary_scalar(&g, &RoughSpec::new(0.5, 5, 1, 1.0).unwrap()),
            Err(Error::Resolution(_))
        ));
        assert!(RoughSpec::new(1.0, 3, 1, 1.0).is_err());
    }

    #[test]
    fn density_band() {
        let g = torus(1, 128);
        let zero = Field::constant(g.clone(), 1, 0.0).unwrap();
        let r = bounded_density(&zero, 0.5, 2.0).unwrap();
        assert!(r.is_positive());
        assert!(r.data().iter().all(|&v| v == 1.25));
        let base = lacunary_scalar(&g, &RoughSpec::new(2.0 / 3.0, 5, 2, 1.0).unwrap()).unwrap();
        let r = bounded_density(&base, 0.5, 2.0).unwrap();
        assert!(r.data().iter().all(|&v| (0.5..=2.0).contains(&v)));
        assert!(bounded_density(&base, 0.0, 2.0).is_err());
        assert!(bounded_density(&base, 2.0, 2.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let g = torus(2, 32);
        let shear = Field::vector_from_fn(g.clone(), 2, |x| vec![(2.0 * PI * x[1]).sin(), 0.0]).unwrap();
        let p = leray_project(&shear).unwrap();
        for (a, b) in p.data().iter().zip(shear.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let grad = Field::vector_from_fn(g.clone(), 2, |x| vec![-2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0]).unwrap();
        let p = leray_project(&grad).unwrap();
        assert!(p.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn projection_of_noise_is_idempotent_and_solenoidal() {
        let g = torus(2, 32);
        let parts: Vec<Field> = (0..2).map(|s| white_noise(&g, s, 1.0).unwrap()).collect();
        let u = Field::stack(&parts).unwrap();
        let p = leray_project(&u).unwrap();
        let pp = leray_project(&p).unwrap();
        for (a, b) in p.data().iter().zip(pp.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(spectral_divergence_max(&p).unwrap() < 1e-10);
    }
}
