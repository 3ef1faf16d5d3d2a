//! Pseudo-spectral time integration of 2D periodic variable-density
//! incompressible Euler and isentropic compressible Euler, and the mollified
//! energy-budget terms evaluated along the resulting trajectories.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::commutator::ScalingFit;
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::{trapezoid, Field, TimeSeriesField};
use crate::mollify::{KernelProfile, Mollifier, MollifierKernel};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Lattice points per axis.
    pub n: usize,
    /// Requested step; the CFL bound caps it every step. `None` uses the bound.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub dealias: bool,
    pub nu: f64,
    /// Isentropic exponent (compressible runs only).
    pub gamma: Option<f64>,
    pub pressure_tol: f64,
    /// Frames are stored every this many steps (and at the final time).
    pub sample_every: usize,
    /// Courant number in `dt <= cfl * h / max speed`.
    pub cfl: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 128,
            dt: None,
            t_final: 1.0,
            dealias: true,
            nu: 0.0,
            gamma: None,
            pressure_tol: 1e-10,
            sample_every: 10,
            cfl: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Parameter(format!("lattice size {} is too small", self.n)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Parameter("final time must be finite and nonnegative".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
            }
        }
        if !(self.nu >= 0.0) {
            return Err(Error::Parameter("viscosity must be nonnegative".into()));
        }
        if !(self.pressure_tol > 0.0 && self.pressure_tol <= 1e-10) {
            return Err(Error::Parameter(format!(
                "pressure tolerance must lie in (0, 1e-10], got {}",
                self.pressure_tol
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Parameter(format!("Courant number must lie in (0, 0.5], got {}", self.cfl)));
        }
        if self.sample_every == 0 {
            return Err(Error::Parameter("sample_every must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 1.0) {
                return Err(Error::Parameter(format!("isentropic exponent must exceed 1, got {g}")));
            }
        }
        Ok(())
    }
}

/// Spectral operators on a 2D periodic lattice.
#[derive(Debug, Clone)]
pub(crate) struct Ops {
    sp: Spectral,
    kx: Vec<f64>,
    ky: Vec<f64>,
    k2: Vec<f64>,
    keep: Option<Vec<bool>>,
    h: f64,
}

impl Ops {
    pub(crate) fn new(grid: &Grid, dealias: bool) -> Result<Self> {
        if !grid.is_periodic() || grid.dim() != 2 {
            return Err(Error::DomainKind("the flow solvers run on the 2D torus".into()));
        }
        let sp = Spectral::new(grid.shape(), &grid.extent());
        let kx = sp.deriv_wavenumbers_flat(0);
        let ky = sp.deriv_wavenumbers_flat(1);
        let k2 = kx.iter().zip(&ky).map(|(a, b)| a * a + b * b).collect();
        let keep = dealias.then(|| sp.dealias_mask(2.0 / 3.0));
        Ok(Self {
            sp,
            kx,
            ky,
            k2,
            keep,
            h: grid.min_spacing(),
        })
    }

    fn fwd(&self, f: &[f64]) -> Vec<Complex64> {
        self.sp.forward(f)
    }

    fn inv(&self, f: Vec<Complex64>) -> Vec<f64> {
        self.sp.inverse(f)
    }

    fn mul_ik(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        let k = if axis == 0 { &self.kx } else { &self.ky };
        hat.iter().zip(k).map(|(c, k)| Complex64::new(-k * c.im, k * c.re)).collect()
    }

    fn deriv_hat(&self, hat: &[Complex64], axis: usize) -> Vec<f64> {
        self.inv(self.mul_ik(hat, axis))
    }

    pub(crate) fn grad(&self, f: &[f64]) -> [Vec<f64>; 2] {
        let hat = self.fwd(f);
        [self.deriv_hat(&hat, 0), self.deriv_hat(&hat, 1)]
    }

    fn div_hat(&self, a: &[f64], b: &[f64]) -> Vec<Complex64> {
        let ah = self.mul_ik(&self.fwd(a), 0);
        let bh = self.mul_ik(&self.fwd(b), 1);
        ah.into_iter().zip(bh).map(|(x, y)| x + y).collect()
    }

    pub(crate) fn div(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.inv(self.div_hat(a, b))
    }

    fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let hat: Vec<Complex64> = self.fwd(f).into_iter().zip(&self.k2).map(|(c, k2)| -c * k2).collect();
        self.inv(hat)
    }

    /// Two-thirds-rule projection (identity when dealiasing is off).
    fn filter(&self, f: Vec<f64>) -> Vec<f64> {
        match &self.keep {
            None => f,
            Some(keep) => {
                let hat = self
                    .fwd(&f)
                    .into_iter()
                    .zip(keep)
                    .map(|(c, &k)| if k { c } else { Complex64::default() })
                    .collect();
                self.inv(hat)
            }
        }
    }

    /// Solve `div(sigma grad P) = f_hat` (zero-mean `P`) by the fixed point
    /// `sbar lap P_{k+1} = f - div((sigma - sbar) grad P_k)`. Returns `P_hat`
    /// and the iteration count.
    fn variable_poisson(
        &self,
        sigma: &[f64],
        f_hat: &[Complex64],
        warm: Option<&[Complex64]>,
        tol: f64,
    ) -> Result<(Vec<Complex64>, usize)> {
        let (smin, smax) = sigma
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let sbar = 0.5 * (smin + smax);
        let sprime: Vec<f64> = sigma.iter().map(|s| s - sbar).collect();
        let npts = f_hat.len() as f64;
        let fnorm = f_hat.iter().map(|c| c.norm()).sum::<f64>() / npts;
        let solve = |rhs: &[Complex64]| -> Vec<Complex64> {
            rhs.iter()
                .zip(&self.k2)
                .map(|(c, &k2)| if k2 > 0.0 { -c / (sbar * k2) } else { Complex64::default() })
                .collect()
        };
        let correction = |p_hat: &[Complex64]| -> Vec<Complex64> {
            let gx: Vec<f64> = self.deriv_hat(p_hat, 0).iter().zip(&sprime).map(|(g, s)| g * s).collect();
            let gy: Vec<f64> = self.deriv_hat(p_hat, 1).iter().zip(&sprime).map(|(g, s)| g * s).collect();
            self.div_hat(&gx, &gy)
        };
        let mut p_hat = match warm {
            Some(w) => w.to_vec(),
            None => solve(f_hat),
        };
        let mut g_prev = correction(&p_hat);
        for it in 1..=500 {
            let rhs: Vec<Complex64> = f_hat.iter().zip(&g_prev).map(|(f, g)| f - g).collect();
            p_hat = solve(&rhs);
            let g = correction(&p_hat);
            // Sum of |Fourier coefficients| / N bounds the sup norm of the residual.
            let residual = g
                .iter()
                .zip(&g_prev)
                .zip(&self.k2)
                .filter(|(_, &k2)| k2 > 0.0)
                .map(|((a, b), _)| (a - b).norm())
                .sum::<f64>()
                / npts;
            g_prev = g;
            if residual <= tol * (1.0 + fnorm) {
                return Ok((p_hat, it));
            }
            if it == 500 {
                return Err(Error::PressureSolve {
                    iterations: it,
                    residual,
                });
            }
        }
        unreachable!()
    }

    fn max_divergence(&self, u: &[f64], v: &[f64]) -> f64 {
        self.div(u, v).iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// State vector of either system: three scalar arrays.
type State = [Vec<f64>; 3];

fn stage(s: &State, a: f64, k: &State) -> State {
    [axpy(&s[0], a, &k[0]), axpy(&s[1], a, &k[1]), axpy(&s[2], a, &k[2])]
}

fn rk4_combine(s: &State, dt: f64, k: [&State; 4]) -> State {
    let mut out = s.clone();
    for (c, o) in out.iter_mut().enumerate() {
        for (i, v) in o.iter_mut().enumerate() {
            *v += dt / 6.0 * (k[0][c][i] + 2.0 * k[1][c][i] + 2.0 * k[2][c][i] + k[3][c][i]);
        }
    }
    out
}

struct Incompressible {
    ops: Ops,
    nu: f64,
    tol: f64,
}

impl Incompressible {
    /// Time derivative of `(rho, u, v)` and the pressure of the state.
    fn rhs(&self, s: &State, warm: &mut Option<Vec<Complex64>>) -> Result<(State, Vec<f64>)> {
        let [rho, u, v] = s;
        let ops = &self.ops;
        let [rx, ry] = ops.grad(rho);
        let rt = ops.filter(rho.iter().enumerate().map(|(i, _)| -(u[i] * rx[i] + v[i] * ry[i])).collect());
        let [ux, uy] = ops.grad(u);
        let [vx, vy] = ops.grad(v);
        let mut fx = ops.filter((0..u.len()).map(|i| -(u[i] * ux[i] + v[i] * uy[i])).collect());
        let mut fy = ops.filter((0..u.len()).map(|i| -(u[i] * vx[i] + v[i] * vy[i])).collect());
        if self.nu > 0.0 {
            fx = axpy(&fx, self.nu, &ops.laplacian(u));
            fy = axpy(&fy, self.nu, &ops.laplacian(v));
        }
        let sigma: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
        let f_hat = ops.div_hat(&fx, &fy);
        let (p_hat, _) = ops.variable_poisson(&sigma, &f_hat, warm.as_deref(), self.tol)?;
        let px = ops.deriv_hat(&p_hat, 0);
        let py = ops.deriv_hat(&p_hat, 1);
        let ut: Vec<f64> = (0..u.len()).map(|i| fx[i] - sigma[i] * px[i]).collect();
        let vt: Vec<f64> = (0..u.len()).map(|i| fy[i] - sigma[i] * py[i]).collect();
        let pressure = ops.inv(p_hat.clone());
        *warm = Some(p_hat);
        Ok(([rt, ut, vt], pressure))
    }

    /// Remove the `rho`-weighted gradient part: `u <- u - grad(phi) / rho`
    /// with `div(grad(phi) / rho) = div u`.
    fn reproject(&self, s: &mut State) -> Result<()> {
        let sigma: Vec<f64> = s[0].iter().map(|r| 1.0 / r).collect();
        let f_hat = self.ops.div_hat(&s[1], &s[2]);
        let (phi, _) = self.ops.variable_poisson(&sigma, &f_hat, None, self.tol)?;
        let px = self.ops.deriv_hat(&phi, 0);
        let py = self.ops.deriv_hat(&phi, 1);
        for i in 0..sigma.len() {
            s[1][i] -= sigma[i] * px[i];
            s[2][i] -= sigma[i] * py[i];
        }
        Ok(())
    }

    fn step(&self, s: &State, dt: f64, warm: &mut Option<Vec<Complex64>>) -> Result<(State, Vec<f64>)> {
        let (k1, p) = self.rhs(s, warm)?;
        let (k2, _) = self.rhs(&stage(s, 0.5 * dt, &k1), warm)?;
        let (k3, _) = self.rhs(&stage(s, 0.5 * dt, &k2), warm)?;
        let (k4, _) = self.rhs(&stage(s, dt, &k3), warm)?;
        let mut next = rk4_combine(s, dt, [&k1, &k2, &k3, &k4]);
        self.reproject(&mut next)?;
        Ok((next, p))
    }
}

struct Compressible {
    ops: Ops,
    gamma: f64,
    nu: f64,
}

impl Compressible {
    fn rhs(&self, s: &State) -> State {
        let [rho, mx, my] = s;
        let ops = &self.ops;
        let n = rho.len();
        let pres: Vec<f64> = rho.iter().map(|r| r.powf(self.gamma)).collect();
        let fxx: Vec<f64> = (0..n).map(|i| mx[i] * mx[i] / rho[i] + pres[i]).collect();
        let fxy: Vec<f64> = (0..n).map(|i| mx[i] * my[i] / rho[i]).collect();
        let fyy: Vec<f64> = (0..n).map(|i| my[i] * my[i] / rho[i] + pres[i]).collect();
        let mut rt: Vec<f64> = ops.div(mx, my).into_iter().map(|x| -x).collect();
        let mut mxt: Vec<f64> = ops.div(&fxx, &fxy).into_iter().map(|x| -x).collect();
        let mut myt: Vec<f64> = ops.div(&fxy, &fyy).into_iter().map(|x| -x).collect();
        if self.nu > 0.0 {
            rt = axpy(&rt, self.nu, &ops.laplacian(rho));
            mxt = axpy(&mxt, self.nu, &ops.laplacian(mx));
            myt = axpy(&myt, self.nu, &ops.laplacian(my));
        }
        [ops.filter(rt), ops.filter(mxt), ops.filter(myt)]
    }

    fn step(&self, s: &State, dt: f64) -> State {
        let k1 = self.rhs(s);
        let k2 = self.rhs(&stage(s, 0.5 * dt, &k1));
        let k3 = self.rhs(&stage(s, 0.5 * dt, &k2));
        let k4 = self.rhs(&stage(s, dt, &k3));
        rk4_combine(s, dt, [&k1, &k2, &k3, &k4])
    }

    fn max_signal_speed(&self, s: &State) -> f64 {
        (0..s[0].len())
            .map(|i| {
                let r = s[0][i];
                let speed = (s[1][i].powi(2) + s[2][i].powi(2)).sqrt() / r;
                speed + (self.gamma * r.powf(self.gamma - 1.0)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn max_velocity_gradient(&self, s: &State) -> f64 {
        let u: Vec<f64> = s[1].iter().zip(&s[0]).map(|(m, r)| m / r).collect();
        let v: Vec<f64> = s[2].iter().zip(&s[0]).map(|(m, r)| m / r).collect();
        let [ux, uy] = self.ops.grad(&u);
        let [vx, vy] = self.ops.grad(&v);
        (0..u.len())
            .map(|i| (ux[i].powi(2) + uy[i].powi(2) + vx[i].powi(2) + vy[i].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

fn check_flow_inputs(rho: &Field, u: &Field, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    let grid = rho.grid();
    if !grid.is_periodic() || grid.dim() != 2 {
        return Err(Error::DomainKind("the flow solvers run on the 2D torus".into()));
    }
    if grid.shape() != [config.n, config.n] {
        return Err(Error::Shape(format!(
            "lattice {:?} does not match the configured N = {}",
            grid.shape(),
            config.n
        )));
    }
    if u.grid() != grid || u.components() != 2 || rho.components() != 1 {
        return Err(Error::Shape("expected a scalar density and a 2-component velocity on one lattice".into()));
    }
    if !rho.is_positive() {
        return Err(Error::Parameter("density must be flagged positive".into()));
    }
    Ok(())
}

fn incompressible_limit(h: f64, cfl: f64, u: &[f64], v: &[f64]) -> f64 {
    let umax = (0..u.len())
        .map(|i| (u[i] * u[i] + v[i] * v[i]).sqrt())
        .fold(0.0, f64::max);
    if umax > 0.0 {
        cfl * h / umax
    } else {
        f64::INFINITY
    }
}

/// One RK4 step of the incompressible system with the step `config.dt`.
/// Returns `(rho, u, P)` with `P` the pressure of the input state.
pub fn step_incompressible(rho: &Field, u: &Field, config: &SolverConfig) -> Result<(Field, Field, Field)> {
    check_flow_inputs(rho, u, config)?;
    let dt = config
        .dt
        .ok_or_else(|| Error::Parameter("a single step needs an explicit dt".into()))?;
    let solver = Incompressible {
        ops: Ops::new(rho.grid(), config.dealias)?,
        nu: config.nu,
        tol: config.pressure_tol,
    };
    let state: State = [rho.data().to_vec(), u.component(0).to_vec(), u.component(1).to_vec()];
    let limit = incompressible_limit(solver.ops.h, 0.5, &state[1], &state[2]);
    if dt > limit {
        return Err(Error::StepSize { dt, limit });
    }
    let div = solver.ops.max_divergence(&state[1], &state[2]);
    if div > 1e-8 {
        return Err(Error::Parameter(format!("velocity divergence {div:e} exceeds 1e-8")));
    }
    let (next, p) = solver.step(&state, dt, &mut None)?;
    let grid = rho.grid().clone();
    Ok((
        Field::scalar(grid.clone(), next[0].clone())?.into_positive()?,
        Field::new(grid.clone(), 2, [next[1].clone(), next[2].clone()].concat())?,
        Field::scalar(grid, p)?,
    ))
}

/// One RK4 step of the compressible system with the step `config.dt`.
pub fn step_compressible(rho: &Field, u: &Field, config: &SolverConfig) -> Result<(Field, Field)> {
    check_flow_inputs(rho, u, config)?;
    let gamma = config
        .gamma
        .ok_or_else(|| Error::Parameter("compressible runs need gamma".into()))?;
    let dt = config
        .dt
        .ok_or_else(|| Error::Parameter("a single step needs an explicit dt".into()))?;
    let solver = Compressible {
        ops: Ops::new(rho.grid(), config.dealias)?,
        gamma,
        nu: config.nu,
    };
    let state = conservative_state(rho, u);
    let limit = 0.5 * solver.ops.h / solver.max_signal_speed(&state);
    if dt > limit {
        return Err(Error::StepSize { dt, limit });
    }
    let indicator = solver.max_velocity_gradient(&state) * dt;
    if indicator >= 0.1 {
        return Err(Error::SmoothnessLost { time: 0.0, indicator });
    }
    let next = solver.step(&state, dt);
    primitive_fields(rho.grid(), &next)
}

fn conservative_state(rho: &Field, u: &Field) -> State {
    let r = rho.data().to_vec();
    let mx = r.iter().zip(u.component(0)).map(|(r, u)| r * u).collect();
    let my = r.iter().zip(u.component(1)).map(|(r, u)| r * u).collect();
    [r, mx, my]
}

fn primitive_fields(grid: &Grid, s: &State) -> Result<(Field, Field)> {
    if let Some(i) = s[0].iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Positivity { index: i, value: s[0][i] });
    }
    let u: Vec<f64> = s[1].iter().zip(&s[0]).map(|(m, r)| m / r).collect();
    let v: Vec<f64> = s[2].iter().zip(&s[0]).map(|(m, r)| m / r).collect();
    Ok((
        Field::scalar(grid.clone(), s[0].clone())?.into_positive()?,
        Field::new(grid.clone(), 2, [u, v].concat())?,
    ))
}

/// Per-step history and conservation diagnostics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub final_time: f64,
    pub step_times: Vec<f64>,
    pub step_energy: Vec<f64>,
    pub step_mass: Vec<f64>,
    pub max_relative_energy_drift: f64,
    pub max_mass_drift: f64,
    pub max_divergence: f64,
    /// Largest excursion of the density below its initial minimum.
    pub density_undershoot: f64,
    /// Largest excursion of the density above its initial maximum.
    pub density_overshoot: f64,
    pub nu: f64,
    /// Set when the shock monitor stopped the run early.
    pub truncated: Option<String>,
}

impl RunDiagnostics {
    fn new(nu: f64) -> Self {
        Self {
            steps: 0,
            final_time: 0.0,
            step_times: Vec::new(),
            step_energy: Vec::new(),
            step_mass: Vec::new(),
            max_relative_energy_drift: 0.0,
            max_mass_drift: 0.0,
            max_divergence: 0.0,
            density_undershoot: 0.0,
            density_overshoot: 0.0,
            nu,
            truncated: None,
        }
    }

    fn record(&mut self, t: f64, energy: f64, mass: f64) {
        let e0 = *self.step_energy.first().unwrap_or(&energy);
        let m0 = *self.step_mass.first().unwrap_or(&mass);
        if e0 != 0.0 {
            self.max_relative_energy_drift = self.max_relative_energy_drift.max(((energy - e0) / e0).abs());
        } else {
            self.max_relative_energy_drift = self.max_relative_energy_drift.max(energy.abs());
        }
        self.max_mass_drift = self.max_mass_drift.max((mass - m0).abs());
        self.step_times.push(t);
        self.step_energy.push(energy);
        self.step_mass.push(mass);
    }

    /// Largest time up to which the relative energy drift stays within `tol`.
    pub fn energy_conserved_until(&self, tol: f64) -> f64 {
        let e0 = self.step_energy.first().copied().unwrap_or(0.0);
        let mut last = 0.0;
        for (t, e) in self.step_times.iter().zip(&self.step_energy) {
            let drift = if e0 != 0.0 { ((e - e0) / e0).abs() } else { e.abs() };
            if drift > tol {
                break;
            }
            last = *t;
        }
        last
    }
}

/// Sampled frames of a run plus its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rho: TimeSeriesField,
    pub u: TimeSeriesField,
    pub pressure: Option<TimeSeriesField>,
    pub gamma: Option<f64>,
    pub diagnostics: RunDiagnostics,
}

fn cell_sum(v: impl Iterator<Item = f64>, vol: f64) -> f64 {
    v.sum::<f64>() * vol
}

/// Integrate the incompressible system from `(rho0, u0)` to `config.t_final`.
pub fn run_incompressible(rho0: &Field, u0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    check_flow_inputs(rho0, u0, config)?;
    let grid = rho0.grid().clone();
    let solver = Incompressible {
        ops: Ops::new(&grid, config.dealias)?,
        nu: config.nu,
        tol: config.pressure_tol,
    };
    let mut s: State = [rho0.data().to_vec(), u0.component(0).to_vec(), u0.component(1).to_vec()];
    let div0 = solver.ops.max_divergence(&s[1], &s[2]);
    if div0 > 1e-8 {
        return Err(Error::Parameter(format!("initial divergence {div0:e} exceeds 1e-8")));
    }
    let vol = grid.cell_volume();
    let (rmin, rmax) = (rho0.min_valid(), rho0.max_valid());
    let energy = |s: &State| cell_sum((0..s[0].len()).map(|i| s[0][i] * (s[1][i].powi(2) + s[2][i].powi(2))), vol);
    let mass = |s: &State| cell_sum(s[0].iter().copied(), vol);
    let mut diag = RunDiagnostics::new(config.nu);
    diag.record(0.0, energy(&s), mass(&s));
    diag.max_divergence = div0;
    let mut frames: Vec<(f64, State, Vec<f64>)> = Vec::new();
    let mut warm = None;
    let mut t = 0.0;
    let mut step = 0usize;
    while t < config.t_final {
        let limit = incompressible_limit(solver.ops.h, config.cfl, &s[1], &s[2]);
        let mut dt = config.dt.unwrap_or(limit).min(limit).min(config.t_final - t);
        if !dt.is_finite() {
            dt = config.t_final - t;
        }
        let (next, p) = solver.step(&s, dt, &mut warm)?;
        if step % config.sample_every == 0 {
            frames.push((t, s.clone(), p));
        }
        s = next;
        t = if config.t_final - (t + dt) <= 1e-12 * config.t_final {
            config.t_final
        } else {
            t + dt
        };
        step += 1;
        diag.record(t, energy(&s), mass(&s));
        diag.max_divergence = diag.max_divergence.max(solver.ops.max_divergence(&s[1], &s[2]));
        let (lo, hi) = s[0]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        diag.density_undershoot = diag.density_undershoot.max(rmin - lo);
        diag.density_overshoot = diag.density_overshoot.max(hi - rmax);
        if let Some(i) = s[0].iter().position(|&r| !(r > 0.0)) {
            return Err(Error::Positivity { index: i, value: s[0][i] });
        }
    }
    let (_, p_final) = solver.rhs(&s, &mut warm)?;
    frames.push((t, s, p_final));
    diag.steps = step;
    diag.final_time = t;
    let mut times = Vec::new();
    let mut rhos = Vec::new();
    let mut us = Vec::new();
    let mut ps = Vec::new();
    for (t, s, p) in frames {
        times.push(t);
        rhos.push(Field::scalar(grid.clone(), s[0].clone())?.into_positive()?);
        us.push(Field::new(grid.clone(), 2, [s[1].clone(), s[2].clone()].concat())?);
        ps.push(Field::scalar(grid.clone(), p)?);
    }
    Ok(Trajectory {
        rho: TimeSeriesField::new(times.clone(), rhos)?,
        u: TimeSeriesField::new(times.clone(), us)?,
        pressure: Some(TimeSeriesField::new(times, ps)?),
        gamma: None,
        diagnostics: diag,
    })
}

/// Integrate the compressible system. If the shock monitor trips the run
/// stops there and the frames gathered so far are returned, with the reason
/// in `diagnostics.truncated`.
pub fn run_compressible(rho0: &Field, u0: &Field, config: &SolverConfig) -> Result<Trajectory> {
    check_flow_inputs(rho0, u0, config)?;
    let gamma = config
        .gamma
        .ok_or_else(|| Error::Parameter("compressible runs need gamma".into()))?;
    let grid = rho0.grid().clone();
    let solver = Compressible {
        ops: Ops::new(&grid, config.dealias)?,
        gamma,
        nu: config.nu,
    };
    let vol = grid.cell_volume();
    let energy = |s: &State| {
        cell_sum(
            (0..s[0].len()).map(|i| {
                let r = s[0][i];
                0.5 * (s[1][i].powi(2) + s[2][i].powi(2)) / r + r.powf(gamma) / (gamma - 1.0)
            }),
            vol,
        )
    };
    let mass = |s: &State| cell_sum(s[0].iter().copied(), vol);
    let mut s = conservative_state(rho0, u0);
    let (rmin, rmax) = (rho0.min_valid(), rho0.max_valid());
    let mut diag = RunDiagnostics::new(config.nu);
    diag.record(0.0, energy(&s), mass(&s));
    let mut frames: Vec<(f64, State)> = Vec::new();
    let mut t = 0.0;
    let mut step = 0usize;
    while t < config.t_final {
        let limit = config.cfl * solver.ops.h / solver.max_signal_speed(&s);
        let dt = config.dt.unwrap_or(limit).min(limit).min(config.t_final - t);
        let indicator = solver.max_velocity_gradient(&s) * dt;
        if step % config.sample_every == 0 {
            frames.push((t, s.clone()));
        }
        if indicator >= 0.1 {
            diag.truncated = Some(Error::SmoothnessLost { time: t, indicator }.to_string());
            break;
        }
        s = solver.step(&s, dt);
        if let Some(i) = s[0].iter().position(|&r| !(r > 0.0)) {
            return Err(Error::Positivity { index: i, value: s[0][i] });
        }
        t = if config.t_final - (t + dt) <= 1e-12 * config.t_final {
            config.t_final
        } else {
            t + dt
        };
        step += 1;
        diag.record(t, energy(&s), mass(&s));
        let (lo, hi) = s[0]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        diag.density_undershoot = diag.density_undershoot.max(rmin - lo);
        diag.density_overshoot = diag.density_overshoot.max(hi - rmax);
    }
    if diag.truncated.is_none() && frames.last().map_or(true, |f| f.0 < t) {
        frames.push((t, s));
    }
    diag.steps = step;
    diag.final_time = t;
    let mut times = Vec::new();
    let mut rhos = Vec::new();
    let mut us = Vec::new();
    for (t, s) in frames {
        let (r, u) = primitive_fields(&grid, &s)?;
        times.push(t);
        rhos.push(r);
        us.push(u);
    }
    Ok(Trajectory {
        rho: TimeSeriesField::new(times.clone(), rhos)?,
        u: TimeSeriesField::new(times, us)?,
        pressure: None,
        gamma: Some(gamma),
        diagnostics: diag,
    })
}

/// Mollified energy-budget terms along a trajectory at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub epsilon: f64,
    pub kernel: KernelProfile,
    pub nu: f64,
    pub gamma: Option<f64>,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub defect_a2: Option<Vec<f64>>,
    pub defect_b1: Option<Vec<f64>>,
    pub defect_c: Option<Vec<f64>>,
    pub defect_g2: Option<Vec<f64>>,
    /// `(A3, B2)` per frame; their sum vanishes up to rounding.
    pub cancellation: Option<Vec<(f64, f64)>>,
}

impl EnergyBudget {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let col = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| format!("{:e}", v[i]));
        if self.defect_g2.is_some() {
            writeln!(f, "t,E,G2")?;
        } else {
            writeln!(f, "t,E,A2,B1,C")?;
        }
        for i in 0..self.times.len() {
            let mut row = vec![format!("{:e}", self.times[i]), format!("{:e}", self.energy[i])];
            if self.defect_g2.is_some() {
                row.extend(col(&self.defect_g2, i));
            } else {
                row.extend(col(&self.defect_a2, i));
                row.extend(col(&self.defect_b1, i));
                row.extend(col(&self.defect_c, i));
            }
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Time integral (trapezoid) of a defect series; the single value for
    /// one-frame budgets.
    pub fn integrated(&self, series: &[f64]) -> f64 {
        if series.len() == 1 {
            series[0]
        } else {
            trapezoid(&self.times, series)
        }
    }

    /// Sum of the incompressible defects per frame.
    pub fn total_defect(&self) -> Vec<f64> {
        let z = vec![0.0; self.times.len()];
        let a = self.defect_a2.as_ref().unwrap_or(&z);
        let b = self.defect_b1.as_ref().unwrap_or(&z);
        let c = self.defect_c.as_ref().unwrap_or(&z);
        let g = self.defect_g2.as_ref().unwrap_or(&z);
        (0..self.times.len()).map(|i| a[i] + b[i] + c[i] + g[i]).collect()
    }

    /// Largest `|A3 + B2| / (|A3| + |B2| + 1)` over frames.
    pub fn cancellation_residual(&self) -> Option<f64> {
        self.cancellation.as_ref().map(|v| {
            v.iter()
                .map(|(a, b)| (a + b).abs() / (a.abs() + b.abs() + 1.0))
                .fold(0.0, f64::max)
        })
    }
}

/// Per-frame incompressible budget quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBudget {
    pub energy: f64,
    pub a2: f64,
    pub b1: f64,
    pub c: f64,
    pub a3: f64,
    pub b2: f64,
}

fn require_frame_inputs(rho: &Field, u: &Field) -> Result<()> {
    let g = rho.grid();
    if !g.is_periodic() || g.dim() != 2 {
        return Err(Error::DomainKind("budgets are evaluated on the 2D torus".into()));
    }
    if u.grid() != g || u.components() != 2 || rho.components() != 1 {
        return Err(Error::Shape("expected a scalar density and a 2-component velocity on one lattice".into()));
    }
    if let Some(i) = rho.data().iter().position(|&r| !(r > 0.0)) {
        return Err(Error::Positivity { index: i, value: rho.data()[i] });
    }
    Ok(())
}

/// Budget terms of one frame `(rho, u, P)` at the scale of `m`.
pub(crate) fn frame_budget(rho: &Field, u: &Field, p: &Field, m: &Mollifier, ops: &Ops) -> Result<FrameBudget> {
    require_frame_inputs(rho, u)?;
    let n = rho.grid().len();
    let vol = rho.grid().cell_volume();
    let r = rho.data();
    let (ux, uy) = (u.component(0), u.component(1));
    let smooth = |f: &[f64]| -> Vec<f64> {
        if let Some(v) = f.first().filter(|v| f.iter().all(|x| x == *v)) {
            vec![*v; f.len()]
        } else {
            m.smooth(f)
        }
    };
    let re = smooth(r);
    let mx: Vec<f64> = (0..n).map(|i| r[i] * ux[i]).collect();
    let my: Vec<f64> = (0..n).map(|i| r[i] * uy[i]).collect();
    let (mxe, mye) = (smooth(&mx), smooth(&my));
    let (uxe, uye) = (smooth(ux), smooth(uy));
    let pe = smooth(p.data());
    // (rho u (x) u)^eps
    let txx = smooth(&(0..n).map(|i| mx[i] * ux[i]).collect::<Vec<_>>());
    let txy = smooth(&(0..n).map(|i| mx[i] * uy[i]).collect::<Vec<_>>());
    let tyx = smooth(&(0..n).map(|i| my[i] * ux[i]).collect::<Vec<_>>());
    let tyy = smooth(&(0..n).map(|i| my[i] * uy[i]).collect::<Vec<_>>());
    let wx: Vec<f64> = (0..n).map(|i| mxe[i] / re[i]).collect();
    let wy: Vec<f64> = (0..n).map(|i| mye[i] / re[i]).collect();
    let w2: Vec<f64> = (0..n).map(|i| wx[i] * wx[i] + wy[i] * wy[i]).collect();
    let [wxx, wxy] = ops.grad(&wx);
    let [wyx, wyy] = ops.grad(&wy);
    let [px, py] = ops.grad(&pe);
    // m^eps - rho^eps u^eps
    let dx: Vec<f64> = (0..n).map(|i| mxe[i] - re[i] * uxe[i]).collect();
    let dy: Vec<f64> = (0..n).map(|i| mye[i] - re[i] * uye[i]).collect();
    let div_d = ops.div(&dx, &dy);
    let rux: Vec<f64> = (0..n).map(|i| re[i] * uxe[i]).collect();
    let ruy: Vec<f64> = (0..n).map(|i| re[i] * uye[i]).collect();
    let div_ru = ops.div(&rux, &ruy);
    let mut out = FrameBudget {
        energy: 0.0,
        a2: 0.0,
        b1: 0.0,
        c: 0.0,
        a3: 0.0,
        b2: 0.0,
    };
    for i in 0..n {
        out.energy += r[i] * (ux[i] * ux[i] + uy[i] * uy[i]);
        out.a2 += 0.5 * (div_d[i] * w2[i]).abs();
        let rxx = txx[i] - mxe[i] * uxe[i];
        let rxy = txy[i] - mxe[i] * uye[i];
        let ryx = tyx[i] - mye[i] * uxe[i];
        let ryy = tyy[i] - mye[i] * uye[i];
        out.b1 += (rxx * wxx[i] + rxy * wxy[i] + ryx * wyx[i] + ryy * wyy[i]).abs();
        out.c += ((dx[i] * px[i] + dy[i] * py[i]) / re[i]).abs();
        out.a3 += -0.5 * div_ru[i] * w2[i];
        out.b2 += -(mxe[i] * (uxe[i] * wxx[i] + uye[i] * wxy[i]) + mye[i] * (uxe[i] * wyx[i] + uye[i] * wyy[i]));
    }
    out.energy *= vol;
    out.a2 *= vol;
    out.b1 *= vol;
    out.c *= vol;
    out.a3 *= vol;
    out.b2 *= vol;
    Ok(out)
}

fn frames_of<'a>(traj: &'a Trajectory) -> (&'a TimeSeriesField, &'a TimeSeriesField) {
    (&traj.rho, &traj.u)
}

/// Budget quantities of a single frame, without the cancellation check.
pub fn frame_terms(rho: &Field, u: &Field, p: &Field, kernel: &MollifierKernel) -> Result<FrameBudget> {
    let m = Mollifier::new(rho.grid(), *kernel)?;
    let ops = Ops::new(rho.grid(), false)?;
    frame_budget(rho, u, p, &m, &ops)
}

/// Incompressible budget `(A2, B1, C)` plus `E(t)` at one scale, with the
/// cancellation `A3 + B2 = 0` checked on every frame.
pub fn budget_terms(traj: &Trajectory, kernel: &MollifierKernel) -> Result<EnergyBudget> {
    let pressure = traj
        .pressure
        .as_ref()
        .ok_or_else(|| Error::Input("incompressible budgets need pressure frames".into()))?;
    let (rho, u) = frames_of(traj);
    if pressure.len() != rho.len() || pressure.times() != rho.times() {
        return Err(Error::Input("pressure frames do not match the density frames".into()));
    }
    let grid = rho.grid();
    let m = Mollifier::new(grid, *kernel)?;
    let ops = Ops::new(grid, false)?;
    let rows = (0..rho.len())
        .into_par_iter()
        .map(|k| frame_budget(&rho.frames()[k], &u.frames()[k], &pressure.frames()[k], &m, &ops))
        .collect::<Result<Vec<_>>>()?;
    for (t, r) in rho.times().iter().zip(&rows) {
        let residual = (r.a3 + r.b2).abs();
        if residual > 1e-8 * (r.a3.abs() + r.b2.abs() + 1.0) {
            return Err(Error::Cancellation {
                time: *t,
                residual,
                a3: r.a3,
                b2: r.b2,
            });
        }
    }
    Ok(EnergyBudget {
        epsilon: kernel.epsilon,
        kernel: kernel.profile,
        nu: traj.diagnostics.nu,
        gamma: None,
        times: rho.times().to_vec(),
        energy: rows.iter().map(|r| r.energy).collect(),
        defect_a2: Some(rows.iter().map(|r| r.a2).collect()),
        defect_b1: Some(rows.iter().map(|r| r.b1).collect()),
        defect_c: Some(rows.iter().map(|r| r.c).collect()),
        defect_g2: None,
        cancellation: Some(rows.iter().map(|r| (r.a3, r.b2)).collect()),
    })
}

/// `int |div(m^eps / rho^eps) [(rho^gamma)^eps - (rho^eps)^gamma]|` and the
/// compressible energy of one frame.
pub(crate) fn frame_g2(rho: &Field, u: &Field, gamma: f64, m: &Mollifier, ops: &Ops) -> Result<(f64, f64)> {
    require_frame_inputs(rho, u)?;
    let n = rho.grid().len();
    let vol = rho.grid().cell_volume();
    let r = rho.data();
    let (ux, uy) = (u.component(0), u.component(1));
    let smooth = |f: &[f64]| -> Vec<f64> {
        if let Some(v) = f.first().filter(|v| f.iter().all(|x| x == *v)) {
            vec![*v; f.len()]
        } else {
            m.smooth(f)
        }
    };
    let re = smooth(r);
    let mxe = smooth(&(0..n).map(|i| r[i] * ux[i]).collect::<Vec<_>>());
    let mye = smooth(&(0..n).map(|i| r[i] * uy[i]).collect::<Vec<_>>());
    let pow_e = smooth(&r.iter().map(|x| x.powf(gamma)).collect::<Vec<_>>());
    let wx: Vec<f64> = (0..n).map(|i| mxe[i] / re[i]).collect();
    let wy: Vec<f64> = (0..n).map(|i| mye[i] / re[i]).collect();
    let divw = ops.div(&wx, &wy);
    let mut g2 = 0.0;
    let mut e = 0.0;
    for i in 0..n {
        g2 += (divw[i] * (pow_e[i] - re[i].powf(gamma))).abs();
        e += 0.5 * r[i] * (ux[i] * ux[i] + uy[i] * uy[i]) + r[i].powf(gamma) / (gamma - 1.0);
    }
    Ok((g2 * vol, e * vol))
}

/// Compressible budget (`E(t)` and `G2`) at one scale.
pub fn compressible_budget(traj: &Trajectory, gamma: f64, kernel: &MollifierKernel) -> Result<EnergyBudget> {
    if !(gamma > 1.0) {
        return Err(Error::Parameter(format!("isentropic exponent must exceed 1, got {gamma}")));
    }
    let (rho, u) = frames_of(traj);
    let grid = rho.grid();
    let m = Mollifier::new(grid, *kernel)?;
    let ops = Ops::new(grid, false)?;
    let rows = (0..rho.len())
        .into_par_iter()
        .map(|k| frame_g2(&rho.frames()[k], &u.frames()[k], gamma, &m, &ops))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyBudget {
        epsilon: kernel.epsilon,
        kernel: kernel.profile,
        nu: traj.diagnostics.nu,
        gamma: Some(gamma),
        times: rho.times().to_vec(),
        energy: rows.iter().map(|r| r.1).collect(),
        defect_a2: None,
        defect_b1: None,
        defect_c: None,
        defect_g2: Some(rows.iter().map(|r| r.0).collect()),
        cancellation: None,
    })
}

/// Time-integrated defects of each incompressible term across scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetScaling {
    pub budgets: Vec<EnergyBudget>,
    pub a2: Option<ScalingFit>,
    pub b1: Option<ScalingFit>,
    pub c: Option<ScalingFit>,
    pub g2: Option<ScalingFit>,
}

fn fit_series(
    budgets: &[EnergyBudget],
    epsilons: &[f64],
    pick: impl Fn(&EnergyBudget) -> Option<&Vec<f64>>,
) -> Result<Option<ScalingFit>> {
    if budgets.iter().any(|b| pick(b).is_none()) {
        return Ok(None);
    }
    let values: Vec<f64> = budgets.iter().map(|b| b.integrated(pick(b).unwrap())).collect();
    ScalingFit::fit(epsilons, &values).map(Some)
}

/// Budgets over a decreasing scale list and the log-log fits of each
/// time-integrated defect.
pub fn budget_scaling(
    traj: &Trajectory,
    profile: KernelProfile,
    epsilons: &[f64],
    gamma: Option<f64>,
) -> Result<BudgetScaling> {
    let budgets = epsilons
        .iter()
        .map(|&e| {
            let k = MollifierKernel::new(profile, e)?;
            match gamma {
                Some(g) => compressible_budget(traj, g, &k),
                None => budget_terms(traj, &k),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BudgetScaling {
        a2: fit_series(&budgets, epsilons, |b| b.defect_a2.as_ref())?,
        b1: fit_series(&budgets, epsilons, |b| b.defect_b1.as_ref())?,
        c: fit_series(&budgets, epsilons, |b| b.defect_c.as_ref())?,
        g2: fit_series(&budgets, epsilons, |b| b.defect_g2.as_ref())?,
        budgets,
    })
}

/// Taylor-Green velocity `(sin 2 pi x cos 2 pi y, -cos 2 pi x sin 2 pi y)`.
pub fn taylor_green(grid: &Grid) -> Result<Field> {
    use std::f64::consts::TAU;
    Field::vector_from_fn(grid.clone(), 2, |x| {
        vec![
            (TAU * x[0]).sin() * (TAU * x[1]).cos(),
            -(TAU * x[0]).cos() * (TAU * x[1]).sin(),
        ]
    })
}

/// Dominant frequency (cycles per unit time) of a sampled oscillation, from
/// the spacing of its zero crossings (linear interpolation).
pub fn crossing_frequency(times: &[f64], signal: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for k in 1..signal.len() {
        let (a, b) = (signal[k - 1], signal[k]);
        if a == 0.0 {
            crossings.push(times[k - 1]);
        } else if a * b < 0.0 {
            crossings.push(times[k - 1] + (times[k] - times[k - 1]) * a / (a - b));
        }
    }
    crossings.dedup();
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(0.5 * (crossings.len() - 1) as f64 / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use std::f64::consts::{PI, TAU};
    use std::sync::Arc;

    fn torus(n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(2).unwrap()), n).unwrap()
    }

    fn cfg(n: usize, t: f64) -> SolverConfig {
        SolverConfig {
            n,
            t_final: t,
            sample_every: 5,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn variable_poisson_matches_direct_solution() {
        let g = torus(32);
        let ops = Ops::new(&g, false).unwrap();
        let pts = g.points();
        let sigma: Vec<f64> = pts.iter().map(|x| 1.0 / (1.0 + 0.3 * (TAU * x[1]).cos())).collect();
        let p: Vec<f64> = pts.iter().map(|x| (TAU * x[0]).sin() * (2.0 * TAU * x[1]).cos()).collect();
        let [px, py] = ops.grad(&p);
        let fx: Vec<f64> = px.iter().zip(&sigma).map(|(a, s)| a * s).collect();
        let fy: Vec<f64> = py.iter().zip(&sigma).map(|(a, s)| a * s).collect();
        let f_hat = ops.div_hat(&fx, &fy);
        let (q_hat, it) = ops.variable_poisson(&sigma, &f_hat, None, 1e-12).unwrap();
        let q = ops.inv(q_hat);
        assert!(it < 100);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_velocity_is_frozen() {
        let g = torus(32);
        let rho = Field::from_fn(g.clone(), |x| 1.0 + 0.2 * (TAU * x[0]).sin()).unwrap().into_positive().unwrap();
        let u = Field::constant(g.clone(), 2, 0.0).unwrap();
        let traj = run_incompressible(&rho, &u, &SolverConfig { dt: Some(0.01), ..cfg(32, 0.1) }).unwrap();
        let last = traj.rho.frames().last().unwrap();
        assert_eq!(last.data(), rho.data());
        assert!(traj.u.frames().last().unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shear_with_stratified_density_is_steady() {
        let g = torus(32);
        let rho = Field::from_fn(g.clone(), |x| 1.0 + 0.3 * (TAU * x[1]).cos()).unwrap().into_positive().unwrap();
        let u = Field::vector_from_fn(g.clone(), 2, |x| vec![(TAU * x[1]).sin(), 0.0]).unwrap();
        let traj = run_incompressible(&rho, &u, &cfg(32, 0.5)).unwrap();
        let r1 = traj.rho.frames().last().unwrap();
        let u1 = traj.u.frames().last().unwrap();
        let dr = r1.sub(&rho).unwrap().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let du = u1.sub(&u).unwrap().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(dr < 1e-6 && du < 1e-6, "{dr} {du}");
    }

    #[test]
    fn step_rejects_large_dt_and_divergent_input() {
        let g = torus(16);
        let rho = Field::constant(g.clone(), 1, 1.0).unwrap().into_positive().unwrap();
        let u = taylor_green(&g).unwrap();
        let c = SolverConfig { dt: Some(0.1), ..cfg(16, 1.0) };
        assert!(matches!(step_incompressible(&rho, &u, &c), Err(Error::StepSize { .. })));
        let bad = Field::vector_from_fn(g.clone(), 2, |x| vec![(TAU * x[0]).sin(), 0.0]).unwrap();
        let c = SolverConfig { dt: Some(0.001), ..cfg(16, 1.0) };
        assert!(step_incompressible(&rho, &bad, &c).is_err());
        assert!(step_incompressible(&rho, &u, &c).is_ok());
    }

    #[test]
    fn compressible_constant_state_is_frozen() {
        let g = torus(16);
        let rho = Field::constant(g.clone(), 1, 1.0).unwrap().into_positive().unwrap();
        let u = Field::constant(g.clone(), 2, 0.0).unwrap();
        let c = SolverConfig {
            gamma: Some(1.4),
            ..cfg(16, 0.1)
        };
        let traj = run_compressible(&rho, &u, &c).unwrap();
        assert!(traj.rho.frames().iter().all(|f| f.data().iter().all(|&v| v == 1.0)));
        assert_eq!(traj.diagnostics.max_relative_energy_drift, 0.0);
    }

    #[test]
    fn budget_of_rest_state_vanishes_and_unit_density_has_no_c() {
        let g = torus(32);
        let rho = Field::from_fn(g.clone(), |x| 1.0 + 0.2 * (TAU * x[0]).cos()).unwrap().into_positive().unwrap();
        let zero = Field::constant(g.clone(), 2, 0.0).unwrap();
        let traj = run_incompressible(&rho, &zero, &SolverConfig { dt: Some(0.05), ..cfg(32, 0.1) }).unwrap();
        let b = budget_terms(&traj, &MollifierKernel::bump(0.125).unwrap()).unwrap();
        assert!(b.total_defect().iter().all(|&v| v == 0.0));
        assert!(b.energy.iter().all(|&e| e == 0.0));

        let one = Field::constant(g.clone(), 1, 1.0).unwrap().into_positive().unwrap();
        let traj = run_incompressible(&one, &taylor_green(&g).unwrap(), &cfg(32, 0.05)).unwrap();
        let b = budget_terms(&traj, &MollifierKernel::bump(0.125).unwrap()).unwrap();
        assert!(b.defect_c.as_ref().unwrap().iter().all(|&v| v == 0.0));
        assert!(b.cancellation_residual().unwrap() < 1e-8);
        let mut no_p = traj.clone();
        no_p.pressure = None;
        assert!(matches!(
            budget_terms(&no_p, &MollifierKernel::bump(0.125).unwrap()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn crossing_frequency_of_cosine() {
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 1e-3).collect();
        let s: Vec<f64> = t.iter().map(|t| (2.0 * PI * 1.7 * t).cos()).collect();
        assert!((crossing_frequency(&t, &s).unwrap() - 1.7).abs() < 1e-6);
    }
}
