//! Scalar and vector samples on a lattice, shifts, discrete L^p norms, weak-form
//! residuals and energies.
//!
//! Data is component-major: component `c` occupies
//! `data[c * npts .. (c + 1) * npts]`, each block row-major over the lattice.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Grid, Mask};
use crate::error::{Error, Result};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    components: usize,
    data: Vec<f64>,
    mask: Option<Mask>,
    positive: bool,
}

impl Field {
    pub fn new(grid: Grid, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::Shape("a field needs at least one component".into()));
        }
        if data.len() != grid.len() * components {
            return Err(Error::Shape(format!(
                "data length {} != {} points x {} components",
                data.len(),
                grid.len(),
                components
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            grid,
            components,
            data,
            mask: None,
            positive: false,
        })
    }

    pub fn scalar(grid: Grid, data: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, data)
    }

    pub fn constant(grid: Grid, components: usize, value: f64) -> Result<Self> {
        let n = grid.len() * components;
        Self::new(grid, components, vec![value; n])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let data = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, 1, data)
    }

    /// Vector field whose value at `x` is `f(x)` (length `components`).
    pub fn vector_from_fn(
        grid: Grid,
        components: usize,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let npts = grid.len();
        let mut data = vec![0.0; npts * components];
        for i in 0..npts {
            let v = f(&grid.point(i));
            if v.len() != components {
                return Err(Error::Shape(format!(
                    "vector function returned {} components, expected {components}",
                    v.len()
                )));
            }
            for (c, x) in v.into_iter().enumerate() {
                data[c * npts + i] = x;
            }
        }
        Self::new(grid, components, data)
    }

    /// Stack scalar fields as the components of a vector field.
    pub fn stack(parts: &[Field]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        let mut data = Vec::with_capacity(first.grid.len() * parts.len());
        for p in parts {
            p.ensure_same_grid(first)?;
            if p.components != 1 {
                return Err(Error::Shape("stack expects scalar fields".into()));
            }
            data.extend_from_slice(&p.data);
        }
        let mut out = Self::new(first.grid.clone(), parts.len(), data)?;
        out.mask = first.mask.clone();
        Ok(out)
    }

    pub fn with_mask(mut self, mask: Mask) -> Result<Self> {
        if mask.len() != self.grid.len() {
            return Err(Error::Shape("mask length does not match lattice".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    /// Flag as a density: every valid sample must be strictly positive.
    pub fn into_positive(mut self) -> Result<Self> {
        let valid = self.valid_mask();
        for (i, v) in self.data.iter().enumerate() {
            if valid.get(i % self.grid.len()) && *v <= 0.0 {
                return Err(Error::Positivity { index: i, value: *v });
            }
        }
        self.positive = true;
        Ok(self)
    }

    pub(crate) fn without_positive(mut self) -> Field {
        self.positive = false;
        self
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &Domain {
        self.grid.domain()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_field(&self, c: usize) -> Field {
        Field {
            grid: self.grid.clone(),
            components: 1,
            data: self.component(c).to_vec(),
            mask: self.mask.clone(),
            positive: false,
        }
    }

    pub fn mask(&self) -> Option<&Mask> {
        self.mask.as_ref()
    }

    /// Region where samples are meaningful: the explicit mask if present,
    /// otherwise the whole torus or the open bounded domain.
    pub fn valid_mask(&self) -> Mask {
        match &self.mask {
            Some(m) => m.clone(),
            None if self.grid.is_periodic() => Mask::full(self.grid.len()),
            None => Mask::new(self.grid.phi_values().iter().map(|&p| p < 0.0).collect()),
        }
    }

    /// Euclidean magnitude of the sample at lattice point `i`.
    pub fn magnitude_at(&self, i: usize) -> f64 {
        if self.components == 1 {
            return self.data[i].abs();
        }
        let n = self.grid.len();
        (0..self.components)
            .map(|c| self.data[c * n + i].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different lattices".into()));
        }
        Ok(())
    }

    fn ensure_compatible(&self, other: &Field) -> Result<()> {
        self.ensure_same_grid(other)?;
        if self.components != other.components {
            return Err(Error::Shape(format!(
                "component mismatch: {} vs {}",
                self.components, other.components
            )));
        }
        Ok(())
    }

    fn merged_mask(&self, other: &Field) -> Option<Mask> {
        match (&self.mask, &other.mask) {
            (Some(a), Some(b)) => Some(a.and(b)),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        }
    }

    fn derived(&self, components: usize, data: Vec<f64>, mask: Option<Mask>) -> Result<Field> {
        let mut out = Field::new(self.grid.clone(), components, data)?;
        out.mask = mask;
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        self.derived(self.components, self.data.iter().map(|&x| f(x)).collect(), self.mask.clone())
    }

    pub fn scale(&self, s: f64) -> Result<Field> {
        self.map(|x| s * x)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.ensure_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        self.derived(self.components, data, self.merged_mask(other))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.ensure_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        self.derived(self.components, data, self.merged_mask(other))
    }

    /// Pointwise product; a scalar may multiply a vector field.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let n = self.grid.len();
        let (comps, data) = match (self.components, other.components) {
            (a, b) if a == b => (a, self.data.iter().zip(&other.data).map(|(x, y)| x * y).collect()),
            (1, b) => (b, (0..b * n).map(|k| self.data[k % n] * other.data[k]).collect()),
            (a, 1) => (a, (0..a * n).map(|k| self.data[k] * other.data[k % n]).collect()),
            (a, b) => {
                return Err(Error::Shape(format!("cannot multiply {a}- and {b}-component fields")))
            }
        };
        self.derived(comps, data, self.merged_mask(other))
    }

    pub fn min_valid(&self) -> f64 {
        let m = self.valid_mask();
        let n = self.grid.len();
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| m.get(i % n))
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_valid(&self) -> f64 {
        let m = self.valid_mask();
        let n = self.grid.len();
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| m.get(i % n))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Frames of a field sampled at increasing instants.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesField {
    times: Vec<f64>,
    frames: Vec<Field>,
}

impl TimeSeriesField {
    pub fn new(times: Vec<f64>, frames: Vec<Field>) -> Result<Self> {
        if times.len() != frames.len() || frames.is_empty() {
            return Err(Error::Shape(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("frame times must be strictly increasing".into()));
        }
        let f0 = &frames[0];
        for f in &frames[1..] {
            f.ensure_compatible(f0)?;
        }
        Ok(Self { times, frames })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn grid(&self) -> &Grid {
        self.frames[0].grid()
    }
}

/// Trapezoid rule for samples `values` at `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `field(x + h)` sampled at every lattice point.
///
/// On the torus lattice-commensurate shifts rotate indices exactly; other
/// displacements use trigonometric interpolation. On bounded lattices only
/// commensurate shifts are accepted and the result is valid where both `x`
/// and `x + h` are valid.
pub fn shift(field: &Field, h: &[f64]) -> Result<Field> {
    let grid = field.grid();
    if h.len() != grid.dim() {
        return Err(Error::Shape(format!("shift has {} entries for a {}-d lattice", h.len(), grid.dim())));
    }
    if let Some(off) = grid.commensurate_offset(h) {
        return shift_by_offset(field, &off);
    }
    if !grid.is_periodic() {
        return Err(Error::UnsupportedShift(format!(
            "{h:?} is not a lattice vector; bounded domains accept lattice shifts only"
        )));
    }
    let sp = Spectral::new(grid.shape(), &grid.extent());
    let npts = grid.len();
    let mut idx = vec![0; grid.dim()];
    let phase: Vec<Complex64> = (0..npts)
        .map(|flat| {
            sp.unravel(flat, &mut idx);
            let mut arg = 0.0;
            let mut nyq_cos = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                let kh = sp.wavenumber(a, i) * h[a];
                if sp.is_nyquist(a, i) {
                    nyq_cos *= kh.cos();
                } else {
                    arg += kh;
                }
            }
            Complex64::from_polar(nyq_cos, arg)
        })
        .collect();
    let mut data = Vec::with_capacity(field.data().len());
    for c in 0..field.components() {
        let mut spec = sp.forward(field.component(c));
        spec.iter_mut().zip(&phase).for_each(|(s, p)| *s *= p);
        data.extend(sp.inverse(spec));
    }
    field.derived(field.components(), data, field.mask.clone())
}

/// Shift by an integer lattice offset.
pub fn shift_by_offset(field: &Field, off: &[i64]) -> Result<Field> {
    let grid = field.grid();
    let npts = grid.len();
    if grid.is_periodic() {
        let src: Vec<usize> = (0..npts).map(|i| grid.offset(i, off).expect("periodic")).collect();
        let mut data = vec![0.0; field.data().len()];
        for c in 0..field.components() {
            let comp = field.component(c);
            for (i, &s) in src.iter().enumerate() {
                data[c * npts + i] = comp[s];
            }
        }
        let mask = field.mask().map(|m| Mask::new(src.iter().map(|&s| m.get(s)).collect()));
        let mask = match (mask, field.mask()) {
            (Some(shifted), Some(orig)) => Some(shifted.and(orig)),
            _ => None,
        };
        let mut out = field.derived(field.components(), data, mask)?;
        out.positive = field.positive;
        return Ok(out);
    }
    let valid = field.valid_mask();
    let mut data = vec![0.0; field.data().len()];
    let mut bits = vec![false; npts];
    for (i, bit) in bits.iter_mut().enumerate() {
        let Some(s) = grid.offset(i, off) else { continue };
        if valid.get(i) && valid.get(s) {
            *bit = true;
            for c in 0..field.components() {
                data[c * npts + i] = field.data()[c * npts + s];
            }
        }
    }
    let mask = Mask::new(bits);
    if mask.count() == 0 {
        return Err(Error::Margin(format!(
            "shift {off:?} (lattice units) leaves no point whose shifted image is valid"
        )));
    }
    field.derived(field.components(), data, Some(mask))
}

/// Discrete L^p norm of |field| over `region` (or the field's valid region).
/// `p = f64::INFINITY` returns the maximum magnitude.
pub fn lp_norm(field: &Field, p: f64, region: Option<&Mask>) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("L^p exponent must be in [1, inf], got {p}")));
    }
    let owned;
    let region = match region {
        Some(r) => r,
        None => {
            owned = field.valid_mask();
            &owned
        }
    };
    if region.len() != field.grid().len() {
        return Err(Error::Shape("region mask does not match lattice".into()));
    }
    if region.count() == 0 {
        return Err(Error::EmptyRegion("L^p norm over an empty region".into()));
    }
    let mags = (0..field.grid().len())
        .filter(|&i| region.get(i))
        .map(|i| field.magnitude_at(i));
    Ok(lp_of_magnitudes(mags, p, field.grid().cell_volume()))
}

pub(crate) fn lp_of_magnitudes(mags: impl Iterator<Item = f64>, p: f64, vol: f64) -> f64 {
    if p.is_infinite() {
        mags.fold(0.0, f64::max)
    } else if p == 1.0 {
        mags.sum::<f64>() * vol
    } else if p == 2.0 {
        (mags.map(|m| m * m).sum::<f64>() * vol).sqrt()
    } else {
        (mags.map(|m| m.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }
}

/// Smooth test function `theta(t) * cos(2 pi m.x / L + phase)`, multiplied by
/// `direction` when used against the momentum equation. `theta` is the
/// standard bump supported on `[t_center - t_half_width, t_center + t_half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub modes: Vec<i64>,
    pub phase: f64,
    pub direction: Vec<f64>,
    pub t_center: f64,
    pub t_half_width: f64,
}

impl TestFunction {
    fn bump(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_center) / self.t_half_width;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        let b = (-1.0 / q).exp();
        (b, b * (-2.0 * s / (q * q)) / self.t_half_width)
    }

    /// (value, gradient) of the spatial factor at `x` on a torus with `periods`.
    fn spatial(&self, x: &[f64], periods: &[f64]) -> (f64, Vec<f64>) {
        let ks: Vec<f64> = self
            .modes
            .iter()
            .zip(periods)
            .map(|(&m, &l)| 2.0 * PI * m as f64 / l)
            .collect();
        let arg: f64 = ks.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + self.phase;
        let (s, c) = arg.sin_cos();
        (c, ks.iter().map(|k| -k * s).collect())
    }
}

/// Residuals of the weak mass and momentum balances for a trajectory:
/// `int int rho dphi/dt + rho u . grad phi` and
/// `int int rho u . dpsi/dt + (rho u (x) u) : grad psi + P div psi`, with
/// midpoint quadrature in space and the trapezoid rule in time.
pub fn weak_form_residual(
    rho: &TimeSeriesField,
    u: &TimeSeriesField,
    pressure: &TimeSeriesField,
    test: &TestFunction,
) -> Result<(f64, f64)> {
    let grid = rho.grid();
    let Some(periods) = grid.domain().periods() else {
        return Err(Error::DomainKind("weak-form checks use periodic test functions".into()));
    };
    let d = grid.dim();
    if u.grid() != grid || pressure.grid() != grid {
        return Err(Error::Shape("trajectory fields on different lattices".into()));
    }
    if rho.times() != u.times() || rho.times() != pressure.times() {
        return Err(Error::Shape("trajectory fields sampled at different times".into()));
    }
    if u.frames()[0].components() != d || test.modes.len() != d || test.direction.len() != d {
        return Err(Error::Shape("velocity/test function dimension mismatch".into()));
    }
    let (t0, t1) = (rho.times()[0], rho.times()[rho.len() - 1]);
    let (lo, hi) = (test.t_center - test.t_half_width, test.t_center + test.t_half_width);
    if lo < t0 || hi > t1 || !(test.t_half_width > 0.0) {
        return Err(Error::Support { lo, hi, t0, t1 });
    }

    let npts = grid.len();
    let vol = grid.cell_volume();
    let spatial: Vec<(f64, Vec<f64>)> =
        (0..npts).map(|i| test.spatial(&grid.point(i), periods)).collect();

    let mut mass = Vec::with_capacity(rho.len());
    let mut momentum = Vec::with_capacity(rho.len());
    for (k, &t) in rho.times().iter().enumerate() {
        let (b, db) = test.bump(t);
        let r = rho.frames()[k].data();
        let uf = u.frames()[k].data();
        let pf = pressure.frames()[k].data();
        let (mut m_acc, mut p_acc) = (0.0, 0.0);
        for (i, (s, grad)) in spatial.iter().enumerate() {
            let ui: Vec<f64> = (0..d).map(|c| uf[c * npts + i]).collect();
            let u_dot_grad: f64 = ui.iter().zip(grad).map(|(a, g)| a * g).sum();
            let u_dot_dir: f64 = ui.iter().zip(&test.direction).map(|(a, e)| a * e).sum();
            let dir_dot_grad: f64 = test.direction.iter().zip(grad).map(|(e, g)| e * g).sum();
            m_acc += r[i] * (db * s + b * u_dot_grad);
            p_acc += r[i] * u_dot_dir * db * s
                + r[i] * u_dot_dir * b * u_dot_grad
                + pf[i] * b * dir_dot_grad;
        }
        mass.push(m_acc * vol);
        momentum.push(p_acc * vol);
    }
    Ok((trapezoid(rho.times(), &mass), trapezoid(rho.times(), &momentum)))
}

fn ensure_density(rho: &Field) -> Result<()> {
    if rho.components() != 1 {
        return Err(Error::Shape("density must be scalar".into()));
    }
    if !rho.is_positive() {
        let min = rho.min_valid();
        if !(min > 0.0) {
            return Err(Error::Positivity { index: 0, value: min });
        }
    }
    Ok(())
}

fn energy_integral(rho: &Field, u: &Field, density: impl Fn(f64, f64) -> f64) -> Result<f64> {
    ensure_density(rho)?;
    rho.ensure_same_grid(u)?;
    if u.components() != rho.grid().dim() {
        return Err(Error::Shape(format!(
            "velocity has {} components on a {}-d lattice",
            u.components(),
            rho.grid().dim()
        )));
    }
    let region = match rho.merged_mask(u) {
        Some(m) => m,
        None => rho.valid_mask(),
    };
    let vol = rho.grid().cell_volume();
    Ok((0..rho.grid().len())
        .filter(|&i| region.get(i))
        .map(|i| density(rho.data()[i], u.magnitude_at(i).powi(2)))
        .sum::<f64>()
        * vol)
}

/// Kinetic energy `int rho |u|^2` with variable density.
pub fn energy_incompressible(rho: &Field, u: &Field) -> Result<f64> {
    energy_integral(rho, u, |r, u2| r * u2)
}

/// Total energy `int rho |u|^2 / 2 + rho^gamma / (gamma - 1)` of the isentropic system.
pub fn energy_compressible(rho: &Field, u: &Field, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::Parameter(format!("isentropic exponent must exceed 1, got {gamma}")));
    }
    energy_integral(rho, u, |r, u2| 0.5 * r * u2 + r.powf(gamma) / (gamma - 1.0))
}

/// JSON sidecar describing a binary field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub domain_id: String,
    pub domain: Domain,
    pub shape: Vec<usize>,
    pub components: usize,
    pub time: Option<f64>,
    pub positive: bool,
    /// Flat indices of valid points, when the field carries an explicit mask.
    pub mask: Option<Vec<usize>>,
}

pub const FIELD_FORMAT: &str = "fluxlab-field";

/// Write `<base>.bin` (little-endian f64 samples, component-major) and
/// `<base>.json` (header).
pub fn write_field(field: &Field, base: &Path, time: Option<f64>) -> Result<()> {
    let header = FieldHeader {
        format: FIELD_FORMAT.into(),
        version: 1,
        domain_id: field.domain().id().to_string(),
        domain: field.domain().clone(),
        shape: field.grid().shape().to_vec(),
        components: field.components(),
        time,
        positive: field.is_positive(),
        mask: field
            .mask()
            .map(|m| (0..m.len()).filter(|&i| m.get(i)).collect()),
    };
    let mut bytes = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(base.with_extension("bin"), bytes)?;
    fs::write(base.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// Read a field written by [`write_field`]; returns the field and its time stamp.
pub fn read_field(base: &Path) -> Result<(Field, Option<f64>)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(base.with_extension("json"))?)?;
    if header.format != FIELD_FORMAT {
        return Err(Error::Input(format!("unexpected field format '{}'", header.format)));
    }
    let bytes = fs::read(base.with_extension("bin"))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Input("field binary length is not a multiple of 8".into()));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let grid = Grid::new(Arc::new(header.domain), &header.shape)?;
    let npts = grid.len();
    let mut field = Field::new(grid, header.components, data)?;
    if let Some(idx) = header.mask {
        let mut bits = vec![false; npts];
        for i in idx {
            *bits
                .get_mut(i)
                .ok_or_else(|| Error::Input(format!("mask index {i} out of range")))? = true;
        }
        field = field.with_mask(Mask::new(bits))?;
    }
    if header.positive {
        field = field.into_positive()?;
    }
    Ok((field, header.time))
}

/// CSV dump of a 1-d or 2-d field: coordinates followed by components.
pub fn write_csv(field: &Field, path: &Path) -> Result<()> {
    let grid = field.grid();
    if grid.dim() > 2 {
        return Err(Error::Shape("CSV export supports 1-d and 2-d lattices".into()));
    }
    let mut out = fs::File::create(path)?;
    let coords = ["x", "y"];
    let mut head: Vec<String> = coords[..grid.dim()].iter().map(|s| s.to_string()).collect();
    head.extend((0..field.components()).map(|c| format!("f{c}")));
    writeln!(out, "{}", head.join(","))?;
    let npts = grid.len();
    for i in 0..npts {
        let mut row: Vec<String> = grid.point(i).iter().map(|x| format!("{x:.17e}")).collect();
        row.extend((0..field.components()).map(|c| format!("{:.17e}", field.data()[c * npts + i])));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::interior_mask;

    fn torus(d: usize, n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(d).unwrap()), n).unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = torus(2, 8);
        let f = Field::from_fn(g, |x| (x[0] * 3.0).sin() + x[1]).unwrap();
        assert_eq!(shift(&f, &[0.0, 0.0]).unwrap(), f);
    }

    #[test]
    fn one_hot_rotates() {
        let g = torus(1, 8);
        let mut data = vec![0.0; 8];
        data[0] = 1.0;
        let f = Field::scalar(g, data).unwrap();
        let s = shift(&f, &[1.0 / 8.0]).unwrap();
        let mut expect = vec![0.0; 8];
        expect[7] = 1.0;
        assert_eq!(s.data(), &expect[..]);
    }

    #[test]
    fn non_commensurate_shift_of_cosine() {
        let g = torus(1, 32);
        let f = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let s = shift(&f, &[0.25]).unwrap();
        let s2 = shift(&f, &[0.1234]).unwrap();
        for i in 0..32 {
            let x = g.point(i)[0];
            assert!((s.data()[i] - (2.0 * PI * (x + 0.25)).cos()).abs() < 1e-12);
            assert!((s2.data()[i] - (2.0 * PI * (x + 0.1234)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn bounded_shift_rules() {
        let g = Grid::square(Arc::new(Domain::unit_disk()), 32).unwrap();
        let f = Field::from_fn(g.clone(), |x| x[0]).unwrap();
        let h = g.spacing()[0];
        let s = shift(&f, &[2.0 * h, 0.0]).unwrap();
        let m = s.mask().unwrap();
        for i in (0..g.len()).filter(|&i| m.get(i)) {
            assert!((s.data()[i] - (g.point(i)[0] + 2.0 * h)).abs() < 1e-12);
        }
        assert!(matches!(shift(&f, &[0.3 * h, 0.0]), Err(Error::UnsupportedShift(_))));
        assert!(matches!(shift(&f, &[2.5, 0.0]), Err(Error::Margin(_))));
    }

    #[test]
    fn lp_norm_examples() {
        let g = torus(1, 64);
        let two = Field::constant(g.clone(), 1, 2.0).unwrap();
        assert!((lp_norm(&two, 3.0, None).unwrap() - 2.0).abs() < 1e-14);
        let c = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!((lp_norm(&c, 2.0, None).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((lp_norm(&c, f64::INFINITY, None).unwrap() - 1.0).abs() < 1e-12);
        let empty = Mask::new(vec![false; 64]);
        assert!(matches!(lp_norm(&c, 2.0, Some(&empty)), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn energies() {
        let g = torus(2, 32);
        let rho = Field::constant(g.clone(), 1, 1.0).unwrap().into_positive().unwrap();
        let zero = Field::constant(g.clone(), 2, 0.0).unwrap();
        assert_eq!(energy_incompressible(&rho, &zero).unwrap(), 0.0);
        let u = Field::vector_from_fn(g.clone(), 2, |x| vec![(2.0 * PI * x[0]).cos(), 0.0]).unwrap();
        assert!((energy_incompressible(&rho, &u).unwrap() - 0.5).abs() < 1e-10);
        let rho2 = Field::constant(g.clone(), 1, 2.0).unwrap();
        let ux = Field::constant(g.clone(), 2, 0.0)
            .unwrap()
            .add(&Field::vector_from_fn(g.clone(), 2, |_| vec![1.0, 0.0]).unwrap())
            .unwrap();
        assert!((energy_incompressible(&rho2, &ux).unwrap() - 2.0).abs() < 1e-12);
        assert!((energy_compressible(&rho, &zero, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((energy_compressible(&rho, &ux, 1.4).unwrap() - 3.0).abs() < 1e-12);
        let rho3 = Field::from_fn(g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).cos()).unwrap();
        assert!((energy_compressible(&rho3, &zero, 2.0).unwrap() - 1.005).abs() < 1e-10);
        assert!(matches!(energy_compressible(&rho, &zero, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(energy_incompressible(&rho, &rho), Err(Error::Shape(_))));
    }

    #[test]
    fn field_rejects_bad_data() {
        let g = torus(1, 4);
        assert!(Field::scalar(g.clone(), vec![0.0; 3]).is_err());
        assert!(Field::scalar(g.clone(), vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let f = Field::scalar(g, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(f.into_positive(), Err(Error::Positivity { .. })));
    }

    #[test]
    fn serialization_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::square(Arc::new(Domain::unit_disk()), 16).unwrap();
        let f = Field::vector_from_fn(g.clone(), 2, |x| vec![x[0], x[1] * x[1]])
            .unwrap()
            .with_mask(interior_mask(&g, 0.2).unwrap())
            .unwrap();
        let base = dir.path().join("u");
        write_field(&f, &base, Some(0.5)).unwrap();
        let (back, t) = read_field(&base).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, Some(0.5));
        write_csv(&f, &dir.path().join("u.csv")).unwrap();
        let csv = fs::read_to_string(dir.path().join("u.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 256);
        assert!(csv.starts_with("x,y,f0,f1"));
    }
}
