//! Increment seminorms `sup_{|h|<delta} |h|^-beta ||f(.+h) - f||_p`, their
//! time-integrated versions and the small-delta probe.
//!
//! The continuum supremum is replaced by a finite family of lattice shifts, so
//! every value reported here is a lower bound of the true seminorm.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commutator::ScalingFit;
use crate::domain::{Grid, Mask};
use crate::error::{Error, Result};
use crate::field::{lp_of_magnitudes, shift, trapezoid, Field, TimeSeriesField};

/// Finite set of displacements `0 < |h| < delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSet {
    displacements: Vec<Vec<f64>>,
    delta: f64,
    magnitudes: usize,
    directions: usize,
}

impl ShiftSet {
    /// Dyadic magnitudes `delta / 2^j`, `j = 1..=levels`, times `directions`
    /// evenly spread unit vectors, each truncated towards zero onto the lattice.
    /// Zero and repeated vectors are dropped.
    pub fn dyadic(grid: &Grid, delta: f64, levels: usize, directions: usize) -> Result<Self> {
        let d = grid.dim();
        let min_dirs = if d == 1 { 2 } else { 4 };
        if levels < 2 || directions < min_dirs {
            return Err(Error::Parameter(format!(
                "need at least 2 magnitudes and {min_dirs} directions, got {levels} x {directions}"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        let dirs = unit_directions(d, directions)?;
        let h = grid.spacing();
        let mut out: Vec<Vec<i64>> = Vec::new();
        for j in 1..=levels {
            let r = delta / 2f64.powi(j as i32);
            for dir in &dirs {
                let off: Vec<i64> = dir.iter().zip(h).map(|(c, hi)| (r * c / hi).trunc() as i64).collect();
                if off.iter().all(|&o| o == 0) || out.contains(&off) {
                    continue;
                }
                out.push(off);
            }
        }
        let displacements: Vec<Vec<f64>> = out
            .iter()
            .map(|off| off.iter().zip(h).map(|(&o, hi)| o as f64 * hi).collect())
            .collect();
        let set = Self {
            displacements,
            delta,
            magnitudes: levels,
            directions,
        };
        if set.distinct_magnitudes() < 2 {
            return Err(Error::Resolution(format!(
                "delta = {delta} resolves fewer than two distinct shift magnitudes on this lattice"
            )));
        }
        Ok(set)
    }

    /// Every lattice vector with `0 < |h| < delta`.
    pub fn full_commensurate(grid: &Grid, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        let h = grid.spacing();
        let d = grid.dim();
        let mut reach: Vec<i64> = h.iter().map(|hi| (delta / hi).ceil() as i64).collect();
        if grid.is_periodic() {
            // Offsets beyond half the lattice alias onto shorter ones.
            for (a, r) in reach.iter_mut().enumerate() {
                *r = (*r).min(grid.shape()[a] as i64 / 2);
            }
        }
        let mut displacements = Vec::new();
        let total: usize = reach.iter().map(|r| (2 * r + 1) as usize).product();
        let mut idx = vec![0i64; d];
        for mut k in 0..total {
            for a in (0..d).rev() {
                let w = (2 * reach[a] + 1) as usize;
                idx[a] = (k % w) as i64 - reach[a];
                k /= w;
            }
            let v: Vec<f64> = idx.iter().zip(h).map(|(&i, hi)| i as f64 * hi).collect();
            let n = norm(&v);
            if n > 0.0 && n < delta {
                displacements.push(v);
            }
        }
        if displacements.is_empty() {
            return Err(Error::Resolution(format!("no lattice vector is shorter than delta = {delta}")));
        }
        Ok(Self {
            displacements,
            delta,
            magnitudes: 0,
            directions: 0,
        })
    }

    pub fn from_displacements(delta: f64, displacements: Vec<Vec<f64>>) -> Result<Self> {
        if displacements.is_empty() {
            return Err(Error::Parameter("empty shift set".into()));
        }
        for h in &displacements {
            let n = norm(h);
            if !(n > 0.0 && n < delta) {
                return Err(Error::Parameter(format!("|h| = {n} outside (0, {delta})")));
            }
        }
        Ok(Self {
            displacements,
            delta,
            magnitudes: 0,
            directions: 0,
        })
    }

    /// Shifts with `|h| < delta` only.
    pub fn restrict(&self, delta: f64) -> Result<Self> {
        let displacements: Vec<Vec<f64>> =
            self.displacements.iter().filter(|h| norm(h) < delta).cloned().collect();
        if displacements.is_empty() {
            return Err(Error::Resolution(format!("no shift of the family is shorter than {delta}")));
        }
        Ok(Self {
            displacements,
            delta,
            magnitudes: self.magnitudes,
            directions: self.directions,
        })
    }

    pub fn displacements(&self) -> &[Vec<f64>] {
        &self.displacements
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    /// Nominal coverage `(magnitudes, directions)`; zeros for explicit sets.
    pub fn coverage(&self) -> (usize, usize) {
        (self.magnitudes, self.directions)
    }

    fn distinct_magnitudes(&self) -> usize {
        let mut m: Vec<f64> = self.displacements.iter().map(|h| norm(h)).collect();
        m.sort_by(f64::total_cmp);
        m.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        m.len()
    }
}

fn unit_directions(d: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    match d {
        1 => Ok((0..count).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect()),
        2 => Ok((0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()),
        3 => {
            // Fibonacci sphere.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect())
        }
        _ => Err(Error::Parameter(format!("unsupported dimension {d}"))),
    }
}

pub(crate) fn norm(h: &[f64]) -> f64 {
    h.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub h: Vec<f64>,
    pub magnitude: f64,
    pub diff_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub value: f64,
    pub argmax_shift: Vec<f64>,
    pub beta: f64,
    pub p: f64,
    pub delta: f64,
    /// Always true: a finite shift family only bounds the supremum from below.
    pub lower_bound: bool,
    /// Set when `beta = 1` (Lipschitz probe outside the fractional range).
    pub lipschitz_probe: bool,
    pub per_shift: Vec<ShiftRow>,
}

impl SeminormReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let d = self.per_shift.first().map_or(1, |r| r.h.len());
        let mut header = String::from("hx,hy");
        if d == 3 {
            header.push_str(",hz");
        }
        writeln!(f, "{header},|h|,diff_norm,ratio")?;
        for row in &self.per_shift {
            let mut comps: Vec<f64> = row.h.clone();
            if comps.len() == 1 {
                comps.push(0.0);
            }
            let comps: Vec<String> = comps.iter().map(|v| format!("{v:e}")).collect();
            writeln!(
                f,
                "{},{:e},{:e},{:e}",
                comps.join(","),
                row.magnitude,
                row.diff_norm,
                row.ratio
            )?;
        }
        Ok(())
    }
}

fn check_exponents(beta: f64, p: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("p must lie in [1, inf], got {p}")));
    }
    Ok(())
}

/// Resolve the evaluation region and enforce the `2 delta` boundary margin.
fn resolve_region(field: &Field, delta: f64, region: Option<&Mask>) -> Result<Mask> {
    let grid = field.grid();
    let region = match region {
        Some(r) => {
            if r.len() != grid.len() {
                return Err(Error::Shape("region mask does not match lattice".into()));
            }
            r.clone()
        }
        None if grid.is_periodic() => field.valid_mask(),
        None => {
            return Err(Error::Margin(
                "bounded domains need an explicit interior region at distance > 2 delta".into(),
            ))
        }
    };
    if region.count() == 0 {
        return Err(Error::EmptyRegion("seminorm over an empty region".into()));
    }
    if !grid.is_periodic() {
        let phi = grid.phi_values();
        if let Some(i) = (0..grid.len()).find(|&i| region.get(i) && !(phi[i] < -2.0 * delta)) {
            return Err(Error::Margin(format!(
                "region point {:?} lies within 2 delta = {} of the boundary",
                grid.point(i),
                2.0 * delta
            )));
        }
    }
    Ok(region)
}

/// `||f(. + h) - f||_p` over `region`.
fn increment_norm(field: &Field, h: &[f64], p: f64, region: &Mask) -> Result<f64> {
    let grid = field.grid();
    let npts = grid.len();
    let comps = field.components();
    let data = field.data();
    let vol = grid.cell_volume();
    if let Some(off) = grid.commensurate_offset(h) {
        let mut mags = Vec::with_capacity(region.count());
        for i in 0..npts {
            if !region.get(i) {
                continue;
            }
            let j = grid
                .offset(i, &off)
                .ok_or_else(|| Error::Margin(format!("shift {h:?} leaves the lattice")))?;
            let m = if comps == 1 {
                (data[j] - data[i]).abs()
            } else {
                (0..comps)
                    .map(|c| (data[c * npts + j] - data[c * npts + i]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            mags.push(m);
        }
        return Ok(lp_of_magnitudes(mags.into_iter(), p, vol));
    }
    let moved = shift(field, h)?;
    let diff = moved.sub(field)?;
    Ok(lp_of_magnitudes(
        (0..npts).filter(|&i| region.get(i)).map(|i| diff.magnitude_at(i)),
        p,
        vol,
    ))
}

fn per_shift_rows(field: &Field, beta: f64, p: f64, shifts: &ShiftSet, region: &Mask) -> Result<Vec<ShiftRow>> {
    shifts
        .displacements()
        .par_iter()
        .map(|h| {
            let magnitude = norm(h);
            let diff_norm = increment_norm(field, h, p, region)?;
            Ok(ShiftRow {
                h: h.clone(),
                magnitude,
                diff_norm,
                ratio: diff_norm / magnitude.powf(beta),
            })
        })
        .collect()
}

fn report_from_rows(rows: Vec<ShiftRow>, beta: f64, p: f64, delta: f64) -> SeminormReport {
    let mut best = 0;
    for (k, r) in rows.iter().enumerate() {
        if r.ratio > rows[best].ratio {
            best = k;
        }
    }
    SeminormReport {
        value: rows[best].ratio,
        argmax_shift: rows[best].h.clone(),
        beta,
        p,
        delta,
        lower_bound: true,
        lipschitz_probe: beta == 1.0,
        per_shift: rows,
    }
}

/// Max over the shift family of `|h|^-beta ||f(. + h) - f||_{L^p(region)}`.
///
/// On the torus `region = None` means the whole torus. On bounded domains the
/// region is mandatory and must keep a distance larger than `2 delta` from
/// the boundary.
pub fn seminorm(field: &Field, beta: f64, p: f64, shifts: &ShiftSet, region: Option<&Mask>) -> Result<SeminormReport> {
    check_exponents(beta, p)?;
    let region = resolve_region(field, shifts.delta(), region)?;
    let rows = per_shift_rows(field, beta, p, shifts, &region)?;
    Ok(report_from_rows(rows, beta, p, shifts.delta()))
}

/// Aggregate per-frame values in time: trapezoidal `L^q` for finite `q`,
/// maximum for `q = inf`.
pub fn time_aggregate(times: &[f64], values: &[f64], q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("time exponent must lie in [1, inf], got {q}")));
    }
    if q.is_infinite() {
        return Ok(values.iter().cloned().fold(0.0, f64::max));
    }
    if values.len() < 2 {
        return Err(Error::Resolution("finite time exponents need at least two frames".into()));
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
    Ok(trapezoid(times, &powered).powf(1.0 / q))
}

/// `|| ||f(t)||_{V} ||_{L^q(0,T)}` with per-frame seminorms.
pub fn time_seminorm(
    fields: &TimeSeriesField,
    beta: f64,
    p: f64,
    q: f64,
    shifts: &ShiftSet,
    region: Option<&Mask>,
) -> Result<f64> {
    let values = fields
        .frames()
        .iter()
        .map(|f| seminorm(f, beta, p, shifts, region).map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;
    time_aggregate(fields.times(), &values, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub delta: f64,
    pub value: f64,
}

/// Values of the time-integrated seminorm for a decreasing sequence of `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub rows: Vec<ProbeRow>,
}

impl ProbeTable {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// Log-log fit of value against delta.
    pub fn trend(&self) -> Result<ScalingFit> {
        ScalingFit::fit(&self.deltas(), &self.values())
    }
}

/// For each `delta`, the time-integrated seminorm over the shifts of `shifts`
/// shorter than `delta`. Per-shift increments are computed once per frame, so
/// the sequence is nonincreasing as `delta` decreases.
pub fn vanishing_probe(
    fields: &TimeSeriesField,
    beta: f64,
    p: f64,
    q: f64,
    deltas: &[f64],
    shifts: &ShiftSet,
    region: Option<&Mask>,
) -> Result<ProbeTable> {
    check_exponents(beta, p)?;
    if deltas.is_empty() {
        return Err(Error::Parameter("empty delta list".into()));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("deltas must be strictly decreasing".into()));
    }
    if deltas[0] > shifts.delta() {
        return Err(Error::Parameter(format!(
            "largest probe delta {} exceeds the shift family's delta {}",
            deltas[0],
            shifts.delta()
        )));
    }
    let grid = fields.grid();
    let hmax = grid.spacing().iter().cloned().fold(0.0, f64::max);
    if let Some(&small) = deltas.iter().find(|&&d| d < 2.0 * hmax) {
        return Err(Error::Resolution(format!("delta = {small} is below two lattice spacings")));
    }
    let frame_rows = fields
        .frames()
        .iter()
        .map(|f| {
            let region = resolve_region(f, shifts.delta(), region)?;
            per_shift_rows(f, beta, p, shifts, &region)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let per_frame: Vec<f64> = frame_rows
            .iter()
            .map(|fr| {
                fr.iter()
                    .filter(|r| r.magnitude < delta)
                    .map(|r| r.ratio)
                    .fold(0.0, f64::max)
            })
            .collect();
        if frame_rows.iter().all(|fr| fr.iter().all(|r| r.magnitude >= delta)) {
            return Err(Error::Resolution(format!("no shift of the family is shorter than {delta}")));
        }
        rows.push(ProbeRow {
            delta,
            value: time_aggregate(fields.times(), &per_frame, q)?,
        });
    }
    Ok(ProbeTable { beta, p, q, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{interior_mask, Domain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(d: usize, n: usize) -> Grid {
        Grid::square(Arc::new(Domain::unit_torus(d).unwrap()), n).unwrap()
    }

    #[test]
    fn dyadic_shifts_are_strictly_inside() {
        let g = torus(2, 64);
        let s = ShiftSet::dyadic(&g, 0.25, 4, 8).unwrap();
        assert!(s.displacements().iter().all(|h| norm(h) < 0.25 && norm(h) > 0.0));
        assert!(s.distinct_magnitudes() >= 2);
        assert!(ShiftSet::dyadic(&g, 0.25, 1, 8).is_err());
        assert!(ShiftSet::dyadic(&g, 0.25, 3, 3).is_err());
        assert!(matches!(ShiftSet::dyadic(&g, 1.0 / 64.0, 3, 4), Err(Error::Resolution(_))));
    }

    #[test]
    fn constant_field_has_zero_seminorm() {
        let g = torus(2, 32);
        let f = Field::constant(g.clone(), 1, 3.5).unwrap();
        let s = ShiftSet::dyadic(&g, 0.25, 3, 8).unwrap();
        let r = seminorm(&f, 0.5, 2.0, &s, None).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.lower_bound);
    }

    #[test]
    fn cosine_lipschitz_constant() {
        let g = torus(1, 256);
        let f = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let s = ShiftSet::dyadic(&g, 0.5, 8, 2).unwrap();
        let r = seminorm(&f, 1.0, f64::INFINITY, &s, None).unwrap();
        assert!(r.lipschitz_probe);
        assert!((r.value - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "{}", r.value);
        // Analytic per-shift values.
        for row in &r.per_shift {
            let exact = 2.0 * (PI * row.magnitude).sin();
            assert!((row.diff_norm - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn value_is_max_of_rows() {
        let g = torus(2, 16);
        let f = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()).unwrap();
        let s = ShiftSet::full_commensurate(&g, 0.3).unwrap();
        let r = seminorm(&f, 0.5, 3.0, &s, None).unwrap();
        let m = r.per_shift.iter().map(|r| r.ratio).fold(0.0, f64::max);
        assert_eq!(r.value, m);
    }

    #[test]
    fn bounded_domain_margin() {
        let g = Grid::square(Arc::new(Domain::unit_disk()), 64).unwrap();
        let f = Field::from_fn(g.clone(), |x| x[0] * x[1]).unwrap();
        let s = ShiftSet::dyadic(&g, 0.2, 3, 4).unwrap();
        let ok = interior_mask(&g, 0.45).unwrap();
        assert!(seminorm(&f, 0.5, 2.0, &s, Some(&ok)).is_ok());
        let bad = interior_mask(&g, 0.3).unwrap();
        assert!(matches!(seminorm(&f, 0.5, 2.0, &s, Some(&bad)), Err(Error::Margin(_))));
        assert!(matches!(seminorm(&f, 0.5, 2.0, &s, None), Err(Error::Margin(_))));
    }

    #[test]
    fn time_aggregation() {
        let g = torus(1, 64);
        let base = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin()).unwrap();
        let s = ShiftSet::dyadic(&g, 0.25, 4, 2).unwrap();
        let stat = seminorm(&base, 0.5, 2.0, &s, None).unwrap().value;
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.2).collect();
        let frames = vec![base.clone(); times.len()];
        let ts = TimeSeriesField::new(times.clone(), frames).unwrap();
        let v = time_seminorm(&ts, 0.5, 2.0, 3.0, &s, None).unwrap();
        assert!((v - 2f64.powf(1.0 / 3.0) * stat).abs() < 1e-10);

        let frames: Vec<Field> = times.iter().map(|&t| base.scale(t).unwrap()).collect();
        let ts = TimeSeriesField::new(times.clone(), frames).unwrap();
        let v = time_seminorm(&ts, 0.5, 2.0, 3.0, &s, None).unwrap();
        let cubes: Vec<f64> = times.iter().map(|t| t * t * t).collect();
        let expected = trapezoid(&times, &cubes).powf(1.0 / 3.0) * stat;
        assert!((v - expected).abs() < 1e-8);
        let vinf = time_seminorm(&ts, 0.5, 2.0, f64::INFINITY, &s, None).unwrap();
        assert!((vinf - 2.0 * stat).abs() < 1e-12);

        let one = TimeSeriesField::new(vec![0.0], vec![base]).unwrap();
        assert!(matches!(time_seminorm(&one, 0.5, 2.0, 3.0, &s, None), Err(Error::Resolution(_))));
    }

    #[test]
    fn smooth_probe_decays() {
        let g = torus(1, 512);
        let f = Field::from_fn(g.clone(), |x| (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * PI * x[0]).cos()).unwrap();
        let ts = TimeSeriesField::new(vec![0.0, 1.0], vec![f.clone(), f]).unwrap();
        let s = ShiftSet::dyadic(&g, 0.25, 8, 2).unwrap();
        let deltas = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
        let t = vanishing_probe(&ts, 1.0 / 3.0, 3.0, 3.0, &deltas, &s, None).unwrap();
        let v = t.values();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
        assert!(t.trend().unwrap().exponent.unwrap() >= 0.55);
    }
}
