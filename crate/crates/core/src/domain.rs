//! Periodic boxes and smooth bounded planar regions, the lattices laid over
//! them, interior sets and boundary-layer quadrature.
//!
//! Bounded regions are described by a signed distance function `phi`
//! (negative inside). The interior set at depth `r` is `{phi < -r}`; the
//! boundary layer of width `eps` is `{-eps <= phi < 0}`. Layer integrals use
//! midpoint quadrature in which every cell is weighted by the fraction of its
//! area lying inside the layer, estimated from the linearisation of `phi` at
//! the cell centre.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Built-in signed distance functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sdf {
    Disk { center: [f64; 2], radius: f64 },
    /// Square `[-half_side, half_side]^2` with corners rounded by `fillet`.
    RoundedSquare { half_side: f64, fillet: f64 },
}

/// A point on the boundary curve with its outward normal, signed curvature
/// (positive for convex arcs) and arclength weight.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
    pub arclength: f64,
}

impl Sdf {
    pub fn value(&self, p: [f64; 2]) -> f64 {
        match *self {
            Sdf::Disk { center, radius } => {
                ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() - radius
            }
            Sdf::RoundedSquare { half_side, fillet } => {
                let qx = p[0].abs() - (half_side - fillet);
                let qy = p[1].abs() - (half_side - fillet);
                let outside = (qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt();
                outside + qx.max(qy).min(0.0) - fillet
            }
        }
    }

    /// Analytic gradient (unit length wherever the distance is smooth).
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Sdf::Disk { center, .. } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    [dx / r, dy / r]
                }
            }
            Sdf::RoundedSquare { half_side, fillet } => {
                let core = half_side - fillet;
                let qx = p[0].abs() - core;
                let qy = p[1].abs() - core;
                let (gx, gy) = if qx > 0.0 && qy > 0.0 {
                    let r = (qx * qx + qy * qy).sqrt();
                    (qx / r, qy / r)
                } else if qx >= qy {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                };
                [gx * sign(p[0]), gy * sign(p[1])]
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            Sdf::Disk { radius, .. } => 2.0 * PI * radius,
            Sdf::RoundedSquare { half_side, fillet } => {
                8.0 * (half_side - fillet) + 2.0 * PI * fillet
            }
        }
    }

    /// Midpoint samples of the boundary curve, roughly `count` of them.
    pub fn boundary_samples(&self, count: usize) -> Vec<BoundarySample> {
        let count = count.max(8);
        match *self {
            Sdf::Disk { center, radius } => {
                let ds = 2.0 * PI * radius / count as f64;
                (0..count)
                    .map(|i| {
                        let th = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                        let n = [th.cos(), th.sin()];
                        BoundarySample {
                            point: [center[0] + radius * n[0], center[1] + radius * n[1]],
                            normal: n,
                            curvature: 1.0 / radius,
                            arclength: ds,
                        }
                    })
                    .collect()
            }
            Sdf::RoundedSquare { half_side, fillet } => {
                let core = half_side - fillet;
                let per = self.perimeter();
                let mut out = Vec::new();
                // Four flat edges, outward normals E, N, W, S.
                let edge_len = 2.0 * core;
                let n_edge = ((count as f64 * edge_len / per).ceil() as usize).max(1);
                let n_arc = ((count as f64 * 0.5 * PI * fillet / per).ceil() as usize).max(2);
                for side in 0..4 {
                    let rot = side as f64 * 0.5 * PI;
                    let (c, s) = (rot.cos(), rot.sin());
                    if edge_len > 0.0 {
                        let ds = edge_len / n_edge as f64;
                        for i in 0..n_edge {
                            let t = -core + (i as f64 + 0.5) * ds;
                            let local = [half_side, t];
                            out.push(BoundarySample {
                                point: [c * local[0] - s * local[1], s * local[0] + c * local[1]],
                                normal: [c, s],
                                curvature: 0.0,
                                arclength: ds,
                            });
                        }
                    }
                    // Corner arc between this edge and the next one.
                    let ds = 0.5 * PI * fillet / n_arc as f64;
                    for i in 0..n_arc {
                        let th = rot + 0.5 * PI * (i as f64 + 0.5) / n_arc as f64;
                        let n = [th.cos(), th.sin()];
                        let centre = [
                            core * (rot + 0.25 * PI).cos().signum(),
                            core * (rot + 0.25 * PI).sin().signum(),
                        ];
                        out.push(BoundarySample {
                            point: [centre[0] + fillet * n[0], centre[1] + fillet * n[1]],
                            normal: n,
                            curvature: 1.0 / fillet,
                            arclength: ds,
                        });
                    }
                }
                out
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Torus { periods: Vec<f64> },
    Bounded2D { sdf: Sdf, bbox: BoundingBox, collar: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    id: String,
    kind: DomainKind,
}

impl Domain {
    pub fn torus(periods: &[f64]) -> Result<Self> {
        if periods.is_empty() || periods.len() > 3 {
            return Err(Error::InvalidDomain(format!(
                "torus dimension must be 1..=3, got {}",
                periods.len()
            )));
        }
        if periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidDomain("torus periods must be positive".into()));
        }
        Ok(Self {
            id: format!("torus{}", periods.len()),
            kind: DomainKind::Torus { periods: periods.to_vec() },
        })
    }

    /// Unit-period torus of dimension `d`.
    pub fn unit_torus(d: usize) -> Result<Self> {
        Self::torus(&vec![1.0; d])
    }

    /// Unit disk over `[-1, 1]^2` with collar radius 0.5.
    pub fn unit_disk() -> Self {
        Self::disk(1.0).expect("unit disk is valid")
    }

    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidDomain("disk radius must be positive".into()));
        }
        Self::bounded(
            "disk",
            Sdf::Disk { center: [0.0, 0.0], radius },
            BoundingBox { min: [-radius, -radius], max: [radius, radius] },
            0.5 * radius,
        )
    }

    /// Rounded square; the collar radius equals the fillet radius.
    pub fn rounded_square(half_side: f64, fillet: f64) -> Result<Self> {
        if !(half_side > 0.0 && fillet > 0.0 && fillet <= half_side) {
            return Err(Error::InvalidDomain(
                "rounded square needs 0 < fillet <= half_side".into(),
            ));
        }
        Self::bounded(
            "rounded_square",
            Sdf::RoundedSquare { half_side, fillet },
            BoundingBox { min: [-half_side, -half_side], max: [half_side, half_side] },
            fillet,
        )
    }

    pub fn bounded(id: &str, sdf: Sdf, bbox: BoundingBox, collar: f64) -> Result<Self> {
        if !(collar > 0.0) {
            return Err(Error::InvalidDomain("collar radius must be positive".into()));
        }
        if !(bbox.max[0] > bbox.min[0] && bbox.max[1] > bbox.min[1]) {
            return Err(Error::InvalidDomain("degenerate bounding box".into()));
        }
        let d = Self {
            id: id.to_string(),
            kind: DomainKind::Bounded2D { sdf, bbox, collar },
        };
        d.validate()?;
        Ok(d)
    }

    /// Resolve a configuration id. `params` holds optional numeric
    /// parameters: torus periods, disk radius, or (half_side, fillet).
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self> {
        match id {
            "torus1" | "torus2" | "torus3" => {
                let d = (id.as_bytes()[5] - b'0') as usize;
                if params.is_empty() {
                    Self::unit_torus(d)
                } else if params.len() == d {
                    Self::torus(params)
                } else {
                    Err(Error::InvalidDomain(format!("{id} expects {d} periods")))
                }
            }
            "disk" => Self::disk(params.first().copied().unwrap_or(1.0)),
            "rounded_square" => Self::rounded_square(
                params.first().copied().unwrap_or(1.0),
                params.get(1).copied().unwrap_or(0.4),
            ),
            other => Err(Error::InvalidDomain(format!("unknown domain id '{other}'"))),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Torus { periods } => periods.len(),
            DomainKind::Bounded2D { .. } => 2,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, DomainKind::Torus { .. })
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match &self.kind {
            DomainKind::Torus { periods } => Some(periods),
            _ => None,
        }
    }

    pub fn sdf(&self) -> Option<&Sdf> {
        match &self.kind {
            DomainKind::Bounded2D { sdf, .. } => Some(sdf),
            _ => None,
        }
    }

    /// Collar radius r0 (infinite on the torus, where there is no boundary).
    pub fn collar(&self) -> f64 {
        match &self.kind {
            DomainKind::Bounded2D { collar, .. } => *collar,
            DomainKind::Torus { .. } => f64::INFINITY,
        }
    }

    /// Signed distance at `p`; on the torus every point is interior.
    pub fn phi(&self, p: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Bounded2D { sdf, .. } => sdf.value([p[0], p[1]]),
            DomainKind::Torus { .. } => f64::NEG_INFINITY,
        }
    }

    /// Check |grad phi| = 1 (finite differences) at sampled collar points.
    pub fn validate(&self) -> Result<()> {
        let DomainKind::Bounded2D { sdf, collar, .. } = &self.kind else {
            return Ok(());
        };
        let fd = 1e-6;
        for b in sdf.boundary_samples(64) {
            for frac in [0.1, 0.35, 0.6, 0.85] {
                let depth = frac * collar;
                let p = [b.point[0] - depth * b.normal[0], b.point[1] - depth * b.normal[1]];
                let phi = sdf.value(p);
                if !(phi < 0.0 && phi > -collar) {
                    return Err(Error::InvalidDomain(format!(
                        "collar sample {p:?} has phi = {phi}, expected in (-{collar}, 0)"
                    )));
                }
                let gx = (sdf.value([p[0] + fd, p[1]]) - sdf.value([p[0] - fd, p[1]])) / (2.0 * fd);
                let gy = (sdf.value([p[0], p[1] + fd]) - sdf.value([p[0], p[1] - fd])) / (2.0 * fd);
                let norm = (gx * gx + gy * gy).sqrt();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidDomain(format!(
                        "|grad phi| = {norm} at collar point {p:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Boolean mask over the points of a lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn full(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask::new(self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect())
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

/// Uniform lattice over a domain. Torus lattices have nodes at `i * L / N`;
/// bounded lattices are cell centred on the bounding box. Flat indices are
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Arc<Domain>,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Arc<Domain>, shape: &[usize]) -> Result<Self> {
        if shape.len() != domain.dim() {
            return Err(Error::Shape(format!(
                "lattice rank {} does not match domain dimension {}",
                shape.len(),
                domain.dim()
            )));
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::Resolution("lattice needs at least 2 points per axis".into()));
        }
        let (origin, spacing) = match domain.kind() {
            DomainKind::Torus { periods } => (
                vec![0.0; shape.len()],
                periods.iter().zip(shape).map(|(l, &n)| l / n as f64).collect::<Vec<_>>(),
            ),
            DomainKind::Bounded2D { bbox, .. } => {
                let h: Vec<f64> = (0..2)
                    .map(|a| (bbox.max[a] - bbox.min[a]) / shape[a] as f64)
                    .collect();
                ((0..2).map(|a| bbox.min[a] + 0.5 * h[a]).collect(), h)
            }
        };
        Ok(Self {
            domain,
            shape: shape.to_vec(),
            origin,
            spacing,
        })
    }

    /// Isotropic lattice with `n` points per axis.
    pub fn square(domain: Arc<Domain>, n: usize) -> Result<Self> {
        let d = domain.dim();
        Self::new(domain, &vec![n; d])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_periodic(&self) -> bool {
        self.domain.is_torus()
    }

    /// Lengths of the lattice box (periods on the torus).
    pub fn extent(&self) -> Vec<f64> {
        self.spacing.iter().zip(&self.shape).map(|(h, &n)| h * n as f64).collect()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Coordinate of index `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    /// Flat index of `flat + offset` (periodic wrap on the torus, `None` when
    /// leaving a bounded lattice).
    pub fn offset(&self, flat: usize, offset: &[i64]) -> Option<usize> {
        let idx = self.unravel(flat);
        let mut out = 0usize;
        for a in 0..self.shape.len() {
            let n = self.shape[a] as i64;
            let mut j = idx[a] as i64 + offset[a];
            if self.is_periodic() {
                j = j.rem_euclid(n);
            } else if j < 0 || j >= n {
                return None;
            }
            out = out * self.shape[a] + j as usize;
        }
        Some(out)
    }

    /// Signed distance of every lattice point.
    pub fn phi_values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.domain.phi(&self.point(i))).collect()
    }

    /// Nearest lattice offset to a displacement, if it is commensurate
    /// (within 1e-9 of a lattice vector, relative to the spacing).
    pub fn commensurate_offset(&self, h: &[f64]) -> Option<Vec<i64>> {
        h.iter()
            .zip(&self.spacing)
            .map(|(x, s)| {
                let k = x / s;
                let r = k.round();
                ((k - r).abs() < 1e-9).then_some(r as i64)
            })
            .collect()
    }
}

/// Lattice points strictly deeper than `r` inside the domain.
pub fn interior_mask(grid: &Grid, r: f64) -> Result<Mask> {
    if !(r >= 0.0) {
        return Err(Error::Parameter(format!("interior depth must be >= 0, got {r}")));
    }
    if grid.is_periodic() {
        if r != 0.0 {
            return Err(Error::Parameter("the torus has no boundary; depth must be 0".into()));
        }
        return Ok(Mask::full(grid.len()));
    }
    let mask = Mask::new(grid.phi_values().into_iter().map(|phi| phi < -r).collect());
    if mask.count() == 0 {
        return Err(Error::EmptyRegion(format!(
            "no lattice point lies at depth > {r} (collar radius {})",
            grid.domain().collar()
        )));
    }
    Ok(mask)
}

/// Outward unit normal of the level set through `x`, for `x` in the collar.
pub fn normal_field(domain: &Domain, x: [f64; 2]) -> Result<[f64; 2]> {
    let Some(sdf) = domain.sdf() else {
        return Err(Error::DomainKind("the torus has no boundary normal".into()));
    };
    let phi = sdf.value(x);
    if !(phi < 0.0 && phi > -domain.collar()) {
        return Err(Error::OutOfCollar { point: x.to_vec(), phi });
    }
    Ok(unit_gradient(sdf, x))
}

fn unit_gradient(sdf: &Sdf, x: [f64; 2]) -> [f64; 2] {
    let g = sdf.gradient(x);
    let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
    [g[0] / n, g[1] / n]
}

/// Normal at every lattice point of a bounded grid (no collar check; used for
/// layer quadrature where cell centres may sit just outside the boundary).
pub fn normal_values(grid: &Grid) -> Result<Vec<[f64; 2]>> {
    let Some(sdf) = grid.domain().sdf() else {
        return Err(Error::DomainKind("the torus has no boundary normal".into()));
    };
    Ok((0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            unit_gradient(sdf, [p[0], p[1]])
        })
        .collect())
}

/// Boundary layer of width `epsilon`, i.e. the set `{-epsilon <= phi < 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub epsilon: f64,
}

impl LayerSpec {
    pub fn new(domain: &Domain, epsilon: f64) -> Result<Self> {
        if domain.is_torus() {
            return Err(Error::DomainKind("boundary layers need a bounded domain".into()));
        }
        if !(epsilon > 0.0 && epsilon < domain.collar()) {
            return Err(Error::Parameter(format!(
                "layer width must satisfy 0 < eps < r0 = {}, got {epsilon}",
                domain.collar()
            )));
        }
        Ok(Self { epsilon })
    }
}

/// CDF of `nx * X + ny * Y` with X, Y uniform on the cell.
fn cell_cdf(s: f64, a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    let sp = s + 0.5 * (a + b);
    if sp <= 0.0 {
        return 0.0;
    }
    if sp >= a + b {
        return 1.0;
    }
    if b < 1e-14 * a {
        return (sp / a).clamp(0.0, 1.0);
    }
    if sp <= b {
        sp * sp / (2.0 * a * b)
    } else if sp <= a {
        b / (2.0 * a) + (sp - b) / a
    } else {
        let r = a + b - sp;
        1.0 - r * r / (2.0 * a * b)
    }
}

/// Fraction of each cell where `lo <= phi < hi`, from the linearised distance.
pub fn band_weights(grid: &Grid, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let Some(sdf) = grid.domain().sdf() else {
        return Err(Error::DomainKind("band weights need a bounded domain".into()));
    };
    let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
    Ok((0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            let x = [p[0], p[1]];
            let phi = sdf.value(x);
            let reach = 0.5 * (hx + hy);
            if phi + reach < lo || phi - reach >= hi {
                return 0.0;
            }
            if phi - reach >= lo && phi + reach < hi {
                return 1.0;
            }
            let n = unit_gradient(sdf, x);
            let (a, b) = (n[0].abs() * hx, n[1].abs() * hy);
            (cell_cdf(hi - phi, a, b) - cell_cdf(lo - phi, a, b)).clamp(0.0, 1.0)
        })
        .collect())
}

/// Pointwise magnitude of a (scalar or vector) field.
fn magnitudes(field: &Field) -> Vec<f64> {
    (0..field.grid().len()).map(|i| field.magnitude_at(i)).collect()
}

/// Result of a layer quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerIntegral {
    /// Integral of |f|^p over the layer.
    pub integral: f64,
    /// Measure of the layer.
    pub measure: f64,
}

impl LayerIntegral {
    pub fn average(&self) -> f64 {
        self.integral / self.measure
    }
}

/// Integral of |field|^p over `{-eps <= phi < 0}` together with the layer area.
pub fn layer_integral(field: &Field, layer: LayerSpec, p: f64) -> Result<LayerIntegral> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("layer exponent must be >= 1, got {p}")));
    }
    let grid = field.grid();
    let weights = band_weights(grid, -layer.epsilon, 0.0)?;
    let mags = magnitudes(field);
    let vol = grid.cell_volume();
    let mut measure = 0.0;
    let mut integral = 0.0;
    for (w, m) in weights.iter().zip(&mags) {
        if *w > 0.0 {
            measure += w * vol;
            integral += w * vol * m.abs().powf(p);
        }
    }
    if measure == 0.0 {
        return Err(Error::EmptyRegion(format!(
            "layer of width {} contains no quadrature cell",
            layer.epsilon
        )));
    }
    Ok(LayerIntegral { integral, measure })
}

/// Mean of |field|^p over the boundary layer.
pub fn layer_average(field: &Field, layer: LayerSpec, p: f64) -> Result<f64> {
    let li = layer_integral(field, layer, p)?;
    // Normalise by the weight sum directly so constants average exactly.
    Ok(li.integral / li.measure)
}

/// Bilinear interpolation of a scalar field on a bounded (cell-centred) grid.
fn interpolate(grid: &Grid, data: &[f64], p: [f64; 2]) -> f64 {
    let n = grid.shape();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for a in 0..2 {
        let s = ((p[a] - grid.origin()[a]) / grid.spacing()[a]).clamp(0.0, (n[a] - 1) as f64);
        let i = (s.floor() as usize).min(n[a] - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    let at = |i: usize, j: usize| data[i * n[1] + j];
    let (i, j) = (base[0], base[1]);
    let (fx, fy) = (frac[0], frac[1]);
    (1.0 - fx) * (1.0 - fy) * at(i, j)
        + fx * (1.0 - fy) * at(i + 1, j)
        + (1.0 - fx) * fy * at(i, j + 1)
        + fx * fy * at(i + 1, j + 1)
}

/// Self-consistency check of the coarea decomposition over the band
/// `{-r2 <= phi < -r1}`: returns (area quadrature, shell-by-shell quadrature).
///
/// The shell route integrates `g` over the offset curves
/// `{y - nu * n(y) : y on the boundary}` (arclength scaled by `1 - nu * kappa`)
/// at `shells` midpoints in `nu`, reading `g` by bilinear interpolation.
pub fn coarea_check(field: &Field, r1: f64, r2: f64, shells: Option<usize>) -> Result<(f64, f64)> {
    let grid = field.grid();
    let domain = grid.domain();
    let Some(sdf) = domain.sdf() else {
        return Err(Error::DomainKind("coarea check needs a bounded domain".into()));
    };
    if field.components() != 1 {
        return Err(Error::Shape("coarea check integrates scalar fields".into()));
    }
    if !(0.0 < r1 && r1 < r2 && r2 < domain.collar()) {
        return Err(Error::Parameter(format!(
            "need 0 < r1 < r2 < r0 = {}, got r1 = {r1}, r2 = {r2}",
            domain.collar()
        )));
    }
    let h = grid.min_spacing();
    let shells = shells.unwrap_or_else(|| (((r2 - r1) / h).ceil() as usize).max(8));
    if shells < 4 {
        return Err(Error::Resolution(format!("{shells} shells; at least 4 required")));
    }

    let weights = band_weights(grid, -r2, -r1)?;
    let vol = grid.cell_volume();
    let data = field.data();
    let area: f64 = weights.iter().zip(data).map(|(w, g)| w * g * vol).sum();

    let samples = sdf.boundary_samples(((8.0 * sdf.perimeter() / h).ceil() as usize).max(64));
    let dnu = (r2 - r1) / shells as f64;
    let mut shell_total = 0.0;
    for k in 0..shells {
        let nu = r1 + (k as f64 + 0.5) * dnu;
        let line: f64 = samples
            .iter()
            .map(|b| {
                let q = [b.point[0] - nu * b.normal[0], b.point[1] - nu * b.normal[1]];
                interpolate(grid, data, q) * b.arclength * (1.0 - nu * b.curvature)
            })
            .sum();
        shell_total += line * dnu;
    }
    Ok((area, shell_total))
}
