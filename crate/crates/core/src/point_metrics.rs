//! Metrics evaluated from a pair of points and the boundary oracle alone.
//!
//! The suprema defining `m_G` and `w_G` are computed exactly whenever the
//! boundary consists of points, circles and lines. Both reduce to distance
//! computations after a Möbius map:
//!
//! * `w_G(x)` is the Euclidean diameter of `∂G` inverted about `x`;
//! * sending `y ↦ ∞` turns `|a,x,b,y|` into `|A−B|/|A−X|`, so
//!   `m_G(x,y) = sup_A F(A)/|A−X|` with `F(A)` the farthest boundary distance.
//!
//! The outer supremum over a circle is a one-dimensional branch-and-bound whose
//! residual gap is returned as the error bound.

use num_complex::Complex64;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::domains::{BoundaryPiece, DomainKind, DomainSpec};
use crate::error::{DomainError, MetricError};
use crate::geometry::{chordal_distance, cross_ratio, ExtendedPoint, MobiusMap};
use crate::special::disk_hyperbolic;

/// Relative gap at which the circle branch-and-bound stops.
const SUP_REL_TOL: f64 = 1e-6;
const SUP_MAX_EXPANSIONS: usize = 200_000;

/// A metric value with an upper bound on its discretization error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub error_bound: f64,
}

impl MetricValue {
    pub fn exact(value: f64) -> Self {
        MetricValue { value, error_bound: 0.0 }
    }

    pub fn new(value: f64, error_bound: f64) -> Self {
        MetricValue { value, error_bound: error_bound.max(0.0) }
    }

    /// `log(1 + value)`, with the error propagated through the derivative bound.
    pub fn log1p(self) -> Self {
        MetricValue::new(self.value.ln_1p(), self.error_bound / (1.0 + self.value))
    }
}

fn member(spec: &DomainSpec, x: ExtendedPoint) -> Result<(), MetricError> {
    if spec.contains(x) {
        Ok(())
    } else {
        Err(DomainError::OutsideDomain(x.to_string()).into())
    }
}

fn finite_member(spec: &DomainSpec, x: ExtendedPoint) -> Result<Complex64, MetricError> {
    let z = x.finite().ok_or(DomainError::InfinityChart)?;
    member(spec, x)?;
    Ok(z)
}

/// `log(1 + L/d)` together with the error caused by an uncertainty `gap` in `d`.
fn log_ratio(len: f64, d: f64, gap: f64) -> MetricValue {
    let value = (len / d).ln_1p();
    if gap == 0.0 {
        return MetricValue::exact(value);
    }
    if d <= gap {
        return MetricValue::new(value, f64::INFINITY);
    }
    MetricValue::new(value, len * gap / ((d - gap) * (d - gap + len)))
}

/// Distance-ratio metric `j_G(x,y) = log(1 + |x−y|/min(d_G(x), d_G(y)))`.
pub fn j_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let (zx, zy) = (finite_member(spec, x)?, finite_member(spec, y)?);
    let d = spec.boundary_distance_unchecked(zx)?.min(spec.boundary_distance_unchecked(zy)?);
    Ok(log_ratio((zx - zy).norm(), d, spec.mesh_gap()))
}

/// Stereographic image on the sphere of diameter one touching the plane at the origin.
fn sphere_point(p: ExtendedPoint) -> [f64; 3] {
    match p {
        ExtendedPoint::Infinity => [0.0, 0.0, 1.0],
        ExtendedPoint::Finite(z) => {
            let s = 1.0 + z.norm_sqr();
            [z.re / s, z.im / s, z.norm_sqr() / s]
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Chordal distance from `p` to a boundary piece, measured on the sphere.
fn chordal_piece_distance(piece: &BoundaryPiece, p: ExtendedPoint) -> f64 {
    let three = match *piece {
        BoundaryPiece::Point(b) => return chordal_distance(p, b),
        BoundaryPiece::Circle { center, radius } => [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
            .map(|t| ExtendedPoint::Finite(center + Complex64::from_polar(radius, t))),
        BoundaryPiece::Line { through, direction } => [
            ExtendedPoint::Finite(through - direction),
            ExtendedPoint::Finite(through + direction),
            ExtendedPoint::Infinity,
        ],
    };
    let [p1, p2, p3] = three.map(sphere_point);
    let (a, b) = (sub(p1, p3), sub(p2, p3));
    let n = cross(a, b);
    let nn = dot(n, n);
    let off = cross(sub(scale(b, dot(a, a)), scale(a, dot(b, b))), n);
    let center = [p3[0] + off[0] / (2.0 * nn), p3[1] + off[1] / (2.0 * nn), p3[2] + off[2] / (2.0 * nn)];
    let radius = dot(sub(p1, center), sub(p1, center)).sqrt();
    let unit = scale(n, 1.0 / nn.sqrt());
    let v = sub(sphere_point(p), center);
    let h = dot(v, unit);
    let in_plane = sub(v, scale(unit, h)).iter().map(|c| c * c).sum::<f64>().sqrt();
    (h * h + (in_plane - radius).powi(2)).sqrt()
}

/// Chordal boundary distance `d̂_G(x) = inf_{b∈∂G} q(x, b)`.
pub fn chordal_boundary_distance(spec: &DomainSpec, x: ExtendedPoint) -> Result<MetricValue, MetricError> {
    member(spec, x)?;
    let d = spec
        .pieces()
        .iter()
        .map(|piece| chordal_piece_distance(piece, x))
        .fold(f64::INFINITY, f64::min);
    Ok(MetricValue::new(d, spec.mesh_gap()))
}

/// Chordal distance-ratio metric `ĵ_G(x,y) = log(1 + q(x,y)/min(d̂_G(x), d̂_G(y)))`.
pub fn j_hat_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let dx = chordal_boundary_distance(spec, x)?;
    let dy = chordal_boundary_distance(spec, y)?;
    Ok(log_ratio(chordal_distance(x, y), dx.value.min(dy.value), spec.mesh_gap()))
}

#[derive(PartialEq)]
struct Arc {
    upper: f64,
    mid: f64,
    half: f64,
}

impl Eq for Arc {}

impl PartialOrd for Arc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Arc {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Maximizes `g(A) = F(A)/|A−X|` over a circle, where `F` is 1-Lipschitz.
/// Returns the best value found and a certified upper bound.
fn sup_ratio_on_circle(center: Complex64, radius: f64, x: Complex64, far: &dyn Fn(Complex64) -> f64) -> (f64, f64) {
    let g = |t: f64| {
        let a = center + Complex64::from_polar(radius, t);
        (far(a) / (a - x).norm(), a)
    };
    // every point of an arc of half-angle `half` lies within `radius·half` of its midpoint
    let bound = |half: f64, value: f64, a: Complex64| {
        let slack = radius * half;
        let den = (a - x).norm() - slack;
        if den <= 0.0 {
            f64::INFINITY
        } else {
            value.max((far(a) + slack) / den)
        }
    };
    let initial = 256;
    let half0 = PI / initial as f64;
    let mut best = 0.0f64;
    let mut heap = BinaryHeap::new();
    let mut samples = Vec::with_capacity(initial);
    for k in 0..initial {
        let mid = (2 * k + 1) as f64 * half0;
        let (v, a) = g(mid);
        best = best.max(v);
        samples.push(v);
        heap.push(Arc { upper: bound(half0, v, a), mid, half: half0 });
    }
    // golden-section polish of the sampled local maxima
    for k in 0..initial {
        let (prev, next) = (samples[(k + initial - 1) % initial], samples[(k + 1) % initial]);
        if samples[k] >= prev && samples[k] >= next && samples[k] >= 0.5 * best {
            let mid = (2 * k + 1) as f64 * half0;
            best = best.max(golden_max(|t| g(t).0, mid - 2.0 * half0, mid + 2.0 * half0));
        }
    }
    let mut expansions = 0;
    while let Some(top) = heap.peek() {
        if top.upper <= best * (1.0 + SUP_REL_TOL) || expansions >= SUP_MAX_EXPANSIONS {
            break;
        }
        let top = heap.pop().expect("peeked");
        expansions += 1;
        let half = 0.5 * top.half;
        for mid in [top.mid - half, top.mid + half] {
            let (v, a) = g(mid);
            best = best.max(v);
            heap.push(Arc { upper: bound(half, v, a), mid, half });
        }
    }
    let upper = heap.peek().map_or(best, |top| top.upper.max(best));
    (best, upper)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Farthest distance from `a` to any of the pieces (all bounded).
fn farthest(pieces: &[BoundaryPiece], a: Complex64) -> f64 {
    pieces.iter().map(|p| p.distance_range(a).1).fold(0.0, f64::max)
}

fn sampled_points(spec: &DomainSpec) -> Option<Vec<Complex64>> {
    match spec.kind() {
        DomainKind::SampledBoundary { samples, .. } => {
            let map = spec.map().copied().unwrap_or_else(MobiusMap::identity);
            Some(samples.iter().filter_map(|&s| map.apply(s).finite()).collect())
        }
        _ => None,
    }
}

/// `m_G(x,y) = sup_{a,b∈∂G} |a,x,b,y|`.
pub fn moebius_sup(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    member(spec, x)?;
    member(spec, y)?;
    if x.approx_eq(&y) {
        return Ok(MetricValue::exact(0.0));
    }
    if spec.boundary_cardinality().is_some() {
        let pts: Vec<ExtendedPoint> = spec
            .pieces()
            .iter()
            .map(|p| match p {
                BoundaryPiece::Point(q) => *q,
                _ => unreachable!("finite boundary"),
            })
            .collect();
        let mut best = 0.0f64;
        for (i, &a) in pts.iter().enumerate() {
            for (j, &b) in pts.iter().enumerate() {
                if i != j {
                    best = best.max(cross_ratio(a, x, b, y)?);
                }
            }
        }
        return Ok(MetricValue::exact(best));
    }
    if spec.is_sampled() {
        return Ok(sampled_moebius_sup(spec, x, y));
    }
    // send y to ∞; the images of the pieces are bounded
    let (x, y) = if y.is_infinite() { (y, x) } else { (x, y) };
    let f = match y {
        ExtendedPoint::Finite(p) => MobiusMap::pole_at(p),
        ExtendedPoint::Infinity => MobiusMap::identity(),
    };
    let big_x = f.apply(x).expect_finite()?;
    let images: Vec<BoundaryPiece> = spec.pieces().iter().map(|p| p.image(&f)).collect();
    let far = |a: Complex64| farthest(&images, a);
    let (mut best, mut upper) = (0.0f64, 0.0f64);
    for piece in &images {
        match *piece {
            BoundaryPiece::Point(ExtendedPoint::Finite(a)) => {
                let v = far(a) / (a - big_x).norm();
                best = best.max(v);
                upper = upper.max(v);
            }
            BoundaryPiece::Circle { center, radius } => {
                let (b, u) = sup_ratio_on_circle(center, radius, big_x, &far);
                best = best.max(b);
                upper = upper.max(u);
            }
            _ => return Err(DomainError::Unsupported("unbounded boundary image").into()),
        }
    }
    Ok(MetricValue::new(best, upper - best))
}

fn sampled_moebius_sup(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> MetricValue {
    let pts = sampled_points(spec).expect("sampled");
    let mut best = 0.0f64;
    for &a in &pts {
        for &b in &pts {
            let v = cross_ratio(a.into(), x, b.into(), y).unwrap_or(0.0);
            best = best.max(v);
        }
    }
    let gap = spec.mesh_gap();
    let (zx, zy) = match (x.finite(), y.finite()) {
        (Some(zx), Some(zy)) => (zx, zy),
        _ => return MetricValue::new(best, f64::INFINITY),
    };
    let near = |z: Complex64| pts.iter().map(|&p| (p - z).norm()).fold(f64::INFINITY, f64::min);
    let (dx, dy) = (near(zx) - gap, near(zy) - gap);
    if dx <= 0.0 || dy <= 0.0 {
        return MetricValue::new(best, f64::INFINITY);
    }
    // moving a and b by at most `gap` each
    let lip = 2.0 * (zx - zy).norm() / (dx * dy) + best / dx + best / dy;
    MetricValue::new(best, gap * lip)
}

/// Seittenranta's metric `δ_G = log(1 + m_G)`.
pub fn delta_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    Ok(moebius_sup(spec, x, y)?.log1p())
}

/// Logarithmic Möbius metric `Δ_G = log(1 + δ_G)`.
pub fn log_mobius_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    Ok(delta_metric(spec, x, y)?.log1p())
}

/// Diameter of a finite planar point set (convex hull plus rotating calipers).
pub fn point_set_diameter(pts: &[Complex64]) -> f64 {
    if pts.len() <= 64 {
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        return best;
    }
    let hull = convex_hull(pts);
    let n = hull.len();
    if n < 3 {
        return if n == 2 { (hull[0] - hull[1]).norm() } else { 0.0 };
    }
    let area = |a: Complex64, b: Complex64, c: Complex64| ((b - a).conj() * (c - a)).im.abs();
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        while area(a, b, hull[(j + 1) % n]) > area(a, b, hull[j]) {
            j = (j + 1) % n;
        }
        best = best.max((a - hull[j]).norm()).max((b - hull[j]).norm());
    }
    best
}

/// Andrew's monotone chain, counter-clockwise without collinear points.
fn convex_hull(pts: &[Complex64]) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = pts.to_vec();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: Complex64, a: Complex64, b: Complex64| ((a - o).conj() * (b - o)).im;
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * p.len());
    for &q in p.iter().chain(p.iter().rev().skip(1)) {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
            hull.pop();
        }
        hull.push(q);
    }
    hull.pop();
    hull
}

/// Diameter of a union of points and circles.
fn pieces_diameter(pieces: &[BoundaryPiece]) -> f64 {
    let reach = |p: &BoundaryPiece| -> (Complex64, f64) {
        match *p {
            BoundaryPiece::Point(q) => (q.finite().expect("bounded image"), 0.0),
            BoundaryPiece::Circle { center, radius } => (center, radius),
            BoundaryPiece::Line { .. } => unreachable!("bounded image"),
        }
    };
    let mut best = 0.0f64;
    for (i, p) in pieces.iter().enumerate() {
        let (c1, r1) = reach(p);
        best = best.max(2.0 * r1);
        for q in &pieces[i + 1..] {
            let (c2, r2) = reach(q);
            best = best.max((c1 - c2).norm() + r1 + r2);
        }
    }
    best
}

/// Ferrand density value at a finite point assumed to lie in `G`.
pub(crate) fn ferrand_density_at(spec: &DomainSpec, z: Complex64) -> MetricValue {
    if let Some(pts) = sampled_points(spec) {
        let inverted: Vec<Complex64> = pts.iter().map(|&p| 1.0 / (p - z)).collect();
        let w = point_set_diameter(&inverted);
        let gap = spec.mesh_gap();
        let d = pts.iter().map(|&p| (p - z).norm()).fold(f64::INFINITY, f64::min);
        let err = if d > gap { 2.0 * gap / (d * (d - gap)) } else { f64::INFINITY };
        return MetricValue::new(w, err);
    }
    let f = MobiusMap::pole_at(z);
    let images: Vec<BoundaryPiece> = spec.pieces().iter().map(|p| p.image(&f)).collect();
    MetricValue::exact(pieces_diameter(&images))
}

/// Ferrand density `w_G(x) = sup_{a,b∈∂G} |a−b|/(|x−a||x−b|)`.
pub fn ferrand_density(spec: &DomainSpec, x: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let z = finite_member(spec, x)?;
    Ok(ferrand_density_at(spec, z))
}

/// Hyperbolic distance of the unit disk with density `2|dz|/(1−|z|²)`.
pub fn hyperbolic_disk(x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let spec = DomainSpec::unit_disk();
    let (zx, zy) = (finite_member(&spec, x)?, finite_member(&spec, y)?);
    Ok(MetricValue::exact(disk_hyperbolic(zx, zy)))
}

fn halfplane_distance(zx: Complex64, zy: Complex64) -> f64 {
    2.0 * ((zx - zy).norm() / (2.0 * (zx.im * zy.im).sqrt())).asinh()
}

/// Hyperbolic distance of the upper half-plane with density `|dz|/Im z`.
pub fn hyperbolic_halfplane(x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let spec = DomainSpec::half_plane();
    let (zx, zy) = (finite_member(&spec, x)?, finite_member(&spec, y)?);
    Ok(MetricValue::exact(halfplane_distance(zx, zy)))
}

/// Hyperbolic distance of the punctured unit disk, computed in the universal
/// cover `ζ = arg z + i·log(1/|z|)` as the least distance between lifts.
pub fn hyperbolic_punctured_disk(z: ExtendedPoint, w: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let spec = DomainSpec::punctured_disk();
    let (a, b) = (finite_member(&spec, z)?, finite_member(&spec, w)?);
    let lift = |u: Complex64| Complex64::new(u.arg(), -u.norm().ln());
    let (za, zb) = (lift(a), lift(b));
    let spread = 2.0 * (za.im * zb.im).sqrt();
    let n0 = ((za.re - zb.re) / (2.0 * PI)).round() as i64;
    let mut best = f64::INFINITY;
    for step in 0.. {
        let mut improved_possible = false;
        for n in [n0 + step, n0 - step] {
            let shifted = zb + Complex64::new(2.0 * PI * n as f64, 0.0);
            // the horizontal offset alone bounds this translate from below
            let floor = 2.0 * ((za.re - shifted.re).abs() / spread).asinh();
            if floor < best {
                improved_possible = true;
                best = best.min(halfplane_distance(za, shifted));
            }
        }
        if !improved_possible {
            break;
        }
    }
    Ok(MetricValue::exact(best))
}

/// Hyperbolic metric of `spec` when it is a Möbius image of the disk, the
/// half-plane or the punctured disk.
pub fn hyperbolic_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint) -> Result<MetricValue, MetricError> {
    member(spec, x)?;
    member(spec, y)?;
    let (u, v) = match spec.map() {
        Some(f) => {
            let g = f.inverse();
            (g.apply(x), g.apply(y))
        }
        None => (x, y),
    };
    match spec.kind() {
        DomainKind::UnitDisk => hyperbolic_disk(u, v),
        DomainKind::HalfPlane => hyperbolic_halfplane(u, v),
        DomainKind::PuncturedDisk => hyperbolic_punctured_disk(u, v),
        _ => Err(DomainError::Unsupported("no closed-form hyperbolic metric").into()),
    }
}

/// The metric `D(z₁,z₂) = 2 sin(θ/2)/max(τ₁,τ₂) + |log τ₂ − log τ₁|` on
/// `E* = {0 < |z| ≤ e⁻¹}`, where `τ = log(1/|z|)` and `θ = |arg(z₂/z₁)|`.
pub fn d_metric(z1: ExtendedPoint, z2: ExtendedPoint) -> Result<MetricValue, MetricError> {
    let limit = (-1f64).exp();
    let check = |p: ExtendedPoint| -> Result<Complex64, MetricError> {
        match p.finite() {
            Some(z) if z.norm() > 0.0 && z.norm() <= limit * (1.0 + 1e-15) => Ok(z),
            _ => Err(DomainError::OutsideDomain(p.to_string()).into()),
        }
    };
    let (a, b) = (check(z1)?, check(z2)?);
    let (t1, t2) = (-a.norm().ln(), -b.norm().ln());
    let theta = (b / a).arg().abs();
    Ok(MetricValue::exact(2.0 * (0.5 * theta).sin() / t1.max(t2) + (t2.ln() - t1.ln()).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{mu_disk, UniversalConstants};
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn p(re: f64, im: f64) -> ExtendedPoint {
        ExtendedPoint::xy(re, im)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn j_examples() {
        let disk = DomainSpec::unit_disk();
        assert!(close(j_metric(&disk, p(0.0, 0.0), p(0.5, 0.0)).unwrap().value, LN_2, 1e-15));
        assert_eq!(j_metric(&disk, p(0.3, 0.1), p(0.3, 0.1)).unwrap().value, 0.0);
        let plane = DomainSpec::punctured_plane();
        let r = 10.0;
        let v = j_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)).unwrap().value;
        assert!(close(v, 2.0 * r.ln(), 1e-14));
        assert!(j_metric(&disk, ExtendedPoint::Infinity, p(0.0, 0.0)).is_err());
    }

    #[test]
    fn j_hat_examples() {
        let plane = DomainSpec::punctured_plane();
        let r: f64 = 10.0;
        let v = j_hat_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)).unwrap().value;
        let expected = (1.0 + (r - 1.0 / r) / (1.0 + r.powi(-2)).sqrt()).ln();
        assert!(close(v, expected, 1e-13));
        assert_eq!(j_hat_metric(&plane, p(2.0, 1.0), p(2.0, 1.0)).unwrap().value, 0.0);
        let r: f64 = 1e3;
        let j = j_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)).unwrap().value;
        let jh = j_hat_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)).unwrap().value;
        assert!(j / jh >= 1.8 && j / jh <= 2.0);
    }

    #[test]
    fn chordal_boundary_distance_matches_sampling() {
        let disk = DomainSpec::unit_disk().mapped(&MobiusMap::affine(Complex64::new(3.0, 0.0), Complex64::new(1.0, -2.0)).unwrap());
        let hp = DomainSpec::half_plane();
        for (spec, x) in [(&disk, p(1.5, -1.0)), (&hp, p(0.3, 2.0)), (&hp, p(-5.0, 0.1))] {
            let exact = chordal_boundary_distance(spec, x).unwrap().value;
            let view = spec.boundary_view(100_000);
            let brute = view.points.iter().map(|&b| chordal_distance(x, b)).fold(f64::INFINITY, f64::min);
            assert!(exact <= brute + 1e-12 && brute - exact < 1e-6, "{exact} {brute}");
        }
    }

    #[test]
    fn moebius_sup_examples() {
        let t = DomainSpec::thrice_punctured_sphere();
        let e = (-1f64).exp();
        // on the real axis the pair (a, b) = (1, 0) dominates (0, ∞)
        assert!(close(moebius_sup(&t, p(e, 0.0), p(-e, 0.0)).unwrap().value, 2.0 / (1.0 - e), 1e-14));
        // on the imaginary axis (0, ∞) dominates and |0, x, ∞, −x| = 2
        assert!(close(moebius_sup(&t, p(0.0, e), p(0.0, -e)).unwrap().value, 2.0, 1e-14));
        assert!(close(delta_metric(&t, p(0.0, e), p(0.0, -e)).unwrap().value, 3f64.ln(), 1e-14));
        let big_delta = log_mobius_metric(&t, p(0.0, e), p(0.0, -e)).unwrap().value;
        assert!(close(big_delta, (1.0 + 3f64.ln()).ln(), 1e-14));

        let disk = DomainSpec::unit_disk();
        let m = moebius_sup(&disk, p(0.0, 0.0), p(0.5, 0.0)).unwrap();
        assert!(close(m.value, 2.0, 1e-12), "{m:?}");
        assert!(m.error_bound < 1e-5);
        assert!(close(delta_metric(&disk, p(0.0, 0.0), p(0.5, 0.0)).unwrap().value, 3f64.ln(), 1e-9));

        let pd = DomainSpec::punctured_disk();
        for t in [0.01, 0.3, 0.9] {
            assert!(moebius_sup(&pd, p(t, 0.0), p(-t, 0.0)).unwrap().value >= 2.0 - 1e-12);
        }
        assert_eq!(delta_metric(&disk, p(0.2, 0.2), p(0.2, 0.2)).unwrap().value, 0.0);
    }

    #[test]
    fn delta_equals_hyperbolic_on_disk() {
        let disk = DomainSpec::unit_disk();
        for (x, y) in [(p(0.0, 0.0), p(0.5, 0.0)), (p(0.3, -0.4), p(-0.7, 0.2)), (p(0.95, 0.0), p(0.0, 0.9))] {
            let d = delta_metric(&disk, x, y).unwrap();
            let h = hyperbolic_disk(x, y).unwrap().value;
            assert!((d.value - h).abs() <= 1e-8 * h + d.error_bound, "{d:?} vs {h}");
        }
    }

    #[test]
    fn ferrand_density_examples() {
        assert!(close(ferrand_density(&DomainSpec::unit_disk(), p(0.0, 0.0)).unwrap().value, 2.0, 1e-14));
        let t = DomainSpec::thrice_punctured_sphere();
        assert!(close(ferrand_density(&t, p(0.5, 0.0)).unwrap().value, 4.0, 1e-14));
        // the disk density equals 2/(1−|z|²)
        let z = p(0.6, 0.3);
        let w = ferrand_density(&DomainSpec::unit_disk(), z).unwrap().value;
        assert!(close(w, 2.0 / (1.0 - 0.45), 1e-12));
    }

    #[test]
    fn ferrand_density_near_puncture() {
        // 0 ∈ ∂G and the rest of ∂G outside the unit circle
        let g = DomainSpec::thrice_punctured_sphere().mapped(&MobiusMap::affine(Complex64::new(1.5, 0.0), Complex64::new(0.0, 0.0)).unwrap());
        let pd = DomainSpec::punctured_disk();
        for k in 0..200 {
            let r = 0.25 * (k as f64 + 1.0) / 200.0;
            let z = Complex64::from_polar(r, k as f64 * 0.7);
            for spec in [&g, &pd] {
                let w = ferrand_density(spec, z.into()).unwrap().value;
                assert!(w <= 1.0 / r + 4.0 / 3.0 + 1e-12, "r = {r}, w = {w}");
            }
        }
    }

    #[test]
    fn diameter_matches_brute_force() {
        let pts: Vec<Complex64> = (0..500)
            .map(|k| {
                let t = k as f64 * 0.37;
                Complex64::new(t.sin() * (1.0 + 0.3 * (3.0 * t).cos()), 0.5 * (1.7 * t).cos())
            })
            .collect();
        let mut brute = 0.0f64;
        for a in &pts {
            for b in &pts {
                brute = brute.max((a - b).norm());
            }
        }
        assert!((point_set_diameter(&pts) - brute).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_examples() {
        let x = (E - 1.0) / (E + 1.0);
        assert!(close(hyperbolic_disk(p(0.0, 0.0), p(x, 0.0)).unwrap().value, 1.0, 1e-15));
        assert_eq!(hyperbolic_disk(p(0.1, 0.2), p(0.1, 0.2)).unwrap().value, 0.0);
        assert!(close(hyperbolic_halfplane(p(0.0, 1.0), p(0.0, 2.0)).unwrap().value, LN_2, 1e-15));
        let e1 = (-1f64).exp();
        let e2 = (-2f64).exp();
        assert!(close(hyperbolic_punctured_disk(p(e1, 0.0), p(e2, 0.0)).unwrap().value, LN_2, 1e-14));
        assert_eq!(hyperbolic_punctured_disk(p(0.1, 0.1), p(0.1, 0.1)).unwrap().value, 0.0);
        for x in [0.5, 0.1, 1e-3, 1e-8] {
            let t = -(x as f64).ln();
            let h = hyperbolic_punctured_disk(p(x, 0.0), p(-x, 0.0)).unwrap().value;
            assert!(close(h, (1.0 + PI * PI / (2.0 * t * t)).acosh(), 1e-12));
            assert!(h <= PI / t);
        }
    }

    #[test]
    fn punctured_disk_radial_matches_line_integral() {
        // ∫ ρ(r) dr with ρ(r) = 1/(r log(1/r)), trapezoid on a log grid
        let (a, b) = ((-2f64).exp(), (-1f64).exp());
        let n = 20_000;
        let mut sum = 0.0;
        for k in 0..n {
            let (u0, u1) = (a.ln() + (b.ln() - a.ln()) * k as f64 / n as f64, a.ln() + (b.ln() - a.ln()) * (k + 1) as f64 / n as f64);
            let f = |u: f64| 1.0 / (-u);
            sum += 0.5 * (f(u0) + f(u1)) * (u1 - u0);
        }
        let h = hyperbolic_punctured_disk(p(b, 0.0), p(a, 0.0)).unwrap().value;
        assert!((sum - h).abs() < 1e-8);
    }

    #[test]
    fn punctured_disk_uses_nearest_deck_translate() {
        let a = Complex64::from_polar(0.3, 3.1);
        let b = Complex64::from_polar(0.2, -3.1);
        let h = hyperbolic_punctured_disk(a.into(), b.into()).unwrap().value;
        let turn = 2.0 * PI - 6.2;
        let direct = hyperbolic_punctured_disk(Complex64::from_polar(0.3, 0.0).into(), Complex64::from_polar(0.2, turn).into()).unwrap().value;
        assert!((h - direct).abs() < 1e-12);
    }

    #[test]
    fn d_metric_examples() {
        let e1 = (-1f64).exp();
        assert!(close(d_metric(p(e1, 0.0), p(-e1, 0.0)).unwrap().value, 2.0, 1e-15));
        assert_eq!(d_metric(p(0.1, 0.1), p(0.1, 0.1)).unwrap().value, 0.0);
        assert!(close(d_metric(p(e1, 0.0), p((-2f64).exp(), 0.0)).unwrap().value, LN_2, 1e-15));
        assert!(d_metric(p(0.5, 0.0), p(0.1, 0.0)).is_err());
    }

    #[test]
    fn lemma_7_2_equality_case() {
        let e1 = (-1f64).exp();
        let m0 = UniversalConstants::default().m0;
        let omega = DomainSpec::thrice_punctured_sphere();
        let d = d_metric(p(0.0, e1), p(0.0, -e1)).unwrap().value;
        let big = log_mobius_metric(&omega, p(0.0, e1), p(0.0, -e1)).unwrap().value;
        assert!((d - m0 * big).abs() < 1e-12);
        // at (e⁻¹, −e⁻¹) the puncture at 1 enlarges Δ and the bound is strict
        let d = d_metric(p(e1, 0.0), p(-e1, 0.0)).unwrap().value;
        let big = log_mobius_metric(&omega, p(e1, 0.0), p(-e1, 0.0)).unwrap().value;
        assert!(d < m0 * big - 0.3);
    }

    #[test]
    fn delta_is_moebius_invariant() {
        let f = MobiusMap::new(
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.3, -0.2),
            Complex64::new(2.0, 1.0),
        )
        .unwrap();
        let specs = [DomainSpec::unit_disk(), DomainSpec::annulus(1.0, 2.0).unwrap(), DomainSpec::thrice_punctured_sphere()];
        let pairs = [(p(0.1, 0.2), p(-0.4, 0.5)), (p(1.3, 0.2), p(-1.1, -1.0)), (p(0.5, 0.5), p(-2.0, 1.0))];
        for (spec, (x, y)) in specs.iter().zip(pairs) {
            let a = delta_metric(spec, x, y).unwrap();
            let b = delta_metric(&spec.mapped(&f), f.apply(x), f.apply(y)).unwrap();
            assert!((a.value - b.value).abs() <= a.error_bound + b.error_bound + 1e-9, "{a:?} {b:?}");
        }
    }

    #[test]
    fn mu_disk_dominates_hyperbolic() {
        // μ_G ≥ (4/π)·h_G on the simply connected disk
        for k in 1..50 {
            let t = k as f64 / 50.0;
            let mu = mu_disk(p(0.0, 0.0), p(t, 0.0)).unwrap();
            let h = hyperbolic_disk(p(0.0, 0.0), p(t, 0.0)).unwrap().value;
            assert!(mu >= 4.0 / PI * h * (1.0 - 1e-12));
        }
    }

    #[test]
    fn sampled_delta_has_error_bound() {
        let n = 400;
        let pts: Vec<_> = (0..n).map(|k| ExtendedPoint::Finite(Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))).collect();
        let gap = 2.0 * (PI / (2.0 * n as f64)).sin();
        let s = DomainSpec::sampled(pts, gap, p(0.0, 0.0)).unwrap();
        let (x, y) = (p(0.1, 0.2), p(-0.3, 0.1));
        let a = delta_metric(&s, x, y).unwrap();
        let b = hyperbolic_disk(x, y).unwrap().value;
        assert!((a.value - b).abs() <= a.error_bound, "{a:?} {b}");
        let w = ferrand_density(&s, x).unwrap();
        let exact = ferrand_density(&DomainSpec::unit_disk(), x).unwrap().value;
        assert!((w.value - exact).abs() <= w.error_bound);
    }

    fn disk_point() -> impl Strategy<Value = ExtendedPoint> {
        (0.0..0.97f64, 0.0..(2.0 * PI)).prop_map(|(r, t)| ExtendedPoint::Finite(Complex64::from_polar(r, t)))
    }

    fn estar_point() -> impl Strategy<Value = ExtendedPoint> {
        (-12.0..-1.0f64, -PI..PI).prop_map(|(lr, t)| ExtendedPoint::Finite(Complex64::from_polar(lr.exp(), t)))
    }

    fn sphere_point_strategy() -> impl Strategy<Value = ExtendedPoint> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| ExtendedPoint::xy(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn disk_comparison_chain(x in disk_point(), y in disk_point()) {
            let disk = DomainSpec::unit_disk();
            let j = j_metric(&disk, x, y).unwrap().value;
            let jh = j_hat_metric(&disk, x, y).unwrap().value;
            let d = delta_metric(&disk, x, y).unwrap();
            prop_assert!(j <= d.value + d.error_bound + 1e-12);
            prop_assert!(d.value <= 2.0 * j + 1e-12);
            prop_assert!(j <= 2.0 * jh + 1e-12);
            let w = ferrand_density(&disk, x).unwrap().value;
            let dist = disk.boundary_distance(x).unwrap();
            prop_assert!(1.0 / dist <= w * (1.0 + 1e-12) && w <= 2.0 / dist * (1.0 + 1e-12));
        }

        #[test]
        fn triangle_inequalities(x in sphere_point_strategy(), y in sphere_point_strategy(), z in sphere_point_strategy()) {
            let t = DomainSpec::thrice_punctured_sphere();
            prop_assume!(t.contains(x) && t.contains(y) && t.contains(z));
            for f in [j_metric, j_hat_metric, delta_metric, log_mobius_metric] {
                let xy = f(&t, x, y).unwrap().value;
                let yz = f(&t, y, z).unwrap().value;
                let xz = f(&t, x, z).unwrap().value;
                prop_assert!(xz <= xy + yz + 1e-12 * (1.0 + xz));
                prop_assert!((xy - f(&t, y, x).unwrap().value).abs() <= 1e-12 * (1.0 + xy));
            }
        }

        #[test]
        fn d_metric_axioms(a in estar_point(), b in estar_point(), c in estar_point()) {
            let ab = d_metric(a, b).unwrap().value;
            let bc = d_metric(b, c).unwrap().value;
            let ac = d_metric(a, c).unwrap().value;
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - d_metric(b, a).unwrap().value).abs() < 1e-12);
        }

        #[test]
        fn lemma_7_2_bounds(a in estar_point(), b in estar_point()) {
            let m0 = UniversalConstants::default().m0;
            let d = d_metric(a, b).unwrap().value;
            // the comparison with D holds for the curvature −4 normalization h/2
            let h = 0.5 * hyperbolic_punctured_disk(a, b).unwrap().value;
            let big = log_mobius_metric(&DomainSpec::thrice_punctured_sphere(), a, b).unwrap().value;
            prop_assert!(h <= PI / 4.0 * d * (1.0 + 1e-12) + 1e-15);
            prop_assert!(d <= m0 * big * (1.0 + 1e-12) + 1e-15);
        }
    }
}
