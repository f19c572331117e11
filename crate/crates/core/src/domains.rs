//! Planar domains with exact or sampled boundary oracles.
//!
//! Every named domain describes its boundary as a short list of
//! [`BoundaryPiece`]s (points, circles, lines). Möbius images of named domains
//! stay exact because circles and lines map to circles and lines. Only
//! [`DomainKind::SampledBoundary`] is approximate; its `mesh_gap` is threaded
//! into the error bounds of everything computed from it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::DomainError;
use crate::geometry::{ExtendedPoint, MobiusMap};

/// One connected piece of a domain boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryPiece {
    Point(ExtendedPoint),
    Circle { center: Complex64, radius: f64 },
    /// A straight line together with `∞`; `direction` has unit length.
    Line { through: Complex64, direction: Complex64 },
}

impl BoundaryPiece {
    pub fn line(through: Complex64, direction: Complex64) -> Self {
        BoundaryPiece::Line { through, direction: direction / direction.norm() }
    }

    pub fn contains_infinity(&self) -> bool {
        match self {
            BoundaryPiece::Point(p) => p.is_infinite(),
            BoundaryPiece::Line { .. } => true,
            BoundaryPiece::Circle { .. } => false,
        }
    }

    /// Euclidean distance from a finite point to the finite part of the piece.
    pub fn distance(&self, z: Complex64) -> f64 {
        match *self {
            BoundaryPiece::Point(ExtendedPoint::Infinity) => f64::INFINITY,
            BoundaryPiece::Point(ExtendedPoint::Finite(p)) => (z - p).norm(),
            BoundaryPiece::Circle { center, radius } => ((z - center).norm() - radius).abs(),
            BoundaryPiece::Line { through, direction } => ((z - through) * direction.conj()).im.abs(),
        }
    }

    /// Smallest and largest Euclidean distance from `z` to the finite part of the piece.
    pub fn distance_range(&self, z: Complex64) -> (f64, f64) {
        match *self {
            BoundaryPiece::Point(ExtendedPoint::Infinity) => (f64::INFINITY, f64::INFINITY),
            BoundaryPiece::Point(ExtendedPoint::Finite(p)) => {
                let d = (z - p).norm();
                (d, d)
            }
            BoundaryPiece::Circle { center, radius } => {
                let d = (z - center).norm();
                ((d - radius).abs(), d + radius)
            }
            BoundaryPiece::Line { .. } => (self.distance(z), f64::INFINITY),
        }
    }

    /// Three distinct points determining the piece (circles and lines only).
    fn three_points(&self) -> Option<[ExtendedPoint; 3]> {
        match *self {
            BoundaryPiece::Point(_) => None,
            BoundaryPiece::Circle { center, radius } => {
                let at = |t: f64| ExtendedPoint::Finite(center + Complex64::from_polar(radius, t));
                Some([at(0.0), at(2.0 * PI / 3.0), at(4.0 * PI / 3.0)])
            }
            BoundaryPiece::Line { through, direction } => Some([
                ExtendedPoint::Finite(through - direction),
                ExtendedPoint::Finite(through + direction),
                ExtendedPoint::Infinity,
            ]),
        }
    }

    /// Image of the piece under a Möbius map.
    pub fn image(&self, f: &MobiusMap) -> BoundaryPiece {
        match self.three_points() {
            None => match self {
                BoundaryPiece::Point(p) => BoundaryPiece::Point(f.apply(*p)),
                _ => unreachable!(),
            },
            Some(pts) => circle_through(pts.map(|p| f.apply(p))),
        }
    }

    /// `m` samples (plus `∞` for lines) and the Euclidean Hausdorff gap they leave.
    pub fn sample(&self, m: usize) -> (Vec<ExtendedPoint>, f64) {
        match *self {
            BoundaryPiece::Point(p) => (vec![p], 0.0),
            BoundaryPiece::Circle { center, radius } => {
                let pts = (0..m)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / m as f64;
                        ExtendedPoint::Finite(center + Complex64::from_polar(radius, t))
                    })
                    .collect();
                (pts, 2.0 * radius * (PI / (2.0 * m as f64)).sin())
            }
            BoundaryPiece::Line { through, direction } => {
                let mut pts: Vec<_> = (0..m)
                    .map(|k| {
                        let t = -0.5 * PI + PI * (k as f64 + 0.5) / m as f64;
                        ExtendedPoint::Finite(through + direction * t.tan())
                    })
                    .collect();
                pts.push(ExtendedPoint::Infinity);
                (pts, f64::INFINITY)
            }
        }
    }
}

/// The circle (or line, when one point is `∞` or the points are collinear)
/// through three distinct points.
pub fn circle_through(p: [ExtendedPoint; 3]) -> BoundaryPiece {
    let finite: Vec<Complex64> = p.iter().filter_map(|q| q.finite()).collect();
    if finite.len() < 3 {
        let (a, b) = (finite[0], finite[1]);
        return BoundaryPiece::line(a, b - a);
    }
    let (a, b, c) = (finite[0], finite[1], finite[2]);
    let (u, v) = (b - a, c - a);
    let cross = u.re * v.im - u.im * v.re;
    let scale = u.norm() * v.norm();
    if cross.abs() <= 1e-14 * scale {
        let dir = if u.norm() >= v.norm() { u } else { v };
        return BoundaryPiece::line(a, dir);
    }
    let (uu, vv) = (u.norm_sqr(), v.norm_sqr());
    let off = Complex64::new(v.im * uu - u.im * vv, u.re * vv - v.re * uu) / (2.0 * cross);
    BoundaryPiece::Circle { center: a + off, radius: off.norm() }
}

/// The base (unmapped) domain shapes.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    UnitDisk,
    /// The upper half-plane `Im z > 0`.
    HalfPlane,
    /// The unit disk without its center.
    PuncturedDisk,
    Annulus { inner: f64, outer: f64 },
    /// The extended plane minus finitely many points.
    ComplementOfFiniteSet { points: Vec<ExtendedPoint> },
    /// A domain bounded by a closed polygonal loop of samples. The interior
    /// witness selects the side of the loop.
    SampledBoundary {
        samples: Vec<ExtendedPoint>,
        mesh_gap: f64,
        interior_witness: ExtendedPoint,
    },
}

/// A domain `f(G₀)` where `G₀` is a [`DomainKind`] and `f` an optional Möbius map.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    kind: DomainKind,
    map: Option<MobiusMap>,
    inverse: MobiusMap,
    pieces: Vec<BoundaryPiece>,
    witness_outside_loop: bool,
}

impl PartialEq for DomainSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.map == other.map
    }
}

/// Enumerated boundary used for suprema over `∂G`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryView {
    pub points: Vec<ExtendedPoint>,
    /// `true` when the boundary is a finite point set listed in full.
    pub exact: bool,
    pub mesh_gap: f64,
}

impl DomainSpec {
    pub fn new(kind: DomainKind) -> Result<Self, DomainError> {
        Self::with_map(kind, None)
    }

    pub fn unit_disk() -> Self {
        Self::new(DomainKind::UnitDisk).expect("valid")
    }

    pub fn half_plane() -> Self {
        Self::new(DomainKind::HalfPlane).expect("valid")
    }

    pub fn punctured_disk() -> Self {
        Self::new(DomainKind::PuncturedDisk).expect("valid")
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self, DomainError> {
        Self::new(DomainKind::Annulus { inner, outer })
    }

    pub fn complement_of(points: Vec<ExtendedPoint>) -> Result<Self, DomainError> {
        Self::new(DomainKind::ComplementOfFiniteSet { points })
    }

    /// `ℂ̂ ∖ {0, 1, ∞}`.
    pub fn thrice_punctured_sphere() -> Self {
        Self::complement_of(vec![
            ExtendedPoint::xy(0.0, 0.0),
            ExtendedPoint::xy(1.0, 0.0),
            ExtendedPoint::Infinity,
        ])
        .expect("valid")
    }

    /// `ℂ ∖ {0}` as the complement of `{0, ∞}`.
    pub fn punctured_plane() -> Self {
        Self::complement_of(vec![ExtendedPoint::xy(0.0, 0.0), ExtendedPoint::Infinity]).expect("valid")
    }

    pub fn sampled(
        samples: Vec<ExtendedPoint>,
        mesh_gap: f64,
        interior_witness: ExtendedPoint,
    ) -> Result<Self, DomainError> {
        Self::new(DomainKind::SampledBoundary { samples, mesh_gap, interior_witness })
    }

    pub fn with_map(kind: DomainKind, map: Option<MobiusMap>) -> Result<Self, DomainError> {
        validate(&kind)?;
        let base = base_pieces(&kind);
        let (pieces, inverse) = match &map {
            Some(f) => (base.iter().map(|p| p.image(f)).collect(), f.inverse()),
            None => (base, MobiusMap::identity()),
        };
        let witness_outside_loop = match &kind {
            DomainKind::SampledBoundary { samples, interior_witness, .. } => {
                let w = interior_witness.expect_finite()?;
                !point_in_loop(samples, w)
            }
            _ => false,
        };
        Ok(DomainSpec { kind, map, inverse, pieces, witness_outside_loop })
    }

    /// The image of this domain under `f`.
    pub fn mapped(&self, f: &MobiusMap) -> DomainSpec {
        let total = match &self.map {
            Some(g) => f.compose(g),
            None => *f,
        };
        Self::with_map(self.kind.clone(), Some(total)).expect("kind already validated")
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn map(&self) -> Option<&MobiusMap> {
        self.map.as_ref()
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    /// Short human-readable name.
    pub fn label(&self) -> String {
        let base = match &self.kind {
            DomainKind::UnitDisk => "disk".to_string(),
            DomainKind::HalfPlane => "half-plane".to_string(),
            DomainKind::PuncturedDisk => "punctured-disk".to_string(),
            DomainKind::Annulus { inner, outer } => format!("annulus({inner},{outer})"),
            DomainKind::ComplementOfFiniteSet { points } => {
                let names: Vec<String> = points.iter().map(|p| p.to_string().replace(',', ";")).collect();
                format!("complement{{{}}}", names.join(" "))
            }
            DomainKind::SampledBoundary { samples, .. } => format!("sampled({})", samples.len()),
        };
        if self.map.is_some() {
            format!("mobius-image-of-{base}")
        } else {
            base
        }
    }

    /// Hausdorff resolution of the boundary oracle (zero for exact domains).
    pub fn mesh_gap(&self) -> f64 {
        match &self.kind {
            DomainKind::SampledBoundary { mesh_gap, .. } => *mesh_gap,
            _ => 0.0,
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, DomainKind::SampledBoundary { .. })
    }

    pub fn infinity_on_boundary(&self) -> bool {
        self.pieces.iter().any(BoundaryPiece::contains_infinity)
    }

    /// Number of boundary points, `None` when infinite.
    pub fn boundary_cardinality(&self) -> Option<usize> {
        if self.pieces.iter().all(|p| matches!(p, BoundaryPiece::Point(_))) && !self.is_sampled() {
            Some(self.pieces.len())
        } else {
            None
        }
    }

    pub fn contains(&self, x: ExtendedPoint) -> bool {
        let u = match self.map {
            Some(_) => self.inverse.apply(x),
            None => x,
        };
        match (&self.kind, u) {
            (DomainKind::ComplementOfFiniteSet { points }, u) => !points.iter().any(|p| p.approx_eq(&u)),
            (_, ExtendedPoint::Infinity) => false,
            (DomainKind::UnitDisk, ExtendedPoint::Finite(z)) => z.norm() < 1.0,
            (DomainKind::HalfPlane, ExtendedPoint::Finite(z)) => z.im > 0.0,
            (DomainKind::PuncturedDisk, ExtendedPoint::Finite(z)) => z.norm() < 1.0 && z.norm() > 0.0,
            (DomainKind::Annulus { inner, outer }, ExtendedPoint::Finite(z)) => {
                z.norm() > *inner && z.norm() < *outer
            }
            (DomainKind::SampledBoundary { samples, .. }, ExtendedPoint::Finite(z)) => {
                if samples.iter().any(|s| s.finite() == Some(z)) {
                    return false;
                }
                point_in_loop(samples, z) != self.witness_outside_loop
            }
        }
    }

    /// Euclidean distance to the boundary. For sampled boundaries the error is
    /// at most [`DomainSpec::mesh_gap`].
    pub fn boundary_distance(&self, x: ExtendedPoint) -> Result<f64, DomainError> {
        let z = x.finite().ok_or(DomainError::InfinityChart)?;
        if !self.contains(x) {
            return Err(DomainError::OutsideDomain(x.to_string()));
        }
        Ok(self.boundary_distance_unchecked(z)?)
    }

    /// Distance to the boundary without the membership test.
    pub fn boundary_distance_unchecked(&self, z: Complex64) -> Result<f64, DomainError> {
        let d = self.pieces.iter().map(|p| p.distance(z)).fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(DomainError::Unsupported("boundary has no finite point"))
        }
    }

    /// Enumeration of the boundary with `m` samples per continuum component.
    pub fn boundary_view(&self, m: usize) -> BoundaryView {
        let m = m.max(2);
        let mut points = Vec::new();
        let mut gap: f64 = 0.0;
        for piece in &self.pieces {
            let (pts, g) = piece.sample(m);
            points.extend(pts);
            gap = gap.max(g);
        }
        // two lines (or a line and a point at ∞) share the point at infinity
        let mut seen_infinity = false;
        points.retain(|p| {
            if p.is_infinite() {
                let keep = !seen_infinity;
                seen_infinity = true;
                keep
            } else {
                true
            }
        });
        let exact = self.boundary_cardinality().is_some();
        BoundaryView { points, exact, mesh_gap: if exact { 0.0 } else { gap.max(self.mesh_gap()) } }
    }

    /// A Möbius-equivalent domain with `∞` on its boundary, and the map used.
    pub fn normalize_infinity_to_boundary(&self) -> (DomainSpec, MobiusMap) {
        if self.infinity_on_boundary() {
            return (self.clone(), MobiusMap::identity());
        }
        let f = match self.pieces[0] {
            BoundaryPiece::Circle { .. } => {
                let pts = self.pieces[0].three_points().expect("circle");
                MobiusMap::from_triple(
                    pts,
                    [ExtendedPoint::xy(0.0, 0.0), ExtendedPoint::xy(1.0, 0.0), ExtendedPoint::Infinity],
                )
                .expect("distinct points on a circle")
            }
            BoundaryPiece::Point(ExtendedPoint::Finite(p)) => MobiusMap::pole_at(p),
            _ => unreachable!("pieces without infinity are circles or finite points"),
        };
        (self.mapped(&f), f)
    }
}

fn validate(kind: &DomainKind) -> Result<(), DomainError> {
    match kind {
        DomainKind::Annulus { inner, outer } => {
            if !(*inner > 0.0 && inner < outer && outer.is_finite()) {
                return Err(DomainError::Invalid(format!("annulus radii {inner}, {outer}")));
            }
        }
        DomainKind::ComplementOfFiniteSet { points } => {
            if points.len() < 2 {
                return Err(DomainError::Invalid("finite complement needs at least two points".into()));
            }
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    if points[i].approx_eq(&points[j]) {
                        return Err(DomainError::Invalid(format!("repeated boundary point {}", points[i])));
                    }
                }
            }
        }
        DomainKind::SampledBoundary { samples, mesh_gap, interior_witness } => {
            if samples.len() < 3 || samples.iter().any(|s| s.is_infinite()) {
                return Err(DomainError::Invalid("sampled boundary needs at least three finite samples".into()));
            }
            if !(*mesh_gap > 0.0) {
                return Err(DomainError::Invalid("mesh gap must be positive".into()));
            }
            let w = interior_witness.expect_finite()?;
            let d = samples
                .iter()
                .filter_map(|s| s.finite())
                .map(|s| (s - w).norm())
                .fold(f64::INFINITY, f64::min);
            if !(d > *mesh_gap) {
                return Err(DomainError::Invalid("interior witness within mesh gap of the boundary".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

fn base_pieces(kind: &DomainKind) -> Vec<BoundaryPiece> {
    let origin = Complex64::new(0.0, 0.0);
    match kind {
        DomainKind::UnitDisk => vec![BoundaryPiece::Circle { center: origin, radius: 1.0 }],
        DomainKind::HalfPlane => vec![BoundaryPiece::line(origin, Complex64::new(1.0, 0.0))],
        DomainKind::PuncturedDisk => vec![
            BoundaryPiece::Circle { center: origin, radius: 1.0 },
            BoundaryPiece::Point(ExtendedPoint::Finite(origin)),
        ],
        DomainKind::Annulus { inner, outer } => vec![
            BoundaryPiece::Circle { center: origin, radius: *inner },
            BoundaryPiece::Circle { center: origin, radius: *outer },
        ],
        DomainKind::ComplementOfFiniteSet { points } => points.iter().map(|&p| BoundaryPiece::Point(p)).collect(),
        DomainKind::SampledBoundary { samples, .. } => samples.iter().map(|&p| BoundaryPiece::Point(p)).collect(),
    }
}

/// Even–odd crossing test against the closed polygon through `loop_pts`.
fn point_in_loop(loop_pts: &[ExtendedPoint], z: Complex64) -> bool {
    let pts: Vec<Complex64> = loop_pts.iter().filter_map(|p| p.finite()).collect();
    let mut inside = false;
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if z.re < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// JSON form of a point: `[re, im]` or the string `"inf"`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum JsonPoint {
    Pair([f64; 2]),
    Token(String),
}

impl TryFrom<&JsonPoint> for ExtendedPoint {
    type Error = DomainError;

    fn try_from(p: &JsonPoint) -> Result<Self, DomainError> {
        match p {
            JsonPoint::Pair([re, im]) => Ok(ExtendedPoint::new(*re, *im)?),
            JsonPoint::Token(t) if t == "inf" => Ok(ExtendedPoint::Infinity),
            JsonPoint::Token(t) => Err(DomainError::Invalid(format!("unknown point token {t:?}"))),
        }
    }
}

impl From<ExtendedPoint> for JsonPoint {
    fn from(p: ExtendedPoint) -> Self {
        match p {
            ExtendedPoint::Finite(z) => JsonPoint::Pair([z.re, z.im]),
            ExtendedPoint::Infinity => JsonPoint::Token("inf".into()),
        }
    }
}

/// The domain-spec file format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DomainFile {
    UnitDisk {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
    HalfPlane {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
    PuncturedDisk {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
    Annulus {
        inner: f64,
        outer: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
    Complement {
        points: Vec<JsonPoint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
    Sampled {
        samples: Vec<JsonPoint>,
        mesh_gap: f64,
        interior_witness: JsonPoint,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mobius: Option<[[f64; 2]; 4]>,
    },
}

impl DomainFile {
    fn mobius(&self) -> Option<[[f64; 2]; 4]> {
        match self {
            DomainFile::UnitDisk { mobius }
            | DomainFile::HalfPlane { mobius }
            | DomainFile::PuncturedDisk { mobius }
            | DomainFile::Annulus { mobius, .. }
            | DomainFile::Complement { mobius, .. }
            | DomainFile::Sampled { mobius, .. } => *mobius,
        }
    }
}

impl TryFrom<&DomainFile> for DomainSpec {
    type Error = DomainError;

    fn try_from(file: &DomainFile) -> Result<Self, DomainError> {
        let points = |v: &[JsonPoint]| -> Result<Vec<ExtendedPoint>, DomainError> {
            v.iter().map(ExtendedPoint::try_from).collect()
        };
        let kind = match file {
            DomainFile::UnitDisk { .. } => DomainKind::UnitDisk,
            DomainFile::HalfPlane { .. } => DomainKind::HalfPlane,
            DomainFile::PuncturedDisk { .. } => DomainKind::PuncturedDisk,
            DomainFile::Annulus { inner, outer, .. } => DomainKind::Annulus { inner: *inner, outer: *outer },
            DomainFile::Complement { points: p, .. } => DomainKind::ComplementOfFiniteSet { points: points(p)? },
            DomainFile::Sampled { samples, mesh_gap, interior_witness, .. } => DomainKind::SampledBoundary {
                samples: points(samples)?,
                mesh_gap: *mesh_gap,
                interior_witness: ExtendedPoint::try_from(interior_witness)?,
            },
        };
        let map = match file.mobius() {
            Some(c) => {
                let z = |i: usize| Complex64::new(c[i][0], c[i][1]);
                Some(MobiusMap::new(z(0), z(1), z(2), z(3))?)
            }
            None => None,
        };
        DomainSpec::with_map(kind, map)
    }
}

impl From<&DomainSpec> for DomainFile {
    fn from(spec: &DomainSpec) -> Self {
        let mobius = spec.map.map(|f| f.coefficients().map(|c| [c.re, c.im]));
        let pts = |v: &[ExtendedPoint]| v.iter().map(|&p| JsonPoint::from(p)).collect();
        match &spec.kind {
            DomainKind::UnitDisk => DomainFile::UnitDisk { mobius },
            DomainKind::HalfPlane => DomainFile::HalfPlane { mobius },
            DomainKind::PuncturedDisk => DomainFile::PuncturedDisk { mobius },
            DomainKind::Annulus { inner, outer } => DomainFile::Annulus { inner: *inner, outer: *outer, mobius },
            DomainKind::ComplementOfFiniteSet { points } => DomainFile::Complement { points: pts(points), mobius },
            DomainKind::SampledBoundary { samples, mesh_gap, interior_witness } => DomainFile::Sampled {
                samples: pts(samples),
                mesh_gap: *mesh_gap,
                interior_witness: JsonPoint::from(*interior_witness),
                mobius,
            },
        }
    }
}

impl DomainSpec {
    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        let file: DomainFile =
            serde_json::from_str(text).map_err(|e| DomainError::Invalid(format!("domain file: {e}")))?;
        DomainSpec::try_from(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DomainFile::from(self)).expect("plain data serializes")
    }
}
