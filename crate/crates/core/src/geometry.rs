//! Points of the extended plane, the chordal metric, absolute cross-ratios,
//! inversions and Möbius transformations.

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use std::fmt;

use crate::error::GeometryError;

/// Relative tolerance used for geometric coincidence tests.
pub const REL_TOL: f64 = 1e-12;
/// Absolute floor below which two magnitudes are considered equal.
pub const ABS_FLOOR: f64 = 1e-300;

/// `true` when `a` and `b` agree to [`REL_TOL`] (with the [`ABS_FLOOR`] floor).
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= (REL_TOL * a.abs().max(b.abs())).max(ABS_FLOOR)
}

fn complex_close(z: Complex64, w: Complex64) -> bool {
    (z - w).norm() <= (REL_TOL * z.norm().max(w.norm())).max(ABS_FLOOR)
}

/// A point of the extended plane `ℂ ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedPoint {
    Finite(Complex64),
    Infinity,
}

impl ExtendedPoint {
    /// Builds a finite point, rejecting NaN and infinite coordinates.
    pub fn new(re: f64, im: f64) -> Result<Self, GeometryError> {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn from_complex(z: Complex64) -> Result<Self, GeometryError> {
        if z.re.is_finite() && z.im.is_finite() {
            Ok(ExtendedPoint::Finite(z))
        } else {
            Err(GeometryError::NonFiniteCoordinate)
        }
    }

    /// Finite point from coordinates known to be finite (constants, grid nodes).
    pub fn xy(re: f64, im: f64) -> Self {
        debug_assert!(re.is_finite() && im.is_finite());
        ExtendedPoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedPoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            ExtendedPoint::Finite(z) => Some(*z),
            ExtendedPoint::Infinity => None,
        }
    }

    /// The finite coordinate, or a chart error for `∞`.
    pub fn expect_finite(&self) -> Result<Complex64, GeometryError> {
        self.finite().ok_or(GeometryError::InfiniteArgument)
    }

    /// Coincidence up to [`REL_TOL`].
    pub fn approx_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ExtendedPoint::Infinity, ExtendedPoint::Infinity) => true,
            (ExtendedPoint::Finite(z), ExtendedPoint::Finite(w)) => complex_close(*z, *w),
            _ => false,
        }
    }
}

impl From<Complex64> for ExtendedPoint {
    fn from(z: Complex64) -> Self {
        ExtendedPoint::Finite(z)
    }
}

impl fmt::Display for ExtendedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedPoint::Finite(z) => write!(f, "{},{}", z.re, z.im),
            ExtendedPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// `σ(x) = √(1+|x|²)`.
pub fn sigma_weight(x: ExtendedPoint) -> Result<f64, GeometryError> {
    let z = x.expect_finite()?;
    Ok(1f64.hypot(z.norm()))
}

/// Chordal distance `q(x, y) = |x−y| / (σ(x)σ(y))`, with `q(x, ∞) = 1/σ(x)`.
pub fn chordal_distance(x: ExtendedPoint, y: ExtendedPoint) -> f64 {
    match (x, y) {
        (ExtendedPoint::Infinity, ExtendedPoint::Infinity) => 0.0,
        (ExtendedPoint::Finite(z), ExtendedPoint::Infinity)
        | (ExtendedPoint::Infinity, ExtendedPoint::Finite(z)) => 1.0 / 1f64.hypot(z.norm()),
        (ExtendedPoint::Finite(z), ExtendedPoint::Finite(w)) => {
            (z - w).norm() / (1f64.hypot(z.norm()) * 1f64.hypot(w.norm()))
        }
    }
}

/// Absolute cross-ratio `|a,b,c,d| = |a−c||b−d| / (|a−b||c−d|)`.
///
/// A point at `∞` appears in exactly one numerator and one denominator factor;
/// both are dropped (the limit). Coincident points are rejected.
pub fn cross_ratio(
    a: ExtendedPoint,
    b: ExtendedPoint,
    c: ExtendedPoint,
    d: ExtendedPoint,
) -> Result<f64, GeometryError> {
    let pts = [a, b, c, d];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i].approx_eq(&pts[j]) {
                return Err(GeometryError::DegenerateConfiguration);
            }
        }
    }
    // factor(p, q) is None when it contains ∞ and must be dropped
    let factor = |p: ExtendedPoint, q: ExtendedPoint| -> Option<f64> {
        match (p, q) {
            (ExtendedPoint::Finite(z), ExtendedPoint::Finite(w)) => Some((z - w).norm()),
            _ => None,
        }
    };
    let num = factor(a, c).unwrap_or(1.0) * factor(b, d).unwrap_or(1.0);
    let den = factor(a, b).unwrap_or(1.0) * factor(c, d).unwrap_or(1.0);
    if den == 0.0 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    Ok(num / den)
}

/// Inversion `ι_x(y) = (y−x)/|y−x|²` in the unit circle about `x`, followed by
/// the translation taking `x` to the origin; `ι_x(x) = ∞` and `ι_x(∞) = 0`.
pub fn invert_point(center: Complex64, p: ExtendedPoint) -> ExtendedPoint {
    match p {
        ExtendedPoint::Infinity => ExtendedPoint::Finite(Complex64::new(0.0, 0.0)),
        ExtendedPoint::Finite(y) => {
            let v = y - center;
            let r2 = v.norm_sqr();
            if r2 == 0.0 {
                ExtendedPoint::Infinity
            } else {
                ExtendedPoint::Finite(v / r2)
            }
        }
    }
}

pub fn invert_about(
    center: ExtendedPoint,
    pts: &[ExtendedPoint],
) -> Result<Vec<ExtendedPoint>, GeometryError> {
    let c = center.expect_finite()?;
    Ok(pts.iter().map(|&p| invert_point(c, p)).collect())
}

/// Fractional-linear map `z ↦ (az+b)/(cz+d)` of the extended plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, GeometryError> {
        let det = a * d - b * c;
        let scale = (a * d).norm().max((b * c).norm());
        if !(det.norm() > REL_TOL * scale) || !det.norm().is_finite() {
            return Err(GeometryError::SingularMap);
        }
        Ok(MobiusMap { a, b, c, d })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        MobiusMap { a: one, b: zero, c: zero, d: one }
    }

    /// `z ↦ 1/(z − p)`, sending `p` to `∞`.
    pub fn pole_at(p: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        MobiusMap { a: Complex64::new(0.0, 0.0), b: one, c: one, d: -p }
    }

    /// `z ↦ s·z + t`.
    pub fn affine(s: Complex64, t: Complex64) -> Result<Self, GeometryError> {
        Self::new(s, t, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, p: ExtendedPoint) -> ExtendedPoint {
        match p {
            ExtendedPoint::Infinity => {
                if self.c.norm() <= REL_TOL * self.a.norm() {
                    ExtendedPoint::Infinity
                } else {
                    ExtendedPoint::Finite(self.a / self.c)
                }
            }
            ExtendedPoint::Finite(z) => {
                let den = self.c * z + self.d;
                let den_scale = (self.c * z).norm() + self.d.norm();
                if den.norm() <= REL_TOL * den_scale {
                    ExtendedPoint::Infinity
                } else {
                    let w = (self.a * z + self.b) / den;
                    if w.re.is_finite() && w.im.is_finite() {
                        ExtendedPoint::Finite(w)
                    } else {
                        ExtendedPoint::Infinity
                    }
                }
            }
        }
    }

    /// `|f'(z)|` at a finite, non-polar point.
    pub fn derivative_modulus(&self, z: Complex64) -> f64 {
        let den = self.c * z + self.d;
        self.determinant().norm() / den.norm_sqr()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        MobiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
        .normalized()
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }.normalized()
    }

    /// Rescales coefficients so that `ad − bc = 1`.
    fn normalized(self) -> MobiusMap {
        let k = Complex64::new(1.0, 0.0) / self.determinant().sqrt();
        MobiusMap { a: self.a * k, b: self.b * k, c: self.c * k, d: self.d * k }
    }

    /// The map sending `z1, z2, z3` to `0, 1, ∞`.
    fn to_standard(z1: ExtendedPoint, z2: ExtendedPoint, z3: ExtendedPoint) -> Result<Self, GeometryError> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let m = match (z1, z2, z3) {
            (ExtendedPoint::Infinity, ExtendedPoint::Finite(b), ExtendedPoint::Finite(c)) => {
                MobiusMap { a: zero, b: -(b - c), c: -one, d: c }
            }
            (ExtendedPoint::Finite(a), ExtendedPoint::Infinity, ExtendedPoint::Finite(c)) => {
                MobiusMap { a: one, b: -a, c: one, d: -c }
            }
            (ExtendedPoint::Finite(a), ExtendedPoint::Finite(b), ExtendedPoint::Infinity) => {
                MobiusMap { a: one, b: -a, c: zero, d: b - a }
            }
            (ExtendedPoint::Finite(a), ExtendedPoint::Finite(b), ExtendedPoint::Finite(c)) => {
                MobiusMap { a: b - c, b: -a * (b - c), c: b - a, d: -c * (b - a) }
            }
            _ => return Err(GeometryError::DegenerateConfiguration),
        };
        MobiusMap::new(m.a, m.b, m.c, m.d).map(MobiusMap::normalized)
    }

    /// The unique map with `src[i] ↦ dst[i]`.
    pub fn from_triple(src: [ExtendedPoint; 3], dst: [ExtendedPoint; 3]) -> Result<Self, GeometryError> {
        for t in [&src, &dst] {
            if t[0].approx_eq(&t[1]) || t[0].approx_eq(&t[2]) || t[1].approx_eq(&t[2]) {
                return Err(GeometryError::DegenerateConfiguration);
            }
        }
        let s = Self::to_standard(src[0], src[1], src[2])?;
        let t = Self::to_standard(dst[0], dst[1], dst[2])?;
        Ok(t.inverse().compose(&s))
    }
}

impl Serialize for ExtendedPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedPoint::Finite(z) => [z.re, z.im].serialize(serializer),
            ExtendedPoint::Infinity => serializer.serialize_str("inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(re: f64, im: f64) -> ExtendedPoint {
        ExtendedPoint::xy(re, im)
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_weight(p(0.0, 0.0)).unwrap(), 1.0);
        assert!((sigma_weight(p(1.0, 0.0)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((sigma_weight(p(3.0, 4.0)).unwrap() - 26f64.sqrt()).abs() < 1e-14);
        assert_eq!(sigma_weight(ExtendedPoint::Infinity), Err(GeometryError::InfiniteArgument));
    }

    #[test]
    fn chordal_values() {
        assert_eq!(chordal_distance(p(0.0, 0.0), ExtendedPoint::Infinity), 1.0);
        assert_eq!(chordal_distance(p(0.3, -2.0), p(0.3, -2.0)), 0.0);
        let q = chordal_distance(p(0.0, 0.0), p(1.0, 0.0));
        assert!((q - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cross_ratio_limits() {
        let e = (-1f64).exp();
        let v = cross_ratio(p(0.0, 0.0), p(e, 0.0), ExtendedPoint::Infinity, p(-e, 0.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = cross_ratio(p(0.0, 0.0), p(1.0, 0.0), ExtendedPoint::Infinity, p(2.0, 0.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        // brute-force limit along c → ∞
        let far = cross_ratio(p(0.0, 0.0), p(1.0, 0.0), p(1e9, 3e8), p(2.0, 0.0)).unwrap();
        assert!((far - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cross_ratio_rejects_coincidence() {
        let a = p(1.0, 1.0);
        assert!(cross_ratio(a, a, p(0.0, 0.0), p(2.0, 0.0)).is_err());
        assert!(cross_ratio(
            ExtendedPoint::Infinity,
            p(0.0, 0.0),
            ExtendedPoint::Infinity,
            p(1.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn inversion_examples() {
        let out = invert_about(p(0.0, 0.0), &[p(2.0, 0.0), ExtendedPoint::Infinity, p(0.0, 0.0)]).unwrap();
        assert!(out[0].approx_eq(&p(0.5, 0.0)));
        assert!(out[1].approx_eq(&p(0.0, 0.0)));
        assert!(out[2].is_infinite());

        let x = Complex64::new(1.0, 0.0);
        let ia = invert_point(x, p(0.0, 0.0)).finite().unwrap();
        let ib = invert_point(x, p(3.0, 0.0)).finite().unwrap();
        assert!(((ia - ib).norm() - 1.5).abs() < 1e-15);
        assert!(invert_about(ExtendedPoint::Infinity, &[]).is_err());
    }

    #[test]
    fn triple_maps() {
        let zero = p(0.0, 0.0);
        let one = p(1.0, 0.0);
        let inf = ExtendedPoint::Infinity;
        let id = MobiusMap::from_triple([zero, one, inf], [zero, one, inf]).unwrap();
        for z in [p(0.3, 0.7), p(-2.0, 5.0)] {
            assert!(id.apply(z).approx_eq(&z));
        }
        let recip = MobiusMap::from_triple([zero, one, inf], [inf, one, zero]).unwrap();
        for z in [p(0.3, 0.7), p(-2.0, 5.0), p(4.0, 0.0)] {
            let w = Complex64::new(1.0, 0.0) / z.finite().unwrap();
            assert!((recip.apply(z).finite().unwrap() - w).norm() < 1e-12);
        }
        let two = p(2.0, 0.0);
        let m = MobiusMap::from_triple([zero, one, two], [zero, one, inf]).unwrap();
        assert!(m.apply(zero).approx_eq(&zero));
        assert!((m.apply(one).finite().unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!(m.apply(two).is_infinite());
        assert!(MobiusMap::from_triple([zero, zero, one], [zero, one, inf]).is_err());
    }

    #[test]
    fn singular_map_rejected() {
        let one = Complex64::new(1.0, 0.0);
        assert!(MobiusMap::new(one, one, one, one).is_err());
    }

    fn finite_pt() -> impl Strategy<Value = Complex64> {
        (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| Complex64::new(a, b))
    }

    fn mobius() -> impl Strategy<Value = MobiusMap> {
        (finite_pt(), finite_pt(), finite_pt(), finite_pt())
            .prop_filter_map("singular", |(a, b, c, d)| {
                let det = (a * d - b * c).norm();
                if det < 0.1 {
                    None
                } else {
                    MobiusMap::new(a, b, c, d).ok()
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cross_ratio_is_mobius_invariant(f in mobius(), a in finite_pt(), b in finite_pt(), c in finite_pt(), d in finite_pt()) {
            let pts = [a, b, c, d];
            for i in 0..4 { for j in (i+1)..4 { prop_assume!((pts[i]-pts[j]).norm() > 1e-2); } }
            let images: Vec<_> = pts.iter().map(|&z| f.apply(z.into())).collect();
            for w in &images {
                if let Some(w) = w.finite() { prop_assume!(w.norm() < 1e6); }
            }
            let before = cross_ratio(a.into(), b.into(), c.into(), d.into()).unwrap();
            let after = cross_ratio(images[0], images[1], images[2], images[3]).unwrap();
            prop_assert!((before - after).abs() <= 1e-9 * before.max(1e-300) + 1e-300,
                "{} vs {}", before, after);
        }

        #[test]
        fn chordal_triangle_and_bound(x in finite_pt(), y in finite_pt(), z in finite_pt()) {
            let (x, y, z) = (ExtendedPoint::from(x), ExtendedPoint::from(y), ExtendedPoint::from(z));
            prop_assert_eq!(chordal_distance(x, y), chordal_distance(y, x));
            prop_assert!(chordal_distance(x, z) <= chordal_distance(x, y) + chordal_distance(y, z) + 1e-15);
            prop_assert!(chordal_distance(x, y) <= 1.0);
            prop_assert!(chordal_distance(x, ExtendedPoint::Infinity) <= chordal_distance(x, y) + chordal_distance(y, ExtendedPoint::Infinity) + 1e-15);
        }

        #[test]
        fn sigma_strict_contraction(x in finite_pt(), y in finite_pt()) {
            prop_assume!((x - y).norm() > 1e-9);
            let sx = sigma_weight(x.into()).unwrap();
            let sy = sigma_weight(y.into()).unwrap();
            prop_assert!((sx - sy).abs() < (x - y).norm());
        }

        #[test]
        fn inversion_distance_identity(x in finite_pt(), a in finite_pt(), b in finite_pt()) {
            prop_assume!((x - a).norm() > 1e-3 && (x - b).norm() > 1e-3);
            let ia = invert_point(x, a.into()).finite().unwrap();
            let ib = invert_point(x, b.into()).finite().unwrap();
            let lhs = (ia - ib).norm();
            let rhs = (a - b).norm() / ((x - a).norm() * (x - b).norm());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn group_laws(f in mobius(), g in mobius(), h in mobius(), z in finite_pt()) {
            let z = ExtendedPoint::from(z);
            let lhs = f.compose(&g).compose(&h).apply(z);
            let rhs = f.compose(&g.compose(&h)).apply(z);
            let fz = f.apply(z);
            prop_assume!(fz.finite().map_or(false, |w| w.norm() < 1e6));
            let back = f.inverse().apply(fz);
            prop_assert!((back.finite().unwrap() - z.finite().unwrap()).norm() < 1e-7);
            match (lhs, rhs) {
                (ExtendedPoint::Finite(u), ExtendedPoint::Finite(v)) => {
                    prop_assert!((u - v).norm() <= 1e-7 * u.norm().max(1.0));
                }
                _ => {}
            }
        }
    }
}
