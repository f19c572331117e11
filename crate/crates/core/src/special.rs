//! Complete elliptic integrals, the Grötzsch modulus function `μ(r)` and the
//! planar Grötzsch and Teichmüller capacities, plus the closed-form modulus
//! metrics of the unit disk.
//!
//! Everything is driven by the arithmetic–geometric mean:
//!
//! ```text
//! K(r) = π / (2·agm(1, r')),     r' = √(1−r²)
//! μ(r) = (π/2)·K(r')/K(r) = (π/2)·agm(1, r')/agm(1, r)
//! γ₂(s) = 2π/μ(1/s),   τ₂(s) = γ₂(√(s+1))/2
//! ```
//!
//! Wherever a caller can supply the complementary modulus `r'` directly it is
//! never recomputed as `√(1−r²)`, which keeps `μ` accurate when `r` is close
//! to one.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::SpecialError;
use crate::geometry::ExtendedPoint;

/// Inputs of `μ` below this value trigger a precision warning.
pub const MU_PRECISION_FLOOR: f64 = 1e-8;

const AGM_MAX_ITER: usize = 64;

/// Constants that recur in the comparison inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniversalConstants {
    /// Length of the unit circle, `ω₁ = 2π`.
    pub omega1: f64,
    /// `M₀ = 2/log(1 + log 3)`.
    pub m0: f64,
    pub pi_over_4: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        UniversalConstants {
            omega1: 2.0 * PI,
            m0: 2.0 / (1.0 + 3f64.ln()).ln(),
            pi_over_4: PI / 4.0,
        }
    }
}

/// `ω_{n−1}`, the `(n−1)`-dimensional measure of the unit sphere in `ℝⁿ`.
pub fn sphere_measure(n: u32) -> f64 {
    // ω₀ = 2, ω₁ = 2π, ω_{k+1} = 2π ω_{k−1} / k
    let (mut even, mut odd) = (2.0, 2.0 * PI);
    match n {
        0 => return 0.0,
        1 => return even,
        2 => return odd,
        _ => {}
    }
    for k in 1..(n - 1) {
        let next = 2.0 * PI * even / k as f64;
        even = odd;
        odd = next;
    }
    odd
}

/// Arithmetic–geometric mean of two positive numbers.
pub fn agm(a: f64, b: f64) -> Result<f64, SpecialError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(SpecialError::Domain {
            value: if a > 0.0 { b } else { a },
            domain: "(0, ∞)",
        });
    }
    Ok(agm_unchecked(a, b))
}

fn agm_unchecked(mut a: f64, mut b: f64) -> f64 {
    if b == 0.0 || a == 0.0 {
        return 0.0;
    }
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a.max(b) {
            break;
        }
        let next_a = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next_a;
    }
    0.5 * (a + b)
}

/// `K(r) = ∫₀^{π/2} dt/√(1 − r² sin² t)` for `0 ≤ r < 1`.
pub fn elliptic_k(r: f64) -> Result<f64, SpecialError> {
    if !(0.0..1.0).contains(&r) {
        return Err(SpecialError::Domain { value: r, domain: "[0, 1)" });
    }
    let rp = ((1.0 - r) * (1.0 + r)).sqrt();
    Ok(PI / (2.0 * agm_unchecked(1.0, rp)))
}

/// `μ(r)` from a modulus and its complement (`r² + r'² = 1`).
pub(crate) fn mu_pair(r: f64, rp: f64) -> f64 {
    if rp == 0.0 {
        return 0.0;
    }
    if r == 0.0 {
        return f64::INFINITY;
    }
    if r < MU_PRECISION_FLOOR {
        log::warn!("grotzsch mu evaluated at r = {r:e}, below the precision floor {MU_PRECISION_FLOOR:e}");
    }
    FRAC_PI_2 * agm_unchecked(1.0, rp) / agm_unchecked(1.0, r)
}

/// The Grötzsch ring modulus function, a decreasing homeomorphism of `(0,1]` onto `[0,∞)`.
pub fn grotzsch_mu(r: f64) -> Result<f64, SpecialError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(SpecialError::Domain { value: r, domain: "(0, 1]" });
    }
    Ok(mu_pair(r, ((1.0 - r) * (1.0 + r)).sqrt()))
}

/// Planar Grötzsch capacity `γ₂(s) = 2π/μ(1/s)`, `s > 1`.
pub fn gamma2(s: f64) -> Result<f64, SpecialError> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(SpecialError::Domain { value: s, domain: "(1, ∞)" });
    }
    let r = 1.0 / s;
    let rp = ((s - 1.0) * (s + 1.0)).sqrt() / s;
    Ok(2.0 * PI / mu_pair(r, rp))
}

/// Planar Teichmüller capacity `τ₂(s) = γ₂(√(s+1))/2`, `s > 0`.
pub fn tau2(s: f64) -> Result<f64, SpecialError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(SpecialError::Domain { value: s, domain: "(0, ∞)" });
    }
    let r = (1.0 / (s + 1.0)).sqrt();
    let rp = (s / (s + 1.0)).sqrt();
    Ok(PI / mu_pair(r, rp))
}

fn disk_point(p: ExtendedPoint) -> Result<Complex64, SpecialError> {
    match p.finite() {
        Some(z) if z.norm() < 1.0 => Ok(z),
        _ => Err(SpecialError::Domain {
            value: p.finite().map_or(f64::INFINITY, |z| z.norm()),
            domain: "open unit disk",
        }),
    }
}

/// `tanh(h/2)` and its complement `√(1 − tanh²(h/2))` for two points of the unit disk.
pub(crate) fn disk_tanh_pair(z: Complex64, w: Complex64) -> (f64, f64) {
    let den = (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
    let zz = (1.0 - z.norm()) * (1.0 + z.norm());
    let ww = (1.0 - w.norm()) * (1.0 + w.norm());
    ((z - w).norm() / den, (zz * ww).sqrt() / den)
}

/// Hyperbolic distance of the unit disk (curvature −1) from the pair above.
pub(crate) fn disk_hyperbolic(z: Complex64, w: Complex64) -> f64 {
    let (t, tp) = disk_tanh_pair(z, w);
    if t < 0.5 {
        return 2.0 * t.atanh();
    }
    // 2 artanh t = log((1+t)²/(1−t²))
    2.0 * t.ln_1p() - 2.0 * tp.ln()
}

/// Modulus metric of the unit disk, `μ_𝔻(z,w) = 2π/μ(tanh(h_𝔻(z,w)/2))`.
pub fn mu_disk(z: ExtendedPoint, w: ExtendedPoint) -> Result<f64, SpecialError> {
    let (z, w) = (disk_point(z)?, disk_point(w)?);
    let (t, tp) = disk_tanh_pair(z, w);
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * PI / mu_pair(t, tp))
}

/// Ferrand's modulus quantity of the unit disk, `λ_𝔻 = 4/μ_𝔻`.
pub fn lambda_disk(z: ExtendedPoint, w: ExtendedPoint) -> Result<f64, SpecialError> {
    let m = mu_disk(z, w)?;
    if m == 0.0 {
        return Err(SpecialError::InfiniteValue);
    }
    Ok(4.0 / m)
}

/// `λ_𝔻` through the Teichmüller capacity: `τ₂(sinh²(h/2))/2`.
pub fn lambda_disk_via_tau(z: ExtendedPoint, w: ExtendedPoint) -> Result<f64, SpecialError> {
    let (z, w) = (disk_point(z)?, disk_point(w)?);
    let h = disk_hyperbolic(z, w);
    if h == 0.0 {
        return Err(SpecialError::InfiniteValue);
    }
    let t = (0.5 * h).sinh().powi(2);
    Ok(tau2(t)? / 2.0)
}

/// `π²/(4x) − μ(tanh x)`, positive for every `x > 0`.
pub fn mu_tanh_bound_margin(x: f64) -> Result<f64, SpecialError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecialError::Domain { value: x, domain: "(0, ∞)" });
    }
    let r = x.tanh();
    // sech x = 2e^{−x}/(1+e^{−2x})
    let e = (-x).exp();
    let rp = 2.0 * e / (1.0 + e * e);
    Ok(PI * PI / (4.0 * x) - mu_pair(r, rp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Adaptive Simpson quadrature of the defining integral of K(r).
    fn k_quadrature(r: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (simpson(f, a, m), simpson(f, m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                l + r + (l + r - whole) / 15.0
            } else {
                adapt(f, a, m, l, tol / 2.0, depth - 1) + adapt(f, m, b, r, tol / 2.0, depth - 1)
            }
        }
        let f = move |t: f64| 1.0 / (1.0 - r * r * t.sin().powi(2)).sqrt();
        adapt(&f, 0.0, FRAC_PI_2, simpson(&f, 0.0, FRAC_PI_2), 1e-14, 30)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn agm_basics() {
        assert_eq!(agm(1.0, 1.0).unwrap(), 1.0);
        let g = agm(1.0, 0.5).unwrap();
        assert!(g > 0.5 && g < 1.0);
        assert!((g - agm(0.5, 1.0).unwrap()).abs() < 1e-15);
        assert!(agm(0.0, 1.0).is_err());
        assert!(agm(-1.0, 1.0).is_err());
        let r: f64 = 0.3;
        let via_agm = PI / (2.0 * agm(1.0, (1.0 - r * r).sqrt()).unwrap());
        assert!(rel(via_agm, k_quadrature(r)) < 1e-10);
    }

    #[test]
    fn elliptic_k_values() {
        assert_eq!(elliptic_k(0.0).unwrap(), FRAC_PI_2);
        let k = elliptic_k(FRAC_1_SQRT_2).unwrap();
        let kp = elliptic_k((1.0 - 0.5f64).sqrt()).unwrap();
        assert!(rel(k, kp) < 1e-15);
        assert!(rel(elliptic_k(0.6).unwrap(), k_quadrature(0.6)) < 1e-10);
        for i in 1..100 {
            let r = i as f64 / 100.0;
            assert!(rel(elliptic_k(r).unwrap(), k_quadrature(r)) < 1e-10, "r = {r}");
        }
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
    }

    #[test]
    fn mu_values() {
        assert_eq!(grotzsch_mu(1.0).unwrap(), 0.0);
        assert!(rel(grotzsch_mu(FRAC_1_SQRT_2).unwrap(), FRAC_PI_2) < 1e-12);
        for i in 1..100 {
            let r = i as f64 / 100.0;
            let prod = grotzsch_mu(r).unwrap() * grotzsch_mu((1.0 - r * r).sqrt()).unwrap();
            assert!(rel(prod, PI * PI / 4.0) < 1e-10);
            if !(15..=85).contains(&i) {
                continue;
            }
            // against the quadrature oracle, where both moduli stay below 0.99
            let oracle = FRAC_PI_2 * k_quadrature((1.0 - r * r).sqrt()) / k_quadrature(r);
            assert!(rel(grotzsch_mu(r).unwrap(), oracle) < 1e-9, "r = {r}");
        }
        assert!(grotzsch_mu(0.0).is_err());
        assert!(grotzsch_mu(1.5).is_err());
    }

    #[test]
    fn mu_small_argument_tracks_log_asymptote() {
        // μ(r) − log(4/r) → 0 as r → 0
        for r in [1e-3, 1e-5, 1e-7] {
            let d = grotzsch_mu(r).unwrap() - (4.0 / r).ln();
            assert!(d.abs() < r, "r = {r}, d = {d}");
        }
    }

    #[test]
    fn mu_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let r = i as f64 / 1000.0;
            let m = grotzsch_mu(r).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn capacities() {
        assert!(rel(gamma2(2f64.sqrt()).unwrap(), 4.0) < 1e-9);
        let g2 = gamma2(2.0).unwrap();
        let oracle = 2.0 * PI / (FRAC_PI_2 * k_quadrature(0.75f64.sqrt()) / k_quadrature(0.5));
        assert!(rel(g2, oracle) < 1e-9);
        assert!(gamma2(2.0).unwrap() > gamma2(4.0).unwrap());
        assert!(gamma2(4.0).unwrap() > gamma2(8.0).unwrap());
        assert!(gamma2(1.0).is_err());

        assert!(rel(tau2(1.0).unwrap(), 2.0) < 1e-9);
        assert!(rel(tau2(3.0).unwrap() * tau2(1.0 / 3.0).unwrap(), 4.0) < 1e-9);
        assert!(rel(tau2(3.0).unwrap(), gamma2(2.0).unwrap() / 2.0) < 1e-12);
        assert!(tau2(0.0).is_err());
    }

    #[test]
    fn capacity_monotonicity_on_grids() {
        let mut prev_g = f64::INFINITY;
        let mut prev_t = f64::INFINITY;
        for i in 1..=1000 {
            let s = 1.0 + i as f64 / 100.0;
            let g = gamma2(s).unwrap();
            assert!(g < prev_g);
            prev_g = g;
            let t = 10f64.powf(-3.0 + 6.0 * i as f64 / 1000.0);
            let tv = tau2(t).unwrap();
            assert!(tv < prev_t);
            prev_t = tv;
        }
    }

    #[test]
    fn tau_reciprocal_identity() {
        for i in 0..=600 {
            let t = 10f64.powf(-3.0 + i as f64 / 100.0);
            let prod = tau2(t).unwrap() * tau2(1.0 / t).unwrap();
            assert!(rel(prod, 4.0) < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn disk_modulus_metrics() {
        let o = ExtendedPoint::xy(0.0, 0.0);
        let z = ExtendedPoint::xy(0.3, -0.2);
        assert_eq!(mu_disk(z, z).unwrap(), 0.0);
        let w = ExtendedPoint::xy(0.5, 0.5);
        assert!(rel(mu_disk(o, w).unwrap(), 4.0) < 1e-12);
        let half = ExtendedPoint::xy(0.5, 0.0);
        assert!(rel(mu_disk(o, half).unwrap(), 2.0 * PI / grotzsch_mu(0.5).unwrap()) < 1e-14);
        assert!(rel(lambda_disk(o, w).unwrap(), 1.0) < 1e-12);
        let a = lambda_disk(o, ExtendedPoint::xy(0.3, 0.0)).unwrap();
        let b = lambda_disk_via_tau(o, ExtendedPoint::xy(0.3, 0.0)).unwrap();
        assert!(rel(a, b) < 1e-9);
        assert!(lambda_disk(z, z).is_err());
        assert!(mu_disk(o, ExtendedPoint::xy(1.0, 0.0)).is_err());
    }

    #[test]
    fn disk_metric_automorphism_invariance() {
        // z ↦ (z − a)/(1 − ā z)
        let a = Complex64::new(0.4, -0.3);
        let phi = |z: Complex64| (z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z);
        let pairs = [(Complex64::new(0.1, 0.2), Complex64::new(-0.6, 0.3)), (Complex64::new(0.9, 0.0), Complex64::new(0.0, -0.95))];
        for (z, w) in pairs {
            let before = mu_disk(z.into(), w.into()).unwrap();
            let after = mu_disk(phi(z).into(), phi(w).into()).unwrap();
            assert!(rel(before, after) < 1e-10);
        }
    }

    #[test]
    fn lemma_mu_tanh_bound() {
        for i in 0..1000 {
            let x = 10f64.powf(-3.0 + 6.0 * i as f64 / 999.0);
            assert!(mu_tanh_bound_margin(x).unwrap() > 0.0, "x = {x}");
        }
    }

    #[test]
    fn constants() {
        let c = UniversalConstants::default();
        assert!((c.m0 - 2.6980).abs() < 5e-5);
        assert!((c.omega1 - 2.0 * PI).abs() < 1e-15);
        assert_eq!(sphere_measure(2), 2.0 * PI);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_measure(4) - 2.0 * PI * PI).abs() < 1e-12);
    }
}
