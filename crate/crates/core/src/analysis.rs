//! Boundary diagnostics, ball-chain constructions and inequality sweeps.
//!
//! * [`uniform_perfectness_scan`] tests the annulus-meeting definition on a
//!   finite grid of centers and radii. Failures are certificates; a pass is
//!   only a statement about the grid.
//! * [`MartioExampleSpec`] generates chains of disjoint disks `B(s_k, r_k)`
//!   accumulating at the origin, with the separating ring ratios and the
//!   series bounds on the moduli.
//! * [`inequality_sweep`] evaluates every implemented metric on random pairs
//!   and flags violations of the comparison inequalities.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha1::{Digest, Sha1};
use std::f64::consts::{E, LN_2, PI};
use std::fmt::Write as _;

use crate::domains::{BoundaryPiece, DomainKind, DomainSpec};
use crate::error::AnalysisError;
use crate::geometry::{ExtendedPoint, MobiusMap};
use crate::path_metrics::{Chart, Density, GeodesicSolver, GridOptions, Stencil};
use crate::point_metrics::{
    d_metric, delta_metric, hyperbolic_metric, hyperbolic_punctured_disk, j_hat_metric, j_metric,
    log_mobius_metric, MetricValue,
};
use crate::special::{lambda_disk_via_tau, mu_disk, sphere_measure, UniversalConstants};

/// One `(center, radius)` probe of a uniform-perfectness scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnulusCheck {
    pub center: Complex64,
    pub radius: f64,
    /// Whether the boundary meets `{c·r ≤ |z − center| ≤ r}`.
    pub meets: bool,
    /// For an empty annulus, `outer/inner` of the widest boundary-free ring
    /// around `center` that contains it.
    pub gap_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfectnessReport {
    pub c: f64,
    pub checks: Vec<AnnulusCheck>,
    pub pass: bool,
    /// The failing probe with the widest gap.
    pub worst: Option<AnnulusCheck>,
}

/// Annulus-meeting test of `∂G` for every center and radius.
pub fn uniform_perfectness_scan(
    spec: &DomainSpec,
    c: f64,
    centers: &[ExtendedPoint],
    radii: &[f64],
) -> Result<PerfectnessReport, AnalysisError> {
    if spec.boundary_cardinality().map_or(false, |n| n < 2) {
        return Err(AnalysisError::Invalid("boundary needs at least two points".into()));
    }
    if !spec.infinity_on_boundary() {
        let diam = pieces_diameter(spec.pieces());
        if let Some(r) = radii.iter().find(|&&r| r >= diam) {
            return Err(AnalysisError::Invalid(format!("radius {r} not below the boundary diameter {diam}")));
        }
    }
    let centers = centers
        .iter()
        .map(|p| p.finite().ok_or_else(|| AnalysisError::Invalid("centers must be finite".into())))
        .collect::<Result<Vec<_>, _>>()?;
    scan_pieces(spec.pieces(), spec.mesh_gap(), c, &centers, radii)
}

/// The scan for an explicit compact set. Each piece is widened by `slack`.
pub fn scan_pieces(
    pieces: &[BoundaryPiece],
    slack: f64,
    c: f64,
    centers: &[Complex64],
    radii: &[f64],
) -> Result<PerfectnessReport, AnalysisError> {
    if !(c > 0.0 && c < 1.0) {
        return Err(AnalysisError::Invalid(format!("ratio c = {c} outside (0,1)")));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(AnalysisError::Invalid("radii must be positive and finite".into()));
    }
    let mut checks = Vec::with_capacity(centers.len() * radii.len());
    for &a in centers {
        let ranges: Vec<(f64, f64)> = pieces
            .iter()
            .map(|p| {
                let (lo, hi) = p.distance_range(a);
                ((lo - slack).max(0.0), hi + slack)
            })
            .collect();
        for &r in radii {
            let (inner, outer) = (c * r, r);
            let meets = ranges.iter().any(|&(lo, hi)| lo <= outer && hi >= inner);
            let gap_ratio = (!meets).then(|| {
                let below = ranges.iter().filter(|r| r.1 < inner).map(|r| r.1).fold(0.0, f64::max);
                let above = ranges.iter().filter(|r| r.0 > outer).map(|r| r.0).fold(f64::INFINITY, f64::min);
                above / below
            });
            checks.push(AnnulusCheck { center: a, radius: r, meets, gap_ratio });
        }
    }
    let worst = checks
        .iter()
        .filter(|k| !k.meets)
        .max_by(|x, y| x.gap_ratio.unwrap_or(0.0).total_cmp(&y.gap_ratio.unwrap_or(0.0)))
        .copied();
    Ok(PerfectnessReport { c, pass: worst.is_none(), checks, worst })
}

fn pieces_diameter(pieces: &[BoundaryPiece]) -> f64 {
    let mut pts = Vec::new();
    for p in pieces {
        match *p {
            BoundaryPiece::Point(ExtendedPoint::Finite(z)) => pts.push((z, 0.0)),
            BoundaryPiece::Circle { center, radius } => pts.push((center, radius)),
            _ => return f64::INFINITY,
        }
    }
    let mut d: f64 = 0.0;
    for (i, &(a, ra)) in pts.iter().enumerate() {
        d = d.max(2.0 * ra);
        for &(b, rb) in &pts[i + 1..] {
            d = d.max((a - b).norm() + ra + rb);
        }
    }
    d
}

/// `c₀ = exp[−2 (2ω_{n−1}/(b log 3))^{1/(n−1)}]`, the annulus ratio below which
/// `μ_G ≥ b δ_G` forces the boundary to meet every annulus.
pub fn thm12_constant(b: f64, n: u32) -> Result<f64, AnalysisError> {
    if !(b > 0.0 && b.is_finite()) || n < 2 {
        return Err(AnalysisError::Invalid(format!("b = {b}, n = {n}")));
    }
    let base = 2.0 * sphere_measure(n) / (b * 3f64.ln());
    Ok((-2.0 * base.powf(1.0 / (n as f64 - 1.0))).exp())
}

/// `β_k` for the tuned disk chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BetaRule {
    /// `β_k = k^{−p}` with `p > 1`.
    InversePower(f64),
}

impl BetaRule {
    fn log_beta(&self, k: usize) -> f64 {
        match *self {
            BetaRule::InversePower(p) => -p * (k as f64).ln(),
        }
    }

    /// Upper bound for `Σ_{k>K} β_k` by the integral test.
    fn tail(&self, last: usize) -> f64 {
        match *self {
            BetaRule::InversePower(p) => (last as f64).powf(1.0 - p) / (p - 1.0),
        }
    }

    fn total(&self) -> Option<f64> {
        match *self {
            BetaRule::InversePower(p) if p == 2.0 => Some(PI * PI / 6.0),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SequenceRule {
    /// `s_k = 2^{−k}`, `r_k = 2^{−k} s_k`.
    PowerBalls,
    /// `s_k = 2^{−k}`, `r_k = τ_k s_k`, `τ_k = 1/(2c_k)`, `c_k = exp(1/β_k)`.
    TunedBalls(BetaRule),
}

/// Disjoint closed disks `B(s_k, r_k)`, `first ≤ k ≤ truncation + 1`, in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartioExampleSpec {
    pub rule: SequenceRule,
    pub first: usize,
    pub truncation: usize,
}

/// Per-disk data of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartioRing {
    pub k: usize,
    pub log_tau: f64,
    /// `2^{k+1} α_k` with `α_k = s_k − r_k − (s_{k+1} + r_{k+1})`.
    pub scaled_separation: f64,
    /// `log(r′_k/r_k)`, the modulus of the separating ring `r_k < |z − s_k| < r′_k`.
    pub log_ratio: f64,
    /// `mod A_k = log((s_k + r_k)/(s_k − r_k))`.
    pub ring_modulus: f64,
    pub log_c: Option<f64>,
    /// `log(log c_k − log(r′_k/r_k))`; finite exactly when `r′_k/r_k < c_k`.
    pub log_margin: Option<f64>,
    /// `ω₁ β_k`, the bound on the modulus of curves reaching the disk.
    pub term: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartioReport {
    pub spec: MartioExampleSpec,
    pub rings: Vec<MartioRing>,
    /// `ω₁ Σ_{k ≤ K} β_k`.
    pub partial_sum: Option<f64>,
    /// `ω₁ Σ_{k > K} β_k ≤ tail_bound`.
    pub tail_bound: Option<f64>,
    /// `ω₁ Σ_k β_k` when known in closed form.
    pub series_limit: Option<f64>,
    pub all_ratios_below_c: Option<bool>,
    /// Whether `mod A_k` grows along the truncation; `false` means the
    /// unbounded-moduli criterion for the origin is not witnessed.
    pub ring_moduli_increasing: bool,
}

/// Exact ratio `r′_k/r_k` of the power chain against `2^{k−1} − 1/4`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRatio {
    pub k: usize,
    pub ratio: BigRational,
    pub bound: BigRational,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartioScan {
    pub report: PerfectnessReport,
    /// Smallest `k` whose outer contact point `s_k + r_k` centers an empty annulus.
    pub first_failing_k: Option<usize>,
}

fn pow2(k: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << k)
}

impl MartioExampleSpec {
    /// The power chain starts at `k = 2`: at `k = 1` the first two disks overlap.
    pub fn power_balls(truncation: usize) -> Self {
        MartioExampleSpec { rule: SequenceRule::PowerBalls, first: 2, truncation }
    }

    pub fn tuned_balls(beta: BetaRule, truncation: usize) -> Self {
        MartioExampleSpec { rule: SequenceRule::TunedBalls(beta), first: 1, truncation }
    }

    fn log_c(&self, k: usize) -> Option<f64> {
        match self.rule {
            SequenceRule::PowerBalls => None,
            SequenceRule::TunedBalls(beta) => Some((-beta.log_beta(k)).exp()),
        }
    }

    /// `log τ_k`, `τ_k = r_k/s_k`.
    pub fn log_tau(&self, k: usize) -> f64 {
        match self.rule {
            SequenceRule::PowerBalls => -(k as f64) * LN_2,
            SequenceRule::TunedBalls(_) => -LN_2 - self.log_c(k).expect("tuned"),
        }
    }

    fn tau(&self, k: usize) -> f64 {
        self.log_tau(k).exp()
    }

    fn scaled_separation(&self, k: usize) -> f64 {
        1.0 - 2.0 * self.tau(k) - self.tau(k + 1)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if self.first == 0 || self.truncation < self.first {
            return Err(AnalysisError::Invalid(format!("indices {}..={}", self.first, self.truncation)));
        }
        if let SequenceRule::TunedBalls(BetaRule::InversePower(p)) = self.rule {
            if !(p > 1.0) {
                return Err(AnalysisError::Invalid(format!("β_k = k^-{p} is not summable")));
            }
        }
        if self.rule == SequenceRule::PowerBalls {
            // exact check
            for k in self.first..=self.truncation {
                if !self.exact_alpha(k).is_positive() {
                    return Err(AnalysisError::Separation { k });
                }
            }
        } else if let Some(k) = (self.first..=self.truncation).find(|&k| !(self.scaled_separation(k) > 0.0)) {
            return Err(AnalysisError::Separation { k });
        }
        Ok(())
    }

    fn exact_s(&self, k: usize) -> BigRational {
        pow2(k).recip()
    }

    fn exact_r(&self, k: usize) -> BigRational {
        pow2(2 * k).recip()
    }

    fn exact_alpha(&self, k: usize) -> BigRational {
        self.exact_s(k) - self.exact_r(k) - (self.exact_s(k + 1) + self.exact_r(k + 1))
    }

    /// `r′_k/r_k` with `r′_k = r_k + min(α_{k−1}, α_k)` in exact arithmetic.
    pub fn exact_ratios(&self) -> Result<Vec<ExactRatio>, AnalysisError> {
        if self.rule != SequenceRule::PowerBalls {
            return Err(AnalysisError::Invalid("exact ratios exist for the power chain only".into()));
        }
        self.validate()?;
        let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
        Ok((self.first..=self.truncation)
            .map(|k| {
                let mut gap = self.exact_alpha(k);
                if k > self.first {
                    gap = gap.min(self.exact_alpha(k - 1));
                }
                let r = self.exact_r(k);
                let ratio = (&r + gap) / r;
                let bound = pow2(k - 1) - &quarter;
                ExactRatio { k, holds: ratio >= bound, ratio, bound }
            })
            .collect())
    }

    pub fn report(&self) -> Result<MartioReport, AnalysisError> {
        self.validate()?;
        let omega1 = UniversalConstants::default().omega1;
        let mut rings = Vec::new();
        for k in self.first..=self.truncation {
            let (lt, t) = (self.log_tau(k), self.tau(k));
            let next = self.tau(k + 1);
            // gaps over r_k
            let own = 0.5 * self.scaled_separation(k);
            let prev = (k > self.first).then(|| 1.0 - 2.0 * self.tau(k - 1) - t);
            let own_is_min = prev.map_or(true, |p| own <= p);
            let a = if own_is_min { own } else { prev.expect("checked") };
            let log_ratio = (t + a).ln() - lt;
            let log_c = self.log_c(k);
            let log_margin = log_c.map(|lc| {
                if own_is_min {
                    // log c_k − log((1 − τ_{k+1})/(2τ_k)) = −log(1 − τ_{k+1})
                    let lt1 = self.log_tau(k + 1);
                    if next > 1e-8 {
                        (-(-next).ln_1p()).ln()
                    } else {
                        lt1 + 0.5 * next
                    }
                } else {
                    (lc - log_ratio).ln()
                }
            });
            let term = match self.rule {
                SequenceRule::TunedBalls(beta) => Some(omega1 * beta.log_beta(k).exp()),
                SequenceRule::PowerBalls => None,
            };
            rings.push(MartioRing {
                k,
                log_tau: lt,
                scaled_separation: self.scaled_separation(k),
                log_ratio,
                ring_modulus: 2.0 * t.atanh(),
                log_c,
                log_margin,
                term,
            });
        }
        let (partial_sum, tail_bound, series_limit) = match self.rule {
            SequenceRule::TunedBalls(beta) => (
                Some(rings.iter().filter_map(|r| r.term).sum()),
                Some(omega1 * beta.tail(self.truncation)),
                beta.total().map(|s| omega1 * s),
            ),
            SequenceRule::PowerBalls => (None, None, None),
        };
        let all_ratios_below_c = match self.rule {
            SequenceRule::TunedBalls(_) => Some(rings.iter().all(|r| r.log_margin.map_or(false, |m| m > f64::NEG_INFINITY))),
            SequenceRule::PowerBalls => None,
        };
        let ring_moduli_increasing = rings.windows(2).all(|w| w[1].ring_modulus > w[0].ring_modulus);
        Ok(MartioReport { spec: *self, rings, partial_sum, tail_bound, series_limit, all_ratios_below_c, ring_moduli_increasing })
    }

    /// The origin and the boundary circles of the chain, through `k = truncation + 1`.
    pub fn boundary_pieces(&self) -> Vec<BoundaryPiece> {
        let mut pieces = vec![BoundaryPiece::Point(ExtendedPoint::xy(0.0, 0.0))];
        for k in self.first..=self.truncation + 1 {
            let s = 0.5f64.powi(k as i32);
            let r = s * self.tau(k);
            if r > 0.0 {
                pieces.push(BoundaryPiece::Circle { center: Complex64::new(s, 0.0), radius: r });
            }
        }
        pieces
    }

    /// Uniform-perfectness scan centered at the outer contact points `s_k + r_k`
    /// over a geometric radius grid with eight radii per octave.
    pub fn perfectness_scan(&self, c: f64) -> Result<MartioScan, AnalysisError> {
        self.validate()?;
        let pieces = self.boundary_pieces();
        let ks: Vec<usize> = (self.first..=self.truncation).collect();
        let centers: Vec<Complex64> = ks
            .iter()
            .map(|&k| {
                let s = 0.5f64.powi(k as i32);
                Complex64::new(s * (1.0 + self.tau(k)), 0.0)
            })
            .collect();
        let smallest = centers.iter().zip(&ks).map(|(_, &k)| 0.5f64.powi(k as i32) * self.tau(k)).fold(f64::INFINITY, f64::min);
        let mut radii = Vec::new();
        let mut r = 0.5;
        while r > 0.25 * smallest && r > 0.0 {
            radii.push(r);
            r *= 0.5f64.powf(0.125);
        }
        let report = scan_pieces(&pieces, 0.0, c, &centers, &radii)?;
        let first_failing_k = report
            .checks
            .chunks(radii.len())
            .zip(&ks)
            .find(|(chunk, _)| chunk.iter().any(|x| !x.meets))
            .map(|(_, &k)| k);
        Ok(MartioScan { report, first_failing_k })
    }
}

/// Row of the worked-example table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleRow {
    pub name: String,
    pub computed: f64,
    pub error_bound: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: &'static str,
    pub pass: bool,
}

impl ExampleRow {
    fn new(name: impl Into<String>, value: MetricValue, lower: f64, upper: f64, method: &'static str) -> Self {
        let pass = value.value >= lower && value.value <= upper;
        ExampleRow { name: name.into(), computed: value.value, error_bound: value.error_bound, lower, upper, method, pass }
    }

    fn near(name: impl Into<String>, value: MetricValue, expected: f64, tol: f64, method: &'static str) -> Self {
        Self::new(name, value, expected - tol, expected + tol, method)
    }
}

/// Worked computations with closed-form or exact expected values.
pub fn worked_examples(cell_size: f64) -> Result<Vec<ExampleRow>, AnalysisError> {
    let p = ExtendedPoint::xy;
    let metric = |r: Result<MetricValue, crate::error::MetricError>| r.map_err(|e| AnalysisError::Invalid(e.to_string()));
    let mut rows = Vec::new();

    // ℝ² ∖ {0}: j(e₁/r, r e₁) = 2 log r and j/ĵ → 2
    let plane = DomainSpec::punctured_plane();
    let r = 1e3;
    let j = metric(j_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)))?;
    let jh = metric(j_hat_metric(&plane, p(1.0 / r, 0.0), p(r, 0.0)))?;
    rows.push(ExampleRow::near("j-punctured-plane-r1000", j, 2.0 * r.ln(), 1e-12 * r.ln(), "closed-form"));
    rows.push(ExampleRow::new(
        "j-over-jhat-r1000",
        MetricValue::new(j.value / jh.value, j.error_bound + jh.error_bound),
        1.8,
        2.0,
        "closed-form",
    ));

    // D against Δ of ℂ ∖ {0,1}
    let m0 = UniversalConstants::default().m0;
    let omega = DomainSpec::thrice_punctured_sphere();
    let e1 = (-1f64).exp();
    for (name, a, b) in [
        ("d-over-log-mobius-real-pair", p(e1, 0.0), p(-e1, 0.0)),
        ("d-over-log-mobius-imaginary-pair", p(0.0, e1), p(0.0, -e1)),
    ] {
        let d = metric(d_metric(a, b))?;
        let big = metric(log_mobius_metric(&omega, a, b))?;
        let ratio = MetricValue::new(d.value / big.value, d.value * big.error_bound / (big.value * big.value));
        rows.push(ExampleRow::near(name, ratio, m0, 1e-6, "closed-form"));
    }

    // punctured disk: x = 2^{−m}
    let pd = DomainSpec::punctured_disk();
    for m in [2, 10, 20] {
        let x = 0.5f64.powi(m);
        let delta = metric(delta_metric(&pd, p(x, 0.0), p(-x, 0.0)))?;
        rows.push(ExampleRow::new(format!("delta-antipodal-2^-{m}"), delta, 3f64.ln() - 1e-12, f64::INFINITY, "closed-form"));
        let h = metric(hyperbolic_punctured_disk(p(x, 0.0), p(-x, 0.0)))?;
        rows.push(ExampleRow::new(format!("h-antipodal-2^-{m}"), h, 0.0, PI / x.recip().ln(), "closed-form"));
    }

    // x_j = tanh(j/2) and u_j = exp(−e^j)
    let disk = DomainSpec::unit_disk();
    for jj in [1, 2] {
        let x = |j: i32| ((j as f64) / 2.0).tanh();
        let h = metric(hyperbolic_metric(&disk, p(x(jj), 0.0), p(x(jj + 1), 0.0)))?;
        rows.push(ExampleRow::near(format!("hyperbolic-step-{jj}"), h, 1.0, 1e-12, "closed-form"));
        let u = |j: i32| (-(j as f64).exp()).exp();
        // radial quasihyperbolic distance near the puncture: log(u_j/u_{j+1})
        let k = MetricValue::exact(u(jj).ln() - u(jj + 1).ln());
        rows.push(ExampleRow::near(format!("radial-qh-step-{jj}"), k, (E - 1.0) * (jj as f64).exp(), 1e-12 * (jj as f64 + 1.0).exp(), "closed-form"));
    }
    let u1 = (-E).exp();
    let u2 = (-E * E).exp();
    let grid = crate::path_metrics::quasihyperbolic_distance(&pd, p(u1, 0.0), p(u2, 0.0), cell_size)
        .map_err(|e| AnalysisError::Invalid(e.to_string()))?;
    rows.push(ExampleRow::near("radial-qh-step-1-grid", grid.metric_value(), (E - 1.0) * E, 0.02 * (E - 1.0) * E, "grid"));

    // disk chains
    let power = MartioExampleSpec::power_balls(20);
    let worst = power
        .exact_ratios()?
        .into_iter()
        .map(|r| r.ratio - r.bound)
        .min()
        .expect("nonempty");
    let slack = worst.to_f64().unwrap_or(f64::NAN);
    rows.push(ExampleRow::new("power-chain-ratio-excess", MetricValue::exact(slack), 0.0, f64::INFINITY, "exact-rational"));
    let scan = power.perfectness_scan(0.5)?;
    rows.push(ExampleRow::new(
        "power-chain-perfectness-scan-fails",
        MetricValue::exact(if scan.report.pass { 0.0 } else { 1.0 }),
        1.0,
        1.0,
        "grid",
    ));
    let tuned = MartioExampleSpec::tuned_balls(BetaRule::InversePower(2.0), 50).report()?;
    let limit = tuned.series_limit.expect("closed form");
    rows.push(ExampleRow::new(
        "tuned-chain-partial-sum",
        MetricValue::exact(tuned.partial_sum.expect("tuned")),
        0.0,
        limit,
        "series",
    ));
    Ok(rows)
}

/// Settings of [`inequality_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub pairs_per_domain: usize,
    pub cell_size: f64,
    pub stencil: Stencil,
    pub seed: u64,
    /// Points keep at least this many cells from the boundary.
    pub min_distance_cells: f64,
    /// Test hook: overwrite σ by δ/2 to exercise the detector.
    #[serde(skip)]
    pub inject_fake_metric: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pairs_per_domain: 100,
            cell_size: 0.02,
            stencil: Stencil::Sixteen,
            seed: 7,
            min_distance_cells: 5.0,
            inject_fake_metric: false,
        }
    }
}

/// Absolute slack added to every comparison on top of the reported error bounds.
pub const SWEEP_ABS_TOL: f64 = 1e-9;
/// Relative slack for comparisons between closed forms.
pub const SWEEP_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub domain: String,
    pub pair: usize,
    pub x: ExtendedPoint,
    pub y: ExtendedPoint,
    pub j: Option<MetricValue>,
    pub j_hat: Option<MetricValue>,
    pub delta: Option<MetricValue>,
    pub big_delta: Option<MetricValue>,
    pub k: Option<MetricValue>,
    pub sigma: Option<MetricValue>,
    pub big_sigma: Option<MetricValue>,
    pub h: Option<MetricValue>,
    pub mu: Option<MetricValue>,
    pub lambda: Option<MetricValue>,
    pub violations: Vec<String>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSummary {
    pub label: String,
    pub spec_hash: String,
    pub pairs: usize,
    pub violations: usize,
    /// `min μ/δ` over the pairs with a modulus value.
    pub empirical_b: Option<f64>,
    pub c0_from_b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub domains: Vec<DomainSummary>,
    pub rows: Vec<SweepRow>,
    pub violations: usize,
}

/// The default sweep corpus.
pub fn builtin_corpus() -> Vec<DomainSpec> {
    vec![
        DomainSpec::unit_disk(),
        DomainSpec::half_plane(),
        DomainSpec::annulus(1.0, 2.0).expect("valid"),
        DomainSpec::punctured_disk(),
        DomainSpec::thrice_punctured_sphere(),
    ]
}

/// Git blob hash of the domain's JSON form.
pub fn spec_hash(spec: &DomainSpec) -> String {
    let body = spec.to_json();
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// A Möbius map onto the unit disk when `spec` is a disk or half-plane image.
pub fn disk_chart(spec: &DomainSpec) -> Option<MobiusMap> {
    let base = match spec.kind() {
        DomainKind::UnitDisk => MobiusMap::identity(),
        DomainKind::HalfPlane => {
            let i = Complex64::new(0.0, 1.0);
            MobiusMap::new(Complex64::new(1.0, 0.0), -i, Complex64::new(1.0, 0.0), i).expect("Cayley map")
        }
        _ => return None,
    };
    Some(match spec.map() {
        Some(f) => base.compose(&f.inverse()),
        None => base,
    })
}

fn sampling_box(spec: &DomainSpec) -> (Complex64, Complex64) {
    let c = Complex64::new;
    match spec.kind() {
        DomainKind::UnitDisk | DomainKind::PuncturedDisk => (c(-1.0, -1.0), c(1.0, 1.0)),
        DomainKind::HalfPlane => (c(-2.0, 0.0), c(2.0, 2.0)),
        DomainKind::Annulus { outer, .. } => (c(-outer, -outer), c(*outer, *outer)),
        DomainKind::ComplementOfFiniteSet { points } | DomainKind::SampledBoundary { samples: points, .. } => {
            let fin: Vec<Complex64> = points.iter().filter_map(|p| p.finite()).collect();
            let pad = if matches!(spec.kind(), DomainKind::ComplementOfFiniteSet { .. }) { 2.0 } else { 0.0 };
            let lo = fin.iter().fold(c(f64::INFINITY, f64::INFINITY), |a, z| c(a.re.min(z.re), a.im.min(z.im)));
            let hi = fin.iter().fold(c(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, z| c(a.re.max(z.re), a.im.max(z.im)));
            (lo - c(pad, pad), hi + c(pad, pad))
        }
    }
}

fn draw_pairs(spec: &DomainSpec, config: &SweepConfig, stream: u64) -> Result<Vec<(Complex64, Complex64)>, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let (lo, hi) = sampling_box(spec);
    let min_dist = config.min_distance_cells * config.cell_size;
    let mut draw = || -> Result<Complex64, AnalysisError> {
        for _ in 0..100_000 {
            let u = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
            let image = match spec.map() {
                Some(f) => f.apply(ExtendedPoint::Finite(u)),
                None => ExtendedPoint::Finite(u),
            };
            let Some(z) = image.finite() else { continue };
            if z.norm() > 1e3 || !spec.contains(image) {
                continue;
            }
            if spec.boundary_distance_unchecked(z).map_or(false, |d| d >= min_dist) {
                return Ok(z);
            }
        }
        Err(AnalysisError::Invalid(format!("no sample points found in {}", spec.label())))
    };
    (0..config.pairs_per_domain).map(|_| Ok((draw()?, draw()?))).collect()
}

fn sweep_grid(spec: &DomainSpec, points: &[Complex64], config: &SweepConfig) -> GridOptions {
    let auto = GridOptions::auto(spec, points, config.cell_size, config.stencil);
    let finite_punctures = spec
        .pieces()
        .iter()
        .filter(|p| matches!(p, BoundaryPiece::Point(ExtendedPoint::Finite(_))))
        .count();
    if matches!(auto.chart, Chart::LogPolar { .. }) && finite_punctures <= 1 {
        return auto;
    }
    let c = Complex64::new;
    let lo = points.iter().fold(c(f64::INFINITY, f64::INFINITY), |a, z| c(a.re.min(z.re), a.im.min(z.im)));
    let hi = points.iter().fold(c(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, z| c(a.re.max(z.re), a.im.max(z.im)));
    let pad = (0.25 * (hi - lo).norm()).max(1.0);
    GridOptions { chart: Chart::Plane, lower: lo - c(pad, pad), upper: hi + c(pad, pad), ..auto }
}

/// `lhs ≤ factor·rhs`.
struct Check {
    name: &'static str,
    lhs: Option<MetricValue>,
    factor: f64,
    rhs: Option<MetricValue>,
}

fn check(name: &'static str, lhs: Option<MetricValue>, factor: f64, rhs: Option<MetricValue>) -> Check {
    Check { name, lhs, factor, rhs }
}

/// Evaluates all metrics on seeded random pairs of every domain and flags
/// violations of the comparison inequalities.
pub fn inequality_sweep(specs: &[DomainSpec], config: &SweepConfig) -> Result<SweepReport, AnalysisError> {
    if !(config.cell_size > 0.0) {
        return Err(AnalysisError::Invalid(format!("cell size {}", config.cell_size)));
    }
    let mut rows = Vec::new();
    let mut domains = Vec::new();
    for (index, spec) in specs.iter().enumerate() {
        let pairs = draw_pairs(spec, config, index as u64)?;
        let points: Vec<Complex64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let options = sweep_grid(spec, &points, config);
        let k_solver = GeodesicSolver::new(spec, options, Density::Quasihyperbolic).map(GeodesicSolver::grid_only);
        let s_solver = GeodesicSolver::new(spec, options, Density::Ferrand).map(GeodesicSolver::grid_only);
        let chart = disk_chart(spec);
        let label = spec.label();
        let domain_rows: Vec<SweepRow> = pairs
            .par_iter()
            .enumerate()
            .map(|(pair, &(a, b))| {
                let (x, y) = (ExtendedPoint::Finite(a), ExtendedPoint::Finite(b));
                let mut errors = Vec::new();
                let mut keep = |name: &str, r: Result<MetricValue, String>| match r {
                    Ok(v) => Some(v),
                    Err(e) => {
                        errors.push(format!("{name}: {e}"));
                        None
                    }
                };
                let j = keep("j", j_metric(spec, x, y).map_err(|e| e.to_string()));
                let j_hat = keep("j_hat", j_hat_metric(spec, x, y).map_err(|e| e.to_string()));
                let delta = keep("delta", delta_metric(spec, x, y).map_err(|e| e.to_string()));
                let big_delta = delta.map(MetricValue::log1p);
                let geo = |solver: &Result<GeodesicSolver, crate::error::MetricError>| -> Result<MetricValue, String> {
                    match solver {
                        Ok(s) => s.distance(x, y).map(|g| g.metric_value()).map_err(|e| e.to_string()),
                        Err(e) => Err(e.to_string()),
                    }
                };
                let k = keep("k", geo(&k_solver));
                let mut sigma = keep("sigma", geo(&s_solver));
                if config.inject_fake_metric {
                    sigma = delta.map(|d| MetricValue::new(0.5 * d.value, 0.0));
                }
                let big_sigma = sigma.map(MetricValue::log1p);
                let h = match spec.kind() {
                    DomainKind::UnitDisk | DomainKind::HalfPlane | DomainKind::PuncturedDisk => {
                        keep("h", hyperbolic_metric(spec, x, y).map_err(|e| e.to_string()))
                    }
                    _ => None,
                };
                let (mu, lambda) = match &chart {
                    Some(f) if a != b => {
                        let (u, v) = (f.apply(x), f.apply(y));
                        (
                            keep("mu", mu_disk(u, v).map(MetricValue::exact).map_err(|e| e.to_string())),
                            keep("lambda", lambda_disk_via_tau(u, v).map(MetricValue::exact).map_err(|e| e.to_string())),
                        )
                    }
                    _ => (None, None),
                };
                let mut violations = Vec::new();
                let checks = [
                    check("j<=delta", j, 1.0, delta),
                    check("delta<=2j", delta, 2.0, j),
                    check("j<=2jhat", j, 2.0, j_hat),
                    check("j<=k", j, 1.0, k),
                    check("delta<=sigma", delta, 1.0, sigma),
                    check("k<=sigma", k, 1.0, sigma),
                    check("sigma<=2k", sigma, 2.0, k),
                    check("Delta<=Sigma", big_delta, 1.0, big_sigma),
                ];
                for c in checks {
                    if let (Some(l), Some(r)) = (c.lhs, c.rhs) {
                        let tol = l.error_bound + c.factor * r.error_bound + SWEEP_ABS_TOL + SWEEP_REL_TOL * l.value.abs();
                        if l.value > c.factor * r.value + tol {
                            violations.push(c.name.to_string());
                        }
                    }
                }
                if let (Some(s), Some(hv), true) = (sigma, h, chart.is_some()) {
                    if (s.value - hv.value).abs() > s.error_bound + hv.error_bound + SWEEP_ABS_TOL + SWEEP_REL_TOL * hv.value {
                        violations.push("sigma=h".to_string());
                    }
                }
                if let (Some(m), Some(l)) = (mu, lambda) {
                    if (m.value * l.value - 4.0).abs() > 4.0 * SWEEP_REL_TOL {
                        violations.push("mu*lambda=4".to_string());
                    }
                }
                SweepRow { domain: label.clone(), pair, x, y, j, j_hat, delta, big_delta, k, sigma, big_sigma, h, mu, lambda, violations, errors }
            })
            .collect();
        let empirical_b = domain_rows
            .iter()
            .filter_map(|r| match (r.mu, r.delta) {
                (Some(m), Some(d)) if d.value > 0.0 => Some(m.value / d.value),
                _ => None,
            })
            .reduce(f64::min);
        domains.push(DomainSummary {
            label,
            spec_hash: spec_hash(spec),
            pairs: domain_rows.len(),
            violations: domain_rows.iter().filter(|r| !r.violations.is_empty()).count(),
            empirical_b,
            c0_from_b: empirical_b.and_then(|b| thm12_constant(b, 2).ok()),
        });
        rows.extend(domain_rows);
    }
    let violations = domains.iter().map(|d| d.violations).sum();
    Ok(SweepReport { config: *config, domains, rows, violations })
}

/// Column names of [`SweepReport::to_csv`].
pub const SWEEP_COLUMNS: [&str; 26] = [
    "domain", "pair", "x", "y", "j", "j_err", "j_hat", "j_hat_err", "delta", "delta_err", "Delta", "Delta_err", "k",
    "k_bias", "sigma", "sigma_bias", "Sigma", "Sigma_bias", "h", "h_err", "mu", "mu_err", "lambda", "lambda_err",
    "violations", "errors",
];

fn cell(v: Option<MetricValue>) -> [serde_json::Value; 2] {
    match v {
        Some(m) => [serde_json::json!(m.value), serde_json::json!(m.error_bound)],
        None => [serde_json::Value::Null, serde_json::Value::Null],
    }
}

/// CSV rendering of a JSON cell; numbers keep their JSON digits.
pub fn csv_cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepReport {
    /// Rows in the order of [`SWEEP_COLUMNS`].
    pub fn table(&self) -> Vec<Vec<serde_json::Value>> {
        use serde_json::Value;
        self.rows
            .iter()
            .map(|r| {
                let mut out = vec![
                    Value::String(r.domain.clone()),
                    Value::from(r.pair),
                    Value::String(r.x.to_string()),
                    Value::String(r.y.to_string()),
                ];
                for v in [r.j, r.j_hat, r.delta, r.big_delta, r.k, r.sigma, r.big_sigma, r.h, r.mu, r.lambda] {
                    out.extend(cell(v));
                }
                out.push(Value::String(r.violations.join(";")));
                out.push(Value::String(r.errors.join(";")));
                out
            })
            .collect()
    }

    /// Metadata block: seed, resolution, tolerances and per-domain summaries.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.config.seed,
            "cell_size": self.config.cell_size,
            "stencil": self.config.stencil.directions(),
            "pairs_per_domain": self.config.pairs_per_domain,
            "min_distance_cells": self.config.min_distance_cells,
            "tolerances": { "absolute": SWEEP_ABS_TOL, "relative": SWEEP_REL_TOL, "plus": "reported error bounds" },
            "domains": self.domains,
            "violations": self.violations,
        })
    }

    /// CSV with a header row followed by a `# {json}` metadata line.
    pub fn to_csv(&self) -> String {
        let mut out = SWEEP_COLUMNS.join(",");
        out.push('\n');
        for row in self.table() {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        writeln!(out, "# {}", self.metadata()).expect("string write");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .table()
            .into_iter()
            .map(|row| {
                let map: serde_json::Map<String, serde_json::Value> = SWEEP_COLUMNS
                    .iter()
                    .zip(row)
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::json!({ "rows": rows, "metadata": self.metadata() })
    }
}
