//! Conformally invariant metrics of planar domains.
//!
//! The crate is layered bottom-up:
//!
//! * [`geometry`]: extended-plane points, chordal metric, cross-ratios, Möbius maps.
//! * [`special`]: AGM-based elliptic integrals, `μ(r)`, `γ₂`, `τ₂`, disk modulus metrics.
//! * [`domains`]: domains with exact or sampled boundary oracles.
//! * [`point_metrics`]: `j`, `ĵ`, `δ`, `Δ`, the Ferrand density and exact hyperbolic metrics.
//! * [`path_metrics`]: quasihyperbolic and Ferrand distances by grid shortest paths.
//! * [`modulus`]: discrete modulus of curve families by harmonic potentials or constraint generation.
//! * [`analysis`]: uniform-perfectness scans, series bounds and inequality sweeps.

pub mod analysis;
pub mod domains;
pub mod error;
pub mod geometry;
pub mod modulus;
pub mod path_metrics;
pub mod point_metrics;
pub mod special;

pub use domains::{BoundaryView, DomainKind, DomainSpec};
pub use error::{AnalysisError, DomainError, GeometryError, MetricError, ModulusError, SpecialError};
pub use geometry::{ExtendedPoint, MobiusMap};
pub use point_metrics::MetricValue;
