//! Discrete conformal modulus of connecting curve families.
//!
//! A density `ρ` lives on the nodes of a [`GridGraph`]; a grid path has
//! `ρ`-length `Σ ½(ρ_i + ρ_j)·|e|` and the energy is `Σ ρ_i²·h²`. The modulus
//! of the family of `E`–`F` paths is the least energy under which every path
//! has length at least one. Plate nodes (`E` and `F`) count with weight
//! [`PLATE_WEIGHT`] in the energy.
//!
//! [`Method::Harmonic`] (the default) takes the slope of the discrete harmonic
//! potential between the plates and rescales it to be admissible.
//! [`Method::CuttingPlane`] solves the quadratic program by constraint
//! generation: Dijkstra finds the shortest paths under the current density,
//! the violated ones are added as constraints, and Hildreth's dual coordinate
//! ascent re-solves the restricted problem from a warm start.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::domains::{BoundaryPiece, DomainSpec};
use crate::error::{DomainError, ModulusError};
use crate::geometry::{ExtendedPoint, MobiusMap};
use crate::path_metrics::{ferrand_distance, quasihyperbolic_distance, Chart, GridGraph, GridOptions, Stencil};
use crate::special::gamma2;

pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-3;
pub const DEFAULT_INNER_TOL: f64 = 1e-8;
pub const MAX_ROUNDS: usize = 500;
/// Energy weight of a plate node, which sits on the edge of the carrier.
pub const PLATE_WEIGHT: f64 = 0.5;

/// Family of grid paths joining `E` to `F` inside a carrier grid.
#[derive(Clone, Debug)]
pub struct CurveFamilySpec {
    carrier: GridGraph,
    e: Vec<usize>,
    f: Vec<usize>,
    allowed: Vec<bool>,
    free: Vec<bool>,
    terminal: Vec<bool>,
    weight: Vec<f64>,
}

impl CurveFamilySpec {
    /// `Δ(E, F)` within the masked-in nodes of `carrier`.
    pub fn connect(carrier: GridGraph, e: Vec<usize>, f: Vec<usize>) -> Result<Self, ModulusError> {
        if e.is_empty() || f.is_empty() {
            return Err(ModulusError::InvalidFamily("plates must be nonempty".into()));
        }
        let n = carrier.len();
        let mut in_e = vec![false; n];
        for &i in &e {
            if i >= n {
                return Err(ModulusError::InvalidFamily(format!("node {i} outside the grid")));
            }
            in_e[i] = true;
        }
        for &i in &f {
            if i >= n {
                return Err(ModulusError::InvalidFamily(format!("node {i} outside the grid")));
            }
            if in_e[i] {
                return Err(ModulusError::InvalidFamily("plates must be disjoint".into()));
            }
        }
        let mut allowed = carrier.mask().to_vec();
        let mut free = carrier.mask().to_vec();
        let mut terminal = vec![false; n];
        for &i in e.iter().chain(&f) {
            allowed[i] = true;
            free[i] = false;
        }
        for &i in &f {
            terminal[i] = true;
        }
        let weight = (0..n).map(|i| if free[i] { 1.0 } else if allowed[i] { PLATE_WEIGHT } else { 0.0 }).collect();
        Ok(CurveFamilySpec { carrier, e, f, allowed, free, terminal, weight })
    }

    /// The same plates on a smaller carrier: nodes with `keep[i] == false` are dropped.
    pub fn restrict(&self, keep: &[bool]) -> Result<Self, ModulusError> {
        let e: Vec<usize> = self.e.iter().copied().filter(|&i| keep[i]).collect();
        let f: Vec<usize> = self.f.iter().copied().filter(|&i| keep[i]).collect();
        let mut family = Self::connect(self.carrier.clone(), e, f)?;
        for i in 0..family.allowed.len() {
            if !keep[i] {
                family.allowed[i] = false;
                family.free[i] = false;
                family.terminal[i] = false;
                family.weight[i] = 0.0;
            }
        }
        Ok(family)
    }

    pub fn carrier(&self) -> &GridGraph {
        &self.carrier
    }

    pub fn e(&self) -> &[usize] {
        &self.e
    }

    pub fn f(&self) -> &[usize] {
        &self.f
    }

    pub fn cell_area(&self) -> f64 {
        self.carrier.cell_size().powi(2)
    }

    /// Shortest `ρ`-length of an `E`–`F` path.
    pub fn shortest_length(&self, density: &[f64]) -> f64 {
        let sources: Vec<(usize, f64)> = self.e.iter().map(|&i| (i, 0.0)).collect();
        let tree = self.carrier.shortest_paths_until(&self.allowed, density, &sources, Some(&self.f), Some(&self.terminal));
        self.f.iter().map(|&i| tree.dist[i]).fold(f64::INFINITY, f64::min)
    }

    /// Whether some `E` node is a grid neighbor of some `F` node.
    pub fn plates_touch(&self) -> bool {
        let mut in_f = vec![false; self.carrier.len()];
        for &i in &self.f {
            in_f[i] = true;
        }
        self.e.iter().any(|&i| self.carrier.neighbors(i, &self.allowed).any(|(j, _)| in_f[j]))
    }

    /// Energy `Σ ρ²·h²` of a density.
    pub fn energy(&self, density: &[f64]) -> f64 {
        self.cell_area() * density.iter().zip(&self.weight).map(|(r, w)| w * r * r).sum::<f64>()
    }
}

/// How the discrete modulus is minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Gradient of the discrete harmonic potential, rescaled to be admissible.
    Harmonic,
    /// Shortest-path constraint generation with an exact restricted solve.
    CuttingPlane,
}

/// Solver tunables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub method: Method,
    pub feasibility_tol: f64,
    pub inner_tol: f64,
    pub max_rounds: usize,
    pub paths_per_round: usize,
    /// Minimum distance between the `F` ends of cuts added in one round, in cells.
    pub spacing_cells: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Harmonic,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            inner_tol: DEFAULT_INNER_TOL,
            max_rounds: MAX_ROUNDS,
            paths_per_round: 64,
            spacing_cells: 4.0,
        }
    }
}

/// Result of a modulus computation.
#[derive(Clone, Debug, Serialize)]
pub struct ModulusEstimate {
    /// Energy of `density`.
    pub value: f64,
    /// Per grid node; zero off the carrier and on the plates.
    #[serde(skip)]
    pub density: Vec<f64>,
    /// Shortest `ρ`-length over the family at termination.
    pub worst_path_length: f64,
    pub iterations: usize,
    /// Dual objective of the restricted problem.
    pub lower_bound: f64,
    /// Energy of `density / worst_path_length`, an admissible density.
    pub upper_bound: f64,
    pub constraints: usize,
    pub cell_size: f64,
    /// The plates are not joined by any path.
    pub empty_family: bool,
    /// Winning curve for the metric estimates.
    pub candidate: Option<String>,
}

impl ModulusEstimate {
    /// Recomputes `(worst path length, energy)` of the stored density.
    pub fn verify(&self, family: &CurveFamilySpec) -> (f64, f64) {
        (family.shortest_length(&self.density), family.energy(&self.density))
    }
}

struct Constraint {
    coef: Vec<(usize, f64)>,
    norm2: f64,
}

/// Discrete modulus with default tunables and the given feasibility tolerance.
pub fn discrete_modulus(family: &CurveFamilySpec, feasibility_tol: f64) -> Result<ModulusEstimate, ModulusError> {
    discrete_modulus_with(family, &SolverOptions { feasibility_tol, ..SolverOptions::default() })
}

pub fn discrete_modulus_with(family: &CurveFamilySpec, opts: &SolverOptions) -> Result<ModulusEstimate, ModulusError> {
    if family.plates_touch() {
        return Err(ModulusError::InvalidFamily("plates E and F are adjacent".into()));
    }
    match opts.method {
        Method::Harmonic => harmonic(family, opts),
        Method::CuttingPlane => cutting_plane(family, opts),
    }
}

fn empty_estimate(grid: &GridGraph, iterations: usize) -> ModulusEstimate {
    ModulusEstimate {
        value: 0.0,
        density: vec![0.0; grid.len()],
        worst_path_length: f64::INFINITY,
        iterations,
        lower_bound: 0.0,
        upper_bound: 0.0,
        constraints: 0,
        cell_size: grid.cell_size(),
        empty_family: true,
        candidate: None,
    }
}

/// Density `|∇u|` of the discrete harmonic potential with `u = 0` on `E` and
/// `u = 1` on `F`, rescaled on each connected piece of the carrier so that its
/// shortest path has length one. The unit current of the same potential gives
/// the dual lower bound `A/‖η‖²`, where `η_i` collects half the length-weighted
/// flow through the edges at node `i`.
fn harmonic(family: &CurveFamilySpec, opts: &SolverOptions) -> Result<ModulusEstimate, ModulusError> {
    let grid = &family.carrier;
    let n = grid.len();
    let h = grid.cell_size();
    let area = family.cell_area();
    let axes = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
    let neighbor = |i: usize, d: (i64, i64)| grid.offset_node(i, d.0, d.1).filter(|&j| family.allowed[j]);
    let mut fixed = vec![f64::NAN; n];
    for &i in &family.e {
        fixed[i] = 0.0;
    }
    for &i in &family.f {
        fixed[i] = 1.0;
    }
    let free: Vec<usize> = (0..n).filter(|&i| family.free[i]).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        slot[i] = k;
    }
    // L u = b over the free nodes, Neumann where the carrier ends
    let mut diag = vec![0.0; free.len()];
    let mut rhs = vec![0.0; free.len()];
    for (k, &i) in free.iter().enumerate() {
        for d in axes {
            if let Some(j) = neighbor(i, d) {
                diag[k] += 1.0;
                if !family.free[j] {
                    rhs[k] += fixed[j];
                }
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let i = free[k];
            let mut acc = diag[k] * x[k];
            for d in axes {
                if let Some(j) = neighbor(i, d) {
                    if family.free[j] {
                        acc -= x[slot[j]];
                    }
                }
            }
            *o = acc;
        });
    };
    let (solution, sweeps) = conjugate_gradient(&apply, &diag, &rhs, opts.inner_tol);
    let mut u = fixed.clone();
    for (k, &i) in free.iter().enumerate() {
        u[i] = solution[k];
    }
    // every edge then has ρ-length at least |Δu|, so each path has length ≥ 1
    let mut rho = vec![0.0; n];
    for i in 0..n {
        if family.weight[i] == 0.0 {
            continue;
        }
        let slope = grid.neighbors(i, &family.allowed).map(|(j, len)| (u[j] - u[i]).abs() / len).fold(0.0, f64::max);
        rho[i] = slope;
    }
    let components = components(family);
    let sources: Vec<(usize, f64)> = family.e.iter().map(|&i| (i, 0.0)).collect();
    let tree = grid.shortest_paths_until(&family.allowed, &rho, &sources, Some(&family.f), Some(&family.terminal));
    let pieces = components.iter().copied().max().map_or(0, |m| m + 1);
    let mut shortest = vec![f64::INFINITY; pieces];
    for &i in &family.f {
        let c = components[i];
        shortest[c] = shortest[c].min(tree.dist[i]);
    }
    if shortest.iter().all(|l| !l.is_finite()) {
        return Ok(empty_estimate(grid, sweeps));
    }
    for i in 0..n {
        let l = shortest[components[i]];
        rho[i] = if l.is_finite() && l > 0.0 { rho[i] / l } else { 0.0 };
    }
    // dual certificate from the unit current of each piece
    let mut current = vec![0.0; pieces];
    let mut eta = vec![0.0; n];
    for i in 0..n {
        if !family.allowed[i] {
            continue;
        }
        for d in [(1, 0), (0, 1)] {
            if let Some(j) = neighbor(i, d) {
                let flow = (u[j] - u[i]).abs();
                if family.weight[i] > 0.0 {
                    eta[i] += 0.5 * h * flow;
                }
                if family.weight[j] > 0.0 {
                    eta[j] += 0.5 * h * flow;
                }
                let (ei, ej) = (fixed[i] == 0.0 && !family.free[i], fixed[j] == 0.0 && !family.free[j]);
                if ei != ej {
                    current[components[i]] += flow;
                }
            }
        }
    }
    let mut norms = vec![0.0; pieces];
    for i in 0..n {
        if family.weight[i] > 0.0 {
            norms[components[i]] += eta[i] * eta[i] / family.weight[i];
        }
    }
    let lower_bound: f64 = (0..pieces)
        .filter(|&c| shortest[c].is_finite() && current[c] > 0.0)
        .map(|c| area * current[c] * current[c] / norms[c])
        .sum();
    let value = family.energy(&rho);
    let worst = family.shortest_length(&rho);
    Ok(ModulusEstimate {
        value,
        density: rho,
        worst_path_length: worst,
        iterations: sweeps,
        lower_bound: lower_bound.min(value),
        upper_bound: value,
        constraints: 0,
        cell_size: h,
        empty_family: false,
        candidate: None,
    })
}

/// Connected pieces of the carrier graph, by label.
fn components(family: &CurveFamilySpec) -> Vec<usize> {
    let grid = &family.carrier;
    let n = grid.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if !family.allowed[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for (j, _) in grid.neighbors(i, &family.allowed) {
                if label[j] == usize::MAX {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label.iter_mut().for_each(|l| {
        if *l == usize::MAX {
            *l = next;
        }
    });
    label
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive operator.
fn conjugate_gradient(apply: &dyn Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64], tol: f64) -> (Vec<f64>, usize) {
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(diag).map(|(v, d)| if *d > 0.0 { v / d } else { 0.0 }).collect() };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut ap = vec![0.0; m];
    for it in 0..10 * m.max(10) {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return (x, it);
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return (x, it);
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        z = precondition(&r);
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    (x, 10 * m.max(10))
}

/// Constraint generation with Hildreth's method on the restricted problem.
fn cutting_plane(family: &CurveFamilySpec, opts: &SolverOptions) -> Result<ModulusEstimate, ModulusError> {
    let grid = &family.carrier;
    let n = grid.len();
    let area = family.cell_area();
    let mut rho = vec![0.0; n];
    let mut lambda: Vec<f64> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();
    let sources: Vec<(usize, f64)> = family.e.iter().map(|&i| (i, 0.0)).collect();
    let unit: Vec<f64> = family.weight.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
    let target = 1.0 - opts.feasibility_tol;
    let mut worst = 0.0;
    for round in 0..opts.max_rounds {
        // Euclidean shortest paths seed the first round
        let weights = if round == 0 { &unit } else { &rho };
        let tree = grid.shortest_paths_until(&family.allowed, weights, &sources, Some(&family.f), Some(&family.terminal));
        let mut ends: Vec<(f64, usize)> = family.f.iter().map(|&i| (tree.dist[i], i)).collect();
        ends.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !ends[0].0.is_finite() {
            return Ok(empty_estimate(grid, round));
        }
        if round > 0 {
            worst = ends[0].0;
            log::debug!("round {round}: worst path {worst:.6}, {} cuts", constraints.len());
            if worst >= target {
                let value = family.energy(&rho);
                let dual = lambda.iter().sum::<f64>() - value;
                return Ok(ModulusEstimate {
                    value,
                    density: rho,
                    worst_path_length: worst,
                    iterations: round,
                    lower_bound: dual.min(value),
                    upper_bound: value / (worst * worst),
                    constraints: constraints.len(),
                    cell_size: grid.cell_size(),
                    empty_family: false,
                    candidate: None,
                });
            }
        }
        // spread the new cuts along F
        let spacing = opts.spacing_cells * grid.cell_size();
        let mut chosen: Vec<Complex64> = Vec::new();
        for &(d, end) in &ends {
            if chosen.len() >= opts.paths_per_round || (round > 0 && d >= target) {
                break;
            }
            let pos = grid.node_point(end);
            if chosen.iter().any(|c| (c - pos).norm() < spacing) {
                continue;
            }
            chosen.push(pos);
            let nodes = tree.trace(end);
            let mut coef: Vec<(usize, f64)> = Vec::new();
            for pair in nodes.windows(2) {
                let len = grid.node_position(pair[1]) - grid.node_position(pair[0]);
                let len = grid.cell_size() * ((len.re / grid.cell_size()).round().powi(2) + wrapped_rows(len.im, grid).powi(2)).sqrt();
                for &k in pair {
                    if family.weight[k] > 0.0 {
                        coef.push((k, 0.5 * len));
                    }
                }
            }
            coef.sort_by_key(|c| c.0);
            coef.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let norm2: f64 = coef.iter().map(|c| c.1 * c.1 / family.weight[c.0]).sum();
            if norm2 == 0.0 {
                return Err(ModulusError::InvalidFamily("plates E and F are adjacent".into()));
            }
            constraints.push(Constraint { coef, norm2 });
            lambda.push(0.0);
        }
        hildreth(&constraints, &family.weight, &mut lambda, &mut rho, area, opts.inner_tol);
    }
    Err(ModulusError::NonConvergence {
        iterations: opts.max_rounds,
        best_value: family.energy(&rho),
        worst_path_length: worst,
    })
}

fn wrapped_rows(dy: f64, grid: &GridGraph) -> f64 {
    let rows = (dy / grid.cell_size()).round();
    let h = grid.height() as f64;
    if matches!(grid.chart(), Chart::LogPolar { .. }) && rows.abs() > h / 2.0 {
        rows - h * rows.signum()
    } else {
        rows
    }
}

/// Dual coordinate ascent for `min A‖ρ‖²` subject to `c_kᵀρ ≥ 1`, keeping `ρ = Cᵀλ/(2A)`.
fn hildreth(constraints: &[Constraint], weight: &[f64], lambda: &mut [f64], rho: &mut [f64], area: f64, tol: f64) {
    const MAX_SWEEPS: usize = 20_000;
    for sweep in 0..MAX_SWEEPS {
        let mut residual: f64 = 0.0;
        for (k, c) in constraints.iter().enumerate() {
            let s: f64 = c.coef.iter().map(|&(i, a)| a * rho[i]).sum();
            let gap = 1.0 - s;
            let old = lambda[k];
            let new = (old + 2.0 * area * gap / c.norm2).max(0.0);
            let kkt = if old > 0.0 { gap.abs() } else { gap.max(0.0) };
            residual = residual.max(kkt);
            if new != old {
                let step = (new - old) / (2.0 * area);
                for &(i, a) in &c.coef {
                    rho[i] += step * a / weight[i];
                }
                lambda[k] = new;
            }
        }
        if residual < tol {
            log::debug!("hildreth converged after {sweep} sweeps");
            break;
        }
        if sweep + 1 == MAX_SWEEPS {
            log::debug!("hildreth stopped at residual {residual:e}");
        }
    }
    for r in rho.iter_mut() {
        if *r < 0.0 {
            *r = 0.0;
        }
    }
}

/// `2π / log(outer/inner)`, the capacity of a round annulus.
pub fn ring_capacity_exact(inner: f64, outer: f64) -> Result<f64, ModulusError> {
    if !(inner > 0.0 && outer > inner && outer.is_finite()) {
        return Err(DomainError::Invalid(format!("need 0 < inner < outer, got {inner}, {outer}")).into());
    }
    Ok(2.0 * PI / (outer / inner).ln())
}

/// Bounding box of the finite boundary pieces of a domain.
fn boundary_box(spec: &DomainSpec) -> Option<(Complex64, Complex64)> {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for piece in spec.pieces() {
        let (c, r) = match *piece {
            BoundaryPiece::Circle { center, radius } => (center, radius),
            BoundaryPiece::Point(ExtendedPoint::Finite(q)) => (q, 0.0),
            _ => return None,
        };
        lo = Complex64::new(lo.re.min(c.re - r), lo.im.min(c.im - r));
        hi = Complex64::new(hi.re.max(c.re + r), hi.im.max(c.im + r));
    }
    lo.re.is_finite().then_some((lo, hi))
}

fn padded(lo: Complex64, hi: Complex64, pad: f64) -> (Complex64, Complex64) {
    (lo - Complex64::new(pad, pad), hi + Complex64::new(pad, pad))
}

fn carrier_grid(spec: &DomainSpec, lo: Complex64, hi: Complex64, cell: f64) -> Result<GridGraph, ModulusError> {
    let opts = GridOptions { chart: Chart::Plane, lower: lo, upper: hi, cell_size: cell, stencil: Stencil::Sixteen, margin: 0.0 };
    Ok(GridGraph::build(spec, opts)?)
}

/// Masked-out nodes with a masked-in node among their eight neighbors.
fn frontier(grid: &GridGraph) -> Vec<usize> {
    let ring = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    (0..grid.len())
        .filter(|&i| !grid.mask()[i] && ring.iter().any(|&(dx, dy)| grid.offset_node(i, dx, dy).map_or(false, |j| grid.mask()[j])))
        .collect()
}

/// Connecting family between the two boundary circles of a (possibly
/// Möbius-mapped) annulus, gridded in the plane.
pub fn annulus_family(inner: f64, outer: f64, map: Option<&MobiusMap>, cell_size: f64) -> Result<CurveFamilySpec, ModulusError> {
    let mut spec = DomainSpec::annulus(inner, outer)?;
    if let Some(f) = map {
        spec = spec.mapped(f);
    }
    let (lo, hi) = boundary_box(&spec).ok_or_else(|| ModulusError::InvalidFamily("mapped ring is unbounded".into()))?;
    let (lo, hi) = padded(lo, hi, 3.0 * cell_size);
    let grid = carrier_grid(&spec, lo, hi, cell_size)?;
    let back = map.map_or(MobiusMap::identity(), MobiusMap::inverse);
    let split = (inner * outer).sqrt();
    let (mut e, mut f) = (Vec::new(), Vec::new());
    for i in frontier(&grid) {
        match back.apply(grid.node_point(i).into()) {
            ExtendedPoint::Finite(w) if w.norm() < split => e.push(i),
            _ => f.push(i),
        }
    }
    CurveFamilySpec::connect(grid, e, f)
}

/// Numerical capacity of the ring between the boundary circles of an annulus.
pub fn annulus_modulus_numeric(
    inner: f64,
    outer: f64,
    map: Option<&MobiusMap>,
    cell_size: f64,
    opts: &SolverOptions,
) -> Result<ModulusEstimate, ModulusError> {
    discrete_modulus_with(&annulus_family(inner, outer, map, cell_size)?, opts)
}

/// A Möbius chart in which the configuration is bounded, with the image domain.
struct ModulusChart {
    map: MobiusMap,
    spec: DomainSpec,
}

impl ModulusChart {
    fn new(spec: &DomainSpec, key: &[ExtendedPoint], curves: &[Vec<ExtendedPoint>]) -> Self {
        let unbounded = spec.contains(ExtendedPoint::Infinity)
            || spec.infinity_on_boundary()
            || curves.iter().flatten().any(ExtendedPoint::is_infinite);
        let map = if unbounded {
            let finite: Vec<Complex64> = key
                .iter()
                .chain(curves.iter().flatten())
                .filter_map(ExtendedPoint::finite)
                .chain(spec.pieces().iter().filter_map(|p| match *p {
                    BoundaryPiece::Point(ExtendedPoint::Finite(q)) => Some(q),
                    _ => None,
                }))
                .collect();
            let c = finite.iter().sum::<Complex64>() / finite.len().max(1) as f64;
            let r = finite.iter().map(|z| (z - c).norm()).fold(1.0, f64::max);
            let mut best = (f64::NEG_INFINITY, c + Complex64::new(0.0, 2.0 * r));
            for k in 0..16 {
                let w0 = c + Complex64::from_polar(2.0 * r, 0.1 + k as f64 * PI / 8.0);
                if !spec.contains(w0.into()) {
                    continue;
                }
                let score = finite.iter().map(|z| (z - w0).norm()).fold(f64::INFINITY, f64::min);
                if score > best.0 {
                    best = (score, w0);
                }
            }
            MobiusMap::pole_at(best.1)
        } else {
            MobiusMap::identity()
        };
        // rescale so the interesting part spans about unit size
        let pts: Vec<Complex64> = key
            .iter()
            .chain(curves.iter().flatten())
            .filter_map(|p| map.apply(*p).finite())
            .collect();
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for z in &pts {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let mapped = spec.mapped(&map);
        if let Some((blo, bhi)) = boundary_box(&mapped) {
            lo = Complex64::new(lo.re.min(blo.re), lo.im.min(blo.im));
            hi = Complex64::new(hi.re.max(bhi.re), hi.im.max(bhi.im));
        }
        let size = (hi - lo).re.max((hi - lo).im).max(1e-300);
        let scale = 2.0 / size;
        let center = 0.5 * (lo + hi);
        let fit = MobiusMap::affine(Complex64::new(scale, 0.0), -center * scale).expect("nonzero scale");
        let map = fit.compose(&map);
        ModulusChart { map, spec: spec.mapped(&map) }
    }

    fn grid(&self, cell: f64) -> Result<GridGraph, ModulusError> {
        let (lo, hi) = match boundary_box(&self.spec) {
            Some((lo, hi)) if !self.spec.contains(ExtendedPoint::Infinity) => padded(lo, hi, 3.0 * cell),
            _ => padded(Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0), 1.0),
        };
        carrier_grid(&self.spec, lo, hi, cell)
    }

    /// Chart points along a plane curve, no farther apart than `step`.
    fn trace(&self, curve: &[ExtendedPoint], step: f64) -> Vec<Complex64> {
        let mut out = Vec::new();
        for pair in curve.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let at = |s: f64| -> Complex64 {
                let p = match (a, b) {
                    (ExtendedPoint::Finite(a), ExtendedPoint::Finite(b)) => ExtendedPoint::Finite(a + (b - a) * s),
                    (ExtendedPoint::Finite(a), ExtendedPoint::Infinity) => {
                        if s >= 1.0 {
                            ExtendedPoint::Infinity
                        } else {
                            let dir = pair_direction(curve, a);
                            ExtendedPoint::Finite(a + dir * (s / (1.0 - s)))
                        }
                    }
                    _ => ExtendedPoint::Infinity,
                };
                self.map.apply(p).finite().unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            };
            let mut stack = vec![(0.0, 1.0)];
            let mut pieces = Vec::new();
            while let Some((s0, s1)) = stack.pop() {
                let (p0, p1) = (at(s0), at(s1));
                if (p1 - p0).norm() <= step || s1 - s0 < 1e-12 {
                    pieces.push((s0, p0));
                } else {
                    let m = 0.5 * (s0 + s1);
                    stack.push((m, s1));
                    stack.push((s0, m));
                }
            }
            out.extend(pieces.into_iter().map(|(_, p)| p));
            out.push(at(1.0));
        }
        if curve.len() == 1 {
            out.extend(self.map.apply(curve[0]).finite());
        }
        out.retain(|z| z.re.is_finite() && z.im.is_finite());
        out
    }
}

fn pair_direction(curve: &[ExtendedPoint], a: Complex64) -> Complex64 {
    // rays to infinity are stored as [start, point on the ray, ∞]
    let finite: Vec<Complex64> = curve.iter().filter_map(ExtendedPoint::finite).collect();
    finite
        .windows(2)
        .rev()
        .find(|w| w[1] == a && w[0] != a)
        .map(|w| (a - w[0]) / (a - w[0]).norm())
        .unwrap_or(Complex64::new(1.0, 0.0))
}

/// Grid nodes within `radius` of a chart polyline.
fn plate(grid: &GridGraph, pts: &[Complex64], radius: f64) -> Vec<usize> {
    let cell = grid.cell_size();
    let mut flags = vec![false; grid.len()];
    let origin = grid.node_position(0);
    let r = (radius / cell).ceil() as i64;
    for &z in pts {
        let fx = ((z.re - origin.re) / cell).round() as i64;
        let fy = ((z.im - origin.im) / cell).round() as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (fx + dx, fy + dy);
                if x < 0 || y < 0 || x >= grid.width() as i64 || y >= grid.height() as i64 {
                    continue;
                }
                let i = y as usize * grid.width() + x as usize;
                if (grid.node_position(i) - z).norm() <= radius {
                    flags[i] = true;
                }
            }
        }
    }
    (0..grid.len()).filter(|&i| flags[i]).collect()
}

const PLATE_RADIUS: f64 = 0.5;

fn segment_inside(spec: &DomainSpec, a: Complex64, b: Complex64) -> bool {
    let steps = 256;
    (0..=steps).all(|k| {
        let z = a + (b - a) * (k as f64 / steps as f64);
        spec.contains(z.into())
    }) && spec.pieces().iter().all(|p| match *p {
        BoundaryPiece::Point(ExtendedPoint::Finite(q)) => {
            let t = (((q - a) * (b - a).conj()).re / (b - a).norm_sqr().max(1e-300)).clamp(0.0, 1.0);
            (a + (b - a) * t - q).norm() > 0.0
        }
        _ => true,
    })
}

/// Estimate of `μ_G(x,y)`: the least modulus of `Δ(C, ∂G; G)` over a menu of
/// connecting curves `C`. It bounds the true value from above up to grid error.
pub fn mu_metric_estimate(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<ModulusEstimate, ModulusError> {
    let zx = x.finite().ok_or(DomainError::InfinityChart)?;
    let zy = y.finite().ok_or(DomainError::InfinityChart)?;
    for p in [x, y] {
        if !spec.contains(p) {
            return Err(DomainError::OutsideDomain(p.to_string()).into());
        }
    }
    if spec.pieces().iter().all(|p| matches!(p, BoundaryPiece::Point(_))) {
        // finitely many boundary points carry no capacity
        let grid = ModulusChart::new(spec, &[x, y], &[]).grid(cell_size)?;
        return Ok(ModulusEstimate { candidate: Some("polar-boundary".into()), ..empty_estimate(&grid, 0) });
    }
    let mut candidates: Vec<(String, Vec<ExtendedPoint>)> = Vec::new();
    if segment_inside(spec, zx, zy) {
        candidates.push(("segment".into(), vec![x, y]));
    }
    if zx != zy {
        if let Ok(r) = quasihyperbolic_distance(spec, x, y, cell_size) {
            candidates.push(("k-geodesic".into(), r.path));
        }
        if let Ok(r) = ferrand_distance(spec, x, y, cell_size) {
            candidates.push(("sigma-geodesic".into(), r.path));
        }
    } else {
        candidates.push(("point".into(), vec![x]));
    }
    let distinct = dedupe(candidates, cell_size);
    let mut best: Option<ModulusEstimate> = None;
    for (name, curve) in distinct {
        let chart = ModulusChart::new(spec, &[x, y], std::slice::from_ref(&curve));
        let grid = chart.grid(cell_size)?;
        let trace = chart.trace(&curve, 0.5 * cell_size);
        let e = plate(&grid, &trace, PLATE_RADIUS * cell_size);
        let in_e: std::collections::HashSet<usize> = e.iter().copied().collect();
        let f: Vec<usize> = frontier(&grid).into_iter().filter(|i| !in_e.contains(i)).collect();
        // a candidate hugging the chart frontier leaves no room for plates
        let Ok(family) = CurveFamilySpec::connect(grid, e, f) else { continue };
        let mut est = discrete_modulus(&family, DEFAULT_FEASIBILITY_TOL)?;
        est.candidate = Some(name);
        if best.as_ref().map_or(true, |b| est.value < b.value) {
            best = Some(est);
        }
    }
    best.ok_or_else(|| ModulusError::InvalidFamily("no connecting curve inside the domain".into()))
}

fn dedupe(candidates: Vec<(String, Vec<ExtendedPoint>)>, cell: f64) -> Vec<(String, Vec<ExtendedPoint>)> {
    let mut kept: Vec<(String, Vec<ExtendedPoint>)> = Vec::new();
    for (name, curve) in candidates {
        let pts: Vec<Complex64> = curve.iter().filter_map(ExtendedPoint::finite).collect();
        let close = kept.iter().any(|(_, other)| {
            let other: Vec<Complex64> = other.iter().filter_map(ExtendedPoint::finite).collect();
            hausdorff(&pts, &other) < cell
        });
        if !close {
            kept.push((name, curve));
        }
    }
    kept
}

fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_way = |p: &[Complex64], q: &[Complex64]| {
        p.iter()
            .map(|z| {
                q.windows(2)
                    .map(|s| segment_distance(*z, s[0], s[1]))
                    .chain(q.first().map(|w| (z - w).norm()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let t = (((z - a) * (b - a).conj()).re / (b - a).norm_sqr().max(1e-300)).clamp(0.0, 1.0);
    (a + (b - a) * t - z).norm()
}

/// The ray from `start` in direction `dir` up to its first boundary point.
fn ray_to_boundary(spec: &DomainSpec, start: Complex64, dir: Complex64) -> Option<Vec<ExtendedPoint>> {
    let dir = dir / dir.norm();
    let mut t = 0.0;
    for _ in 0..10_000 {
        let z = start + dir * t;
        let d = spec.boundary_distance_unchecked(z).ok()?;
        if d < 1e-12 * (1.0 + z.norm()) {
            return Some(vec![start.into(), z.into()]);
        }
        t += d;
        if t > 1e8 * (1.0 + start.norm()) {
            break;
        }
    }
    spec.infinity_on_boundary().then(|| vec![start.into(), (start + dir).into(), ExtendedPoint::Infinity])
}

/// Boundary-reaching rays from `z`: toward the nearest boundary point, and away from `other`.
fn rays(spec: &DomainSpec, z: Complex64, other: Complex64) -> Vec<(String, Vec<ExtendedPoint>)> {
    let mut out = Vec::new();
    let away = if z != other { z - other } else { Complex64::new(1.0, 0.0) };
    if let Some(r) = ray_to_boundary(spec, z, away) {
        out.push(("away".to_string(), r));
    }
    let nearest = spec
        .pieces()
        .iter()
        .filter_map(|p| nearest_point(p, z))
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()));
    if let Some(q) = nearest {
        if (q - z).norm() > 0.0 {
            if let Some(r) = ray_to_boundary(spec, z, q - z) {
                if !out.iter().any(|(_, c)| hausdorff_ext(c, &r) < 1e-9) {
                    out.push(("nearest".to_string(), r));
                }
            }
        }
    }
    out
}

fn hausdorff_ext(a: &[ExtendedPoint], b: &[ExtendedPoint]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(p, q)| if p.approx_eq(q) { 0.0 } else { f64::INFINITY }).fold(0.0, f64::max)
}

fn nearest_point(piece: &BoundaryPiece, z: Complex64) -> Option<Complex64> {
    match *piece {
        BoundaryPiece::Point(p) => p.finite(),
        BoundaryPiece::Circle { center, radius } => {
            let d = z - center;
            let u = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
            Some(center + u * radius)
        }
        BoundaryPiece::Line { through, direction } => {
            let t = ((z - through) * direction.conj()).re;
            Some(through + direction * t)
        }
    }
}

fn curves_meet(a: &[ExtendedPoint], b: &[ExtendedPoint]) -> bool {
    let (ea, eb) = (a.last().expect("nonempty"), b.last().expect("nonempty"));
    if ea.approx_eq(eb) {
        return true;
    }
    let fa: Vec<Complex64> = a.iter().filter_map(ExtendedPoint::finite).collect();
    let fb: Vec<Complex64> = b.iter().filter_map(ExtendedPoint::finite).collect();
    fa.windows(2).any(|s| fb.windows(2).any(|t| segments_cross(s[0], s[1], t[0], t[1])))
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let cross = |u: Complex64, v: Complex64| u.re * v.im - u.im * v.re;
    let (d1, d2) = (cross(b - a, c - a), cross(b - a, d - a));
    let (d3, d4) = (cross(d - c, a - c), cross(d - c, b - c));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Estimate of `λ_G(x,y)`: the least modulus of `Δ(C_x, C_y; G)` over pairs of
/// boundary-reaching rays from `x` and from `y`.
pub fn lambda_metric_estimate(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<ModulusEstimate, ModulusError> {
    let zx = x.finite().ok_or(DomainError::InfinityChart)?;
    let zy = y.finite().ok_or(DomainError::InfinityChart)?;
    for p in [x, y] {
        if !spec.contains(p) {
            return Err(DomainError::OutsideDomain(p.to_string()).into());
        }
    }
    if zx == zy {
        return Err(ModulusError::InvalidFamily("λ is infinite at coincident points".into()));
    }
    let mut best: Option<ModulusEstimate> = None;
    for (nx, cx) in rays(spec, zx, zy) {
        for (ny, cy) in rays(spec, zy, zx) {
            if curves_meet(&cx, &cy) {
                continue;
            }
            let chart = ModulusChart::new(spec, &[x, y], &[cx.clone(), cy.clone()]);
            let grid = chart.grid(cell_size)?;
            let e = plate(&grid, &chart.trace(&cx, 0.5 * cell_size), PLATE_RADIUS * cell_size);
            let f_all = plate(&grid, &chart.trace(&cy, 0.5 * cell_size), PLATE_RADIUS * cell_size);
            let in_e: std::collections::HashSet<usize> = e.iter().copied().collect();
            let f: Vec<usize> = f_all.into_iter().filter(|i| !in_e.contains(i)).collect();
            let family = CurveFamilySpec::connect(grid, e, f)?;
            let mut est = discrete_modulus(&family, DEFAULT_FEASIBILITY_TOL)?;
            est.candidate = Some(format!("{nx}/{ny}"));
            if best.as_ref().map_or(true, |b| est.value < b.value) {
                best = Some(est);
            }
        }
    }
    best.ok_or_else(|| ModulusError::InvalidFamily("no disjoint pair of boundary-reaching rays".into()))
}

/// Modulus of the curves joining `[0, 1/t]` to the unit circle in the disk,
/// whose exact value is `γ₂(t)`.
pub fn grotzsch_capacity_numeric(t: f64, cell_size: f64) -> Result<ModulusEstimate, ModulusError> {
    gamma2(t).map_err(|_| DomainError::Invalid(format!("need t > 1, got {t}")))?;
    let disk = DomainSpec::unit_disk();
    let chart = ModulusChart { map: MobiusMap::identity(), spec: disk.clone() };
    let grid = chart.grid(cell_size)?;
    let segment = [ExtendedPoint::xy(0.0, 0.0), ExtendedPoint::xy(1.0 / t, 0.0)];
    let e = plate(&grid, &chart.trace(&segment, 0.5 * cell_size), PLATE_RADIUS * cell_size);
    let in_e: std::collections::HashSet<usize> = e.iter().copied().collect();
    let f: Vec<usize> = frontier(&grid).into_iter().filter(|i| !in_e.contains(i)).collect();
    let family = CurveFamilySpec::connect(grid, e, f)?;
    let mut est = discrete_modulus(&family, DEFAULT_FEASIBILITY_TOL)?;
    est.candidate = Some("segment".into());
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn exact_ring_capacity() {
        assert!((ring_capacity_exact(1.0, E).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((ring_capacity_exact(1.0, E * E).unwrap() - PI).abs() < 1e-12);
        assert!((ring_capacity_exact(2.0, 2.0 * E).unwrap() - ring_capacity_exact(1.0, E).unwrap()).abs() < 1e-12);
        assert!(ring_capacity_exact(2.0, 1.0).is_err());
        assert!(ring_capacity_exact(0.0, 1.0).is_err());
    }

    #[test]
    fn connect_validates_plates() {
        let opts = GridOptions {
            chart: Chart::Plane,
            lower: Complex64::new(-1.0, -1.0),
            upper: Complex64::new(1.0, 1.0),
            cell_size: 0.1,
            stencil: Stencil::Eight,
            margin: 0.0,
        };
        let grid = GridGraph::build(&DomainSpec::unit_disk(), opts).unwrap();
        assert!(CurveFamilySpec::connect(grid.clone(), vec![], vec![1]).is_err());
        assert!(CurveFamilySpec::connect(grid.clone(), vec![3], vec![3]).is_err());
        assert!(CurveFamilySpec::connect(grid, vec![1], vec![2]).is_ok());
    }

    #[test]
    fn coarse_annulus_certificate() {
        let est = annulus_modulus_numeric(1.0, E, None, 0.08, &SolverOptions::default()).unwrap();
        assert!(est.worst_path_length >= 1.0 - DEFAULT_FEASIBILITY_TOL);
        assert!(est.lower_bound <= est.value + 1e-9 && est.value <= est.upper_bound + 1e-12);
        assert!((est.value - 2.0 * PI).abs() < 0.05 * 2.0 * PI, "{}", est.value);
    }
}
