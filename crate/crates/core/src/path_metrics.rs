//! Quasihyperbolic and Ferrand distances as shortest paths.
//!
//! A query runs in two stages. Dijkstra on a masked grid (8- or 16-neighbor
//! stencil, trapezoidal edge weights) picks the homotopy class and a path
//! within a few percent of optimal. The path is then resampled as a polyline
//! and its length, integrated with Simpson's rule against the exact density,
//! is minimized by L-BFGS on successively finer polylines. Every polyline is
//! checked to stay inside the domain, so the final value is the length of an
//! actual curve.
//!
//! Grids live in a [`Chart`]: the plane itself, or logarithmic coordinates
//! `z = c + e^w` around a boundary point `c`, which resolve neighborhoods of
//! punctures at all scales with a uniform cell size.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::domains::{BoundaryPiece, DomainSpec};
use crate::error::{DomainError, MetricError};
use crate::geometry::ExtendedPoint;
use crate::point_metrics::{delta_metric, ferrand_density_at, MetricValue};

/// Neighborhood used for grid edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stencil {
    Eight,
    Sixteen,
}

const OFFSETS_8: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const OFFSETS_16: [(i64, i64); 16] = [
    (1, 0),
    (2, 1),
    (1, 1),
    (1, 2),
    (0, 1),
    (-1, 2),
    (-1, 1),
    (-2, 1),
    (-1, 0),
    (-2, -1),
    (-1, -1),
    (-1, -2),
    (0, -1),
    (1, -2),
    (1, -1),
    (2, -1),
];

impl Stencil {
    pub fn offsets(&self) -> &'static [(i64, i64)] {
        match self {
            Stencil::Eight => &OFFSETS_8,
            Stencil::Sixteen => &OFFSETS_16,
        }
    }

    /// Worst-case ratio of grid length to Euclidean length for a straight
    /// segment: `1/cos` of half the largest angular gap between directions.
    pub fn bias_factor(&self) -> f64 {
        match self {
            Stencil::Eight => 1.0 / (PI / 8.0).cos(),
            Stencil::Sixteen => 1.0 / (0.5 * 0.5f64.atan()).cos(),
        }
    }

    pub fn directions(&self) -> u32 {
        self.offsets().len() as u32
    }

    pub fn from_directions(n: u32) -> Option<Self> {
        match n {
            8 => Some(Stencil::Eight),
            16 => Some(Stencil::Sixteen),
            _ => None,
        }
    }
}

/// Coordinates in which a grid is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Chart {
    Plane,
    /// `z = center + e^w`; the imaginary part of `w` is periodic.
    LogPolar { center: Complex64 },
}

impl Chart {
    pub fn to_plane(&self, w: Complex64) -> Complex64 {
        match *self {
            Chart::Plane => w,
            Chart::LogPolar { center } => center + w.exp(),
        }
    }

    pub fn from_plane(&self, z: Complex64) -> Complex64 {
        match *self {
            Chart::Plane => z,
            Chart::LogPolar { center } => (z - center).ln(),
        }
    }

    /// `|dz/dw|`.
    pub fn scale(&self, w: Complex64) -> f64 {
        match *self {
            Chart::Plane => 1.0,
            Chart::LogPolar { .. } => w.re.exp(),
        }
    }

    /// Radius of a chart disk around `w` whose image avoids a plane disk of radius `d` around `z`.
    fn safe_radius(&self, z: Complex64, d: f64) -> f64 {
        match *self {
            Chart::Plane => d,
            // |e^ζ − e^w| ≤ |e^w|(e^{|ζ−w|} − 1)
            Chart::LogPolar { center } => (d / (z - center).norm()).ln_1p(),
        }
    }

    fn periodic(&self) -> bool {
        matches!(self, Chart::LogPolar { .. })
    }
}

/// Which conformal density a grid carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Density {
    /// `1/d_G`
    Quasihyperbolic,
    /// `w_G`
    Ferrand,
}

/// Layout of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridOptions {
    pub chart: Chart,
    /// Lower-left and upper-right corners in chart coordinates.
    pub lower: Complex64,
    pub upper: Complex64,
    pub cell_size: f64,
    pub stencil: Stencil,
    /// Masked-in nodes keep a chart distance of at least `margin·cell_size` from `∂G`.
    pub margin: f64,
}

impl GridOptions {
    /// A layout covering `points` with room for geodesics to bend.
    pub fn auto(spec: &DomainSpec, points: &[Complex64], cell_size: f64, stencil: Stencil) -> Self {
        let chart = choose_chart(spec, points, cell_size);
        let (lower, upper) = match chart {
            Chart::Plane => plane_box(spec, points),
            Chart::LogPolar { center } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for p in points {
                    let r = (p - center).norm().ln();
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                for piece in spec.pieces() {
                    if let BoundaryPiece::Point(ExtendedPoint::Finite(q)) = piece {
                        let r = (q - center).norm();
                        if r > 0.0 {
                            hi = hi.max(r.ln());
                        }
                    }
                }
                (Complex64::new(lo - 1.0, -PI), Complex64::new(hi + 1.5, PI))
            }
        };
        GridOptions { chart, lower, upper, cell_size, stencil, margin: 1.0 }
    }
}

fn choose_chart(spec: &DomainSpec, points: &[Complex64], cell_size: f64) -> Chart {
    let mut best: Option<(f64, Complex64)> = None;
    for piece in spec.pieces() {
        if let BoundaryPiece::Point(ExtendedPoint::Finite(q)) = piece {
            let near = points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(d, _)| near < d) {
                best = Some((near, *q));
            }
        }
    }
    match best {
        Some((near, center)) if near < 20.0 * cell_size => Chart::LogPolar { center },
        _ => Chart::Plane,
    }
}

fn plane_box(spec: &DomainSpec, points: &[Complex64]) -> (Complex64, Complex64) {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |z: Complex64| {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    };
    for &p in points {
        grow(p);
    }
    let spread = (hi - lo).norm();
    let reach = points
        .iter()
        .filter_map(|&p| spec.boundary_distance_unchecked(p).ok())
        .fold(0.0, f64::max);
    let pad = spread.max(reach).max(1e-3);
    let (mut a, mut b) = (lo - Complex64::new(pad, pad), hi + Complex64::new(pad, pad));
    // bounded domains never need more than their own extent
    if !spec.contains(ExtendedPoint::Infinity) && !spec.infinity_on_boundary() {
        let mut blo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut bhi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for piece in spec.pieces() {
            let (c, r) = match *piece {
                BoundaryPiece::Circle { center, radius } => (center, radius),
                BoundaryPiece::Point(ExtendedPoint::Finite(q)) => (q, 0.0),
                _ => continue,
            };
            blo = Complex64::new(blo.re.min(c.re - r), blo.im.min(c.im - r));
            bhi = Complex64::new(bhi.re.max(c.re + r), bhi.im.max(c.im + r));
        }
        a = Complex64::new(a.re.max(blo.re), a.im.max(blo.im));
        b = Complex64::new(b.re.min(bhi.re), b.im.min(bhi.im));
    }
    (a, b)
}

/// A rectangular grid over a chart with a membership mask and node densities.
#[derive(Clone, Debug)]
pub struct GridGraph {
    spec: DomainSpec,
    options: GridOptions,
    origin: Complex64,
    cell: f64,
    width: usize,
    height: usize,
    mask: Vec<bool>,
    weight: Vec<f64>,
    density: Option<Density>,
}

/// Output of a shortest-path query.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicResult {
    pub distance: f64,
    /// Polyline from the first to the second query point.
    pub path: Vec<ExtendedPoint>,
    /// Estimated overshoot of `distance` above the true infimum.
    pub upper_bias: f64,
    /// Raw shortest-path value on the grid.
    pub grid_distance: f64,
    /// Largest distance from a query point to the node it was joined to.
    pub snap_offset: f64,
    pub cell_size: f64,
    pub stencil: Stencil,
}

impl GeodesicResult {
    pub fn metric_value(&self) -> MetricValue {
        MetricValue::new(self.distance, self.upper_bias)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

/// Distances and predecessors from a multi-source Dijkstra run.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    pub dist: Vec<f64>,
    pub pred: Vec<usize>,
}

impl ShortestPathTree {
    /// Node sequence ending at `node`, starting at a source.
    pub fn trace(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![node];
        while self.pred[node] != usize::MAX {
            node = self.pred[node];
            out.push(node);
        }
        out.reverse();
        out
    }
}

impl GridGraph {
    /// Lays out the grid and computes the mask; no densities yet.
    pub fn build(spec: &DomainSpec, options: GridOptions) -> Result<Self, MetricError> {
        if !(options.cell_size > 0.0) {
            return Err(MetricError::ResolutionTooCoarse("cell size must be positive".into()));
        }
        let mut cell = options.cell_size;
        let mut origin = options.lower;
        let span = options.upper - options.lower;
        let width = (span.re / cell).floor() as usize + 1;
        let height = if options.chart.periodic() {
            let h = (2.0 * PI / cell).ceil() as usize;
            cell = 2.0 * PI / h as f64;
            origin = Complex64::new(options.lower.re, -PI);
            h
        } else {
            (span.im / cell).floor() as usize + 1
        };
        let width = if options.chart.periodic() { (span.re / cell).floor() as usize + 1 } else { width };
        if width < 2 || height < 2 || width.saturating_mul(height) > 40_000_000 {
            return Err(MetricError::ResolutionTooCoarse(format!("grid of {width}×{height} nodes")));
        }
        let mut grid = GridGraph {
            spec: spec.clone(),
            options,
            origin,
            cell,
            width,
            height,
            mask: Vec::new(),
            weight: Vec::new(),
            density: None,
        };
        let margin = options.margin * cell;
        grid.mask = (0..width * height)
            .into_par_iter()
            .map(|i| match grid.probe(grid.node_position(i)) {
                Some((_, safe)) => safe >= margin && (margin > 0.0 || safe > 0.0),
                None => false,
            })
            .collect();
        Ok(grid)
    }

    /// Evaluates the chart density at every masked node.
    pub fn with_density(mut self, density: Density) -> Self {
        self.density = Some(density);
        let weights: Vec<f64> = (0..self.width * self.height)
            .into_par_iter()
            .map(|i| if self.mask[i] { self.chart_density(self.node_position(i)).unwrap_or(f64::INFINITY) } else { 0.0 })
            .collect();
        self.weight = weights;
        self
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn options(&self) -> &GridOptions {
        &self.options
    }

    pub fn chart(&self) -> Chart {
        self.options.chart
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Number of undirected edges between masked nodes.
    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for i in 0..self.len() {
            if self.mask[i] {
                count += self.neighbors(i, &self.mask).count();
            }
        }
        count / 2
    }

    /// Chart coordinates of node `i`.
    pub fn node_position(&self, i: usize) -> Complex64 {
        let (ix, iy) = (i % self.width, i / self.width);
        self.origin + Complex64::new(ix as f64 * self.cell, iy as f64 * self.cell)
    }

    /// Plane coordinates of node `i`.
    pub fn node_point(&self, i: usize) -> Complex64 {
        self.options.chart.to_plane(self.node_position(i))
    }

    /// Boundary distance (lower estimate) and chart-safe radius at a chart point.
    fn probe(&self, w: Complex64) -> Option<(f64, f64)> {
        let z = self.options.chart.to_plane(w);
        if !(z.re.is_finite() && z.im.is_finite()) || !self.spec.contains(z.into()) {
            return None;
        }
        let d = self.spec.boundary_distance_unchecked(z).ok()? - self.spec.mesh_gap();
        if d <= 0.0 {
            return None;
        }
        Some((d, self.options.chart.safe_radius(z, d)))
    }

    /// Density in chart coordinates, `ρ(z)·|dz/dw|`.
    pub fn chart_density(&self, w: Complex64) -> Option<f64> {
        let z = self.options.chart.to_plane(w);
        let (d, _) = self.probe(w)?;
        let rho = match self.density? {
            Density::Quasihyperbolic => 1.0 / (d + self.spec.mesh_gap()),
            Density::Ferrand => ferrand_density_at(&self.spec, z).value,
        };
        Some(rho * self.options.chart.scale(w))
    }

    /// The node one step from `i` along an offset, wrapping periodic charts.
    pub fn offset_node(&self, i: usize, dx: i64, dy: i64) -> Option<usize> {
        let (x, y) = ((i % self.width) as i64 + dx, (i / self.width) as i64 + dy);
        let (w, h) = (self.width as i64, self.height as i64);
        if x < 0 || x >= w {
            return None;
        }
        let y = if self.options.chart.periodic() {
            y.rem_euclid(h)
        } else if y < 0 || y >= h {
            return None;
        } else {
            y
        };
        Some((y * w + x) as usize)
    }

    /// Neighbors of `i` allowed by `allowed`, with chart edge lengths.
    pub fn neighbors<'a>(&'a self, i: usize, allowed: &'a [bool]) -> impl Iterator<Item = (usize, f64)> + 'a {
        let (ix, iy) = ((i % self.width) as i64, (i / self.width) as i64);
        let (w, h) = (self.width as i64, self.height as i64);
        let periodic = self.options.chart.periodic();
        let index = move |x: i64, y: i64| -> Option<usize> {
            if x < 0 || x >= w {
                return None;
            }
            let y = if periodic {
                y.rem_euclid(h)
            } else if y < 0 || y >= h {
                return None;
            } else {
                y
            };
            Some((y * w + x) as usize)
        };
        self.options.stencil.offsets().iter().filter_map(move |&(dx, dy)| {
            let j = index(ix + dx, iy + dy)?;
            if !allowed[j] {
                return None;
            }
            // knight moves pass between two nodes, both of which must be allowed
            if dx.abs() == 2 || dy.abs() == 2 {
                let (sx, sy) = (dx.signum(), dy.signum());
                let (a, b) = if dx.abs() == 2 { ((ix + sx, iy), (ix + sx, iy + sy)) } else { ((ix, iy + sy), (ix + sx, iy + sy)) };
                if !allowed[index(a.0, a.1)?] || !allowed[index(b.0, b.1)?] {
                    return None;
                }
            }
            Some((j, self.cell * ((dx * dx + dy * dy) as f64).sqrt()))
        })
    }

    /// Multi-source Dijkstra with node weights and trapezoidal edge costs.
    /// Stops once every node flagged in `stop_at` is settled.
    pub fn shortest_paths(
        &self,
        allowed: &[bool],
        weight: &[f64],
        sources: &[(usize, f64)],
        stop_at: Option<&[usize]>,
    ) -> ShortestPathTree {
        self.shortest_paths_until(allowed, weight, sources, stop_at, None)
    }

    /// As [`GridGraph::shortest_paths`], but nodes flagged in `terminal` are
    /// reached and never expanded.
    pub fn shortest_paths_until(
        &self,
        allowed: &[bool],
        weight: &[f64],
        sources: &[(usize, f64)],
        stop_at: Option<&[usize]>,
        terminal: Option<&[bool]>,
    ) -> ShortestPathTree {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(s, d0) in sources {
            if d0 < dist[s] {
                dist[s] = d0;
                heap.push(Entry { dist: d0, node: s });
            }
        }
        let mut remaining = stop_at.map(|t| {
            let mut flags = vec![false; n];
            let mut count = 0;
            for &i in t {
                if !flags[i] {
                    flags[i] = true;
                    count += 1;
                }
            }
            (flags, count)
        });
        while let Some(Entry { dist: d, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            if let Some((flags, count)) = remaining.as_mut() {
                if flags[node] {
                    *count -= 1;
                    if *count == 0 {
                        break;
                    }
                }
            }
            if terminal.map_or(false, |t| t[node]) {
                continue;
            }
            for (j, len) in self.neighbors(node, allowed) {
                let nd = d + 0.5 * (weight[node] + weight[j]) * len;
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = node;
                    heap.push(Entry { dist: nd, node: j });
                }
            }
        }
        ShortestPathTree { dist, pred }
    }

    /// Grid indices and chart positions near a chart point (periodic aware).
    fn nodes_near(&self, w: Complex64, radius: f64) -> Vec<(usize, Complex64)> {
        let r = (radius / self.cell).ceil() as i64;
        let fx = ((w.re - self.origin.re) / self.cell).round() as i64;
        let fy = ((w.im - self.origin.im) / self.cell).round() as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (fx + dx, fy + dy);
                if x < 0 || x >= self.width as i64 {
                    continue;
                }
                let yy = if self.options.chart.periodic() {
                    y.rem_euclid(self.height as i64)
                } else if y < 0 || y >= self.height as i64 {
                    continue;
                } else {
                    y
                };
                let i = (yy as usize) * self.width + x as usize;
                // unwrapped position next to w
                let pos = self.origin + Complex64::new(x as f64 * self.cell, y as f64 * self.cell);
                if (pos - w).norm() <= radius {
                    out.push((i, pos));
                }
            }
        }
        out
    }

    /// Simpson length of the chart segment `a → b`, or `None` when it may leave the domain.
    fn segment_length(&self, a: Complex64, b: Complex64) -> Option<f64> {
        let m = 0.5 * (a + b);
        let len = (b - a).norm();
        if len == 0.0 {
            return Some(0.0);
        }
        let (_, ra) = self.probe(a)?;
        let (_, rm) = self.probe(m)?;
        let (_, rb) = self.probe(b)?;
        if ra + rm <= 0.5 * len || rm + rb <= 0.5 * len {
            return None;
        }
        let (fa, fm, fb) = (self.chart_density(a)?, self.chart_density(m)?, self.chart_density(b)?);
        Some(len * (fa + 4.0 * fm + fb) / 6.0)
    }

    fn polyline_length(&self, pts: &[Complex64]) -> Option<f64> {
        let mut total = 0.0;
        for w in pts.windows(2) {
            total += self.segment_length(w[0], w[1])?;
        }
        Some(total)
    }

    /// Shortest-path distance between two plane points of the domain.
    pub fn distance(&self, x: ExtendedPoint, y: ExtendedPoint) -> Result<GeodesicResult, MetricError> {
        self.distance_with(x, y, true)
    }

    fn distance_with(&self, x: ExtendedPoint, y: ExtendedPoint, refine: bool) -> Result<GeodesicResult, MetricError> {
        if self.density.is_none() {
            return Err(MetricError::ResolutionTooCoarse("grid has no density".into()));
        }
        let zx = x.finite().ok_or(DomainError::InfinityChart)?;
        let zy = y.finite().ok_or(DomainError::InfinityChart)?;
        for p in [x, y] {
            if !self.spec.contains(p) {
                return Err(DomainError::OutsideDomain(p.to_string()).into());
            }
        }
        let stencil = self.options.stencil;
        if zx == zy {
            return Ok(GeodesicResult {
                distance: 0.0,
                path: vec![x, y],
                upper_bias: 0.0,
                grid_distance: 0.0,
                snap_offset: 0.0,
                cell_size: self.cell,
                stencil,
            });
        }
        let chart = self.options.chart;
        let (wx, wy) = (chart.from_plane(zx), chart.from_plane(zy));
        let joins = |w: Complex64| -> Vec<(usize, Complex64, f64)> {
            self.nodes_near(w, 2.0 * self.cell)
                .into_iter()
                .filter(|(i, _)| self.mask[*i])
                .filter_map(|(i, pos)| self.segment_length(w, pos).map(|c| (i, pos, c)))
                .collect()
        };
        let (from, to) = (joins(wx), joins(wy));
        if from.is_empty() || to.is_empty() {
            return Err(MetricError::ResolutionTooCoarse(format!(
                "no grid node within two cells of {}",
                if from.is_empty() { x } else { y }
            )));
        }
        let sources: Vec<(usize, f64)> = from.iter().map(|&(i, _, c)| (i, c)).collect();
        let targets: Vec<usize> = to.iter().map(|&(i, _, _)| i).collect();
        let tree = self.shortest_paths(&self.mask, &self.weight, &sources, Some(&targets));
        let (best_target, grid_distance) = to
            .iter()
            .map(|&(i, pos, c)| ((i, pos), tree.dist[i] + c))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if !grid_distance.is_finite() {
            return Err(MetricError::Disconnected);
        }
        // polyline in unwrapped chart coordinates
        let nodes = tree.trace(best_target.0);
        let start = from.iter().find(|f| f.0 == nodes[0]).expect("path starts at a source");
        let mut poly = vec![wx, start.1];
        for pair in nodes.windows(2) {
            let prev = *poly.last().expect("nonempty");
            let raw = self.node_position(pair[1]) - self.node_position(pair[0]);
            poly.push(prev + unwrap(raw, chart));
        }
        let last = *poly.last().expect("nonempty");
        poly.push(last + unwrap(wy - last, chart));
        let snap_offset = (start.1 - wx).norm().max((best_target.1 - wy).norm());
        let (distance, upper_bias, path) = if refine {
            self.refine(poly, grid_distance)
        } else {
            // rerouting through the snapped nodes costs at most the connections, both ways
            let factor = stencil.bias_factor();
            let connections = start.2 + to.iter().find(|t| t.0 == best_target.0).expect("target").2;
            (grid_distance, (factor - 1.0) * grid_distance + (1.0 + factor) * connections, poly)
        };
        Ok(GeodesicResult {
            distance,
            path: path.into_iter().map(|w| ExtendedPoint::Finite(chart.to_plane(w))).collect(),
            upper_bias,
            grid_distance,
            snap_offset,
            cell_size: self.cell,
            stencil,
        })
    }

    /// Coarse-to-fine L-BFGS shortening of a valid polyline.
    fn refine(&self, poly: Vec<Complex64>, grid_distance: f64) -> (f64, f64, Vec<Complex64>) {
        let chart_len: f64 = poly.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let target = ((chart_len / (2.0 * self.cell)).ceil() as usize).clamp(16, 256);
        let fallback_bias = (self.options.stencil.bias_factor() - 1.0) * grid_distance;
        // smallest uniform resampling that is still a valid curve
        let mut n = 16.min(target);
        let mut current = loop {
            if n >= poly.len() {
                break poly.clone();
            }
            let candidate = resample(&poly, n);
            if self.polyline_length(&candidate).is_some() {
                break candidate;
            }
            n *= 2;
        };
        let mut value = match self.polyline_length(&current) {
            Some(v) => v,
            None => return (grid_distance, fallback_bias, poly),
        };
        let mut previous = f64::INFINITY;
        loop {
            let (pts, v) = self.optimize(current.clone(), value);
            current = pts;
            previous = if previous.is_finite() { previous } else { value.max(v) };
            let level_gain = previous - v;
            value = v;
            let segments = current.len() - 1;
            if segments >= target {
                let bias = level_gain.max(0.0) + 1e-12 * value;
                if value > grid_distance {
                    // the grid found a shorter class; keep the grid value
                    return (grid_distance, fallback_bias, poly);
                }
                return (value, bias, current);
            }
            previous = value;
            let finer = resample(&current, 2 * segments);
            match self.polyline_length(&finer) {
                Some(v) => {
                    current = finer;
                    value = v;
                }
                None => return (value, (previous - value).abs() + fallback_bias.min(value), current),
            }
        }
    }

    /// Minimizes the polyline length with fixed endpoints.
    fn optimize(&self, pts: Vec<Complex64>, value: f64) -> (Vec<Complex64>, f64) {
        let n = pts.len();
        if n <= 2 {
            return (pts, value);
        }
        let objective = |x: &[f64]| -> f64 {
            let mut p = pts.clone();
            for k in 1..n - 1 {
                p[k] = Complex64::new(x[2 * (k - 1)], x[2 * (k - 1) + 1]);
            }
            self.polyline_length(&p).unwrap_or(f64::INFINITY)
        };
        let gradient = |x: &[f64]| -> Vec<f64> {
            let mut p = pts.clone();
            for k in 1..n - 1 {
                p[k] = Complex64::new(x[2 * (k - 1)], x[2 * (k - 1) + 1]);
            }
            let mut g = vec![0.0; x.len()];
            for k in 1..n - 1 {
                let h = 1e-7 * (p[k + 1] - p[k - 1]).norm().max(1e-300);
                let local = |q: Complex64| -> f64 {
                    match (self.segment_length(p[k - 1], q), self.segment_length(q, p[k + 1])) {
                        (Some(a), Some(b)) => a + b,
                        _ => f64::INFINITY,
                    }
                };
                for (c, dir) in [(0, Complex64::new(h, 0.0)), (1, Complex64::new(0.0, h))] {
                    let (plus, minus) = (local(p[k] + dir), local(p[k] - dir));
                    g[2 * (k - 1) + c] = if plus.is_finite() && minus.is_finite() { (plus - minus) / (2.0 * h) } else { 0.0 };
                }
            }
            g
        };
        let x0: Vec<f64> = pts[1..n - 1].iter().flat_map(|p| [p.re, p.im]).collect();
        let step_cap = pts.windows(2).map(|w| (w[1] - w[0]).norm()).fold(f64::INFINITY, f64::min) * 0.5;
        let (x, v) = lbfgs(x0, value, &objective, &gradient, step_cap, 200);
        let mut out = pts.clone();
        for k in 1..n - 1 {
            out[k] = Complex64::new(x[2 * (k - 1)], x[2 * (k - 1) + 1]);
        }
        (out, v)
    }
}

fn unwrap(delta: Complex64, chart: Chart) -> Complex64 {
    if !chart.periodic() {
        return delta;
    }
    let turns = (delta.im / (2.0 * PI)).round();
    delta - Complex64::new(0.0, 2.0 * PI * turns)
}

/// `n` equal chart-arclength segments along a polyline.
fn resample(poly: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut cumulative = vec![0.0];
    for w in poly.windows(2) {
        cumulative.push(cumulative.last().expect("nonempty") + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().expect("nonempty");
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    for k in 0..=n {
        let s = total * k as f64 / n as f64;
        while seg + 1 < poly.len() - 1 && cumulative[seg + 1] < s {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let t = if span > 0.0 { ((s - cumulative[seg]) / span).clamp(0.0, 1.0) } else { 0.0 };
        out.push(poly[seg] + (poly[seg + 1] - poly[seg]) * t);
    }
    out[0] = poly[0];
    out[n] = *poly.last().expect("nonempty");
    out
}

/// Limited-memory BFGS with Armijo backtracking; infinite values reject a step.
fn lbfgs(
    mut x: Vec<f64>,
    mut fx: f64,
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    step_cap: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    const MEMORY: usize = 8;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut g = grad(&x);
    for _ in 0..max_iter {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            history.clear();
        }
        if slope.abs() < 1e-30 {
            break;
        }
        let largest = d.chunks(2).map(|c| c[0].hypot(c[1])).fold(0.0, f64::max);
        let mut t = if largest > step_cap { step_cap / largest } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext)) = accepted else { break };
        let gnext = grad(&next);
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = fx - fnext;
        x = next;
        g = gnext;
        fx = fnext;
        if sy > 1e-300 {
            history.push((s, y, 1.0 / sy));
            if history.len() > MEMORY {
                history.remove(0);
            }
        }
        if improvement <= 1e-13 * fx.abs() {
            break;
        }
    }
    (x, fx)
}

/// Shortest-path solver reusing one density grid across many queries.
#[derive(Clone, Debug)]
pub struct GeodesicSolver {
    grid: GridGraph,
    refine: bool,
}

impl GeodesicSolver {
    pub fn new(spec: &DomainSpec, options: GridOptions, density: Density) -> Result<Self, MetricError> {
        if density == Density::Ferrand && spec.boundary_cardinality().map_or(false, |c| c < 2) {
            return Err(DomainError::Unsupported("Ferrand density needs two boundary points").into());
        }
        Ok(GeodesicSolver { grid: GridGraph::build(spec, options)?.with_density(density), refine: true })
    }

    /// Skips the polyline refinement: distances are grid path lengths with the
    /// stencil and endpoint-snapping bias as their error bound.
    pub fn grid_only(mut self) -> Self {
        self.refine = false;
        self
    }

    pub fn grid(&self) -> &GridGraph {
        &self.grid
    }

    pub fn distance(&self, x: ExtendedPoint, y: ExtendedPoint) -> Result<GeodesicResult, MetricError> {
        self.grid.distance_with(x, y, self.refine)
    }
}

fn single_query(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64, stencil: Stencil, density: Density) -> Result<GeodesicResult, MetricError> {
    let zx = x.finite().ok_or(DomainError::InfinityChart)?;
    let zy = y.finite().ok_or(DomainError::InfinityChart)?;
    let options = GridOptions::auto(spec, &[zx, zy], cell_size, stencil);
    GeodesicSolver::new(spec, options, density)?.distance(x, y)
}

/// Quasihyperbolic distance `k_G`, density `1/d_G`.
pub fn quasihyperbolic_distance(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<GeodesicResult, MetricError> {
    single_query(spec, x, y, cell_size, Stencil::Sixteen, Density::Quasihyperbolic)
}

/// Ferrand distance `σ_G`, density `w_G`.
pub fn ferrand_distance(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<GeodesicResult, MetricError> {
    single_query(spec, x, y, cell_size, Stencil::Sixteen, Density::Ferrand)
}

/// Logarithmic Ferrand metric `Σ_G = log(1 + σ_G)`.
pub fn log_ferrand_metric(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<MetricValue, MetricError> {
    Ok(ferrand_distance(spec, x, y, cell_size)?.metric_value().log1p())
}

/// `Δ_G(x,y) ≤ Σ_G(x,y)` at the solver tolerance.
pub fn log_metrics_ordered(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, cell_size: f64) -> Result<bool, MetricError> {
    let big_delta = delta_metric(spec, x, y)?.log1p();
    let big_sigma = log_ferrand_metric(spec, x, y, cell_size)?;
    Ok(big_delta.value <= big_sigma.value + big_sigma.error_bound + big_delta.error_bound + 1e-12)
}
