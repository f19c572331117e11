//! `confmetric` command-line front end.

use std::f64::consts::E;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use confmetric::analysis::{
    builtin_corpus, csv_cell, disk_chart, inequality_sweep, worked_examples, BetaRule, MartioExampleSpec,
    SweepConfig,
};
use confmetric::modulus::{
    annulus_modulus_numeric, grotzsch_capacity_numeric, lambda_metric_estimate, mu_metric_estimate,
    ring_capacity_exact, ModulusEstimate, SolverOptions,
};
use confmetric::path_metrics::{ferrand_distance, quasihyperbolic_distance, GeodesicResult, GridOptions, GeodesicSolver, Density, Stencil};
use confmetric::point_metrics::{
    d_metric, delta_metric, ferrand_density, hyperbolic_metric, j_hat_metric, j_metric, log_mobius_metric, MetricValue,
};
use confmetric::special::{gamma2, lambda_disk_via_tau, mu_disk};
use confmetric::{AnalysisError, DomainError, DomainSpec, ExtendedPoint, MetricError, ModulusError};

#[derive(Parser, Debug)]
#[command(name = "confmetric", version, about = "Conformally invariant metrics of planar domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args, Debug, Clone, Copy)]
struct GridArgs {
    /// Grid spacing for path and modulus metrics.
    #[arg(long, default_value_t = 0.02)]
    cell_size: f64,
    /// Number of edge directions (8 or 16).
    #[arg(long, default_value_t = 16)]
    stencil: u32,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between two points.
    Dist {
        /// Named domain (disk, half-plane, punctured-disk, punctured-plane,
        /// thrice-punctured, annulus:R1,R2) or a JSON domain file.
        #[arg(long)]
        domain: String,
        #[arg(long, value_enum)]
        metric: MetricName,
        /// First point as `re,im` or `inf`.
        #[arg(allow_hyphen_values = true)]
        x: String,
        /// Second point as `re,im` or `inf`.
        #[arg(allow_hyphen_values = true)]
        y: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Append the geodesic polyline (path metrics only).
        #[arg(long)]
        path: bool,
    },
    /// Point density of a path metric.
    Density {
        #[arg(long)]
        domain: String,
        #[arg(long, value_enum, default_value_t = DensityName::Ferrand)]
        kind: DensityName,
        #[arg(allow_hyphen_values = true)]
        x: String,
    },
    /// Discrete modulus of a curve family.
    Modulus {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long, default_value_t = 1.0)]
        inner: f64,
        #[arg(long, default_value_t = E)]
        outer: f64,
        /// Grötzsch parameter: the slit is `[0, 1/t]`.
        #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
        t: f64,
        #[arg(long)]
        domain: Option<String>,
        #[arg(allow_hyphen_values = true)]
        points: Vec<String>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Inequality sweep over random pairs; exit 4 on any violation.
    Sweep {
        /// Domains to sweep (default: the built-in corpus).
        #[arg(long = "domain")]
        domains: Vec<String>,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, hide = true)]
        inject_fake_metric: bool,
    },
    /// Worked examples against their expected values; exit 4 on any mismatch.
    PaperExamples {
        #[arg(long, default_value_t = 0.02)]
        cell_size: f64,
    },
    /// Annulus-meeting scan of the boundary.
    UniformPerfectness {
        #[arg(long)]
        domain: Option<String>,
        /// Scan the power disk chain with this many disks instead of a domain.
        #[arg(long)]
        power_chain: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long = "center", allow_hyphen_values = true)]
        centers: Vec<String>,
        #[arg(long = "radius")]
        radii: Vec<f64>,
    },
    /// Separating ratios and series bounds of the disk chains.
    Martio {
        #[arg(long, value_enum, default_value_t = ChainRule::Tuned)]
        rule: ChainRule,
        #[arg(long, default_value_t = 30)]
        truncation: usize,
        /// `β_k = k^-p`.
        #[arg(long, default_value_t = 2.0)]
        beta_power: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricName {
    #[value(name = "j")]
    J,
    #[value(name = "jhat")]
    JHat,
    #[value(name = "delta")]
    Delta,
    #[value(name = "Delta")]
    BigDelta,
    #[value(name = "k")]
    K,
    #[value(name = "sigma")]
    Sigma,
    #[value(name = "Sigma")]
    BigSigma,
    #[value(name = "h")]
    H,
    #[value(name = "D")]
    D,
    #[value(name = "mu")]
    Mu,
    #[value(name = "lambda")]
    Lambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DensityName {
    Quasihyperbolic,
    Ferrand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyName {
    Annulus,
    Grotzsch,
    Mu,
    Lambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ChainRule {
    Power,
    Tuned,
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    NonConvergence(String),
    Mismatch(String),
    Io(std::io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::NonConvergence(_) => "nonconvergence",
            Failure::Mismatch(_) => "mismatch",
            Failure::Io(_) => "io",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::NonConvergence(m) | Failure::Mismatch(m) => f.write_str(m),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Disconnected | MetricError::ResolutionTooCoarse(_) => Failure::NonConvergence(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<ModulusError> for Failure {
    fn from(e: ModulusError) -> Self {
        match e {
            ModulusError::NonConvergence { .. } => Failure::NonConvergence(e.to_string()),
            ModulusError::Metric(m) => m.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Rows of JSON cells rendered as CSV or JSON with identical values.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    meta: Option<Value>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new(), meta: None }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                if let Some(meta) = &self.meta {
                    out.push_str(&format!("# {meta}\n"));
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                    .collect();
                let mut doc = json!({ "rows": rows });
                if let Some(meta) = &self.meta {
                    doc["metadata"] = meta.clone();
                }
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
            }
        }
    }
}

fn parse_point(s: &str) -> Result<ExtendedPoint, Failure> {
    let t = s.trim();
    if t == "inf" {
        return Ok(ExtendedPoint::Infinity);
    }
    let (a, b) = t.split_once(',').ok_or_else(|| Failure::Usage(format!("point {s:?} is not \"re,im\" or \"inf\"")))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad coordinate {v:?} in {s:?}")));
    ExtendedPoint::new(num(a)?, num(b)?).map_err(|e| Failure::Usage(format!("{s:?}: {e}")))
}

fn parse_domain(s: &str) -> Result<DomainSpec, Failure> {
    let named = match s {
        "disk" => Some(DomainSpec::unit_disk()),
        "half-plane" => Some(DomainSpec::half_plane()),
        "punctured-disk" => Some(DomainSpec::punctured_disk()),
        "punctured-plane" => Some(DomainSpec::punctured_plane()),
        "thrice-punctured" => Some(DomainSpec::thrice_punctured_sphere()),
        _ => None,
    };
    if let Some(d) = named {
        return Ok(d);
    }
    if let Some(radii) = s.strip_prefix("annulus:") {
        let (a, b) = radii.split_once(',').ok_or_else(|| Failure::Usage(format!("annulus needs R1,R2: {s:?}")))?;
        let r = |v: &str| v.parse::<f64>().map_err(|_| Failure::Usage(format!("bad radius {v:?}")));
        return Ok(DomainSpec::annulus(r(a)?, r(b)?)?);
    }
    let path = Path::new(s);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return Ok(DomainSpec::from_json(&text)?);
    }
    Err(Failure::Usage(format!("unknown domain {s:?}")))
}

fn stencil(n: u32) -> Result<Stencil, Failure> {
    Stencil::from_directions(n).ok_or_else(|| Failure::Usage(format!("stencil must be 8 or 16, got {n}")))
}

fn num(v: f64) -> Value {
    json!(v)
}

fn geodesic(spec: &DomainSpec, x: ExtendedPoint, y: ExtendedPoint, grid: GridArgs, density: Density) -> Result<GeodesicResult, Failure> {
    let st = stencil(grid.stencil)?;
    if st == Stencil::Sixteen {
        return Ok(match density {
            Density::Quasihyperbolic => quasihyperbolic_distance(spec, x, y, grid.cell_size)?,
            Density::Ferrand => ferrand_distance(spec, x, y, grid.cell_size)?,
        });
    }
    let zx = x.finite().ok_or(DomainError::InfinityChart)?;
    let zy = y.finite().ok_or(DomainError::InfinityChart)?;
    let options = GridOptions::auto(spec, &[zx, zy], grid.cell_size, st);
    Ok(GeodesicSolver::new(spec, options, density)?.distance(x, y)?)
}

fn estimate_value(e: &ModulusEstimate) -> MetricValue {
    MetricValue::new(e.value, e.value - e.lower_bound)
}

fn cmd_dist(domain: &str, metric: MetricName, x: &str, y: &str, grid: GridArgs, with_path: bool) -> Result<Table, Failure> {
    let (x, y) = (parse_point(x)?, parse_point(y)?);
    let spec = parse_domain(domain)?;
    stencil(grid.stencil)?;
    let mut path = None;
    let mut uses_grid = false;
    let value = match metric {
        MetricName::J => j_metric(&spec, x, y)?,
        MetricName::JHat => j_hat_metric(&spec, x, y)?,
        MetricName::Delta => delta_metric(&spec, x, y)?,
        MetricName::BigDelta => log_mobius_metric(&spec, x, y)?,
        MetricName::H => hyperbolic_metric(&spec, x, y)?,
        MetricName::D => d_metric(x, y)?,
        MetricName::K | MetricName::Sigma | MetricName::BigSigma => {
            uses_grid = true;
            let density = if metric == MetricName::K { Density::Quasihyperbolic } else { Density::Ferrand };
            let r = geodesic(&spec, x, y, grid, density)?;
            path = Some(r.path.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";"));
            let v = r.metric_value();
            if metric == MetricName::BigSigma {
                v.log1p()
            } else {
                v
            }
        }
        MetricName::Mu | MetricName::Lambda => match disk_chart(&spec) {
            Some(f) if x != y || metric == MetricName::Mu => {
                let (u, v) = (f.apply(x), f.apply(y));
                let r = if metric == MetricName::Mu { mu_disk(u, v) } else { lambda_disk_via_tau(u, v) };
                MetricValue::exact(r.map_err(|e| Failure::Usage(e.to_string()))?)
            }
            _ => {
                uses_grid = true;
                let e = if metric == MetricName::Mu {
                    mu_metric_estimate(&spec, x, y, grid.cell_size)?
                } else {
                    lambda_metric_estimate(&spec, x, y, grid.cell_size)?
                };
                estimate_value(&e)
            }
        },
    };
    let mut columns = vec!["metric", "domain", "x", "y", "value", "error_bound", "cell_size", "stencil"];
    let name = metric.to_possible_value().expect("named").get_name().to_string();
    let (cell, sten) = if uses_grid { (num(grid.cell_size), json!(grid.stencil)) } else { (Value::Null, Value::Null) };
    let mut row = vec![json!(name), json!(spec.label()), json!(x.to_string()), json!(y.to_string()), num(value.value), num(value.error_bound), cell, sten];
    if with_path {
        columns.push("path");
        row.push(path.map_or(Value::Null, Value::String));
    }
    let mut t = Table::new(columns);
    t.rows.push(row);
    Ok(t)
}

fn cmd_density(domain: &str, kind: DensityName, x: &str) -> Result<Table, Failure> {
    let x = parse_point(x)?;
    let spec = parse_domain(domain)?;
    let value = match kind {
        DensityName::Ferrand => ferrand_density(&spec, x)?,
        DensityName::Quasihyperbolic => MetricValue::new(1.0 / spec.boundary_distance(x)?, 0.0),
    };
    let mut t = Table::new(vec!["density", "domain", "x", "value", "error_bound"]);
    let name = if kind == DensityName::Ferrand { "ferrand" } else { "quasihyperbolic" };
    t.rows.push(vec![json!(name), json!(spec.label()), json!(x.to_string()), num(value.value), num(value.error_bound)]);
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn cmd_modulus(family: FamilyName, inner: f64, outer: f64, t: f64, domain: Option<&str>, points: &[String], grid: GridArgs) -> Result<Table, Failure> {
    let (estimate, exact, label) = match family {
        FamilyName::Annulus => {
            let exact = ring_capacity_exact(inner, outer)?;
            let e = annulus_modulus_numeric(inner, outer, None, grid.cell_size, &SolverOptions::default())?;
            (e, Some(exact), format!("annulus({inner},{outer})"))
        }
        FamilyName::Grotzsch => {
            let exact = gamma2(t).map_err(|e| Failure::Usage(e.to_string()))?;
            (grotzsch_capacity_numeric(t, grid.cell_size)?, Some(exact), format!("grotzsch({t})"))
        }
        FamilyName::Mu | FamilyName::Lambda => {
            let spec = parse_domain(domain.ok_or_else(|| Failure::Usage("--domain is required".into()))?)?;
            let [x, y] = points else {
                return Err(Failure::Usage("two points are required".into()));
            };
            let (x, y) = (parse_point(x)?, parse_point(y)?);
            let exact = disk_chart(&spec).and_then(|f| {
                let (u, v) = (f.apply(x), f.apply(y));
                if family == FamilyName::Mu { mu_disk(u, v).ok() } else { lambda_disk_via_tau(u, v).ok() }
            });
            let e = if family == FamilyName::Mu {
                mu_metric_estimate(&spec, x, y, grid.cell_size)?
            } else {
                lambda_metric_estimate(&spec, x, y, grid.cell_size)?
            };
            (e, exact, spec.label())
        }
    };
    let mut table = Table::new(vec![
        "family",
        "value",
        "error_bound",
        "lower_bound",
        "upper_bound",
        "worst_path_length",
        "iterations",
        "exact",
        "candidate",
        "cell_size",
    ]);
    let v = estimate_value(&estimate);
    table.rows.push(vec![
        json!(label),
        num(v.value),
        num(v.error_bound),
        num(estimate.lower_bound),
        num(estimate.upper_bound),
        num(estimate.worst_path_length),
        json!(estimate.iterations),
        exact.map_or(Value::Null, num),
        estimate.candidate.clone().map_or(Value::Null, Value::String),
        num(estimate.cell_size),
    ]);
    Ok(table)
}

fn cmd_sweep(domains: &[String], pairs: usize, seed: u64, grid: GridArgs, fake: bool, format: Format) -> Result<(String, usize), Failure> {
    let specs = if domains.is_empty() {
        builtin_corpus()
    } else {
        domains.iter().map(|d| parse_domain(d)).collect::<Result<Vec<_>, _>>()?
    };
    let config = SweepConfig {
        pairs_per_domain: pairs,
        cell_size: grid.cell_size,
        stencil: stencil(grid.stencil)?,
        seed,
        inject_fake_metric: fake,
        ..SweepConfig::default()
    };
    let report = inequality_sweep(&specs, &config)?;
    let mut stderr = std::io::stderr().lock();
    for row in report.rows.iter().filter(|r| !r.violations.is_empty()) {
        writeln!(stderr, "violation,{},{},{},{},{}", row.domain, row.pair, row.x, row.y, row.violations.join(";"))?;
    }
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report.to_json()).expect("json")),
    };
    Ok((text, report.violations))
}

fn cmd_paper_examples(cell_size: f64) -> Result<(Table, usize), Failure> {
    let rows = worked_examples(cell_size)?;
    let mut t = Table::new(vec!["example", "computed", "error_bound", "lower", "upper", "method", "pass"]);
    let bound = |v: f64| if v.is_finite() { num(v) } else { Value::Null };
    for r in &rows {
        t.rows.push(vec![json!(r.name), num(r.computed), num(r.error_bound), bound(r.lower), bound(r.upper), json!(r.method), json!(r.pass)]);
    }
    Ok((t, rows.iter().filter(|r| !r.pass).count()))
}

fn cmd_uniform_perfectness(domain: Option<&str>, chain: Option<usize>, c: f64, centers: &[String], radii: &[f64]) -> Result<Table, Failure> {
    let mut table = Table::new(vec!["center", "radius", "meets", "gap_ratio"]);
    let (report, first) = match (domain, chain) {
        (Some(d), None) => {
            let spec = parse_domain(d)?;
            let centers = centers.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>, _>>()?;
            if centers.is_empty() || radii.is_empty() {
                return Err(Failure::Usage("--center and --radius are required".into()));
            }
            (confmetric::analysis::uniform_perfectness_scan(&spec, c, &centers, radii)?, None)
        }
        (None, Some(k)) => {
            let scan = MartioExampleSpec::power_balls(k).perfectness_scan(c)?;
            (scan.report, scan.first_failing_k)
        }
        _ => return Err(Failure::Usage("give exactly one of --domain and --power-chain".into())),
    };
    let gap = |g: Option<f64>| match g {
        Some(v) if v.is_finite() => num(v),
        Some(_) => json!("inf"),
        None => Value::Null,
    };
    for k in &report.checks {
        table.rows.push(vec![json!(ExtendedPoint::Finite(k.center).to_string()), num(k.radius), json!(k.meets), gap(k.gap_ratio)]);
    }
    table.meta = Some(json!({
        "c": c,
        "pass": report.pass,
        "worst": report.worst.map(|w| json!({ "center": ExtendedPoint::Finite(w.center).to_string(), "radius": w.radius, "gap_ratio": gap(w.gap_ratio) })),
        "first_failing_k": first,
    }));
    Ok(table)
}

fn cmd_martio(rule: ChainRule, truncation: usize, beta_power: f64) -> Result<Table, Failure> {
    let spec = match rule {
        ChainRule::Power => MartioExampleSpec::power_balls(truncation),
        ChainRule::Tuned => MartioExampleSpec::tuned_balls(BetaRule::InversePower(beta_power), truncation),
    };
    let report = spec.report()?;
    let exact = if rule == ChainRule::Power { Some(spec.exact_ratios()?) } else { None };
    let mut table = Table::new(vec![
        "k",
        "log_tau",
        "scaled_separation",
        "log_ratio",
        "ring_modulus",
        "log_c",
        "log_margin",
        "term",
        "exact_ratio",
        "exact_bound",
        "bound_holds",
    ]);
    let opt = |v: Option<f64>| v.map_or(Value::Null, num);
    for (i, r) in report.rings.iter().enumerate() {
        let e = exact.as_ref().map(|v| &v[i]);
        table.rows.push(vec![
            json!(r.k),
            num(r.log_tau),
            num(r.scaled_separation),
            num(r.log_ratio),
            num(r.ring_modulus),
            opt(r.log_c),
            opt(r.log_margin),
            opt(r.term),
            e.map_or(Value::Null, |e| json!(e.ratio.to_string())),
            e.map_or(Value::Null, |e| json!(e.bound.to_string())),
            e.map_or(Value::Null, |e| json!(e.holds)),
        ]);
    }
    table.meta = Some(json!({
        "first": spec.first,
        "truncation": spec.truncation,
        "partial_sum": report.partial_sum,
        "tail_bound": report.tail_bound,
        "series_limit": report.series_limit,
        "all_ratios_below_c": report.all_ratios_below_c,
        "ring_moduli_increasing": report.ring_moduli_increasing,
    }));
    Ok(table)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.output.as_deref();
    let table = match cli.command {
        Command::Dist { domain, metric, x, y, grid, path } => cmd_dist(&domain, metric, &x, &y, grid, path)?,
        Command::Density { domain, kind, x } => cmd_density(&domain, kind, &x)?,
        Command::Modulus { family, inner, outer, t, domain, points, grid } => {
            cmd_modulus(family, inner, outer, t, domain.as_deref(), &points, grid)?
        }
        Command::Sweep { domains, pairs, seed, grid, inject_fake_metric } => {
            let (text, violations) = cmd_sweep(&domains, pairs, seed, grid, inject_fake_metric, cli.format)?;
            emit(&text, out)?;
            if violations > 0 {
                return Err(Failure::Mismatch(format!("{violations} rows violate an inequality")));
            }
            return Ok(());
        }
        Command::PaperExamples { cell_size } => {
            let (table, failing) = cmd_paper_examples(cell_size)?;
            emit(&table.render(cli.format), out)?;
            if failing > 0 {
                return Err(Failure::Mismatch(format!("{failing} examples outside tolerance")));
            }
            return Ok(());
        }
        Command::UniformPerfectness { domain, power_chain, c, centers, radii } => {
            cmd_uniform_perfectness(domain.as_deref(), power_chain, c, &centers, &radii)?
        }
        Command::Martio { rule, truncation, beta_power } => cmd_martio(rule, truncation, beta_power)?,
    };
    emit(&table.render(cli.format), out)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("CONFMETRIC_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::Usage(format!("CONFMETRIC_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(e.code())
        }
    }
}
