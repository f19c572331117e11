use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("coordinate is not a finite real number")]
    NonFiniteCoordinate,
    #[error("operation requires a finite point, got infinity")]
    InfiniteArgument,
    #[error("degenerate configuration: coincident points")]
    DegenerateConfiguration,
    #[error("Möbius coefficients have vanishing determinant")]
    SingularMap,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("value is infinite for coincident points")]
    InfiniteValue,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("point {0} lies outside the domain")]
    OutsideDomain(String),
    #[error("point at infinity: normalize the domain by a Möbius map first")]
    InfinityChart,
    #[error("unsupported domain: {0}")]
    Unsupported(&'static str),
    #[error("invalid domain parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("grid resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("no path joins the query points in the grid")]
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulusError {
    #[error("cutting-plane loop did not converge after {iterations} rounds (best value {best_value}, worst path {worst_path_length})")]
    NonConvergence {
        iterations: usize,
        best_value: f64,
        worst_path_length: f64,
    },
    #[error("invalid curve family: {0}")]
    InvalidFamily(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<DomainError> for ModulusError {
    fn from(e: DomainError) -> Self {
        ModulusError::Metric(MetricError::Domain(e))
    }
}

impl From<GeometryError> for ModulusError {
    fn from(e: GeometryError) -> Self {
        ModulusError::Metric(MetricError::Geometry(e))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("construction violates the separation condition at k = {k}")]
    Separation { k: usize },
    #[error("invalid analysis parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
