use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("degenerate simplex")]
    Degenerate,
    #[error("unsupported point count {0}")]
    Arity(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("point coincides with vertex {0}")]
    Coincident(usize),
    #[error("point lies outside the triangulated domain")]
    Outside,
    #[error("vertex {0} is an input vertex and cannot be deleted")]
    InputVertex(usize),
    #[error("vertex {0} does not exist")]
    NoSuchVertex(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A PLC that failed validation. Every offending feature is listed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid PLC: {}", .issues.join("; "))]
pub struct PlcError {
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid refinement configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("radius-edge ratio {rho} does not exceed alpha {alpha}; picking region is empty")]
    EmptyPickingRegion { rho: f64, alpha: f64 },
    #[error("ratio {0} is too small for a circle through both edge endpoints")]
    RatioTooSmall(f64),
    #[error("spindle torus needs rho >= sqrt(2), got {0}")]
    SpindleRatio(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("feasible region is empty")]
    FeasibleEmpty,
    #[error("placement problem has no sites")]
    NoSites,
    #[error("weighted placement needs at least one weight plane")]
    NoWeightPlanes,
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Plc(#[from] PlcError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("insertion cap of {cap} exceeded after {events} events")]
    InsertionCap { cap: usize, events: usize },
    #[error("spindle torus and picking region do not intersect for element {0:?}")]
    SpindleEmpty(Vec<usize>),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Plc(#[from] PlcError),
    #[error("{0}: {1}")]
    File(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("local feature size needs two nonincident features")]
    TooFewFeatures,
    #[error("mesh has no interior elements")]
    EmptyMesh,
}
