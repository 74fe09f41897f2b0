use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("point {point:?} lies outside the chart domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("metric is not Lorentzian at {point:?} (eigenvalues {eigenvalues:?})")]
    SignatureViolation { point: Vec<f64>, eigenvalues: Vec<f64> },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("point has dimension {got}, chart has dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("vector is not unit timelike: g(N,N) = {norm}")]
    NotUnitTimelike { norm: f64 },
    #[error("vector is not a unit spacelike vector orthogonal to N: g(v,v) = {norm}, g(v,N) = {cross}")]
    BadFrameVector { norm: f64, cross: f64 },
    #[error("gradient of the time function is not timelike at {point:?} (g(∇τ,∇τ) = {norm})")]
    NotSpacelikeLeaf { point: Vec<f64>, norm: f64 },
    #[error("leaf frame is degenerate at {point:?}")]
    DegenerateFrame { point: Vec<f64> },
    #[error("vector field is not tangent to the leaf: g(V,N) = {cross}")]
    NotLeafTangent { cross: f64 },
    #[error("normal curve left the chart domain at s = {s} near {exit:?}")]
    LeftDomain { s: f64, exit: Vec<f64> },
    #[error("no unique identity signature: {passing} signatures pass the tolerance {tol:e}")]
    NoUniqueSignature { passing: usize, tol: f64, ties: Vec<[i8; 3]> },
    #[error("normal congruence is not geodesic: |∇_N N| = {accel:e}")]
    NotGeodesicNormal { accel: f64 },
    #[error("ambient curvature is not constant: deviation {deviation:e}")]
    NotConstantCurvature { deviation: f64 },
    #[error("comparison regime violated: {0}")]
    RegimeViolation(String),
    #[error("sampler produced no points")]
    EmptySampleSet,
    #[error("leaf is not compact: axis {axis} is not periodic")]
    NonCompactLeaf { axis: usize },
    #[error("bound violated ({which}) at {point:?}: {detail}")]
    BoundViolated { which: String, point: Vec<f64>, detail: String },
}

pub type Result<T> = std::result::Result<T, GeomError>;
