use thiserror::Error;

/// Errors raised by geometry, grid and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point too close to chart boundary: coordinate {coord} = {value} needs margin {margin} from {bound}")]
    Margin {
        coord: usize,
        value: f64,
        bound: f64,
        margin: f64,
    },
    #[error("degree overflow: {0} + {1} > 4")]
    DegreeOverflow(usize, usize),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("singular jacobian: |det| = {det} below floor {floor}")]
    SingularJacobian { det: f64, floor: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("coframe mismatch: structure declared in {expected}, form given in {found}")]
    FrameMismatch { expected: String, found: String },
    #[error("point coincides with center {0}")]
    Pole(usize),
    #[error("point on the symmetry axis (rho = {0})")]
    Axis(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("positivity failure at node {node}: minimum eigenvalue {min_eigenvalue}")]
    Positivity { node: usize, min_eigenvalue: f64 },
    #[error("iterate left the ball: |psi|_Y = {norm} > R = {radius}; try a smaller a")]
    BallEscape { norm: f64, radius: f64 },
    #[error("no convergence after {iterations} iterations (history: {history:?})")]
    NoConvergence { iterations: usize, history: Vec<f64> },
    #[error("field is not mean-zero: weighted mean {0}")]
    NotMeanZero(f64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad field file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
