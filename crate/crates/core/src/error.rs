use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("polygon is self-intersecting: edge {first} crosses edge {second}")]
    SelfIntersectingPolygon { first: usize, second: usize },

    #[error("bodies {body_a} and {body_b} interpenetrate (signed distance {distance:e} m)")]
    Interpenetration { body_a: usize, body_b: usize, distance: f64 },

    #[error("element {element} of body {body} is inverted or degenerate (det F = {det:e})")]
    InvertedElement { body: usize, element: usize, det: f64 },

    #[error("degenerate edge: endpoints closer than 1e-12 m")]
    DegenerateEdge,

    #[error("barrier evaluated outside its domain: d = {0:e}")]
    BarrierDomain(f64),

    #[error("newton did not converge after {iterations} iterations (|p|_inf = {step_norm:e}, |g|_inf = {grad_norm:e}, E = {energy:e})")]
    NewtonDidNotConverge { iterations: usize, step_norm: f64, grad_norm: f64, energy: f64 },

    #[error("line search step underflow (alpha = {alpha:e}, E = {energy:e})")]
    LineSearchFailed { alpha: f64, energy: f64 },

    #[error("linear solve failed after diagonal regularization")]
    LinearSolveFailed,

    #[error("scripted boundary targets could not be reached without crossing")]
    ScriptedMotionBlocked,

    #[error("missing labels for predictions: {0:?}")]
    MissingLabels(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("too many invalid trials: {invalid} invalid out of {attempts} attempts (needed {needed} valid)")]
    TrialBudgetExceeded { invalid: usize, attempts: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised by the nonlinear or linear solvers rather than by bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NewtonDidNotConverge { .. }
                | Error::LineSearchFailed { .. }
                | Error::LinearSolveFailed
                | Error::ScriptedMotionBlocked
                | Error::InvertedElement { .. }
                | Error::BarrierDomain(_)
        )
    }
}
