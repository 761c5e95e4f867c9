use thiserror::Error;

/// Errors raised by the library. Numeric payloads are widened to `f64`
/// so the type does not depend on the scalar parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside its domain ({reason})")]
    Domain {
        quantity: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("pressure law `{label}` gave a non-finite value at xi = {xi}")]
    Evaluation { label: String, xi: f64 },

    #[error("no bracket for a*(c) with c = {c}: xi^3 p'(xi) never reaches c^2 within [2^-60, 2^60]")]
    UnboundedSearch { c: f64 },

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:e}){hint}")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        hint: &'static str,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("mode index k = {k} is out of range 0..={max}")]
    Index { k: usize, max: usize },

    #[error("degenerate period: {what} = {value:e} is numerically zero")]
    DegeneratePeriod { what: &'static str, value: f64 },

    #[error("degenerate corner: theta radicand = {radicand:e} is not positive")]
    DegenerateCorner { radicand: f64 },

    #[error("amplitude s = {s} exceeds the local chart limit s_max = {s_max}; trace the branch instead")]
    StepTooLarge { s: f64, s_max: f64 },

    #[error("period L = {period} is within {spacing:e} of the exceptional period {exceptional}")]
    ExceptionalPeriod {
        period: f64,
        exceptional: f64,
        spacing: f64,
    },

    #[error("singular linear system (zero pivot in column {0})")]
    Singular(usize),

    #[error("{0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            quantity,
            value,
            reason,
        }
    }

    /// Solver failures as opposed to bad inputs.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Singular(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Parse(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
