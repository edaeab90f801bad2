use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed edge-list or label input.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Graph violates a structural requirement (isolated nodes, empty graph).
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("graph is not connected ({components} components)")]
    Disconnected { components: usize },

    /// μ′ is zero: the graph is bipartite or disconnected, so walks never mix.
    #[error("spectral gap is zero (bipartite or disconnected graph); mu_prime = {mu_prime}")]
    NoSpectralGap { mu_prime: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Simplex QP hit its iteration cap; carries the last iterate.
    #[error("simplex QP did not converge after {iterations} iterations (KKT residual {residual:.3e})")]
    QpNotConverged {
        iterations: usize,
        residual: f64,
        iterate: Vec<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{context} has {found} seed(s), needs at least {needed}")]
    InsufficientSeeds {
        context: String,
        found: usize,
        needed: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative or linear-algebra routine, as
    /// opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::QpNotConverged { .. } | Error::Singular(_)
        )
    }
}
