use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the empty word has no vertex image")]
    EmptyWord,
    #[error("word length {0} exceeds the supported maximum of {1} letters")]
    WordTooLong(usize, usize),
    #[error("invalid letter {0:?}: letters must be 0, 1 or 2")]
    InvalidLetter(char),
    #[error("depth {depth} exceeds the configured memory budget (max {max})")]
    DepthTooLarge { depth: usize, max: usize },
    #[error("word level {level} outside ball of depth {depth}")]
    OutsideBall { level: usize, depth: usize },
    #[error("distance query outside safety margin: level {level} > depth {depth} - 2")]
    MarginViolated { level: usize, depth: usize },
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(String, String),
    #[error("{0}")]
    InvalidParams(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("boundary prefix of length {prefix_len} is shorter than requested depth {depth}")]
    PrefixTooShort { prefix_len: usize, depth: usize },
    #[error("degenerate sample: all {0} pairs map to identified points")]
    DegenerateSample(usize),
    #[error("walk reached the truncation boundary at level {level}; rerun with a larger max level")]
    TruncationBoundary { level: usize },
    #[error("step budget of {budget} exhausted before the convergence criterion was met")]
    StepBudgetExhausted { budget: usize },
    #[error("cells {0} and {1} are adjacent; the separating construction requires disjoint cells")]
    CellsAdjacent(String, String),
    #[error("seed level assigns conflicting values across the identified pair ({0}, {1})")]
    SeedConflict(String, String),
    #[error("solver stalled: relative residual {residual:e} above tolerance {tol:e} after {iterations} iterations")]
    SolverStalled { residual: f64, tol: f64, iterations: usize },
    #[error("continuous extension not certified: lambda = {lambda} must lie below 1/3")]
    ExtensionNotCertified { lambda: f64 },
    #[error("scan grid does not bracket the convergent/divergent boundary")]
    NoBracket,
}
