use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("grid spacing is not uniform")]
    NonUniformGrid,
    #[error("grid length {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("finite-difference step did not stabilise: {0}")]
    UnstableDerivative(String),
    #[error("singular atom: |1 - r| = {0:e}")]
    SingularAtom(f64),
    #[error("degenerate closed form: |B| = {0:e}")]
    DegenerateB(f64),
    #[error("medium is opaque: transmission underflows")]
    OpaqueMedium,
    #[error("medium has zero length (n = {0}); need at least two atoms")]
    ZeroLength(usize),
    #[error("no transparency window: d2 ln T / d delta2 = {0:e} >= 0")]
    NotAWindow(f64),
    #[error("outside the regime of validity: {0}")]
    InvalidRegime(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("frequency grid too narrow: {outside:e} of the spectral energy lies outside")]
    GridTooNarrow { outside: f64 },
    #[error("time grid cannot resolve the storage window: {0}")]
    GridTooCoarse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
