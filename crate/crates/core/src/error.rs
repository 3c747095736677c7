use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("bias parameter must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("signal `{0}` has zero probability under the updating prior")]
    ZeroLikelihoodSignal(String),
    #[error("biased posterior is not reachable: coordinate {state} is {value} < alpha * anchor = {bound}")]
    InfeasibleBiasedPosterior {
        state: usize,
        value: f64,
        bound: f64,
    },
    #[error("targets are not Bayes plausible (max deviation {0:e})")]
    NotBayesPlausible(f64),
    #[error("prior assigns zero probability to state {0}")]
    ZeroPriorState(usize),
    #[error("invalid decision problem: {0}")]
    InvalidProblem(String),
    #[error("operation requires common preferences (u = v)")]
    NotCommonPreferences,
    #[error("operation requires transparent sender motives")]
    NotTransparentMotives,
    #[error("operation is not supported for the {0} action model")]
    UnsupportedActionModel(&'static str),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("sender model is incompatible with the update procedure: {0}")]
    IncompatibleSenderModel(String),
    #[error("strategy depth exceeds the cap of {0}")]
    DepthCapExceeded(usize),
    #[error("strategy has more than {0} terminal outcomes")]
    LeafCapExceeded(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("prior cannot be represented as a combination of grid beliefs")]
    InfeasibleGrid,
    #[error("linear program failed: {0}")]
    LinearProgram(String),
    #[error("frame support is not usable: {0}")]
    DegenerateGeometry(String),
    #[error("belief is outside the convex hull of the frame support")]
    NotInHull,
    #[error("target weights do not match the barycentric coordinates of the prior (max deviation {0:e})")]
    WeightMismatch(f64),
    #[error("target belief is outside F(mu0, alpha) or equals the prior")]
    TargetInfeasible,
    #[error("gamma_bar = {0} is out of range")]
    GammaOutOfRange(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
