use thiserror::Error;

/// Failures reported by the construction and certification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("system is not strictly hyperbolic at {state:?}: {reason}")]
    NotStrictlyHyperbolic { state: Vec<f64>, reason: String },
    #[error("shock is not a Lax shock (s = {speed})")]
    NotLax { speed: f64 },
    #[error("shock is characteristic: |lambda_{family} - s| = {gap:e}")]
    Characteristic { family: usize, gap: f64 },
    #[error("no roll-wave for these parameters: {0}")]
    NoRollWave(String),
    #[error("no heteroclinic connection: {0}")]
    NoConnection(String),
    #[error("log-linear decay fit failed: {0}")]
    FitFailed(String),
    #[error("inner source does not decay: |h(+-Xi)| = {0:e}")]
    NoDecay(f64),
    #[error("inner corrector is unbounded (max |U| = {0:e})")]
    Unbounded(f64),
    #[error("Majda-Liu determinant degenerate: |det| = {0:e}")]
    MajdaLiuDegenerate(f64),
    #[error("characteristics of family {family} collide before T* (t = {time})")]
    CharacteristicCollision { family: usize, time: f64 },
    #[error("matching condition violated: error {0:e}")]
    MatchFailure(f64),
    #[error("shock-fixing map is not monotone: min phi_z = {0:e}")]
    NotMonotone(f64),
    #[error("residual computations disagree: relative gap {0:e} at (z, t) = ({1}, {2})")]
    Disagreement(f64, f64, f64),
    #[error("scaling violation for {norm}: slope {slope:.3} < required {required:.3}")]
    ScalingViolation {
        norm: String,
        slope: f64,
        required: f64,
    },
    #[error("solution blew up at t = {0}")]
    Blowup(f64),
    #[error("CFL number {0:.3} exceeds the limit")]
    CflViolation(f64),
    #[error("convergence study is not monotone:\n{0}")]
    NonMonotone(String),
    #[error("Green's function bound grows with epsilon:\n{0}")]
    UnboundedGrowth(String),
    #[error("consistent splitting fails at lambda = {0}")]
    SplittingFailure(String),
    #[error("Evans integration overflow at lambda = {0}")]
    IntegrationOverflow(String),
    #[error("unstable spectrum: winding number {0}")]
    UnstableSpectrum(i64),
    #[error("zero of the Evans function at the origin is degenerate: |D'(0)| = {0:e}")]
    DegenerateZero(f64),
    #[error("ODE integration failed: {0}")]
    Integration(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{module}: {source}")]
    Context {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, module: &'static str) -> Error {
        Error::Context {
            module,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
