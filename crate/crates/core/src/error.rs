use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("invalid step distribution: {0}")]
    InvalidStep(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("enumeration bound exceeded: {size} states (bound {bound})")]
    EnumerationBound { size: usize, bound: usize },
    #[error("population cap exceeded: {live} live particles (cap {cap})")]
    PopulationCap { live: u64, cap: u64 },
    #[error("frontier cap exceeded: {size} sites (cap {cap})")]
    FrontierCap { size: usize, cap: usize },
    #[error("quadrature failed to converge: error estimate {err:.3e} above tolerance {tol:.3e}")]
    QuadratureNonConvergence { err: f64, tol: f64 },
    #[error("r-point order {got} above configured maximum {max}")]
    OrderTooLarge { got: usize, max: usize },
    #[error("zero effective sample size: all {total} samples rejected")]
    ZeroEffectiveSamples { total: usize },
    #[error("runaway cluster: size {size} exceeded cap {cap}; p is likely too close to p_c")]
    RunawayCluster { size: u64, cap: u64 },
    #[error("flow computation budget exceeded")]
    FlowBudget,
    #[error("boundary-effect guard violated: max time {t} exceeds N/4 = {guard}")]
    BoundaryGuard { t: usize, guard: usize },
    #[error("insufficient samples: {got} (need at least {need})")]
    InsufficientSamples { got: usize, need: usize },
    #[error("{0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
