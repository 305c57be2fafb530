use thiserror::Error;

/// Errors raised by the physics and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular configuration: bodies {0} and {1} coincide")]
    SingularConfiguration(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("anomaly solver did not converge after {iterations} iterations (M = {mean_anomaly}, e = {eccentricity})")]
    SolverNonConvergence {
        mean_anomaly: f64,
        eccentricity: f64,
        iterations: usize,
    },

    #[error("orbit is parabolic to working precision (specific energy {0:e})")]
    ParabolicOrbit(f64),

    #[error("point (eps_B = {eps_b}, l_B = {l_b}) lies outside the allowed binary region")]
    ForbiddenRegion { eps_b: f64, l_b: f64 },

    #[error("infeasible scattering geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("step size underflow at t = {time}: close encounter below working precision")]
    StepUnderflow { time: f64 },

    #[error("query ({0}, {1}) lies outside the interpolation hull")]
    Extrapolation(f64, f64),

    #[error("insufficient ring coverage at l_B = {l_b}: {covered:.3} of the ring is inside the grid")]
    InsufficientCoverage { l_b: f64, covered: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("zero median in normalization region")]
    ZeroMedian,

    #[error("data error: {0}")]
    Data(String),

    #[error("incompatible maps: {0}")]
    Incompatible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
