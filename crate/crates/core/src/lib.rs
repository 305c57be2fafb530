pub mod classifier;
pub mod dynamics;
pub mod error;
pub mod flux;
pub mod grids;
pub mod integrator;
pub mod kepler;
pub mod pipeline;
pub mod scalar;
pub mod setup;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases used by the pipeline.
pub type State = dynamics::ThreeBodyState<f64>;
pub type Elements = kepler::OrbitalElements<f64>;
pub type Integrator = integrator::Integrator<f64>;
