pub mod boundary;
pub mod closed_form;
pub mod error;
pub mod estimate;
pub mod io;
pub mod isotonic;
pub mod model;
pub mod pde;
pub mod quad;
pub mod quadrature;
pub mod sampler;
pub mod statics;
pub mod value;

pub use boundary::{
    Boundary, BoundaryCurve, ConstantBoundary, RewardEstimator, SolveReport, SolverSettings,
};
pub use error::{Error, Result};
pub use estimate::ValueEstimate;
pub use model::{ModelParams, Param};
pub use sampler::SamplerConfig;
