//! χ² fitting: problem definition, bounded multi-start simplex, profile
//! likelihood intervals, and the forward-model bindings used by the analyses.

pub mod manifest;
pub mod models;
mod optimize;
mod problem;
mod profile;
pub mod tasks;

pub use optimize::{fit, minimize, uncertainty_1sigma, FitConfig, FitResult, ParameterEstimate, RestartRecord};
pub use problem::{Dataset, FitProblem, ForwardModel, Parameter, ParameterMode};
pub use profile::{Interval, ProfilePoint, ProfileTrace};
