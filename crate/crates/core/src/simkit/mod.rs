//! Independent numerical oracles and synthetic data: Bloch-equation
//! integration with quantum regression, quantum-jump click streams under
//! telegraph blinking, and noisy datasets for fit validation.

pub mod bloch;
pub mod correlate;
mod ode;
pub mod stream;
pub mod synth;
pub mod telegraph;

pub use bloch::{
    bloch_steady_state, evolve_bloch, regression_correlator, regression_g1, regression_g2, regression_spectrum,
    BlochState, CorrelatorOrder,
};
pub use correlate::{coincidence_counts, correlate_stream};
pub use stream::{poisson_stream, simulate_clickstream, ClickStream};
pub use synth::{synthesize_dataset, DatasetSpec, NoiseModel, SyntheticData, SyntheticDataset};
pub use telegraph::{TelegraphRates, TelegraphTrajectory};
