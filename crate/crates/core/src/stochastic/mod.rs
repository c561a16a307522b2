//! Complex Ito SDE integration (Euler-Maruyama), structured complex noise,
//! and a reproducible parallel ensemble runner.

mod ensemble;
mod integrator;
mod noise;

pub use ensemble::{
    run_ensemble, write_trajectories_csv, Ensemble, EnsembleSpec, SampleColumns, DEFAULT_DT,
    DEFAULT_SAMPLES,
};
pub use integrator::{integrate, Diagnostics, NoiseFree, StochasticSystem, Trajectory};
pub use noise::{NoiseDraw, TrajectoryRng};
