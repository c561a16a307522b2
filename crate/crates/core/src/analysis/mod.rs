//! Closed-form oracles and Monte-Carlo estimators with uncertainties.

pub mod diffusion;
pub mod eigen;
pub mod spectrum;

pub use diffusion::{fit_diffusion, DiffusionFit, DiffusionOptions};
pub use eigen::{eigensystem_l, Eigensystem};
pub use spectrum::{
    analytic_curve, analytic_v, analytic_v_aniso, max_lag_for_rate, mc_spectrum, omega_grid,
    AnisoQuadrature, SpectrumEstimate, SpectrumOptions, SpectrumResult,
};
