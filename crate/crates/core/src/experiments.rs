//! End-to-end runs: simulate an ensemble, extract the observable, estimate.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    analytic_curve, analytic_v_aniso, fit_diffusion, max_lag_for_rate, mc_spectrum,
    AnisoQuadrature, DiffusionFit, DiffusionOptions, SpectrumEstimate, SpectrumOptions,
    SpectrumResult,
};
use crate::dynamics::{
    anisotropic_detection_rate, delta_e, AnisotropicSystem, C1System, NonlinearSystem, PPState,
    ThetaSystem, ThetaTracker,
};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::modes::{self, ModeKind, TransverseField, TransverseGrid};
use crate::stochastic::{run_ensemble, Diagnostics, Ensemble, EnsembleSpec, StochasticSystem};

/// Damping rate of the squeezed projection `c1`, units of `gamma_s`.
const C1_DECAY_RATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumMode {
    /// Closed forms only.
    Analytic,
    /// Projected `c1` dynamics.
    LinearMc,
    /// Full positive-P equations, LO following the instantaneous orientation.
    NonlinearMc,
    /// Anisotropic cavity with a fixed vertical LO.
    Aniso,
}

impl SpectrumMode {
    pub const ALL: [SpectrumMode; 4] = [
        Self::Analytic,
        Self::LinearMc,
        Self::NonlinearMc,
        Self::Aniso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::LinearMc => "linear-mc",
            Self::NonlinearMc => "nonlinear-mc",
            Self::Aniso => "aniso",
        }
    }
}

impl fmt::Display for SpectrumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectrumMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "mode",
                    format!(
                        "unknown spectrum mode `{s}` (analytic, linear-mc, nonlinear-mc, aniso)"
                    ),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffusionMode {
    /// Orientation Wiener process alone.
    Theta,
    /// Orientation extracted from full positive-P trajectories.
    Nonlinear,
}

impl DiffusionMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theta => "theta",
            Self::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for DiffusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiffusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Self::Theta),
            "nonlinear" => Ok(Self::Nonlinear),
            _ => Err(Error::param(
                "diffusion_mode",
                format!("unknown diffusion mode `{s}` (theta, nonlinear)"),
            )),
        }
    }
}

/// Inputs of a spectrum run. Angles in radians, times in units of `1/gamma_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRun {
    pub params: ModelParams,
    pub psi_l: f64,
    pub omega: Vec<f64>,
    pub ensemble: EnsembleSpec,
    /// `None` sizes the lag window from the slowest detected correlation time.
    pub max_lag: Option<f64>,
    /// Initial orientation of nonlinear runs.
    pub theta0: f64,
    pub workers: usize,
}

pub struct SpectrumOutcome {
    pub result: SpectrumResult,
    pub estimate: Option<SpectrumEstimate>,
    /// Recorded homodyne fluctuations, per trajectory.
    pub series: Option<Ensemble<Complex64>>,
}

fn total_diagnostics<T>(e: &Ensemble<T>) -> Diagnostics {
    let mut d = Diagnostics::default();
    for t in &e.trajectories {
        d.merge(&t.diagnostics);
    }
    d
}

fn simulate_homodyne<S, F, O>(
    system: &S,
    initial: &[Complex64],
    run: &SpectrumRun,
    make_observer: F,
) -> Result<Ensemble<Complex64>>
where
    S: StochasticSystem,
    F: Fn(u64) -> O + Sync,
    O: FnMut(&[Complex64]) -> Result<Complex64>,
{
    if run.ensemble.n_trajectories == 0 {
        return Err(Error::param(
            "trajectories",
            "Monte-Carlo spectrum needs at least one trajectory",
        ));
    }
    run_ensemble(system, initial, &run.ensemble, run.workers, make_observer)
}

pub fn run_spectrum(mode: SpectrumMode, run: &SpectrumRun) -> Result<SpectrumOutcome> {
    let p = &run.params;
    p.validate()?;
    match mode {
        SpectrumMode::Analytic => {
            if p.is_isotropic() {
                p.require_above_threshold("analytic spectrum")?;
            } else {
                AnisoQuadrature::from_psi(run.psi_l)?;
            }
        }
        SpectrumMode::Aniso => {
            AnisoQuadrature::from_psi(run.psi_l)?;
        }
        _ => p.require_isotropic(mode.name())?,
    }
    let v_analytic = if mode == SpectrumMode::Aniso {
        let q = AnisoQuadrature::from_psi(run.psi_l)?;
        run.omega
            .iter()
            .map(|w| analytic_v_aniso(*w, q, p.kappa))
            .collect::<Result<Vec<_>>>()?
    } else {
        analytic_curve(&run.omega, run.psi_l, p)?
    };
    let mut result =
        SpectrumResult::analytic(mode.name(), run.omega.clone(), v_analytic, run.psi_l, p);
    if mode == SpectrumMode::Analytic
        || (mode == SpectrumMode::Aniso && run.ensemble.n_trajectories == 0)
    {
        return Ok(SpectrumOutcome {
            result,
            estimate: None,
            series: None,
        });
    }

    let psi = run.psi_l;
    let (ensemble, decay_rate, detection_rate) = match mode {
        SpectrumMode::LinearMc => {
            let sys = C1System::new(p)?;
            let e = simulate_homodyne(&sys, &[Complex64::ZERO], run, |_| {
                move |x: &[Complex64]| Ok(delta_e(x[0], psi))
            })?;
            (e, C1_DECAY_RATE, 1.0)
        }
        SpectrumMode::NonlinearMc => {
            let sys = NonlinearSystem::new(p)?;
            p.require_above_threshold("nonlinear-mc spectrum")?;
            let rho = p.rho();
            let x0 = PPState::classical(rho, run.theta0).to_array();
            let theta0 = run.theta0;
            let e = simulate_homodyne(&sys, &x0, run, |_| {
                let mut tracker = ThetaTracker::new(rho, Some(theta0));
                move |x: &[Complex64]| {
                    let theta = tracker.update(x[0], x[2])?;
                    Ok(modes::modal_homodyne(&[x[0], x[1], x[2], x[3]], theta, psi))
                }
            })?;
            (e, p.slowest_relaxation_rate(), 1.0)
        }
        SpectrumMode::Aniso => {
            let sys = AnisotropicSystem::new(p)?;
            let x0 = [Complex64::from(p.rho()); 4];
            let e = simulate_homodyne(&sys, &x0, run, |_| {
                move |x: &[Complex64]| {
                    Ok(modes::modal_homodyne(&[x[0], x[1], x[2], x[3]], 0.0, psi))
                }
            })?;
            let rate = match AnisoQuadrature::from_psi(psi)? {
                AnisoQuadrature::Quadrature => C1_DECAY_RATE,
                AnisoQuadrature::InPhase => 2.0 * p.kappa,
            };
            (e, rate, anisotropic_detection_rate(p))
        }
        SpectrumMode::Analytic => unreachable!(),
    };

    let series = ensemble.completed_series();
    if series.is_empty() {
        return Err(Error::Divergence {
            diverged: ensemble.divergent_count(),
            total: ensemble.len(),
        });
    }
    let options = SpectrumOptions {
        omega: run.omega.clone(),
        max_lag: Some(run.max_lag.unwrap_or_else(|| max_lag_for_rate(decay_rate))),
        detection_rate,
    };
    let estimate = mc_spectrum(&series, ensemble.spec.sample_dt(), &options, run.workers)?;
    let diag = total_diagnostics(&ensemble);
    if diag.branch_cut_steps > 0 {
        let msg = format!(
            "{} integration steps with Re(chi alpha_0) < 0",
            diag.branch_cut_steps
        );
        log::warn!("{msg}");
        result.warnings.push(msg);
    }
    result.v_mc = Some(estimate.v.clone());
    result.stderr = Some(estimate.stderr.clone());
    result.n_trajectories = series.len();
    result.divergent_fraction = ensemble.divergent_fraction();
    result.master_seed = Some(run.ensemble.master_seed);
    result.max_lag = Some(estimate.max_lag);
    result.branch_cut_steps = diag.branch_cut_steps;
    result.large_fluctuation_steps = diag.large_fluctuation_steps;
    result.warnings.extend(ensemble.warnings.iter().cloned());
    result.warnings.extend(estimate.warnings.iter().cloned());
    Ok(SpectrumOutcome {
        result,
        estimate: Some(estimate),
        series: Some(ensemble),
    })
}

/// Inputs of a diffusion run. Times in units of `1/gamma_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRun {
    pub params: ModelParams,
    pub ensemble: EnsembleSpec,
    /// `None`: `10 dt` for the Wiener process, five slowest relaxation times
    /// for nonlinear runs (lets the non-Goldstone jitter of the estimator settle).
    pub fit_t_min: Option<f64>,
    pub theta0: f64,
    pub workers: usize,
}

impl DiffusionRun {
    pub fn default_fit_t_min(mode: DiffusionMode, params: &ModelParams, dt: f64) -> f64 {
        match mode {
            DiffusionMode::Theta => 10.0 * dt,
            DiffusionMode::Nonlinear => 5.0 / params.slowest_relaxation_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub mode: String,
    pub params: ModelParams,
    pub master_seed: u64,
    /// `D_theta` in physical units; the fit is in units of `gamma_s`.
    pub d_theta: f64,
    pub divergent_fraction: f64,
    pub branch_cut_steps: u64,
    pub fit: DiffusionFit,
}

pub struct DiffusionOutcome {
    pub report: DiffusionReport,
    /// Unwrapped orientation series, per trajectory.
    pub series: Ensemble<f64>,
}

pub fn run_diffusion(mode: DiffusionMode, run: &DiffusionRun) -> Result<DiffusionOutcome> {
    let p = &run.params;
    p.validate()?;
    let d_theta = model::diffusion_coefficient(p)?;
    let theta0 = run.theta0;
    let ensemble = match mode {
        DiffusionMode::Theta => {
            let sys = ThetaSystem::new(p)?;
            run_ensemble(
                &sys,
                &[Complex64::from(theta0)],
                &run.ensemble,
                run.workers,
                |_| |x: &[Complex64]| Ok(x[0].re),
            )?
        }
        DiffusionMode::Nonlinear => {
            let sys = NonlinearSystem::new(p)?;
            let rho = p.rho();
            let x0 = PPState::classical(rho, theta0).to_array();
            run_ensemble(&sys, &x0, &run.ensemble, run.workers, |_| {
                let mut tracker = ThetaTracker::new(rho, Some(theta0));
                move |x: &[Complex64]| tracker.update(x[0], x[2])
            })?
        }
    };
    let series = ensemble.completed_series();
    if series.len() < 2 {
        return Err(Error::Divergence {
            diverged: ensemble.divergent_count(),
            total: ensemble.len(),
        });
    }
    let options = DiffusionOptions {
        t_min: run
            .fit_t_min
            .unwrap_or_else(|| DiffusionRun::default_fit_t_min(mode, p, run.ensemble.dt)),
        record_fraction: 0.9,
        predicted: Some(d_theta / p.gamma_s),
    };
    let mut fit = fit_diffusion(&series, ensemble.spec.sample_dt(), &options)?;
    fit.warnings.splice(0..0, ensemble.warnings.iter().cloned());
    let diag = total_diagnostics(&ensemble);
    let report = DiffusionReport {
        mode: mode.name().to_string(),
        params: *p,
        master_seed: run.ensemble.master_seed,
        d_theta,
        divergent_fraction: ensemble.divergent_fraction(),
        branch_cut_steps: diag.branch_cut_steps,
        fit,
    };
    Ok(DiffusionOutcome {
        report,
        series: ensemble,
    })
}

/// Classical operating point and derived rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub params: ModelParams,
    pub threshold: f64,
    pub above_threshold: bool,
    pub rho: f64,
    /// Emission orientation (radians).
    pub theta: f64,
    pub theta_arbitrary: bool,
    pub gamma_p: f64,
    pub chi: f64,
    pub pump_drive: f64,
    /// Present for the isotropic cavity above threshold.
    pub d_theta: Option<f64>,
    pub d_theta_over_gamma_s: Option<f64>,
}

pub fn steady_report(params: &ModelParams, theta: f64) -> Result<SteadyReport> {
    params.validate()?;
    let s = model::steady_state_with_theta(params, theta);
    let d_theta = if params.is_isotropic() && s.above_threshold {
        Some(model::diffusion_coefficient(params)?)
    } else {
        None
    };
    Ok(SteadyReport {
        params: *params,
        threshold: params.threshold(),
        above_threshold: s.above_threshold,
        rho: s.rho,
        theta: s.theta,
        theta_arbitrary: s.theta_arbitrary,
        gamma_p: params.gamma_p(),
        chi: params.chi(),
        pump_drive: params.pump_drive(),
        d_theta,
        d_theta_over_gamma_s: d_theta.map(|d| d / params.gamma_s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Classical signal `rho TEM10(theta)`-shaped envelope.
    Classical,
    /// Unit local oscillator `e^{i psi_L} TEM01(theta)`.
    Lo,
    Gauss,
    LaguerrePlus,
    LaguerreMinus,
    Tem10,
    Tem01,
}

impl FieldKind {
    pub const ALL: [FieldKind; 7] = [
        Self::Classical,
        Self::Lo,
        Self::Gauss,
        Self::LaguerrePlus,
        Self::LaguerreMinus,
        Self::Tem10,
        Self::Tem01,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Classical => "classical",
            Self::Lo => "lo",
            Self::Gauss => "gauss",
            Self::LaguerrePlus => "lg+1",
            Self::LaguerreMinus => "lg-1",
            Self::Tem10 => "tem10",
            Self::Tem01 => "tem01",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "field",
                    format!("unknown field `{s}` (classical, lo, gauss, lg+1, lg-1, tem10, tem01)"),
                )
            })
    }
}

/// Samples a transverse field. Angles in radians.
pub fn field(
    kind: FieldKind,
    rho: f64,
    theta: f64,
    psi_l: f64,
    grid: &TransverseGrid,
) -> Result<TransverseField> {
    Ok(match kind {
        FieldKind::Classical => modes::classical_envelope(rho, theta, grid)?,
        FieldKind::Lo => modes::lo_envelope(theta, psi_l, grid),
        FieldKind::Gauss => modes::eval_mode(ModeKind::Gauss, grid),
        FieldKind::LaguerrePlus => modes::eval_mode(ModeKind::LaguerrePlus, grid),
        FieldKind::LaguerreMinus => modes::eval_mode(ModeKind::LaguerreMinus, grid),
        FieldKind::Tem10 => modes::eval_mode(ModeKind::Tem10 { theta }, grid),
        FieldKind::Tem01 => modes::eval_mode(ModeKind::Tem01 { theta }, grid),
    })
}
