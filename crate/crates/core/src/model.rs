//! Dimensionless DOPO parameters, classical steady states and threshold logic.
//!
//! Time is measured in units of the signal damping `gamma_s` everywhere in the
//! dynamics; `gamma_s` itself only labels outputs in physical units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this pump/signal damping ratio the adiabatic elimination is flagged.
pub const ADIABATIC_WARN_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Pump amplitude relative to threshold; `sigma^2` scales with pump power.
    pub sigma: f64,
    /// Dimensionless nonlinear coupling `chi / sqrt(gamma_p gamma_s)`.
    pub g: f64,
    pub gamma_s: f64,
    pub gamma_p_over_gamma_s: f64,
    /// Cavity anisotropy `(gamma_y - gamma_x) / (gamma_y + gamma_x)`.
    pub kappa: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            g: 0.01,
            gamma_s: 1.0,
            gamma_p_over_gamma_s: 100.0,
            kappa: 0.0,
        }
    }
}

impl ModelParams {
    pub fn new(sigma: f64, g: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            sigma,
            g,
            kappa,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(sigma: f64, g: f64) -> Result<Self> {
        Self::new(sigma, g, 0.0)
    }

    /// Checks every invariant. A damping ratio in (1, 10) is accepted with a
    /// warning since the adiabatic pump elimination is then only marginal.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        positive("sigma", self.sigma)?;
        positive("g", self.g)?;
        positive("gamma_s", self.gamma_s)?;
        let r = self.gamma_p_over_gamma_s;
        if !r.is_finite() || r <= 1.0 {
            return Err(Error::param(
                "gamma_p_over_gamma_s",
                format!("adiabatic pump elimination needs gamma_p >> gamma_s, got ratio {r}"),
            ));
        }
        if r < ADIABATIC_WARN_RATIO {
            log::warn!(
                "gamma_p/gamma_s = {r} < {ADIABATIC_WARN_RATIO}: adiabatic regime is marginal"
            );
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::param(
                "kappa",
                format!("must lie in [0, 1), got {}", self.kappa),
            ));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.kappa == 0.0
    }

    /// Oscillation threshold `1 - kappa` on `sigma`.
    pub fn threshold(&self) -> f64 {
        1.0 - self.kappa
    }

    pub fn above_threshold(&self) -> bool {
        self.sigma > self.threshold()
    }

    pub fn gamma_p(&self) -> f64 {
        self.gamma_p_over_gamma_s * self.gamma_s
    }

    /// Nonlinear coupling constant `chi = g sqrt(gamma_p gamma_s)`.
    pub fn chi(&self) -> f64 {
        self.g * (self.gamma_p() * self.gamma_s).sqrt()
    }

    /// External pump amplitude `E_p = sigma gamma_p gamma_s / chi`.
    pub fn pump_drive(&self) -> f64 {
        self.sigma * self.gamma_p() * self.gamma_s / self.chi()
    }

    /// Classical mode amplitude; zero at and below threshold.
    pub fn rho(&self) -> f64 {
        let excess = self.sigma - self.threshold();
        if excess > 0.0 {
            excess.sqrt() / self.g
        } else {
            0.0
        }
    }

    /// Slowest deterministic relaxation rate around the steady state, in units of `gamma_s`.
    /// Anisotropy damps the orientation mode at `2 kappa`.
    pub fn slowest_relaxation_rate(&self) -> f64 {
        let rate = (2.0 * (self.sigma - self.threshold()).abs()).min(2.0);
        if self.kappa > 0.0 {
            rate.min(2.0 * self.kappa)
        } else {
            rate
        }
    }

    /// Burn-in covering ten slowest relaxation times (dimensionless time).
    pub fn default_burn_in(&self) -> f64 {
        10.0 / self.slowest_relaxation_rate()
    }

    pub(crate) fn require_above_threshold(&self, what: &'static str) -> Result<()> {
        if self.above_threshold() {
            Ok(())
        } else {
            Err(Error::BelowThreshold {
                what,
                sigma: self.sigma,
                threshold: self.threshold(),
            })
        }
    }

    pub(crate) fn require_isotropic(&self, what: &'static str) -> Result<()> {
        if self.is_isotropic() {
            Ok(())
        } else {
            Err(Error::param(
                "kappa",
                format!("{what} is defined for the isotropic cavity only (kappa = 0)"),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSteadyState {
    pub rho: f64,
    /// Orientation of the emitted H-G mode (radians).
    pub theta: f64,
    pub above_threshold: bool,
    /// True for the isotropic cavity, where any orientation is a steady state.
    pub theta_arbitrary: bool,
}

impl ClassicalSteadyState {
    /// `(alpha_+1, alpha_+1^+, alpha_-1, alpha_-1^+)` of the classical state.
    pub fn amplitudes(&self) -> [Complex64; 4] {
        let a = Complex64::from_polar(self.rho, -self.theta);
        [a, a.conj(), a.conj(), a]
    }
}

/// Classical steady state with orientation 0.
pub fn steady_state(params: &ModelParams) -> ClassicalSteadyState {
    steady_state_with_theta(params, 0.0)
}

/// Classical steady state. `theta` is honoured only for the isotropic cavity;
/// anisotropy pins the emission to the low-loss (horizontal) axis.
pub fn steady_state_with_theta(params: &ModelParams, theta: f64) -> ClassicalSteadyState {
    let isotropic = params.is_isotropic();
    ClassicalSteadyState {
        rho: params.rho(),
        theta: if isotropic { theta } else { 0.0 },
        above_threshold: params.above_threshold(),
        theta_arbitrary: isotropic,
    }
}

/// Orientation diffusion coefficient `D_theta` in physical units (1/time),
/// i.e. `g^2 gamma_s / (4 (sigma - 1))`.
pub fn diffusion_coefficient(params: &ModelParams) -> Result<f64> {
    params.require_isotropic("diffusion_coefficient")?;
    if params.sigma <= 1.0 {
        return Err(Error::BelowThreshold {
            what: "diffusion_coefficient",
            sigma: params.sigma,
            threshold: 1.0,
        });
    }
    Ok(params.g * params.g * params.gamma_s / (4.0 * (params.sigma - 1.0)))
}

/// `D_theta = chi^2 / (4 gamma_p (sigma - 1))` from the raw rates.
pub fn diffusion_coefficient_from_rates(chi: f64, gamma_p: f64, sigma: f64) -> f64 {
    chi * chi / (4.0 * gamma_p * (sigma - 1.0))
}

/// Adiabatically eliminated pump in the form `chi alpha_0 / gamma_s = sigma - g^2 alpha_+1 alpha_-1`.
/// The `+` companion is obtained by passing `alpha_+1^+, alpha_-1^+`.
pub fn adiabatic_pump(alpha_p1: Complex64, alpha_m1: Complex64, params: &ModelParams) -> Complex64 {
    params.sigma - params.g * params.g * alpha_p1 * alpha_m1
}

/// Pump amplitude `alpha_0 = (E_p - chi alpha_+1 alpha_-1) / gamma_p` in mode units.
pub fn adiabatic_pump_amplitude(
    alpha_p1: Complex64,
    alpha_m1: Complex64,
    params: &ModelParams,
) -> Complex64 {
    (params.pump_drive() - params.chi() * alpha_p1 * alpha_m1) / params.gamma_p()
}
