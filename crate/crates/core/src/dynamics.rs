//! Langevin systems of the rotationally invariant DOPO and observable
//! extraction from their trajectories.
//!
//! All systems run in dimensionless time `gamma_s t`. The complex noise pair
//! `(xi, xi^+)` is wired as in the positive-P equations: `alpha_+1` gets `xi`,
//! `alpha_-1` gets `conj(xi)`, `alpha_+1^+` gets `xi^+` and `alpha_-1^+` gets
//! `conj(xi^+)`. Fluctuation vectors are ordered `(b_+1, b_+1^+, b_-1, b_-1^+)`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::modes;
use crate::stochastic::{Diagnostics, NoiseDraw, StochasticSystem};

/// Goldstone mode of the linearized dynamics.
pub const W0: [f64; 4] = [0.5, -0.5, -0.5, 0.5];
/// Mode whose projection is the squeezed quadrature.
pub const W1: [f64; 4] = [-0.5, -0.5, 0.5, 0.5];

/// Warn about anisotropic runs this far above threshold: the linearized noise
/// of the anisotropic model has not been validated there.
const ANISO_SIGMA_LIMIT: f64 = 5.0;

/// Four independent positive-P amplitudes; the `+` variables are not the
/// conjugates of the others.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PPState {
    pub alpha_p1: Complex64,
    pub alpha_p1_plus: Complex64,
    pub alpha_m1: Complex64,
    pub alpha_m1_plus: Complex64,
}

impl PPState {
    pub fn from_slice(x: &[Complex64]) -> Self {
        Self {
            alpha_p1: x[0],
            alpha_p1_plus: x[1],
            alpha_m1: x[2],
            alpha_m1_plus: x[3],
        }
    }

    pub fn to_array(self) -> [Complex64; 4] {
        [
            self.alpha_p1,
            self.alpha_p1_plus,
            self.alpha_m1,
            self.alpha_m1_plus,
        ]
    }

    /// Classical state `alpha_{±1} = rho e^{∓ i theta}`, `alpha^+ = conj(alpha)`.
    pub fn classical(rho: f64, theta: f64) -> Self {
        let a = Complex64::from_polar(rho, -theta);
        Self {
            alpha_p1: a,
            alpha_p1_plus: a.conj(),
            alpha_m1: a.conj(),
            alpha_m1_plus: a,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl crate::stochastic::SampleColumns for PPState {
    fn column_names() -> Vec<String> {
        ["ap1", "ap1_plus", "am1", "am1_plus"]
            .iter()
            .flat_map(|n| [format!("re_{n}"), format!("im_{n}")])
            .collect()
    }
    fn write_values<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let a = self.to_array();
        for (i, v) in a.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{:.12e},{:.12e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Fluctuations around the rotated classical state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluctuationState {
    pub b: [Complex64; 4],
    pub theta: f64,
}

impl FluctuationState {
    /// Inverts `alpha_{±1} = (rho + b_{±1}) e^{∓ i theta}` (and the `+` companions).
    pub fn from_amplitudes(state: &PPState, rho: f64, theta: f64) -> Self {
        let e = Complex64::from_polar(1.0, theta);
        Self {
            b: [
                state.alpha_p1 * e - rho,
                state.alpha_p1_plus * e.conj() - rho,
                state.alpha_m1 * e.conj() - rho,
                state.alpha_m1_plus * e - rho,
            ],
            theta,
        }
    }

    pub fn to_amplitudes(&self, rho: f64) -> PPState {
        let e = Complex64::from_polar(1.0, -self.theta);
        PPState {
            alpha_p1: (rho + self.b[0]) * e,
            alpha_p1_plus: (rho + self.b[1]) * e.conj(),
            alpha_m1: (rho + self.b[2]) * e.conj(),
            alpha_m1_plus: (rho + self.b[3]) * e,
        }
    }
}

#[inline]
fn dot(w: &[f64; 4], b: &[Complex64]) -> Complex64 {
    w.iter().zip(b).map(|(w, b)| b * *w).sum()
}

/// Noise vector of the linearized equations, in `b` ordering.
#[inline]
fn linear_noise(dw: NoiseDraw) -> [Complex64; 4] {
    [dw.xi, dw.xi_plus, dw.xi.conj(), dw.xi_plus.conj()]
}

/// Linear drift matrix of the isotropic model in physical units (`gamma_s` included).
pub fn drift_matrix(params: &ModelParams) -> [[f64; 4]; 4] {
    anisotropic_drift_matrix(&ModelParams {
        kappa: 0.0,
        ..*params
    })
}

/// Linear drift matrix around the anisotropic steady state `alpha = g^-1 sqrt(sigma + kappa - 1)`.
/// Reduces to [`drift_matrix`] at `kappa = 0`.
pub fn anisotropic_drift_matrix(params: &ModelParams) -> [[f64; 4]; 4] {
    let s = params.sigma;
    let k = params.kappa;
    let d = -(s + k);
    let c = 1.0 - s;
    let x = 1.0 - k;
    let gs = params.gamma_s;
    [
        [d * gs, 0.0, c * gs, x * gs],
        [0.0, d * gs, x * gs, c * gs],
        [c * gs, x * gs, d * gs, 0.0],
        [x * gs, c * gs, 0.0, d * gs],
    ]
}

fn mat_vec(m: &[[f64; 4]; 4], b: &[Complex64], out: &mut [Complex64]) {
    for (row, o) in m.iter().zip(out.iter_mut()) {
        *o = row.iter().zip(b).map(|(a, b)| b * *a).sum();
    }
}

/// Drift of the anisotropic model for any `kappa >= 0` (the isotropic model at `kappa = 0`).
pub fn anisotropic_drift(sigma: f64, kappa: f64, g: f64, x: &[Complex64], out: &mut [Complex64]) {
    let g2 = g * g;
    let [ap, ap_plus, am, am_plus] = [x[0], x[1], x[2], x[3]];
    out[0] = -ap + kappa * am + sigma * am_plus - g2 * am_plus * am * ap;
    out[1] = -ap_plus + kappa * am_plus + sigma * am - g2 * am * am_plus * ap_plus;
    out[2] = -am + kappa * ap + sigma * ap_plus - g2 * ap_plus * ap * am;
    out[3] = -am_plus + kappa * ap_plus + sigma * ap - g2 * ap * ap_plus * am_plus;
}

/// Full nonlinear positive-P equations with the pump adiabatically eliminated.
#[derive(Debug, Clone)]
pub struct NonlinearSystem {
    params: ModelParams,
    rho: f64,
}

impl NonlinearSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        params.require_isotropic("nonlinear_system")?;
        Ok(Self {
            params: *params,
            rho: params.rho(),
        })
    }

    /// `sqrt(chi alpha_0 / gamma_s)` and its `+` companion (principal branch).
    pub fn noise_amplitudes(&self, x: &[Complex64]) -> (Complex64, Complex64) {
        let pump = model::adiabatic_pump(x[0], x[2], &self.params);
        let pump_plus = model::adiabatic_pump(x[1], x[3], &self.params);
        (pump.sqrt(), pump_plus.sqrt())
    }
}

impl StochasticSystem for NonlinearSystem {
    fn dim(&self) -> usize {
        4
    }

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        anisotropic_drift(self.params.sigma, 0.0, self.params.g, x, out);
    }

    fn add_noise(
        &self,
        x: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        diag: &mut Diagnostics,
    ) {
        let pump = model::adiabatic_pump(x[0], x[2], &self.params);
        let pump_plus = model::adiabatic_pump(x[1], x[3], &self.params);
        if pump.re < 0.0 || pump_plus.re < 0.0 {
            diag.branch_cut_steps += 1;
        }
        let a = pump.sqrt();
        let a_plus = pump_plus.sqrt();
        out[0] += a * dw.xi;
        out[1] += a_plus * dw.xi_plus;
        out[2] += a * dw.xi.conj();
        out[3] += a_plus * dw.xi_plus.conj();
    }

    fn escape_scale(&self) -> f64 {
        self.rho.max(1.0)
    }
}

/// Linearized fluctuations in the `(b_perp, theta)` decomposition: `b` evolves
/// under `L` with the Goldstone component of the noise removed, and that
/// component drives `theta` instead. State: `(b_+1, b_+1^+, b_-1, b_-1^+, theta)`.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    matrix: [[f64; 4]; 4],
    rho: f64,
}

impl LinearizedSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        params.require_isotropic("linearized_system")?;
        params.require_above_threshold("linearized_system")?;
        let unit = ModelParams {
            gamma_s: 1.0,
            ..*params
        };
        Ok(Self {
            matrix: drift_matrix(&unit),
            rho: params.rho(),
        })
    }

    pub fn initial_state(theta0: f64) -> [Complex64; 5] {
        let mut x = [Complex64::ZERO; 5];
        x[4] = Complex64::from(theta0);
        x
    }
}

impl StochasticSystem for LinearizedSystem {
    fn dim(&self) -> usize {
        5
    }

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        mat_vec(&self.matrix, &x[..4], &mut out[..4]);
        out[4] = Complex64::ZERO;
    }

    fn add_noise(
        &self,
        x: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        diag: &mut Diagnostics,
    ) {
        let n = linear_noise(dw);
        let goldstone = dot(&W0, &n);
        for i in 0..4 {
            out[i] += n[i] - goldstone * W0[i];
        }
        // w0.db - 2 i rho dtheta = w0.noise with w0.b held at zero
        out[4] += Complex64::new(0.0, 0.5 / self.rho) * goldstone;
        if x[..4].iter().any(|b| b.norm() > 0.1 * self.rho) {
            diag.large_fluctuation_steps += 1;
        }
    }
}

/// Orientation Wiener process `dtheta = sqrt(D_theta) Im(dW^+ - dW)`.
#[derive(Debug, Clone)]
pub struct ThetaSystem {
    sqrt_diffusion: f64,
}

impl ThetaSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let d = model::diffusion_coefficient(params)? / params.gamma_s;
        Ok(Self::with_diffusion(d))
    }

    /// Dimensionless diffusion coefficient `D_theta / gamma_s`.
    pub fn with_diffusion(d: f64) -> Self {
        Self {
            sqrt_diffusion: d.max(0.0).sqrt(),
        }
    }
}

impl StochasticSystem for ThetaSystem {
    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, _: &[Complex64], out: &mut [Complex64]) {
        out[0] = Complex64::ZERO;
    }

    fn add_noise(
        &self,
        _: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        _: &mut Diagnostics,
    ) {
        out[0] += self.sqrt_diffusion * (dw.xi_plus.im - dw.xi.im);
    }
}

/// Squeezed-mode projection `dc1 = -2 c1 dt - i Im(dW^+ + dW)`.
#[derive(Debug, Clone, Default)]
pub struct C1System;

impl C1System {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        params.require_above_threshold("c1_system")?;
        Ok(Self)
    }
}

impl StochasticSystem for C1System {
    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        out[0] = -2.0 * x[0];
    }

    fn add_noise(
        &self,
        _: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        _: &mut Diagnostics,
    ) {
        out[0] += Complex64::new(0.0, -(dw.xi_plus.im + dw.xi.im));
    }
}

fn check_anisotropic(params: &ModelParams, what: &'static str) -> Result<()> {
    params.validate()?;
    if !(params.kappa > 0.0 && params.kappa < 1.0) {
        return Err(Error::param(
            "kappa",
            format!("{what} needs 0 < kappa < 1, got {}", params.kappa),
        ));
    }
    params.require_above_threshold(what)?;
    if params.sigma > ANISO_SIGMA_LIMIT {
        log::warn!(
            "anisotropic run at sigma = {} > {ANISO_SIGMA_LIMIT}: linearized noise not validated this far above threshold",
            params.sigma
        );
    }
    Ok(())
}

/// Constant noise amplitude of the anisotropic model: the gain-clamped pump
/// noise `sqrt(chi alpha_0 / gamma_s) = sqrt(1 - kappa)` at the steady state.
pub fn anisotropic_noise_amplitude(params: &ModelParams) -> f64 {
    (1.0 - params.kappa).sqrt()
}

/// Output coupling of the detected vertical H-G mode, `gamma_y / gamma_s`.
pub fn anisotropic_detection_rate(params: &ModelParams) -> f64 {
    1.0 + params.kappa
}

/// Anisotropic cavity: nonlinear drift with linear-approximation (constant) noise.
#[derive(Debug, Clone)]
pub struct AnisotropicSystem {
    params: ModelParams,
    noise: f64,
    rho: f64,
}

impl AnisotropicSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        check_anisotropic(params, "anisotropic_system")?;
        Ok(Self {
            params: *params,
            noise: anisotropic_noise_amplitude(params),
            rho: params.rho(),
        })
    }
}

impl StochasticSystem for AnisotropicSystem {
    fn dim(&self) -> usize {
        4
    }

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        anisotropic_drift(self.params.sigma, self.params.kappa, self.params.g, x, out);
    }

    fn add_noise(
        &self,
        _: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        _: &mut Diagnostics,
    ) {
        let n = linear_noise(dw);
        // PPState ordering equals b ordering
        for (o, n) in out.iter_mut().zip(n) {
            *o += self.noise * n;
        }
    }

    fn escape_scale(&self) -> f64 {
        self.rho.max(1.0)
    }
}

/// Linearized anisotropic fluctuations `b` around the horizontal steady state (`theta = 0`).
#[derive(Debug, Clone)]
pub struct AnisotropicLinearSystem {
    matrix: [[f64; 4]; 4],
    noise: f64,
}

impl AnisotropicLinearSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        check_anisotropic(params, "anisotropic_linear_system")?;
        let unit = ModelParams {
            gamma_s: 1.0,
            ..*params
        };
        Ok(Self {
            matrix: anisotropic_drift_matrix(&unit),
            noise: anisotropic_noise_amplitude(params),
        })
    }
}

impl StochasticSystem for AnisotropicLinearSystem {
    fn dim(&self) -> usize {
        4
    }

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        mat_vec(&self.matrix, x, out);
    }

    fn add_noise(
        &self,
        _: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        _: &mut Diagnostics,
    ) {
        for (o, n) in out.iter_mut().zip(linear_noise(dw)) {
            *o += self.noise * n;
        }
    }
}

/// Continuous orientation estimate `theta = arg(alpha_-1 / alpha_+1) / 2`.
///
/// The ratio fixes `theta` modulo `pi`; each update picks the branch nearest
/// to the previous value.
#[derive(Debug, Clone)]
pub struct ThetaTracker {
    rho: f64,
    previous: Option<f64>,
    sample: usize,
}

impl ThetaTracker {
    /// `reference` seeds the branch choice for the first sample.
    pub fn new(rho: f64, reference: Option<f64>) -> Self {
        Self {
            rho,
            previous: reference,
            sample: 0,
        }
    }

    pub fn update(&mut self, alpha_p1: Complex64, alpha_m1: Complex64) -> Result<f64> {
        let floor = 1e-6 * self.rho;
        if alpha_p1.norm() < floor || alpha_m1.norm() < floor || alpha_p1 == Complex64::ZERO {
            return Err(Error::UndefinedPhase {
                sample: self.sample,
            });
        }
        let raw = 0.5 * (alpha_m1 / alpha_p1).arg();
        let theta = match self.previous {
            Some(prev) => {
                raw + ((prev - raw) / std::f64::consts::PI).round() * std::f64::consts::PI
            }
            None => raw,
        };
        self.previous = Some(theta);
        self.sample += 1;
        Ok(theta)
    }
}

/// Unwrapped orientation series of a positive-P trajectory.
pub fn extract_theta(samples: &[PPState], rho: f64) -> Result<Vec<f64>> {
    let mut tracker = ThetaTracker::new(rho, None);
    samples
        .iter()
        .map(|s| tracker.update(s.alpha_p1, s.alpha_m1))
        .collect()
}

/// `c1 = w1 . b`.
pub fn extract_c1(b: &[Complex64; 4]) -> Complex64 {
    dot(&W1, b)
}

/// Goldstone component `w0 . b`.
pub fn goldstone_component(b: &[Complex64; 4]) -> Complex64 {
    dot(&W0, b)
}

pub fn extract_c1_series(bs: &[[Complex64; 4]]) -> Vec<Complex64> {
    bs.iter().map(extract_c1).collect()
}

/// Homodyne fluctuation for the orthogonal LO, `sqrt(2) sin(psi_L) c1`.
pub fn delta_e(c1: Complex64, psi_l: f64) -> Complex64 {
    SQRT_2 * psi_l.sin() * c1
}

pub fn delta_e_series(c1: &[Complex64], psi_l: f64) -> Vec<Complex64> {
    c1.iter().map(|c| delta_e(*c, psi_l)).collect()
}

/// Homodyne field of the fluctuations `b` in the rotating frame, for a unit LO
/// `e^{i psi_L} TEM01(theta)`; the classical part cancels identically.
pub fn homodyne_from_fluctuations(b: &[Complex64; 4], psi_l: f64) -> Complex64 {
    modes::modal_homodyne(b, 0.0, psi_l)
}
