//! Squeezing spectra: closed forms and the Monte-Carlo estimator.
//!
//! Frequencies are in units of `gamma_s` and time series are sampled in
//! dimensionless time `gamma_s t`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_OMEGA_MAX: f64 = 10.0;
pub const DEFAULT_OMEGA_POINTS: usize = 201;
pub const DEFAULT_MAX_LAG: f64 = 25.0;
const MIN_TRAJECTORIES: usize = 100;
/// Lag window length in units of the slowest correlation time.
const LAG_CORRELATION_TIMES: f64 = 12.0;

/// Lag window sized for a process whose slowest correlation decays at `rate`
/// (units of `gamma_s`): the truncated tail is below `e^-6` of the total.
pub fn max_lag_for_rate(rate: f64) -> f64 {
    LAG_CORRELATION_TIMES / rate
}

/// `n` equally spaced frequencies on `[0, max]`.
pub fn omega_grid(max: f64, n: usize) -> Result<Vec<f64>> {
    if !(max.is_finite() && max >= 0.0) {
        return Err(Error::param(
            "omega_max",
            format!("must be >= 0, got {max}"),
        ));
    }
    if n < 2 {
        return Err(Error::param(
            "omega_points",
            format!("need at least 2, got {n}"),
        ));
    }
    Ok((0..n).map(|k| max * k as f64 / (n - 1) as f64).collect())
}

/// Isotropic cavity: `V = 1 - sin^2(psi_L) / (1 + (omega/2)^2)`.
///
/// Independent of the pump level and nonlinearity anywhere above threshold.
pub fn analytic_v(omega: f64, psi_l: f64) -> f64 {
    let s = psi_l.sin();
    1.0 - s * s / (1.0 + (0.5 * omega).powi(2))
}

/// Fixed-LO quadrature of the anisotropic cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnisoQuadrature {
    /// `psi_L = 0`: anti-squeezed.
    InPhase,
    /// `psi_L = pi/2`: squeezed.
    Quadrature,
}

impl AnisoQuadrature {
    /// Maps `psi_L` (radians) to the quadrature; only `0` and `pi/2` are defined.
    pub fn from_psi(psi_l: f64) -> Result<Self> {
        const TOL: f64 = 1e-9;
        if psi_l.abs() < TOL {
            Ok(Self::InPhase)
        } else if (psi_l - FRAC_PI_2).abs() < TOL {
            Ok(Self::Quadrature)
        } else {
            Err(Error::param(
                "psi_l",
                format!("the anisotropic spectrum is defined for psi_l = 0 or 90 degrees, got {} degrees", psi_l.to_degrees()),
            ))
        }
    }

    pub fn psi(self) -> f64 {
        match self {
            Self::InPhase => 0.0,
            Self::Quadrature => FRAC_PI_2,
        }
    }
}

/// Anisotropic cavity with the LO fixed on the vertical mode:
/// `V_{pi/2} = 1 - (1 - kappa^2) / (1 + (1 - kappa)^2 (omega/2)^2)` and
/// `V_0 = 1 / V_{pi/2}` (minimum uncertainty).
pub fn analytic_v_aniso(omega: f64, quadrature: AnisoQuadrature, kappa: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::param(
            "kappa",
            format!("must be in [0, 1), got {kappa}"),
        ));
    }
    let x = (1.0 - kappa) * 0.5 * omega;
    let squeezed = 1.0 - (1.0 - kappa * kappa) / (1.0 + x * x);
    Ok(match quadrature {
        AnisoQuadrature::Quadrature => squeezed,
        AnisoQuadrature::InPhase => 1.0 / squeezed,
    })
}

/// Closed-form spectrum for the given parameters: the anisotropic form when
/// `kappa > 0`, the isotropic one otherwise.
pub fn analytic_curve(omega: &[f64], psi_l: f64, params: &ModelParams) -> Result<Vec<f64>> {
    if params.is_isotropic() {
        Ok(omega.iter().map(|w| analytic_v(*w, psi_l)).collect())
    } else {
        let q = AnisoQuadrature::from_psi(psi_l)?;
        omega
            .iter()
            .map(|w| analytic_v_aniso(*w, q, params.kappa))
            .collect()
    }
}

/// Estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub omega: Vec<f64>,
    /// Largest lag (dimensionless time) kept by the lag window; `None` picks
    /// `min(T/2, DEFAULT_MAX_LAG)`.
    pub max_lag: Option<f64>,
    /// Output coupling of the detected mode in units of `gamma_s`:
    /// `V = 1 + 2 rate * S`.
    pub detection_rate: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            omega: omega_grid(DEFAULT_OMEGA_MAX, DEFAULT_OMEGA_POINTS).expect("valid default grid"),
            max_lag: None,
            detection_rate: 1.0,
        }
    }
}

/// Ensemble estimate of `V(omega)` with across-trajectory standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `V_i(omega)` of each trajectory; their mean is `v`.
    pub per_trajectory: Vec<Vec<f64>>,
    pub max_lag: f64,
    pub warnings: Vec<String>,
}

impl SpectrumEstimate {
    pub fn n_trajectories(&self) -> usize {
        self.per_trajectory.len()
    }
}

/// Tukey lag window: flat up to `k_max/2`, Hann taper to zero at `k_max`.
fn lag_window(k: usize, k_max: usize) -> f64 {
    let half = k_max as f64 / 2.0;
    let k = k as f64;
    if k <= half {
        1.0
    } else if k < k_max as f64 {
        0.5 * (1.0 + (std::f64::consts::PI * (k - half) / half).cos())
    } else {
        0.0
    }
}

/// Monte-Carlo estimate of `V(omega) = 1 + 2 rate * Integral <dE(t) dE(t+tau)> e^{-i omega tau} dtau`.
///
/// Each series is detrended by the ensemble-mean series; its stationary
/// autocorrelation `<dE(t) dE(t+tau)>` (no conjugation, as for positive-P
/// c-numbers) is estimated by FFT, made unbiased lag by lag, and transformed
/// under a lag window. `V` and its standard error come from the spread of the
/// per-trajectory spectra.
pub fn mc_spectrum(
    series: &[&[Complex64]],
    sample_dt: f64,
    options: &SpectrumOptions,
    workers: usize,
) -> Result<SpectrumEstimate> {
    let n_traj = series.len();
    if n_traj == 0 {
        return Err(Error::param(
            "trajectories",
            "spectrum needs at least one trajectory",
        ));
    }
    let n = series[0].len();
    if n < 4 || series.iter().any(|s| s.len() != n) {
        return Err(Error::param(
            "samples",
            "series must share a length of at least 4 samples",
        ));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::param(
            "dt",
            format!("sample spacing must be > 0, got {sample_dt}"),
        ));
    }
    let mut warnings = Vec::new();
    if n_traj < MIN_TRAJECTORIES {
        let msg = format!("only {n_traj} trajectories: spectrum standard errors are unreliable below {MIN_TRAJECTORIES}");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let duration = (n - 1) as f64 * sample_dt;
    let max_lag = options
        .max_lag
        .unwrap_or(DEFAULT_MAX_LAG)
        .min(duration / 2.0);
    if max_lag.is_nan() || max_lag <= 0.0 {
        return Err(Error::param(
            "max_lag",
            format!("must be > 0, got {max_lag}"),
        ));
    }
    let k_max = ((max_lag / sample_dt).round() as usize).clamp(1, n - 1);

    // ensemble mean; the n/(n-1) factor restores the variance removed with it
    let mut mean = vec![Complex64::ZERO; n];
    let correction = if n_traj > 1 {
        for s in series {
            for (m, x) in mean.iter_mut().zip(s.iter()) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n_traj as f64;
        }
        n_traj as f64 / (n_traj - 1) as f64
    } else {
        1.0
    };

    // cosine transform weights, omega-major
    let weights: Vec<f64> = options
        .omega
        .iter()
        .flat_map(|w| {
            (0..=k_max).map(move |k| {
                let lag = if k == 0 {
                    1.0
                } else {
                    2.0 * lag_window(k, k_max)
                };
                lag * (w * k as f64 * sample_dt).cos()
            })
        })
        .collect();

    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let scale = 2.0 * options.detection_rate * sample_dt * correction;
    let n_omega = options.omega.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let per_trajectory: Vec<Vec<f64>> = pool.install(|| {
        series
            .par_iter()
            .map(|s| {
                let mut buf = vec![Complex64::ZERO; len];
                for ((b, x), m) in buf.iter_mut().zip(s.iter()).zip(&mean) {
                    *b = x - m;
                }
                forward.process(&mut buf);
                let spectrum: Vec<Complex64> =
                    (0..len).map(|f| buf[f] * buf[(len - f) % len]).collect();
                buf.copy_from_slice(&spectrum);
                inverse.process(&mut buf);
                let corr: Vec<f64> = (0..=k_max)
                    .map(|k| buf[k].re / (len * (n - k)) as f64)
                    .collect();
                (0..n_omega)
                    .map(|i| {
                        let row = &weights[i * (k_max + 1)..(i + 1) * (k_max + 1)];
                        1.0 + scale * row.iter().zip(&corr).map(|(w, c)| w * c).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    });

    let (v, stderr) = mean_and_stderr(&per_trajectory, n_omega);
    Ok(SpectrumEstimate {
        omega: options.omega.clone(),
        v,
        stderr,
        per_trajectory,
        max_lag: k_max as f64 * sample_dt,
        warnings,
    })
}

/// Column means and standard errors of the mean, reduced in index order.
pub fn mean_and_stderr(rows: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let stderr = if rows.len() > 1 {
        var.iter().map(|v| (v / (n - 1.0) / n).sqrt()).collect()
    } else {
        vec![f64::NAN; width]
    };
    (mean, stderr)
}

/// Spectrum output: closed form, Monte-Carlo estimate (if run) and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub mode: String,
    pub omega: Vec<f64>,
    pub v_analytic: Vec<f64>,
    pub v_mc: Option<Vec<f64>>,
    pub stderr: Option<Vec<f64>>,
    /// LO phase in radians.
    pub psi_l: f64,
    pub params: ModelParams,
    pub n_trajectories: usize,
    pub divergent_fraction: f64,
    pub master_seed: Option<u64>,
    pub max_lag: Option<f64>,
    pub branch_cut_steps: u64,
    pub large_fluctuation_steps: u64,
    pub warnings: Vec<String>,
}

impl SpectrumResult {
    /// Result holding the closed-form curve only.
    pub fn analytic(
        mode: &str,
        omega: Vec<f64>,
        v_analytic: Vec<f64>,
        psi_l: f64,
        params: &ModelParams,
    ) -> Self {
        Self {
            mode: mode.to_string(),
            omega,
            v_analytic,
            v_mc: None,
            stderr: None,
            psi_l,
            params: *params,
            n_trajectories: 0,
            divergent_fraction: 0.0,
            master_seed: None,
            max_lag: None,
            branch_cut_steps: 0,
            large_fluctuation_steps: 0,
            warnings: Vec::new(),
        }
    }

    /// Largest `|V_mc - V_analytic|` over the grid.
    pub fn max_abs_error(&self) -> Option<f64> {
        self.v_mc.as_ref().map(|mc| {
            mc.iter()
                .zip(&self.v_analytic)
                .map(|(m, a)| (m - a).abs())
                .fold(0.0, f64::max)
        })
    }

    /// `omega,V_analytic,V_mc,stderr`; the last two are empty without a Monte-Carlo run.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "omega,V_analytic,V_mc,stderr")?;
        for (i, omega) in self.omega.iter().enumerate() {
            write!(w, "{omega:.6},{:.12e},", self.v_analytic[i])?;
            match (&self.v_mc, &self.stderr) {
                (Some(v), Some(e)) => writeln!(w, "{:.12e},{:.12e}", v[i], e[i])?,
                _ => writeln!(w, ",")?,
            }
        }
        Ok(())
    }
}
