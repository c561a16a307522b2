use num_complex::Complex64;

use super::ensemble::EnsembleSpec;
use super::noise::{NoiseDraw, TrajectoryRng};
use crate::error::{Error, Result};

/// Components beyond `ESCAPE_FACTOR * escape_scale()` mark a trajectory divergent.
pub const ESCAPE_FACTOR: f64 = 1e3;

/// An Ito SDE `dx = f(x) dt + B(x) dW` on a complex state vector.
///
/// The noise is specified through [`StochasticSystem::add_noise`], which
/// receives the pair of complex Wiener increments `(dW, dW^+)` for the step
/// (each with `E|dW|^2 = dt`) and wires them onto the state components.
pub trait StochasticSystem: Sync {
    fn dim(&self) -> usize;

    fn drift(&self, x: &[Complex64], out: &mut [Complex64]);

    /// Adds `B(x) dW` to `out`.
    fn add_noise(
        &self,
        x: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        diag: &mut Diagnostics,
    );

    /// Typical state magnitude, used for the escape radius.
    fn escape_scale(&self) -> f64 {
        1.0
    }
}

impl<S: StochasticSystem + ?Sized> StochasticSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        (**self).drift(x, out)
    }
    fn add_noise(
        &self,
        x: &[Complex64],
        dw: NoiseDraw,
        out: &mut [Complex64],
        diag: &mut Diagnostics,
    ) {
        (**self).add_noise(x, dw, out, diag)
    }
    fn escape_scale(&self) -> f64 {
        (**self).escape_scale()
    }
}

/// The deterministic part of a system.
#[derive(Debug, Clone, Copy)]
pub struct NoiseFree<S>(pub S);

impl<S: StochasticSystem> StochasticSystem for NoiseFree<S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn drift(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.0.drift(x, out)
    }
    fn add_noise(&self, _: &[Complex64], _: NoiseDraw, _: &mut [Complex64], _: &mut Diagnostics) {}
    fn escape_scale(&self) -> f64 {
        self.0.escape_scale()
    }
}

/// Per-trajectory counters filled in by the systems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Steps where the pump-noise variance had negative real part.
    pub branch_cut_steps: u64,
    /// Steps where a linearized fluctuation exceeded 0.1 rho.
    pub large_fluctuation_steps: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.branch_cut_steps += other.branch_cut_steps;
        self.large_fluctuation_steps += other.large_fluctuation_steps;
    }
}

/// Uniformly sampled path recorded after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub index: u64,
    pub master_seed: u64,
    /// Time of the first sample (burn-in included), in units of `1/gamma_s`.
    pub t0: f64,
    pub sample_dt: f64,
    pub samples: Vec<T>,
    /// Time at which the path left the escape radius, if it did.
    pub diverged_at: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl<T> Trajectory<T> {
    pub fn is_divergent(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.sample_dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|k| self.time(k))
    }
}

/// Euler-Maruyama integration of one trajectory.
///
/// `observe` maps each recorded state to the stored sample. It is called once
/// per recorded time, in order, so it may carry state (e.g. phase unwrapping).
pub fn integrate<S, T, O>(
    system: &S,
    initial: &[Complex64],
    spec: &EnsembleSpec,
    index: u64,
    mut observe: O,
) -> Result<Trajectory<T>>
where
    S: StochasticSystem + ?Sized,
    O: FnMut(&[Complex64]) -> Result<T>,
{
    let dim = system.dim();
    if initial.len() != dim {
        return Err(Error::param(
            "initial",
            format!(
                "state has {} components, system expects {dim}",
                initial.len()
            ),
        ));
    }
    let mut rng = TrajectoryRng::new(spec.master_seed, index);
    let dt = spec.dt;
    let sqrt_dt = dt.sqrt();
    let radius_sqr = (ESCAPE_FACTOR * system.escape_scale().max(1.0)).powi(2);
    let burn = spec.burn_steps();
    let total = burn + spec.record_steps();
    let stride = spec.stride;

    let mut x = initial.to_vec();
    let mut next = vec![Complex64::ZERO; dim];
    let mut drift = vec![Complex64::ZERO; dim];
    let mut diagnostics = Diagnostics::default();
    let mut samples = Vec::with_capacity(spec.n_samples());
    let mut diverged_at = None;

    for step in 0..=total {
        if step >= burn && (step - burn).is_multiple_of(stride) {
            samples.push(observe(&x)?);
        }
        if step == total {
            break;
        }
        system.drift(&x, &mut drift);
        for ((n, xi), f) in next.iter_mut().zip(&x).zip(&drift) {
            *n = xi + f * dt;
        }
        let dw = rng.draw().scaled(sqrt_dt);
        system.add_noise(&x, dw, &mut next, &mut diagnostics);
        std::mem::swap(&mut x, &mut next);

        let t = (step + 1) as f64 * dt;
        if x.iter().any(|v| v.re.is_nan() || v.im.is_nan()) {
            return Err(Error::NonFinite {
                trajectory: index,
                t,
            });
        }
        if x.iter().any(|v| v.norm_sqr() > radius_sqr) {
            diverged_at = Some(t);
            break;
        }
    }

    Ok(Trajectory {
        index,
        master_seed: spec.master_seed,
        t0: burn as f64 * dt,
        sample_dt: stride as f64 * dt,
        samples,
        diverged_at,
        diagnostics,
    })
}
