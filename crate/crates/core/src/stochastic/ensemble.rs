use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::{integrate, StochasticSystem, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 4096;
const WARN_DIVERGED: f64 = 0.01;
const MAX_DIVERGED: f64 = 0.20;

/// Time grid and seeding for an ensemble run. Times are dimensionless (`gamma_s t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_trajectories: usize,
    pub dt: f64,
    pub t_burn: f64,
    pub t_record: f64,
    /// Integration steps between recorded samples.
    pub stride: usize,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// Spec with the stride chosen so that about [`DEFAULT_SAMPLES`] samples are recorded.
    pub fn new(
        n_trajectories: usize,
        dt: f64,
        t_burn: f64,
        t_record: f64,
        master_seed: u64,
    ) -> Self {
        let mut spec = Self {
            n_trajectories,
            dt,
            t_burn,
            t_record,
            stride: 1,
            master_seed,
        };
        spec.stride = spec.stride_for_samples(DEFAULT_SAMPLES);
        spec
    }

    pub fn stride_for_samples(&self, samples: usize) -> usize {
        let steps = (self.t_record / self.dt).round();
        if samples == 0 || !steps.is_finite() {
            return 1;
        }
        ((steps / samples as f64).round() as usize).max(1)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.stride = self.stride_for_samples(samples);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_burn.is_finite() && self.t_burn >= 0.0) {
            return Err(Error::param(
                "t_burn",
                format!("must be >= 0, got {}", self.t_burn),
            ));
        }
        if !(self.t_record.is_finite() && self.t_record >= 0.0) {
            return Err(Error::param(
                "t_record",
                format!("must be >= 0, got {}", self.t_record),
            ));
        }
        if self.stride == 0 {
            return Err(Error::param("stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn burn_steps(&self) -> usize {
        (self.t_burn / self.dt).round() as usize
    }

    pub fn record_steps(&self) -> usize {
        (self.t_record / self.dt).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        self.record_steps() / self.stride + 1
    }

    pub fn sample_dt(&self) -> f64 {
        self.stride as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub spec: EnsembleSpec,
    /// All trajectories in index order, divergent ones included.
    pub trajectories: Vec<Trajectory<T>>,
    pub warnings: Vec<String>,
}

impl<T> Ensemble<T> {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn divergent_count(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.is_divergent())
            .count()
    }

    pub fn divergent_fraction(&self) -> f64 {
        if self.trajectories.is_empty() {
            0.0
        } else {
            self.divergent_count() as f64 / self.trajectories.len() as f64
        }
    }

    /// Trajectories that stayed inside the escape radius, in index order.
    pub fn completed(&self) -> impl Iterator<Item = &Trajectory<T>> {
        self.trajectories.iter().filter(|t| !t.is_divergent())
    }

    pub fn completed_series(&self) -> Vec<&[T]> {
        self.completed().map(|t| t.samples.as_slice()).collect()
    }

    pub fn map_samples<U>(self, mut f: impl FnMut(T) -> U) -> Ensemble<U> {
        Ensemble {
            spec: self.spec,
            warnings: self.warnings,
            trajectories: self
                .trajectories
                .into_iter()
                .map(|t| Trajectory {
                    index: t.index,
                    master_seed: t.master_seed,
                    t0: t.t0,
                    sample_dt: t.sample_dt,
                    samples: t.samples.into_iter().map(&mut f).collect(),
                    diverged_at: t.diverged_at,
                    diagnostics: t.diagnostics,
                })
                .collect(),
        }
    }
}

/// Runs `spec.n_trajectories` independent trajectories on `workers` threads.
///
/// Trajectory `i` draws from the stream `(spec.master_seed, i)` and results are
/// stored in index order, so the output does not depend on `workers`.
/// `make_observer(i)` builds the per-trajectory sample map.
pub fn run_ensemble<S, T, F, O>(
    system: &S,
    initial: &[Complex64],
    spec: &EnsembleSpec,
    workers: usize,
    make_observer: F,
) -> Result<Ensemble<T>>
where
    S: StochasticSystem + ?Sized,
    T: Send,
    F: Fn(u64) -> O + Sync,
    O: FnMut(&[Complex64]) -> Result<T>,
{
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let trajectories = pool.install(|| {
        (0..spec.n_trajectories as u64)
            .into_par_iter()
            .map(|i| integrate(system, initial, spec, i, make_observer(i)))
            .collect::<Result<Vec<_>>>()
    })?;

    let ensemble = Ensemble {
        spec: *spec,
        trajectories,
        warnings: Vec::new(),
    };
    let diverged = ensemble.divergent_count();
    let fraction = ensemble.divergent_fraction();
    if fraction > MAX_DIVERGED {
        return Err(Error::Divergence {
            diverged,
            total: ensemble.len(),
        });
    }
    let mut ensemble = ensemble;
    if fraction > WARN_DIVERGED {
        let msg = format!(
            "{diverged} of {} trajectories diverged ({:.2}%)",
            ensemble.len(),
            100.0 * fraction
        );
        log::warn!("{msg}");
        ensemble.warnings.push(msg);
    }
    Ok(ensemble)
}

/// Column layout of a recorded sample for the raw CSV dump.
pub trait SampleColumns {
    fn column_names() -> Vec<String>;
    fn write_values<W: Write>(&self, w: &mut W) -> std::io::Result<()>;
}

impl SampleColumns for f64 {
    fn column_names() -> Vec<String> {
        vec!["value".into()]
    }
    fn write_values<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "{:.12e}", self)
    }
}

impl SampleColumns for Complex64 {
    fn column_names() -> Vec<String> {
        vec!["re".into(), "im".into()]
    }
    fn write_values<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "{:.12e},{:.12e}", self.re, self.im)
    }
}

/// Raw dump: `# ` provenance lines, then `trajectory,t,<sample columns>`.
pub fn write_trajectories_csv<T: SampleColumns, W: Write>(
    ensemble: &Ensemble<T>,
    mut w: W,
    header: &[String],
) -> std::io::Result<()> {
    let s = &ensemble.spec;
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(
        w,
        "# seed={} dt={} stride={} t_burn={} t_record={}",
        s.master_seed, s.dt, s.stride, s.t_burn, s.t_record
    )?;
    writeln!(w, "trajectory,t,{}", T::column_names().join(","))?;
    for tr in &ensemble.trajectories {
        for (t, sample) in tr.times().zip(&tr.samples) {
            write!(w, "{},{:.9},", tr.index, t)?;
            sample.write_values(&mut w)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
