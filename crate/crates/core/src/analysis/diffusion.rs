//! Orientation diffusion: least-squares fit of `<[theta(t) - theta(0)]^2>` against `t`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_TRAJECTORIES: usize = 1000;
const JACKKNIFE_BLOCKS: usize = 20;
const MAX_REDUCED_CHI2: f64 = 3.0;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

/// Fit window. Times are relative to the first recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionOptions {
    /// Earliest time included in the fit.
    pub t_min: f64,
    /// Fraction of the record, from the start, that is fitted.
    pub record_fraction: f64,
    /// Predicted coefficient for comparison, same units as the slope.
    pub predicted: Option<f64>,
}

impl DiffusionOptions {
    /// Excludes `t < 10 dt` and the last 10% of the record.
    pub fn for_step(dt: f64) -> Self {
        Self {
            t_min: 10.0 * dt,
            record_fraction: 0.9,
            predicted: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    pub slope: f64,
    pub intercept: f64,
    /// Jackknife standard errors over blocks of trajectories.
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci: (f64, f64),
    pub intercept_ci: (f64, f64),
    pub predicted: Option<f64>,
    pub reduced_chi2: f64,
    pub n_trajectories: usize,
    pub fit_t_min: f64,
    pub fit_t_max: f64,
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_stderr: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DiffusionFit {
    /// `slope / predicted`.
    pub fn ratio(&self) -> Option<f64> {
        self.predicted.map(|d| self.slope / d)
    }

    /// `t,variance,stderr,fit`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "t,variance,stderr,fit")?;
        for ((t, v), e) in self
            .times
            .iter()
            .zip(&self.variance)
            .zip(&self.variance_stderr)
        {
            writeln!(
                w,
                "{t:.6},{v:.12e},{e:.12e},{:.12e}",
                self.intercept + self.slope * t
            )?;
        }
        Ok(())
    }
}

/// Mean squared displacement per sample and its standard error.
fn displacement_moments(series: &[&[f64]], n: usize) -> (Vec<f64>, Vec<f64>) {
    let count = series.len() as f64;
    let mut mean = vec![0.0; n];
    for s in series {
        for (m, x) in mean.iter_mut().zip(s.iter()) {
            *m += (x - s[0]).powi(2);
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; n];
    for s in series {
        for ((v, x), m) in var.iter_mut().zip(s.iter()).zip(&mean) {
            *v += ((x - s[0]).powi(2) - m).powi(2);
        }
    }
    let stderr = var
        .iter()
        .map(|v| {
            if count > 1.0 {
                (v / (count - 1.0) / count).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (mean, stderr)
}

/// Weighted straight-line fit `y = a + b t`; unweighted if any weight is undefined.
/// Returns `(a, b, chi2)`.
fn line_fit(t: &[f64], y: &[f64], se: &[f64]) -> (f64, f64, f64) {
    let weighted = se.iter().all(|e| *e > 0.0 && e.is_finite());
    let w: Vec<f64> = if weighted {
        se.iter().map(|e| 1.0 / (e * e)).collect()
    } else {
        vec![1.0; t.len()]
    };
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((t, y), w) in t.iter().zip(y).zip(&w) {
        sw += w;
        st += w * t;
        sy += w * y;
        stt += w * t * t;
        sty += w * t * y;
    }
    let det = sw * stt - st * st;
    let b = (sw * sty - st * sy) / det;
    let a = (sy - b * st) / sw;
    let chi2 = if weighted {
        t.iter()
            .zip(y)
            .zip(&w)
            .map(|((t, y), w)| w * (y - a - b * t).powi(2))
            .sum()
    } else {
        0.0
    };
    (a, b, chi2)
}

/// Fits the variance law to an ensemble of unwrapped angle series sampled
/// every `sample_dt`. Errors come from a delete-one-block jackknife over
/// trajectories, since the variance points of a random walk are correlated.
pub fn fit_diffusion(
    series: &[&[f64]],
    sample_dt: f64,
    options: &DiffusionOptions,
) -> Result<DiffusionFit> {
    let n_traj = series.len();
    if n_traj < 2 {
        return Err(Error::param(
            "trajectories",
            "diffusion fit needs at least two trajectories",
        ));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::param("samples", "angle series must share a length"));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::param(
            "dt",
            format!("sample spacing must be > 0, got {sample_dt}"),
        ));
    }
    let mut warnings = Vec::new();
    if n_traj < MIN_TRAJECTORIES {
        let msg = format!(
            "only {n_traj} trajectories: diffusion fit below the recommended {MIN_TRAJECTORIES}"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let times: Vec<f64> = (0..n).map(|k| k as f64 * sample_dt).collect();
    let t_end = options.record_fraction * times[n - 1];
    let window: Vec<usize> = (0..n)
        .filter(|&k| times[k] >= options.t_min && times[k] <= t_end + 1e-9 * sample_dt)
        .collect();
    if window.len() < 3 {
        return Err(Error::param(
            "fit_t_min",
            format!(
                "fit window [{}, {t_end}] holds fewer than 3 samples",
                options.t_min
            ),
        ));
    }
    let (lo, hi) = (window[0], window[window.len() - 1] + 1);

    let (variance, variance_stderr) = displacement_moments(series, n);
    let (intercept, slope, chi2) =
        line_fit(&times[lo..hi], &variance[lo..hi], &variance_stderr[lo..hi]);
    let dof = (hi - lo - 2).max(1) as f64;
    let reduced_chi2 = chi2 / dof;
    if reduced_chi2 > MAX_REDUCED_CHI2 {
        let msg = format!("reduced chi^2 = {reduced_chi2:.2}: variance growth is not linear in t");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let blocks = JACKKNIFE_BLOCKS.min(n_traj);
    let mut jack = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let (start, end) = (b * n_traj / blocks, (b + 1) * n_traj / blocks);
        let kept: Vec<&[f64]> = series[..start]
            .iter()
            .chain(&series[end..])
            .copied()
            .collect();
        let (v, e) = displacement_moments(&kept, n);
        let (a, s, _) = line_fit(&times[lo..hi], &v[lo..hi], &e[lo..hi]);
        jack.push((a, s));
    }
    let spread = |f: fn(&(f64, f64)) -> f64| {
        let m = jack.iter().map(f).sum::<f64>() / blocks as f64;
        let ss: f64 = jack.iter().map(|j| (f(j) - m).powi(2)).sum();
        ((blocks - 1) as f64 / blocks as f64 * ss).sqrt()
    };
    let slope_stderr = spread(|j| j.1);
    let intercept_stderr = spread(|j| j.0);

    Ok(DiffusionFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        slope_ci: (slope - Z95 * slope_stderr, slope + Z95 * slope_stderr),
        intercept_ci: (
            intercept - Z95 * intercept_stderr,
            intercept + Z95 * intercept_stderr,
        ),
        predicted: options.predicted,
        reduced_chi2,
        n_trajectories: n_traj,
        fit_t_min: times[lo],
        fit_t_max: times[hi - 1],
        times,
        variance,
        variance_stderr,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn walks(n_traj: usize, n: usize, dt: f64, d: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n_traj)
            .map(|_| {
                let mut x = 0.3;
                (0..n)
                    .map(|_| {
                        let v = x;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x += (d * dt).sqrt() * z;
                        v
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn recovers_wiener_slope() {
        let d = 2e-3;
        let w = walks(2000, 400, 0.5, d, 3);
        let series: Vec<&[f64]> = w.iter().map(|s| s.as_slice()).collect();
        let opts = DiffusionOptions {
            predicted: Some(d),
            ..DiffusionOptions::for_step(0.5)
        };
        let fit = fit_diffusion(&series, 0.5, &opts).unwrap();
        assert!((fit.ratio().unwrap() - 1.0).abs() < 0.1, "{}", fit.slope);
        assert!(
            fit.slope_ci.0 < d && d < fit.slope_ci.1,
            "{:?}",
            fit.slope_ci
        );
        assert!(
            fit.intercept_ci.0 < 0.0 && 0.0 < fit.intercept_ci.1,
            "{:?}",
            fit.intercept_ci
        );
        assert!(fit.warnings.is_empty(), "{:?}", fit.warnings);
        assert!((fit.fit_t_max - 0.9 * 199.5).abs() <= 0.5);
        assert!((fit.fit_t_min - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_zero_slope() {
        let flat = vec![vec![0.7; 100]; 10];
        let series: Vec<&[f64]> = flat.iter().map(|s| s.as_slice()).collect();
        let fit = fit_diffusion(&series, 0.1, &DiffusionOptions::for_step(0.01)).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.slope_stderr, 0.0);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn nonlinear_growth_is_flagged() {
        // ballistic spreading: theta = v t with random v
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let lines: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                (0..200).map(|k| v * k as f64 * 0.1).collect()
            })
            .collect();
        let series: Vec<&[f64]> = lines.iter().map(|s| s.as_slice()).collect();
        let fit = fit_diffusion(&series, 0.1, &DiffusionOptions::for_step(0.01)).unwrap();
        assert!(fit.reduced_chi2 > 3.0);
        assert!(fit.warnings.iter().any(|w| w.contains("chi^2")));
    }

    #[test]
    fn window_must_hold_samples() {
        let flat = vec![vec![0.0; 10]; 3];
        let series: Vec<&[f64]> = flat.iter().map(|s| s.as_slice()).collect();
        let opts = DiffusionOptions {
            t_min: 100.0,
            ..DiffusionOptions::for_step(0.1)
        };
        assert!(fit_diffusion(&series, 0.1, &opts).is_err());
    }

    #[test]
    fn csv_layout() {
        let w = walks(3, 5, 1.0, 1.0, 0);
        let series: Vec<&[f64]> = w.iter().map(|s| s.as_slice()).collect();
        let fit = fit_diffusion(
            &series,
            1.0,
            &DiffusionOptions {
                t_min: 0.0,
                ..DiffusionOptions::for_step(1.0)
            },
        )
        .unwrap();
        let mut out = Vec::new();
        fit.write_csv(&mut out, &[]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("t,variance,stderr,fit"));
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(1).unwrap().starts_with("0.000000,0.0"));
    }
}
