//! Command-line front end: `rotsqueeze <steady|spectrum|diffusion|field|eigen>`.
//!
//! Every output file starts with the resolved configuration (worker count and
//! output directory excluded), so identical inputs give identical bytes.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{eigensystem_l, omega_grid, Eigensystem};
use crate::config::{RunConfig, KEYS};
use crate::error::{Error, Result};
use crate::experiments::{self, DiffusionRun, SpectrumRun};
use crate::modes::TransverseGrid;
use crate::stochastic::{write_trajectories_csv, Ensemble, EnsembleSpec, SampleColumns};

pub const COMMANDS: [&str; 5] = ["steady", "spectrum", "diffusion", "field", "eigen"];

fn help_for(key: &str) -> &'static str {
    match key {
        "sigma" => "pump amplitude relative to the isotropic threshold",
        "g" => "dimensionless nonlinearity chi/sqrt(gamma_p gamma_s)",
        "gamma_s" => "signal damping rate; labels physical units",
        "gamma_p_over_gamma_s" => "pump to signal damping ratio (adiabatic elimination needs >> 1)",
        "kappa" => "cavity anisotropy in [0, 1)",
        "trajectories" => "ensemble size",
        "dt" => "integration step in units of 1/gamma_s (auto: 1e-3, 0.1 for theta diffusion)",
        "t_burn" => "discarded transient (auto: ten slowest relaxation times)",
        "t_record" => {
            "recorded duration (auto: 50, 1000 for theta diffusion, 30 for nonlinear diffusion)"
        }
        "samples" => "approximate number of recorded samples per trajectory",
        "seed" => "master seed",
        "mode" => "spectrum mode: analytic, linear-mc, nonlinear-mc, aniso",
        "psi_l" => "local oscillator phase in degrees",
        "omega_max" => "largest analysis frequency in units of gamma_s",
        "omega_points" => "number of frequencies on [0, omega_max]",
        "max_lag" => "lag window length (auto: twelve correlation times)",
        "diffusion_mode" => "theta or nonlinear",
        "fit_t_min" => "start of the variance fit window",
        "field" => "classical, lo, gauss, lg+1, lg-1, tem10, tem01",
        "theta" => "orientation in degrees (field axis, initial orientation of runs)",
        "rho" => "classical amplitude for the field command (auto: steady state)",
        "extent" => "half-width of the transverse grid in beam radii",
        "n_points" => "grid points per transverse axis",
        "dump_trajectories" => "also write the raw per-trajectory series",
        "out" => "output directory",
        "workers" => "worker threads; results do not depend on it",
        _ => "",
    }
}

pub fn command() -> Command {
    let mut cmd = Command::new("rotsqueeze")
        .about("Orientation diffusion and non-critical squeezing in a rotationally invariant DOPO")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .help("key = value configuration file"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .global(true)
                .action(ArgAction::Set)
                .help(help_for(key)),
        );
    }
    cmd.subcommands([
        Command::new("steady").about("Classical steady state, threshold and D_theta"),
        Command::new("spectrum").about("Squeezing spectrum V(omega), closed form and Monte-Carlo"),
        Command::new("diffusion").about("Orientation variance growth and D_theta fit"),
        Command::new("field").about("Transverse field on a grid"),
        Command::new("eigen").about("Eigensystem of the linearized drift"),
    ])
}

/// Config file first, then flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match matches.get_one::<String>("config") {
        Some(path) => RunConfig::from_file(Path::new(path))?,
        None => RunConfig::default(),
    };
    for key in KEYS {
        if let Some(v) = matches.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns its summary.
pub fn run<I, T>(args: I) -> Result<serde_json::Value>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command()
        .try_get_matches_from(args)
        .map_err(|e| Error::Config(e.to_string()))?;
    run_matches(&matches)
}

pub fn run_matches(matches: &ArgMatches) -> Result<serde_json::Value> {
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| Error::Config("missing command".into()))?;
    let cfg = resolve_config(sub)?;
    execute(name, &cfg)
}

pub fn execute(name: &str, cfg: &RunConfig) -> Result<serde_json::Value> {
    fs::create_dir_all(&cfg.out)?;
    match name {
        "steady" => cmd_steady(cfg),
        "spectrum" => cmd_spectrum(cfg),
        "diffusion" => cmd_diffusion(cfg),
        "field" => cmd_field(cfg),
        "eigen" => cmd_eigen(cfg),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

fn create(cfg: &RunConfig, file: &str) -> Result<BufWriter<File>> {
    let path: PathBuf = cfg.out.join(file);
    Ok(BufWriter::new(File::create(path)?))
}

fn run_header(cfg: &RunConfig, command: &str, spec: &EnsembleSpec) -> Vec<String> {
    let mut lines = cfg.header(command);
    lines.push(format!(
        "resolved dt={} t_burn={} t_record={} stride={}",
        spec.dt, spec.t_burn, spec.t_record, spec.stride
    ));
    lines
}

fn write_json<S: Serialize>(
    cfg: &RunConfig,
    file: &str,
    command: &str,
    result: &S,
) -> Result<serde_json::Value> {
    let doc = json!({
        "command": command,
        "seed": cfg.seed,
        "config": cfg.provenance_json(),
        "result": result,
    });
    let mut w = create(cfg, file)?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(doc)
}

fn dump<T: SampleColumns>(cfg: &RunConfig, command: &str, ensemble: &Ensemble<T>) -> Result<()> {
    if cfg.dump_trajectories {
        let mut w = create(cfg, "trajectories.csv")?;
        write_trajectories_csv(ensemble, &mut w, &cfg.header(command))?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_steady(cfg: &RunConfig) -> Result<serde_json::Value> {
    let report = experiments::steady_report(&cfg.params, cfg.theta_radians())?;
    let mut w = create(cfg, "steady.csv")?;
    for line in cfg.header("steady") {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "quantity,value")?;
    let optional = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.12e}"));
    let rows = [
        ("threshold", format!("{:.12e}", report.threshold)),
        ("above_threshold", report.above_threshold.to_string()),
        ("rho", format!("{:.12e}", report.rho)),
        ("theta", format!("{:.12e}", report.theta)),
        ("theta_arbitrary", report.theta_arbitrary.to_string()),
        ("gamma_p", format!("{:.12e}", report.gamma_p)),
        ("chi", format!("{:.12e}", report.chi)),
        ("pump_drive", format!("{:.12e}", report.pump_drive)),
        ("D_theta", optional(report.d_theta)),
        (
            "D_theta_over_gamma_s",
            optional(report.d_theta_over_gamma_s),
        ),
    ];
    for (k, v) in rows {
        writeln!(w, "{k},{v}")?;
    }
    w.flush()?;
    write_json(cfg, "steady.json", "steady", &report)
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<serde_json::Value> {
    let run = SpectrumRun {
        params: cfg.params,
        psi_l: cfg.psi_radians(),
        omega: omega_grid(cfg.omega_max, cfg.omega_points)?,
        ensemble: cfg.spectrum_ensemble()?,
        max_lag: cfg.max_lag,
        theta0: cfg.theta_radians(),
        workers: cfg.workers,
    };
    let outcome = experiments::run_spectrum(cfg.mode, &run)?;
    let mut w = create(cfg, "spectrum.csv")?;
    outcome
        .result
        .write_csv(&mut w, &run_header(cfg, "spectrum", &run.ensemble))?;
    w.flush()?;
    if let Some(series) = &outcome.series {
        dump(cfg, "spectrum", series)?;
    }
    let summary = json!({
        "ensemble": run.ensemble,
        "max_abs_error": outcome.result.max_abs_error(),
        "spectrum": outcome.result,
    });
    write_json(cfg, "spectrum.json", "spectrum", &summary)
}

fn cmd_diffusion(cfg: &RunConfig) -> Result<serde_json::Value> {
    let run = DiffusionRun {
        params: cfg.params,
        ensemble: cfg.diffusion_ensemble()?,
        fit_t_min: cfg.fit_t_min,
        theta0: cfg.theta_radians(),
        workers: cfg.workers,
    };
    let outcome = experiments::run_diffusion(cfg.diffusion_mode, &run)?;
    let report = &outcome.report;
    let mut w = create(cfg, "diffusion.csv")?;
    report
        .fit
        .write_csv(&mut w, &run_header(cfg, "diffusion", &run.ensemble))?;
    w.flush()?;
    dump(cfg, "diffusion", &outcome.series)?;
    let summary = json!({
        "ensemble": run.ensemble,
        "slope_over_predicted": report.fit.ratio(),
        "diffusion": report,
    });
    write_json(cfg, "diffusion.json", "diffusion", &summary)
}

fn cmd_field(cfg: &RunConfig) -> Result<serde_json::Value> {
    let grid = TransverseGrid::new(cfg.extent, cfg.n_points)?;
    let rho = cfg.rho.unwrap_or_else(|| cfg.params.rho());
    let field = experiments::field(
        cfg.field,
        rho,
        cfg.theta_radians(),
        cfg.psi_radians(),
        &grid,
    )?;
    let mut w = create(cfg, "field.csv")?;
    field.write_csv(&mut w, &cfg.header("field"))?;
    w.flush()?;
    Ok(json!({
        "command": "field",
        "field": field.label(),
        "points": grid.len(),
        "file": "field.csv",
    }))
}

fn cmd_eigen(cfg: &RunConfig) -> Result<serde_json::Value> {
    let eig = eigensystem_l(&cfg.params)?;
    let expected = Eigensystem::expected_values(&cfg.params);
    let mut w = create(cfg, "eigen.csv")?;
    for line in cfg.header("eigen") {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "index,eigenvalue,expected,v1,v2,v3,v4,label")?;
    #[allow(clippy::needless_range_loop)]
    for i in 0..4 {
        let label = if i == eig.goldstone {
            "goldstone"
        } else if i == eig.squeezed {
            "squeezed"
        } else {
            ""
        };
        let v = eig.vectors[i];
        writeln!(
            w,
            "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{label}",
            eig.values[i], expected[i], v[0], v[1], v[2], v[3]
        )?;
    }
    w.flush()?;
    write_json(
        cfg,
        "eigen.json",
        "eigen",
        &json!({ "eigensystem": eig, "expected": expected }),
    )
}

/// Error report for stderr.
pub fn error_json(e: &Error) -> serde_json::Value {
    json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
}
