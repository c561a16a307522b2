//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run alone with `cargo test -p rotsqueeze-core --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotsqueeze::analysis::{
    analytic_v, analytic_v_aniso, eigensystem_l, max_lag_for_rate, mc_spectrum, omega_grid,
    AnisoQuadrature, Eigensystem, SpectrumOptions,
};
use rotsqueeze::dynamics::{
    anisotropic_detection_rate, extract_c1, homodyne_from_fluctuations, AnisotropicLinearSystem, W0,
};
use rotsqueeze::experiments::{
    run_diffusion, run_spectrum, DiffusionMode, DiffusionRun, SpectrumMode, SpectrumRun,
};
use rotsqueeze::modes::{eval_mode, quadrature_homodyne, ModeKind, TransverseGrid};
use rotsqueeze::stochastic::{run_ensemble, EnsembleSpec};
use rotsqueeze::{cli, ModelParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// All sub-checks must pass; details are joined.
fn all(parts: Vec<Outcome>) -> Outcome {
    Outcome {
        pass: parts.iter().all(|p| p.pass),
        detail: parts
            .iter()
            .map(|p| format!("{}{}", if p.pass { "" } else { "FAILED " }, p.detail))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn criterion_1() -> Outcome {
    let v90 = analytic_v(0.0, FRAC_PI_2);
    let v75 = analytic_v(0.0, 75f64.to_radians());
    let va = analytic_v_aniso(0.0, AnisoQuadrature::Quadrature, 1.0 / 3.0).unwrap();
    all(vec![
        check(v90 == 0.0, format!("V(0, 90deg) = {v90}")),
        check(
            (v75 - 0.0670).abs() <= 1e-3 && (v75 - 0.067).abs() <= 1e-3,
            format!("V(0, 75deg) = {v75:.5} (target 0.0670 +- 1e-3)"),
        ),
        check(
            (va - 0.1111).abs() <= 1e-3 && (va - 0.11).abs() < 5e-3,
            format!("V(0, kappa=1/3, 90deg) = {va:.5} (target 0.1111 +- 1e-3, ~0.11)"),
        ),
    ])
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let run = SpectrumRun {
        params: ModelParams::isotropic(2.0, 0.01).unwrap(),
        psi_l: FRAC_PI_2,
        omega: omega_grid(10.0, 201).unwrap(),
        ensemble: EnsembleSpec::new(5000, 1e-3, 5.0, 50.0, 2002),
        max_lag: None,
        theta0: 0.0,
        workers: workers(),
    };
    let out = run_spectrum(SpectrumMode::LinearMc, &run).unwrap();
    let err = out.result.max_abs_error().unwrap();
    let secs = start.elapsed().as_secs_f64();
    all(vec![
        check(
            err <= 0.05,
            format!("max|V_mc - V_analytic| = {err:.4} <= 0.05 over omega in [0, 10]"),
        ),
        check(
            secs <= 120.0,
            format!("5000 trajectories in {secs:.1} s <= 120 s"),
        ),
    ])
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let params = ModelParams::isotropic(SQRT_2, 0.01).unwrap();
    let run = SpectrumRun {
        params,
        psi_l: FRAC_PI_2,
        omega: omega_grid(10.0, 201).unwrap(),
        ensemble: EnsembleSpec::new(2000, 1e-3, params.default_burn_in(), 50.0, 3003),
        max_lag: None,
        theta0: 0.0,
        workers: workers(),
    };
    let out = run_spectrum(SpectrumMode::NonlinearMc, &run).unwrap();
    let err = out.result.max_abs_error().unwrap();
    let div = out.result.divergent_fraction;
    let secs = start.elapsed().as_secs_f64();
    all(vec![
        check(
            err <= 0.1,
            format!("max|V_mc - V_analytic| = {err:.4} <= 0.1"),
        ),
        check(div < 0.01, format!("divergent fraction {div} < 1%")),
        check(
            secs <= 600.0,
            format!("2000 trajectories in {secs:.1} s <= 600 s"),
        ),
        check(
            true,
            format!("branch-cut steps {}", out.result.branch_cut_steps),
        ),
    ])
}

fn criterion_4() -> Outcome {
    let params = ModelParams::isotropic(SQRT_2, 0.01).unwrap();
    let theta = run_diffusion(
        DiffusionMode::Theta,
        &DiffusionRun {
            params,
            ensemble: EnsembleSpec::new(10_000, 0.1, 0.0, 1000.0, 4004).with_samples(1000),
            fit_t_min: None,
            theta0: 0.0,
            workers: workers(),
        },
    )
    .unwrap();
    let nonlinear = run_diffusion(
        DiffusionMode::Nonlinear,
        &DiffusionRun {
            params,
            ensemble: EnsembleSpec::new(10_000, 1e-3, params.default_burn_in(), 30.0, 4005)
                .with_samples(512),
            fit_t_min: None,
            theta0: 0.0,
            workers: workers(),
        },
    )
    .unwrap();
    let r_theta = theta.report.fit.ratio().unwrap();
    let r_nl = nonlinear.report.fit.ratio().unwrap();
    all(vec![
        check(
            (r_theta - 1.0).abs() <= 0.10,
            format!(
                "theta_system slope/D_theta = {r_theta:.4} (+-{:.4}) within 10%",
                theta.report.fit.slope_stderr / theta.report.fit.predicted.unwrap()
            ),
        ),
        check(
            (r_nl - 1.0).abs() <= 0.15,
            format!(
                "nonlinear slope/D_theta = {r_nl:.4} (+-{:.4}) within 15%",
                nonlinear.report.fit.slope_stderr / nonlinear.report.fit.predicted.unwrap()
            ),
        ),
    ])
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    for sigma in [1.5, 2.0, 3.0] {
        let p = ModelParams::isotropic(sigma, 0.01).unwrap();
        let e = eigensystem_l(&p).unwrap();
        // closed-form eigenvalues, independent of the dense solver
        let mut expected = [0.0, -2.0, -2.0 * (sigma - 1.0), -2.0 * sigma];
        expected.sort_by(|a, b| b.total_cmp(a));
        let dev = e
            .values
            .iter()
            .zip(expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert_eq!(expected, Eigensystem::expected_values(&p));
        parts.push(check(
            dev <= 1e-10 && e.goldstone_overlap >= 1.0 - 1e-12 && e.squeezed_overlap >= 1.0 - 1e-12,
            format!(
                "sigma {sigma}: eigenvalue dev {dev:.1e}, w0 overlap 1-{:.1e}, w1 overlap 1-{:.1e}",
                1.0 - e.goldstone_overlap,
                1.0 - e.squeezed_overlap
            ),
        ));
    }
    all(parts)
}

fn criterion_6() -> Outcome {
    let grid = TransverseGrid::default();
    let theta = 0.37;
    let kinds = [
        ModeKind::Gauss,
        ModeKind::LaguerrePlus,
        ModeKind::LaguerreMinus,
        ModeKind::Tem10 { theta },
        ModeKind::Tem01 { theta },
    ];
    let fields: Vec<_> = kinds.iter().map(|k| eval_mode(*k, &grid)).collect();
    let norm_dev = fields
        .iter()
        .map(|f| (f.norm_sqr().unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    // L+1 _|_ L-1, G _|_ L+-1, TEM10 _|_ TEM01, G _|_ TEM10/TEM01
    let pairs = [(1, 2), (0, 1), (0, 2), (3, 4), (0, 3), (0, 4)];
    let orth = pairs
        .iter()
        .map(|&(a, b)| fields[a].inner(&fields[b]).unwrap().norm())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rho = rng.random_range(1.0..50.0);
        let th = rng.random_range(-PI..PI);
        let psi = rng.random_range(-PI..PI);
        let mut b: [Complex64; 4] = std::array::from_fn(|_| {
            Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
        });
        // orientation carried by theta: remove the Goldstone component
        let g0: Complex64 = W0.iter().zip(&b).map(|(w, x)| x * *w).sum();
        for (x, w) in b.iter_mut().zip(W0) {
            *x -= g0 * w;
        }
        let e = Complex64::from_polar(1.0, -th);
        let state = [
            (rho + b[0]) * e,
            (rho + b[1]) * e.conj(),
            (rho + b[2]) * e.conj(),
            (rho + b[3]) * e,
        ];
        let quad = quadrature_homodyne(&state, th, psi, &grid).unwrap();
        let projected = -SQRT_2 * psi.sin() * extract_c1(&b);
        worst = worst.max((quad - projected).norm());
    }
    all(vec![
        check(norm_dev <= 1e-6, format!("max |norm - 1| = {norm_dev:.1e}")),
        check(orth <= 1e-10, format!("max |overlap| = {orth:.1e}")),
        check(
            worst <= 1e-6,
            format!("quadrature vs sqrt(2) sin(psi) c1 on 20 states: {worst:.1e}"),
        ),
    ])
}

fn refs(v: &[Vec<Complex64>]) -> Vec<&[Complex64]> {
    v.iter().map(|s| s.as_slice()).collect()
}

fn criterion_7() -> Outcome {
    let omega = omega_grid(10.0, 201).unwrap();
    let reduction = omega
        .iter()
        .map(|w| {
            (analytic_v_aniso(*w, AnisoQuadrature::Quadrature, 0.0).unwrap()
                - analytic_v(*w, FRAC_PI_2))
            .abs()
        })
        .fold(0.0, f64::max);
    let mut product = 0.0f64;
    for kappa in [0.1, 1.0 / 3.0, 0.9] {
        for w in &omega {
            let p = analytic_v_aniso(*w, AnisoQuadrature::InPhase, kappa).unwrap()
                * analytic_v_aniso(*w, AnisoQuadrature::Quadrature, kappa).unwrap();
            product = product.max((p - 1.0).abs());
        }
    }

    // linearized Monte-Carlo at kappa = 1/3: both fixed-LO quadratures from the same paths
    let params = ModelParams::new(2.0, 0.01, 1.0 / 3.0).unwrap();
    let system = AnisotropicLinearSystem::new(&params).unwrap();
    let spec =
        EnsembleSpec::new(4000, 1e-3, params.default_burn_in(), 50.0, 7007).with_samples(1000);
    let ensemble = run_ensemble(&system, &[Complex64::ZERO; 4], &spec, workers(), |_| {
        |x: &[Complex64]| {
            let b = [x[0], x[1], x[2], x[3]];
            Ok((
                homodyne_from_fluctuations(&b, 0.0),
                homodyne_from_fluctuations(&b, FRAC_PI_2),
            ))
        }
    })
    .unwrap();
    let in_phase: Vec<Vec<Complex64>> = ensemble
        .trajectories
        .iter()
        .map(|t| t.samples.iter().map(|s| s.0).collect())
        .collect();
    let quadrature: Vec<Vec<Complex64>> = ensemble
        .trajectories
        .iter()
        .map(|t| t.samples.iter().map(|s| s.1).collect())
        .collect();
    // lag windows from each quadrature's damping: 2 kappa (in phase), 2 (squeezed)
    let options = |rate: f64| SpectrumOptions {
        omega: vec![0.0],
        max_lag: Some(max_lag_for_rate(rate)),
        detection_rate: anisotropic_detection_rate(&params),
    };
    let v0 = mc_spectrum(
        &refs(&in_phase),
        spec.sample_dt(),
        &options(2.0 * params.kappa),
        workers(),
    )
    .unwrap();
    let v90 = mc_spectrum(
        &refs(&quadrature),
        spec.sample_dt(),
        &options(2.0),
        workers(),
    )
    .unwrap();
    let (a, b) = (v0.v[0], v90.v[0]);
    let n = v0.n_trajectories() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = v0
        .per_trajectory
        .iter()
        .zip(&v90.per_trajectory)
        .map(|(x, y)| (x[0], y[0]))
        .unzip();
    let cov = |u: &[f64], mu: f64, v: &[f64], mv: f64| {
        u.iter()
            .zip(v)
            .map(|(x, y)| (x - mu) * (y - mv))
            .sum::<f64>()
            / (n - 1.0)
    };
    // delta method for the product of two correlated means
    let var = (b * b * cov(&xs, a, &xs, a)
        + a * a * cov(&ys, b, &ys, b)
        + 2.0 * a * b * cov(&xs, a, &ys, b))
        / n;
    let se = var.sqrt();
    let prod = a * b;
    all(vec![
        check(reduction <= 1e-12, format!("kappa=0 reduction max dev {reduction:.1e}")),
        check(product <= 1e-12, format!("analytic V0*V90 max |.-1| = {product:.1e}")),
        check(
            (prod - 1.0).abs() <= 2.0 * se,
            format!("MC V0(0) = {a:.3}+-{:.3}, V90(0) = {b:.4}+-{:.4}, product {prod:.4} +- {se:.4} within 2 SE of 1", v0.stderr[0], v90.stderr[0]),
        ),
    ])
}

fn criterion_8() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let commands: [(&str, &[&str]); 9] = [
        ("steady", &[]),
        ("eigen", &["--sigma", "3"]),
        (
            "field",
            &["--field", "lo", "--theta", "30", "--n_points", "64"],
        ),
        ("spectrum", &["--psi_l", "75"]),
        (
            "spectrum",
            &[
                "--mode",
                "linear-mc",
                "--trajectories",
                "40",
                "--t_record",
                "10",
                "--dump_trajectories",
                "true",
            ],
        ),
        (
            "spectrum",
            &[
                "--mode",
                "nonlinear-mc",
                "--sigma",
                "1.5",
                "--trajectories",
                "12",
                "--t_record",
                "5",
                "--t_burn",
                "1",
            ],
        ),
        (
            "spectrum",
            &[
                "--mode",
                "aniso",
                "--kappa",
                "0.3",
                "--trajectories",
                "12",
                "--t_record",
                "5",
                "--t_burn",
                "1",
            ],
        ),
        (
            "diffusion",
            &[
                "--trajectories",
                "30",
                "--t_record",
                "100",
                "--dump_trajectories",
                "true",
            ],
        ),
        (
            "diffusion",
            &[
                "--diffusion_mode",
                "nonlinear",
                "--trajectories",
                "12",
                "--t_record",
                "4",
                "--t_burn",
                "1",
                "--fit_t_min",
                "0.5",
            ],
        ),
    ];
    let mut mismatches = Vec::new();
    let mut files = 0;
    for (i, (cmd, extra)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for w in [1, 4, 16] {
            let dir = base.path().join(format!("{i}-{w}"));
            let mut args = vec![
                "rotsqueeze".to_string(),
                cmd.to_string(),
                "--seed".into(),
                "77".into(),
            ];
            args.extend(extra.iter().map(|s| s.to_string()));
            args.extend([
                "--workers".into(),
                w.to_string(),
                "--out".into(),
                dir.display().to_string(),
            ]);
            cli::run(args).unwrap();
            let mut names: Vec<_> = std::fs::read_dir(&dir)
                .unwrap()
                .map(|e| e.unwrap().file_name())
                .collect();
            names.sort();
            let contents: Vec<_> = names
                .iter()
                .map(|n| (n.clone(), std::fs::read(dir.join(n)).unwrap()))
                .collect();
            outputs.push(contents);
        }
        files += outputs[0].len();
        if outputs[1] != outputs[0] || outputs[2] != outputs[0] {
            mismatches.push(format!("{cmd} {extra:?}"));
        }
    }
    check(
        mismatches.is_empty(),
        format!(
            "{} command runs x workers 1/4/16, {files} files compared; mismatches: {mismatches:?}",
            commands.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut worst_v = 0.0f64;
    for step in 0..=30 {
        let eps = (step as f64 * 0.5).to_radians();
        for sign in [1.0, -1.0] {
            worst_v = worst_v.max(analytic_v(0.0, FRAC_PI_2 + sign * eps));
        }
    }
    let db = -10.0 * worst_v.log10();
    check(
        worst_v <= 0.067 && db >= 11.7,
        format!("max V(0) for |phase error| <= 15deg = {worst_v:.5} ({db:.2} dB >= 11.7 dB)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("analytic spectrum values", criterion_1),
        ("linearized Monte-Carlo spectrum", criterion_2),
        ("nonlinear positive-P spectrum", criterion_3),
        ("orientation diffusion", criterion_4),
        ("eigensystem of L", criterion_5),
        ("mode quadrature", criterion_6),
        ("anisotropic identities", criterion_7),
        ("reproducibility across workers", criterion_8),
        ("LO phase robustness", criterion_9),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match std::panic::catch_unwind(f) {
            Ok(o) => o,
            Err(e) => check(
                false,
                format!(
                    "panicked: {:?}",
                    e.downcast_ref::<String>()
                        .map(String::as_str)
                        .or(e.downcast_ref::<&str>().copied())
                ),
            ),
        };
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "acceptance {id} {name}: {} ({}) [{:.1} s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
