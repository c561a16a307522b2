//! Transverse mode functions at the cavity waist and homodyne overlaps.
//!
//! Lengths are in units of `w` (the signal beam radius is `sqrt(2) w`).
//! Quadrature is the midpoint rule on a uniform Cartesian grid.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_EXTENT: f64 = 6.0;
pub const DEFAULT_POINTS: usize = 256;
const MIN_EXTENT: f64 = 5.0;
const MIN_QUADRATURE_POINTS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid {
    extent: f64,
    n_points: usize,
}

impl Default for TransverseGrid {
    fn default() -> Self {
        Self {
            extent: DEFAULT_EXTENT,
            n_points: DEFAULT_POINTS,
        }
    }
}

impl TransverseGrid {
    pub fn new(extent: f64, n_points: usize) -> Result<Self> {
        if !(extent >= MIN_EXTENT && extent.is_finite()) {
            return Err(Error::param(
                "extent",
                format!("must be >= {MIN_EXTENT} beam radii, got {extent}"),
            ));
        }
        if n_points < 2 {
            return Err(Error::param("n_points", "need at least 2 points per axis"));
        }
        Ok(Self { extent, n_points })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n_points as f64
    }

    pub fn len(&self) -> usize {
        self.n_points * self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Cell-centre coordinate along one axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.spacing()
    }

    /// `(x, y)` of flat index `k` (row-major, `y` slowest).
    pub fn point(&self, k: usize) -> (f64, f64) {
        (
            self.coordinate(k % self.n_points),
            self.coordinate(k / self.n_points),
        )
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    fn check_quadrature(&self) -> Result<()> {
        if self.n_points < MIN_QUADRATURE_POINTS {
            return Err(Error::param(
                "n_points",
                format!("quadrature needs >= {MIN_QUADRATURE_POINTS} points per axis"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    Gauss,
    LaguerrePlus,
    LaguerreMinus,
    /// First-order H-G mode with its lobes along `theta`.
    Tem10 {
        theta: f64,
    },
    /// First-order H-G mode with its nodal line along `theta`.
    Tem01 {
        theta: f64,
    },
}

impl ModeKind {
    pub fn label(&self) -> String {
        match self {
            ModeKind::Gauss => "gauss".into(),
            ModeKind::LaguerrePlus => "laguerre_plus1".into(),
            ModeKind::LaguerreMinus => "laguerre_minus1".into(),
            ModeKind::Tem10 { theta } => format!("tem10(theta={theta})"),
            ModeKind::Tem01 { theta } => format!("tem01(theta={theta})"),
        }
    }
}

#[inline]
fn envelope(x: f64, y: f64) -> f64 {
    (-(x * x + y * y) / 2.0).exp()
}

/// Closed-form mode value at `(x, y)`. All modes are unit-normalized.
pub fn mode_value(kind: ModeKind, x: f64, y: f64) -> Complex64 {
    let inv_sqrt_pi = 1.0 / PI.sqrt();
    match kind {
        ModeKind::Gauss => Complex64::from(2f64.sqrt() * inv_sqrt_pi * (-(x * x + y * y)).exp()),
        ModeKind::LaguerrePlus => Complex64::new(x, y) * (inv_sqrt_pi * envelope(x, y)),
        ModeKind::LaguerreMinus => Complex64::new(x, -y) * (inv_sqrt_pi * envelope(x, y)),
        ModeKind::Tem10 { theta } => Complex64::from(
            (2.0 / PI).sqrt() * (x * theta.cos() + y * theta.sin()) * envelope(x, y),
        ),
        ModeKind::Tem01 { theta } => Complex64::from(
            (2.0 / PI).sqrt() * (y * theta.cos() - x * theta.sin()) * envelope(x, y),
        ),
    }
}

/// Complex envelope sampled on a [`TransverseGrid`].
#[derive(Debug, Clone)]
pub struct TransverseField {
    grid: TransverseGrid,
    values: Vec<Complex64>,
    label: String,
}

impl TransverseField {
    pub fn from_fn(
        grid: TransverseGrid,
        label: impl Into<String>,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let values = grid.points().map(|(x, y)| f(x, y)).collect();
        Self {
            grid,
            values,
            label: label.into(),
        }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
            label: self.label.clone(),
        }
    }

    /// `sum_k a_k f_k` over fields sharing one grid.
    pub fn combination(
        terms: &[(Complex64, &TransverseField)],
        label: impl Into<String>,
    ) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or(Error::param("terms", "empty combination"))?;
        let grid = first.grid;
        let mut values = vec![Complex64::ZERO; grid.len()];
        for (c, f) in terms {
            if f.grid != grid {
                return Err(Error::GridMismatch);
            }
            for (v, u) in values.iter_mut().zip(&f.values) {
                *v += c * u;
            }
        }
        Ok(Self {
            grid,
            values,
            label: label.into(),
        })
    }

    /// `<self, other> = ∫ conj(self) other d^2r`.
    pub fn inner(&self, other: &TransverseField) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.grid.check_quadrature()?;
        let h = self.grid.spacing();
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * h * h)
    }

    /// `∫ |field|^2 d^2r`.
    pub fn norm_sqr(&self) -> Result<f64> {
        self.grid.check_quadrature()?;
        let h = self.grid.spacing();
        Ok(self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h)
    }

    pub fn max_abs_diff(&self, other: &TransverseField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with columns `x,y,re,im`; `header` lines are written as `# ` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# field={}", self.label)?;
        writeln!(w, "x,y,re,im")?;
        for ((x, y), v) in self.grid.points().zip(&self.values) {
            writeln!(w, "{x:.6},{y:.6},{:.12e},{:.12e}", v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn eval_mode(kind: ModeKind, grid: &TransverseGrid) -> TransverseField {
    TransverseField::from_fn(*grid, kind.label(), |x, y| mode_value(kind, x, y))
}

/// Classical signal envelope `(2 pi^-1/2 rho) r cos(phi - theta) e^{-r^2/2}`.
pub fn classical_envelope(rho: f64, theta: f64, grid: &TransverseGrid) -> Result<TransverseField> {
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::param("rho", format!("must be >= 0, got {rho}")));
    }
    Ok(TransverseField::from_fn(
        *grid,
        format!("classical(rho={rho},theta={theta})"),
        |x, y| Complex64::from(classical_value(rho, theta, x, y)),
    ))
}

/// Pointwise value of [`classical_envelope`].
pub fn classical_value(rho: f64, theta: f64, x: f64, y: f64) -> f64 {
    2.0 * rho / PI.sqrt() * (x * theta.cos() + y * theta.sin()) * envelope(x, y)
}

/// Unit-norm local oscillator `e^{i psi_L} TEM01(theta)`, orthogonal to the
/// classical envelope at the same orientation.
pub fn lo_envelope(theta: f64, psi_l: f64, grid: &TransverseGrid) -> TransverseField {
    let phase = Complex64::from_polar(1.0, psi_l);
    TransverseField::from_fn(*grid, format!("lo(theta={theta},psi_l={psi_l})"), |x, y| {
        phase * mode_value(ModeKind::Tem01 { theta }, x, y)
    })
}

/// `A_s = alpha_+1 L_+1 + alpha_-1 L_-1`.
pub fn signal_field(
    alpha_p1: Complex64,
    alpha_m1: Complex64,
    grid: &TransverseGrid,
) -> TransverseField {
    TransverseField::from_fn(*grid, "signal", |x, y| {
        alpha_p1 * mode_value(ModeKind::LaguerrePlus, x, y)
            + alpha_m1 * mode_value(ModeKind::LaguerreMinus, x, y)
    })
}

/// `A_s^+ = alpha_+1^+ conj(L_+1) + alpha_-1^+ conj(L_-1)`.
pub fn signal_field_plus(
    alpha_p1_plus: Complex64,
    alpha_m1_plus: Complex64,
    grid: &TransverseGrid,
) -> TransverseField {
    TransverseField::from_fn(*grid, "signal_plus", |x, y| {
        alpha_p1_plus * mode_value(ModeKind::LaguerrePlus, x, y).conj()
            + alpha_m1_plus * mode_value(ModeKind::LaguerreMinus, x, y).conj()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneOverlap {
    /// `∫ conj(A_L) A_s`.
    pub lo_signal: Complex64,
    /// `∫ A_L A_s^+`.
    pub lo_signal_plus: Complex64,
    /// `N = ∫ |A_L|^2`.
    pub lo_norm: f64,
}

impl HomodyneOverlap {
    /// Homodyne field `N^{-1/2} (∫ conj(A_L) A_s + ∫ A_L A_s^+)`.
    pub fn signal(&self) -> Complex64 {
        (self.lo_signal + self.lo_signal_plus) / self.lo_norm.sqrt()
    }
}

pub fn homodyne_overlap(
    field_s: &TransverseField,
    field_s_plus: &TransverseField,
    lo: &TransverseField,
) -> Result<HomodyneOverlap> {
    if field_s.grid != lo.grid || field_s_plus.grid != lo.grid {
        return Err(Error::GridMismatch);
    }
    lo.grid.check_quadrature()?;
    let h2 = lo.grid.spacing().powi(2);
    let lo_signal = lo.inner(field_s)?;
    let lo_signal_plus: Complex64 = lo
        .values
        .iter()
        .zip(&field_s_plus.values)
        .map(|(l, s)| l * s)
        .sum::<Complex64>()
        * h2;
    Ok(HomodyneOverlap {
        lo_signal,
        lo_signal_plus,
        lo_norm: lo.norm_sqr()?,
    })
}

/// Homodyne field of the state `(alpha_+1, alpha_+1^+, alpha_-1, alpha_-1^+)`
/// against the LO `e^{i psi_L} TEM01(theta)`, by quadrature on `grid`.
pub fn quadrature_homodyne(
    amplitudes: &[Complex64; 4],
    theta: f64,
    psi_l: f64,
    grid: &TransverseGrid,
) -> Result<Complex64> {
    let s = signal_field(amplitudes[0], amplitudes[2], grid);
    let sp = signal_field_plus(amplitudes[1], amplitudes[3], grid);
    Ok(homodyne_overlap(&s, &sp, &lo_envelope(theta, psi_l, grid))?.signal())
}

/// Homodyne field for a unit LO `e^{i psi_L} TEM01(theta)`, evaluated in the
/// L-G basis instead of by quadrature. `amplitudes` is
/// `(alpha_+1, alpha_+1^+, alpha_-1, alpha_-1^+)`.
pub fn modal_homodyne(amplitudes: &[Complex64; 4], theta: f64, psi_l: f64) -> Complex64 {
    let [ap, ap_plus, am, am_plus] = *amplitudes;
    let rot = Complex64::from_polar(1.0, theta);
    let lo = Complex64::from_polar(1.0, psi_l);
    let direct = lo.conj() * (rot * ap - rot.conj() * am);
    let conjugate = lo * (rot.conj() * ap_plus - rot * am_plus);
    Complex64::new(0.0, FRAC_1_SQRT_2) * (direct - conjugate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TransverseGrid {
        TransverseGrid::default()
    }

    #[test]
    fn mode_norms_and_orthogonality() {
        let g = grid();
        let kinds = [
            ModeKind::Gauss,
            ModeKind::LaguerrePlus,
            ModeKind::LaguerreMinus,
            ModeKind::Tem10 { theta: 0.3 },
            ModeKind::Tem01 { theta: 0.3 },
        ];
        for k in kinds {
            let n = eval_mode(k, &g).norm_sqr().unwrap();
            assert!((n - 1.0).abs() < 1e-6, "{k:?}: {n}");
        }
        let lp = eval_mode(ModeKind::LaguerrePlus, &g);
        let lm = eval_mode(ModeKind::LaguerreMinus, &g);
        assert!(lp.inner(&lm).unwrap().norm() < 1e-10);
        for theta in [0.0, 0.7, PI / 3.0] {
            let a = eval_mode(ModeKind::Tem10 { theta }, &g);
            let b = eval_mode(ModeKind::Tem01 { theta }, &g);
            assert!(a.inner(&b).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn classical_envelope_examples() {
        let expected = 2.0 / PI.sqrt() * (-0.5f64).exp();
        assert!((classical_value(1.0, 0.0, 1.0, 0.0) - expected).abs() < 1e-15);

        let g = grid();
        let zero = classical_envelope(0.0, 1.2, &g).unwrap();
        assert!(zero.values().iter().all(|v| *v == Complex64::ZERO));
        assert!(classical_envelope(-1.0, 0.0, &g).is_err());
    }

    #[test]
    fn classical_is_lg_superposition() {
        let g = grid();
        let lp = eval_mode(ModeKind::LaguerrePlus, &g);
        let lm = eval_mode(ModeKind::LaguerreMinus, &g);
        for (rho, theta) in [(1.0, 0.0), (3.5, 0.4), (12.0, -2.1)] {
            let cl = classical_envelope(rho, theta, &g).unwrap();
            let sum = TransverseField::combination(
                &[
                    (Complex64::from_polar(rho, -theta), &lp),
                    (Complex64::from_polar(rho, theta), &lm),
                ],
                "sum",
            )
            .unwrap();
            assert!(cl.max_abs_diff(&sum).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lo_properties() {
        let g = grid();
        for (theta, psi) in [(0.0, 0.0), (0.9, 1.3), (-2.0, PI / 2.0)] {
            let lo = lo_envelope(theta, psi, &g);
            assert!((lo.norm_sqr().unwrap() - 1.0).abs() < 1e-6);
            let cl = classical_envelope(2.0, theta, &g).unwrap();
            assert!(lo.inner(&cl).unwrap().norm() < 1e-10);
        }
        // LO is the angular derivative of the bright mode
        let eps = 1e-5;
        let plus = classical_envelope(1.0, eps, &g).unwrap();
        let minus = classical_envelope(1.0, -eps, &g).unwrap();
        let deriv = TransverseField::combination(
            &[
                (Complex64::from(0.5 / eps), &plus),
                (Complex64::from(-0.5 / eps), &minus),
            ],
            "d/dtheta",
        )
        .unwrap();
        let lo = lo_envelope(0.0, 0.0, &g);
        let overlap = lo.inner(&deriv).unwrap().norm() / deriv.norm_sqr().unwrap().sqrt();
        assert!((overlap - 1.0).abs() < 1e-6, "{overlap}");
    }

    #[test]
    fn quadrature_guards() {
        let coarse = TransverseGrid::new(6.0, 64).unwrap();
        assert!(eval_mode(ModeKind::Gauss, &coarse).norm_sqr().is_err());
        assert!(TransverseGrid::new(4.0, 256).is_err());
        let a = eval_mode(ModeKind::Gauss, &grid());
        let b = eval_mode(ModeKind::Gauss, &TransverseGrid::new(7.0, 256).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch)));
        assert!(matches!(
            homodyne_overlap(&a, &a, &b),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn lg_and_hg_span_the_same_plane() {
        let g = grid();
        let lp = eval_mode(ModeKind::LaguerrePlus, &g);
        let lm = eval_mode(ModeKind::LaguerreMinus, &g);
        for theta in [0.0, 0.35, 2.0] {
            let t10 = eval_mode(ModeKind::Tem10 { theta }, &g);
            let t01 = eval_mode(ModeKind::Tem01 { theta }, &g);
            // rebuild each basis from the other using quadrature coefficients
            for target in [&lp, &lm] {
                let c10 = t10.inner(target).unwrap();
                let c01 = t01.inner(target).unwrap();
                let rebuilt =
                    TransverseField::combination(&[(c10, &t10), (c01, &t01)], "r").unwrap();
                assert!(rebuilt.max_abs_diff(target).unwrap() < 1e-10);
            }
            for target in [&t10, &t01] {
                let cp = lp.inner(target).unwrap();
                let cm = lm.inner(target).unwrap();
                let rebuilt = TransverseField::combination(&[(cp, &lp), (cm, &lm)], "r").unwrap();
                assert!(rebuilt.max_abs_diff(target).unwrap() < 1e-10);
            }
        }
    }

    fn state_from_b(rho: f64, theta: f64, b: [Complex64; 4]) -> [Complex64; 4] {
        let e = Complex64::from_polar(1.0, -theta);
        [
            (rho + b[0]) * e,
            (rho + b[1]) * e.conj(),
            (rho + b[2]) * e.conj(),
            (rho + b[3]) * e,
        ]
    }

    fn quadrature_signal(state: &[Complex64; 4], lo: &TransverseField) -> Complex64 {
        let g = lo.grid();
        let s = signal_field(state[0], state[2], g);
        let sp = signal_field_plus(state[1], state[3], g);
        homodyne_overlap(&s, &sp, lo).unwrap().signal()
    }

    #[test]
    fn quadrature_homodyne_uses_unit_lo() {
        let g = grid();
        let state = [
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.3, 0.1),
            Complex64::new(0.5, -1.0),
            Complex64::new(2.0, 0.7),
        ];
        let direct = quadrature_signal(&state, &lo_envelope(0.2, 1.1, &g));
        assert_eq!(quadrature_homodyne(&state, 0.2, 1.1, &g).unwrap(), direct);
    }

    #[test]
    fn homodyne_examples() {
        let g = grid();
        let (rho, theta) = (7.0, 0.4);
        for psi in [0.0, 0.8, PI / 2.0] {
            let lo = lo_envelope(theta, psi, &g);
            let mean = quadrature_signal(&state_from_b(rho, theta, [Complex64::ZERO; 4]), &lo);
            assert!(mean.norm() < 1e-10);
        }

        // b = c1 w1
        let c1 = Complex64::new(0.0, 0.1);
        let b = [-0.5 * c1, -0.5 * c1, 0.5 * c1, 0.5 * c1];
        let lo = lo_envelope(theta, PI / 2.0, &g);
        let de = quadrature_signal(&state_from_b(rho, theta, b), &lo);
        // signed identity for this LO convention: dE = -sqrt(2) sin(psi_L) c1
        assert!((de + 2f64.sqrt() * c1).norm() < 1e-6, "{de}");

        let lo3 = lo.scaled(Complex64::from(3.0));
        let de3 = quadrature_signal(&state_from_b(rho, theta, b), &lo3);
        assert!((de3 - de).norm() < 1e-10);
    }

    #[test]
    fn modal_matches_quadrature() {
        let g = grid();
        let states = [
            [
                Complex64::new(1.0, 2.0),
                Complex64::new(-0.3, 0.1),
                Complex64::new(0.5, -1.0),
                Complex64::new(2.0, 0.7),
            ],
            [
                Complex64::new(-4.0, 0.2),
                Complex64::new(3.0, 3.0),
                Complex64::new(0.0, -2.5),
                Complex64::new(1.1, -0.9),
            ],
        ];
        for (i, s) in states.iter().enumerate() {
            let theta = 0.3 + i as f64;
            let psi = 0.5 * i as f64 + 0.2;
            let lo = lo_envelope(theta, psi, &g);
            let q = quadrature_signal(s, &lo);
            let m = modal_homodyne(s, theta, psi);
            assert!((q - m).norm() < 1e-9, "{q} vs {m}");
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let g = TransverseGrid::new(5.0, 4).unwrap();
        let f = eval_mode(ModeKind::Gauss, &g);
        let mut buf = Vec::new();
        f.write_csv(&mut buf, &["seed=1".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[2], "x,y,re,im");
        assert_eq!(lines.len(), 3 + 16);
    }
}
