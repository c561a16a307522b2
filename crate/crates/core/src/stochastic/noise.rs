use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One draw of the two independent complex noises `(xi, xi^+)`.
///
/// Each is `(u + i v)/sqrt(2)` with `u, v` standard normal, so
/// `<xi xi*> = 1`, `<xi xi> = 0` and `<xi xi^+> = 0`. Multiplying by `sqrt(dt)`
/// turns a draw into a pair of complex Wiener increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub xi: Complex64,
    pub xi_plus: Complex64,
}

impl NoiseDraw {
    pub const ZERO: NoiseDraw = NoiseDraw {
        xi: Complex64::ZERO,
        xi_plus: Complex64::ZERO,
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut c = || {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            Complex64::new(u * FRAC_1_SQRT_2, v * FRAC_1_SQRT_2)
        };
        let xi = c();
        let xi_plus = c();
        Self { xi, xi_plus }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            xi: self.xi * s,
            xi_plus: self.xi_plus * s,
        }
    }
}

/// Counter-based stream for one trajectory: ChaCha8 keyed by the master seed,
/// with the trajectory index as the stream id. The draws of trajectory `i`
/// depend only on `(master_seed, i)`.
#[derive(Debug, Clone)]
pub struct TrajectoryRng {
    rng: ChaCha8Rng,
}

impl TrajectoryRng {
    pub fn new(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self { rng }
    }

    pub fn draw(&mut self) -> NoiseDraw {
        NoiseDraw::sample(&mut self.rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}
