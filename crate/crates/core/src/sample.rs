//! Seeded, reproducible samplers for the bidisk. Every sup-norm claim in a
//! report is taken over one of these deterministic sample sets.

use crate::C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Radius cap for interior samples; keeps evaluations away from boundary
/// zeros of the denominator so roundoff stays below the report tolerances.
pub const RADIUS_CAP: f64 = 0.97;

/// Deterministic sampler over the bidisk.
pub struct DiskSampler {
    rng: ChaCha20Rng,
    cap: f64,
}

impl DiskSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            cap: RADIUS_CAP,
        }
    }

    pub fn with_cap(seed: u64, cap: f64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            cap,
        }
    }

    fn disk_point(&mut self) -> C64 {
        let u: f64 = self.rng.gen();
        let v: f64 = self.rng.gen();
        C64::from_polar(self.cap * u.sqrt(), 2.0 * std::f64::consts::PI * v)
    }

    /// One point of the bidisk.
    pub fn point(&mut self) -> (C64, C64) {
        (self.disk_point(), self.disk_point())
    }

    /// `n` points of the bidisk.
    pub fn points(&mut self, n: usize) -> Vec<(C64, C64)> {
        (0..n).map(|_| self.point()).collect()
    }

    /// `n` pairs of bidisk points.
    pub fn pairs(&mut self, n: usize) -> Vec<((C64, C64), (C64, C64))> {
        (0..n).map(|_| (self.point(), self.point())).collect()
    }

    /// A unit vector of C^r.
    pub fn direction(&mut self, r: usize) -> Vec<C64> {
        let mut v: Vec<C64> = (0..r)
            .map(|_| C64::new(self.rng.gen::<f64>() - 0.5, self.rng.gen::<f64>() - 0.5))
            .collect();
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            for x in v.iter_mut() {
                *x /= C64::new(n, 0.0);
            }
        } else {
            v[0] = C64::new(1.0, 0.0);
        }
        v
    }

    /// A point of the exterior product domain (both |z_j| > 1).
    pub fn exterior_point(&mut self) -> (C64, C64) {
        let r1 = 1.05 + 2.0 * self.rng.gen::<f64>();
        let r2 = 1.05 + 2.0 * self.rng.gen::<f64>();
        let a1 = 2.0 * std::f64::consts::PI * self.rng.gen::<f64>();
        let a2 = 2.0 * std::f64::consts::PI * self.rng.gen::<f64>();
        (C64::from_polar(r1, a1), C64::from_polar(r2, a2))
    }
}
