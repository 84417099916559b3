use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseMatrix;

/// Seeded standard-normal generator: ChaCha8 stream, 53-bit uniforms,
/// Box–Muller pairs.
#[derive(Debug, Clone)]
pub struct GaussianRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }

    /// `n x r` block of iid N(0, 1) entries, filled column by column.
    pub fn block(&mut self, n: usize, r: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(n, r);
        for v in out.iter_mut() {
            *v = self.normal();
        }
        out
    }
}

/// `n x r` Gaussian block drawn from a fresh generator seeded with `seed`.
pub fn gaussian_block(n: usize, r: usize, seed: u64) -> DenseMatrix {
    GaussianRng::new(seed).block(n, r)
}
