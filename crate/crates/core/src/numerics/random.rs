//! Seeded smooth random test functions on the half-line.
//!
//! Draws are expansions in Laguerre functions `√(2/s) L_k(2Y/s) e^{−Y/s}` with complex normal
//! coefficients, so the same seed gives the same continuous function on every grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Number of Laguerre functions per draw.
pub const DRAW_TERMS: usize = 6;

/// A smooth decaying function given by its Laguerre coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDraw {
    pub scale: f64,
    pub coeffs: Vec<Complex64>,
    /// Multiply by `Y` so that the function vanishes at the wall.
    pub vanish_at_wall: bool,
}

impl SmoothDraw {
    pub fn eval(&self, y: f64) -> Complex64 {
        let x = 2.0 * y / self.scale;
        let (mut lkm1, mut lk) = (0.0, 1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                let next = ((2 * k - 1) as f64 - x) * lk / k as f64 - (k - 1) as f64 * lkm1 / k as f64;
                lkm1 = lk;
                lk = next;
            }
            acc += c * lk;
        }
        let v = acc * (2.0 / self.scale).sqrt() * (-y / self.scale).exp();
        if self.vanish_at_wall {
            v * y
        } else {
            v
        }
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<Complex64> {
        nodes.iter().map(|&y| self.eval(y)).collect()
    }
}

/// Deterministic seed from a base seed, a label and indices (FNV-1a followed by a SplitMix64
/// finalizer).
pub fn mix_seed(base: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    for &i in indices {
        h ^= i;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Draw with the length scale log-uniform in `[scale_lo, scale_hi]`.
pub fn smooth_draw(seed: u64, scale_lo: f64, scale_hi: f64, vanish_at_wall: bool) -> SmoothDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t: f64 = rng.gen_range(0.0..1.0);
    let scale = (scale_lo.ln() + t * (scale_hi.ln() - scale_lo.ln())).exp();
    let coeffs = (0..DRAW_TERMS)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    SmoothDraw { scale, coeffs, vanish_at_wall }
}
