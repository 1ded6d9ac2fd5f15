//! Probabilists' Hermite polynomials, orthonormal Hermite functions, and
//! Fourier–Hermite polynomials evaluated on Gaussian coordinate samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// Probabilists' Hermite polynomial h_n(x) by the three-term recurrence
/// h_{n+1} = x h_n - n h_{n-1}, h_0 = 1, h_1 = x.
pub fn hermite_poly(n: u32, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Hermite function of order k >= 1:
/// xi_k(t) = pi^{-1/4} ((k-1)!)^{-1/2} e^{-t^2/2} h_{k-1}(sqrt(2) t).
///
/// Evaluated with the normalized two-term recurrence on the functions
/// themselves (no factorial division), stable for k up to a few hundred.
/// The family is orthonormal in L2(R).
pub fn hermite_function(k: usize, t: f64) -> f64 {
    assert!(k >= 1, "Hermite functions are indexed from 1");
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * t * t).exp();
    if k == 1 {
        return psi0;
    }
    let mut prev = psi0;
    let mut cur = std::f64::consts::SQRT_2 * t * psi0;
    for n in 2..k {
        let n = n as f64;
        let next = (2.0 / n).sqrt() * t * cur - ((n - 1.0) / n).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Realized Gaussian pairings z_k, k = 1..K, of one white-noise sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub z: Vec<f64>,
    /// Master seed the sample was drawn from.
    pub seed: u64,
}

impl GaussianSample {
    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Fourier–Hermite polynomial H_gamma = prod_k h_{gamma_k}(z_k).
pub fn eval_fourier_hermite(gamma: &MultiIndex, sample: &GaussianSample) -> Result<f64> {
    if gamma.max_position() > sample.dim() {
        return Err(Error::DimensionMismatch(format!(
            "index {gamma} supported at position {} but the sample has dimension {}",
            gamma.max_position(),
            sample.dim()
        )));
    }
    let mut v = 1.0;
    for (k, c) in gamma.iter() {
        v *= hermite_poly(c, sample.z[k - 1]);
    }
    Ok(v)
}

/// Draw sample `index` of the stream identified by `seed`: an i.i.d.
/// N(0, I_dim) vector. Independent of how many other samples are drawn and
/// in which order, so parallel draws stay reproducible.
pub fn draw_sample(dim: usize, seed: u64, index: u64) -> GaussianSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    GaussianSample { z, seed }
}

/// `count` reproducible i.i.d. N(0, I_dim) samples; same seed, same output.
pub fn draw_samples(dim: usize, count: usize, seed: u64) -> Vec<GaussianSample> {
    (0..count as u64).map(|i| draw_sample(dim, seed, i)).collect()
}
