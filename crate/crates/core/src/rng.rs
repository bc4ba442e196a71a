//! Reproducible random streams.
//!
//! Every draw comes from a ChaCha20 stream selected by the master seed and
//! an injective packing of `(p, factor, sample)`, so results do not depend
//! on how work is scheduled across threads.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;

/// Stream identifier: `p` in the top 24 bits, the tuple factor in the next
/// 8, the sample index in the low 32.
pub fn stream_id(p: usize, factor: usize, sample: usize) -> u64 {
    assert!(p < (1 << 24) && factor < (1 << 8) && sample < (1usize << 32), "stream key out of range");
    ((p as u64) << 40) | ((factor as u64) << 32) | sample as u64
}

pub fn stream(seed: u64, p: usize, factor: usize, sample: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(p, factor, sample));
    rng
}

/// Standard complex Gaussian `(X + iY)/√2`, `E|a|² = 1`.
pub fn complex_gaussian<T: Real, R: rand::Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(T::lit(x * s), T::lit(y * s))
}

pub fn complex_gaussian_vec<T: Real, R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex<T>> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}
