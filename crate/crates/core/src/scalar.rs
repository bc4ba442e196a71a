//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`], which is implemented for `f32` and
//! `f64`. Tolerances quoted in tests assume `f64`; the `f32` instantiation is
//! kept compiling and smoke-tested so the code stays type-agnostic.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as an `f64`, for tolerance bookkeeping.
    fn eps_f64() -> f64 {
        Self::epsilon().as_f64()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise summation; result depends only on the input order.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut acc = T::zero();
        for &x in xs {
            acc = acc + x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Parallel dot product with a fixed reduction tree (independent of the
/// worker count).
pub fn par_dot<T: Real>(a: &[T], b: &[T]) -> T {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    assert_eq!(a.len(), b.len());
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| {
            let prod: Vec<T> = x.iter().zip(y).map(|(&u, &v)| u * v).collect();
            pairwise_sum(&prod)
        })
        .collect();
    pairwise_sum(&partial)
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Natural log of the gamma function for `x > 0`.
///
/// Shifts the argument above 10 and applies the Stirling series; relative
/// accuracy is close to machine precision for `f64`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    assert!(x > T::zero(), "ln_gamma needs a positive argument");
    let ten = T::lit(10.0);
    let mut prod = T::one();
    let mut y = x;
    while y < ten {
        prod = prod * y;
        y = y + T::one();
    }
    let shift = prod.ln();
    let inv = T::one() / y;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k-1) y^{2k-1}), Horner in 1/y²
    const COEF: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let mut acc = T::zero();
    for &c in COEF.iter().rev() {
        acc = acc * inv2 + T::lit(c);
    }
    let series = inv * acc;
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_8);
    (y - T::lit(0.5)) * y.ln() - y + half_ln_two_pi + series - shift
}

/// `ln C(n, k)` computed through [`ln_gamma`].
pub fn ln_binomial<T: Real>(n: usize, k: usize) -> T {
    assert!(k <= n);
    let one = T::one();
    ln_gamma(T::from_usize_lossy(n) + one)
        - ln_gamma(T::from_usize_lossy(k) + one)
        - ln_gamma(T::from_usize_lossy(n - k) + one)
}
