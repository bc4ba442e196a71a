//! Random sections, their zero divisors, and multi-projective constants.
//!
//! A Gaussian coefficient vector in an orthonormal basis projectivises to
//! the Fubini–Study measure on `P(H⁰)` by unitary invariance.

use num_complex::Complex;
use rayon::prelude::*;

use crate::bergman::SectionSpace;
use crate::error::{Error, Result};
use crate::harmonics::{Dictionary, TestFunction};
use crate::linalg::{balance, hessenberg_eigenvalues, CMatrix};
use crate::rng;
use crate::scalar::{ln_gamma, Real};
use crate::sphere::SpherePoint;
use crate::table::{num, Table};

/// Relative size below which leading coefficients count as roots at infinity.
pub const INFINITY_THRESHOLD: f64 = 1e-13;

/// Newton steps applied to every companion-matrix root (each step is kept
/// only if it lowers the residual).
const NEWTON_STEPS: usize = 3;

/// A section `Σ a_i s_i` in the orthonormal basis of a [`SectionSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSection<T> {
    pub coeffs: Vec<Complex<T>>,
    pub p: usize,
    pub m: i64,
    pub seed: u64,
    pub factor: usize,
    pub sample: usize,
}

/// Zeros with multiplicity; the total always equals `p + m`.
#[derive(Debug, Clone)]
pub struct ZeroSet<T> {
    pub roots: Vec<(SpherePoint<T>, usize)>,
    pub degree: usize,
}

impl<T: Real> ZeroSet<T> {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.1).sum()
    }

    /// Multiplicity of the root at `z = ∞`.
    pub fn multiplicity_at_infinity(&self) -> usize {
        self.roots
            .iter()
            .filter(|(x, _)| x.chart() == crate::Chart::W && x.coord().norm_sqr() == T::zero())
            .map(|r| r.1)
            .sum()
    }

    /// Append rows `sample, chart, re, im, multiplicity`.
    pub fn append_rows(&self, sample: usize, table: &mut Table) {
        for (x, k) in &self.roots {
            table.push(vec![
                sample.to_string(),
                x.chart().as_str().to_string(),
                num(x.coord().re.as_f64()),
                num(x.coord().im.as_f64()),
                k.to_string(),
            ]);
        }
    }
}

/// Empty CSV table for zero sets.
pub fn zero_table() -> Table {
    Table::new(&["sample", "chart", "re", "im", "multiplicity"])
}

/// Draw sample `sample` of the stream `(seed, p, factor 0)`.
pub fn sample_section<T: Real>(space: &SectionSpace<T>, seed: u64, sample: usize) -> RandomSection<T> {
    draw(space, seed, 0, sample)
}

fn draw<T: Real>(space: &SectionSpace<T>, seed: u64, factor: usize, sample: usize) -> RandomSection<T> {
    let mut r = rng::stream(seed, space.p(), factor, sample);
    RandomSection {
        coeffs: rng::complex_gaussian_vec(&mut r, space.dim()),
        p: space.p(),
        m: space.m(),
        seed,
        factor,
        sample,
    }
}

/// `k` independent sections for sample `sample`; factor `i` uses its own
/// stream, and factor 0 coincides with [`sample_section`].
pub fn sample_tuple<T: Real>(space: &SectionSpace<T>, k: usize, seed: u64, sample: usize) -> Result<Vec<RandomSection<T>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("a tuple needs k >= 1 sections".into()));
    }
    Ok((0..k).map(|f| draw(space, seed, f, sample)).collect())
}

/// `(P(z), P'(z))` by Horner, coefficients in ascending order.
fn horner<T: Real>(q: &[Complex<T>], z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let zero = Complex::new(T::zero(), T::zero());
    let mut v = zero;
    let mut dv = zero;
    for c in q.iter().rev() {
        dv = dv * z + v;
        v = v * z + c;
    }
    (v, dv)
}

fn l2<T: Real>(q: &[Complex<T>]) -> T {
    q.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
}

/// Finite roots of `Σ q_j z^j` (ascending, `q_n ≠ 0`): eigenvalues of the
/// balanced companion matrix, then Newton refinement in the chart where the
/// root lies (`w = 1/z` and the reversed polynomial when `|z| > 1`).
pub fn polynomial_roots<T: Real>(q: &[Complex<T>]) -> Result<Vec<SpherePoint<T>>> {
    let n = q.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = q[n];
    let mut a = CMatrix::zeros(n);
    for j in 0..n {
        a[(0, j)] = -(q[n - 1 - j] / lead);
    }
    for i in 1..n {
        a[(i, i - 1)] = Complex::new(T::one(), T::zero());
    }
    balance(&mut a);
    let eig = hessenberg_eigenvalues(&mut a)?;
    let rev: Vec<Complex<T>> = q.iter().rev().copied().collect();
    Ok(eig.into_iter().map(|z| polish(q, &rev, z)).collect())
}

fn polish<T: Real>(q: &[Complex<T>], rev: &[Complex<T>], z: Complex<T>) -> SpherePoint<T> {
    let newton = |poly: &[Complex<T>], mut x: Complex<T>| {
        let mut res = horner(poly, x).0.norm();
        for _ in 0..NEWTON_STEPS {
            let (v, dv) = horner(poly, x);
            if dv.norm_sqr() == T::zero() || !v.re.is_finite() {
                break;
            }
            let cand = x - v / dv;
            let r = horner(poly, cand).0.norm();
            if r.is_finite() && r < res {
                x = cand;
                res = r;
            } else {
                break;
            }
        }
        x
    };
    if z.norm_sqr() <= T::one() {
        SpherePoint::from_z(newton(q, z))
    } else {
        SpherePoint::from_w(newton(rev, z.inv()))
    }
}

/// `|P(x)| / ‖q‖` with `P` evaluated in the chart of `x` (the reversed
/// polynomial in the `w` chart, which equals `|P(z)| / |z|^n`).
pub fn backward_error<T: Real>(q: &[Complex<T>], x: &SpherePoint<T>) -> T {
    let v = match x.chart() {
        crate::Chart::Z => horner(q, x.coord()).0,
        crate::Chart::W => {
            let rev: Vec<Complex<T>> = q.iter().rev().copied().collect();
            horner(&rev, x.coord()).0
        }
    };
    v.norm() / l2(q)
}

/// Coefficients of a section in the basis `e_j / D_j` of monomials with
/// unit weighted norm. The infinity threshold is applied in this basis, where
/// every basis vector has norm one and a Gaussian section has coefficients of
/// comparable size.
pub fn unit_monomial_coefficients<T: Real>(s: &RandomSection<T>, space: &SectionSpace<T>) -> Vec<Complex<T>> {
    let c = space.unit_coefficients();
    let d = space.dim();
    (0..d)
        .map(|j| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for i in j..d {
                acc = acc + s.coeffs[i] * c[(i, j)];
            }
            acc
        })
        .collect()
}

/// Zero divisor of a section.
pub fn zeros<T: Real>(s: &RandomSection<T>, space: &SectionSpace<T>) -> Result<ZeroSet<T>> {
    if s.coeffs.len() != space.dim() {
        return Err(Error::InvalidArgument(format!(
            "section has {} coefficients, space dimension is {}",
            s.coeffs.len(),
            space.dim()
        )));
    }
    let b = unit_monomial_coefficients(s, space);
    zeros_from_coefficients(&b, &space.monomial_log_scales())
}

/// `ln √((N+1)C(N,j))`, the log-scales of the unweighted unit-norm basis.
pub fn flat_log_scales<T: Real>(n: usize) -> Vec<T> {
    (0..=n)
        .map(|j| T::lit(0.5) * (T::from_usize_lossy(n + 1).ln() + crate::scalar::ln_binomial::<T>(n, j)))
        .collect()
}

/// Zeros of `Σ b_j e^{ℓ_j} z^j`, thresholding on `|b_j|`.
pub fn zeros_from_coefficients<T: Real>(b: &[Complex<T>], log_scale: &[T]) -> Result<ZeroSet<T>> {
    assert_eq!(b.len(), log_scale.len());
    let n = b.len() - 1;
    let big = b.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    if !(big > T::zero()) || !big.is_finite() {
        return Err(Error::ZeroSection);
    }
    let thr = T::lit(INFINITY_THRESHOLD) * big;
    let mut top = n;
    while b[top].norm() < thr {
        top -= 1;
    }
    let mut low = 0;
    while b[low].norm() == T::zero() {
        low += 1;
    }
    let shift = log_scale[low..=top].iter().copied().fold(T::neg_infinity(), T::max);
    let q: Vec<Complex<T>> = (low..=top).map(|j| b[j].scale((log_scale[j] - shift).exp())).collect();
    let mut roots: Vec<(SpherePoint<T>, usize)> = Vec::with_capacity(top - low + 2);
    if low > 0 {
        roots.push((SpherePoint::north_pole(), low));
    }
    for x in polynomial_roots(&q)? {
        roots.push((x, 1));
    }
    if top < n {
        roots.push((SpherePoint::south_pole(), n - top));
    }
    Ok(ZeroSet { roots, degree: n })
}

/// Zero sets of samples `range` of the stream `(seed, p)`, in order.
pub fn sample_zero_sets<T: Real>(space: &SectionSpace<T>, seed: u64, range: std::ops::Range<usize>) -> Result<Vec<ZeroSet<T>>> {
    range
        .into_par_iter()
        .map(|i| zeros(&sample_section(space, seed, i), space))
        .collect()
}

/// `⟨(1/p)[Div s], u⟩ = (1/p) Σ mult · u(root)`.
pub fn empirical_pairing<T: Real>(zs: &ZeroSet<T>, u: &TestFunction, p: usize) -> T {
    let s: T = zs.roots.iter().map(|(x, k)| T::from_usize_lossy(*k) * u.value(x)).sum();
    s / T::from_usize_lossy(p)
}

/// [`empirical_pairing`] for every element of a dictionary.
pub fn empirical_pairings<T: Real>(zs: &ZeroSet<T>, dict: &Dictionary, p: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); dict.len()];
    for (x, k) in &zs.roots {
        let kf = T::from_usize_lossy(*k);
        for (a, v) in acc.iter_mut().zip(dict.values(x)) {
            *a = *a + kf * v;
        }
    }
    let pf = T::from_usize_lossy(p);
    acc.into_iter().map(|a| a / pf).collect()
}

/// `c_{d,k}` with `c_{d,k}^{−dk} = (dk)! / (d!)^k`.
pub fn mp_constant(d: u64, k: u64) -> Result<f64> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!("mp_constant needs d, k >= 1 (got {d}, {k})")));
    }
    let dk = (d as f64) * (k as f64);
    let num = ln_gamma(dk + 1.0) - k as f64 * ln_gamma(d as f64 + 1.0);
    Ok((-num / dk).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::build_space;
    use crate::harmonics::harmonic_dictionary;
    use crate::quadrature::make_grid;
    use crate::weights;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};

    fn flat(p: usize, m: i64) -> SectionSpace<f64> {
        let g = make_grid::<f64>(64, 2 * (p + 8).max(32)).unwrap();
        build_space(p, m, &weights::constant::<f64>(0.0).unwrap(), &g).unwrap()
    }

    #[test]
    fn linear_section_root() {
        let s = flat(1, 0);
        let a = vec![Complex::new(0.3, -1.0), Complex::new(2.0, 0.5)];
        let sec = RandomSection { coeffs: a, p: 1, m: 0, seed: 0, factor: 0, sample: 0 };
        // orthonormal basis of the flat space is √2·1, √2·z
        let mc = s.monomial_coefficients();
        let b0: Complex<f64> = (0..2).map(|i| sec.coeffs[i] * mc[(i, 0)]).sum();
        let b1: Complex<f64> = (0..2).map(|i| sec.coeffs[i] * mc[(i, 1)]).sum();
        let want = -b0 / b1;
        let zs = zeros(&sec, &s).unwrap();
        assert_eq!(zs.total_multiplicity(), 1);
        let z = zs.roots[0].0.z().unwrap();
        assert!((z - want).norm() < 1e-14);
    }

    #[test]
    fn dirac_divisor() {
        let p = 6;
        let mut b = vec![Complex::new(0.0, 0.0); p + 1];
        b[p] = Complex::new(1.0, 0.0);
        let scale = flat_log_scales::<f64>(p);
        let zs = zeros_from_coefficients(&b, &scale).unwrap();
        assert_eq!(zs.roots.len(), 1);
        assert_eq!(zs.roots[0].1, p);
        assert_eq!(zs.roots[0].0.z().unwrap(), Complex::new(0.0, 0.0));
        let dict = harmonic_dictionary(3).unwrap();
        let north = SpherePoint::<f64>::north_pole();
        for (e, v) in dict.elements.iter().zip(empirical_pairings(&zs, &dict, p)) {
            assert!((v - e.value(&north)).abs() < 1e-15);
        }
        // constant polynomial: all zeros at infinity
        let mut c = vec![Complex::new(0.0, 0.0); p + 1];
        c[0] = Complex::new(2.0, 1.0);
        let zs = zeros_from_coefficients(&c, &scale).unwrap();
        assert_eq!(zs.multiplicity_at_infinity(), p);
        assert!(zeros_from_coefficients(&vec![Complex::new(0.0, 0.0); p + 1], &scale).is_err());
    }

    #[test]
    fn vieta_and_backward_error_degree_20() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let q: Vec<Complex<f64>> = (0..=20).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let roots = polynomial_roots(&q).unwrap();
            assert_eq!(roots.len(), 20);
            let zs: Vec<Complex<f64>> = roots.iter().map(|x| x.z().unwrap()).collect();
            let lead = q[20];
            let sum: Complex<f64> = zs.iter().sum();
            let prod: Complex<f64> = zs.iter().product();
            let want_sum = -q[19] / lead;
            let want_prod = q[0] / lead; // (−1)^20
            assert!((sum - want_sum).norm() <= 1e-8 * want_sum.norm().max(1.0));
            assert!((prod - want_prod).norm() <= 1e-8 * want_prod.norm().max(1.0));
            for x in &roots {
                assert!(backward_error(&q, x) <= 1e-8);
            }
        }
    }

    #[test]
    fn high_degree_backward_error() {
        for p in [50usize, 120, 200] {
            let s = flat(p, 0);
            let scale = s.monomial_log_scales();
            for k in 0..3 {
                let sec = sample_section(&s, 99, k);
                let b = unit_monomial_coefficients(&sec, &s);
                let q: Vec<Complex<f64>> = b.iter().zip(&scale).map(|(c, l)| c * l.exp()).collect();
                let zs = zeros(&sec, &s).unwrap();
                assert_eq!(zs.total_multiplicity(), p);
                let worst = zs.roots.iter().map(|(x, _)| backward_error(&q, x)).fold(0.0, f64::max);
                assert!(worst <= 1e-8, "p = {p}: {worst}");
            }
        }
    }

    #[test]
    fn weighted_high_degree_has_no_spurious_infinite_roots() {
        let g = make_grid::<f64>(200, 400).unwrap();
        let w = weights::gauss_bump::<f64>(2.0, 0.7).unwrap();
        let s = build_space(150, 0, &w, &g).unwrap();
        let scale = s.monomial_log_scales();
        let shift = scale.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..5 {
            let sec = sample_section(&s, 3, k);
            let zs = zeros(&sec, &s).unwrap();
            assert_eq!(zs.multiplicity_at_infinity(), 0);
            assert_eq!(zs.roots.len(), 150);
            let b = unit_monomial_coefficients(&sec, &s);
            let q: Vec<Complex<f64>> = b.iter().zip(&scale).map(|(c, l)| c * (l - shift).exp()).collect();
            let worst = zs.roots.iter().map(|(x, _)| backward_error(&q, x)).fold(0.0, f64::max);
            assert!(worst <= 1e-8, "{worst}");
        }
    }

    #[test]
    fn mass_and_scale_invariance() {
        let g = make_grid::<f64>(48, 64).unwrap();
        let w = weights::gauss_bump::<f64>(1.0, 0.6).unwrap();
        let one = TestFunction::harmonic(0, 0);
        for m in [0i64, -2, 3] {
            let s = build_space(15, m, &w, &g).unwrap();
            let sec = sample_section(&s, 4, 0);
            let zs = zeros(&sec, &s).unwrap();
            assert_eq!(zs.total_multiplicity() as i64, 15 + m);
            let mass = empirical_pairing(&zs, &one, 15);
            assert!((mass - (15 + m) as f64 / 15.0).abs() < 1e-14);
            let lam = Complex::new(-3.7, 0.25);
            let scaled = RandomSection { coeffs: sec.coeffs.iter().map(|c| c * lam).collect(), ..sec.clone() };
            let zs2 = zeros(&scaled, &s).unwrap();
            for ((a, _), (b, _)) in zs.roots.iter().zip(&zs2.roots) {
                assert!(a.distance(b) < 1e-10);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_gaussian() {
        let s = flat(9, 0);
        let a = sample_section(&s, 7, 3);
        let b = sample_section(&s, 7, 3);
        assert_eq!(a, b);
        assert_ne!(a.coeffs, sample_section(&s, 7, 4).coeffs);
        let n = 10_000;
        let draws: Vec<RandomSection<f64>> = (0..n).map(|i| sample_section(&s, 1, i)).collect();
        for j in 0..s.dim() {
            let m2: f64 = draws.iter().map(|d| d.coeffs[j].norm_sqr()).sum::<f64>() / n as f64;
            assert!((m2 - 1.0).abs() < 3.0 / (n as f64).sqrt(), "j = {j}: {m2}");
        }
    }

    /// Standard normal CDF from the complementary error function series.
    fn normal_cdf(x: f64) -> f64 {
        // Abramowitz–Stegun 7.1.26 has 1.5e-7 accuracy, enough for binning
        let t = 1.0 / (1.0 + 0.327_591_1 * x.abs() / std::f64::consts::SQRT_2);
        let poly = t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
        let erfc = poly * (-(x * x) / 2.0).exp();
        if x >= 0.0 {
            1.0 - 0.5 * erfc
        } else {
            0.5 * erfc
        }
    }

    #[test]
    fn chi_square_of_real_part() {
        let s = flat(4, 0);
        let n = 10_000;
        // Re a₀ ~ N(0, 1/2): standardise by √2
        let xs: Vec<f64> = (0..n).map(|i| sample_section(&s, 2024, i).coeffs[0].re * std::f64::consts::SQRT_2).collect();
        let edges: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.5).collect();
        let mut counts = vec![0usize; edges.len() + 1];
        for x in &xs {
            counts[edges.partition_point(|e| e <= x)] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = if b == 0 { f64::NEG_INFINITY } else { edges[b - 1] };
            let hi = if b == edges.len() { f64::INFINITY } else { edges[b] };
            let p = normal_cdf(hi) - normal_cdf(lo);
            let e = p * n as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 11 degrees of freedom, 1% critical value 24.725
        assert!(chi2 < 24.725, "chi2 = {chi2}");
    }

    #[test]
    fn tuples() {
        let s = flat(6, 0);
        assert!(sample_tuple(&s, 0, 1, 0).is_err());
        let t1 = sample_tuple(&s, 1, 5, 2).unwrap();
        assert_eq!(t1[0], sample_section(&s, 5, 2));
        // independence of the factors: correlation of |a_0|² across factors
        let n = 4000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = sample_tuple(&s, 2, 8, i).unwrap();
                (t[0].coeffs[0].norm_sqr(), t[1].coeffs[0].norm_sqr())
            })
            .collect();
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n as f64;
        let vx = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n as f64;
        let vy = pairs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / n as f64;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn mp_constant_values() {
        for d in [1u64, 2, 17, 1000, 1_000_000] {
            assert!((mp_constant(d, 1).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((mp_constant(1, 2).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(mp_constant(0, 1).is_err() && mp_constant(1, 0).is_err());
        // exact rational oracle: c^{−dk} = (dk)!/(d!)^k
        for (d, k) in [(3u64, 2u64), (5, 3), (10, 4), (7, 8)] {
            let fact = |n: u64| (1..=n).fold(BigUint::from(1u32), |a, i| a * i);
            let ratio = fact(d * k) / fact(d).pow(k as u32);
            let ln_exact = {
                let s = ratio.to_string();
                let lead: f64 = s[..s.len().min(16)].parse().unwrap();
                lead.ln() + (s.len() as f64 - s.len().min(16) as f64) * std::f64::consts::LN_10
            };
            let want = (-ln_exact / (d * k) as f64).exp();
            assert!((mp_constant(d, k).unwrap() - want).abs() < 1e-12, "({d}, {k})");
        }
    }

    #[test]
    fn mp_constant_bounds_scan() {
        for k in 1..=8u64 {
            let mut prev = f64::INFINITY;
            let mut lo = f64::INFINITY;
            let mut d = 1u64;
            while d <= 1_000_000 {
                let c = mp_constant(d, k).unwrap();
                assert!(c <= 1.0 + 1e-15 && c > 0.0);
                if k > 1 {
                    // the multinomial's dk-th root grows with d
                    assert!(c <= prev + 1e-12, "k = {k}, d = {d}");
                }
                prev = c;
                lo = lo.min(c);
                d = if d < 100 { d + 1 } else { d * 2 };
            }
            // (dk)!/(d!)^k ≤ k^{dk}, so c_{d,k} ≥ 1/k
            assert!(lo >= 1.0 / k as f64 - 1e-12, "k = {k}: {lo}");
        }
    }
}
