//! Real spherical harmonics as a C²-normalised test-function dictionary.
//!
//! Harmonics are evaluated through the real solid-harmonic recurrences in
//! ambient coordinates. Carrying second-order jets through the recurrence
//! gives the ambient gradient and Hessian of the homogeneous extension, from
//! which the round gradient, covariant Hessian and Laplacian on S² follow:
//!
//! ```text
//! ∇f  = G − (x·G) x
//! ∇²f = P H P − (x·G) P,         P = I − x xᵀ
//! Δf  = tr H − xᵀ H x − 2 x·G
//! ```

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sphere::SpherePoint;

pub const DEFAULT_DEGREE: usize = 8;
pub const MAX_DEGREE: usize = 32;

/// Value, gradient and Hessian of a function on ℝ³ at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub g: [T; 3],
    pub h: [[T; 3]; 3],
}

impl<T: Real> Jet<T> {
    pub fn constant(v: T) -> Self {
        Self {
            v,
            g: [T::zero(); 3],
            h: [[T::zero(); 3]; 3],
        }
    }

    /// The coordinate function `x_k`.
    pub fn coordinate(x: [T; 3], k: usize) -> Self {
        let mut j = Self::constant(x[k]);
        j.g[k] = T::one();
        j
    }

    pub fn scale(self, s: T) -> Self {
        let mut out = self;
        out.v = out.v * s;
        for i in 0..3 {
            out.g[i] = out.g[i] * s;
            for k in 0..3 {
                out.h[i][k] = out.h[i][k] * s;
            }
        }
        out
    }

    /// `f ∘ self` for a scalar function with derivatives `(f, f', f'')`.
    pub fn compose(self, f: T, df: T, d2f: T) -> Self {
        let mut out = Self::constant(f);
        for i in 0..3 {
            out.g[i] = df * self.g[i];
            for k in 0..3 {
                out.h[i][k] = df * self.h[i][k] + d2f * self.g[i] * self.g[k];
            }
        }
        out
    }

    /// Round-sphere derivatives at the unit vector `x`.
    pub fn on_sphere(&self, x: [T; 3]) -> SphereDerivatives<T> {
        let xg = x[0] * self.g[0] + x[1] * self.g[1] + x[2] * self.g[2];
        let grad = [
            self.g[0] - xg * x[0],
            self.g[1] - xg * x[1],
            self.g[2] - xg * x[2],
        ];
        let mut hx = [T::zero(); 3];
        for i in 0..3 {
            hx[i] = self.h[i][0] * x[0] + self.h[i][1] * x[1] + self.h[i][2] * x[2];
        }
        let xhx = x[0] * hx[0] + x[1] * hx[1] + x[2] * hx[2];
        let trace = self.h[0][0] + self.h[1][1] + self.h[2][2];
        let laplacian = trace - xhx - T::lit(2.0) * xg;
        // P H P − (x·G) P
        let mut hess_sq = T::zero();
        for i in 0..3 {
            for k in 0..3 {
                let delta = if i == k { T::one() } else { T::zero() };
                let p_ik = delta - x[i] * x[k];
                let php = self.h[i][k] - x[i] * hx[k] - hx[i] * x[k] + x[i] * x[k] * xhx;
                let e = php - xg * p_ik;
                hess_sq = hess_sq + e * e;
            }
        }
        SphereDerivatives {
            value: self.v,
            grad_norm: (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt(),
            hessian_norm: hess_sq.sqrt(),
            laplacian,
        }
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        out.v = out.v + o.v;
        for i in 0..3 {
            out.g[i] = out.g[i] + o.g[i];
            for k in 0..3 {
                out.h[i][k] = out.h[i][k] + o.h[i][k];
            }
        }
        out
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-T::one())
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for k in 0..3 {
                out.h[i][k] = self.v * o.h[i][k]
                    + o.v * self.h[i][k]
                    + self.g[i] * o.g[k]
                    + o.g[i] * self.g[k];
            }
        }
        out
    }
}

/// Derivatives of a function restricted to the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereDerivatives<T> {
    pub value: T,
    pub grad_norm: T,
    /// Frobenius norm of the covariant Hessian.
    pub hessian_norm: T,
    pub laplacian: T,
}

/// Minimal ring interface shared by plain scalars and jets so the solid
/// harmonic recurrence is written once.
trait RingLike<T>: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn scaled(self, s: T) -> Self;
    fn from_scalar(s: T) -> Self;
}

impl<T: Real> RingLike<T> for T {
    fn scaled(self, s: T) -> Self {
        self * s
    }
    fn from_scalar(s: T) -> Self {
        s
    }
}

impl<T: Real> RingLike<T> for Jet<T> {
    fn scaled(self, s: T) -> Self {
        self.scale(s)
    }
    fn from_scalar(s: T) -> Self {
        Jet::constant(s)
    }
}

#[inline]
fn lm_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (m + l as i64) as usize
}

/// Racah-normalised real solid harmonics `S_{lm}(x, y, z)` for `l ≤ lmax`,
/// ordered by `l² + (m + l)`. On the unit sphere `Y_{lm} = √((2l+1)/4π) S_{lm}`.
fn solid_harmonics<T: Real, R: RingLike<T>>(x: R, y: R, z: R, lmax: usize) -> Vec<R> {
    let n = (lmax + 1) * (lmax + 1);
    let zero = R::from_scalar(T::zero());
    let mut s = vec![zero; n];
    s[0] = R::from_scalar(T::one());
    let r2 = x * x + y * y + z * z;
    for l in 0..lmax {
        let lf = l as f64;
        let fac = if l == 0 { 2.0 } else { 1.0 };
        let c = T::lit((fac * (2.0 * lf + 1.0) / (2.0 * lf + 2.0)).sqrt());
        let sll = s[lm_index(l, l as i64)];
        let slml = s[lm_index(l, -(l as i64))];
        let (top, bottom) = if l == 0 {
            (x.scaled(c), y.scaled(c))
        } else {
            ((x * sll - y * slml).scaled(c), (y * sll + x * slml).scaled(c))
        };
        s[lm_index(l + 1, l as i64 + 1)] = top;
        s[lm_index(l + 1, -(l as i64) - 1)] = bottom;
        for m in -(l as i64)..=(l as i64) {
            let mf = m as f64;
            let a = T::lit(2.0 * lf + 1.0);
            let b = T::lit(((lf + mf) * (lf - mf)).sqrt());
            let d = T::lit(((lf + mf + 1.0) * (lf - mf + 1.0)).sqrt());
            let mut v = (z * s[lm_index(l, m)]).scaled(a);
            if (m.unsigned_abs() as usize) < l {
                v = v - (r2 * s[lm_index(l - 1, m)]).scaled(b);
            }
            s[lm_index(l + 1, m)] = v.scaled(T::one() / d);
        }
    }
    s
}

/// Orthonormal real spherical harmonics `Y_{lm}` at a unit vector.
pub fn real_harmonics<T: Real>(x: [T; 3], lmax: usize) -> Vec<T> {
    let mut s = solid_harmonics::<T, T>(x[0], x[1], x[2], lmax);
    for l in 0..=lmax {
        let c = T::lit(((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt());
        for m in -(l as i64)..=(l as i64) {
            let i = lm_index(l, m);
            s[i] = s[i] * c;
        }
    }
    s
}

/// Jets of the homogeneous extensions of `Y_{lm}` at `x`.
pub fn real_harmonic_jets<T: Real>(x: [T; 3], lmax: usize) -> Vec<Jet<T>> {
    let jx = Jet::coordinate(x, 0);
    let jy = Jet::coordinate(x, 1);
    let jz = Jet::coordinate(x, 2);
    let mut s = solid_harmonics::<T, Jet<T>>(jx, jy, jz, lmax);
    for l in 0..=lmax {
        let c = T::lit(((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt());
        for m in -(l as i64)..=(l as i64) {
            let i = lm_index(l, m);
            s[i] = s[i].scale(c);
        }
    }
    s
}

/// Rigorous bounds on `sup|Y|`, `sup|∇Y|`, `sup|∇²Y|` for an orthonormal
/// degree-`l` harmonic, from the addition theorem and the Bochner identity
/// `Σ_m |∇²Y_{lm}|² = λ(λ−1)(2l+1)/4π`, `λ = l(l+1)`.
pub fn harmonic_derivative_bounds(l: usize) -> [f64; 3] {
    let a0 = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    let lam = (l * (l + 1)) as f64;
    let a2 = if l == 0 { 0.0 } else { a0 * (lam * (lam - 1.0)).sqrt() };
    [a0, a0 * lam.sqrt(), a2]
}

/// A spherical cap `{x : x·c ≥ cos β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    /// Unit vector of the cap centre.
    pub center: [f64; 3],
    /// Angular radius in radians, in `(0, π]`.
    pub radius: f64,
}

impl Cap {
    pub fn new(center: [f64; 3], radius: f64) -> Result<Self> {
        let n = (center[0].powi(2) + center[1].powi(2) + center[2].powi(2)).sqrt();
        if !(n > 0.0) || !(radius > 0.0 && radius <= std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "cap needs a nonzero centre and radius in (0, π], got {radius}"
            )));
        }
        Ok(Self {
            center: [center[0] / n, center[1] / n, center[2] / n],
            radius,
        })
    }

    /// Northern hemisphere (around `z = 0`).
    pub fn north_hemisphere() -> Self {
        Self {
            center: [0.0, 0.0, 1.0],
            radius: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn contains<T: Real>(&self, p: &SpherePoint<T>) -> bool {
        let x = p.unit_vector();
        let d = x[0].as_f64() * self.center[0] + x[1].as_f64() * self.center[1] + x[2].as_f64() * self.center[2];
        d >= self.radius.cos()
    }

    /// C² cutoff supported in the cap: `g(t) = (t(2 − t))³` with
    /// `t = (x·c − cos β)/(1 − cos β)`, zero for `t ≤ 0`.
    pub fn cutoff_jet<T: Real>(&self, x: [T; 3]) -> Jet<T> {
        let cb = T::lit(self.radius.cos());
        let span = T::one() - cb;
        let c = [T::lit(self.center[0]), T::lit(self.center[1]), T::lit(self.center[2])];
        let dot = x[0] * c[0] + x[1] * c[1] + x[2] * c[2];
        let mut lin = Jet::constant((dot - cb) / span);
        for k in 0..3 {
            lin.g[k] = c[k] / span;
        }
        let t = lin.v;
        if t <= T::zero() {
            return Jet::constant(T::zero());
        }
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let v = t * (two - t);
        let dv = two - two * t;
        let g = v * v * v;
        let dg = three * v * v * dv;
        let d2g = T::lit(6.0) * v * dv * dv - T::lit(6.0) * v * v;
        lin.compose(g, dg, d2g)
    }

    /// Bounds on the sup of the cutoff, its round gradient and Hessian.
    pub fn cutoff_bounds(&self) -> [f64; 3] {
        let span = 1.0 - self.radius.cos();
        // sup over t ∈ [0, 1] of |g'|, |g''| for g = (t(2−t))³
        let mut g1: f64 = 0.0;
        let mut g2: f64 = 0.0;
        for i in 0..=20000 {
            let t = i as f64 / 20000.0;
            let v = t * (2.0 - t);
            let dv = 2.0 - 2.0 * t;
            g1 = g1.max((3.0 * v * v * dv).abs());
            g2 = g2.max((6.0 * v * dv * dv - 6.0 * v * v).abs());
        }
        // sampling margin on smooth polynomials
        g1 *= 1.01;
        g2 *= 1.01;
        let b1 = g1 / span;
        let b2 = g2 / (span * span) + std::f64::consts::SQRT_2 * b1;
        [1.0, b1, b2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestKind {
    Harmonic,
    Localized(Cap),
}

/// A dictionary element: a real harmonic `Y_{lm}` (optionally multiplied by a
/// cap cutoff), divided by a certified bound on its C² norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub l: usize,
    pub m: i64,
    pub kind: TestKind,
    /// Certified upper bound on `max(sup|u|, sup|∇u|, sup|∇²u|)` of the
    /// unnormalised function.
    pub c2_bound: f64,
}

impl TestFunction {
    pub fn harmonic(l: usize, m: i64) -> Self {
        let b = harmonic_derivative_bounds(l);
        Self {
            l,
            m,
            kind: TestKind::Harmonic,
            c2_bound: b[0].max(b[1]).max(b[2]),
        }
    }

    pub fn localized(l: usize, m: i64, cap: Cap) -> Self {
        let a = harmonic_derivative_bounds(l);
        let b = cap.cutoff_bounds();
        let c0 = a[0] * b[0];
        let c1 = a[1] * b[0] + a[0] * b[1];
        let c2 = a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2];
        Self {
            l,
            m,
            kind: TestKind::Localized(cap),
            c2_bound: c0.max(c1).max(c2),
        }
    }

    fn index(&self) -> usize {
        lm_index(self.l, self.m)
    }

    /// Normalised value `u(x)`.
    pub fn value<T: Real>(&self, p: &SpherePoint<T>) -> T {
        let x = p.unit_vector();
        let y = real_harmonics(x, self.l)[self.index()];
        let s = T::lit(1.0 / self.c2_bound);
        match self.kind {
            TestKind::Harmonic => y * s,
            TestKind::Localized(cap) => y * cap.cutoff_jet(x).v * s,
        }
    }

    /// Normalised round-sphere derivatives.
    pub fn derivatives<T: Real>(&self, p: &SpherePoint<T>) -> SphereDerivatives<T> {
        let x = p.unit_vector();
        let jet = real_harmonic_jets(x, self.l)[self.index()];
        let jet = match self.kind {
            TestKind::Harmonic => jet,
            TestKind::Localized(cap) => jet * cap.cutoff_jet(x),
        };
        let mut d = jet.scale(T::lit(1.0 / self.c2_bound)).on_sphere(x);
        if let TestKind::Harmonic = self.kind {
            // exact eigenvalue relation
            d.laplacian = -T::lit((self.l * (self.l + 1)) as f64) * d.value;
        }
        d
    }

    /// `Δ_{S²} u`.
    pub fn sphere_laplacian<T: Real>(&self, p: &SpherePoint<T>) -> T {
        match self.kind {
            TestKind::Harmonic => -T::lit((self.l * (self.l + 1)) as f64) * self.value(p),
            TestKind::Localized(_) => self.derivatives(p).laplacian,
        }
    }

    /// Chart Laplacian `Δ_ζ u = 4 (1 + |ζ|²)⁻² Δ_{S²} u`.
    pub fn chart_laplacian<T: Real>(&self, p: &SpherePoint<T>) -> T {
        p.conformal_factor() * self.sphere_laplacian(p)
    }

    /// Density of `dd^c u` with respect to `ω_FS`.
    pub fn ddc_density<T: Real>(&self, p: &SpherePoint<T>) -> T {
        T::lit(2.0) * self.sphere_laplacian(p)
    }
}

/// A finite dictionary of normalised test functions with a stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub degree: usize,
    pub region: Option<Cap>,
    pub elements: Vec<TestFunction>,
}

impl Dictionary {
    pub fn id(&self) -> String {
        match &self.region {
            None => format!("harmonics-L{}", self.degree),
            Some(c) => format!(
                "harmonics-L{}-cap({:.6},{:.6},{:.6};{:.6})",
                self.degree, c.center[0], c.center[1], c.center[2], c.radius
            ),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Normalised values of every element at `p`.
    pub fn values<T: Real>(&self, p: &SpherePoint<T>) -> Vec<T> {
        let x = p.unit_vector();
        let y = real_harmonics(x, self.degree);
        let chi = self.region.map(|c| c.cutoff_jet(x).v).unwrap_or(T::one());
        self.elements
            .iter()
            .map(|e| y[e.index()] * chi * T::lit(1.0 / e.c2_bound))
            .collect()
    }

    /// `dd^c u / ω_FS` of every element at `p`.
    pub fn ddc_densities<T: Real>(&self, p: &SpherePoint<T>) -> Vec<T> {
        let x = p.unit_vector();
        let two = T::lit(2.0);
        match self.region {
            None => {
                let y = real_harmonics(x, self.degree);
                self.elements
                    .iter()
                    .map(|e| {
                        let lam = T::lit((e.l * (e.l + 1)) as f64);
                        -two * lam * y[e.index()] * T::lit(1.0 / e.c2_bound)
                    })
                    .collect()
            }
            Some(cap) => {
                let jets = real_harmonic_jets(x, self.degree);
                let chi = cap.cutoff_jet(x);
                self.elements
                    .iter()
                    .map(|e| {
                        let d = (jets[e.index()] * chi).on_sphere(x);
                        two * d.laplacian * T::lit(1.0 / e.c2_bound)
                    })
                    .collect()
            }
        }
    }
}

/// All real harmonics `Y_{lm}`, `0 ≤ l ≤ L`, each divided by its certified C²
/// bound.
pub fn harmonic_dictionary(degree: usize) -> Result<Dictionary> {
    check_degree(degree)?;
    let mut elements = Vec::with_capacity((degree + 1) * (degree + 1));
    for l in 0..=degree {
        for m in -(l as i64)..=(l as i64) {
            elements.push(TestFunction::harmonic(l, m));
        }
    }
    Ok(Dictionary {
        degree,
        region: None,
        elements,
    })
}

/// Harmonics multiplied by the C² cutoff of `cap` and re-certified.
pub fn localized_dictionary(degree: usize, cap: Cap) -> Result<Dictionary> {
    check_degree(degree)?;
    let mut elements = Vec::with_capacity((degree + 1) * (degree + 1));
    for l in 0..=degree {
        for m in -(l as i64)..=(l as i64) {
            elements.push(TestFunction::localized(l, m, cap));
        }
    }
    Ok(Dictionary {
        degree,
        region: Some(cap),
        elements,
    })
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "dictionary degree must be at most {MAX_DEGREE}, got {degree}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::make_grid;
    use num_complex::Complex;

    #[test]
    fn degree_zero_is_single_constant() {
        let d = harmonic_dictionary(0).unwrap();
        assert_eq!(d.len(), 1);
        let p = SpherePoint::<f64>::from_z(Complex::new(0.3, -2.0));
        let q = SpherePoint::<f64>::north_pole();
        assert!((d.values(&p)[0] - d.values(&q)[0]).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_degree() {
        assert!(harmonic_dictionary(33).is_err());
        assert!(harmonic_dictionary(32).is_ok());
    }

    #[test]
    fn degree_two_has_nine_elements() {
        assert_eq!(harmonic_dictionary(2).unwrap().len(), 9);
        assert_eq!(harmonic_dictionary(8).unwrap().len(), 81);
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let g = make_grid::<f64>(40, 40).unwrap();
        let lmax = 4;
        let vals: Vec<Vec<f64>> = g.points().iter().map(|p| real_harmonics(p.unit_vector(), lmax)).collect();
        let n = (lmax + 1) * (lmax + 1);
        for a in 0..n {
            for b in 0..n {
                let col: Vec<f64> = vals.iter().map(|v| v[a] * v[b] * 4.0 * std::f64::consts::PI).collect();
                let s = g.integrate_values(&col);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-10, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn jet_laplacian_matches_eigenvalue() {
        let p = SpherePoint::<f64>::from_z(Complex::new(0.4, 0.7));
        let x = p.unit_vector();
        let jets = real_harmonic_jets(x, 6);
        for l in 0..=6usize {
            for m in -(l as i64)..=(l as i64) {
                let d = jets[lm_index(l, m)].on_sphere(x);
                let expect = -((l * (l + 1)) as f64) * d.value;
                assert!((d.laplacian - expect).abs() < 1e-11, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn charts_agree_on_overlap() {
        let d = harmonic_dictionary(5).unwrap();
        for k in 0..16 {
            let z = Complex::from_polar(1.0f64, k as f64 * 0.39);
            let a = SpherePoint::from_chart(crate::sphere::Chart::Z, z);
            let b = SpherePoint::from_chart(crate::sphere::Chart::W, z.inv());
            for (e, f) in d.values(&a).iter().zip(d.values(&b)) {
                assert!((e - f).abs() < 1e-9);
            }
            for e in &d.elements {
                assert!((e.chart_laplacian(&a) - e.chart_laplacian(&b)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chart_laplacian_matches_finite_differences() {
        let d = harmonic_dictionary(4).unwrap();
        let z0 = Complex::new(0.35f64, -0.2);
        for e in &d.elements {
            let f = |dz: Complex<f64>| e.value(&SpherePoint::from_chart(crate::sphere::Chart::Z, z0 + dz));
            let mut errs = Vec::new();
            for &h in &[1e-2, 5e-3] {
                let fd = (f(Complex::new(h, 0.0)) + f(Complex::new(-h, 0.0)) + f(Complex::new(0.0, h))
                    + f(Complex::new(0.0, -h))
                    - 4.0 * f(Complex::new(0.0, 0.0)))
                    / (h * h);
                let exact = e.chart_laplacian(&SpherePoint::from_chart(crate::sphere::Chart::Z, z0));
                errs.push((fd - exact).abs());
            }
            // O(h²): halving h quarters the error (allow slack), or both tiny
            assert!(errs[1] <= 0.3 * errs[0] + 1e-7, "{:?} for l={} m={}", errs, e.l, e.m);
        }
    }

    #[test]
    fn localized_elements_vanish_outside_cap() {
        let cap = Cap::north_hemisphere();
        let d = localized_dictionary(3, cap).unwrap();
        let outside = SpherePoint::<f64>::from_z(Complex::new(1.5, 0.0));
        assert!(d.values(&outside).iter().all(|&v| v == 0.0));
        assert!(d.ddc_densities(&outside).iter().all(|&v| v == 0.0));
        let inside = SpherePoint::<f64>::from_z(Complex::new(0.2, 0.1));
        assert!(d.values(&inside).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn localized_laplacian_matches_product_rule_numerically() {
        let cap = Cap::new([0.3, 0.1, 1.0], 1.2).unwrap();
        let e = TestFunction::localized(3, -2, cap);
        let z0 = Complex::new(0.1f64, 0.15);
        let f = |dz: Complex<f64>| e.value(&SpherePoint::from_chart(crate::sphere::Chart::Z, z0 + dz));
        let h = 1e-3;
        let fd = (f(Complex::new(h, 0.0)) + f(Complex::new(-h, 0.0)) + f(Complex::new(0.0, h))
            + f(Complex::new(0.0, -h))
            - 4.0 * f(Complex::new(0.0, 0.0)))
            / (h * h);
        let exact = e.chart_laplacian(&SpherePoint::from_chart(crate::sphere::Chart::Z, z0));
        assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
    }
}
