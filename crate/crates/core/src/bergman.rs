//! Weighted spaces of holomorphic sections of `O(p) ⊗ O(m)` over P¹, their
//! Bergman kernel functions and Fubini–Study weights.
//!
//! Sections are polynomials of degree `≤ N = p + m`, with pointwise norm
//! `|f(z)|² (1+|z|²)^{−N} e^{−2pφ(z)}`. Internally the basis is the unitarily
//! normalised monomials `e_j = √((N+1) C(N,j)) z^j` (orthonormal when `φ = 0`),
//! the weight is shifted by `φ_ref = min φ` so that the integrand never
//! exceeds one, and the Gram matrix is stored as `G = D Ĝ D` with `Ĝ` of unit
//! diagonal. The orthonormal basis is `s = C e` with `C = L̂⁻¹ D⁻¹`,
//! `Ĝ = L̂ L̂*`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harmonics::{Cap, Dictionary, TestFunction};
use crate::linalg::{cholesky_with_jitter, lower_triangular_inverse, CMatrix};
use crate::quadrature::QuadratureGrid;
use crate::rng;
use crate::scalar::{ln_binomial, Real};
use crate::sphere::{Chart, SpherePoint};
use crate::weights::{Weight, WeightSpec};

/// Jitter attempts allowed in the Cholesky factorisation.
pub const MAX_JITTER: usize = 3;

const CACHE_MAGIC: &[u8; 8] = b"EQZGRAM1";
const CACHE_VERSION: u32 = 1;

/// `|s(x)|²_{h_p}` kept as a logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointNorm<T> {
    pub log_value: T,
}

impl<T: Real> PointNorm<T> {
    pub fn value(&self) -> T {
        self.log_value.exp()
    }
}

/// `H⁰(P¹, O(p+m))` with the inner product induced by `h_FS^{p+m} e^{−2pφ}`
/// and `ω_FS`.
#[derive(Debug, Clone)]
pub struct SectionSpace<T> {
    p: usize,
    m: i64,
    degree: usize,
    weight: Weight<T>,
    grid_hash: String,
    phi_ref: T,
    log_c: Vec<T>,
    log_d: Vec<T>,
    ghat: CMatrix<T>,
    coef: CMatrix<T>,
    lhat_inv: CMatrix<T>,
    ghat_inv: CMatrix<T>,
    jitter: usize,
}

fn check_degree(p: usize, m: i64) -> Result<usize> {
    if p < 1 {
        return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    let n = p as i64 + m;
    if n < 0 {
        return Err(Error::InvalidArgument(format!("p + m = {n} < 0: the section space is empty")));
    }
    Ok(n as usize)
}

/// `ln √((N+1) C(N, j))`.
fn log_norm_consts<T: Real>(n: usize) -> Vec<T> {
    let ln_n1 = T::from_usize_lossy(n + 1).ln();
    (0..=n).map(|j| T::lit(0.5) * (ln_n1 + ln_binomial::<T>(n, j))).collect()
}

/// `e^{iΔk}` for `k < n_theta`, `Δ = 2π/n_theta`.
fn twiddles<T: Real>(n_theta: usize) -> Vec<Complex<T>> {
    (0..n_theta)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n_theta as f64;
            Complex::new(T::lit(a.cos()), T::lit(a.sin()))
        })
        .collect()
}

/// `Σ_k v_k e^{i n θ_k}` for `n = 0..=n_max`, with `θ_k = (k + ½)Δ`.
fn angular_fourier<T: Real>(values: &[T], n_max: usize, tw: &[Complex<T>]) -> Vec<Complex<T>> {
    let nt = values.len();
    (0..=n_max)
        .map(|n| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, &v) in values.iter().enumerate() {
                acc = acc + tw[(n * k) % nt].scale(v);
            }
            let half = std::f64::consts::PI * n as f64 / nt as f64;
            acc * Complex::new(T::lit(half.cos()), T::lit(half.sin()))
        })
        .collect()
}

/// Exponent of `|ζ|` carried by `e_j` in a chart.
#[inline]
fn chart_power(chart: Chart, n: usize, j: usize) -> usize {
    match chart {
        Chart::Z => j,
        Chart::W => n - j,
    }
}

impl<T: Real> SectionSpace<T> {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// Polynomial degree `p + m`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `d_p = p + m + 1`.
    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn weight(&self) -> &Weight<T> {
        &self.weight
    }

    pub fn grid_hash(&self) -> &str {
        &self.grid_hash
    }

    /// Jitter attempts the Cholesky factorisation needed.
    pub fn jitter(&self) -> usize {
        self.jitter
    }

    /// `min φ` over the build grid, factored out of every norm.
    pub fn phi_ref(&self) -> T {
        self.phi_ref
    }

    /// Unit-diagonal Gram matrix `Ĝ` of the normalised monomials.
    pub fn gram(&self) -> &CMatrix<T> {
        &self.ghat
    }

    /// `ln √G_jj` for the normalised monomials under `e^{−2p(φ − φ_ref)}`.
    pub fn log_scales(&self) -> &[T] {
        &self.log_d
    }

    /// Rows: coefficients of the orthonormal sections in the normalised
    /// monomial basis `e_j`, for the shifted weight `φ − φ_ref`.
    pub fn coefficients(&self) -> &CMatrix<T> {
        &self.coef
    }

    /// Rows: coefficients of the orthonormal sections in the basis
    /// `e_j / D_j` of monomials with unit weighted norm (`L̂⁻¹`).
    pub fn unit_coefficients(&self) -> &CMatrix<T> {
        &self.lhat_inv
    }

    /// `ln(√((N+1)C(N,j)) / D_j)`: the factor taking coefficients in the
    /// unit-norm monomial basis to coefficients of `z^j` (up to `e^{pφ_ref}`).
    pub fn monomial_log_scales(&self) -> Vec<T> {
        self.log_c.iter().zip(&self.log_d).map(|(&c, &d)| c - d).collect()
    }

    /// Gram matrix `∫ z^j z̄^k (1+|z|²)^{−N} e^{−2pφ} ω_FS` of the raw
    /// monomials. Only representable for moderate `p`.
    pub fn monomial_gram(&self) -> CMatrix<T> {
        let d = self.dim();
        let two_p = T::from_usize_lossy(2 * self.p);
        let mut g = CMatrix::zeros(d);
        for j in 0..d {
            for k in 0..d {
                let s = self.log_d[j] + self.log_d[k] - self.log_c[j] - self.log_c[k] - two_p * self.phi_ref;
                g[(j, k)] = self.ghat[(j, k)].scale(s.exp());
            }
        }
        g
    }

    /// Rows: coefficients of the orthonormal sections in the raw monomial
    /// basis `1, z, …, z^N` for the true weight `φ`.
    pub fn monomial_coefficients(&self) -> CMatrix<T> {
        let d = self.dim();
        let pf = T::from_usize_lossy(self.p);
        let mut c = CMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] = self.coef[(i, j)].scale((self.log_c[j] + pf * self.phi_ref).exp());
            }
        }
        c
    }

    /// Normalised monomial values `e_j(x)(1+|ζ|²)^{−N/2}` divided by `D_j`,
    /// scaled by `e^{−M}` so the largest modulus is one. Returns the vector
    /// and `M`. Unimodular frame factors common to all entries are dropped.
    fn scaled_monomials(&self, x: &SpherePoint<T>) -> (Vec<Complex<T>>, T) {
        let n = self.degree;
        let c = x.coord();
        let r = c.norm();
        let ln_r = r.ln();
        let arg = c.im.atan2(c.re);
        let base = T::lit(-0.5) * T::from_usize_lossy(n) * c.norm_sqr().ln_1p();
        let logs: Vec<T> = (0..=n)
            .map(|j| {
                let e = chart_power(x.chart(), n, j);
                let lr = if e == 0 { T::zero() } else if r == T::zero() { T::neg_infinity() } else { T::from_usize_lossy(e) * ln_r };
                self.log_c[j] + lr + base - self.log_d[j]
            })
            .collect();
        let big = logs.iter().copied().fold(T::neg_infinity(), T::max);
        let v = (0..=n)
            .map(|j| {
                let e = T::from_usize_lossy(chart_power(x.chart(), n, j));
                Complex::from_polar((logs[j] - big).exp(), e * arg)
            })
            .collect();
        (v, big)
    }

    /// Orthonormal sections at `x`: `s_i(x) = y_i e^{L}` in a unitary frame of
    /// `h_p`, returned as `(y, L)`.
    pub fn section_values(&self, x: &SpherePoint<T>) -> (Vec<Complex<T>>, T) {
        let (u, big) = self.scaled_monomials(x);
        let d = self.dim();
        let y = (0..d)
            .map(|i| {
                let row = self.lhat_inv.row(i);
                let mut s = Complex::new(T::zero(), T::zero());
                for j in 0..=i {
                    s = s + row[j] * u[j];
                }
                s
            })
            .collect();
        let shift = T::from_usize_lossy(self.p) * (self.weight.eval(x) - self.phi_ref);
        (y, big - shift)
    }

    /// `ln B_p(x)`.
    pub fn log_bergman(&self, x: &SpherePoint<T>) -> T {
        let (y, l) = self.section_values(x);
        let s: T = y.iter().map(|v| v.norm_sqr()).sum();
        l + l + s.ln()
    }

    /// `|Σ a_i s_i(x)|²_{h_p}` for coefficients `a` in the orthonormal basis.
    pub fn section_norm(&self, a: &[Complex<T>], x: &SpherePoint<T>) -> PointNorm<T> {
        assert_eq!(a.len(), self.dim());
        let (y, l) = self.section_values(x);
        let mut s = Complex::new(T::zero(), T::zero());
        for (ai, yi) in a.iter().zip(&y) {
            s = s + ai * yi;
        }
        PointNorm {
            log_value: l + l + s.norm_sqr().ln(),
        }
    }

    /// `ln B_p` at every node of `grid`, evaluated ring by ring:
    /// `‖y‖²` on a ring is the trigonometric polynomial
    /// `Σ_{j,k} ã_j ã_k Ĝ⁻¹_jk e^{i(k−j)θ}`.
    pub fn log_bergman_nodes(&self, grid: &QuadratureGrid<T>) -> Vec<T> {
        let n = self.degree;
        let d = n + 1;
        let nt = grid.n_theta();
        let tw = twiddles::<T>(nt);
        let phi = grid.map(|x| self.weight.eval(x));
        let pf = T::from_usize_lossy(self.p);
        let half_nf = T::lit(0.5) * T::from_usize_lossy(n);
        let per_ring: Vec<Vec<T>> = grid
            .rings()
            .par_iter()
            .map(|ring| {
                let r = ring.radius;
                let ln_r = r.ln();
                let base = -half_nf * (r * r).ln_1p();
                let logs: Vec<T> = (0..d)
                    .map(|j| self.log_c[j] + T::from_usize_lossy(chart_power(ring.chart, n, j)) * ln_r + base - self.log_d[j])
                    .collect();
                let big = logs.iter().copied().fold(T::neg_infinity(), T::max);
                let a: Vec<T> = logs.iter().map(|&l| (l - big).exp()).collect();
                // γ_n = Σ_{k − j = n} a_j a_k Ĝ⁻¹_jk
                let mut gamma = vec![Complex::new(T::zero(), T::zero()); d];
                for j in 0..d {
                    for k in j..d {
                        gamma[k - j] = gamma[k - j] + self.ghat_inv[(j, k)].scale(a[j] * a[k]);
                    }
                }
                let sign = match ring.chart {
                    Chart::Z => T::one(),
                    Chart::W => -T::one(),
                };
                (0..nt)
                    .map(|kk| {
                        let idx = ring.start + kk;
                        let mut s = gamma[0].re;
                        let two = T::lit(2.0);
                        for (nn, g) in gamma.iter().enumerate().skip(1) {
                            let ph = (nn * kk) % nt;
                            let half = std::f64::consts::PI * nn as f64 / nt as f64;
                            let e = tw[ph] * Complex::new(T::lit(half.cos()), T::lit(half.sin()));
                            let e = Complex::new(e.re, sign * e.im);
                            s = s + two * (g * e).re;
                        }
                        big + big - (pf + pf) * (phi[idx] - self.phi_ref) + s.ln()
                    })
                    .collect()
            })
            .collect();
        per_ring.concat()
    }

    /// `φ_p = φ + (1/2p) ln B_p` at every node of `grid`.
    pub fn fs_weight_nodes(&self, grid: &QuadratureGrid<T>) -> Vec<T> {
        let lb = self.log_bergman_nodes(grid);
        let inv = T::one() / T::from_usize_lossy(2 * self.p);
        grid.points()
            .par_iter()
            .zip(lb.par_iter())
            .map(|(x, &l)| self.weight.eval(x) + inv * l)
            .collect()
    }

    /// Mass `(p+m)/p` of `(1/p)ω_p`.
    pub fn current_mass(&self) -> T {
        T::from_usize_lossy(self.degree) / T::from_usize_lossy(self.p)
    }
}

/// Build the section space for `(p, m)` and weight `w`, integrating on `grid`.
pub fn build_space<T: Real>(p: usize, m: i64, w: &Weight<T>, grid: &QuadratureGrid<T>) -> Result<SectionSpace<T>> {
    let n = check_degree(p, m)?;
    if grid.n_theta() <= n {
        return Err(Error::InvalidArgument(format!(
            "angular resolution {} cannot resolve degree {n}; use n_theta > p + m",
            grid.n_theta()
        )));
    }
    let phi = grid.map(|x| w.eval(x));
    if let Some(index) = phi.iter().position(|v| !v.is_finite()) {
        let x = grid.points()[index];
        return Err(Error::NonFinite {
            index,
            chart: x.chart().as_str(),
            re: x.coord().re.as_f64(),
            im: x.coord().im.as_f64(),
        });
    }
    let phi_ref = phi.iter().copied().fold(T::infinity(), T::min);
    let two_p = T::from_usize_lossy(2 * p);
    let nt = grid.n_theta();
    let tw = twiddles::<T>(nt);
    let log_c = log_norm_consts::<T>(n);
    let nf = T::from_usize_lossy(n);

    // per ring: angular Fourier coefficients of e^{−2p(φ−φ_ref)}
    let rings = grid.rings();
    let fourier: Vec<Vec<Complex<T>>> = rings
        .par_iter()
        .map(|ring| {
            let vals: Vec<T> = phi[ring.start..ring.start + nt].iter().map(|&f| (-two_p * (f - phi_ref)).exp()).collect();
            angular_fourier(&vals, n, &tw)
        })
        .collect();
    let ring_logs: Vec<(T, T)> = rings
        .iter()
        .map(|ring| (ring.radius.ln(), ring.node_weight.ln() - nf * (ring.radius * ring.radius).ln_1p()))
        .collect();

    let d = n + 1;
    let rows: Vec<Vec<Complex<T>>> = (0..d)
        .into_par_iter()
        .map(|j| {
            (0..=j)
                .map(|k| {
                    let diff = j - k;
                    let lc = log_c[j] + log_c[k];
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (ri, ring) in rings.iter().enumerate() {
                        let power = T::from_usize_lossy(match ring.chart {
                            Chart::Z => j + k,
                            Chart::W => 2 * n - j - k,
                        });
                        let (ln_r, lw) = ring_logs[ri];
                        let f = fourier[ri][diff];
                        let f = match ring.chart {
                            Chart::Z => f,
                            Chart::W => f.conj(),
                        };
                        acc = acc + f.scale((lc + power * ln_r + lw).exp());
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut log_d = Vec::with_capacity(d);
    for (j, row) in rows.iter().enumerate() {
        let gjj = row[j].re;
        if !(gjj > T::zero()) || !gjj.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Gram diagonal entry {j} is {}; quadrature is under-resolved",
                gjj.as_f64()
            )));
        }
        log_d.push(T::lit(0.5) * gjj.ln());
    }
    let mut ghat = CMatrix::zeros(d);
    for j in 0..d {
        for k in 0..=j {
            let v = rows[j][k].scale((-log_d[j] - log_d[k]).exp());
            ghat[(j, k)] = v;
            ghat[(k, j)] = v.conj();
        }
        ghat[(j, j)] = Complex::new(T::one(), T::zero());
    }
    from_parts(p, m, w.clone(), grid.content_hash().to_string(), phi_ref, log_d, ghat)
}

fn from_parts<T: Real>(
    p: usize,
    m: i64,
    weight: Weight<T>,
    grid_hash: String,
    phi_ref: T,
    log_d: Vec<T>,
    ghat: CMatrix<T>,
) -> Result<SectionSpace<T>> {
    let degree = check_degree(p, m)?;
    let d = degree + 1;
    let (l, jitter) = cholesky_with_jitter(&ghat, MAX_JITTER)?;
    let lhat_inv = lower_triangular_inverse(&l);
    let mut coef = CMatrix::zeros(d);
    for i in 0..d {
        for k in 0..=i {
            coef[(i, k)] = lhat_inv[(i, k)].scale((-log_d[k]).exp());
        }
    }
    let ghat_inv = lhat_inv.adjoint().matmul(&lhat_inv);
    Ok(SectionSpace {
        p,
        m,
        degree,
        weight,
        grid_hash,
        phi_ref,
        log_c: log_norm_consts(degree),
        log_d,
        ghat,
        coef,
        lhat_inv,
        ghat_inv,
        jitter,
    })
}

/// `B_p(x) = Σ_j |s_j(x)|²_{h_p}`.
pub fn bergman_function<T: Real>(space: &SectionSpace<T>, x: &SpherePoint<T>) -> T {
    space.log_bergman(x).exp()
}

/// `φ_p(x) = φ(x) + (1/2p) ln B_p(x)`.
pub fn fs_weight<T: Real>(space: &SectionSpace<T>, x: &SpherePoint<T>) -> T {
    space.weight.eval(x) + space.log_bergman(x) / T::from_usize_lossy(2 * space.p)
}

/// `⟨(1/p)ω_p, u⟩ = ((p+m)/p) ∫ u ω_FS + ∫ φ_p dd^c u`.
pub fn fs_current_pairing<T: Real>(space: &SectionSpace<T>, u: &TestFunction, grid: &QuadratureGrid<T>) -> T {
    let phi_p = space.fs_weight_nodes(grid);
    let mass = space.current_mass();
    let vals: Vec<T> = grid
        .points()
        .par_iter()
        .zip(phi_p.par_iter())
        .map(|(x, &f)| mass * u.value(x) + f * u.ddc_density(x))
        .collect();
    grid.integrate_values(&vals)
}

/// [`fs_current_pairing`] for every element of a dictionary.
pub fn fs_current_pairings<T: Real>(space: &SectionSpace<T>, dict: &Dictionary, grid: &QuadratureGrid<T>) -> Vec<T> {
    let phi_p = space.fs_weight_nodes(grid);
    crate::envelope::potential_pairings(&phi_p, space.current_mass(), dict, grid)
}

/// `∫ |ln B_p| ω_FS`, over the sphere or over a cap.
pub fn log_bergman_l1<T: Real>(space: &SectionSpace<T>, grid: &QuadratureGrid<T>, region: Option<&Cap>) -> T {
    let lb = space.log_bergman_nodes(grid);
    let vals: Vec<T> = grid
        .points()
        .iter()
        .zip(&lb)
        .map(|(x, &l)| match region {
            Some(c) if !c.contains(x) => T::zero(),
            _ => l.abs(),
        })
        .collect();
    grid.integrate_values(&vals)
}

/// Coefficients (orthonormal basis, unit norm) of the section maximising
/// `|s(x)|²_{h_p}`: `a_i ∝ conj(s_i(x))`.
pub fn extremal_section<T: Real>(space: &SectionSpace<T>, x: &SpherePoint<T>) -> Vec<Complex<T>> {
    let (y, _) = space.section_values(x);
    let norm = y.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
    y.iter().map(|v| v.conj().unscale(norm)).collect()
}

/// Largest `|s(x)|²_{h_p}` over `n_samples` random unit-norm sections.
/// Streams use tuple factor 255 so they never coincide with section samples.
pub fn extremal_value<T: Real>(space: &SectionSpace<T>, x: &SpherePoint<T>, n_samples: usize, seed: u64) -> Result<T> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("extremal_value needs n_samples >= 1".into()));
    }
    let (y, l) = space.section_values(x);
    let d = space.dim();
    let best = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, space.p, 255, i);
            let a: Vec<Complex<T>> = rng::complex_gaussian_vec(&mut r, d);
            let na: T = a.iter().map(|v| v.norm_sqr()).sum();
            let mut s = Complex::new(T::zero(), T::zero());
            for (ai, yi) in a.iter().zip(&y) {
                s = s + ai * yi;
            }
            s.norm_sqr() / na
        })
        .reduce(|| T::zero(), T::max);
    Ok((l + l + best.ln()).exp())
}

/// Result of a cached build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// An unreadable or mismatching file was replaced.
    Replaced,
}

fn hash32(s: &str) -> [u8; 32] {
    if let Ok(v) = hex::decode(s) {
        if let Ok(a) = <[u8; 32]>::try_from(v.as_slice()) {
            return a;
        }
    }
    Sha256::digest(s.as_bytes()).into()
}

fn spec_is_reproducible(s: &WeightSpec) -> bool {
    match s {
        WeightSpec::Custom { .. } => false,
        WeightSpec::Shifted { base, .. } => spec_is_reproducible(base),
        _ => true,
    }
}

/// Cache file name for a build key.
pub fn cache_file_name(p: usize, m: i64, grid_hash: &str, weight_hash: &str) -> String {
    format!("gram_p{p}_m{m}_{}_{}.bin", &hex::encode(hash32(grid_hash))[..16], &hex::encode(hash32(weight_hash))[..16])
}

fn write_plane<W: Write, T: Real>(out: &mut W, m: &CMatrix<T>) -> std::io::Result<()> {
    for z in m.as_slice() {
        out.write_all(&z.re.as_f64().to_le_bytes())?;
    }
    for z in m.as_slice() {
        out.write_all(&z.im.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Write the Gram data and orthonormal coefficients of a space.
pub fn save_cache<T: Real>(space: &SectionSpace<T>, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(space.p as u64).to_le_bytes());
    buf.extend_from_slice(&space.m.to_le_bytes());
    buf.extend_from_slice(&hash32(&space.grid_hash));
    buf.extend_from_slice(&hash32(space.weight.hash()));
    buf.extend_from_slice(&(space.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&space.phi_ref.as_f64().to_le_bytes());
    for v in &space.log_d {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    write_plane(&mut buf, &space.ghat)?;
    write_plane(&mut buf, &space.coef)?;
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::BadCache("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn matrix<T: Real>(&mut self, d: usize) -> Result<CMatrix<T>> {
        let mut re = Vec::with_capacity(d * d);
        for _ in 0..d * d {
            re.push(self.f64()?);
        }
        let mut data = Vec::with_capacity(d * d);
        for r in re {
            data.push(Complex::new(T::lit(r), T::lit(self.f64()?)));
        }
        CMatrix::from_rows(d, data)
    }
}

/// Load a cached space, verifying that the header matches the request and
/// that the stored coefficients agree with those rebuilt from the Gram data.
pub fn load_cache<T: Real>(path: &Path, p: usize, m: i64, w: &Weight<T>, grid_hash: &str) -> Result<SectionSpace<T>> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(8)? != CACHE_MAGIC {
        return Err(Error::BadCache("bad magic".into()));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::BadCache(format!("unsupported version {version}")));
    }
    let (fp, fm) = (c.u64()?, i64::from_le_bytes(c.take(8)?.try_into().unwrap()));
    if fp != p as u64 || fm != m {
        return Err(Error::BadCache(format!("key mismatch: file has (p, m) = ({fp}, {fm})")));
    }
    if c.take(32)? != hash32(grid_hash) || c.take(32)? != hash32(w.hash()) {
        return Err(Error::BadCache("grid or weight hash mismatch".into()));
    }
    let d = c.u64()? as usize;
    if d != check_degree(p, m)? + 1 {
        return Err(Error::BadCache(format!("dimension {d} does not match (p, m)")));
    }
    let phi_ref = T::lit(c.f64()?);
    let mut log_d = Vec::with_capacity(d);
    for _ in 0..d {
        log_d.push(T::lit(c.f64()?));
    }
    let ghat = c.matrix::<T>(d)?;
    let coef = c.matrix::<T>(d)?;
    if c.pos != data.len() {
        return Err(Error::BadCache("trailing bytes".into()));
    }
    let space = from_parts(p, m, w.clone(), grid_hash.to_string(), phi_ref, log_d, ghat)?;
    if space.coef.as_slice() != coef.as_slice() {
        return Err(Error::BadCache("stored coefficients disagree with the Gram data".into()));
    }
    Ok(space)
}

/// [`build_space`] backed by an on-disk cache in `dir`. Weights without a
/// reproducible description are never cached.
pub fn build_space_cached<T: Real>(
    p: usize,
    m: i64,
    w: &Weight<T>,
    grid: &QuadratureGrid<T>,
    dir: Option<&Path>,
) -> Result<(SectionSpace<T>, CacheStatus)> {
    let dir = match dir {
        Some(d) if spec_is_reproducible(w.spec()) => d,
        _ => return Ok((build_space(p, m, w, grid)?, CacheStatus::Disabled)),
    };
    std::fs::create_dir_all(dir)?;
    let path: PathBuf = dir.join(cache_file_name(p, m, grid.content_hash(), w.hash()));
    let mut status = CacheStatus::Miss;
    if path.exists() {
        match load_cache(&path, p, m, w, grid.content_hash()) {
            Ok(s) => return Ok((s, CacheStatus::Hit)),
            Err(_) => status = CacheStatus::Replaced,
        }
    }
    let space = build_space(p, m, w, grid)?;
    save_cache(&space, &path)?;
    Ok((space, status))
}
