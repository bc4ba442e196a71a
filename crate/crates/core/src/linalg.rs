//! Small dense complex linear algebra: Cholesky, triangular inverse and
//! eigenvalues of upper Hessenberg matrices.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace_re(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self[(i, i)].re)
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

fn try_cholesky<T: Real>(a: &CMatrix<T>) -> Option<CMatrix<T>> {
    let n = a.n;
    let mut l = CMatrix::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d = d - l[(j, k)].norm_sqr();
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex::new(djj, T::zero());
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s.unscale(djj);
        }
    }
    Some(l)
}

/// Cholesky factor `A = L L*` of a Hermitian matrix. On failure the jitter
/// `1e-12 · trace/dim` is added to the diagonal, at most `max_jitter` times.
/// Returns the factor and the number of jitters used.
pub fn cholesky_with_jitter<T: Real>(a: &CMatrix<T>, max_jitter: usize) -> Result<(CMatrix<T>, usize)> {
    if let Some(l) = try_cholesky(a) {
        return Ok((l, 0));
    }
    let jitter = T::lit(1e-12) * a.trace_re() / T::from_usize_lossy(a.n.max(1));
    let mut shifted = a.clone();
    for attempt in 1..=max_jitter {
        for i in 0..a.n {
            shifted[(i, i)].re = shifted[(i, i)].re + jitter;
        }
        if let Some(l) = try_cholesky(&shifted) {
            return Ok((l, attempt));
        }
    }
    Err(Error::CholeskyFailed { attempts: max_jitter })
}

/// Inverse of a nonsingular lower triangular matrix.
pub fn lower_triangular_inverse<T: Real>(l: &CMatrix<T>) -> CMatrix<T> {
    let n = l.n;
    let mut inv = CMatrix::zeros(n);
    for j in 0..n {
        inv[(j, j)] = l[(j, j)].inv();
        for i in j + 1..n {
            let mut s = Complex::new(T::zero(), T::zero());
            for k in j..i {
                s = s + l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

fn l1<T: Real>(z: Complex<T>) -> T {
    z.re.abs() + z.im.abs()
}

/// Diagonal similarity scaling by powers of two that equalises row and
/// column norms. Preserves Hessenberg structure.
pub fn balance<T: Real>(a: &mut CMatrix<T>) {
    let n = a.n;
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c = c + l1(a[(j, i)]);
                    r = r + l1(a[(i, j)]);
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let mut g = r / radix;
            let mut f = T::one();
            let s = c + r;
            while c < g {
                f = f * radix;
                c = c * sqrdx;
            }
            g = r * radix;
            while c > g {
                f = f / radix;
                c = c / sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let gi = T::one() / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)].scale(gi);
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)].scale(f);
                }
            }
        }
    }
}

/// Complex Givens rotation `[c s; −s̄ c]` mapping `(a, b)` to `(r, 0)`.
fn givens<T: Real>(a: Complex<T>, b: Complex<T>) -> (T, Complex<T>) {
    let na = a.norm();
    let nb = b.norm();
    if nb == T::zero() {
        return (T::one(), Complex::new(T::zero(), T::zero()));
    }
    if na == T::zero() {
        return (T::zero(), b.conj().unscale(nb));
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a.unscale(na) * b.conj()).unscale(r);
    (c, s)
}

/// Eigenvalues of an upper Hessenberg matrix by the shifted QR algorithm
/// with Wilkinson shifts. The matrix is overwritten.
pub fn hessenberg_eigenvalues<T: Real>(h: &mut CMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = h.n;
    let eps = T::epsilon();
    let mut eig = vec![Complex::new(T::zero(), T::zero()); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    let max_total = 60 * n.max(4);
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // deflation search
        let mut lo = hi;
        while lo > 0 {
            let sub = l1(h[(lo, lo - 1)]);
            let mut diag = l1(h[(lo - 1, lo - 1)]) + l1(h[(lo, lo)]);
            if diag == T::zero() {
                diag = T::one();
            }
            if sub <= eps * diag {
                h[(lo, lo - 1)] = Complex::new(T::zero(), T::zero());
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            its = 0;
            continue;
        }
        its += 1;
        total += 1;
        if total > max_total {
            return Err(Error::EigenNoConvergence(total));
        }
        let a = h[(hi - 1, hi - 1)];
        let b = h[(hi - 1, hi)];
        let c = h[(hi, hi - 1)];
        let d = h[(hi, hi)];
        let shift = if its % 11 == 10 {
            // exceptional shift
            d + Complex::new(T::lit(0.75) * c.norm(), T::lit(0.4) * c.norm())
        } else {
            let half = T::lit(0.5);
            let m = (a - d).scale(half);
            let disc = (m * m + b * c).sqrt();
            // eigenvalues of the trailing 2×2 block; take the one nearer d
            let e1 = (a + d).scale(half) + disc;
            let e2 = (a + d).scale(half) - disc;
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        for i in lo..=hi {
            h[(i, i)] = h[(i, i)] - shift;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x.scale(cs) + sn * y;
                h[(k + 1, j)] = -(sn.conj() * x) + y.scale(cs);
            }
            h[(k + 1, k)] = Complex::new(T::zero(), T::zero());
            rots.push((cs, sn));
        }
        for (idx, k) in (lo..hi).enumerate() {
            let (cs, sn) = rots[idx];
            let top = (k + 2).min(hi);
            for i in lo..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x.scale(cs) + y * sn.conj();
                h[(i, k + 1)] = -(x * sn) + y.scale(cs);
            }
        }
        for i in lo..=hi {
            h[(i, i)] = h[(i, i)] + shift;
        }
    }
    Ok(eig)
}
