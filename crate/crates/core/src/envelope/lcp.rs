//! Discrete obstacle problem on a latitude-longitude lattice.
//!
//! Unknowns live at the two poles and at `n_lon` nodes on each interior ring
//! `θ_i = iπ/(n_lat − 1)`. The Laplace–Beltrami operator is the
//! finite-volume five-point stencil with symmetric fluxes, so `−K` is a
//! symmetric M-matrix and `Δψ = Kψ / area`.
//!
//! The LCP `ψ ≤ φ, Δψ + 1/2 ≥ 0, (φ − ψ)(Δψ + 1/2) = 0` is solved by
//! projected SOR on a coarse-to-fine sequence of lattices; on each level the
//! iterate is then polished by a primal-dual active set method whose linear
//! solves use conjugate gradients preconditioned by exact ring solves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Data, EnvelopeResult, Method, Residuals};
use crate::error::{Error, Result};
use crate::scalar::{par_dot, Real};
use crate::sphere::SpherePoint;
use crate::weights::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatLongGrid {
    pub n_lat: usize,
    pub n_lon: usize,
}

impl Default for LatLongGrid {
    fn default() -> Self {
        Self { n_lat: 361, n_lon: 720 }
    }
}

impl LatLongGrid {
    pub fn new(n_lat: usize, n_lon: usize) -> Result<Self> {
        let g = Self { n_lat, n_lon };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.n_lat < 5 || self.n_lon < 8 || self.n_lon % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "lat-long grid needs n_lat >= 5 and even n_lon >= 8, got {} x {}",
                self.n_lat, self.n_lon
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        2 + (self.n_lat - 2) * self.n_lon
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Colatitude spacing.
    pub fn h(&self) -> f64 {
        std::f64::consts::PI / (self.n_lat - 1) as f64
    }

    /// Longitude spacing.
    pub fn k(&self) -> f64 {
        std::f64::consts::TAU / self.n_lon as f64
    }

    fn south(&self) -> usize {
        self.len() - 1
    }

    /// Flat index of ring `i` (1 ≤ i ≤ n_lat − 2), longitude `j`.
    fn ring_index(&self, i: usize, j: usize) -> usize {
        1 + (i - 1) * self.n_lon + j
    }

    /// `(θ, λ)` of a node.
    pub fn node_angles(&self, idx: usize) -> (f64, f64) {
        if idx == 0 {
            (0.0, 0.0)
        } else if idx == self.south() {
            (std::f64::consts::PI, 0.0)
        } else {
            let r = idx - 1;
            let i = r / self.n_lon + 1;
            let j = r % self.n_lon;
            (i as f64 * self.h(), j as f64 * self.k())
        }
    }

    pub fn point<T: Real>(&self, idx: usize) -> SpherePoint<T> {
        let (th, lon) = self.node_angles(idx);
        if idx == 0 {
            SpherePoint::north_pole()
        } else if idx == self.south() {
            SpherePoint::south_pole()
        } else {
            SpherePoint::from_colat_lon(T::lit(th), T::lit(lon))
        }
    }

    fn ring_value<T: Real>(&self, values: &[T], i: usize, lon: f64) -> T {
        if i == 0 {
            return values[0];
        }
        if i == self.n_lat - 1 {
            return values[self.south()];
        }
        let x = lon / self.k();
        let j0 = (x.floor() as i64).rem_euclid(self.n_lon as i64) as usize;
        let s = T::lit(x - x.floor());
        let j1 = (j0 + 1) % self.n_lon;
        let a = values[self.ring_index(i, j0)];
        let b = values[self.ring_index(i, j1)];
        a + (b - a) * s
    }

    /// Bilinear interpolation in `(θ, λ)` of node values.
    pub fn interpolate<T: Real>(&self, values: &[T], p: &SpherePoint<T>) -> T {
        let u = p.unit_vector();
        let (x, y, z) = (u[0].as_f64(), u[1].as_f64(), u[2].as_f64());
        let theta = x.hypot(y).atan2(z);
        let lon = y.atan2(x).rem_euclid(std::f64::consts::TAU);
        let fi = theta / self.h();
        let i0 = (fi.floor() as usize).min(self.n_lat - 2);
        let s = T::lit((fi - i0 as f64).clamp(0.0, 1.0));
        let a = self.ring_value(values, i0, lon);
        let b = self.ring_value(values, i0 + 1, lon);
        a + (b - a) * s
    }

    /// Sample a weight at every node.
    pub fn sample<T: Real>(&self, w: &Weight<T>) -> Vec<T> {
        (0..self.len()).into_par_iter().map(|idx| w.eval(&self.point(idx))).collect()
    }

    /// The next coarser lattice, if the spacing can be doubled.
    fn coarser(&self) -> Option<Self> {
        let m = self.n_lat - 1;
        if m % 2 == 0 && self.n_lon % 4 == 0 && m / 2 >= 44 {
            Some(Self {
                n_lat: m / 2 + 1,
                n_lon: self.n_lon / 2,
            })
        } else {
            None
        }
    }
}

/// Finite-volume coefficients. Per interior ring: cell area, flux to the
/// northern and southern neighbours, and azimuthal flux.
#[derive(Debug, Clone)]
pub(crate) struct Stencil<T> {
    grid: LatLongGrid,
    area: Vec<T>,
    north: Vec<T>,
    south: Vec<T>,
    east: Vec<T>,
    pole_area: T,
    pole_link: T,
}

impl<T: Real> Stencil<T> {
    pub(crate) fn new(grid: LatLongGrid) -> Self {
        let h = grid.h();
        let k = grid.k();
        let rings = grid.n_lat - 2;
        let mut area = Vec::with_capacity(rings);
        let mut north = Vec::with_capacity(rings);
        let mut south = Vec::with_capacity(rings);
        let mut east = Vec::with_capacity(rings);
        for i in 1..grid.n_lat - 1 {
            let th = i as f64 * h;
            area.push(T::lit(k * ((th - 0.5 * h).cos() - (th + 0.5 * h).cos())));
            north.push(T::lit((th - 0.5 * h).sin() * k / h));
            south.push(T::lit((th + 0.5 * h).sin() * k / h));
            east.push(T::lit(h / (th.sin() * k)));
        }
        Self {
            grid,
            area,
            north,
            south,
            east,
            pole_area: T::lit(std::f64::consts::TAU * (1.0 - (0.5 * h).cos())),
            pole_link: T::lit((0.5 * h).sin() * k / h),
        }
    }

    fn node_area(&self, idx: usize) -> T {
        if idx == 0 || idx == self.grid.south() {
            self.pole_area
        } else {
            self.area[(idx - 1) / self.grid.n_lon]
        }
    }

    pub(crate) fn areas(&self) -> Vec<T> {
        (0..self.grid.len()).map(|i| self.node_area(i)).collect()
    }

    fn diag(&self, idx: usize) -> T {
        if idx == 0 || idx == self.grid.south() {
            self.pole_link * T::from_usize_lossy(self.grid.n_lon)
        } else {
            let r = (idx - 1) / self.grid.n_lon;
            self.north[r] + self.south[r] + self.east[r] + self.east[r]
        }
    }

    /// `(Kx)_i = Σ_n c_in (x_n − x_i)`.
    pub(crate) fn apply(&self, x: &[T]) -> Vec<T> {
        let g = self.grid;
        let n_lon = g.n_lon;
        let last = g.south();
        let mut y = vec![T::zero(); g.len()];
        {
            let (head, rest) = y.split_at_mut(1);
            let (body, tail) = rest.split_at_mut((g.n_lat - 2) * n_lon);
            body.par_chunks_mut(n_lon).enumerate().for_each(|(r, out)| {
                let i = r + 1;
                for (j, o) in out.iter_mut().enumerate() {
                    let c = g.ring_index(i, j);
                    let xc = x[c];
                    let up = if i == 1 { x[0] } else { x[g.ring_index(i - 1, j)] };
                    let down = if i == g.n_lat - 2 { x[last] } else { x[g.ring_index(i + 1, j)] };
                    let e = x[g.ring_index(i, (j + 1) % n_lon)];
                    let w = x[g.ring_index(i, (j + n_lon - 1) % n_lon)];
                    *o = self.north[r] * (up - xc) + self.south[r] * (down - xc) + self.east[r] * (e + w - xc - xc);
                }
            });
            let mut s0 = T::zero();
            let mut s1 = T::zero();
            for j in 0..n_lon {
                s0 = s0 + (x[g.ring_index(1, j)] - x[0]);
                s1 = s1 + (x[g.ring_index(g.n_lat - 2, j)] - x[last]);
            }
            head[0] = self.pole_link * s0;
            tail[0] = self.pole_link * s1;
        }
        y
    }

    /// Discrete Laplace–Beltrami `Kx / area`.
    pub(crate) fn laplacian(&self, x: &[T]) -> Vec<T> {
        let mut y = self.apply(x);
        for (i, v) in y.iter_mut().enumerate() {
            *v = *v / self.node_area(i);
        }
        y
    }
}

/// Solver settings. `tol` bounds the sup-change of a projected SOR sweep
/// and, in Laplacian units, the residual of the polishing solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    /// Run the active-set polish on every level.
    pub polish: bool,
    /// Projected SOR sweeps on the finer levels before polishing.
    pub smoothing_sweeps: usize,
    pub max_active_set_iterations: usize,
}

impl Default for LcpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            omega: 1.8,
            polish: true,
            smoothing_sweeps: 10,
            max_active_set_iterations: 200,
        }
    }
}

/// One red-black projected SOR sweep; returns the sup-norm of the change.
fn psor_sweep<T: Real>(st: &Stencil<T>, phi: &[T], psi: &mut [T], omega: T) -> T {
    let g = st.grid;
    let n_lon = g.n_lon;
    let last = g.south();
    let half = T::lit(0.5);
    let one = T::one();
    let mut change = T::zero();
    for color in 0..2 {
        let snapshot: &[T] = psi;
        let updates: Vec<(usize, T)> = (1..g.n_lat - 1)
            .into_par_iter()
            .flat_map_iter(|i| {
                let r = i - 1;
                let d = st.north[r] + st.south[r] + st.east[r] + st.east[r];
                (0..n_lon).filter(move |j| (i + j) % 2 == color).map(move |j| {
                    let c = g.ring_index(i, j);
                    let up = if i == 1 { snapshot[0] } else { snapshot[g.ring_index(i - 1, j)] };
                    let down = if i == g.n_lat - 2 { snapshot[last] } else { snapshot[g.ring_index(i + 1, j)] };
                    let e = snapshot[g.ring_index(i, (j + 1) % n_lon)];
                    let w = snapshot[g.ring_index(i, (j + n_lon - 1) % n_lon)];
                    let gs = (st.north[r] * up + st.south[r] * down + st.east[r] * (e + w) + half * st.area[r]) / d;
                    let v = ((one - omega) * snapshot[c] + omega * gs).min(phi[c]);
                    (c, v)
                })
            })
            .collect();
        for (c, v) in updates {
            change = change.max((v - psi[c]).abs());
            psi[c] = v;
        }
    }
    for (pole, ring) in [(0usize, 1usize), (last, g.n_lat - 2)] {
        let mut s = T::zero();
        for j in 0..n_lon {
            s = s + psi[g.ring_index(ring, j)];
        }
        let d = st.pole_link * T::from_usize_lossy(n_lon);
        let gs = (st.pole_link * s + half * st.pole_area) / d;
        let v = ((one - omega) * psi[pole] + omega * gs).min(phi[pole]);
        change = change.max((v - psi[pole]).abs());
        psi[pole] = v;
    }
    change
}

/// Solve a tridiagonal system with constant diagonal `d` and off-diagonals
/// `−e`, cyclic when `cyclic`.
fn ring_solve<T: Real>(d: T, e: T, rhs: &[T], cyclic: bool) -> Vec<T> {
    let m = rhs.len();
    if m == 1 {
        return vec![rhs[0] / d];
    }
    let thomas = |diag0: T, diag_last: T, b: &[T]| -> Vec<T> {
        let mut cp = vec![T::zero(); m];
        let mut dp = vec![T::zero(); m];
        let mut x = vec![T::zero(); m];
        let di = |i: usize| if i == 0 { diag0 } else if i == m - 1 { diag_last } else { d };
        cp[0] = -e / di(0);
        dp[0] = b[0] / di(0);
        for i in 1..m {
            let den = di(i) + e * cp[i - 1];
            cp[i] = -e / den;
            dp[i] = (b[i] + e * dp[i - 1]) / den;
        }
        x[m - 1] = dp[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    if cyclic && m == 2 {
        // both couplings join the same pair
        let det = d * d - T::lit(4.0) * e * e;
        let two_e = T::lit(2.0) * e;
        return vec![(d * rhs[0] + two_e * rhs[1]) / det, (d * rhs[1] + two_e * rhs[0]) / det];
    }
    if !cyclic {
        return thomas(d, d, rhs);
    }
    // Sherman–Morrison for the corner couplings.
    let gamma = -d;
    let diag0 = d - gamma;
    let diag_last = d - e * e / gamma;
    let y = thomas(diag0, diag_last, rhs);
    let mut u = vec![T::zero(); m];
    u[0] = gamma;
    u[m - 1] = -e;
    let q = thomas(diag0, diag_last, &u);
    let v_last = -e / gamma;
    let fact = (y[0] + v_last * y[m - 1]) / (T::one() + q[0] + v_last * q[m - 1]);
    y.iter().zip(&q).map(|(&a, &b)| a - fact * b).collect()
}

/// Ring-block preconditioner restricted to inactive nodes.
fn precondition<T: Real>(st: &Stencil<T>, active: &[bool], r: &[T]) -> Vec<T> {
    let g = st.grid;
    let n_lon = g.n_lon;
    let last = g.south();
    let mut z = vec![T::zero(); g.len()];
    {
        let (head, rest) = z.split_at_mut(1);
        let (body, tail) = rest.split_at_mut((g.n_lat - 2) * n_lon);
        body.par_chunks_mut(n_lon).enumerate().for_each(|(ri, out)| {
            let i = ri + 1;
            let base = g.ring_index(i, 0);
            let d = st.north[ri] + st.south[ri] + st.east[ri] + st.east[ri];
            let e = st.east[ri];
            let act = &active[base..base + n_lon];
            let rr = &r[base..base + n_lon];
            match act.iter().position(|&a| a) {
                None => {
                    let x = ring_solve(d, e, rr, true);
                    out.copy_from_slice(&x);
                }
                Some(start) => {
                    // walk the cycle starting after an active node, solving each
                    // maximal inactive run
                    let mut run: Vec<usize> = Vec::new();
                    for step in 1..=n_lon {
                        let j = (start + step) % n_lon;
                        if act[j] {
                            if !run.is_empty() {
                                let b: Vec<T> = run.iter().map(|&jj| rr[jj]).collect();
                                let x = ring_solve(d, e, &b, false);
                                for (&jj, &v) in run.iter().zip(&x) {
                                    out[jj] = v;
                                }
                                run.clear();
                            }
                        } else {
                            run.push(j);
                        }
                    }
                }
            }
        });
        if !active[0] {
            head[0] = r[0] / st.diag(0);
        }
        if !active[last] {
            tail[0] = r[last] / st.diag(last);
        }
    }
    z
}

/// Conjugate gradients for `−K_II e = rhs_I`; returns the correction and the
/// iteration count.
fn cg_inactive<T: Real>(st: &Stencil<T>, active: &[bool], rhs: &[T], areas: &[T], tol: T, max_iter: usize) -> (Vec<T>, usize) {
    let n = rhs.len();
    let mask = |v: &mut Vec<T>| {
        for (x, &a) in v.iter_mut().zip(active) {
            if a {
                *x = T::zero();
            }
        }
    };
    let scaled_max = |v: &[T]| v.iter().zip(areas).fold(T::zero(), |m, (&x, &a)| m.max((x / a).abs()));
    let mut x = vec![T::zero(); n];
    let mut r = rhs.to_vec();
    mask(&mut r);
    if scaled_max(&r) <= tol {
        return (x, 0);
    }
    let mut z = precondition(st, active, &r);
    let mut p = z.clone();
    let mut rz = par_dot(&r, &z);
    for it in 1..=max_iter {
        // q = −K_II p
        let mut q = st.apply(&p);
        for v in q.iter_mut() {
            *v = -*v;
        }
        mask(&mut q);
        let pq = par_dot(&p, &q);
        if !(pq > T::zero()) {
            return (x, it);
        }
        let alpha = rz / pq;
        x.par_iter_mut().zip(&p).for_each(|(xi, &pi)| *xi = *xi + alpha * pi);
        r.par_iter_mut().zip(&q).for_each(|(ri, &qi)| *ri = *ri - alpha * qi);
        if scaled_max(&r) <= tol {
            return (x, it);
        }
        z = precondition(st, active, &r);
        let rz_new = par_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, &zi)| *pi = zi + beta * *pi);
    }
    (x, max_iter)
}

/// Primal-dual active set iteration from the current iterate. Returns the
/// iteration count and whether the active set settled or the iterate
/// stopped moving.
/// `initial`, when given, replaces the first active-set estimate; it should
/// err on the small side, since nodes above the obstacle are all added in a
/// single step while superfluous active nodes are released one layer at a
/// time.
fn active_set_polish<T: Real>(st: &Stencil<T>, phi: &[T], psi: &mut [T], opts: &LcpOptions, initial: Option<Vec<bool>>) -> (usize, bool) {
    let n = phi.len();
    let areas = st.areas();
    let half = T::lit(0.5);
    let tol = T::lit(opts.tol);
    let cg_tol = tol * T::lit(0.01);
    let mut prev: Option<Vec<bool>> = None;
    let mut initial = initial;
    for it in 1..=opts.max_active_set_iterations {
        let mut active: Vec<bool> = match initial.take() {
            Some(a) => a,
            None => {
                let k = st.apply(psi);
                (0..n).map(|i| k[i] / areas[i] + half - (phi[i] - psi[i]) > T::zero()).collect()
            }
        };
        if !active.iter().any(|&a| a) {
            // the unconstrained problem has no solution: pin the closest node
            let mut best = 0;
            for i in 1..n {
                if phi[i] - psi[i] < phi[best] - psi[best] {
                    best = i;
                }
            }
            active[best] = true;
        }
        let settled = prev.as_ref() == Some(&active);
        let before = psi.to_vec();
        for i in 0..n {
            if active[i] {
                psi[i] = phi[i];
            }
        }
        let k = st.apply(psi);
        let rhs: Vec<T> = (0..n).map(|i| k[i] + half * areas[i]).collect();
        let (corr, _) = cg_inactive(st, &active, &rhs, &areas, cg_tol, 50_000);
        for i in 0..n {
            if !active[i] {
                psi[i] = psi[i] + corr[i];
            }
        }
        // Where the obstacle is itself feasible, nodes with zero gap and zero
        // multiplier flip with rounding; a stationary iterate is converged.
        let change = psi.iter().zip(&before).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        if settled || change <= tol {
            return (it, true);
        }
        prev = Some(active);
    }
    (opts.max_active_set_iterations, false)
}

fn residuals<T: Real>(st: &Stencil<T>, phi: &[T], psi: &[T]) -> (Residuals, Vec<T>) {
    let lap = st.laplacian(psi);
    let mut r = Residuals {
        obstacle: 0.0,
        feasibility: 0.0,
        complementarity: 0.0,
    };
    for i in 0..phi.len() {
        let gap = (phi[i] - psi[i]).as_f64();
        let l = lap[i].as_f64() + 0.5;
        r.obstacle = r.obstacle.max(-gap);
        r.feasibility = r.feasibility.max(-l);
        r.complementarity = r.complementarity.max(gap.min(l).abs());
    }
    (r, lap)
}

/// Equilibrium weight of an arbitrary continuous weight on a lat-long
/// lattice.
pub fn lcp_envelope<T: Real>(w: &Weight<T>, grid: &LatLongGrid, opts: &LcpOptions) -> Result<EnvelopeResult<T>> {
    grid.validate()?;
    if !(opts.tol > 0.0) || !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(Error::InvalidArgument(format!("LCP needs tol > 0 and omega in (0, 2), got {opts:?}")));
    }
    let mut levels = vec![*grid];
    while let Some(c) = levels.last().unwrap().coarser() {
        levels.push(c);
    }
    levels.reverse();

    let omega = T::lit(opts.omega);
    let tol = T::lit(opts.tol);
    let mut iterations = 0usize;
    let mut converged = false;
    // previous level: lattice, solution, contact indicator
    let mut prev: Option<(LatLongGrid, Vec<T>, Vec<T>)> = None;
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    let mut st = Stencil::new(levels[0]);
    for (lvl, g) in levels.iter().enumerate() {
        st = Stencil::new(*g);
        phi = g.sample(w);
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight is not finite at lattice node {i}")));
        }
        psi = match &prev {
            None => {
                let m = phi.iter().copied().fold(T::infinity(), T::min);
                vec![m; phi.len()]
            }
            Some((cg, cv, _)) => (0..g.len())
                .into_par_iter()
                .map(|i| cg.interpolate(cv, &g.point(i)).min(phi[i]))
                .collect(),
        };
        // nodes surrounded by coarse contact nodes start out active
        let initial = prev.as_ref().map(|(cg, _, contact)| {
            (0..g.len())
                .into_par_iter()
                .map(|i| cg.interpolate(contact, &g.point(i)) >= T::one())
                .collect::<Vec<bool>>()
        });
        let finest = lvl + 1 == levels.len();
        let sweeps = if lvl == 0 || !opts.polish { opts.max_iter.saturating_sub(iterations) } else { opts.smoothing_sweeps };
        converged = false;
        for _ in 0..sweeps {
            let change = psor_sweep(&st, &phi, &mut psi, omega);
            iterations += 1;
            if change <= tol {
                converged = true;
                break;
            }
        }
        if opts.polish {
            let (its, ok) = active_set_polish(&st, &phi, &mut psi, opts, initial);
            iterations += its;
            converged = ok;
        }
        if !finest {
            let contact = psi.iter().zip(&phi).map(|(a, b)| if *a >= *b { T::one() } else { T::zero() }).collect();
            prev = Some((*g, psi.clone(), contact));
        }
    }
    let (res, lap) = residuals(&st, &phi, &psi);
    Ok(EnvelopeResult {
        method: Method::Lcp,
        iterations,
        converged,
        residuals: res,
        data: Data::LatLong {
            grid: *grid,
            obstacle: phi,
            values: psi,
            laplacian: lap,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{radial_envelope, RadialGrid};
    use crate::weights;

    #[test]
    fn stencil_is_symmetric_and_conservative() {
        let g = LatLongGrid::new(19, 36).unwrap();
        let st = Stencil::<f64>::new(g);
        let areas = st.areas();
        assert!((areas.iter().sum::<f64>() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        // constants are in the kernel; the operator is symmetric
        let ones = vec![1.0; g.len()];
        assert!(st.apply(&ones).iter().all(|v| v.abs() < 1e-12));
        let a: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| ((i * 104729) % 97) as f64 / 97.0).collect();
        let ka = st.apply(&a);
        let kb = st.apply(&b);
        let l: f64 = ka.iter().zip(&b).map(|(x, y)| x * y).sum();
        let r: f64 = kb.iter().zip(&a).map(|(x, y)| x * y).sum();
        assert!((l - r).abs() < 1e-10);
    }

    #[test]
    fn laplacian_of_first_harmonic() {
        // Δ cos θ = −2 cos θ, second order in h away from the poles
        let mut errs = Vec::new();
        for n in [37usize, 73] {
            let g = LatLongGrid::new(n, 2 * (n - 1)).unwrap();
            let st = Stencil::<f64>::new(g);
            let u: Vec<f64> = (0..g.len()).map(|i| g.node_angles(i).0.cos()).collect();
            let lap = st.laplacian(&u);
            let e = (0..g.len()).map(|i| (lap[i] + 2.0 * u[i]).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        assert!(errs[1] < 1e-2);
    }

    #[test]
    fn ring_solver_matches_dense() {
        for &(m, cyclic) in &[(1usize, false), (2, true), (2, false), (7, false), (9, true)] {
            let (d, e) = (4.5, 1.25);
            let rhs: Vec<f64> = (0..m).map(|i| (i as f64 + 1.0).sin()).collect();
            let x = ring_solve(d, e, &rhs, cyclic);
            for i in 0..m {
                let mut s = d * x[i];
                if i > 0 {
                    s -= e * x[i - 1];
                }
                if i + 1 < m {
                    s -= e * x[i + 1];
                }
                if cyclic && m > 1 && i == 0 {
                    s -= e * x[m - 1];
                }
                if cyclic && m > 1 && i == m - 1 {
                    s -= e * x[0];
                }
                assert!((s - rhs[i]).abs() < 1e-12, "m={m} cyclic={cyclic}");
            }
        }
    }

    #[test]
    fn zero_obstacle_is_fixed() {
        let w = weights::constant::<f64>(0.0).unwrap();
        let env = lcp_envelope(&w, &LatLongGrid::new(31, 60).unwrap(), &LcpOptions::default()).unwrap();
        assert!(env.converged);
        assert!(env.node_values().iter().all(|v| v.abs() < 1e-12));
        assert!(env.residuals.max() < 1e-10);
    }

    #[test]
    fn plain_psor_converges_on_a_coarse_lattice() {
        let w = weights::gauss_bump::<f64>(2.0, 0.7).unwrap();
        let g = LatLongGrid::new(25, 48).unwrap();
        let opts = LcpOptions {
            polish: false,
            tol: 1e-11,
            ..LcpOptions::default()
        };
        let a = lcp_envelope(&w, &g, &opts).unwrap();
        let b = lcp_envelope(&w, &g, &LcpOptions::default()).unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.node_values().iter().zip(b.node_values()) {
            assert!((x - y).abs() < 1e-7, "{x} {y}");
        }
        assert!(b.residuals.max() < 1e-8, "{:?}", b.residuals);
    }

    #[test]
    fn agrees_with_hull_on_a_radial_bump() {
        let w = weights::gauss_bump::<f64>(2.0, 0.7).unwrap();
        let g = LatLongGrid::new(91, 180).unwrap();
        let env = lcp_envelope(&w, &g, &LcpOptions::default()).unwrap();
        let hull = radial_envelope(&w, &RadialGrid::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let p = g.point::<f64>(i);
            worst = worst.max((env.node_values()[i] - hull.eval(&p)).abs());
        }
        assert!(worst < 2e-2, "{worst}");
        assert!(env.residuals.max() < 1e-6, "{:?}", env.residuals);
    }

    #[test]
    fn non_radial_obstacle_and_monotonicity() {
        let g = LatLongGrid::new(46, 90).unwrap();
        let w1 = weights::holder_bump::<f64>(1.0, 0.5, [1.0, 0.0, 0.0]).unwrap();
        let w2 = weights::holder_bump::<f64>(1.5, 0.5, [1.0, 0.0, 0.0]).unwrap();
        let e1 = lcp_envelope(&w1, &g, &LcpOptions::default()).unwrap();
        let e2 = lcp_envelope(&w2, &g, &LcpOptions::default()).unwrap();
        assert!(e1.converged && e2.converged);
        for (a, b) in e1.node_values().iter().zip(e2.node_values()) {
            assert!(*a <= *b + 1e-8);
        }
        let shifted = lcp_envelope(&w1.shifted(0.5), &g, &LcpOptions::default()).unwrap();
        for (a, b) in e1.node_values().iter().zip(shifted.node_values()) {
            assert!((a + 0.5 - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let w = weights::constant::<f64>(0.0).unwrap();
        assert!(LatLongGrid::new(4, 8).is_err());
        assert!(LatLongGrid::new(9, 9).is_err());
        let bad = LcpOptions { tol: 0.0, ..LcpOptions::default() };
        assert!(lcp_envelope(&w, &LatLongGrid::new(9, 16).unwrap(), &bad).is_err());
    }
}
