//! Two-chart product quadrature for integrals against `ω_FS`.
//!
//! Each chart disk `{|ζ| ≤ 1}` gets Gauss–Legendre nodes in the radius and a
//! uniform angular rule; node weights carry the Fubini–Study density so that
//! `Σ w_i f(x_i) ≈ ∫_{P¹} f ω_FS`. The disks meet along the equator, which has
//! measure zero.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};
use crate::sphere::{Chart, SpherePoint};

/// Gauss–Legendre nodes and weights on `[0, 1]`, ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { t } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (t * pn - pm) / (t * t - 1.0);
            let dt = pn / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // map [-1,1] -> [0,1]
        x[i] = 0.5 * (1.0 - t);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// One ring of the product rule: all nodes share chart, radius and weight.
#[derive(Debug, Clone, Copy)]
pub struct Ring<T> {
    pub chart: Chart,
    pub radius: T,
    /// Weight of each node on the ring.
    pub node_weight: T,
    /// Index of the first node of the ring in the flat node list.
    pub start: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GridDescriptor {
    pub kind: String,
    pub n_r: usize,
    pub n_theta: usize,
    pub nodes: usize,
    pub content_hash: String,
}

/// Product quadrature on the two chart disks.
#[derive(Debug, Clone)]
pub struct QuadratureGrid<T> {
    points: Vec<SpherePoint<T>>,
    weights: Vec<T>,
    rings: Vec<Ring<T>>,
    n_r: usize,
    n_theta: usize,
    hash: String,
}

pub const DEFAULT_N_R: usize = 400;
pub const DEFAULT_N_THETA: usize = 400;

/// Nodes per chunk for parallel reductions; fixed so that results do not
/// depend on the worker count.
const CHUNK: usize = 4096;

impl<T: Real> QuadratureGrid<T> {
    /// Angle of node `k` on a ring.
    pub fn angle(&self, k: usize) -> T {
        angle_of::<T>(k, self.n_theta)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn rings(&self) -> &[Ring<T>] {
        &self.rings
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            kind: "two_chart_product".into(),
            n_r: self.n_r,
            n_theta: self.n_theta,
            nodes: self.points.len(),
            content_hash: self.hash.clone(),
        }
    }

    pub fn descriptor_json(&self) -> String {
        serde_json::to_string(&self.descriptor()).expect("descriptor serializes")
    }

    /// Weighted sum of precomputed node values.
    pub fn integrate_values(&self, values: &[T]) -> T {
        assert_eq!(values.len(), self.weights.len());
        let partial: Vec<T> = values
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(v, w)| {
                let prod: Vec<T> = v.iter().zip(w).map(|(&a, &b)| a * b).collect();
                pairwise_sum(&prod)
            })
            .collect();
        pairwise_sum(&partial)
    }

    /// Integrate a vector-valued function `f(node index, node)` of length `k`.
    /// Reduction order is fixed, so the result does not depend on the
    /// number of worker threads.
    pub fn integrate_rows<F>(&self, k: usize, f: F) -> Vec<T>
    where
        F: Fn(usize, &SpherePoint<T>) -> Vec<T> + Sync,
    {
        let n_chunks = self.points.len().div_ceil(CHUNK);
        let partial: Vec<Vec<T>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(self.points.len());
                let mut cols = vec![Vec::with_capacity(hi - lo); k];
                for i in lo..hi {
                    let row = f(i, &self.points[i]);
                    debug_assert_eq!(row.len(), k);
                    for (col, v) in cols.iter_mut().zip(row) {
                        col.push(v * self.weights[i]);
                    }
                }
                cols.iter().map(|c| pairwise_sum(c)).collect()
            })
            .collect();
        (0..k)
            .map(|j| {
                let col: Vec<T> = partial.iter().map(|p| p[j]).collect();
                pairwise_sum(&col)
            })
            .collect()
    }

    /// Evaluate `f` at every node in parallel, preserving node order.
    pub fn map<F>(&self, f: F) -> Vec<T>
    where
        F: Fn(&SpherePoint<T>) -> T + Sync,
    {
        self.points.par_iter().map(|p| f(p)).collect()
    }
}

fn angle_of<T: Real>(k: usize, n_theta: usize) -> T {
    T::lit((k as f64 + 0.5) * std::f64::consts::TAU / n_theta as f64)
}

/// Build the two-chart product rule with `n_r` radial and `n_theta` angular
/// nodes per chart.
pub fn make_grid<T: Real>(n_r: usize, n_theta: usize) -> Result<QuadratureGrid<T>> {
    if n_r < 4 || n_theta < 4 {
        return Err(Error::InvalidArgument(format!(
            "grid needs n_r, n_theta >= 4 (got {n_r}, {n_theta})"
        )));
    }
    let (xr, wr) = gauss_legendre_unit(n_r);
    // radial weights (1/π)(1+r²)⁻² r dr · dθ, then mass-corrected so each
    // chart carries exactly 1/2.
    let dtheta = std::f64::consts::TAU / n_theta as f64;
    let mut ring_w: Vec<f64> = xr
        .iter()
        .zip(&wr)
        .map(|(&r, &w)| w * r / (std::f64::consts::PI * (1.0 + r * r).powi(2)) * dtheta)
        .collect();
    let chart_mass: f64 = ring_w.iter().sum::<f64>() * n_theta as f64;
    for w in &mut ring_w {
        *w *= 0.5 / chart_mass;
    }

    let mut points = Vec::with_capacity(2 * n_r * n_theta);
    let mut weights = Vec::with_capacity(2 * n_r * n_theta);
    let mut rings = Vec::with_capacity(2 * n_r);
    let mut hasher = Sha256::new();
    hasher.update(b"two_chart_product");
    for chart in [Chart::Z, Chart::W] {
        for (i, &r) in xr.iter().enumerate() {
            let radius = T::lit(r);
            let node_weight = T::lit(ring_w[i]);
            rings.push(Ring {
                chart,
                radius,
                node_weight,
                start: points.len(),
            });
            for k in 0..n_theta {
                let a: T = angle_of(k, n_theta);
                let c = Complex::from_polar(radius, a);
                let p = SpherePoint::from_chart(chart, c);
                hasher.update([chart as u8]);
                hasher.update(c.re.as_f64().to_le_bytes());
                hasher.update(c.im.as_f64().to_le_bytes());
                hasher.update(node_weight.as_f64().to_le_bytes());
                points.push(p);
                weights.push(node_weight);
            }
        }
    }
    let hash = hex::encode(hasher.finalize());
    Ok(QuadratureGrid {
        points,
        weights,
        rings,
        n_r,
        n_theta,
        hash,
    })
}

/// `Σ f(node) · weight`; fails on the first non-finite evaluation.
pub fn integrate<T, F>(f: F, grid: &QuadratureGrid<T>) -> Result<T>
where
    T: Real,
    F: Fn(&SpherePoint<T>) -> T + Sync,
{
    let values = grid.map(f);
    if let Some((index, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let p = grid.points[index];
        return Err(Error::NonFinite {
            index,
            chart: p.chart().as_str(),
            re: p.coord().re.as_f64(),
            im: p.coord().im.as_f64(),
        });
    }
    Ok(grid.integrate_values(&values))
}
