//! The equilibrium weight
//! `φ_eq = sup{ψ ≤ φ : ψ is ω_FS-psh}`, i.e. the largest `ψ ≤ φ` with
//! `Δ_{S²}ψ ≥ −1/2`, and pairings against `ω_eq = ω_FS + dd^c φ_eq`.
//!
//! Two solvers: an exact convex-hull construction for radial weights and a
//! discrete obstacle problem on a latitude-longitude grid for general ones.

mod lcp;
mod radial;

pub use lcp::{lcp_envelope, LatLongGrid, LcpOptions};
pub use radial::{radial_envelope, RadialGrid};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::harmonics::{Dictionary, TestFunction};
use crate::quadrature::QuadratureGrid;
use crate::scalar::Real;
use crate::sphere::SpherePoint;
use crate::table::{num, Table};
use crate::weights::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RadialHull,
    Lcp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::RadialHull => "radial_hull",
            Method::Lcp => "lcp",
        }
    }
}

/// Residuals of a computed envelope.
///
/// For the lattice solver they are in Laplacian units: `feasibility` is the
/// largest violation of `Δψ + 1/2 ≥ 0`, `complementarity` the largest
/// `|min(φ − ψ, Δψ + 1/2)|`. For the hull they are measured on
/// `H(t) = ψ(e^t) + ½ln(1+e^{2t})` against `H'' ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub obstacle: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.obstacle.max(self.feasibility).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Data<T> {
    Radial {
        t: Vec<T>,
        obstacle: Vec<T>,
        values: Vec<T>,
        curve: RadialCurve<T>,
    },
    LatLong {
        grid: LatLongGrid,
        obstacle: Vec<T>,
        values: Vec<T>,
        laplacian: Vec<T>,
    },
}

/// The radial solution as a function of `t = ln|z|`.
#[derive(Clone)]
pub(crate) struct RadialCurve<T> {
    pub t_max: T,
    /// Vertices `(t, H)` of the lower hull, sentinels included.
    pub hull: Vec<(T, T)>,
    /// Whether hull segment `k` joins two neighbouring grid nodes, i.e. lies
    /// in the contact set where `φ_eq = φ`.
    pub contact: Vec<bool>,
    pub profile: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T: Real> RadialCurve<T> {
    pub fn value(&self, t: T) -> T {
        let t = t.max(-self.t_max).min(self.t_max);
        let chord = hull_value(&self.hull, t) - fs_profile(t);
        let k = self.hull.partition_point(|v| v.0 <= t);
        if k >= 1 && k < self.hull.len() && self.contact[k - 1] {
            chord.min((self.profile)(t))
        } else {
            chord
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for RadialCurve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialCurve")
            .field("t_max", &self.t_max)
            .field("vertices", &self.hull.len())
            .finish()
    }
}

/// Output of either envelope solver.
#[derive(Debug, Clone)]
pub struct EnvelopeResult<T> {
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
    pub(crate) data: Data<T>,
}

/// `½ ln(1 + e^{2t})`, overflow-free.
pub(crate) fn fs_profile<T: Real>(t: T) -> T {
    let half = T::lit(0.5);
    if t > T::zero() {
        t + half * (-(t + t)).exp().ln_1p()
    } else {
        half * (t + t).exp().ln_1p()
    }
}

impl<T: Real> EnvelopeResult<T> {
    /// `φ_eq` at an arbitrary point.
    pub fn eval(&self, p: &SpherePoint<T>) -> T {
        match &self.data {
            Data::Radial { curve, .. } => curve.value(p.log_abs_z()),
            Data::LatLong { grid, values, .. } => grid.interpolate(values, p),
        }
    }

    /// `φ_eq` at every node of a quadrature grid.
    pub fn sample(&self, grid: &QuadratureGrid<T>) -> Vec<T> {
        grid.map(|p| self.eval(p))
    }

    /// Node values of `φ_eq` on the solver's own grid.
    pub fn node_values(&self) -> &[T] {
        match &self.data {
            Data::Radial { values, .. } | Data::LatLong { values, .. } => values,
        }
    }

    /// Node values of the obstacle on the solver's own grid.
    pub fn obstacle_values(&self) -> &[T] {
        match &self.data {
            Data::Radial { obstacle, .. } | Data::LatLong { obstacle, .. } => obstacle,
        }
    }

    /// The `t = ln|z|` nodes, for the radial solver.
    pub fn t_grid(&self) -> Option<&[T]> {
        match &self.data {
            Data::Radial { t, .. } => Some(t),
            Data::LatLong { .. } => None,
        }
    }

    /// The lattice, for the obstacle-problem solver.
    pub fn lat_long_grid(&self) -> Option<&LatLongGrid> {
        match &self.data {
            Data::LatLong { grid, .. } => Some(grid),
            Data::Radial { .. } => None,
        }
    }

    /// Vertices `(t, H(t))` of the convex minorant, for the radial solver.
    pub fn hull_vertices(&self) -> Option<&[(T, T)]> {
        match &self.data {
            Data::Radial { curve, .. } => Some(&curve.hull),
            Data::LatLong { .. } => None,
        }
    }

    /// `φ_eq` as a weight (evaluates the stored solution).
    pub fn to_weight(&self) -> Weight<T> {
        let me = self.clone();
        let profile = match &self.data {
            Data::Radial { curve, .. } => {
                let curve = curve.clone();
                Some(Arc::new(move |t: T| curve.value(t)) as Arc<dyn Fn(T) -> T + Send + Sync>)
            }
            Data::LatLong { .. } => None,
        };
        Weight::custom(&format!("envelope({})", self.method.as_str()), move |p| me.eval(p), profile, false, None)
    }

    /// CSV with node coordinates, obstacle, envelope and per-node residual.
    pub fn to_table(&self) -> Table {
        let mut t;
        match &self.data {
            Data::Radial { t: ts, obstacle, values, curve } => {
                t = Table::new(&["t", "abs_z", "phi", "phi_eq", "gap"]);
                for i in 0..ts.len() {
                    let ti = ts[i].as_f64();
                    t.push(vec![
                        num(ti),
                        num(ti.exp()),
                        num(obstacle[i].as_f64()),
                        num(values[i].as_f64()),
                        num((obstacle[i] - values[i]).as_f64()),
                    ]);
                }
                t.meta("hull_vertices", curve.hull.len());
            }
            Data::LatLong { grid, obstacle, values, laplacian } => {
                t = Table::new(&["theta", "lon", "chart", "re", "im", "phi", "phi_eq", "laplacian_plus_half"]);
                for idx in 0..grid.len() {
                    let (th, lon) = grid.node_angles(idx);
                    let p = SpherePoint::<f64>::from_colat_lon(th, lon);
                    t.push(vec![
                        num(th),
                        num(lon),
                        p.chart().as_str().to_string(),
                        num(p.coord().re),
                        num(p.coord().im),
                        num(obstacle[idx].as_f64()),
                        num(values[idx].as_f64()),
                        num(laplacian[idx].as_f64() + 0.5),
                    ]);
                }
                t.meta("n_lat", grid.n_lat).meta("n_lon", grid.n_lon);
            }
        }
        t.meta("method", self.method.as_str())
            .meta("iterations", self.iterations)
            .meta("converged", self.converged)
            .meta("obstacle_residual", self.residuals.obstacle)
            .meta("feasibility_residual", self.residuals.feasibility)
            .meta("complementarity_residual", self.residuals.complementarity);
        t
    }
}

/// Piecewise-linear interpolation through hull vertices sorted by `t`.
pub(crate) fn hull_value<T: Real>(hull: &[(T, T)], t: T) -> T {
    let k = hull.partition_point(|v| v.0 <= t);
    if k == 0 {
        return hull[0].1;
    }
    if k == hull.len() {
        return hull[hull.len() - 1].1;
    }
    let (t0, h0) = hull[k - 1];
    let (t1, h1) = hull[k];
    h0 + (h1 - h0) * ((t - t0) / (t1 - t0))
}

/// `⟨ω_eq, u⟩ = ∫ u ω_FS + ∫ φ_eq dd^c u`.
pub fn equilibrium_pairing<T: Real>(env: &EnvelopeResult<T>, u: &TestFunction, grid: &QuadratureGrid<T>) -> T {
    let vals = grid.map(|p| u.value(p) + env.eval(p) * u.ddc_density(p));
    grid.integrate_values(&vals)
}

/// `⟨ω_FS + dd^c ψ, u⟩` for every dictionary element, given node values of a
/// potential `ψ` on `grid`. `mass` multiplies the `ω_FS` term.
pub fn potential_pairings<T: Real>(potential: &[T], mass: T, dict: &Dictionary, grid: &QuadratureGrid<T>) -> Vec<T> {
    assert_eq!(potential.len(), grid.len());
    grid.integrate_rows(dict.len(), |i, p| {
        let v = dict.values(p);
        let d = dict.ddc_densities(p);
        v.iter().zip(&d).map(|(&a, &b)| mass * a + potential[i] * b).collect()
    })
}

/// Pairings of `ω_eq` against a whole dictionary.
pub fn equilibrium_pairings<T: Real>(env: &EnvelopeResult<T>, dict: &Dictionary, grid: &QuadratureGrid<T>) -> Vec<T> {
    let phi_eq = env.sample(grid);
    potential_pairings(&phi_eq, T::one(), dict, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::harmonic_dictionary;
    use crate::quadrature::make_grid;
    use crate::weights;

    #[test]
    fn fs_profile_is_stable() {
        assert!((fs_profile(0.0f64) - 0.5 * 2f64.ln()).abs() < 1e-16);
        assert!((fs_profile(800.0f64) - 800.0).abs() < 1e-12);
        assert!(fs_profile(-800.0f64) >= 0.0);
    }

    #[test]
    fn mass_and_trivial_pairings() {
        let grid = make_grid::<f64>(48, 48).unwrap();
        let dict = harmonic_dictionary(4).unwrap();
        let w = weights::gauss_bump::<f64>(2.0, 0.7).unwrap();
        let env = radial_envelope(&w, &RadialGrid::default()).unwrap();
        let one = TestFunction::harmonic(0, 0);
        assert!((equilibrium_pairing(&env, &one, &grid) - 1.0).abs() < 1e-12);

        let zero = radial_envelope(&weights::constant::<f64>(0.0).unwrap(), &RadialGrid::default()).unwrap();
        let all = equilibrium_pairings(&zero, &dict, &grid);
        for (k, e) in dict.elements.iter().enumerate() {
            let direct = grid.integrate_values(&grid.map(|p| e.value(p)));
            assert!((all[k] - direct).abs() < 1e-12);
            assert!((equilibrium_pairing(&zero, e, &grid) - direct).abs() < 1e-12);
        }
    }
}
