//! Radial envelopes as slope-constrained lower convex hulls.
//!
//! For radial `ψ`, `ψ` is `ω_FS`-psh iff `H(t) = ψ(e^t) + ½ln(1+e^{2t})` is
//! convex with slopes in `[0, 1]`, so `H_eq` is the largest such minorant of
//! `f(t) = φ(e^t) + ½ln(1+e^{2t})`.

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use super::{fs_profile, hull_value, Data, EnvelopeResult, Method, RadialCurve, Residuals};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::weights::{Weight, DEFAULT_RADIAL_WINDOW};

/// Offset of the two slope sentinels beyond the window.
const SENTINEL_OFFSET: f64 = 1.0e3;

/// Uniform grid on `[−t_max, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub t_max: f64,
    pub n: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_RADIAL_WINDOW,
            n: 20_001,
        }
    }
}

impl RadialGrid {
    pub fn nodes<T: Real>(&self) -> Vec<T> {
        let h = 2.0 * self.t_max / (self.n - 1) as f64;
        (0..self.n).map(|i| T::lit(-self.t_max + i as f64 * h)).collect()
    }
}

fn cross<T: Real>(o: (T, T), a: (T, T), b: (T, T)) -> T {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain lower hull of points sorted by abscissa.
pub(crate) fn lower_hull<T: Real>(pts: &[(T, T)]) -> Vec<(T, T)> {
    let mut hull: Vec<(T, T)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Radial equilibrium weight on a uniform `t`-grid.
///
/// The hull is augmented with `(−T−S, min f)` and `(T+S, T+S+min(f−t))`:
/// every line of slope in `[0, 1]` below the data also lies below these two
/// points, and the sentinels cut off every line with slope outside
/// `[0, 1]` on `[−T, T]`, so the hull restricted to `[−T, T]` is exactly the
/// admissible envelope of the sampled data.
pub fn radial_envelope<T: Real>(w: &Weight<T>, grid: &RadialGrid) -> Result<EnvelopeResult<T>> {
    if !w.is_radial() {
        return Err(Error::NotRadial);
    }
    if grid.n < 3 || !(grid.t_max > 0.0) {
        return Err(Error::InvalidArgument(format!("radial grid needs n >= 3 and t_max > 0, got {grid:?}")));
    }
    let t: Vec<T> = grid.nodes();
    let obstacle: Vec<T> = t.iter().map(|&ti| w.radial_profile(ti).expect("radial")).collect();
    if let Some(i) = obstacle.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("weight is not finite at t = {}", t[i].as_f64())));
    }
    let f: Vec<T> = t.iter().zip(&obstacle).map(|(&ti, &o)| o + fs_profile(ti)).collect();

    let s = T::lit(SENTINEL_OFFSET);
    let tm = T::lit(grid.t_max);
    let fmin = f.iter().copied().fold(T::infinity(), T::min);
    let q = t.iter().zip(&f).map(|(&ti, &fi)| fi - ti).fold(T::infinity(), T::min);
    let mut pts = Vec::with_capacity(t.len() + 2);
    pts.push((-tm - s, fmin));
    pts.extend(t.iter().copied().zip(f.iter().copied()));
    pts.push((tm + s, tm + s + q));
    let hull = lower_hull(&pts);

    let h_vals: Vec<T> = t.iter().map(|&ti| hull_value(&hull, ti)).collect();
    let values: Vec<T> = t.iter().zip(&h_vals).map(|(&ti, &h)| h - fs_profile(ti)).collect();
    let residuals = radial_residuals(&t, &f, &h_vals, &hull, tm);

    // grid position of each vertex (sentinels excluded)
    let dt = T::lit(2.0 * grid.t_max / (grid.n - 1) as f64);
    let node_of = |v: T| -> Option<i64> {
        if v < -tm || v > tm {
            None
        } else {
            Some(((v + tm) / dt).round().to_i64().unwrap_or(-1))
        }
    };
    let contact = hull
        .windows(2)
        .map(|s| matches!((node_of(s[0].0), node_of(s[1].0)), (Some(a), Some(b)) if b == a + 1))
        .collect();
    let w2 = w.clone();
    let curve = RadialCurve {
        t_max: tm,
        hull,
        contact,
        profile: Arc::new(move |ti| w2.radial_profile(ti).expect("radial")),
    };
    Ok(EnvelopeResult {
        method: Method::RadialHull,
        iterations: 1,
        converged: true,
        residuals,
        data: Data::Radial {
            t,
            obstacle,
            values,
            curve,
        },
    })
}

fn radial_residuals<T: Real>(t: &[T], f: &[T], h: &[T], hull: &[(T, T)], tm: T) -> Residuals {
    let obstacle = h.iter().zip(f).map(|(&a, &b)| (a - b).as_f64()).fold(0.0f64, f64::max);
    // slopes of hull segments meeting [−T, T]
    let slopes: Vec<f64> = hull
        .windows(2)
        .filter(|s| s[1].0 >= -tm && s[0].0 <= tm)
        .map(|s| ((s[1].1 - s[0].1) / (s[1].0 - s[0].0)).as_f64())
        .collect();
    let mut feasibility: f64 = 0.0;
    for s in &slopes {
        feasibility = feasibility.max(-s).max(s - 1.0);
    }
    for w in slopes.windows(2) {
        feasibility = feasibility.max(w[0] - w[1]);
    }
    let dt = (t[1] - t[0]).as_f64();
    let mut complementarity: f64 = 0.0;
    for i in 1..t.len() - 1 {
        let d2 = (h[i + 1].as_f64() - 2.0 * h[i].as_f64() + h[i - 1].as_f64()) / (dt * dt);
        let gap = (f[i] - h[i]).as_f64();
        complementarity = complementarity.max(gap.min(d2).abs());
    }
    Residuals {
        obstacle,
        feasibility: feasibility.max(0.0),
        complementarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::SpherePoint;
    use crate::weights;
    use num_complex::Complex;
    use proptest::prelude::*;

    /// Largest admissible minorant by brute force: the supremum over a slope
    /// grid of affine functions `b t + c` lying below every data point.
    fn brute_force(t: &[f64], f: &[f64], n_slopes: usize) -> Vec<f64> {
        let lines: Vec<(f64, f64)> = (0..=n_slopes)
            .map(|k| {
                let b = k as f64 / n_slopes as f64;
                let c = t.iter().zip(f).map(|(ti, fi)| fi - b * ti).fold(f64::INFINITY, f64::min);
                (b, c)
            })
            .collect();
        t.iter()
            .map(|&ti| lines.iter().map(|(b, c)| b * ti + c).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    #[test]
    fn constant_and_psh_weights_are_fixed_points() {
        let g = RadialGrid::default();
        for w in [weights::constant::<f64>(0.3).unwrap(), weights::scaled_fs(0.5).unwrap(), weights::scaled_fs(-0.9).unwrap()] {
            let env = radial_envelope(&w, &g).unwrap();
            let diff = env
                .node_values()
                .iter()
                .zip(env.obstacle_values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "{:?}: {diff}", w.spec());
            assert!(env.residuals.max() < 1e-7, "{:?}", env.residuals);
        }
    }

    #[test]
    fn gauss_bump_matches_brute_force() {
        let w = weights::gauss_bump::<f64>(2.0, 0.7).unwrap();
        let g = RadialGrid { t_max: 14.0, n: 2801 };
        let env = radial_envelope(&w, &g).unwrap();
        let t = env.t_grid().unwrap().to_vec();
        let f: Vec<f64> = t.iter().zip(env.obstacle_values()).map(|(ti, o)| o + fs_profile(*ti)).collect();
        let bf = brute_force(&t, &f, 20_000);
        let mut worst: f64 = 0.0;
        for i in 0..t.len() {
            let h = env.node_values()[i] + fs_profile(t[i]);
            worst = worst.max((h - bf[i]).abs());
        }
        assert!(worst < 2e-4, "hull vs brute force {worst}");
        // strictly below near z = 0, touching far out
        let at0 = env.eval(&SpherePoint::north_pole());
        assert!(at0 < 2.0 - 0.1);
        let far = SpherePoint::from_z(Complex::new(3.0, 0.0));
        assert!((env.eval(&far) - w.eval(&far)).abs() < 1e-9);
        assert!(env.residuals.max() < 1e-7);
    }

    #[test]
    fn rejects_non_radial() {
        let w = weights::holder_bump::<f64>(1.0, 0.5, [1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(radial_envelope(&w, &RadialGrid::default()), Err(Error::NotRadial)));
    }

    #[test]
    fn idempotent_and_equivariant() {
        let g = RadialGrid::default();
        let w = weights::holder_bump::<f64>(1.0, 0.5, [0.0, 0.0, 1.0]).unwrap();
        let e1 = radial_envelope(&w, &g).unwrap();
        let e2 = radial_envelope(&e1.to_weight(), &g).unwrap();
        for (a, b) in e1.node_values().iter().zip(e2.node_values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let e3 = radial_envelope(&w.shifted(0.75), &g).unwrap();
        for (a, b) in e1.node_values().iter().zip(e3.node_values()) {
            assert!((a + 0.75 - b).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_envelope() {
        let w = weights::gauss_bump::<f32>(2.0, 0.7).unwrap();
        let env = radial_envelope(&w, &RadialGrid { t_max: 14.0, n: 2001 }).unwrap();
        assert!(env.node_values().iter().zip(env.obstacle_values()).all(|(a, b)| *a <= *b + 1e-5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ordered_obstacles_give_ordered_envelopes(a in 0.1f64..3.0, s in 0.2f64..2.0, c in 0.0f64..1.0) {
            let g = RadialGrid { t_max: 14.0, n: 4001 };
            let w1 = weights::gauss_bump::<f64>(a, s).unwrap();
            let w2 = w1.shifted(c);
            let w3 = weights::gauss_bump::<f64>(a + c, s).unwrap();
            let e1 = radial_envelope(&w1, &g).unwrap();
            let e2 = radial_envelope(&w2, &g).unwrap();
            let e3 = radial_envelope(&w3, &g).unwrap();
            for i in 0..e1.node_values().len() {
                prop_assert!(e1.node_values()[i] <= e2.node_values()[i] + 1e-12);
                prop_assert!(e1.node_values()[i] <= e3.node_values()[i] + 1e-12);
                prop_assert!(e1.node_values()[i] <= e1.obstacle_values()[i] + 1e-15);
            }
        }
    }
}
