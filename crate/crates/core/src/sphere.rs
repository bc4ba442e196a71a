//! Points of the Riemann sphere P¹ ≅ S².
//!
//! Conventions used throughout the crate:
//!
//! * stereographic coordinate `z = (x₁ + i x₂) / (1 + x₃)`, so the north pole
//!   `(0, 0, 1)` is `z = 0` and the south pole is `z = ∞`;
//! * the second chart is `w = 1/z`, used for every point with `|z| > 1`;
//! * the Fubini–Study form is `ω_FS = (1/π)(1 + |ζ|²)⁻² dx dy` in either chart,
//!   a probability measure, equal to `dA / 4π` for the area form of the unit
//!   sphere;
//! * `dd^c u = (1/2π) Δ_ζ u dx∧dy`, and `Δ_ζ = 4 (1 + |ζ|²)⁻² Δ_{S²}`, so the
//!   density of `dd^c u` against `ω_FS` is `2 Δ_{S²} u`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Which stereographic chart a coordinate lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `z`, centred at the north pole.
    Z,
    /// `w = 1/z`, centred at the south pole.
    W,
}

impl Chart {
    pub fn as_str(self) -> &'static str {
        match self {
            Chart::Z => "z",
            Chart::W => "w",
        }
    }

    pub fn parse(s: &str) -> Option<Chart> {
        match s.trim() {
            "z" | "Z" => Some(Chart::Z),
            "w" | "W" => Some(Chart::W),
            _ => None,
        }
    }
}

/// A point of P¹ stored by its chart coordinate (modulus ≤ 1) and its unit
/// vector on S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint<T> {
    chart: Chart,
    coord: Complex<T>,
    unit: [T; 3],
}

impl<T: Real> SpherePoint<T> {
    pub fn north_pole() -> Self {
        Self::from_chart(Chart::Z, Complex::new(T::zero(), T::zero()))
    }

    pub fn south_pole() -> Self {
        Self::from_chart(Chart::W, Complex::new(T::zero(), T::zero()))
    }

    /// Build from an affine coordinate `z`, switching to the `w` chart when
    /// `|z| > 1`.
    pub fn from_z(z: Complex<T>) -> Self {
        if z.norm_sqr() <= T::one() {
            Self::from_chart(Chart::Z, z)
        } else {
            Self::from_chart(Chart::W, z.inv())
        }
    }

    pub fn from_w(w: Complex<T>) -> Self {
        if w.norm_sqr() <= T::one() {
            Self::from_chart(Chart::W, w)
        } else {
            Self::from_chart(Chart::Z, w.inv())
        }
    }

    /// Build from a chart coordinate without re-charting. The modulus may
    /// exceed one (used for interpolation stencils near the equator).
    pub fn from_chart(chart: Chart, coord: Complex<T>) -> Self {
        let unit = chart_to_unit(chart, coord);
        Self { chart, coord, unit }
    }

    /// Build from a vector on S² (normalised internally).
    pub fn from_unit_vector(v: [T; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let u = [v[0] / n, v[1] / n, v[2] / n];
        let (chart, coord) = if u[2] >= T::zero() {
            let d = T::one() + u[2];
            (Chart::Z, Complex::new(u[0] / d, u[1] / d))
        } else {
            let d = T::one() - u[2];
            (Chart::W, Complex::new(u[0] / d, -u[1] / d))
        };
        Self { chart, coord, unit: u }
    }

    /// Colatitude `θ ∈ [0, π]` from the north pole and longitude `λ`.
    pub fn from_colat_lon(theta: T, lon: T) -> Self {
        let s = theta.sin();
        Self::from_unit_vector([s * lon.cos(), s * lon.sin(), theta.cos()])
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coord(&self) -> Complex<T> {
        self.coord
    }

    pub fn unit_vector(&self) -> [T; 3] {
        self.unit
    }

    /// Affine coordinate `z`, or `None` at the south pole.
    pub fn z(&self) -> Option<Complex<T>> {
        match self.chart {
            Chart::Z => Some(self.coord),
            Chart::W => {
                if self.coord.norm_sqr() == T::zero() {
                    None
                } else {
                    Some(self.coord.inv())
                }
            }
        }
    }

    /// `ln |z|`, with `±∞` at the poles.
    pub fn log_abs_z(&self) -> T {
        let r = self.coord.norm();
        match self.chart {
            Chart::Z => r.ln(),
            Chart::W => -r.ln(),
        }
    }

    /// Conformal factor `4 / (1 + |ζ|²)²` between the chart Laplacian and the
    /// round Laplacian: `Δ_ζ = factor · Δ_{S²}`.
    pub fn conformal_factor(&self) -> T {
        let d = T::one() + self.coord.norm_sqr();
        T::lit(4.0) / (d * d)
    }

    /// Fubini–Study density `(1/π)(1 + |ζ|²)⁻²` in the current chart.
    pub fn fs_density(&self) -> T {
        let d = T::one() + self.coord.norm_sqr();
        T::one() / (T::PI() * d * d)
    }

    /// Great-circle distance on the unit sphere.
    pub fn distance(&self, other: &Self) -> T {
        let a = self.unit;
        let b = other.unit;
        let c = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        let two = T::lit(2.0);
        two * (c / two).min(T::one()).asin()
    }

    /// Coordinate of this point in the requested chart, if finite there.
    pub fn coord_in(&self, chart: Chart) -> Option<Complex<T>> {
        if chart == self.chart {
            return Some(self.coord);
        }
        if self.coord.norm_sqr() == T::zero() {
            None
        } else {
            Some(self.coord.inv())
        }
    }

    pub fn cast<U: Real>(&self) -> SpherePoint<U> {
        let c = Complex::new(U::lit(self.coord.re.as_f64()), U::lit(self.coord.im.as_f64()));
        SpherePoint::from_chart(self.chart, c)
    }
}

fn chart_to_unit<T: Real>(chart: Chart, coord: Complex<T>) -> [T; 3] {
    let r2 = coord.norm_sqr();
    let d = T::one() + r2;
    let two = T::lit(2.0);
    match chart {
        Chart::Z => [two * coord.re / d, two * coord.im / d, (T::one() - r2) / d],
        Chart::W => [two * coord.re / d, -two * coord.im / d, (r2 - T::one()) / d],
    }
}

/// `(1/2) ln(1 + |ζ|²)`, the local Fubini–Study potential in a chart.
pub fn fs_potential<T: Real>(coord: Complex<T>) -> T {
    T::lit(0.5) * coord.norm_sqr().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn poles() {
        let n = SpherePoint::<f64>::north_pole();
        assert_eq!(n.unit_vector(), [0.0, 0.0, 1.0]);
        let s = SpherePoint::<f64>::south_pole();
        assert_eq!(s.unit_vector(), [0.0, 0.0, -1.0]);
        assert!(s.z().is_none());
        assert!((n.distance(&s) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn chart_switch_uses_w_outside_unit_disk() {
        let p = SpherePoint::from_z(Complex::new(3.0f64, -4.0));
        assert_eq!(p.chart(), Chart::W);
        assert!(p.coord().norm() <= 1.0);
        let z = p.z().unwrap();
        assert!((z - Complex::new(3.0, -4.0)).norm() < 1e-14);
    }

    #[test]
    fn f32_instantiation() {
        let p = SpherePoint::<f32>::from_z(Complex::new(0.5, 0.25));
        let q = SpherePoint::<f32>::from_unit_vector(p.unit_vector());
        assert!((p.coord() - q.coord()).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn round_trip_through_unit_vector(re in -50.0f64..50.0, im in -50.0f64..50.0) {
            let p = SpherePoint::from_z(Complex::new(re, im));
            let q = SpherePoint::from_unit_vector(p.unit_vector());
            prop_assert_eq!(p.chart(), q.chart());
            prop_assert!((p.coord() - q.coord()).norm() < 1e-12);
            prop_assert!(q.coord().norm() <= 1.000001);
            let u = p.unit_vector();
            prop_assert!(((u[0]*u[0] + u[1]*u[1] + u[2]*u[2]) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn both_charts_agree_on_overlap(theta in 0.0f64..std::f64::consts::TAU, r in 0.9f64..1.1) {
            let z = Complex::from_polar(r, theta);
            let a = SpherePoint::from_chart(Chart::Z, z);
            let b = SpherePoint::from_chart(Chart::W, z.inv());
            let (ua, ub) = (a.unit_vector(), b.unit_vector());
            for k in 0..3 {
                prop_assert!((ua[k] - ub[k]).abs() < 1e-12);
            }
            prop_assert!((a.log_abs_z() - b.log_abs_z()).abs() < 1e-12);
        }
    }
}
