//! The unit disk with area form `(1/π) r dr∧dθ`, primitive
//! `β = (1/2π) r² dθ`, and action functions normalized to vanish on the
//! boundary circle. This is the disk-native convention; in it a twist with
//! decreasing `φ` has positive mean action.

use std::f64::consts::{PI, TAU};

use crate::action::ActionValue;
use crate::error::{Error, Result};
use crate::maps::{rotate_in_chart, Mat2, RadialProfile};
use crate::quadrature::{integrate_interval, integrate_rectangle, CubatureSpec, QuadratureSpec};

/// `(r, θ) ↦ (r, θ + φ(r))` on the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDiskTwist {
    profile: RadialProfile,
}

impl UnitDiskTwist {
    pub fn new(profile: RadialProfile) -> Self {
        UnitDiskTwist { profile }
    }

    /// `φ(r) = c (1 − r²)²`.
    pub fn poly_bump(c: f64) -> Result<Self> {
        RadialProfile::poly_bump(c).map(Self::new)
    }

    pub fn profile(&self) -> RadialProfile {
        self.profile
    }

    /// Image and Jacobian in Cartesian coordinates.
    pub fn apply(&self, u: f64, v: f64) -> Result<(f64, f64, Mat2)> {
        if u * u + v * v > 1.0 {
            return Err(Error::invalid(format!("({u}, {v}) lies outside the unit disk")));
        }
        Ok(rotate_in_chart(&self.profile, 1.0, u, v, true))
    }

    /// `f*β − β` at `(u, v)` as coefficients of `du`, `dv`, computed from the
    /// map and its Jacobian; `β = (u dv − v du) / 2π`.
    pub fn pullback_difference(&self, u: f64, v: f64) -> Result<[f64; 2]> {
        self.apply(u, v)?;
        Ok(self.pullback_unchecked(u, v))
    }

    fn pullback_unchecked(&self, u: f64, v: f64) -> [f64; 2] {
        let (u2, v2, j) = rotate_in_chart(&self.profile, 1.0, u, v, true);
        let a = |x: f64, y: f64| [-y / TAU, x / TAU];
        let [a2, b2] = a(u2, v2);
        let [a1, b1] = a(u, v);
        [
            a2 * j.0[0][0] + b2 * j.0[1][0] - a1,
            a2 * j.0[0][1] + b2 * j.0[1][1] - b1,
        ]
    }

    /// `g(u, v)`, the integral of `f*β − β` along the radial segment from the
    /// boundary point in the direction of `(u, v)`.
    pub fn action_function(&self, u: f64, v: f64, quad: &QuadratureSpec) -> Result<f64> {
        let r = u.hypot(v);
        if r > 1.0 {
            return Err(Error::invalid(format!("({u}, {v}) lies outside the unit disk")));
        }
        if r == 1.0 {
            return Ok(0.0);
        }
        let (dir_u, dir_v) = if r > 0.0 { (u / r, v / r) } else { (1.0, 0.0) };
        let len = 1.0 - r;
        // Parametrise from the boundary inwards: s ∈ [0, 1] ↦ (1 − s·len)·dir.
        let integrand = |s: f64| {
            let rho = 1.0 - s * len;
            let [a, b] = self.pullback_unchecked(rho * dir_u, rho * dir_v);
            -(a * dir_u + b * dir_v) * len
        };
        integrate_interval(&integrand, 0.0, 1.0, len, len, quad).map(|e| e.value)
    }

    /// Mean action `∫ g ω` with `ω = (1/π) r dr dθ` (total mass one).
    pub fn mean_action(&self, quad: &QuadratureSpec, cubature: &CubatureSpec) -> Result<ActionValue> {
        let failure = std::sync::Mutex::new(None);
        let f = |r: f64, theta: f64| {
            let (s, c) = theta.sin_cos();
            match self.action_function(r * c, r * s, quad) {
                Ok(g) => g * r / PI,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let spec = CubatureSpec {
            base_panels: cubature.base_panels.min(16),
            ..*cubature
        };
        let est = integrate_rectangle(&f, (0.0, 1.0), (0.0, TAU), &spec)?;
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        Ok(ActionValue {
            value: est.value,
            error_estimate: est.error,
        })
    }
}

/// `c / (12π)`, the mean action of the polynomial bump twist.
pub fn poly_bump_mean_action(c: f64) -> f64 {
    c / (12.0 * PI)
}
