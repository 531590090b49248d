//! A closed algebra of exact area-preserving maps of the annulus.
//!
//! Every map preserves both boundary circles, is isotopic to the identity and
//! carries a canonical lift to the strip: the one that is continuous in the
//! parameters and equals the identity at zero rotation. Lifts of composites
//! are composites of lifts.

use std::fmt;
use std::num::NonZeroU32;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{AnnulusPoint, LiftedPoint};

/// Finite-difference step for tabulated profiles.
const FD_STEP: f64 = 1e-6;

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn minus_identity(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        let [[a, b], [c, d]] = self.0;
        let s1 = a * a + b * b + c * c + d * d;
        let det = (a * d - b * c).abs();
        let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
        let big = (0.5 * (s1 + disc)).sqrt();
        // Recover the small one from the determinant to avoid cancellation.
        let small = if big > 0.0 { det / big } else { 0.0 };
        (big, small)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        worst
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Natural cubic spline through equally spaced samples on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    values: Vec<f64>,
    second: Vec<f64>,
    /// `∫_0^{t_i} s` for every knot.
    cumulative: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("a tabulated profile needs at least two samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tabulated profile has non-finite samples"));
        }
        let n = values.len();
        let h = 1.0 / (n - 1) as f64;
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the natural spline moments.
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|i| 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h))
                .collect();
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            second[1..n - 1].copy_from_slice(&sol);
        }
        let mut profile = TabulatedProfile {
            values,
            second,
            cumulative: vec![0.0; n],
        };
        for i in 1..n {
            profile.cumulative[i] = profile.cumulative[i - 1] + profile.piece_integral(i - 1, h);
        }
        Ok(profile)
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.step();
        let i = ((t / h).floor() as usize).min(self.values.len() - 2);
        (i, t - i as f64 * h)
    }

    fn coefficients(&self, i: usize) -> (f64, f64, f64, f64) {
        let h = self.step();
        let (mi, mj) = (self.second[i], self.second[i + 1]);
        let ci = self.values[i] / h - mi * h / 6.0;
        let di = self.values[i + 1] / h - mj * h / 6.0;
        (mi, mj, ci, di)
    }

    pub fn value(&self, t: f64) -> f64 {
        let h = self.step();
        let (i, a) = self.locate(t);
        let b = h - a;
        let (mi, mj, ci, di) = self.coefficients(i);
        mi * b.powi(3) / (6.0 * h) + mj * a.powi(3) / (6.0 * h) + ci * b + di * a
    }

    /// Exact spline derivative; only used for cross-checks, the map
    /// differential follows the finite-difference route.
    pub fn derivative(&self, t: f64) -> f64 {
        let h = self.step();
        let (i, a) = self.locate(t);
        let b = h - a;
        let (mi, mj, ci, di) = self.coefficients(i);
        -mi * b * b / (2.0 * h) + mj * a * a / (2.0 * h) - ci + di
    }

    fn piece_integral_to(&self, i: usize, a: f64) -> f64 {
        let h = self.step();
        let b = h - a;
        let (mi, mj, ci, di) = self.coefficients(i);
        mi * (h.powi(4) - b.powi(4)) / (24.0 * h)
            + mj * a.powi(4) / (24.0 * h)
            + ci * (h * h - b * b) / 2.0
            + di * a * a / 2.0
    }

    fn piece_integral(&self, i: usize, h: f64) -> f64 {
        self.piece_integral_to(i, h)
    }

    /// `∫_0^t φ`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let (i, a) = self.locate(t);
        self.cumulative[i] + self.piece_integral_to(i, a)
    }
}

/// Twist angle `φ(y)` in turns for `(x, y) ↦ (x + φ(y), y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TwistProfile {
    /// `φ(y) = y`.
    Linear,
    /// `φ(y) = 16 A y² (1 − y)²`; vanishes on both boundaries, peak `A`.
    Bump { amplitude: f64 },
    Tabulated(TabulatedProfile),
}

impl TwistProfile {
    pub fn bump(amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::invalid("twist amplitude must be finite"));
        }
        Ok(TwistProfile::Bump { amplitude })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        TabulatedProfile::new(values).map(TwistProfile::Tabulated)
    }

    pub fn phi(&self, y: f64) -> f64 {
        match self {
            TwistProfile::Linear => y,
            TwistProfile::Bump { amplitude } => {
                let w = y * (1.0 - y);
                16.0 * amplitude * w * w
            }
            TwistProfile::Tabulated(t) => t.value(y),
        }
    }

    /// `φ'(y)`: analytic for closed forms, central differences with step
    /// 1e-6 for tabulated profiles (one-sided at the ends of `[0, 1]`).
    pub fn dphi(&self, y: f64) -> f64 {
        match self {
            TwistProfile::Linear => 1.0,
            TwistProfile::Bump { amplitude } => 32.0 * amplitude * y * (1.0 - y) * (1.0 - 2.0 * y),
            TwistProfile::Tabulated(t) => {
                let lo = (y - FD_STEP).max(0.0);
                let hi = (y + FD_STEP).min(1.0);
                (t.value(hi) - t.value(lo)) / (hi - lo)
            }
        }
    }

    /// `∫_0^y φ`.
    pub fn antiderivative(&self, y: f64) -> f64 {
        match self {
            TwistProfile::Linear => 0.5 * y * y,
            TwistProfile::Bump { amplitude } => {
                16.0 * amplitude * (y.powi(3) / 3.0 - y.powi(4) / 2.0 + y.powi(5) / 5.0)
            }
            TwistProfile::Tabulated(t) => t.antiderivative(y),
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, TwistProfile::Tabulated(_))
    }
}

/// Rotation angle `φ(r)` (radians) of a local disk twist of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialProfile {
    /// `φ(r) = c (1 − (r/R)²)²`.
    PolyBump { amplitude: f64 },
}

impl RadialProfile {
    pub fn poly_bump(amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::invalid(format!(
                "bump amplitude must be finite and non-negative, got {amplitude}"
            )));
        }
        Ok(RadialProfile::PolyBump { amplitude })
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            RadialProfile::PolyBump { amplitude } => *amplitude,
        }
    }

    pub fn phi(&self, r: f64, radius: f64) -> f64 {
        match self {
            RadialProfile::PolyBump { amplitude } => {
                let s = 1.0 - (r / radius).powi(2);
                if s <= 0.0 {
                    0.0
                } else {
                    amplitude * s * s
                }
            }
        }
    }

    pub fn dphi(&self, r: f64, radius: f64) -> f64 {
        r * self.dphi_over_r(r, radius)
    }

    /// `φ'(r) / r`, finite at the centre.
    pub fn dphi_over_r(&self, r: f64, radius: f64) -> f64 {
        match self {
            RadialProfile::PolyBump { amplitude } => {
                let s = 1.0 - (r / radius).powi(2);
                if s <= 0.0 {
                    0.0
                } else {
                    -4.0 * amplitude * s / (radius * radius)
                }
            }
        }
    }

    /// `∫_r^R s² φ'(s) ds`.
    pub fn moment_to_edge(&self, r: f64, radius: f64) -> f64 {
        match self {
            RadialProfile::PolyBump { amplitude } => {
                let k = -4.0 * amplitude / (radius * radius);
                let anti = |s: f64| k * (s.powi(4) / 4.0 - s.powi(6) / (6.0 * radius * radius));
                if r >= radius {
                    0.0
                } else {
                    anti(radius) - anti(r)
                }
            }
        }
    }

    /// Largest positive value of `φ'` over `n` samples of `[0, R]`; zero when
    /// the profile is non-increasing as required.
    pub fn monotonicity_defect(&self, radius: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| self.dphi(radius * i as f64 / n as f64, radius))
            .fold(0.0, f64::max)
    }
}

/// Compactly supported local rotation: inside the chart disk of radius `R`
/// about `center`, each circle of radius `r` is rotated rigidly by `φ(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskTwist {
    center: AnnulusPoint,
    radius: f64,
    profile: RadialProfile,
}

impl DiskTwist {
    pub fn new(center: AnnulusPoint, radius: f64, profile: RadialProfile) -> Result<Self> {
        let limit = center.y().min(1.0 - center.y()).min(0.5);
        if !(radius > 0.0 && radius < limit) {
            return Err(Error::invalid(format!(
                "disk radius {radius} must lie in (0, {limit}) for centre {center}"
            )));
        }
        Ok(DiskTwist {
            center,
            radius,
            profile,
        })
    }

    pub fn center(&self) -> AnnulusPoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn profile(&self) -> RadialProfile {
        self.profile
    }

    /// Chart coordinates `(sheet, u, v)` of a lifted point relative to the
    /// nearest copy of the centre.
    #[inline]
    pub(crate) fn chart(&self, p: LiftedPoint) -> (f64, f64, f64) {
        let sheet = (p.x - self.center.x()).round();
        (sheet, p.x - self.center.x() - sheet, p.y - self.center.y())
    }

    #[inline]
    pub(crate) fn inside(&self, u: f64, v: f64) -> bool {
        u * u + v * v < self.radius * self.radius
    }

    fn apply(&self, p: LiftedPoint, want_jacobian: bool) -> (LiftedPoint, Mat2) {
        let (sheet, u, v) = self.chart(p);
        if !self.inside(u, v) {
            return (p, Mat2::IDENTITY);
        }
        let (u2, v2, jac) = rotate_in_chart(&self.profile, self.radius, u, v, want_jacobian);
        let image = LiftedPoint {
            x: self.center.x() + sheet + u2,
            y: self.center.y() + v2,
        };
        (image, jac)
    }
}

/// Rotates chart coordinates `(u, v)` by `φ(r)` and, on request, returns the
/// Jacobian `Rot(φ) + (φ'(r)/r) (J w') wᵀ`, with `J` the quarter turn and
/// `w' = Rot(φ) w`. Its determinant is identically one.
pub(crate) fn rotate_in_chart(
    profile: &RadialProfile,
    radius: f64,
    u: f64,
    v: f64,
    want_jacobian: bool,
) -> (f64, f64, Mat2) {
    let r = u.hypot(v);
    let (s, c) = profile.phi(r, radius).sin_cos();
    let (u2, v2) = (c * u - s * v, s * u + c * v);
    if !want_jacobian {
        return (u2, v2, Mat2::IDENTITY);
    }
    let q = profile.dphi_over_r(r, radius);
    let jac = Mat2([
        [c - v2 * q * u, -s - v2 * q * v],
        [s + u2 * q * u, c + u2 * q * v],
    ]);
    (u2, v2, jac)
}

/// Expression tree of built-in maps.
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr {
    /// `(x, y) ↦ (x + a, y)`, `a` in turns and kept in ℝ for the lift.
    RigidRotation { a: f64 },
    /// `(x, y) ↦ (x + φ(y), y)`.
    Twist { profile: TwistProfile },
    LocalDiskTwist(DiskTwist),
    /// `outer ∘ inner`.
    Compose {
        outer: Box<MapExpr>,
        inner: Box<MapExpr>,
    },
    /// `base^k`.
    Iterate { base: Box<MapExpr>, k: NonZeroU32 },
}

impl MapExpr {
    pub fn rotation(a: f64) -> Result<MapExpr> {
        if !a.is_finite() {
            return Err(Error::invalid("rotation must be finite"));
        }
        Ok(MapExpr::RigidRotation { a })
    }

    pub fn twist(profile: TwistProfile) -> MapExpr {
        MapExpr::Twist { profile }
    }

    pub fn linear_twist() -> MapExpr {
        MapExpr::Twist {
            profile: TwistProfile::Linear,
        }
    }

    pub fn local_disk_twist(center: AnnulusPoint, radius: f64, profile: RadialProfile) -> Result<MapExpr> {
        DiskTwist::new(center, radius, profile).map(MapExpr::LocalDiskTwist)
    }

    pub fn compose(outer: MapExpr, inner: MapExpr) -> MapExpr {
        MapExpr::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn iterate(base: MapExpr, k: u32) -> Result<MapExpr> {
        let k = NonZeroU32::new(k).ok_or_else(|| Error::invalid("iterate count must be positive"))?;
        Ok(MapExpr::Iterate {
            base: Box::new(base),
            k,
        })
    }

    /// True when some twist in the tree uses a tabulated profile, so the
    /// differential involves finite differences.
    pub fn uses_finite_differences(&self) -> bool {
        match self {
            MapExpr::Twist { profile } => profile.is_tabulated(),
            MapExpr::RigidRotation { .. } | MapExpr::LocalDiskTwist(_) => false,
            MapExpr::Compose { outer, inner } => {
                outer.uses_finite_differences() || inner.uses_finite_differences()
            }
            MapExpr::Iterate { base, .. } => base.uses_finite_differences(),
        }
    }

    #[inline]
    fn apply(&self, p: LiftedPoint, want_jacobian: bool) -> (LiftedPoint, Mat2) {
        match self {
            MapExpr::RigidRotation { a } => (
                LiftedPoint {
                    x: p.x + a,
                    y: p.y,
                },
                Mat2::IDENTITY,
            ),
            MapExpr::Twist { profile } => {
                let image = LiftedPoint {
                    x: p.x + profile.phi(p.y),
                    y: p.y,
                };
                let jac = if want_jacobian {
                    Mat2([[1.0, profile.dphi(p.y)], [0.0, 1.0]])
                } else {
                    Mat2::IDENTITY
                };
                (image, jac)
            }
            MapExpr::LocalDiskTwist(d) => d.apply(p, want_jacobian),
            MapExpr::Compose { outer, inner } => {
                let (mid, j_in) = inner.apply(p, want_jacobian);
                let (out, j_out) = outer.apply(mid, want_jacobian);
                (out, if want_jacobian { j_out * j_in } else { Mat2::IDENTITY })
            }
            MapExpr::Iterate { base, k } => {
                let mut z = p;
                let mut jac = Mat2::IDENTITY;
                for _ in 0..k.get() {
                    let (next, j) = base.apply(z, want_jacobian);
                    if want_jacobian {
                        jac = j * jac;
                    }
                    z = next;
                }
                (z, jac)
            }
        }
    }

    /// Image of a point of the annulus.
    pub fn eval(&self, p: AnnulusPoint) -> AnnulusPoint {
        let image = self.eval_lift(p.lifted());
        AnnulusPoint::from_raw(image.x, image.y)
    }

    /// Canonical lift.
    pub fn eval_lift(&self, p: LiftedPoint) -> LiftedPoint {
        self.apply(p, false).0
    }

    /// Lift together with the Jacobian at `p`.
    pub fn eval_lift_with_jacobian(&self, p: LiftedPoint) -> (LiftedPoint, Mat2) {
        self.apply(p, true)
    }

    pub fn differential(&self, p: AnnulusPoint) -> Mat2 {
        self.apply(p.lifted(), true).1
    }

    /// One-step angular displacement `F̃(p).x − p.x` of the lift; a
    /// well-defined function on the annulus.
    pub fn displacement(&self, p: AnnulusPoint) -> f64 {
        let z = p.lifted();
        self.eval_lift(z).x - z.x
    }

    /// Max of `|det D − 1|` over the cell centres of an `n × n` grid.
    pub fn area_defect(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::invalid("audit grid needs n >= 2"));
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = AnnulusPoint::from_raw((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                worst = worst.max((self.differential(p).det() - 1.0).abs());
            }
        }
        Ok(worst)
    }

    pub fn boundary_circle_map(&self, which: Boundary) -> CircleMap {
        CircleMap {
            map: self.clone(),
            y: which.height(),
        }
    }

    /// Every built-in restricts to a rigid rotation on each boundary circle;
    /// this returns its amount (in turns, unreduced).
    pub fn boundary_shift(&self, which: Boundary) -> f64 {
        match self {
            MapExpr::RigidRotation { a } => *a,
            MapExpr::Twist { profile } => profile.phi(which.height()),
            MapExpr::LocalDiskTwist(_) => 0.0,
            MapExpr::Compose { outer, inner } => inner.boundary_shift(which) + outer.boundary_shift(which),
            MapExpr::Iterate { base, k } => k.get() as f64 * base.boundary_shift(which),
        }
    }

    /// Flattened list of primitive factors, innermost first.
    pub(crate) fn factors(&self) -> Vec<&MapExpr> {
        let mut out = Vec::new();
        self.collect_factors(&mut out);
        out
    }

    fn collect_factors<'a>(&'a self, out: &mut Vec<&'a MapExpr>) {
        match self {
            MapExpr::Compose { outer, inner } => {
                inner.collect_factors(out);
                outer.collect_factors(out);
            }
            MapExpr::Iterate { base, k } => {
                for _ in 0..k.get() {
                    base.collect_factors(out);
                }
            }
            leaf => out.push(leaf),
        }
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapExpr::RigidRotation { a } => write!(f, "rotation(a={a})"),
            MapExpr::Twist { profile } => match profile {
                TwistProfile::Linear => write!(f, "twist(linear)"),
                TwistProfile::Bump { amplitude } => write!(f, "twist(bump={amplitude})"),
                TwistProfile::Tabulated(t) => write!(f, "twist(tabulated, {} samples)", t.samples().len()),
            },
            MapExpr::LocalDiskTwist(d) => write!(
                f,
                "disk_twist(center=({}, {}), R={}, c={})",
                d.center.x(),
                d.center.y(),
                d.radius,
                d.profile.amplitude()
            ),
            MapExpr::Compose { outer, inner } => write!(f, "[{outer}] o [{inner}]"),
            MapExpr::Iterate { base, k } => write!(f, "[{base}]^{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

impl Boundary {
    pub fn height(self) -> f64 {
        match self {
            Boundary::Lower => 0.0,
            Boundary::Upper => 1.0,
        }
    }
}

/// Restriction of a map to a boundary circle, as a lift `ℝ → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMap {
    map: MapExpr,
    y: f64,
}

impl CircleMap {
    pub fn eval_lift(&self, x: f64) -> f64 {
        self.map.eval_lift(LiftedPoint { x, y: self.y }).x
    }

    /// The rotation amount when the restriction is rigid, which holds for
    /// every built-in.
    pub fn rigid_shift(&self) -> Option<f64> {
        let which = if self.y == 0.0 { Boundary::Lower } else { Boundary::Upper };
        Some(self.map.boundary_shift(which))
    }
}

/// Central finite-difference Jacobian of the lift, step `h`.
pub fn finite_difference_jacobian(m: &MapExpr, p: LiftedPoint, h: f64) -> Mat2 {
    let lo_y = (p.y - h).max(0.0);
    let hi_y = (p.y + h).min(1.0);
    let fx_p = m.eval_lift(LiftedPoint { x: p.x + h, y: p.y });
    let fx_m = m.eval_lift(LiftedPoint { x: p.x - h, y: p.y });
    let fy_p = m.eval_lift(LiftedPoint { x: p.x, y: hi_y });
    let fy_m = m.eval_lift(LiftedPoint { x: p.x, y: lo_y });
    let dy = hi_y - lo_y;
    Mat2([
        [(fx_p.x - fx_m.x) / (2.0 * h), (fy_p.x - fy_m.x) / dy],
        [(fx_p.y - fx_m.y) / (2.0 * h), (fy_p.y - fy_m.y) / dy],
    ])
}
