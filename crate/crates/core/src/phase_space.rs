//! Coordinates on the annulus `S¹ × [0, 1]` (angle in turns), lifts to the
//! strip `ℝ × [0, 1]`, polyline paths, and line integrals of 1-forms.
//!
//! The disk is treated as the annulus with its lower boundary collapsed to a
//! point; there is no separate global disk coordinate system.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_interval, pairwise_sum, Estimate, QuadratureSpec};

/// Reduces an angle in turns to `[0, 1)`.
///
/// `rem_euclid` can round tiny negative inputs up to exactly `1.0`; that case
/// is folded back to `0.0`.
#[inline]
pub fn wrap_turns(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point `(x mod 1, y)` of the annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPoint {
    x: f64,
    y: f64,
}

impl AnnulusPoint {
    /// Normalizes `x` into `[0, 1)`; rejects `y` outside `[0, 1]` and
    /// non-finite input.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!("non-finite point ({x}, {y})")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("y = {y} outside [0, 1]")));
        }
        Ok(AnnulusPoint {
            x: wrap_turns(x),
            y,
        })
    }

    /// Constructor for values already known to be in range (clamps `y`).
    pub(crate) fn from_raw(x: f64, y: f64) -> Self {
        AnnulusPoint {
            x: wrap_turns(x),
            y: y.clamp(0.0, 1.0),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// The representative on sheet 0.
    pub fn lifted(&self) -> LiftedPoint {
        lift(*self, 0)
    }
}

impl fmt::Display for AnnulusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A point of the universal cover `ℝ × [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub x: f64,
    pub y: f64,
}

impl LiftedPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!("non-finite point ({x}, {y})")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("y = {y} outside [0, 1]")));
        }
        Ok(LiftedPoint { x, y })
    }

    /// Deck transformation by `n` sheets.
    pub fn shifted(&self, n: i64) -> LiftedPoint {
        LiftedPoint {
            x: self.x + n as f64,
            y: self.y,
        }
    }

    pub fn projected(&self) -> AnnulusPoint {
        project(*self).0
    }

    pub(crate) fn distance(&self, other: &LiftedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `(x̃ mod 1, y)` together with the sheet index `floor(x̃)`.
pub fn project(p: LiftedPoint) -> (AnnulusPoint, i64) {
    let fl = p.x.floor();
    let r = p.x - fl;
    if r >= 1.0 {
        (AnnulusPoint { x: 0.0, y: p.y }, fl as i64 + 1)
    } else {
        (AnnulusPoint { x: r, y: p.y }, fl as i64)
    }
}

pub fn lift(p: AnnulusPoint, sheet: i64) -> LiftedPoint {
    LiftedPoint {
        x: p.x + sheet as f64,
        y: p.y,
    }
}

/// A polyline in the strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylinePath {
    vertices: Vec<LiftedPoint>,
    refinement: f64,
}

impl PolylinePath {
    pub fn new(vertices: Vec<LiftedPoint>, refinement: f64) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid("a path needs at least two vertices"));
        }
        if !(refinement > 0.0) || !refinement.is_finite() {
            return Err(Error::invalid(format!("refinement must be > 0, got {refinement}")));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("consecutive path vertices coincide"));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !(0.0..=1.0).contains(&v.y)) {
            return Err(Error::invalid("path vertex outside the strip"));
        }
        Ok(PolylinePath {
            vertices,
            refinement,
        })
    }

    pub fn straight(from: LiftedPoint, to: LiftedPoint, refinement: f64) -> Result<Self> {
        Self::new(vec![from, to], refinement)
    }

    pub fn vertices(&self) -> &[LiftedPoint] {
        &self.vertices
    }

    pub fn refinement(&self) -> f64 {
        self.refinement
    }

    pub fn start(&self) -> LiftedPoint {
        self.vertices[0]
    }

    pub fn end(&self) -> LiftedPoint {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn reversed(&self) -> PolylinePath {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        PolylinePath {
            vertices,
            refinement: self.refinement,
        }
    }

    /// `self` followed by `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &PolylinePath) -> Result<PolylinePath> {
        if self.end() != other.start() {
            return Err(Error::invalid("paths do not share an endpoint"));
        }
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices[1..]);
        Ok(PolylinePath {
            vertices,
            refinement: self.refinement.min(other.refinement),
        })
    }

    /// Number of turns made by a closed path (end projects onto start).
    pub fn winding(&self) -> Option<i64> {
        let d = self.end().x - self.start().x;
        let n = d.round();
        ((d - n).abs() < 1e-12 && self.end().y == self.start().y).then_some(n as i64)
    }
}

type FieldFn = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync;

/// `a(x, y) dx + b(x, y) dy` with coefficient functions supplied by the caller.
#[derive(Clone)]
pub struct ExplicitForm {
    field: Arc<FieldFn>,
    claims_primitive: bool,
}

impl ExplicitForm {
    /// `claims_primitive` asserts `d(form) = ω`; see
    /// [`OneForm::primitive_defect`] for the numerical check.
    pub fn new<F>(field: F, claims_primitive: bool) -> Self
    where
        F: Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    {
        ExplicitForm {
            field: Arc::new(field),
            claims_primitive,
        }
    }

    pub fn claims_primitive(&self) -> bool {
        self.claims_primitive
    }
}

impl fmt::Debug for ExplicitForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitForm")
            .field("claims_primitive", &self.claims_primitive)
            .finish_non_exhaustive()
    }
}

/// A 1-form on the strip.
#[derive(Debug, Clone)]
pub enum OneForm {
    /// `y dx`.
    CanonicalBeta,
    /// `y dx + c dx`.
    ShiftedBeta(f64),
    ExplicitField(ExplicitForm),
}

impl OneForm {
    /// Coefficients `[a, b]` of `a dx + b dy` at `(x, y)`.
    #[inline]
    pub fn coefficients(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            OneForm::CanonicalBeta => [y, 0.0],
            OneForm::ShiftedBeta(c) => [y + c, 0.0],
            OneForm::ExplicitField(e) => (e.field)(x, y),
        }
    }

    /// Closed-form shift `c` in `y dx + c dx`, if this is one of the two
    /// built-in primitives.
    pub fn shift(&self) -> Option<f64> {
        match self {
            OneForm::CanonicalBeta => Some(0.0),
            OneForm::ShiftedBeta(c) => Some(*c),
            OneForm::ExplicitField(_) => None,
        }
    }

    /// Max over an `n × n` grid of `|∂b/∂x − ∂a/∂y + 1|`, i.e. how far
    /// `d(form)` is from `ω = dy∧dx = −dx∧dy`. Central differences, step 1e-5.
    pub fn primitive_defect(&self, n: usize) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64 + 0.5) / n as f64;
                let y = h + (1.0 - 2.0 * h) * (j as f64 + 0.5) / n as f64;
                let bx = (self.coefficients(x + h, y)[1] - self.coefficients(x - h, y)[1]) / (2.0 * h);
                let ay = (self.coefficients(x, y + h)[0] - self.coefficients(x, y - h)[0]) / (2.0 * h);
                worst = worst.max((bx - ay + 1.0).abs());
            }
        }
        worst
    }
}

/// `∫_path form`, segment by segment with composite Gauss–Legendre panels.
pub fn line_integral(form: &OneForm, path: &PolylinePath, quad: &QuadratureSpec) -> Result<f64> {
    line_integral_estimate(form, path, quad).map(|e| e.value)
}

/// Same as [`line_integral`], also returning the accumulated refinement
/// increment.
pub fn line_integral_estimate(
    form: &OneForm,
    path: &PolylinePath,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    let spec = QuadratureSpec {
        refinement: quad.refinement.min(path.refinement),
        ..*quad
    };
    let total = path.length();
    let mut parts = Vec::with_capacity(path.vertices.len() - 1);
    let mut error = 0.0;
    for w in path.vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let integrand = |t: f64| {
            let [ca, cb] = form.coefficients(a.x + t * dx, a.y + t * dy);
            ca * dx + cb * dy
        };
        let est = integrate_interval(&integrand, 0.0, 1.0, a.distance(&b), total, &spec)?;
        parts.push(est.value);
        error += est.error;
    }
    Ok(Estimate {
        value: pairwise_sum(&parts),
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(x: f64, y: f64) -> LiftedPoint {
        LiftedPoint::new(x, y).unwrap()
    }

    #[test]
    fn project_examples() {
        assert_eq!(project(lp(0.25, 0.5)), (AnnulusPoint::new(0.25, 0.5).unwrap(), 0));
        assert_eq!(project(lp(2.25, 0.5)), (AnnulusPoint::new(0.25, 0.5).unwrap(), 2));
        assert_eq!(project(lp(-0.75, 1.0)), (AnnulusPoint::new(0.25, 1.0).unwrap(), -1));
    }

    #[test]
    fn lift_examples() {
        let p = AnnulusPoint::new(0.1, 0.0).unwrap();
        assert_eq!(lift(p, 0), lp(0.1, 0.0));
        assert_eq!(lift(p, 3), lp(3.1, 0.0));
        let q = AnnulusPoint::new(0.9, 1.0).unwrap();
        assert!((lift(q, -1).x - -0.1).abs() < 1e-15);
    }

    #[test]
    fn tiny_negative_angle_wraps_to_zero() {
        let (p, n) = project(lp(-1e-20, 0.3));
        assert_eq!(p.x(), 0.0);
        assert_eq!(n, 0);
        assert_eq!(AnnulusPoint::new(-1e-20, 0.3).unwrap().x(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_y() {
        assert!(AnnulusPoint::new(0.1, 1.0000001).is_err());
        assert!(AnnulusPoint::new(0.1, -0.1).is_err());
        assert!(AnnulusPoint::new(f64::NAN, 0.1).is_err());
        assert!(LiftedPoint::new(4.0, 2.0).is_err());
    }

    #[test]
    fn path_validation() {
        assert!(PolylinePath::new(vec![lp(0.0, 0.0)], 0.1).is_err());
        assert!(PolylinePath::new(vec![lp(0.0, 0.0), lp(0.0, 0.0)], 0.1).is_err());
        assert!(PolylinePath::new(vec![lp(0.0, 0.0), lp(1.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn beta_line_integral_examples() {
        let q = QuadratureSpec::default();
        let lower = PolylinePath::straight(lp(0.0, 0.0), lp(1.0, 0.0), 0.1).unwrap();
        assert_eq!(line_integral(&OneForm::CanonicalBeta, &lower, &q).unwrap(), 0.0);
        let upper = PolylinePath::straight(lp(0.0, 1.0), lp(1.0, 1.0), 0.1).unwrap();
        assert!((line_integral(&OneForm::CanonicalBeta, &upper, &q).unwrap() - 1.0).abs() < 1e-14);
        let diag = PolylinePath::straight(lp(0.0, 0.0), lp(1.0, 1.0), 0.1).unwrap();
        // ∫_0^1 t dt
        assert!((line_integral(&OneForm::CanonicalBeta, &diag, &q).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn explicit_form_primitive_check() {
        let good = OneForm::ExplicitField(ExplicitForm::new(|x, _y| [0.0, -x], true));
        assert!(good.primitive_defect(8) < 1e-8);
        let bad = OneForm::ExplicitField(ExplicitForm::new(|x, _y| [0.0, x], true));
        assert!((bad.primitive_defect(8) - 2.0).abs() < 1e-6);
        assert!(OneForm::CanonicalBeta.primitive_defect(8) < 1e-8);
        assert!(OneForm::ShiftedBeta(3.0).primitive_defect(8) < 1e-8);
    }

    #[test]
    fn closed_path_winding() {
        let p = PolylinePath::new(vec![lp(0.2, 0.1), lp(1.0, 0.7), lp(2.2, 0.1)], 0.1).unwrap();
        assert_eq!(p.winding(), Some(2));
        let open = PolylinePath::straight(lp(0.2, 0.1), lp(0.5, 0.1), 0.1).unwrap();
        assert_eq!(open.winding(), None);
    }
}
