//! Rotation numbers of points, boundary circles and invariant measures, all
//! in turns per iterate and measured in the universal cover.

use serde::{Deserialize, Serialize};

use crate::action::{measure_action, ActionContext, MeasureSpec, NumericalSettings, MIN_BIRKHOFF_ITERATIONS};
use crate::error::{Error, Result};
use crate::maps::{Boundary, CircleMap, MapExpr};
use crate::phase_space::{AnnulusPoint, LiftedPoint};
use crate::quadrature::integrate_unit_square;

/// Largest accepted tail fluctuation of a point rotation number.
pub const POINT_ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationValue {
    pub value: f64,
    pub error_estimate: f64,
    /// Closed form or orbit winding; `error_estimate` is then zero.
    pub exact: bool,
}

impl RotationValue {
    pub fn exact(value: f64) -> Self {
        RotationValue {
            value,
            error_estimate: 0.0,
            exact: true,
        }
    }

    fn estimated(value: f64, error_estimate: f64) -> Self {
        RotationValue {
            value,
            error_estimate,
            exact: false,
        }
    }
}

/// One step of the lift, also reporting whether some disk twist acted
/// non-trivially.
fn step_tracking_support(factors: &[&MapExpr], z: LiftedPoint) -> (LiftedPoint, bool) {
    let mut z = z;
    let mut touched = false;
    for leaf in factors {
        if let MapExpr::LocalDiskTwist(d) = leaf {
            let (_, u, v) = d.chart(z);
            touched |= d.inside(u, v) && d.profile().amplitude() != 0.0;
        }
        z = leaf.eval_lift(z);
    }
    (z, touched)
}

/// Displacement of one step when no disk twist acts: the rigid and twist
/// parts only, which depend on `y` alone.
fn rigid_displacement(factors: &[&MapExpr], y: f64) -> f64 {
    factors
        .iter()
        .map(|leaf| match leaf {
            MapExpr::RigidRotation { a } => *a,
            MapExpr::Twist { profile } => profile.phi(y),
            _ => 0.0,
        })
        .sum()
}

/// `lim (F̃ⁿ(p).x − p.x) / n`.
///
/// If the orbit never enters the support of a disk twist, `y` is invariant
/// and the answer is the closed-form per-step displacement. Otherwise the
/// error estimate is the spread of the averages at `n/2`, `3n/4` and `n`.
pub fn rotation_number_point(m: &MapExpr, p: AnnulusPoint, n_iter: u64) -> Result<RotationValue> {
    if n_iter < MIN_BIRKHOFF_ITERATIONS {
        return Err(Error::invalid(format!(
            "rotation numbers need at least {MIN_BIRKHOFF_ITERATIONS} iterations, got {n_iter}"
        )));
    }
    let factors = m.factors();
    let start = p.lifted();
    let checkpoints = [n_iter / 2, 3 * n_iter / 4, n_iter];
    let mut averages = [0.0; 3];
    let mut next = 0;
    let mut z = start;
    let mut touched = false;
    for j in 1..=n_iter {
        let (image, t) = step_tracking_support(&factors, z);
        touched |= t;
        z = image;
        if j == checkpoints[next] {
            averages[next] = (z.x - start.x) / j as f64;
            next += 1;
        }
    }
    if !touched {
        return Ok(RotationValue::exact(rigid_displacement(&factors, p.y())));
    }
    let hi = averages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = averages.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    if spread > POINT_ROTATION_TOLERANCE {
        return Err(Error::non_convergent(
            "point rotation number",
            averages[2],
            spread,
            POINT_ROTATION_TOLERANCE,
        ));
    }
    Ok(RotationValue::estimated(averages[2], spread))
}

/// Poincaré rotation number of a circle lift by displacement averaging from
/// `x = 0`. For any circle homeomorphism the error is below `1/n`.
pub fn circle_rotation_number(circle: &CircleMap, n_iter: u64) -> RotationValue {
    let n = n_iter.max(1);
    let mut x = 0.0;
    for _ in 0..n {
        x = circle.eval_lift(x);
    }
    RotationValue::estimated(x / n as f64, 1.0 / n as f64)
}

/// Rotation number of a boundary circle. Built-in maps restrict to rigid
/// rotations there, so the value is exact; `n_iter` is used only when no
/// closed form is available.
pub fn boundary_rotation_number(m: &MapExpr, which: Boundary, n_iter: u64) -> RotationValue {
    let circle = m.boundary_circle_map(which);
    match circle.rigid_shift() {
        Some(shift) => RotationValue::exact(shift),
        None => circle_rotation_number(&circle, n_iter),
    }
}

/// Mean rotation number `∫ (F̃(p).x − p.x) dx dy` of the area measure,
/// computed from a single step by invariance of the area.
pub fn area_rotation(m: &MapExpr, settings: &NumericalSettings) -> Result<RotationValue> {
    let factors = m.factors();
    if factors.iter().all(|f| matches!(f, MapExpr::RigidRotation { .. })) {
        return Ok(RotationValue::exact(rigid_displacement(&factors, 0.0)));
    }
    let f = |x: f64, y: f64| m.displacement(AnnulusPoint::from_raw(x, y));
    let est = integrate_unit_square(&f, &settings.cubature)?;
    Ok(RotationValue::estimated(est.value, est.error))
}

/// `ρ(μ)`.
pub fn measure_rotation(m: &MapExpr, mu: &MeasureSpec, settings: &NumericalSettings) -> Result<RotationValue> {
    match mu {
        MeasureSpec::BoundaryLower => Ok(boundary_rotation_number(m, Boundary::Lower, settings.birkhoff.n_iter)),
        MeasureSpec::BoundaryUpper => Ok(boundary_rotation_number(m, Boundary::Upper, settings.birkhoff.n_iter)),
        MeasureSpec::AreaMeasure => area_rotation(m, settings),
        MeasureSpec::OrbitMeasure(orbit) => Ok(RotationValue::exact(orbit.p as f64 / orbit.q as f64)),
        MeasureSpec::Empirical { seed, n_iter } => rotation_number_point(m, *seed, *n_iter),
    }
}

/// The terms of `ρ(ω) = 𝓐(μ₀) − 𝓐(μ₁) + ρ₁`, with actions for `y dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryIdentity {
    pub mean_rotation: RotationValue,
    pub lower_action: crate::action::ActionValue,
    pub upper_action: crate::action::ActionValue,
    pub upper_rotation: RotationValue,
}

impl BoundaryIdentity {
    pub fn right_hand_side(&self) -> f64 {
        self.lower_action.value - self.upper_action.value + self.upper_rotation.value
    }

    pub fn defect(&self) -> f64 {
        (self.mean_rotation.value - self.right_hand_side()).abs()
    }

    pub fn error_estimate(&self) -> f64 {
        self.mean_rotation.error_estimate
            + self.lower_action.error_estimate
            + self.upper_action.error_estimate
            + self.upper_rotation.error_estimate
    }
}

pub fn boundary_identity(m: &MapExpr, settings: &NumericalSettings) -> Result<BoundaryIdentity> {
    let ctx = ActionContext::canonical();
    Ok(BoundaryIdentity {
        mean_rotation: area_rotation(m, settings)?,
        lower_action: measure_action(m, &ctx, &MeasureSpec::BoundaryLower, settings)?,
        upper_action: measure_action(m, &ctx, &MeasureSpec::BoundaryUpper, settings)?,
        upper_rotation: boundary_rotation_number(m, Boundary::Upper, settings.birkhoff.n_iter),
    })
}

/// `|ρ(ω) − (𝓐(μ₀) − 𝓐(μ₁) + ρ₁)|`.
pub fn lemma_boundary_identity_defect(m: &MapExpr, settings: &NumericalSettings) -> Result<f64> {
    boundary_identity(m, settings).map(|b| b.defect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::BirkhoffSpec;
    use crate::maps::RadialProfile;

    fn pt(x: f64, y: f64) -> AnnulusPoint {
        AnnulusPoint::new(x, y).unwrap()
    }

    fn settings() -> NumericalSettings {
        NumericalSettings {
            birkhoff: BirkhoffSpec {
                n_iter: 10_000,
                tolerance: 1e-6,
            },
            ..Default::default()
        }
    }

    fn disk(c: f64) -> MapExpr {
        MapExpr::local_disk_twist(pt(0.5, 0.5), 0.3, RadialProfile::poly_bump(c).unwrap()).unwrap()
    }

    #[test]
    fn point_rotation_examples() {
        let r = rotation_number_point(&MapExpr::rotation(0.381966).unwrap(), pt(0.4, 0.2), 1000).unwrap();
        assert_eq!(r, RotationValue::exact(0.381966));
        let t = rotation_number_point(&MapExpr::linear_twist(), pt(0.2, 0.75), 1000).unwrap();
        assert_eq!(t, RotationValue::exact(0.75));
        let d = rotation_number_point(&disk(3.0), pt(0.9, 0.9), 1000).unwrap();
        assert_eq!(d, RotationValue::exact(0.0));
        assert!(rotation_number_point(&disk(3.0), pt(0.9, 0.9), 10).is_err());
    }

    #[test]
    fn boundary_rotation_examples() {
        let t = MapExpr::linear_twist();
        assert_eq!(boundary_rotation_number(&t, Boundary::Lower, 100).value, 0.0);
        assert_eq!(boundary_rotation_number(&t, Boundary::Upper, 100).value, 1.0);
        let comp = MapExpr::compose(MapExpr::rotation(0.3).unwrap(), disk(2.0));
        for b in [Boundary::Lower, Boundary::Upper] {
            assert_eq!(boundary_rotation_number(&comp, b, 100).value, 0.3);
        }
        let circle = t.boundary_circle_map(Boundary::Upper);
        let approx = circle_rotation_number(&circle, 1000);
        assert!((approx.value - 1.0).abs() <= approx.error_estimate);
    }

    #[test]
    fn measure_rotation_examples() {
        let s = settings();
        let t = measure_rotation(&MapExpr::linear_twist(), &MeasureSpec::AreaMeasure, &s).unwrap();
        assert!((t.value - 0.5).abs() < 1e-14);
        let r = measure_rotation(&MapExpr::rotation(0.27).unwrap(), &MeasureSpec::AreaMeasure, &s).unwrap();
        assert_eq!(r, RotationValue::exact(0.27));
    }

    #[test]
    fn boundary_identity_examples() {
        let s = settings();
        assert!(lemma_boundary_identity_defect(&MapExpr::linear_twist(), &s).unwrap() < 1e-8);
        assert_eq!(lemma_boundary_identity_defect(&MapExpr::rotation(0.4).unwrap(), &s).unwrap(), 0.0);
        let comp = MapExpr::compose(MapExpr::rotation(0.4).unwrap(), disk(5.0));
        let b = boundary_identity(&comp, &s).unwrap();
        assert!(b.defect() < 1e-6, "{b:?}");
        assert!((b.mean_rotation.value - 0.4).abs() < 1e-8);
    }
}
