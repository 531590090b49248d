//! Randomised property checks run by `calabi audit`.

use calabi_core::action::{path_independence_defect, shifted_action_difference, ActionContext, MeasureSpec, NumericalSettings};
use calabi_core::maps::{MapExpr, RadialProfile, TwistProfile};
use calabi_core::phase_space::{AnnulusPoint, LiftedPoint, PolylinePath};
use calabi_core::{additivity_defect, Result};
use rand::Rng;
use serde::Serialize;

/// One family of each built-in kind, with fixed parameters.
pub fn families() -> Vec<(&'static str, MapExpr)> {
    let disk = MapExpr::local_disk_twist(
        AnnulusPoint::new(0.5, 0.5).unwrap(),
        0.3,
        RadialProfile::poly_bump(3.0).unwrap(),
    )
    .unwrap();
    let tabulated = TwistProfile::tabulated((0..=16).map(|i| 0.4 * (i as f64 / 16.0).powi(2)).collect()).unwrap();
    vec![
        ("rigid_rotation", MapExpr::rotation(0.3819660113).unwrap()),
        ("twist_linear", MapExpr::linear_twist()),
        ("twist_bump", MapExpr::twist(TwistProfile::bump(0.4).unwrap())),
        ("twist_tabulated", MapExpr::twist(tabulated)),
        ("local_disk_twist", disk.clone()),
        ("compose", MapExpr::compose(MapExpr::rotation(0.25).unwrap(), disk.clone())),
        ("iterate", MapExpr::iterate(disk, 3).unwrap()),
    ]
}

/// A random primitive map.
pub fn random_primitive<R: Rng>(rng: &mut R) -> MapExpr {
    match rng.gen_range(0..4) {
        0 => MapExpr::rotation(rng.gen_range(0.0..1.0)).unwrap(),
        1 => MapExpr::linear_twist(),
        2 => MapExpr::twist(TwistProfile::bump(rng.gen_range(-0.5..0.5)).unwrap()),
        _ => {
            let cy: f64 = rng.gen_range(0.35..0.65);
            let room = cy.min(1.0 - cy);
            let radius = rng.gen_range(0.1..0.9 * room);
            let center = AnnulusPoint::new(rng.gen_range(0.0..1.0), cy).unwrap();
            MapExpr::local_disk_twist(center, radius, RadialProfile::poly_bump(rng.gen_range(0.0..5.0)).unwrap())
                .unwrap()
        }
    }
}

/// A composition of one to three random primitives.
pub fn random_composition<R: Rng>(rng: &mut R) -> MapExpr {
    let n = rng.gen_range(1..=3);
    let mut m = random_primitive(rng);
    for _ in 1..n {
        m = MapExpr::compose(random_primitive(rng), m);
    }
    m
}

/// Base point, a random corner, and an endpoint, in the strip.
pub fn random_dog_leg<R: Rng>(rng: &mut R, ctx: &ActionContext) -> (AnnulusPoint, PolylinePath) {
    let base = ctx.base_point().lifted();
    let end = AnnulusPoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)).unwrap();
    let corner = LiftedPoint::new(rng.gen_range(-0.5..1.5), rng.gen_range(0.0..1.0)).unwrap();
    let path = PolylinePath::new(vec![base, corner, end.lifted()], 0.05).unwrap();
    (end, path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AuditCheck {
    fn new(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        AuditCheck {
            name: name.to_string(),
            cases,
            worst,
            tolerance,
            passed: worst < tolerance,
        }
    }
}

pub fn run_audit<R: Rng>(rng: &mut R, settings: &NumericalSettings) -> Result<Vec<AuditCheck>> {
    let mut checks = Vec::new();

    let fams = families();
    let mut worst: f64 = 0.0;
    for (_, m) in &fams {
        worst = worst.max(m.area_defect(64)?);
    }
    checks.push(AuditCheck::new("area_preservation", fams.len(), worst, 1e-9));

    let ctx = ActionContext::canonical();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = random_composition(rng);
        let (end, path) = random_dog_leg(rng, &ctx);
        worst = worst.max(path_independence_defect(&m, &ctx, end, &path, &settings.line)?);
    }
    checks.push(AuditCheck::new("path_independence", 20, worst, 1e-8));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m1 = random_primitive(rng);
        let m2 = random_primitive(rng);
        worst = worst.max(additivity_defect(&m1, &m2, &ctx, &settings.cubature)?);
    }
    checks.push(AuditCheck::new("additivity", 10, worst, 1e-8));

    let shifts = [-1.0, -0.3, 0.7, 2.0];
    let rotation = MapExpr::rotation(rng.gen_range(0.0..1.0))?;
    let mut worst: f64 = 0.0;
    for &c in &shifts {
        let d = shifted_action_difference(&rotation, &MeasureSpec::BoundaryLower, &MeasureSpec::BoundaryUpper, c, settings)?;
        worst = worst.max(d.change().abs());
    }
    checks.push(AuditCheck::new("shift_invariance_equal_rotation", shifts.len(), worst, 1e-6));

    let twist = MapExpr::linear_twist();
    let mut worst: f64 = 0.0;
    for &c in &shifts {
        let d = shifted_action_difference(&twist, &MeasureSpec::BoundaryUpper, &MeasureSpec::BoundaryLower, c, settings)?;
        worst = worst.max((d.change() - c).abs());
    }
    checks.push(AuditCheck::new("shift_change_linear_twist", shifts.len(), worst, 1e-6));

    Ok(checks)
}
