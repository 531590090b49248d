use calabi_core::action::ActionContext;
use calabi_core::orbits::dedup_orbits;
use calabi_core::rotation::area_rotation;
use calabi_core::{
    calabi, find_periodic_orbits, line_integral, measure_action, AnnulusPoint, CubatureSpec, LiftedPoint, MapExpr,
    MeasureSpec, NumericalSettings, OneForm, PolylinePath, QuadratureSpec, RadialProfile, SearchConfig, TwistProfile,
};
use proptest::prelude::*;

fn primitive() -> impl Strategy<Value = MapExpr> {
    prop_oneof![
        (0.0..1.0f64).prop_map(|a| MapExpr::rotation(a).unwrap()),
        Just(MapExpr::linear_twist()),
        (-0.5..0.5f64).prop_map(|a| MapExpr::twist(TwistProfile::bump(a).unwrap())),
        (0.0..1.0f64, 0.35..0.65f64, 0.2..0.9f64, 0.0..5.0f64).prop_map(|(cx, cy, frac, c)| {
            let radius = frac * cy.min(1.0 - cy);
            MapExpr::local_disk_twist(AnnulusPoint::new(cx, cy).unwrap(), radius, RadialProfile::poly_bump(c).unwrap())
                .unwrap()
        }),
    ]
}

fn composition() -> impl Strategy<Value = MapExpr> {
    prop::collection::vec(primitive(), 1..=3).prop_map(|mut parts| {
        let mut m = parts.pop().unwrap();
        while let Some(outer) = parts.pop() {
            m = MapExpr::compose(outer, m);
        }
        m
    })
}

fn point() -> impl Strategy<Value = LiftedPoint> {
    (-2.0..2.0f64, 0.0..=1.0f64).prop_map(|(x, y)| LiftedPoint::new(x, y).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lift_commutes_with_deck_translation(m in composition(), z in point(), n in -3i64..=3) {
        let a = m.eval_lift(z.shifted(n));
        let b = m.eval_lift(z).shifted(n);
        prop_assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    }

    #[test]
    fn iterate_matches_repeated_composition(m in primitive(), z in point(), k in 1u32..=4) {
        let mut composed = m.clone();
        for _ in 1..k {
            composed = MapExpr::compose(m.clone(), composed);
        }
        let a = MapExpr::iterate(m, k).unwrap().eval_lift(z);
        let b = composed.eval_lift(z);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn line_integrals_reverse_and_concatenate(
        a in point(), b in point(), c in point(), shift in -2.0..2.0f64,
    ) {
        let form = OneForm::ShiftedBeta(shift);
        let quad = QuadratureSpec::default();
        let ab = PolylinePath::straight(a, b, 0.1).unwrap();
        let bc = PolylinePath::straight(b, c, 0.1).unwrap();
        let i_ab = line_integral(&form, &ab, &quad).unwrap();
        let i_bc = line_integral(&form, &bc, &quad).unwrap();
        let i_ba = line_integral(&form, &ab.reversed(), &quad).unwrap();
        let i_abc = line_integral(&form, &ab.concat(&bc).unwrap(), &quad).unwrap();
        prop_assert!((i_ab + i_ba).abs() < 1e-12);
        prop_assert!((i_abc - i_ab - i_bc).abs() < 1e-12);
    }

    #[test]
    fn pullback_of_the_area_form_is_the_area_form(m in composition(), z in point()) {
        let det = m.differential(z.projected()).det();
        prop_assert!((det - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mean_action_of_an_iterate_scales(m in primitive(), k in 2u32..=3) {
        let ctx = ActionContext::canonical();
        let one = calabi(&m, &ctx, &CubatureSpec::default()).unwrap();
        let many = calabi(&MapExpr::iterate(m, k).unwrap(), &ctx, &CubatureSpec::default()).unwrap();
        let tol = 1e-7 + 2.0 * (many.error_estimate + k as f64 * one.error_estimate);
        prop_assert!((many.value - k as f64 * one.value).abs() < tol, "{} vs {}", many.value, one.value);
    }

    #[test]
    fn mean_rotation_of_an_iterate_scales(m in primitive(), k in 2u32..=3) {
        let settings = NumericalSettings::default();
        let one = area_rotation(&m, &settings).unwrap();
        let many = area_rotation(&MapExpr::iterate(m, k).unwrap(), &settings).unwrap();
        prop_assert!((many.value - k as f64 * one.value).abs() < 1e-7);
    }

    #[test]
    fn base_point_moves_every_measure_action_by_one_constant(
        m in composition(), bx in 0.0..1.0f64, by in 0.0..=1.0f64,
    ) {
        let settings = NumericalSettings::default();
        let moved = ActionContext::new(OneForm::CanonicalBeta, AnnulusPoint::new(bx, by).unwrap()).unwrap();
        let canonical = ActionContext::canonical();
        let offsets: Vec<f64> = [MeasureSpec::BoundaryLower, MeasureSpec::BoundaryUpper, MeasureSpec::AreaMeasure]
            .iter()
            .map(|mu| {
                measure_action(&m, &moved, mu, &settings).unwrap().value
                    - measure_action(&m, &canonical, mu, &settings).unwrap().value
            })
            .collect();
        prop_assert!((offsets[0] - offsets[1]).abs() < 1e-8);
        prop_assert!((offsets[0] - offsets[2]).abs() < 1e-7);
    }
}

#[test]
fn dedup_is_idempotent_and_deterministic_across_pools() {
    let m = MapExpr::compose(
        MapExpr::rotation(0.6180339887).unwrap(),
        MapExpr::local_disk_twist(AnnulusPoint::new(0.5, 0.5).unwrap(), 0.35, RadialProfile::poly_bump(50.0).unwrap())
            .unwrap(),
    );
    let cfg = SearchConfig {
        grid: 24,
        ..SearchConfig::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| find_periodic_orbits(&m, 6, 4, &cfg).unwrap())
    };
    let single = run(1);
    let many = run(4);
    assert!(!single.is_empty());
    assert_eq!(single, many);
    let again = dedup_orbits(single.clone(), cfg.dedup_tolerance);
    assert_eq!(again.len(), single.len());
    let mut doubled = single.clone();
    doubled.extend(single.iter().cloned());
    assert_eq!(dedup_orbits(doubled, cfg.dedup_tolerance).len(), single.len());
}
