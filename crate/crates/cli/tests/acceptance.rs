//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with timings.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use calabi_cli::audit::{families, random_composition, random_dog_leg, random_primitive};
use calabi_core::action::disk::{poly_bump_mean_action, UnitDiskTwist};
use calabi_core::action::{
    action_increment_along, measure_integral, path_independence_defect, straight_path_from_base,
};
use calabi_core::harness::{action_gap, candidate_windings, grid_scan, Verdict};
use calabi_core::orbits::{orbit_distance, CERTIFIED_RESIDUAL};
use calabi_core::rotation::lemma_boundary_identity_defect;
use calabi_core::{
    action_function, additivity_defect, calabi, example_local_perturbation, find_periodic_orbits, measure_action,
    q_threshold, refine_orbit, shifted_action_difference, verify_theorem, ActionContext, AnnulusPoint, Error,
    MapExpr, MeasureSpec, NumericalSettings, RadialProfile, SearchConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let m = MapExpr::linear_twist();
    let ctx = ActionContext::canonical();
    let settings = NumericalSettings::default();
    let g0 = action_function(&m, &ctx, ctx.base_point());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = AnnulusPoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)).map_err(err)?;
        let exact = p.y() * p.y() / 2.0;
        let path = straight_path_from_base(&ctx, p, settings.line.refinement).ok_or("no straight path")?;
        let integrated = g0 + action_increment_along(&m, &ctx, &path, &settings.line).map_err(err)?;
        worst = worst
            .max((action_function(&m, &ctx, p) - exact).abs())
            .max((integrated - exact).abs());
    }
    check(worst < 1e-8, format!("max |g - y²/2| = {worst:e}"))?;
    let c = calabi(&m, &ctx, &settings.cubature).map_err(err)?;
    check((c.value - 1.0 / 6.0).abs() < 1e-8, format!("calabi {}", c.value))?;
    let lower = measure_action(&m, &ctx, &MeasureSpec::BoundaryLower, &settings).map_err(err)?;
    let upper = measure_action(&m, &ctx, &MeasureSpec::BoundaryUpper, &settings).map_err(err)?;
    check(
        lower.value.abs() < 1e-8 && (upper.value - 0.5).abs() < 1e-8,
        format!("boundary actions ({}, {})", lower.value, upper.value),
    )?;
    Ok(format!(
        "max|g - y²/2| {worst:.1e}, calabi {:.12}, boundary ({:.1e}, {:.12})",
        c.value, lower.value, upper.value
    ))
}

fn criterion_2() -> Outcome {
    let settings = NumericalSettings::default();
    let mut worst_disk: f64 = 0.0;
    for c in [0.5, 1.0, 3.0, 10.0] {
        let h = UnitDiskTwist::poly_bump(c).map_err(err)?;
        let mean = h.mean_action(&settings.line, &settings.cubature).map_err(err)?;
        let oracle = poly_bump_mean_action(c);
        check(mean.value > 0.0, format!("mean action {} is not positive for c = {c}", mean.value))?;
        worst_disk = worst_disk.max((mean.value - c / (12.0 * PI)).abs() / oracle);
    }
    check(worst_disk < 1e-6, format!("unit disk relative error {worst_disk:e}"))?;
    let mut worst_annulus: f64 = 0.0;
    for (cx, cy, r, c) in [(0.5, 0.5, 0.35, 50.0), (0.2, 0.4, 0.25, 3.0), (0.9, 0.6, 0.1, 7.5)] {
        let m = MapExpr::local_disk_twist(AnnulusPoint::new(cx, cy).map_err(err)?, r, RadialProfile::poly_bump(c).map_err(err)?)
            .map_err(err)?;
        let value = calabi(&m, &ActionContext::canonical(), &settings.cubature).map_err(err)?.value;
        let oracle = PI * c * r.powi(4) / 12.0;
        worst_annulus = worst_annulus.max((value.abs() - oracle).abs() / oracle);
    }
    check(worst_annulus < 1e-6, format!("annulus disk twist relative error {worst_annulus:e}"))?;
    Ok(format!("unit disk rel err {worst_disk:.1e} (positive), annulus |calabi| rel err {worst_annulus:.1e}"))
}

fn criterion_3() -> Outcome {
    let settings = NumericalSettings::default();
    let mut maps = vec![MapExpr::linear_twist(), MapExpr::rotation(0.3819660113).map_err(err)?];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    maps.extend((0..20).map(|_| random_composition(&mut rng)));
    let mut worst: f64 = 0.0;
    for m in &maps {
        let d = lemma_boundary_identity_defect(m, &settings).map_err(err)?;
        check(d < 1e-6, format!("defect {d:e} for {m}"))?;
        worst = worst.max(d);
    }
    Ok(format!("{} maps, max defect {worst:.1e}", maps.len()))
}

fn criterion_4() -> Outcome {
    let settings = NumericalSettings::default();
    let ctx = ActionContext::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (m1, m2) = (random_primitive(&mut rng), random_primitive(&mut rng));
        let d = additivity_defect(&m1, &m2, &ctx, &settings.cubature).map_err(err)?;
        check(d < 1e-8, format!("defect {d:e} for {m2} o {m1}"))?;
        worst = worst.max(d);
    }
    let h = MapExpr::local_disk_twist(AnnulusPoint::new(0.5, 0.5).map_err(err)?, 0.35, RadialProfile::poly_bump(50.0).map_err(err)?)
        .map_err(err)?;
    let f = MapExpr::rotation(0.6180339887).map_err(err)?;
    let composite = calabi(&MapExpr::compose(f.clone(), h.clone()), &ctx, &settings.cubature).map_err(err)?;
    let bump = calabi(&h, &ctx, &settings.cubature).map_err(err)?;
    let rotation_part = calabi(&f, &ctx, &settings.cubature).map_err(err)?;
    let d = (composite.value - bump.value).abs();
    check(rotation_part.value == 0.0, format!("rotation calabi {}", rotation_part.value))?;
    check(d < 1e-8, format!("|calabi(f∘h) - calabi(h)| = {d:e}"))?;
    Ok(format!("10 random pairs, max defect {worst:.1e}; |calabi(f∘h) - calabi(h)| {d:.1e}"))
}

fn criterion_5() -> Outcome {
    let settings = NumericalSettings::default();
    let shifts = [-1.0, -0.3, 0.7, 2.0];
    let rotation = MapExpr::rotation(0.3819660113).map_err(err)?;
    let pairs = [
        (MeasureSpec::BoundaryLower, MeasureSpec::BoundaryUpper),
        (MeasureSpec::AreaMeasure, MeasureSpec::BoundaryLower),
    ];
    let mut worst_inv: f64 = 0.0;
    for (mu1, mu2) in &pairs {
        for &c in &shifts {
            let d = shifted_action_difference(&rotation, mu1, mu2, c, &settings).map_err(err)?;
            worst_inv = worst_inv.max(d.change().abs());
        }
    }
    check(worst_inv < 1e-6, format!("shift dependence {worst_inv:e} for equal rotation numbers"))?;
    let twist = MapExpr::linear_twist();
    let mut worst_twist: f64 = 0.0;
    for &c in &shifts {
        let d = shifted_action_difference(&twist, &MeasureSpec::BoundaryUpper, &MeasureSpec::BoundaryLower, c, &settings)
            .map_err(err)?;
        worst_twist = worst_twist.max((d.change() - c).abs());
    }
    check(worst_twist < 1e-6, format!("|shifted - base - c| = {worst_twist:e}"))?;
    Ok(format!("equal-rotation shift defect {worst_inv:.1e}, linear twist |change - c| {worst_twist:.1e}"))
}

fn criterion_6() -> Outcome {
    let cfg = SearchConfig::default();
    let settings = NumericalSettings::default();
    let a = 0.6180339887;
    let c = 50.0;
    let radius = 0.35;
    let center = AnnulusPoint::new(0.5, 0.5).map_err(err)?;
    let report = example_local_perturbation(a, center, radius, c, 2, &cfg, &settings).map_err(err)?;
    let v = &report.verification;
    check((v.gap - 0.20).abs() < 0.01, format!("gap {}", v.gap))?;
    check(v.q_threshold == 6, format!("q_threshold {}", v.q_threshold))?;
    check(
        v.census.iter().map(|c| c.q).collect::<Vec<_>>() == vec![6, 7, 8],
        "census periods are not 6, 7, 8".into(),
    )?;
    let q6 = v.census.iter().find(|c| c.q == 6).ok_or("no q = 6 census")?;
    check(q6.verdict == Verdict::Pass, format!("q = 6 verdict {} ({})", q6.verdict.as_str(), q6.note))?;
    let certified: Vec<_> = q6.orbits.iter().filter(|o| o.is_certified()).collect();
    check(certified.len() >= 2, format!("{} certified orbits at q = 6", certified.len()))?;
    let mut min_sep = f64::INFINITY;
    for (i, x) in certified.iter().enumerate() {
        for y in &certified[i + 1..] {
            min_sep = min_sep.min(orbit_distance(x, y));
        }
    }
    check(min_sep > 1e-6, format!("orbits only {min_sep:e} apart"))?;

    let perturbed = MapExpr::compose(
        MapExpr::rotation(a).map_err(err)?,
        MapExpr::local_disk_twist(center, radius, RadialProfile::poly_bump(c).map_err(err)?).map_err(err)?,
    );
    for census in v.census.iter().filter(|c| c.verdict == Verdict::Pass) {
        for o in &census.orbits {
            let polished = refine_orbit(&perturbed, o, CERTIFIED_RESIDUAL, &cfg).map_err(err)?;
            check(polished.residual < CERTIFIED_RESIDUAL, format!("re-polished residual {:e}", polished.residual))?;
        }
    }

    let mut scan_total = 0;
    let mut matched = 0;
    for &p in &q6.windings {
        let scan = grid_scan(&perturbed, 6, p, 2000, 0.05);
        let scan_orbits = scan.orbits(&perturbed, &cfg);
        scan_total += scan_orbits.iter().filter(|o| o.is_certified()).count();
        matched += q6
            .orbits
            .iter()
            .filter(|o| o.p == p && scan_orbits.iter().any(|s| orbit_distance(o, s) < 1e-6))
            .count();
    }
    check(scan_total >= 2, format!("grid scan found {scan_total} orbits"))?;
    check(matched >= 2, format!("only {matched} search orbits confirmed by the grid scan"))?;
    let verdicts: Vec<_> = v.census.iter().map(|c| format!("q={} {}", c.q, c.verdict.as_str())).collect();
    Ok(format!(
        "gap {:.6}, threshold {}, {}; q=6: {} certified, min separation {min_sep:.1e}, grid scan {scan_total} orbits, {matched}/{} confirmed",
        v.gap,
        v.q_threshold,
        verdicts.join(", "),
        certified.len(),
        q6.orbits.len()
    ))
}

fn criterion_7() -> Outcome {
    let cfg = SearchConfig::default();
    let settings = NumericalSettings::default();
    let m = MapExpr::rotation(0.6180339887).map_err(err)?;
    let gap = action_gap(&m, &MeasureSpec::AreaMeasure, &MeasureSpec::BoundaryLower, &settings).map_err(err)?;
    check(gap.gap == 0.0, format!("gap {}", gap.gap))?;
    check(matches!(q_threshold(gap.gap), Err(Error::DegenerateGap { .. })), "threshold for zero gap".into())?;
    match verify_theorem(&m, &MeasureSpec::AreaMeasure, &MeasureSpec::BoundaryLower, 8, &cfg, &settings) {
        Err(Error::DegenerateGap { .. }) => {}
        other => return Err(format!("verify_theorem returned {other:?}")),
    }
    let mut searched = 0;
    for q in 1..=8 {
        for p in candidate_windings(&m, q, &settings).map_err(err)? {
            let found = find_periodic_orbits(&m, q, p, &cfg).map_err(err)?;
            check(found.is_empty(), format!("{} orbits at ({q}, {p})", found.len()))?;
            searched += 1;
        }
    }
    Ok(format!("gap 0, DegenerateGap, {searched} (q, p) searches empty"))
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_verify(workers: &str, dir: &std::path::Path, tag: &str) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>), String> {
    let report = dir.join(format!("report_{tag}.json"));
    let orbits = dir.join(format!("orbits_{tag}.csv"));
    let plot = dir.join(format!("plot_{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_calabi"))
        .arg("verify")
        .arg("--config")
        .arg(workspace_root().join("configs/example41.json"))
        .args(["--format", "json", "--workers", workers])
        .arg("--out")
        .arg(&report)
        .arg("--csv")
        .arg(&orbits)
        .arg("--plot-csv")
        .arg(&plot)
        .status()
        .map_err(err)?;
    check(status.code() == Some(0), format!("verify exited with {status}"))?;
    let read = |p: &PathBuf| std::fs::read(p).map_err(err);
    Ok((read(&report)?, read(&orbits)?, read(&plot)?))
}

fn criterion_8() -> Outcome {
    let settings = NumericalSettings::default();
    let mut worst_area: f64 = 0.0;
    for (name, m) in families() {
        let d = m.area_defect(64).map_err(err)?;
        check(d < 1e-9, format!("area defect {d:e} for {name}"))?;
        worst_area = worst_area.max(d);
    }

    let ctx = ActionContext::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_path: f64 = 0.0;
    for _ in 0..20 {
        let m = random_composition(&mut rng);
        let (end, path) = random_dog_leg(&mut rng, &ctx);
        let d = path_independence_defect(&m, &ctx, end, &path, &settings.line).map_err(err)?;
        check(d < 1e-8, format!("path defect {d:e} for {m}"))?;
        worst_path = worst_path.max(d);
    }

    // g + u∘f − u integrates to the same value against every invariant measure.
    let u = |p: AnnulusPoint| (2.0 * PI * p.x()).sin() * p.y() * (1.0 - p.y()) + 0.3 * (2.0 * PI * p.x()).cos();
    let mut worst_ratio: f64 = 0.0;
    let maps = [
        MapExpr::linear_twist(),
        MapExpr::compose(MapExpr::rotation(0.25).map_err(err)?, families()[4].1.clone()),
        MapExpr::twist(calabi_core::TwistProfile::bump(0.3).map_err(err)?),
    ];
    let measures = [
        MeasureSpec::AreaMeasure,
        MeasureSpec::BoundaryLower,
        MeasureSpec::BoundaryUpper,
        MeasureSpec::empirical(AnnulusPoint::new(0.1, 0.05).map_err(err)?, 2_000_000).map_err(err)?,
    ];
    for m in &maps {
        let g = calabi_core::ActionFunction::new(m, &ctx);
        for mu in &measures {
            let base = measure_action(m, &ctx, mu, &settings).map_err(err)?;
            let shifted = measure_integral(m, mu, |p| g.eval(p) + u(m.eval(p)) - u(p), &settings).map_err(err)?;
            let diff = (base.value - shifted.value).abs();
            let bound = 2.0 * (base.error_estimate + shifted.error_estimate);
            check(
                diff <= bound,
                format!("{} under {m}: differ by {diff:e}, bound {bound:e}", mu.label()),
            )?;
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(diff / bound);
            }
        }
    }

    let dir = std::env::temp_dir().join(format!("calabi-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    let first = run_verify("1", &dir, "a")?;
    let second = run_verify("4", &dir, "b")?;
    let _ = std::fs::remove_dir_all(&dir);
    check(first.0 == second.0, "verify reports differ between runs".into())?;
    check(first.1 == second.1, "orbit CSVs differ between runs".into())?;
    check(first.2 == second.2, "plot CSVs differ between runs".into())?;

    Ok(format!(
        "area {worst_area:.1e}, path {worst_path:.1e}, cohomologous diff/bound {worst_ratio:.2}, verify byte-identical ({} bytes)",
        first.0.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("1 linear twist closed forms", criterion_1, Duration::from_secs(5)),
        ("2 disk twist mean action", criterion_2, Duration::from_secs(10)),
        ("3 boundary rotation identity", criterion_3, Duration::from_secs(60)),
        ("4 additivity", criterion_4, Duration::from_secs(30)),
        ("5 shifted primitive", criterion_5, Duration::from_secs(30)),
        ("6 local perturbation verification", criterion_6, Duration::from_secs(300)),
        ("7 rigid rotation control", criterion_7, Duration::from_secs(60)),
        ("8 property suites and determinism", criterion_8, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took longer than {budget:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {name}: {} ({:.2}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
