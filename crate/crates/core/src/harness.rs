//! Verification driver: action gaps, period thresholds, orbit census and the
//! local-perturbation pipeline for an irrational rotation.
//!
//! The underlying theorem asserts existence; a search that comes back empty
//! is not a counterexample, and failing verdicts say so.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{
    additivity_defect, calabi, measure_action, ActionContext, ActionValue, MeasureSpec, NumericalSettings,
};
use crate::error::{Error, Result};
use crate::maps::{Boundary, MapExpr, RadialProfile};
use crate::orbits::{dedup_orbits, search_lattice, sort_orbits, PeriodicOrbit, SearchConfig};
use crate::phase_space::{AnnulusPoint, LiftedPoint};
use crate::rotation::{area_rotation, boundary_rotation_number, measure_rotation, RotationValue};

/// Factor by which the gap must exceed its error bar before the threshold
/// is trusted.
pub const GAP_CONFIDENCE: f64 = 10.0;
/// Widening of the action bracket, in units of the error estimates.
pub const BRACKET_WIDENING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionGap {
    pub gap: f64,
    pub error: f64,
    pub first: ActionValue,
    pub second: ActionValue,
}

/// `|𝓐(μ₁) − 𝓐(μ₂)|` for `y dx`.
pub fn action_gap(m: &MapExpr, mu1: &MeasureSpec, mu2: &MeasureSpec, settings: &NumericalSettings) -> Result<ActionGap> {
    let ctx = ActionContext::canonical();
    let first = measure_action(m, &ctx, mu1, settings)?;
    let second = if mu1 == mu2 {
        first
    } else {
        measure_action(m, &ctx, mu2, settings)?
    };
    Ok(ActionGap {
        gap: (first.value - second.value).abs(),
        error: first.error_estimate + second.error_estimate,
        first,
        second,
    })
}

/// Smallest integer strictly greater than `1/Δ`.
pub fn q_threshold(gap: f64) -> Result<u32> {
    if !(gap > 0.0) {
        return Err(Error::DegenerateGap { gap, error: 0.0 });
    }
    let t = (1.0 / gap).floor() + 1.0;
    if t > u32::MAX as f64 {
        return Err(Error::invalid(format!("period threshold for gap {gap:e} is out of range")));
    }
    Ok(t as u32)
}

/// Estimated rotation-set hull: the boundary rotation numbers and the mean
/// rotation of the area measure.
pub fn rotation_hull(m: &MapExpr, settings: &NumericalSettings) -> Result<(f64, f64)> {
    let n = settings.birkhoff.n_iter;
    let values = [
        boundary_rotation_number(m, Boundary::Lower, n).value,
        boundary_rotation_number(m, Boundary::Upper, n).value,
        area_rotation(m, settings)?.value,
    ];
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// All `p` with `p/q` strictly inside `(lo − 1/q, hi + 1/q)` for the given
/// hull.
pub fn windings_in_window(lo: f64, hi: f64, q: u32) -> Vec<i64> {
    let qf = q as f64;
    let first = (qf * lo - 1.0).floor() as i64 + 1;
    let last = (qf * hi + 1.0).ceil() as i64 - 1;
    (first..=last).collect()
}

pub fn candidate_windings(m: &MapExpr, q: u32, settings: &NumericalSettings) -> Result<Vec<i64>> {
    if q == 0 {
        return Err(Error::invalid("period must be positive"));
    }
    let (lo, hi) = rotation_hull(m, settings)?;
    Ok(windings_in_window(lo, hi, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub label: String,
    pub action: ActionValue,
    pub rotation: RotationValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCensus {
    pub q: u32,
    pub windings: Vec<i64>,
    /// Lattice size of the last search pass.
    pub lattice: usize,
    pub orbits: Vec<PeriodicOrbit>,
    /// Orbits whose action lies in the widened bracket of the two measure
    /// actions; only these count toward a pass.
    pub bracketed: usize,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub map: String,
    pub measures: [MeasureSummary; 2],
    pub gap: f64,
    pub gap_error: f64,
    pub q_threshold: u32,
    pub q_max: u32,
    pub action_bracket: (f64, f64),
    pub census: Vec<PeriodCensus>,
}

impl VerificationReport {
    pub fn verdict_for(&self, q: u32) -> Option<Verdict> {
        self.census.iter().find(|c| c.q == q).map(|c| c.verdict)
    }

    pub fn any_pass(&self) -> bool {
        self.census.iter().any(|c| c.verdict == Verdict::Pass)
    }

    pub fn any_fail(&self) -> bool {
        self.census.iter().any(|c| c.verdict == Verdict::Fail)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.census.iter().any(|c| c.verdict == Verdict::Inconclusive)
    }
}

fn is_prime(q: u32) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// Union of the `(q, p)` searches over `windings`, doubling the lattice while
/// fewer than `wanted` orbits turn up.
pub fn census(m: &MapExpr, q: u32, windings: &[i64], cfg: &SearchConfig, wanted: usize) -> Result<(Vec<PeriodicOrbit>, usize)> {
    cfg.validate()?;
    let mut n = cfg.grid;
    loop {
        let mut all = Vec::new();
        for &p in windings {
            all.extend(search_lattice(m, q, p, n, cfg));
        }
        let mut orbits = dedup_orbits(all, cfg.dedup_tolerance);
        sort_orbits(&mut orbits);
        if orbits.len() >= wanted || n >= cfg.max_grid {
            return Ok((orbits, n));
        }
        n = (2 * n).min(cfg.max_grid);
    }
}

/// Runs the census for every `q` in `[q_threshold, q_max]`.
pub fn verify_theorem(
    m: &MapExpr,
    mu1: &MeasureSpec,
    mu2: &MeasureSpec,
    q_max: u32,
    cfg: &SearchConfig,
    settings: &NumericalSettings,
) -> Result<VerificationReport> {
    let gap = action_gap(m, mu1, mu2, settings)?;
    if !(gap.gap > gap.error) {
        return Err(Error::DegenerateGap {
            gap: gap.gap,
            error: gap.error,
        });
    }
    let threshold = q_threshold(gap.gap)?;
    if q_max < threshold {
        return Err(Error::invalid(format!(
            "q_max = {q_max} is below the period threshold {threshold}"
        )));
    }
    let trusted = gap.gap > GAP_CONFIDENCE * gap.error;
    let summaries = [
        MeasureSummary {
            label: mu1.label(),
            action: gap.first,
            rotation: measure_rotation(m, mu1, settings)?,
        },
        MeasureSummary {
            label: mu2.label(),
            action: gap.second,
            rotation: measure_rotation(m, mu2, settings)?,
        },
    ];
    let widen = BRACKET_WIDENING * gap.error;
    let bracket = (
        gap.first.value.min(gap.second.value) - widen,
        gap.first.value.max(gap.second.value) + widen,
    );
    let (lo, hi) = rotation_hull(m, settings)?;
    let mut census_rows = Vec::new();
    for q in threshold..=q_max {
        let windings = windings_in_window(lo, hi, q);
        let (orbits, lattice) = census(m, q, &windings, cfg, 2)?;
        let in_bracket: Vec<&PeriodicOrbit> = orbits
            .iter()
            .filter(|o| o.is_certified() && o.action >= bracket.0 && o.action <= bracket.1)
            .collect();
        let prime_ok = !is_prime(q) || in_bracket.iter().filter(|o| o.least_period == q).count() >= 2;
        let (verdict, note) = if !trusted {
            (
                Verdict::Inconclusive,
                format!("gap {:e} is within {GAP_CONFIDENCE}x its error estimate {:e}", gap.gap, gap.error),
            )
        } else if in_bracket.len() >= 2 && prime_ok {
            (Verdict::Pass, format!("{} distinct certified orbits", in_bracket.len()))
        } else if orbits.len() >= 2 && in_bracket.len() < 2 {
            (
                Verdict::Inconclusive,
                format!(
                    "{} orbits found but only {} have actions inside [{:.6}, {:.6}]",
                    orbits.len(),
                    in_bracket.len(),
                    bracket.0,
                    bracket.1
                ),
            )
        } else if in_bracket.len() >= 2 {
            (
                Verdict::Fail,
                format!("fewer than two orbits of least period {q}; search exhausted (not a counterexample)"),
            )
        } else {
            (
                Verdict::Fail,
                format!("{} orbits at lattice {lattice}; search exhausted (not a counterexample)", orbits.len()),
            )
        };
        census_rows.push(PeriodCensus {
            q,
            windings,
            lattice,
            bracketed: in_bracket.len(),
            orbits,
            verdict,
            note,
        });
    }
    Ok(VerificationReport {
        map: m.to_string(),
        measures: summaries,
        gap: gap.gap,
        gap_error: gap.error,
        q_threshold: threshold,
        q_max,
        action_bracket: bracket,
        census: census_rows,
    })
}

/// Checks of the local-perturbation pipeline together with its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub calabi_perturbed: ActionValue,
    pub calabi_bump: ActionValue,
    pub calabi_oracle: f64,
    pub additivity_defect: f64,
    pub boundary_actions: (ActionValue, ActionValue),
    pub verification: VerificationReport,
}

/// True if `a` is within `tol` of some `p/q` with `q ≤ max_den`.
pub fn near_rational(a: f64, max_den: u32, tol: f64) -> bool {
    (1..=max_den).any(|q| {
        let p = (a * q as f64).round();
        (a - p / q as f64).abs() < tol
    })
}

/// `f' = R_a ∘ h` with `h` a polynomial-bump disk twist; verified against the
/// area measure and the lower boundary measure for `q` up to the threshold
/// plus `extra_periods`.
pub fn example_local_perturbation(
    a: f64,
    center: AnnulusPoint,
    radius: f64,
    c: f64,
    extra_periods: u32,
    cfg: &SearchConfig,
    settings: &NumericalSettings,
) -> Result<PerturbationReport> {
    let rotation = MapExpr::rotation(a)?;
    let bump = MapExpr::local_disk_twist(center, radius, RadialProfile::poly_bump(c)?)?;
    let perturbed = MapExpr::compose(rotation.clone(), bump.clone());
    let ctx = ActionContext::canonical();
    let calabi_perturbed = calabi(&perturbed, &ctx, &settings.cubature)?;
    let calabi_bump = calabi(&bump, &ctx, &settings.cubature)?;
    let defect = additivity_defect(&bump, &rotation, &ctx, &settings.cubature)?;
    let lower = measure_action(&perturbed, &ctx, &MeasureSpec::BoundaryLower, settings)?;
    let upper = measure_action(&perturbed, &ctx, &MeasureSpec::BoundaryUpper, settings)?;
    let gap = calabi_perturbed.value.abs();
    if !(gap > calabi_perturbed.error_estimate) {
        return Err(Error::DegenerateGap {
            gap,
            error: calabi_perturbed.error_estimate,
        });
    }
    let q_max = q_threshold(gap)? + extra_periods;
    if near_rational(a, q_max, 1e-6) {
        return Err(Error::invalid(format!(
            "rotation {a} is within 1e-6 of a rational with denominator <= {q_max}"
        )));
    }
    let verification = verify_theorem(
        &perturbed,
        &MeasureSpec::AreaMeasure,
        &MeasureSpec::BoundaryLower,
        q_max,
        cfg,
        settings,
    )?;
    Ok(PerturbationReport {
        calabi_perturbed,
        calabi_bump,
        calabi_oracle: -std::f64::consts::PI * c * radius.powi(4) / 12.0,
        additivity_defect: defect,
        boundary_actions: (lower, upper),
        verification,
    })
}

/// Brute-force scan of `|F̃^q(z) − z − (p, 0)|` on the centres of an
/// `n × n` grid, keeping local minima (over the eight neighbours) below
/// `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScan {
    pub n: usize,
    pub q: u32,
    pub p: i64,
    pub minima: Vec<(LiftedPoint, f64)>,
}

pub fn grid_scan(m: &MapExpr, q: u32, p: i64, n: usize, threshold: f64) -> GridScan {
    let h = 1.0 / n as f64;
    let centre = |i: usize, j: usize| LiftedPoint {
        x: (i as f64 + 0.5) * h,
        y: (j as f64 + 0.5) * h,
    };
    let field: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let z = centre(i, j);
                    let mut w = z;
                    for _ in 0..q {
                        w = m.eval_lift(w);
                    }
                    (w.x - z.x - p as f64).abs().max((w.y - z.y).abs())
                })
                .collect()
        })
        .collect();
    let minima: Vec<Vec<(LiftedPoint, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut found = Vec::new();
            for j in 0..n {
                let v = field[i][j];
                if v >= threshold {
                    continue;
                }
                let lower_neighbour = [n - 1, 0, 1].iter().any(|&di| {
                    [-1i64, 0, 1].iter().any(|&dj| {
                        let jj = j as i64 + dj;
                        !(di == 0 && dj == 0) && jj >= 0 && jj < n as i64 && field[(i + di) % n][jj as usize] < v
                    })
                });
                if !lower_neighbour {
                    found.push((centre(i, j), v));
                }
            }
            found
        })
        .collect();
    GridScan {
        n,
        q,
        p,
        minima: minima.into_iter().flatten().collect(),
    }
}

impl GridScan {
    /// Polishes every retained minimum and returns the distinct certified
    /// orbits in canonical order.
    pub fn orbits(&self, m: &MapExpr, cfg: &SearchConfig) -> Vec<PeriodicOrbit> {
        let solved: Vec<Option<PeriodicOrbit>> = self
            .minima
            .par_iter()
            .map(|(z, _)| crate::orbits::solve_from(m, self.q, self.p, *z, cfg))
            .collect();
        let mut orbits = dedup_orbits(solved.into_iter().flatten().collect(), cfg.dedup_tolerance);
        sort_orbits(&mut orbits);
        orbits
    }
}
