//! Periodic orbits of lifted maps: solutions of `F̃^q(z) = z + (p, 0)`.
//!
//! Seeds on a square lattice are polished by damped Newton iteration with the
//! Jacobian chained through the `q` steps. Converged solutions are grouped
//! into orbits, deduplicated modulo deck transformations and cyclic
//! relabelling, and sorted canonically so the result does not depend on how
//! the seeds were scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{ActionContext, ActionFunction};
use crate::error::{Error, Result};
use crate::maps::{Mat2, MapExpr};
use crate::phase_space::{wrap_turns, LiftedPoint};

/// Residual below which an orbit counts as certified.
pub const CERTIFIED_RESIDUAL: f64 = 1e-9;
/// Smallest singular value of `DF̃^q − I` below which a solution is treated
/// as a member of a continuous family.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Largest seed residual accepted by [`refine_orbit`].
pub const REFINE_SEED_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub q: u32,
    pub p: i64,
    /// `points[j + 1] = F̃(points[j])`; `points[0].x ∈ [0, 1)`.
    pub points: Vec<LiftedPoint>,
    /// `max |F̃^q(z₀) − z₀ − (p, 0)|`.
    pub residual: f64,
    pub least_period: u32,
    /// Orbit average of the action function for `y dx`.
    pub action: f64,
    pub degenerate: bool,
}

impl PeriodicOrbit {
    pub fn is_certified(&self) -> bool {
        self.residual < CERTIFIED_RESIDUAL
    }

    pub fn rotation_number(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Seeds per side of the initial lattice.
    pub grid: usize,
    /// The lattice is doubled up to this size when fewer orbits than
    /// requested are found.
    pub max_grid: usize,
    pub newton_max_steps: u32,
    /// Initial Newton step length; halved on failure to reduce the residual.
    pub newton_damping: f64,
    pub dedup_tolerance: f64,
    /// Seeds lie in `[margin, 1 − margin]` in `y`.
    pub margin: f64,
    /// Cap on the number of representatives kept from a degenerate family.
    pub max_degenerate_representatives: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid: 48,
            max_grid: 384,
            newton_max_steps: 60,
            newton_damping: 1.0,
            dedup_tolerance: 1e-6,
            margin: 1e-3,
            max_degenerate_representatives: 4,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grid > 0
            && self.max_grid >= self.grid
            && self.newton_max_steps > 0
            && self.newton_damping > 0.0
            && self.newton_damping <= 1.0
            && self.dedup_tolerance > 0.0
            && (0.0..0.5).contains(&self.margin)
            && self.max_degenerate_representatives > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid search configuration {self:?}")))
        }
    }
}

/// `F̃^q(z) − z − (p, 0)` and `DF̃^q(z) − I`.
fn residual_map(m: &MapExpr, q: u32, p: i64, z: LiftedPoint) -> ([f64; 2], Mat2) {
    let mut w = z;
    let mut jac = Mat2::IDENTITY;
    for _ in 0..q {
        let (next, j) = m.eval_lift_with_jacobian(w);
        jac = j * jac;
        w = next;
    }
    ([w.x - z.x - p as f64, w.y - z.y], jac.minus_identity())
}

fn max_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Solves `J δ = b`, falling back to the rank-one pseudo-inverse when `J`
/// is numerically singular.
fn newton_step(j: &Mat2, b: [f64; 2]) -> [f64; 2] {
    let [[a, bb], [c, d]] = j.0;
    let det = a * d - bb * c;
    let scale = a * a + bb * bb + c * c + d * d;
    if scale == 0.0 {
        return [0.0, 0.0];
    }
    if det.abs() > 1e-10 * scale {
        return [(d * b[0] - bb * b[1]) / det, (a * b[1] - c * b[0]) / det];
    }
    // Dominant right singular vector from JᵀJ.
    let (p, q, r) = (a * a + c * c, a * bb + c * d, bb * bb + d * d);
    let lambda = 0.5 * (p + r) + (0.25 * (p - r).powi(2) + q * q).sqrt();
    let v = if q.abs() > 0.0 {
        let (x, y) = (q, lambda - p);
        let n = x.hypot(y);
        [x / n, y / n]
    } else if p >= r {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let jv = j.apply(v);
    let coeff = (jv[0] * b[0] + jv[1] * b[1]) / lambda;
    [v[0] * coeff, v[1] * coeff]
}

struct Solution {
    z: LiftedPoint,
    degenerate: bool,
}

/// Damped Newton iteration for `G(z) = 0` from `seed`.
fn newton(m: &MapExpr, q: u32, p: i64, seed: LiftedPoint, cfg: &SearchConfig, target: f64) -> Option<Solution> {
    let mut z = seed;
    let (mut g, mut j) = residual_map(m, q, p, z);
    let mut norm = max_norm(g);
    let mut polish = 0;
    for _ in 0..cfg.newton_max_steps {
        if !norm.is_finite() {
            return None;
        }
        if norm < target {
            // A couple of extra steps push the residual to rounding level.
            polish += 1;
            if polish > 2 || norm == 0.0 {
                break;
            }
        }
        let delta = newton_step(&j, [-g[0], -g[1]]);
        let mut t = cfg.newton_damping;
        let mut accepted = false;
        while t >= 1.0 / 64.0 {
            let trial = LiftedPoint {
                x: z.x + t * delta[0],
                y: (z.y + t * delta[1]).clamp(0.0, 1.0),
            };
            let (g2, j2) = residual_map(m, q, p, trial);
            let n2 = max_norm(g2);
            if n2 < norm {
                z = trial;
                g = g2;
                j = j2;
                norm = n2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm >= target {
        return None;
    }
    let (_, small) = j.singular_values();
    Some(Solution {
        z,
        degenerate: small < DEGENERACY_THRESHOLD,
    })
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = wrap_turns(a - b);
    d.min(1.0 - d)
}

fn point_distance(a: &LiftedPoint, b: &LiftedPoint) -> f64 {
    circle_gap(a.x, b.x).max((a.y - b.y).abs())
}

/// Minimum over cyclic shifts and deck translations of the maximal pointwise
/// distance between two orbits of equal length.
pub fn orbit_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    if a.points.len() != b.points.len() {
        return f64::INFINITY;
    }
    let n = a.points.len();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|j| point_distance(&a.points[j], &b.points[(j + s) % n]))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

fn canonical_key(z: &LiftedPoint) -> (f64, f64) {
    (wrap_turns(z.x), z.y)
}

fn key_less(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Builds the orbit through `z`, relabelled to start at its least point in
/// `(x mod 1, y)` order, with that point on sheet 0.
fn assemble(m: &MapExpr, q: u32, p: i64, z: LiftedPoint, degenerate: bool, action: &ActionFunction) -> PeriodicOrbit {
    let mut raw = Vec::with_capacity(q as usize);
    let mut w = z;
    for _ in 0..q {
        raw.push(w);
        w = m.eval_lift(w);
    }
    let start = (1..raw.len()).fold(0, |best, j| {
        if key_less(canonical_key(&raw[j]), canonical_key(&raw[best])) {
            j
        } else {
            best
        }
    });
    let first = LiftedPoint {
        x: wrap_turns(raw[start].x),
        y: raw[start].y,
    };
    let mut points = Vec::with_capacity(q as usize);
    let mut w = first;
    for _ in 0..q {
        points.push(w);
        w = m.eval_lift(w);
    }
    let residual = max_norm([w.x - first.x - p as f64, w.y - first.y]);
    let least_period = least_period(&points, q);
    let values: Vec<f64> = points.iter().map(|z| action.eval_lifted(*z)).collect();
    PeriodicOrbit {
        q,
        p,
        residual,
        least_period,
        action: crate::quadrature::pairwise_sum(&values) / q as f64,
        degenerate,
        points,
    }
}

fn least_period(points: &[LiftedPoint], q: u32) -> u32 {
    (1..q)
        .filter(|d| q % d == 0)
        .find(|&d| point_distance(&points[d as usize], &points[0]) < 1e-7)
        .unwrap_or(q)
}

/// Keeps the first of every group of orbits closer than `tolerance`.
pub fn dedup_orbits(orbits: Vec<PeriodicOrbit>, tolerance: f64) -> Vec<PeriodicOrbit> {
    let mut kept: Vec<PeriodicOrbit> = Vec::new();
    for o in orbits {
        if !kept.iter().any(|k| k.q == o.q && orbit_distance(k, &o) <= tolerance) {
            kept.push(o);
        }
    }
    kept
}

/// Canonical order: least `x mod 1` of the orbit, then `y`, then winding.
pub fn sort_orbits(orbits: &mut [PeriodicOrbit]) {
    orbits.sort_by(|a, b| {
        let ka = canonical_key(&a.points[0]);
        let kb = canonical_key(&b.points[0]);
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.p.cmp(&b.p))
            .then(a.q.cmp(&b.q))
    });
}

fn lattice(n: usize, margin: f64) -> Vec<LiftedPoint> {
    let mut seeds = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            seeds.push(LiftedPoint {
                x: (i as f64 + 0.5) / n as f64,
                y: margin + (1.0 - 2.0 * margin) * (j as f64 + 0.5) / n as f64,
            });
        }
    }
    seeds
}

/// Runs Newton from an `n × n` lattice and returns the deduplicated orbits in
/// canonical order, with degenerate families capped.
pub fn search_lattice(m: &MapExpr, q: u32, p: i64, n: usize, cfg: &SearchConfig) -> Vec<PeriodicOrbit> {
    let action = ActionFunction::new(m, &ActionContext::canonical());
    let solutions: Vec<Option<Solution>> = lattice(n, cfg.margin)
        .into_par_iter()
        .map(|seed| newton(m, q, p, seed, cfg, CERTIFIED_RESIDUAL))
        .collect();
    let candidates: Vec<PeriodicOrbit> = solutions
        .into_iter()
        .flatten()
        .map(|s| assemble(m, q, p, s.z, s.degenerate, &action))
        .filter(|o| o.is_certified())
        .collect();
    let mut orbits = dedup_orbits(candidates, cfg.dedup_tolerance);
    sort_orbits(&mut orbits);
    let mut degenerate_kept = 0;
    orbits.retain(|o| {
        if !o.degenerate {
            return true;
        }
        degenerate_kept += 1;
        degenerate_kept <= cfg.max_degenerate_representatives
    });
    orbits
}

/// All `(q, p)` orbits found from the default lattice of `cfg`.
pub fn find_periodic_orbits(m: &MapExpr, q: u32, p: i64, cfg: &SearchConfig) -> Result<Vec<PeriodicOrbit>> {
    find_periodic_orbits_adaptive(m, q, p, cfg, 0)
}

/// As [`find_periodic_orbits`], doubling the lattice density while fewer
/// than `wanted` orbits have been found, up to `cfg.max_grid`.
pub fn find_periodic_orbits_adaptive(
    m: &MapExpr,
    q: u32,
    p: i64,
    cfg: &SearchConfig,
    wanted: usize,
) -> Result<Vec<PeriodicOrbit>> {
    if q == 0 {
        return Err(Error::invalid("period must be positive"));
    }
    cfg.validate()?;
    let mut n = cfg.grid;
    loop {
        let orbits = search_lattice(m, q, p, n, cfg);
        if orbits.len() >= wanted || n >= cfg.max_grid {
            return Ok(orbits);
        }
        n = (2 * n).min(cfg.max_grid);
    }
}

/// Newton iteration for a `(q, p)` orbit from a single seed; `None` when it
/// does not reach a certified residual.
pub fn solve_from(m: &MapExpr, q: u32, p: i64, seed: LiftedPoint, cfg: &SearchConfig) -> Option<PeriodicOrbit> {
    let action = ActionFunction::new(m, &ActionContext::canonical());
    newton(m, q, p, seed, cfg, CERTIFIED_RESIDUAL)
        .map(|s| assemble(m, q, p, s.z, s.degenerate, &action))
        .filter(|o| o.is_certified())
}

/// Newton-polishes `seed` until its residual is below `target_residual`.
pub fn refine_orbit(m: &MapExpr, seed: &PeriodicOrbit, target_residual: f64, cfg: &SearchConfig) -> Result<PeriodicOrbit> {
    let z0 = *seed
        .points
        .first()
        .ok_or_else(|| Error::invalid("orbit has no points"))?;
    let (g, _) = residual_map(m, seed.q, seed.p, z0);
    let residual = max_norm(g);
    if residual <= target_residual {
        return Ok(seed.clone());
    }
    if !(residual < REFINE_SEED_LIMIT) {
        return Err(Error::non_convergent("orbit refinement", residual, residual, REFINE_SEED_LIMIT));
    }
    let action = ActionFunction::new(m, &ActionContext::canonical());
    match newton(m, seed.q, seed.p, z0, cfg, target_residual) {
        Some(s) => Ok(assemble(m, seed.q, seed.p, s.z, s.degenerate, &action)),
        None => Err(Error::non_convergent("orbit refinement", residual, residual, target_residual)),
    }
}

/// Orbit average of the action function for the given context.
pub fn orbit_action(m: &MapExpr, ctx: &ActionContext, orbit: &PeriodicOrbit) -> f64 {
    let g = ActionFunction::new(m, ctx);
    let values: Vec<f64> = orbit.points.iter().map(|z| g.eval_lifted(*z)).collect();
    crate::quadrature::pairwise_sum(&values) / values.len() as f64
}

/// Largest `|F̃(points[j]) − points[j + 1]|` along the stored orbit.
pub fn consistency_defect(m: &MapExpr, orbit: &PeriodicOrbit) -> f64 {
    orbit
        .points
        .windows(2)
        .map(|w| {
            let image = m.eval_lift(w[0]);
            (image.x - w[1].x).abs().max((image.y - w[1].y).abs())
        })
        .fold(0.0, f64::max)
}
