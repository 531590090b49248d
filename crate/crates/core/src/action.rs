//! Action functions, Calabi invariants and actions of invariant measures.
//!
//! Orientation: the area form is `ω = dy∧dx` and the primitive is `β = y dx`
//! (optionally `+ c dx`). Areas are integrated with the positive measure
//! `dx dy`, which has total mass one on the annulus. Under this convention a
//! local disk twist that turns counter-clockwise in the `(x, y)` chart
//! (positive bump amplitude) has negative Calabi invariant `−π c R⁴ / 12`.
//! The unit-disk computation in [`disk`] follows the opposite, disk-native
//! convention and reports a positive mean action for the same kind of twist.

pub mod disk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{DiskTwist, MapExpr};
use crate::orbits::PeriodicOrbit;
use crate::phase_space::{
    lift, line_integral_estimate, AnnulusPoint, ExplicitForm, LiftedPoint, OneForm, PolylinePath,
};
use crate::quadrature::{integrate_rectangle, integrate_unit_square, CubatureSpec, QuadratureSpec};

/// Choice of primitive and base point that pins down the action function.
#[derive(Debug, Clone)]
pub struct ActionContext {
    beta: OneForm,
    base_point: AnnulusPoint,
}

impl ActionContext {
    /// `β = y dx + shift·dx` (only the two built-in primitives are accepted).
    pub fn new(beta: OneForm, base_point: AnnulusPoint) -> Result<Self> {
        if beta.shift().is_none() {
            return Err(Error::UnsupportedForm(
                "explicit field as the primitive of an action context".into(),
            ));
        }
        Ok(ActionContext { beta, base_point })
    }

    /// `β = y dx`, base point `(0, 0)`.
    pub fn canonical() -> Self {
        ActionContext {
            beta: OneForm::CanonicalBeta,
            base_point: AnnulusPoint::from_raw(0.0, 0.0),
        }
    }

    pub fn shifted(c: f64) -> Self {
        ActionContext {
            beta: OneForm::ShiftedBeta(c),
            base_point: AnnulusPoint::from_raw(0.0, 0.0),
        }
    }

    pub fn beta(&self) -> &OneForm {
        &self.beta
    }

    pub fn base_point(&self) -> AnnulusPoint {
        self.base_point
    }

    pub fn shift(&self) -> f64 {
        self.beta.shift().unwrap_or(0.0)
    }
}

impl Default for ActionContext {
    fn default() -> Self {
        Self::canonical()
    }
}

/// An invariant probability measure, described by how it is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    BoundaryLower,
    BoundaryUpper,
    /// Normalized area `dx dy`.
    AreaMeasure,
    OrbitMeasure(PeriodicOrbit),
    /// Birkhoff empirical measure along the forward orbit of `seed`.
    Empirical { seed: AnnulusPoint, n_iter: u64 },
}

/// Minimum orbit length for empirical measures and point rotation numbers.
pub const MIN_BIRKHOFF_ITERATIONS: u64 = 1_000;

impl MeasureSpec {
    pub fn empirical(seed: AnnulusPoint, n_iter: u64) -> Result<Self> {
        if n_iter < MIN_BIRKHOFF_ITERATIONS {
            return Err(Error::invalid(format!(
                "empirical measures need at least {MIN_BIRKHOFF_ITERATIONS} iterations, got {n_iter}"
            )));
        }
        Ok(MeasureSpec::Empirical { seed, n_iter })
    }

    /// Uniform measure on a certified periodic orbit.
    pub fn orbit(orbit: PeriodicOrbit) -> Result<Self> {
        if !orbit.is_certified() {
            return Err(Error::invalid(format!(
                "orbit residual {:e} is not certified",
                orbit.residual
            )));
        }
        Ok(MeasureSpec::OrbitMeasure(orbit))
    }

    pub fn label(&self) -> String {
        match self {
            MeasureSpec::BoundaryLower => "boundary_lower".into(),
            MeasureSpec::BoundaryUpper => "boundary_upper".into(),
            MeasureSpec::AreaMeasure => "area".into(),
            MeasureSpec::OrbitMeasure(o) => format!("orbit(q={}, p={})", o.q, o.p),
            MeasureSpec::Empirical { seed, n_iter } => {
                format!("empirical(seed=({}, {}), n={n_iter})", seed.x(), seed.y())
            }
        }
    }
}

/// `value ± error_estimate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub error_estimate: f64,
}

impl ActionValue {
    pub fn exact(value: f64) -> Self {
        ActionValue {
            value,
            error_estimate: 0.0,
        }
    }
}

/// Birkhoff averaging settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffSpec {
    pub n_iter: u64,
    /// Largest accepted spread among the averages at `n/2`, `3n/4` and `n`.
    pub tolerance: f64,
}

impl Default for BirkhoffSpec {
    fn default() -> Self {
        BirkhoffSpec {
            n_iter: 1_000_000,
            tolerance: 1e-6,
        }
    }
}

/// All numerical settings used when estimating actions and rotation numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NumericalSettings {
    pub line: QuadratureSpec,
    pub cubature: CubatureSpec,
    pub birkhoff: BirkhoffSpec,
}

/// Action function of a primitive map with an arbitrary but fixed constant.
fn primitive_raw_action(leaf: &MapExpr, shift: f64, z: LiftedPoint) -> f64 {
    match leaf {
        MapExpr::RigidRotation { a } => shift * a,
        MapExpr::Twist { profile } => {
            // g = ∫_0^y s φ'(s) ds = y φ(y) − ∫_0^y φ
            let phi = profile.phi(z.y);
            z.y * phi - profile.antiderivative(z.y) + shift * phi
        }
        MapExpr::LocalDiskTwist(d) => disk_twist_raw_action(d, shift, z),
        MapExpr::Compose { .. } | MapExpr::Iterate { .. } => {
            unreachable!("composite maps are flattened before evaluation")
        }
    }
}

/// In chart coordinates `β = −½ r² dθ + dS` with `S = y_c u + u v / 2`, so
/// `f*β − β = −½ r² φ'(r) dr + d(S∘f − S)` and
/// `g = ½ ∫_r^R s² φ'(s) ds + S∘f − S`, zero outside the disk.
fn disk_twist_raw_action(d: &DiskTwist, shift: f64, z: LiftedPoint) -> f64 {
    let (_, u, v) = d.chart(z);
    if !d.inside(u, v) {
        return 0.0;
    }
    disk_twist_chart_action(d, shift, u, v)
}

fn disk_twist_chart_action(d: &DiskTwist, shift: f64, u: f64, v: f64) -> f64 {
    let r = u.hypot(v);
    let (u2, v2, _) = crate::maps::rotate_in_chart(&d.profile(), d.radius(), u, v, false);
    let yc = d.center().y();
    let s = |u: f64, v: f64| yc * u + 0.5 * u * v;
    0.5 * d.profile().moment_to_edge(r, d.radius()) + s(u2, v2) - s(u, v) + shift * (u2 - u)
}

/// The action function `g` of a map for a given context.
///
/// Primitive factors use closed forms normalized by `g(x₀) = 0`; composites
/// follow the additive rule `g_{f₂∘f₁} = g₂∘f₁ + g₁`, so that
/// `g_{f₂∘f₁}(x₀) = g₂(f₁(x₀))`. With the default base point on the lower
/// boundary that value is zero and the composite is normalized as well.
#[derive(Debug, Clone)]
pub struct ActionFunction<'a> {
    factors: Vec<&'a MapExpr>,
    offsets: Vec<f64>,
    shift: f64,
}

impl<'a> ActionFunction<'a> {
    pub fn new(m: &'a MapExpr, ctx: &ActionContext) -> Self {
        let factors = m.factors();
        let shift = ctx.shift();
        let base = ctx.base_point().lifted();
        let offsets = factors
            .iter()
            .map(|leaf| primitive_raw_action(leaf, shift, base))
            .collect();
        ActionFunction {
            factors,
            offsets,
            shift,
        }
    }

    pub fn eval_lifted(&self, p: LiftedPoint) -> f64 {
        let mut z = p;
        let mut acc = 0.0;
        for (leaf, offset) in self.factors.iter().zip(&self.offsets) {
            acc += primitive_raw_action(leaf, self.shift, z) - offset;
            z = leaf.eval_lift(z);
        }
        acc
    }

    pub fn eval(&self, p: AnnulusPoint) -> f64 {
        self.eval_lifted(p.lifted())
    }
}

/// `g(p)` for the map `m` in context `ctx`.
pub fn action_function(m: &MapExpr, ctx: &ActionContext, p: AnnulusPoint) -> f64 {
    ActionFunction::new(m, ctx).eval(p)
}

/// The closed 1-form `f*β − β` on the strip as an explicit field.
pub fn pullback_difference(m: &MapExpr, ctx: &ActionContext) -> OneForm {
    let m = m.clone();
    let c = ctx.shift();
    OneForm::ExplicitField(ExplicitForm::new(
        move |x, y| {
            let (image, jac) = m.eval_lift_with_jacobian(LiftedPoint { x, y });
            let lifted_y = image.y + c;
            [lifted_y * jac.0[0][0] - (y + c), lifted_y * jac.0[0][1]]
        },
        false,
    ))
}

/// `∫_path (f*β − β)`; equals `g(end) − g(start)` for any path.
pub fn action_increment_along(
    m: &MapExpr,
    ctx: &ActionContext,
    path: &PolylinePath,
    quad: &QuadratureSpec,
) -> Result<f64> {
    line_integral_estimate(&pullback_difference(m, ctx), path, quad).map(|e| e.value)
}

/// Straight path in the strip from the base point (sheet 0) to `p` (sheet 0).
pub fn straight_path_from_base(ctx: &ActionContext, p: AnnulusPoint, refinement: f64) -> Option<PolylinePath> {
    let from = lift(ctx.base_point(), 0);
    let to = lift(p, 0);
    PolylinePath::straight(from, to, refinement).ok()
}

/// `|∫_straight − ∫_alternate|` of `f*β − β`, where the straight path joins
/// the same two lifted endpoints as `alternate_path`.
pub fn path_independence_defect(
    m: &MapExpr,
    ctx: &ActionContext,
    p: AnnulusPoint,
    alternate_path: &PolylinePath,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let start = alternate_path.start();
    let end = alternate_path.end();
    let base = ctx.base_point();
    let start_ok = (start.projected().x() - base.x()).abs() < 1e-12 && start.y == base.y();
    let end_ok = (end.projected().x() - p.x()).abs() < 1e-12 && end.y == p.y();
    if !start_ok || !end_ok {
        return Err(Error::invalid("alternate path must run from the base point to p"));
    }
    let straight = PolylinePath::straight(start, end, alternate_path.refinement())?;
    let form = pullback_difference(m, ctx);
    let a = line_integral_estimate(&form, &straight, quad)?.value;
    let b = line_integral_estimate(&form, alternate_path, quad)?.value;
    Ok((a - b).abs())
}

/// Mean action `∫ g dx dy` over the annulus.
///
/// A bare local disk twist is integrated in its polar chart, where the
/// integrand is smooth; everything else uses adaptive tensor cubature.
pub fn calabi(m: &MapExpr, ctx: &ActionContext, cubature: &CubatureSpec) -> Result<ActionValue> {
    if let MapExpr::LocalDiskTwist(d) = m {
        return calabi_disk_chart(d, ctx, cubature);
    }
    calabi_on_square(m, ctx, cubature)
}

/// Mean action by tensor cubature on `[0,1]²`, whatever the map.
pub fn calabi_on_square(m: &MapExpr, ctx: &ActionContext, cubature: &CubatureSpec) -> Result<ActionValue> {
    let g = ActionFunction::new(m, ctx);
    let f = |x: f64, y: f64| g.eval_lifted(LiftedPoint { x, y });
    let est = integrate_unit_square(&f, cubature)?;
    Ok(ActionValue {
        value: est.value,
        error_estimate: est.error,
    })
}

fn calabi_disk_chart(d: &DiskTwist, ctx: &ActionContext, cubature: &CubatureSpec) -> Result<ActionValue> {
    let shift = ctx.shift();
    let offset = disk_twist_raw_action(d, shift, ctx.base_point().lifted());
    let f = |r: f64, theta: f64| {
        let (s, c) = theta.sin_cos();
        r * disk_twist_chart_action(d, shift, r * c, r * s)
    };
    let spec = CubatureSpec {
        base_panels: cubature.base_panels.min(32),
        ..*cubature
    };
    let est = integrate_rectangle(&f, (0.0, d.radius()), (0.0, std::f64::consts::TAU), &spec)?;
    Ok(ActionValue {
        value: est.value - offset,
        error_estimate: est.error,
    })
}

/// Neumaier-compensated Birkhoff average of `observable` along the forward
/// orbit of `start`. The error estimate is the spread of the running
/// averages at `n/2`, `3n/4` and `n`, plus a rounding floor proportional to
/// the mean magnitude of the observable.
pub fn birkhoff_average<F>(m: &MapExpr, start: AnnulusPoint, n_iter: u64, observable: F, tolerance: f64) -> Result<ActionValue>
where
    F: Fn(AnnulusPoint) -> f64,
{
    if n_iter < 4 {
        return Err(Error::invalid("Birkhoff averages need at least 4 iterations"));
    }
    let checkpoints = [n_iter / 2, (3 * n_iter) / 4, n_iter];
    let mut averages = [0.0; 3];
    let mut next_checkpoint = 0;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut magnitude = 0.0f64;
    let mut z = start;
    for j in 1..=n_iter {
        let term = observable(z);
        magnitude += term.abs();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if j == checkpoints[next_checkpoint] {
            averages[next_checkpoint] = (sum + comp) / j as f64;
            next_checkpoint += 1;
            if next_checkpoint == checkpoints.len() {
                break;
            }
        }
        z = m.eval(z);
    }
    let hi = averages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = averages.iter().cloned().fold(f64::INFINITY, f64::min);
    let value = averages[2];
    let spread = hi - lo;
    if spread > tolerance {
        return Err(Error::non_convergent("Birkhoff average", value, spread, tolerance));
    }
    Ok(ActionValue {
        value,
        error_estimate: spread + rounding_floor(magnitude / n_iter as f64),
    })
}

/// Rounding error allowance for an average of terms of mean magnitude `scale`.
fn rounding_floor(scale: f64) -> f64 {
    4.0 * f64::EPSILON * scale
}

/// `∫ observable dμ`.
pub fn measure_integral<F>(m: &MapExpr, mu: &MeasureSpec, observable: F, settings: &NumericalSettings) -> Result<ActionValue>
where
    F: Fn(AnnulusPoint) -> f64 + Sync,
{
    let tol = settings.birkhoff.tolerance;
    match mu {
        MeasureSpec::BoundaryLower => birkhoff_average(
            m,
            AnnulusPoint::from_raw(0.0, 0.0),
            settings.birkhoff.n_iter,
            observable,
            tol,
        ),
        MeasureSpec::BoundaryUpper => birkhoff_average(
            m,
            AnnulusPoint::from_raw(0.0, 1.0),
            settings.birkhoff.n_iter,
            observable,
            tol,
        ),
        MeasureSpec::AreaMeasure => {
            let f = |x: f64, y: f64| observable(AnnulusPoint::from_raw(x, y));
            let est = integrate_unit_square(&f, &settings.cubature)?;
            Ok(ActionValue {
                value: est.value,
                error_estimate: est.error,
            })
        }
        MeasureSpec::OrbitMeasure(orbit) => {
            let values: Vec<f64> = orbit.points.iter().map(|z| observable(z.projected())).collect();
            let n = values.len() as f64;
            let magnitude = values.iter().map(|v| v.abs()).sum::<f64>() / n;
            Ok(ActionValue {
                value: crate::quadrature::pairwise_sum(&values) / n,
                error_estimate: rounding_floor(magnitude),
            })
        }
        MeasureSpec::Empirical { seed, n_iter } => birkhoff_average(m, *seed, *n_iter, observable, tol),
    }
}

/// `𝓐(μ) = ∫ g dμ`.
pub fn measure_action(
    m: &MapExpr,
    ctx: &ActionContext,
    mu: &MeasureSpec,
    settings: &NumericalSettings,
) -> Result<ActionValue> {
    if let MeasureSpec::AreaMeasure = mu {
        return calabi(m, ctx, &settings.cubature);
    }
    let g = ActionFunction::new(m, ctx);
    measure_integral(m, mu, |p| g.eval(p), settings)
}

/// `|𝓐(m2∘m1) − 𝓐(m1) − 𝓐(m2)|` for mean actions.
pub fn additivity_defect(m1: &MapExpr, m2: &MapExpr, ctx: &ActionContext, cubature: &CubatureSpec) -> Result<f64> {
    let composite = MapExpr::compose(m2.clone(), m1.clone());
    let a12 = calabi(&composite, ctx, cubature)?;
    let a1 = calabi(m1, ctx, cubature)?;
    let a2 = calabi(m2, ctx, cubature)?;
    Ok((a12.value - a1.value - a2.value).abs())
}

/// Action differences `𝓐(μ1) − 𝓐(μ2)` under `y dx` and under `y dx + c dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedDifference {
    pub base_diff: ActionValue,
    pub shifted_diff: ActionValue,
}

impl ShiftedDifference {
    pub fn change(&self) -> f64 {
        self.shifted_diff.value - self.base_diff.value
    }

    pub fn combined_error(&self) -> f64 {
        self.shifted_diff.error_estimate + self.base_diff.error_estimate
    }
}

pub fn shifted_action_difference(
    m: &MapExpr,
    mu1: &MeasureSpec,
    mu2: &MeasureSpec,
    c: f64,
    settings: &NumericalSettings,
) -> Result<ShiftedDifference> {
    let diff = |ctx: &ActionContext| -> Result<ActionValue> {
        if mu1 == mu2 {
            return Ok(ActionValue::exact(0.0));
        }
        let a1 = measure_action(m, ctx, mu1, settings)?;
        let a2 = measure_action(m, ctx, mu2, settings)?;
        Ok(ActionValue {
            value: a1.value - a2.value,
            error_estimate: a1.error_estimate + a2.error_estimate,
        })
    };
    Ok(ShiftedDifference {
        base_diff: diff(&ActionContext::canonical())?,
        shifted_diff: diff(&ActionContext::shifted(c))?,
    })
}
