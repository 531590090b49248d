//! Report documents and their text, JSON and CSV encodings.
//!
//! Orbit CSV columns: `orbit_id,j,x,y,x_lift,q,p,residual,action`.
//! Plot CSV columns: `kind,id,j,x,y` with `kind` either `orbit` (periodic
//! orbit points) or `portrait` (forward orbits of sample seeds).

use std::fmt::Write as _;
use std::path::Path;

use calabi_core::action::ActionValue;
use calabi_core::harness::{PerturbationReport, VerificationReport};
use calabi_core::maps::MapExpr;
use calabi_core::orbits::PeriodicOrbit;
use calabi_core::phase_space::LiftedPoint;
use calabi_core::rotation::RotationValue;
use clap::ValueEnum;
use serde::Serialize;

use crate::audit::AuditCheck;
use crate::{CliError, NamedAction, NamedRotation, PointAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    pub map: String,
    pub shift: f64,
    pub base_point: [f64; 2],
    pub points: Vec<PointAction>,
    pub calabi: ActionValue,
    pub measures: Vec<NamedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationReport {
    pub map: String,
    pub boundary_lower: RotationValue,
    pub boundary_upper: RotationValue,
    pub measures: Vec<NamedRotation>,
    pub identity_lhs: RotationValue,
    pub identity_rhs: f64,
    pub identity_defect: f64,
    pub identity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitsReport {
    pub map: String,
    pub q: u32,
    pub windings: Vec<i64>,
    pub lattice: usize,
    pub orbits: Vec<PeriodicOrbit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Document {
    Action(ActionReport),
    Rotation(RotationReport),
    Orbits(OrbitsReport),
    Verify(VerificationReport),
    Perturbation(PerturbationReport),
    Audit { seed: u64, checks: Vec<AuditCheck> },
}

fn pm(v: &ActionValue) -> String {
    format!("{:.12} ± {:.1e}", v.value, v.error_estimate)
}

fn rot(v: &RotationValue) -> String {
    if v.exact {
        format!("{:.12} (exact)", v.value)
    } else {
        format!("{:.12} ± {:.1e}", v.value, v.error_estimate)
    }
}

fn orbit_lines(s: &mut String, orbits: &[PeriodicOrbit]) {
    for (id, o) in orbits.iter().enumerate() {
        let z = o.points[0];
        let _ = writeln!(
            s,
            "    #{id:<3} p={:<3} start=({:.9}, {:.9})  residual {:.1e}  action {:.9}  least period {}{}",
            o.p,
            z.x,
            z.y,
            o.residual,
            o.action,
            o.least_period,
            if o.degenerate { "  degenerate" } else { "" }
        );
    }
}

fn verification_text(s: &mut String, r: &VerificationReport) {
    let _ = writeln!(s, "map: {}", r.map);
    for m in &r.measures {
        let _ = writeln!(s, "measure {}: action {}  rotation {}", m.label, pm(&m.action), rot(&m.rotation));
    }
    let _ = writeln!(s, "action gap: {:.12} ± {:.1e}", r.gap, r.gap_error);
    let _ = writeln!(s, "period threshold: {}  (checked up to {})", r.q_threshold, r.q_max);
    let _ = writeln!(s, "action bracket: [{:.9}, {:.9}]", r.action_bracket.0, r.action_bracket.1);
    for c in &r.census {
        let _ = writeln!(
            s,
            "q={} windings {:?} lattice {}: {} orbits, {} in bracket -> {} ({})",
            c.q,
            c.windings,
            c.lattice,
            c.orbits.len(),
            c.bracketed,
            c.verdict.as_str(),
            c.note
        );
        orbit_lines(s, &c.orbits);
    }
}

impl Document {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            Format::Text => Ok(self.text()),
        }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        match self {
            Document::Action(r) => {
                let _ = writeln!(s, "map: {}", r.map);
                let _ = writeln!(s, "primitive: y dx + {} dx, base point ({}, {})", r.shift, r.base_point[0], r.base_point[1]);
                for p in &r.points {
                    let _ = writeln!(s, "g({}, {}) = {}", p.x, p.y, pm(&p.action));
                }
                let _ = writeln!(s, "calabi: {}", pm(&r.calabi));
                for m in &r.measures {
                    let _ = writeln!(s, "action[{}]: {}", m.name, pm(&m.action));
                }
            }
            Document::Rotation(r) => {
                let _ = writeln!(s, "map: {}", r.map);
                let _ = writeln!(s, "rotation[boundary_lower]: {}", rot(&r.boundary_lower));
                let _ = writeln!(s, "rotation[boundary_upper]: {}", rot(&r.boundary_upper));
                for m in &r.measures {
                    let _ = writeln!(s, "rotation[{}]: {}", m.name, rot(&m.rotation));
                }
                let _ = writeln!(
                    s,
                    "boundary identity: mean rotation {} vs {:.12}, defect {:.1e} (error {:.1e})",
                    rot(&r.identity_lhs),
                    r.identity_rhs,
                    r.identity_defect,
                    r.identity_error
                );
            }
            Document::Orbits(r) => {
                let _ = writeln!(s, "map: {}", r.map);
                let _ = writeln!(s, "q={} windings {:?} lattice {}: {} orbits", r.q, r.windings, r.lattice, r.orbits.len());
                orbit_lines(&mut s, &r.orbits);
            }
            Document::Verify(r) => verification_text(&mut s, r),
            Document::Perturbation(r) => {
                let _ = writeln!(s, "calabi(perturbed): {}", pm(&r.calabi_perturbed));
                let _ = writeln!(s, "calabi(bump): {}", pm(&r.calabi_bump));
                let _ = writeln!(s, "calabi closed form: {:.12}", r.calabi_oracle);
                let _ = writeln!(s, "additivity defect: {:.1e}", r.additivity_defect);
                let _ = writeln!(
                    s,
                    "boundary actions: lower {}  upper {}",
                    pm(&r.boundary_actions.0),
                    pm(&r.boundary_actions.1)
                );
                verification_text(&mut s, &r.verification);
            }
            Document::Audit { seed, checks } => {
                let _ = writeln!(s, "audit seed {seed}");
                for c in checks {
                    let _ = writeln!(
                        s,
                        "{:<34} {:>3} cases  worst {:.2e}  tolerance {:.0e}  {}",
                        c.name,
                        c.cases,
                        c.worst,
                        c.tolerance,
                        if c.passed { "ok" } else { "FAILED" }
                    );
                }
            }
        }
        s
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn write_orbit_csv(path: &Path, orbits: &[PeriodicOrbit]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["orbit_id", "j", "x", "y", "x_lift", "q", "p", "residual", "action"])
        .map_err(csv_error)?;
    for (id, o) in orbits.iter().enumerate() {
        for (j, z) in o.points.iter().enumerate() {
            let x = z.projected().x();
            w.write_record([
                id.to_string(),
                j.to_string(),
                x.to_string(),
                z.y.to_string(),
                z.x.to_string(),
                o.q.to_string(),
                o.p.to_string(),
                o.residual.to_string(),
                o.action.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Seeds of the phase-portrait sample orbits and their length.
pub const PORTRAIT_SEEDS: usize = 24;
pub const PORTRAIT_STEPS: usize = 400;

pub fn write_plot_csv(path: &Path, m: &MapExpr, orbits: &[PeriodicOrbit]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["kind", "id", "j", "x", "y"]).map_err(csv_error)?;
    for (id, o) in orbits.iter().enumerate() {
        for (j, z) in o.points.iter().enumerate() {
            let p = z.projected();
            w.write_record(["orbit".to_string(), id.to_string(), j.to_string(), p.x().to_string(), p.y().to_string()])
                .map_err(csv_error)?;
        }
    }
    for id in 0..PORTRAIT_SEEDS {
        let mut z = LiftedPoint {
            x: 0.0,
            y: (id as f64 + 0.5) / PORTRAIT_SEEDS as f64,
        };
        for j in 0..PORTRAIT_STEPS {
            let p = z.projected();
            w.write_record(["portrait".to_string(), id.to_string(), j.to_string(), p.x().to_string(), p.y().to_string()])
                .map_err(csv_error)?;
            z = m.eval_lift(z);
        }
    }
    w.flush()?;
    Ok(())
}
