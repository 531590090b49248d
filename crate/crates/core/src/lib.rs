//! Action functions, Calabi invariants, rotation numbers and periodic orbits
//! of exact area-preserving maps of the annulus `S¹ × [0, 1]`.
//!
//! Angles are measured in turns. The area form is `ω = dy∧dx` and the
//! default primitive is `β = y dx` with base point `(0, 0)`.

pub mod action;
pub mod error;
pub mod harness;
pub mod maps;
pub mod orbits;
pub mod phase_space;
pub mod quadrature;
pub mod rotation;

pub use action::{
    action_function, additivity_defect, calabi, measure_action, shifted_action_difference, ActionContext,
    ActionFunction, ActionValue, BirkhoffSpec, MeasureSpec, NumericalSettings,
};
pub use error::{Error, Result};
pub use harness::{
    action_gap, candidate_windings, example_local_perturbation, q_threshold, verify_theorem, Verdict,
    VerificationReport,
};
pub use maps::{Boundary, MapExpr, Mat2, RadialProfile, TwistProfile};
pub use orbits::{find_periodic_orbits, refine_orbit, PeriodicOrbit, SearchConfig};
pub use phase_space::{lift, line_integral, project, AnnulusPoint, LiftedPoint, OneForm, PolylinePath};
pub use quadrature::{CubatureSpec, QuadratureSpec};
pub use rotation::{boundary_rotation_number, measure_rotation, rotation_number_point, RotationValue};
