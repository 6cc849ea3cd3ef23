//! Projected fourth-order flow on the unit L² sphere of an interval with
//! Navier boundary conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod field;
pub mod manifold;
pub mod stationary;

pub use analysis::{
    attractor_sweep, attractor_sweep_from, estimate_lojasiewicz, fit_decay, random_unit_field,
    verify_convergence, AnalysisError, AttractorReport, ConvergenceReport, DecayFit, DecayModel,
    ThetaEstimate,
};
pub use dynamics::{
    energy, energy_gradient, integrate, integrate_observed, residual_m, rhs, rhs_projected, step,
    DynamicsError, FlowParams, IntegrationFailure, Integrator, Monitors, Record, RhsForm, Scheme,
    SchemeConfig, StepReport, Trajectory,
};
pub use field::{build_domain, Domain, DomainSpec, Field, FieldError, NormReport};
pub use manifold::{project_tangent, renormalize, tangency_defect, ManifoldError, ManifoldState};
pub use stationary::{
    assemble_linearization, find_equilibrium, spectrum, Equilibrium, LinearizedOperator, Stability,
    StabilityReport, StationaryError,
};
