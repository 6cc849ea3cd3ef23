//! The unit sphere `{u : ‖u‖_{L²} = 1}`, its tangent projection and the
//! constraint restoration used after every time step.

use thiserror::Error;

use crate::field::{dot, Field, FieldError};

/// Largest `|‖u‖ − 1|` accepted for a state on the sphere.
pub const MANIFOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("the zero field has no direction on the sphere")]
    ZeroField,
    #[error("state is off the sphere: |‖u‖ - 1| = {0:e}")]
    OffManifold(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A field accepted as lying on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldState {
    field: Field,
}

impl ManifoldState {
    /// Wraps `field` if it is within [`MANIFOLD_TOL`] of the sphere.
    pub fn new(field: Field) -> Result<Self, ManifoldError> {
        let defect = (field.l2_norm() - 1.0).abs();
        if defect > MANIFOLD_TOL {
            return Err(ManifoldError::OffManifold(defect));
        }
        Ok(ManifoldState { field })
    }

    /// Renormalizes `field` onto the sphere.
    pub fn project(field: &Field) -> Result<Self, ManifoldError> {
        Ok(ManifoldState {
            field: renormalize(field)?,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    /// `|‖u‖_{L²} − 1|`, recomputed on each call.
    pub fn norm_defect(&self) -> f64 {
        (self.field.l2_norm() - 1.0).abs()
    }
}

/// `π_u(h) = h − ⟨h, u⟩u`, evaluated with the actual inner product so the
/// map stays defined slightly off the sphere.
pub fn project_tangent(u: &Field, h: &Field) -> Result<Field, ManifoldError> {
    if !(u.l2_norm() > 0.0) {
        return Err(ManifoldError::ZeroField);
    }
    if !u.same_domain(h) {
        return Err(FieldError::DomainMismatch.into());
    }
    let s = dot(h.modes(), u.modes());
    Ok(h.add_scaled(u, -s)?)
}

/// `u / ‖u‖_{L²}`.
pub fn renormalize(u: &Field) -> Result<Field, ManifoldError> {
    let norm = u.l2_norm();
    if !(norm > 0.0) {
        return Err(ManifoldError::ZeroField);
    }
    Ok(u.scaled(1.0 / norm)?)
}

/// `|⟨h, u⟩|`, the normal component of `h` at `u`.
pub fn tangency_defect(u: &Field, h: &Field) -> f64 {
    assert!(
        u.same_domain(h),
        "tangency_defect: fields on different domains"
    );
    dot(h.modes(), u.modes()).abs()
}
