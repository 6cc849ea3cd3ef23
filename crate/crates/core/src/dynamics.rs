//! The projected flow `u_t = π_u(−Au − au − u^{2n−1})` on the unit sphere:
//! right-hand side, energy and gradient, the stationarity residual `M`, and
//! manifold-preserving time stepping with invariant monitors.
//!
//! On the sphere the projection collapses to the `a`-free closed form
//!
//! ```text
//! rhs(u) = −Au + (‖Δu‖² + 2‖∇u‖² + ‖u‖^{2n}_{L^{2n}})·u − u^{2n−1}
//! ```
//!
//! which is what the integrator evaluates by default. The direct projection
//! form is available through [`RhsForm::Projected`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{dot, seminorms, Field, FieldError, NormReport};
use crate::manifold::{ManifoldError, ManifoldState};

/// Any norm above this value during a step is treated as numerical blow-up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Relative slack `ε` in `Y_{k+1} ≤ Y_k + ε·(1 + Y_0)`.
pub const ENERGY_SLACK: f64 = 1e-8;

/// Relative slack in the a-priori bounds `‖u‖²_V ≤ 2Y_0`, `‖u‖^{2n} ≤ 2nY_0`.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),
    #[error("numerical divergence at t = {time}: {reason}")]
    Divergence { time: f64, reason: String },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// How the integrator evaluates the flow velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// The `a`-free closed form, see [`rhs`].
    #[default]
    Closed,
    /// `π_u(−Au − au − u^{2n−1})` with the numerical inner product, see
    /// [`rhs_projected`].
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Nonlinearity index; the pointwise term is `u^{2n−1}`.
    pub n: u32,
    /// Linear reaction coefficient. Cancels on the sphere.
    pub a: f64,
    /// Apply 2/3 truncation to the pointwise power.
    pub dealias: bool,
    #[serde(default)]
    pub rhs_form: RhsForm,
}

impl FlowParams {
    /// Dealiasing defaults to on for `n ≥ 2` and off for `n = 1`.
    pub fn new(n: u32, a: f64) -> Result<Self, DynamicsError> {
        let p = FlowParams {
            n,
            a,
            dealias: n >= 2,
            rhs_form: RhsForm::Closed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_rhs_form(mut self, form: RhsForm) -> Self {
        self.rhs_form = form;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.n < 1 {
            return Err(DynamicsError::Invalid {
                key: "n",
                msg: format!("must be at least 1, got {}", self.n),
            });
        }
        if !self.a.is_finite() {
            return Err(DynamicsError::Invalid {
                key: "a",
                msg: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Exponent `2n − 1` of the pointwise term.
    pub fn power(&self) -> i32 {
        2 * self.n as i32 - 1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Backward Euler in `A`, forward Euler in everything else.
    #[default]
    ImexEuler,
    /// Classical explicit RK4 on the full right-hand side.
    ProjectedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub energy_guard: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            scheme: Scheme::ImexEuler,
            dt: 1e-5,
            t_end: 0.02,
            record_every: 1,
            energy_guard: false,
        }
    }
}

impl SchemeConfig {
    pub fn imex(dt: f64, t_end: f64) -> Self {
        SchemeConfig {
            dt,
            t_end,
            ..Default::default()
        }
    }

    pub fn rk4(dt: f64, t_end: f64) -> Self {
        SchemeConfig {
            scheme: Scheme::ProjectedRk4,
            dt,
            t_end,
            ..Default::default()
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_energy_guard(mut self, on: bool) -> Self {
        self.energy_guard = on;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DynamicsError::Invalid {
                key: "dt",
                msg: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(DynamicsError::Invalid {
                key: "t_end",
                msg: format!("must be at least dt = {}, got {}", self.dt, self.t_end),
            });
        }
        if self.record_every == 0 {
            return Err(DynamicsError::Invalid {
                key: "record_every",
                msg: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Norms of `u` together with the (optionally truncated) power `u^{2n−1}`
/// in mode space.
struct Terms {
    norms: NormReport,
    h1_sq: f64,
    h2_sq: f64,
    power: Vec<f64>,
}

fn terms(u: &Field, params: &FlowParams) -> Result<Terms, DynamicsError> {
    let norms = seminorms(u, params.n);
    let power = if params.n == 1 {
        u.modes().to_vec()
    } else {
        let grid = u.pointwise_powi(params.power());
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite("u^(2n-1)"));
        }
        let mut m = u.domain().to_modes(&grid);
        if params.dealias {
            u.domain().dealias(&mut m);
        }
        m
    };
    if !norms.l2n_2n.is_finite() || !norms.v_norm_sq.is_finite() {
        return Err(DynamicsError::NonFinite("norms"));
    }
    // Recompute the squared seminorms directly to avoid sqrt round trips.
    let (mut h1_sq, mut h2_sq) = (0.0, 0.0);
    for (c, q) in u.modes().iter().zip(u.domain().wavenumbers()) {
        let q2c2 = q * q * c * c;
        h1_sq += q2c2;
        h2_sq += q * q * q2c2;
    }
    Ok(Terms {
        norms,
        h1_sq,
        h2_sq,
        power,
    })
}

fn finite_field(u: &Field, modes: Vec<f64>, what: &'static str) -> Result<Field, DynamicsError> {
    if modes.iter().any(|c| !c.is_finite()) {
        return Err(DynamicsError::NonFinite(what));
    }
    Ok(Field::from_modes(u.domain(), modes)?)
}

/// Explicit part of the IMEX split, `velocity + Au`, in mode space.
fn explicit_part(u: &Field, params: &FlowParams) -> Result<Vec<f64>, DynamicsError> {
    let t = terms(u, params)?;
    let c = u.modes();
    let out = match params.rhs_form {
        RhsForm::Closed => {
            let s = t.h2_sq + 2.0 * t.h1_sq + t.norms.l2n_2n;
            c.iter().zip(&t.power).map(|(ci, pi)| s * ci - pi).collect()
        }
        RhsForm::Projected => {
            let lam = u.domain().a_eigenvalues();
            let normal: f64 = c
                .iter()
                .zip(&t.power)
                .zip(lam)
                .map(|((ci, pi), l)| (l * ci + params.a * ci + pi) * ci)
                .sum();
            c.iter()
                .zip(&t.power)
                .map(|(ci, pi)| -params.a * ci - pi + normal * ci)
                .collect::<Vec<f64>>()
        }
    };
    if out.iter().any(|v: &f64| !v.is_finite()) {
        return Err(DynamicsError::NonFinite("explicit terms"));
    }
    Ok(out)
}

/// Closed-form projected right-hand side
/// `−Au + ‖Δu‖²u + 2‖∇u‖²u + ‖u‖^{2n}_{L^{2n}}u − u^{2n−1}`.
pub fn rhs(u: &Field, params: &FlowParams) -> Result<Field, DynamicsError> {
    let t = terms(u, params)?;
    let s = t.h2_sq + 2.0 * t.h1_sq + t.norms.l2n_2n;
    let modes = u
        .modes()
        .iter()
        .zip(&t.power)
        .zip(u.domain().a_eigenvalues())
        .map(|((c, p), l)| -l * c + s * c - p)
        .collect();
    finite_field(u, modes, "rhs")
}

/// `π_u(−Au − au − u^{2n−1})` with the projection applied verbatim.
pub fn rhs_projected(u: &Field, params: &FlowParams) -> Result<Field, DynamicsError> {
    let t = terms(u, params)?;
    let lam = u.domain().a_eigenvalues();
    let h: Vec<f64> = u
        .modes()
        .iter()
        .zip(&t.power)
        .zip(lam)
        .map(|((c, p), l)| -l * c - params.a * c - p)
        .collect();
    let s = dot(&h, u.modes());
    let modes = h.iter().zip(u.modes()).map(|(hi, c)| hi - s * c).collect();
    finite_field(u, modes, "rhs")
}

/// The velocity the integrator uses, selected by [`FlowParams::rhs_form`].
pub fn flow_velocity(u: &Field, params: &FlowParams) -> Result<Field, DynamicsError> {
    match params.rhs_form {
        RhsForm::Closed => rhs(u, params),
        RhsForm::Projected => rhs_projected(u, params),
    }
}

/// `Y(u) = ½‖u‖²_V + (1/2n)‖u‖^{2n}_{L^{2n}}`.
pub fn energy(u: &Field, params: &FlowParams) -> f64 {
    let r = seminorms(u, params.n);
    0.5 * r.v_norm_sq + r.l2n_2n / (2.0 * params.n as f64)
}

/// `Au + u + u^{2n−1}`, the L² gradient of [`energy`].
pub fn energy_gradient(u: &Field, params: &FlowParams) -> Result<Field, DynamicsError> {
    let t = terms(u, params)?;
    let modes = u
        .modes()
        .iter()
        .zip(&t.power)
        .zip(u.domain().a_eigenvalues())
        .map(|((c, p), l)| l * c + c + p)
        .collect();
    finite_field(u, modes, "energy gradient")
}

/// `M(u) = −Au + ‖u‖²_V u − ‖u‖²_{L²} u + ‖u‖^{2n}_{L^{2n}} u − u^{2n−1}`.
///
/// Coincides with [`rhs`] up to roundoff because `‖u‖²_V − ‖u‖²` is
/// `‖Δu‖² + 2‖∇u‖²` for every `u`; it differs from [`rhs_projected`] off
/// the sphere.
pub fn residual_m(u: &Field, params: &FlowParams) -> Result<Field, DynamicsError> {
    let t = terms(u, params)?;
    let l2_sq = t.norms.l2 * t.norms.l2;
    let s = t.norms.v_norm_sq - l2_sq + t.norms.l2n_2n;
    let modes = u
        .modes()
        .iter()
        .zip(&t.power)
        .zip(u.domain().a_eigenvalues())
        .map(|((c, p), l)| -l * c + s * c - p)
        .collect();
    finite_field(u, modes, "M(u)")
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `|‖u*‖ − 1|` of the unnormalized update (worst sub-step if halved).
    pub pre_renorm_defect: f64,
    /// `‖rhs(u)‖²` at the start of the step.
    pub rhs_norm_sq: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `‖u_{k+1} − u_k‖² / dt`, the discrete dissipation increment.
    pub dissipation: f64,
    /// The energy guard replaced the step by two half steps.
    pub halved: bool,
}

fn check_blowup(u: &[f64], field: &Field) -> Result<(), String> {
    if u.iter().any(|c| !c.is_finite()) {
        return Err("non-finite state".into());
    }
    let l2 = dot(u, u).sqrt();
    if l2 > DIVERGENCE_THRESHOLD {
        return Err(format!("L2 norm {l2:e} exceeds threshold"));
    }
    let v: f64 = u
        .iter()
        .zip(field.domain().v_weights())
        .map(|(c, w)| w * c * c)
        .sum();
    if !(v.sqrt() <= DIVERGENCE_THRESHOLD) {
        return Err(format!("V norm {:e} exceeds threshold", v.sqrt()));
    }
    Ok(())
}

/// One unnormalized update `u ↦ u*` with step `dt`.
fn raw_update(
    u: &Field,
    params: &FlowParams,
    scheme: Scheme,
    dt: f64,
) -> Result<Vec<f64>, DynamicsError> {
    match scheme {
        Scheme::ImexEuler => {
            let expl = explicit_part(u, params)?;
            Ok(u.modes()
                .iter()
                .zip(&expl)
                .zip(u.domain().a_eigenvalues())
                .map(|((c, e), l)| (c + dt * e) / (1.0 + dt * l))
                .collect())
        }
        Scheme::ProjectedRk4 => {
            let k1 = flow_velocity(u, params)?;
            let k2 = flow_velocity(&u.add_scaled(&k1, 0.5 * dt)?, params)?;
            let k3 = flow_velocity(&u.add_scaled(&k2, 0.5 * dt)?, params)?;
            let k4 = flow_velocity(&u.add_scaled(&k3, dt)?, params)?;
            Ok((0..u.modes().len())
                .map(|i| {
                    u.modes()[i]
                        + dt / 6.0
                            * (k1.modes()[i]
                                + 2.0 * k2.modes()[i]
                                + 2.0 * k3.modes()[i]
                                + k4.modes()[i])
                })
                .collect())
        }
    }
}

/// Update then renormalize. Returns the new field and `|‖u*‖ − 1|`.
fn sub_step(
    u: &Field,
    params: &FlowParams,
    scheme: Scheme,
    dt: f64,
) -> Result<(Field, f64), String> {
    let raw = raw_update(u, params, scheme, dt).map_err(|e| e.to_string())?;
    check_blowup(&raw, u)?;
    let norm = dot(&raw, &raw).sqrt();
    if !(norm > 0.0) {
        return Err("update collapsed to zero".into());
    }
    let next: Vec<f64> = raw.iter().map(|c| c / norm).collect();
    let field = Field::from_modes(u.domain(), next).map_err(|e| e.to_string())?;
    Ok((field, (norm - 1.0).abs()))
}

fn step_inner(
    state: &ManifoldState,
    params: &FlowParams,
    cfg: &SchemeConfig,
    time: f64,
) -> Result<(ManifoldState, StepReport), DynamicsError> {
    let u = state.field();
    let diverged = |reason: String| DynamicsError::Divergence { time, reason };
    let velocity = flow_velocity(u, params).map_err(|e| diverged(e.to_string()))?;
    let rhs_norm_sq = dot(velocity.modes(), velocity.modes());
    let energy_before = energy(u, params);

    let (mut next, mut defect) = sub_step(u, params, cfg.scheme, cfg.dt).map_err(diverged)?;
    let mut energy_after = energy(&next, params);
    let mut halved = false;
    if cfg.energy_guard && energy_after > energy_before + ENERGY_SLACK * (1.0 + energy_before) {
        let h = 0.5 * cfg.dt;
        let (mid, d1) = sub_step(u, params, cfg.scheme, h).map_err(diverged)?;
        let (end, d2) = sub_step(&mid, params, cfg.scheme, h).map_err(diverged)?;
        next = end;
        defect = d1.max(d2);
        energy_after = energy(&next, params);
        halved = true;
        if energy_after > energy_before + ENERGY_SLACK * (1.0 + energy_before) {
            return Err(diverged(format!(
                "energy guard tripped twice (Y rose from {energy_before:e} to {energy_after:e})"
            )));
        }
    }
    if !energy_after.is_finite() {
        return Err(diverged("non-finite energy".into()));
    }
    let dissipation = next
        .modes()
        .iter()
        .zip(u.modes())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / cfg.dt;
    let report = StepReport {
        pre_renorm_defect: defect,
        rhs_norm_sq,
        energy_before,
        energy_after,
        dissipation,
        halved,
    };
    Ok((ManifoldState::new(next)?, report))
}

/// Advances `state` by one step of the configured scheme and renormalizes.
pub fn step(
    state: &ManifoldState,
    params: &FlowParams,
    cfg: &SchemeConfig,
) -> Result<(ManifoldState, StepReport), DynamicsError> {
    params.validate()?;
    cfg.validate()?;
    step_inner(state, params, cfg, 0.0)
}

/// Diagnostics stored for each recorded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time: f64,
    pub energy: f64,
    pub l2_norm: f64,
    pub v_norm_sq: f64,
    /// `‖M(u)‖_{L²}`
    pub residual_norm: f64,
    /// `Σ ‖u_{k+1} − u_k‖²/dt` up to this time.
    pub dissipation_integral: f64,
}

/// Per-step invariant checks accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    pub steps: u64,
    /// Largest post-renormalization `|‖u‖ − 1|`.
    pub max_norm_defect: f64,
    /// Largest pre-renormalization `|‖u*‖ − 1|`.
    pub max_pre_renorm_defect: f64,
    /// Steps with pre-renormalization defect above `10·dt·‖rhs‖²`.
    pub pre_renorm_violations: u64,
    /// Steps with `Y_{k+1} > Y_k + 1e−8·(1 + Y_0)`.
    pub energy_increases: u64,
    pub max_energy_increase: f64,
    /// States violating `‖u‖²_V ≤ 2Y_0` or `‖u‖^{2n} ≤ 2nY_0` (with slack).
    pub bound_violations: u64,
    pub halvings: u64,
}

/// Time series produced by [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: FlowParams,
    pub scheme: SchemeConfig,
    pub initial_energy: f64,
    pub records: Vec<Record>,
    pub states: Vec<ManifoldState>,
    pub monitors: Monitors,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn last_state(&self) -> Option<&ManifoldState> {
        self.states.last()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// A failed integration together with what was recorded before the failure.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct IntegrationFailure {
    pub error: DynamicsError,
    pub partial: Box<Trajectory>,
}

/// Stepwise driver holding the current state, time index and accumulated
/// dissipation. Everything needed to resume a run lives here.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: FlowParams,
    cfg: SchemeConfig,
    state: ManifoldState,
    step_index: u64,
    dissipation: f64,
    initial_energy: f64,
    monitors: Monitors,
}

impl Integrator {
    /// Renormalizes `u0` onto the sphere and starts at `t = 0`.
    pub fn new(u0: &Field, params: FlowParams, cfg: SchemeConfig) -> Result<Self, DynamicsError> {
        params.validate()?;
        cfg.validate()?;
        let state = ManifoldState::project(u0)?;
        let initial_energy = energy(state.field(), &params);
        let mut it = Integrator {
            params,
            cfg,
            state,
            step_index: 0,
            dissipation: 0.0,
            initial_energy,
            monitors: Monitors::default(),
        };
        it.check_bounds();
        Ok(it)
    }

    /// Continues a run from a saved state at step `step_index`.
    pub fn resume(
        state: Field,
        step_index: u64,
        dissipation: f64,
        initial_energy: f64,
        params: FlowParams,
        cfg: SchemeConfig,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        cfg.validate()?;
        Ok(Integrator {
            params,
            cfg,
            state: ManifoldState::new(state)?,
            step_index,
            dissipation,
            initial_energy,
            monitors: Monitors::default(),
        })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ManifoldState {
        &self.state
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    pub fn dissipation_integral(&self) -> f64 {
        self.dissipation
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn monitors(&self) -> &Monitors {
        &self.monitors
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.cfg.n_steps()
    }

    fn check_bounds(&mut self) {
        let r = seminorms(self.state.field(), self.params.n);
        let y0 = self.initial_energy;
        let v_bound = 2.0 * y0 * (1.0 + BOUND_SLACK);
        let p_bound = 2.0 * self.params.n as f64 * y0 * (1.0 + BOUND_SLACK);
        if r.v_norm_sq > v_bound || r.l2n_2n > p_bound {
            self.monitors.bound_violations += 1;
        }
        self.monitors.max_norm_defect = self.monitors.max_norm_defect.max(self.state.norm_defect());
    }

    /// Takes one step and updates the monitors.
    pub fn advance(&mut self) -> Result<StepReport, DynamicsError> {
        let (next, report) = step_inner(&self.state, &self.params, &self.cfg, self.time())?;
        self.state = next;
        self.step_index += 1;
        self.dissipation += report.dissipation;

        let m = &mut self.monitors;
        m.steps += 1;
        m.max_pre_renorm_defect = m.max_pre_renorm_defect.max(report.pre_renorm_defect);
        if report.pre_renorm_defect > 10.0 * self.cfg.dt * report.rhs_norm_sq {
            m.pre_renorm_violations += 1;
        }
        let rise = report.energy_after - report.energy_before;
        m.max_energy_increase = m.max_energy_increase.max(rise);
        if rise > ENERGY_SLACK * (1.0 + self.initial_energy) {
            m.energy_increases += 1;
        }
        if report.halved {
            m.halvings += 1;
        }
        self.check_bounds();
        Ok(report)
    }

    /// Diagnostics of the current state.
    pub fn record(&self) -> Result<Record, DynamicsError> {
        let u = self.state.field();
        let r = seminorms(u, self.params.n);
        let m = residual_m(u, &self.params)?;
        Ok(Record {
            time: self.time(),
            energy: 0.5 * r.v_norm_sq + r.l2n_2n / (2.0 * self.params.n as f64),
            l2_norm: r.l2,
            v_norm_sq: r.v_norm_sq,
            residual_norm: m.l2_norm(),
            dissipation_integral: self.dissipation,
        })
    }

    /// Runs to `t_end`, recording the current state first, then every
    /// `record_every` steps and at the final step. `observer` sees every
    /// accepted step.
    pub fn run_observed(
        &mut self,
        mut observer: impl FnMut(&StepReport, &ManifoldState),
    ) -> Result<Trajectory, IntegrationFailure> {
        let mut traj = Trajectory {
            params: self.params,
            scheme: self.cfg,
            initial_energy: self.initial_energy,
            records: Vec::new(),
            states: Vec::new(),
            monitors: Monitors::default(),
        };
        let fail = |error: DynamicsError, mut traj: Trajectory, monitors: Monitors| {
            traj.monitors = monitors;
            IntegrationFailure {
                error,
                partial: Box::new(traj),
            }
        };
        match self.record() {
            Ok(r) => {
                traj.records.push(r);
                traj.states.push(self.state.clone());
            }
            Err(e) => return Err(fail(e, traj, self.monitors)),
        }
        let n_steps = self.cfg.n_steps();
        while self.step_index < n_steps {
            let report = match self.advance() {
                Ok(r) => r,
                Err(e) => return Err(fail(e, traj, self.monitors)),
            };
            observer(&report, &self.state);
            if self.step_index.is_multiple_of(self.cfg.record_every as u64)
                || self.step_index == n_steps
            {
                match self.record() {
                    Ok(r) => {
                        traj.records.push(r);
                        traj.states.push(self.state.clone());
                    }
                    Err(e) => {
                        let e = DynamicsError::Divergence {
                            time: self.time(),
                            reason: e.to_string(),
                        };
                        return Err(fail(e, traj, self.monitors));
                    }
                }
            }
        }
        traj.monitors = self.monitors;
        Ok(traj)
    }

    pub fn run(&mut self) -> Result<Trajectory, IntegrationFailure> {
        self.run_observed(|_, _| {})
    }
}

/// Integrates from `u0` (renormalized first) to `cfg.t_end`.
pub fn integrate(
    u0: &Field,
    params: &FlowParams,
    cfg: &SchemeConfig,
) -> Result<Trajectory, IntegrationFailure> {
    integrate_observed(u0, params, cfg, |_, _| {})
}

pub fn integrate_observed(
    u0: &Field,
    params: &FlowParams,
    cfg: &SchemeConfig,
    observer: impl FnMut(&StepReport, &ManifoldState),
) -> Result<Trajectory, IntegrationFailure> {
    let mut it = Integrator::new(u0, *params, *cfg).map_err(|error| IntegrationFailure {
        error,
        partial: Box::new(Trajectory {
            params: *params,
            scheme: *cfg,
            initial_energy: f64::NAN,
            records: Vec::new(),
            states: Vec::new(),
            monitors: Monitors::default(),
        }),
    })?;
    it.run_observed(observer)
}
