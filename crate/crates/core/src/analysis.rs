//! Post-processing of trajectories: decay-law fits, Łojasiewicz exponent
//! estimates, convergence checks and ensemble sweeps over random data.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{energy, DynamicsError, FlowParams, Integrator, SchemeConfig, Trajectory};
use crate::field::{Domain, Field};
use crate::manifold::renormalize;
use crate::stationary::{
    find_equilibrium, signed_distance, Equilibrium, StationaryError, DEFAULT_NEWTON_TOL,
};

/// Minimum number of samples a fit accepts.
pub const MIN_FIT_POINTS: usize = 10;
/// Range of `|Y − Y(φ)|` used by [`estimate_lojasiewicz`].
pub const THETA_WINDOW: (f64, f64) = (1e-10, 1e-2);
/// Endpoints closer than this (up to sign) share a cluster.
pub const CLUSTER_RADIUS: f64 = 1e-4;
/// Random initial data excite only this many leading modes.
pub const RANDOM_MODES: usize = 8;
/// Thresholds declaring a trajectory converged.
pub const CONVERGED_RESIDUAL: f64 = 1e-8;
pub const CONVERGED_TAIL: f64 = 1e-6;
pub const CONVERGED_DISTANCE: f64 = 1e-6;
/// Largest terminal residual accepted by [`estimate_lojasiewicz`].
pub const THETA_TERMINAL_RESIDUAL: f64 = 1e-6;
const MAX_TAIL_STATES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("fit window holds {got} usable points, need at least {needed}")]
    Window { needed: usize, got: usize },
    #[error("series is not decaying (fitted rate {0:e})")]
    NonDecaying(f64),
    #[error("exponent estimation failed: {0}")]
    Estimation(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `y ≈ κ₁ e^{−κ₂ t}`
    Exponential,
    /// `y ≈ κ (1 + t)^{−p}`
    Polynomial,
    /// Whichever of the two fits better on the log scale.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `κ₁` or `κ`.
    pub amplitude: f64,
    /// `κ₂` or `p`.
    pub rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

struct LineFit {
    intercept: f64,
    slope: f64,
    r_squared: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit {
        intercept,
        slope,
        r_squared,
    }
}

/// Least-squares fit of a decay law to `values(times)` on the log scale.
///
/// Samples outside `window`, non-positive values and values below
/// `100·ε·max` are dropped before fitting.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    model: DecayModel,
    window: Option<(f64, f64)>,
) -> Result<DecayFit, AnalysisError> {
    if times.len() != values.len() {
        return Err(AnalysisError::Invalid {
            key: "values",
            msg: format!("{} values for {} times", values.len(), times.len()),
        });
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let in_window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= lo && **t <= hi && v.is_finite())
        .map(|(t, v)| (*t, *v))
        .collect();
    let vmax = in_window.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
    let floor = 100.0 * f64::EPSILON * vmax;
    let pts: Vec<(f64, f64)> = in_window
        .into_iter()
        .filter(|(_, v)| *v > 0.0 && *v >= floor)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::Window {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let t_lo = pts.iter().fold(f64::INFINITY, |m, p| m.min(p.0));
    let t_hi = pts.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.0));
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();

    let fit_one = |m: DecayModel| -> Result<DecayFit, AnalysisError> {
        let x: Vec<f64> = match m {
            DecayModel::Polynomial => {
                if t_lo <= -1.0 {
                    return Err(AnalysisError::Invalid {
                        key: "times",
                        msg: "polynomial model needs t > -1".into(),
                    });
                }
                pts.iter().map(|p| p.0.ln_1p()).collect()
            }
            _ => pts.iter().map(|p| p.0).collect(),
        };
        let line = least_squares(&x, &ly);
        let rate = -line.slope;
        if !(rate > 0.0) {
            return Err(AnalysisError::NonDecaying(rate));
        }
        Ok(DecayFit {
            model: m,
            amplitude: line.intercept.exp(),
            rate,
            window: (t_lo, t_hi),
            r_squared: line.r_squared,
            n_points: pts.len(),
        })
    };

    match model {
        DecayModel::Auto => {
            let e = fit_one(DecayModel::Exponential);
            let p = fit_one(DecayModel::Polynomial);
            match (e, p) {
                (Ok(e), Ok(p)) => Ok(if p.r_squared > e.r_squared { p } else { e }),
                (Ok(e), Err(_)) => Ok(e),
                (Err(_), Ok(p)) => Ok(p),
                (Err(e), Err(_)) => Err(e),
            }
        }
        m => fit_one(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: f64,
    /// Slope of `log‖M(u)‖` against `log|Y(u) − Y(φ)|`; equals `1 − θ`.
    pub slope: f64,
    /// Residual range of the samples used.
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Regresses `log residual` on `log energy_gap` over samples with the gap in
/// [`THETA_WINDOW`].
pub fn estimate_theta_from_series(
    energy_gaps: &[f64],
    residuals: &[f64],
) -> Result<ThetaEstimate, AnalysisError> {
    let (lo, hi) = THETA_WINDOW;
    let pts: Vec<(f64, f64)> = energy_gaps
        .iter()
        .zip(residuals)
        .map(|(g, r)| (g.abs(), *r))
        .filter(|(g, r)| *g >= lo && *g <= hi && *r > 0.0 && r.is_finite())
        .collect();
    if pts.len() < 2 {
        return Err(AnalysisError::Estimation(format!(
            "{} samples with |Y - Y(phi)| in [{lo:e}, {hi:e}]",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let slope = least_squares(&x, &y).slope;
    if !(slope > 0.0 && slope <= 1.0) {
        return Err(AnalysisError::Estimation(format!(
            "slope {slope} outside (0, 1]"
        )));
    }
    let rmin = pts.iter().fold(f64::INFINITY, |m, p| m.min(p.1));
    let rmax = pts.iter().fold(0.0f64, |m, p| m.max(p.1));
    Ok(ThetaEstimate {
        theta: 1.0 - slope,
        slope,
        window: (rmin, rmax),
        n_points: pts.len(),
    })
}

/// Łojasiewicz exponent along a trajectory approaching `eq`.
pub fn estimate_lojasiewicz(
    traj: &Trajectory,
    eq: &Equilibrium,
) -> Result<ThetaEstimate, AnalysisError> {
    let last = traj
        .records
        .last()
        .ok_or_else(|| AnalysisError::Estimation("empty trajectory".into()))?;
    if !(last.residual_norm <= THETA_TERMINAL_RESIDUAL) {
        return Err(AnalysisError::Estimation(format!(
            "terminal residual {:e} exceeds {THETA_TERMINAL_RESIDUAL:e}",
            last.residual_norm
        )));
    }
    let y_inf = energy(&eq.field, &traj.params);
    let gaps: Vec<f64> = traj.records.iter().map(|r| r.energy - y_inf).collect();
    let res: Vec<f64> = traj.records.iter().map(|r| r.residual_norm).collect();
    estimate_theta_from_series(&gaps, &res)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Terminal `min ‖u(T) ∓ φ‖_{L²}`.
    pub l2_distance: f64,
    /// V-norm distance for the same sign.
    pub v_distance: f64,
    pub terminal_residual: f64,
    /// `sup_{s,t ≥ T/2} ‖u(s) − u(t)‖_{L²}` over recorded states.
    pub cauchy_tail: f64,
    pub converged: bool,
}

/// Distances from every recorded state to `target`, up to sign.
pub fn distance_series(traj: &Trajectory, target: &Field) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| signed_distance(s.field(), target))
        .collect()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Terminal distances and Cauchy tail of `traj` relative to `eq`. Tails with
/// more than 4096 states are thinned evenly, keeping both ends.
pub fn verify_convergence(traj: &Trajectory, eq: &Equilibrium) -> ConvergenceReport {
    let (Some(last), Some(rec)) = (traj.states.last(), traj.records.last()) else {
        return ConvergenceReport {
            l2_distance: f64::NAN,
            v_distance: f64::NAN,
            terminal_residual: f64::NAN,
            cauchy_tail: f64::NAN,
            converged: false,
        };
    };
    let u = last.field().modes();
    let phi = eq.field.modes();
    let minus = l2_diff(u, phi);
    let plus = u
        .iter()
        .zip(phi)
        .map(|(x, y)| (x + y) * (x + y))
        .sum::<f64>()
        .sqrt();
    let sign = if plus < minus { -1.0 } else { 1.0 };
    let v_distance = u
        .iter()
        .zip(phi)
        .zip(eq.field.domain().v_weights())
        .map(|((x, y), w)| w * (x - sign * y) * (x - sign * y))
        .sum::<f64>()
        .sqrt();

    let t_half = 0.5 * rec.time;
    let tail: Vec<&[f64]> = traj
        .records
        .iter()
        .zip(&traj.states)
        .filter(|(r, _)| r.time >= t_half)
        .map(|(_, s)| s.field().modes())
        .collect();
    let tail: Vec<&[f64]> = if tail.len() > MAX_TAIL_STATES {
        let m = tail.len() - 1;
        (0..MAX_TAIL_STATES)
            .map(|i| tail[i * m / (MAX_TAIL_STATES - 1)])
            .collect()
    } else {
        tail
    };
    let cauchy_tail = (0..tail.len())
        .into_par_iter()
        .map(|i| {
            tail[i + 1..]
                .iter()
                .fold(0.0f64, |m, b| m.max(l2_diff(tail[i], b)))
        })
        .reduce(|| 0.0, f64::max);

    ConvergenceReport {
        l2_distance: minus.min(plus),
        v_distance,
        terminal_residual: rec.residual_norm,
        cauchy_tail,
        converged: rec.residual_norm <= CONVERGED_RESIDUAL
            && cauchy_tail <= CONVERGED_TAIL
            && minus.min(plus) <= CONVERGED_DISTANCE,
    }
}

/// Unit field with standard normal coefficients on the leading
/// [`RANDOM_MODES`] modes.
pub fn random_unit_field<R: Rng + ?Sized>(domain: &Arc<Domain>, rng: &mut R) -> Field {
    loop {
        let mut modes = vec![0.0; domain.n_modes()];
        for c in modes.iter_mut().take(RANDOM_MODES) {
            *c = rng.sample(StandardNormal);
        }
        if let Ok(f) = Field::from_modes(domain, modes)
            .map_err(|_| ())
            .and_then(|f| renormalize(&f).map_err(|_| ()))
        {
            return f;
        }
    }
}

/// Generator for trajectory `index` of a sweep seeded with `rng_seed`.
pub fn trajectory_rng(rng_seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: ClusterRepresentative,
    pub members: usize,
    /// Largest signed distance from a member's polished endpoint to the
    /// representative.
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRepresentative {
    pub modes: Vec<f64>,
    pub mu: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub index: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub steps: u64,
    pub bound_violations: u64,
    pub energy_increases: u64,
    /// Failure message when the seed is counted as unconverged.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub seeds: usize,
    pub clusters: Vec<Cluster>,
    pub unconverged: usize,
    /// States violating `‖u‖²_V ≤ 2Y(u₀)` or `‖u‖^{2n} ≤ 2nY(u₀)`.
    pub bound_violations: u64,
    /// Steps where the energy rose, plus seeds ending above `Y(u₀)`.
    pub energy_violations: u64,
    pub states_checked: u64,
    pub outcomes: Vec<SeedOutcome>,
}

struct SeedResult {
    outcome: SeedOutcome,
    equilibrium: Option<Equilibrium>,
}

fn run_seed(index: usize, u0: &Field, params: &FlowParams, cfg: &SchemeConfig) -> SeedResult {
    let mut outcome = SeedOutcome {
        index,
        initial_energy: f64::NAN,
        final_energy: f64::NAN,
        steps: 0,
        bound_violations: 0,
        energy_increases: 0,
        failure: None,
    };
    let mut it = match Integrator::new(u0, *params, *cfg) {
        Ok(it) => it,
        Err(e) => {
            outcome.failure = Some(e.to_string());
            return SeedResult {
                outcome,
                equilibrium: None,
            };
        }
    };
    outcome.initial_energy = it.initial_energy();
    let mut failure = None;
    while !it.is_finished() {
        if let Err(e) = it.advance() {
            failure = Some(e.to_string());
            break;
        }
    }
    let m = it.monitors();
    outcome.steps = m.steps;
    outcome.bound_violations = m.bound_violations;
    outcome.energy_increases = m.energy_increases;
    outcome.final_energy = energy(it.state().field(), params);
    if outcome.final_energy > outcome.initial_energy {
        outcome.energy_increases += 1;
    }
    let equilibrium = match failure {
        Some(f) => {
            outcome.failure = Some(f);
            None
        }
        None => match find_equilibrium(it.state().field(), params, DEFAULT_NEWTON_TOL) {
            Ok(eq) => Some(eq),
            Err(e) => {
                outcome.failure = Some(e.to_string());
                None
            }
        },
    };
    SeedResult {
        outcome,
        equilibrium,
    }
}

/// Integrates every initial field in parallel, polishes each endpoint with
/// Newton and groups the equilibria up to sign. Divergent or unpolishable
/// runs count as unconverged. The report depends only on the inputs, not on
/// scheduling.
pub fn attractor_sweep_from(
    initials: &[Field],
    params: &FlowParams,
    cfg: &SchemeConfig,
) -> Result<AttractorReport, AnalysisError> {
    if initials.is_empty() {
        return Err(AnalysisError::Invalid {
            key: "seeds",
            msg: "must be at least 1".into(),
        });
    }
    params.validate()?;
    cfg.validate()?;
    let results: Vec<SeedResult> = initials
        .par_iter()
        .enumerate()
        .map(|(i, u0)| run_seed(i, u0, params, cfg))
        .collect();

    let mut clusters: Vec<(Equilibrium, usize, f64)> = Vec::new();
    let mut report = AttractorReport {
        seeds: initials.len(),
        clusters: Vec::new(),
        unconverged: 0,
        bound_violations: 0,
        energy_violations: 0,
        states_checked: 0,
        outcomes: Vec::with_capacity(results.len()),
    };
    for r in results {
        report.bound_violations += r.outcome.bound_violations;
        report.energy_violations += r.outcome.energy_increases;
        report.states_checked += r.outcome.steps + 1;
        match r.equilibrium {
            None => report.unconverged += 1,
            Some(eq) => {
                let hit = clusters
                    .iter_mut()
                    .map(|c| {
                        let d = c.0.signed_distance(&eq.field);
                        (c, d)
                    })
                    .find(|(_, d)| *d < CLUSTER_RADIUS);
                match hit {
                    Some((c, d)) => {
                        c.1 += 1;
                        c.2 = c.2.max(d);
                    }
                    None => clusters.push((eq, 1, 0.0)),
                }
            }
        }
        report.outcomes.push(r.outcome);
    }
    report.clusters = clusters
        .into_iter()
        .map(|(eq, members, max_distance)| Cluster {
            representative: ClusterRepresentative {
                modes: eq.field.modes().to_vec(),
                mu: eq.mu,
                residual_norm: eq.residual_norm,
                iterations: eq.iterations,
            },
            members,
            max_distance,
        })
        .collect();
    Ok(report)
}

/// [`attractor_sweep_from`] on `seeds` random unit fields, trajectory `i`
/// drawing from [`trajectory_rng`]`(rng_seed, i)`.
pub fn attractor_sweep(
    seeds: usize,
    domain: &Arc<Domain>,
    params: &FlowParams,
    cfg: &SchemeConfig,
    rng_seed: u64,
) -> Result<AttractorReport, AnalysisError> {
    if seeds == 0 {
        return Err(AnalysisError::Invalid {
            key: "seeds",
            msg: "must be at least 1".into(),
        });
    }
    let initials: Vec<Field> = (0..seeds)
        .map(|i| random_unit_field(domain, &mut trajectory_rng(rng_seed, i as u64)))
        .collect();
    attractor_sweep_from(&initials, params, cfg)
}

impl AttractorReport {
    /// Representatives as fields on `domain`.
    pub fn representatives(&self, domain: &Arc<Domain>) -> Vec<Field> {
        self.clusters
            .iter()
            .filter_map(|c| Field::from_modes(domain, c.representative.modes.clone()).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::field::{build_domain, DomainSpec};
    use std::f64::consts::PI;

    fn dom(n: usize) -> Arc<Domain> {
        build_domain(DomainSpec::new(1.0, n)).unwrap()
    }

    fn lam(k: f64) -> f64 {
        (k * PI).powi(4) + 2.0 * (k * PI).powi(2)
    }

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid(101, 5.0);
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &y, DecayModel::Auto, None).unwrap();
        assert_eq!(f.model, DecayModel::Exponential);
        assert!((f.amplitude - 3.0).abs() < 1e-6);
        assert!((f.rate - 2.0).abs() < 1e-6);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_polynomial() {
        let t = grid(101, 50.0);
        let y: Vec<f64> = t.iter().map(|t| 4.0 * (1.0 + t).powf(-0.5)).collect();
        let f = fit_decay(&t, &y, DecayModel::Auto, None).unwrap();
        assert_eq!(f.model, DecayModel::Polynomial);
        assert!((f.amplitude - 4.0).abs() < 1e-6);
        assert!((f.rate - 0.5).abs() < 1e-6);
    }

    #[test]
    fn fit_scale_equivariance() {
        let t = grid(40, 3.0);
        let y: Vec<f64> = t
            .iter()
            .map(|t| (-1.3 * t).exp() * (1.0 + 0.1 * (7.0 * t).sin()))
            .collect();
        let base = fit_decay(&t, &y, DecayModel::Exponential, None).unwrap();
        for c in [1e-3, 2.5, 1e4] {
            let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
            let f = fit_decay(&t, &ys, DecayModel::Exponential, None).unwrap();
            assert!((f.rate - base.rate).abs() < 1e-10);
            assert!((f.amplitude / (c * base.amplitude) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_window_errors() {
        let t = grid(9, 1.0);
        let y = vec![1.0; 9];
        assert!(matches!(
            fit_decay(&t, &y, DecayModel::Exponential, None),
            Err(AnalysisError::Window { got: 9, .. })
        ));
        let t = grid(30, 1.0);
        let y: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        assert!(matches!(
            fit_decay(&t, &y, DecayModel::Exponential, Some((0.0, 0.2))),
            Err(AnalysisError::Window { .. })
        ));
        let grow: Vec<f64> = t.iter().map(|t| t.exp()).collect();
        assert!(matches!(
            fit_decay(&t, &grow, DecayModel::Exponential, None),
            Err(AnalysisError::NonDecaying(_))
        ));
    }

    #[test]
    fn fit_drops_roundoff_floor() {
        let t = grid(60, 60.0);
        let y: Vec<f64> = t.iter().map(|t| (-t).exp().max(1e-300)).collect();
        let f = fit_decay(&t, &y, DecayModel::Exponential, None).unwrap();
        assert!((f.rate - 1.0).abs() < 1e-9);
        assert!(f.n_points < 60);
    }

    #[test]
    fn theta_from_power_laws() {
        let gaps: Vec<f64> = (0..40).map(|i| 10f64.powf(-2.0 - 0.2 * i as f64)).collect();
        for (p, want) in [(0.5, 0.5), (0.75, 0.25)] {
            let res: Vec<f64> = gaps.iter().map(|g| g.powf(p)).collect();
            let th = estimate_theta_from_series(&gaps, &res).unwrap();
            assert!((th.theta - want).abs() < 1e-6, "{th:?}");
        }
        assert!(estimate_theta_from_series(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ground_state_approach() {
        let d = dom(64);
        let p = FlowParams::new(1, 0.0).unwrap();
        let e1 = Field::basis_mode(&d, 1).unwrap();
        let u0 = e1
            .add_scaled(&Field::basis_mode(&d, 2).unwrap(), 1.0)
            .unwrap();
        let traj = integrate(
            &u0,
            &p,
            &SchemeConfig::imex(1e-5, 0.02).with_record_every(10),
        )
        .unwrap();
        let eq = find_equilibrium(&e1, &p, DEFAULT_NEWTON_TOL).unwrap();

        let dist = distance_series(&traj, &e1);
        let fit = fit_decay(
            &traj.times(),
            &dist,
            DecayModel::Exponential,
            Some((0.002, 0.015)),
        )
        .unwrap();
        let gap = lam(2.0) - lam(1.0);
        assert!((fit.rate / gap - 1.0).abs() < 0.05, "{}", fit.rate);

        let th = estimate_lojasiewicz(&traj, &eq).unwrap();
        assert!((0.45..=0.55).contains(&th.theta), "{th:?}");

        let rep = verify_convergence(&traj, &eq);
        assert!(rep.converged, "{rep:?}");
        assert!(rep.l2_distance <= 1e-6);
    }

    #[test]
    fn constant_and_far_trajectories() {
        let d = dom(32);
        let p = FlowParams::new(1, 0.0).unwrap();
        let e1 = Field::basis_mode(&d, 1).unwrap();
        let eq = find_equilibrium(&e1, &p, DEFAULT_NEWTON_TOL).unwrap();
        let traj = integrate(&e1, &p, &SchemeConfig::imex(1e-5, 1e-3)).unwrap();
        let rep = verify_convergence(&traj, &eq);
        assert!(rep.converged);
        assert!(rep.l2_distance < 1e-14 && rep.cauchy_tail < 1e-14);

        let e3 = Field::basis_mode(&d, 3).unwrap();
        let far = integrate(&e3, &p, &SchemeConfig::imex(1e-5, 1e-3)).unwrap();
        let rep = verify_convergence(&far, &eq);
        assert!(!rep.converged);
        assert!((rep.l2_distance - 2f64.sqrt()).abs() < 1e-12);
        assert!(rep.v_distance > rep.l2_distance);
    }

    #[test]
    fn random_fields_are_unit_and_reproducible() {
        let d = dom(32);
        let a = random_unit_field(&d, &mut trajectory_rng(7, 3));
        let b = random_unit_field(&d, &mut trajectory_rng(7, 3));
        let c = random_unit_field(&d, &mut trajectory_rng(7, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.l2_norm() - 1.0).abs() < 1e-15);
        assert!(a.modes()[RANDOM_MODES..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn sweep_small() {
        let d = dom(32);
        let p = FlowParams::new(1, 0.0).unwrap();
        let cfg = SchemeConfig::imex(1e-5, 0.03);
        let rep = attractor_sweep(4, &d, &p, &cfg, 11).unwrap();
        assert_eq!(rep.unconverged, 0);
        assert_eq!(rep.clusters.len(), 1);
        assert_eq!(rep.clusters[0].members, 4);
        assert_eq!(rep.bound_violations, 0);
        assert_eq!(rep.energy_violations, 0);
        let e1 = Field::basis_mode(&d, 1).unwrap();
        assert!(signed_distance(&rep.representatives(&d)[0], &e1) < 1e-8);
        assert_eq!(rep, attractor_sweep(4, &d, &p, &cfg, 11).unwrap());
        assert!(attractor_sweep(0, &d, &p, &cfg, 11).is_err());
    }

    #[test]
    fn sweep_from_second_mode_stays_there() {
        let d = dom(32);
        let p = FlowParams::new(1, 0.0).unwrap();
        let e2 = Field::basis_mode(&d, 2).unwrap();
        let rep = attractor_sweep_from(
            std::slice::from_ref(&e2),
            &p,
            &SchemeConfig::imex(1e-5, 0.01),
        )
        .unwrap();
        assert_eq!(rep.clusters.len(), 1);
        assert!(signed_distance(&rep.representatives(&d)[0], &e2) < 1e-10);
    }
}
