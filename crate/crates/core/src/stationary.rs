//! Equilibria `Aφ + φ^{2n−1} = μφ` on the unit sphere, the linearized
//! operator `L` about them, and stability classification.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{residual_m, rhs, DynamicsError, FlowParams};
use crate::field::{dot, seminorms, Field, FieldError};
use crate::manifold::{renormalize, ManifoldError};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Relative symmetry tolerance `max|L − Lᵀ| ≤ tol·max|L|`.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of the spectral radius count as zero.
pub const DEGENERACY_TOL: f64 = 1e-7;
/// Step of the central differences used for the flow Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular bordered Jacobian at iteration {iteration} (degenerate point)")]
    Degenerate { iteration: usize },
    #[error("linearization is not symmetric: max|L - L^T| / max|L| = {0:e}")]
    Asymmetric(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A converged stationary point with its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub field: Field,
    pub mu: f64,
    /// `‖M(φ)‖_{L²}`
    pub residual_norm: f64,
    pub iterations: usize,
    pub params: FlowParams,
}

impl Equilibrium {
    /// Pointwise power `φ^{2n−1}` in mode space, truncated when dealiasing.
    pub fn power_modes(&self) -> Vec<f64> {
        power_modes(&self.field, &self.params)
    }

    /// `|μ − ⟨Aφ + φ^{2n−1}, φ⟩|`
    pub fn mu_defect(&self) -> f64 {
        (self.mu - rayleigh(&self.field, &self.params)).abs()
    }

    /// Distance to `other` up to the `φ ↦ −φ` symmetry.
    pub fn signed_distance(&self, other: &Field) -> f64 {
        signed_distance(&self.field, other)
    }
}

/// `min(‖a − b‖, ‖a + b‖)` in L².
pub fn signed_distance(a: &Field, b: &Field) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (x, y) in a.modes().iter().zip(b.modes()) {
        minus += (x - y) * (x - y);
        plus += (x + y) * (x + y);
    }
    minus.min(plus).sqrt()
}

fn power_modes(u: &Field, params: &FlowParams) -> Vec<f64> {
    if params.n == 1 {
        return u.modes().to_vec();
    }
    let mut m = u.domain().to_modes(&u.pointwise_powi(params.power()));
    if params.dealias {
        u.domain().dealias(&mut m);
    }
    m
}

/// `⟨Aφ + φ^{2n−1}, φ⟩`
fn rayleigh(u: &Field, params: &FlowParams) -> f64 {
    let p = power_modes(u, params);
    u.modes()
        .iter()
        .zip(&p)
        .zip(u.domain().a_eigenvalues())
        .map(|((c, pi), l)| (l * c + pi) * c)
        .sum()
}

/// Mode-space matrix of `w ↦ g·w` for a grid function `g`.
fn multiplication_matrix(u: &Field, g: &[f64]) -> DMatrix<f64> {
    let d = u.domain();
    let b = d.basis();
    let mut scaled = b.clone();
    for (j, gj) in g.iter().enumerate() {
        scaled.row_mut(j).scale_mut(*gj);
    }
    b.transpose() * scaled * d.quadrature_weight()
}

/// Jacobian of `u ↦ u^{2n−1}` (with truncation if enabled) in mode space.
fn power_jacobian(u: &Field, params: &FlowParams) -> DMatrix<f64> {
    let n = u.domain().n_modes();
    if params.n == 1 {
        return DMatrix::identity(n, n);
    }
    let e = params.power();
    let g: Vec<f64> = u
        .values()
        .iter()
        .map(|v| e as f64 * v.powi(e - 1))
        .collect();
    let mut m = multiplication_matrix(u, &g);
    if params.dealias {
        let cut = u.domain().dealias_cutoff();
        m.rows_mut(cut, n - cut).fill(0.0);
    }
    m
}

/// Solves `F(φ, μ) = (Aφ + φ^{2n−1} − μφ, ½(‖φ‖² − 1)) = 0` by Newton's
/// method on the bordered system, starting from the normalized guess and its
/// Rayleigh quotient. Converged when `‖Aφ + φ^{2n−1} − μφ‖ ≤ tol·(1 + |μ|)`.
pub fn find_equilibrium(
    guess: &Field,
    params: &FlowParams,
    tol: f64,
) -> Result<Equilibrium, StationaryError> {
    params.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(StationaryError::Invalid {
            key: "tol",
            msg: format!("must be positive, got {tol}"),
        });
    }
    let mut phi = renormalize(guess)?;
    let d = phi.domain().clone();
    let n = d.n_modes();
    let lam = d.a_eigenvalues();
    let mut mu = rayleigh(&phi, params);
    let mut residual = f64::INFINITY;

    for iteration in 0..=MAX_NEWTON_ITERATIONS {
        let p = power_modes(&phi, params);
        let c = phi.modes();
        let f1: Vec<f64> = (0..n).map(|i| lam[i] * c[i] + p[i] - mu * c[i]).collect();
        let f2 = 0.5 * (dot(c, c) - 1.0);
        if f1.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
            return Err(StationaryError::NoConvergence {
                iterations: iteration,
                residual: f64::NAN,
            });
        }
        residual = dot(&f1, &f1).sqrt();
        if residual <= tol * (1.0 + mu.abs()) && f2.abs() <= 1e-14 {
            return finish(phi, params, iteration);
        }
        if iteration == MAX_NEWTON_ITERATIONS {
            break;
        }

        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&power_jacobian(&phi, params));
        for i in 0..n {
            jac[(i, i)] += lam[i] - mu;
            jac[(i, n)] = -c[i];
            jac[(n, i)] = c[i];
        }
        let mut f = DVector::from_iterator(n + 1, f1.iter().copied().chain([f2]));
        f.neg_mut();
        let delta = jac
            .lu()
            .solve(&f)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or(StationaryError::Degenerate { iteration })?;
        let next: Vec<f64> = (0..n).map(|i| c[i] + delta[i]).collect();
        mu += delta[n];
        phi = Field::from_modes(&d, next)?;
    }
    Err(StationaryError::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual,
    })
}

fn finish(
    phi: Field,
    params: &FlowParams,
    iterations: usize,
) -> Result<Equilibrium, StationaryError> {
    let phi = renormalize(&phi)?;
    let mu = rayleigh(&phi, params);
    let residual_norm = residual_m(&phi, params)?.l2_norm();
    Ok(Equilibrium {
        field: phi,
        mu,
        residual_norm,
        iterations,
        params: *params,
    })
}

/// Mode-space matrix of the linearization `L` at an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperator {
    pub matrix: DMatrix<f64>,
    pub base: Equilibrium,
}

impl LinearizedOperator {
    /// `max|L_ij − L_ji| / max|L|` (zero for the zero matrix).
    pub fn symmetry_defect(&self) -> f64 {
        let m = &self.matrix;
        let scale = m.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (m - m.transpose()).amax() / scale
    }

    pub fn apply(&self, w: &Field) -> Result<Field, StationaryError> {
        if !w.same_domain(&self.base.field) {
            return Err(FieldError::DomainMismatch.into());
        }
        let v = &self.matrix * DVector::from_column_slice(w.modes());
        Ok(Field::from_modes(w.domain(), v.as_slice().to_vec())?)
    }
}

/// Assembles
///
/// ```text
/// Lw = −Aw + (‖φ‖²_V + ‖φ‖² + ‖φ‖^{2n}_{L^{2n}})w
///      + (⟨2φ,w⟩_V + ⟨2φ,w⟩ + 2n⟨φ^{2n−1},w⟩)φ − (2n−1)φ^{2n−2}w
/// ```
///
/// with the rank-one bracket as an outer product and the multiplication
/// operator by grid collocation. The pointwise terms are not truncated.
pub fn assemble_linearization(eq: &Equilibrium, params: &FlowParams) -> LinearizedOperator {
    let phi = &eq.field;
    let d = phi.domain();
    let n = d.n_modes();
    let norms = seminorms(phi, params.n);
    let shift = norms.v_norm_sq + norms.l2 * norms.l2 + norms.l2n_2n;
    let e = params.power();

    let g: Vec<f64> = phi
        .values()
        .iter()
        .map(|v| e as f64 * if params.n == 1 { 1.0 } else { v.powi(e - 1) })
        .collect();
    let mut m = if params.n == 1 {
        DMatrix::identity(n, n) * -(e as f64)
    } else {
        -multiplication_matrix(phi, &g)
    };

    let c = phi.modes();
    let power = d.to_modes(&phi.pointwise_powi(e));
    let row: Vec<f64> = (0..n)
        .map(|j| 2.0 * d.v_weights()[j] * c[j] + 2.0 * c[j] + 2.0 * params.n as f64 * power[j])
        .collect();
    for i in 0..n {
        m[(i, i)] += -d.a_eigenvalues()[i] + shift;
        for j in 0..n {
            m[(i, j)] += c[i] * row[j];
        }
    }
    LinearizedOperator {
        matrix: m,
        base: eq.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Eigenvalues of the symmetric part of `L`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues of the flow Jacobian on the tangent space, ascending.
    pub tangent_rates: Vec<f64>,
    pub classification: Stability,
    pub symmetry_defect: f64,
}

impl StabilityReport {
    /// Smallest decay rate `−max(tangent_rates)`.
    pub fn slowest_decay(&self) -> f64 {
        -self.tangent_rates.last().copied().unwrap_or(f64::NAN)
    }
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Orthonormal basis of `φ^⊥` as the last `N−1` columns of the Householder
/// reflector mapping `φ/‖φ‖` to `±e₁`.
fn tangent_basis(phi: &[f64]) -> DMatrix<f64> {
    let n = phi.len();
    let norm = dot(phi, phi).sqrt();
    let mut v: Vec<f64> = phi.iter().map(|x| x / norm).collect();
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv = dot(&v, &v);
    let h = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[j] / vv
    });
    h.columns(1, n - 1).into_owned()
}

/// Central-difference Jacobian of the flow velocity at `phi`.
pub fn flow_jacobian(phi: &Field, params: &FlowParams) -> Result<DMatrix<f64>, StationaryError> {
    let n = phi.domain().n_modes();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = phi.modes().to_vec();
        let mut minus = plus.clone();
        plus[j] += JACOBIAN_STEP;
        minus[j] -= JACOBIAN_STEP;
        let fp = rhs(&Field::from_modes(phi.domain(), plus)?, params)?;
        let fm = rhs(&Field::from_modes(phi.domain(), minus)?, params)?;
        for i in 0..n {
            jac[(i, j)] = (fp.modes()[i] - fm.modes()[i]) / (2.0 * JACOBIAN_STEP);
        }
    }
    Ok(jac)
}

fn near_zero(values: &[f64]) -> usize {
    let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .filter(|v| v.abs() <= DEGENERACY_TOL * radius)
        .count()
}

/// Eigendecomposition of `L` and of the tangent flow Jacobian.
///
/// Degenerate when a tangent rate vanishes or when `L` has a kernel beyond
/// one dimension; otherwise a saddle if any tangent rate is positive.
pub fn spectrum(op: &LinearizedOperator) -> Result<StabilityReport, StationaryError> {
    let defect = op.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(StationaryError::Asymmetric(defect));
    }
    let sym = (&op.matrix + op.matrix.transpose()) * 0.5;
    let eigenvalues = sorted_eigenvalues(sym);

    let phi = &op.base.field;
    let jac = flow_jacobian(phi, &op.base.params)?;
    let q = tangent_basis(phi.modes());
    let jt = q.transpose() * jac * &q;
    let tangent_rates = sorted_eigenvalues((&jt + jt.transpose()) * 0.5);

    let classification = if near_zero(&tangent_rates) > 0 || near_zero(&eigenvalues) > 1 {
        Stability::Degenerate
    } else if tangent_rates.iter().any(|r| *r > 0.0) {
        Stability::Saddle
    } else {
        Stability::Stable
    };
    Ok(StabilityReport {
        eigenvalues,
        tangent_rates,
        classification,
        symmetry_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{apply_a, build_domain, inner_product_l2, Domain, DomainSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn dom(n: usize) -> Arc<Domain> {
        build_domain(DomainSpec::new(1.0, n)).unwrap()
    }

    fn e(d: &Arc<Domain>, k: usize) -> Field {
        Field::basis_mode(d, k).unwrap()
    }

    fn lam(k: f64) -> f64 {
        (k * PI).powi(4) + 2.0 * (k * PI).powi(2)
    }

    fn p(n: u32) -> FlowParams {
        FlowParams::new(n, 0.0).unwrap()
    }

    #[test]
    fn ground_mode_is_exact_solution() {
        let d = dom(64);
        let eq = find_equilibrium(&e(&d, 1), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        assert_eq!(eq.iterations, 0);
        assert!((eq.mu - (lam(1.0) + 1.0)).abs() < 1e-10);
        assert!((eq.mu - 118.148).abs() < 1e-3);
        assert!(eq.signed_distance(&e(&d, 1)) < 1e-14);
    }

    #[test]
    fn perturbed_second_mode() {
        let d = dom(64);
        let guess = e(&d, 2).add_scaled(&e(&d, 1), 0.01).unwrap();
        let eq = find_equilibrium(&guess, &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let d1 = eq.signed_distance(&e(&d, 1));
        let d2 = eq.signed_distance(&e(&d, 2));
        assert!(d1.min(d2) < 1e-8, "{d1} {d2}");
        assert!(eq.residual_norm <= 1e-10 * (1.0 + eq.mu.abs()));
    }

    #[test]
    fn cubic_ground_state() {
        let d = dom(64);
        let eq = find_equilibrium(&e(&d, 1), &p(2), DEFAULT_NEWTON_TOL).unwrap();
        assert!(eq.residual_norm <= 1e-10, "{}", eq.residual_norm);
        assert!(eq.mu_defect() <= 1e-9 * (1.0 + eq.mu.abs()));
        assert!((eq.field.l2_norm() - 1.0).abs() <= 1e-12);
        let r = rhs(&eq.field, &p(2)).unwrap().l2_norm();
        assert!((r - eq.residual_norm).abs() <= 1e-11);
        // Pairing the equation with φ: μ = λ₁-ish + ‖φ‖⁴_{L⁴}.
        let au = apply_a(&eq.field);
        let want = inner_product_l2(&au, &eq.field).unwrap() + seminorms(&eq.field, 2).l2n_2n;
        assert!((eq.mu - want).abs() < 1e-9 * eq.mu);
        let neg = find_equilibrium(&e(&d, 1).negated(), &p(2), DEFAULT_NEWTON_TOL).unwrap();
        assert!(neg.field.add_scaled(&eq.field, 1.0).unwrap().l2_norm() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let d = dom(16);
        assert!(matches!(
            find_equilibrium(&Field::zeros(&d), &p(1), 1e-10),
            Err(StationaryError::Manifold(ManifoldError::ZeroField))
        ));
        assert!(matches!(
            find_equilibrium(&e(&d, 1), &p(1), 0.0),
            Err(StationaryError::Invalid { key: "tol", .. })
        ));
    }

    #[test]
    fn power_jacobian_matches_differences() {
        let d = dom(32);
        let params = p(3);
        let u = e(&d, 1).add_scaled(&e(&d, 3), 0.3).unwrap();
        let jac = power_jacobian(&u, &params);
        let h = 1e-6;
        for j in [0, 2, 5] {
            let up = u.add_scaled(&e(&d, j + 1), h).unwrap();
            let um = u.add_scaled(&e(&d, j + 1), -h).unwrap();
            let fp = power_modes(&up, &params);
            let fm = power_modes(&um, &params);
            for i in 0..32 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!(
                    (fd - jac[(i, j)]).abs() < 1e-6,
                    "({i},{j}) {fd} {}",
                    jac[(i, j)]
                );
            }
        }
    }

    #[test]
    fn linearization_at_ground_mode() {
        let d = dom(64);
        let eq = find_equilibrium(&e(&d, 1), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let op = assemble_linearization(&eq, &p(1));
        assert!(op.symmetry_defect() < 1e-15);
        let le2 = op.apply(&e(&d, 2)).unwrap();
        let want = -lam(2.0) + lam(1.0) + 2.0;
        assert!((le2.modes()[1] - want).abs() < 1e-9 * want.abs());
        assert!(le2
            .modes()
            .iter()
            .enumerate()
            .all(|(i, c)| i == 1 || c.abs() < 1e-9));
    }

    #[test]
    fn linearization_differs_from_derivative_of_m_by_low_order_terms() {
        // The assembled L and DM(φ) share the −A part and the
        // multiplication term; they differ by 2‖φ‖²w + 4⟨φ,w⟩φ.
        let d = dom(32);
        let params = p(2).with_dealias(false);
        let eq = find_equilibrium(&e(&d, 1), &params, DEFAULT_NEWTON_TOL).unwrap();
        let op = assemble_linearization(&eq, &params);
        let w = e(&d, 1)
            .add_scaled(&e(&d, 2), 0.5)
            .unwrap()
            .add_scaled(&e(&d, 5), -0.2)
            .unwrap();
        let eps = 1e-5;
        let mp = residual_m(&eq.field.add_scaled(&w, eps).unwrap(), &params).unwrap();
        let mm = residual_m(&eq.field.add_scaled(&w, -eps).unwrap(), &params).unwrap();
        let dm = mp.add_scaled(&mm, -1.0).unwrap().scaled(0.5 / eps).unwrap();
        let s = inner_product_l2(&eq.field, &w).unwrap();
        let corr = w
            .scaled(2.0)
            .unwrap()
            .add_scaled(&eq.field, 4.0 * s)
            .unwrap();
        let gap = op
            .apply(&w)
            .unwrap()
            .add_scaled(&dm, -1.0)
            .unwrap()
            .add_scaled(&corr, -1.0)
            .unwrap();
        assert!(gap.l2_norm() < 1e-5 * dm.l2_norm(), "{}", gap.l2_norm());
    }

    #[test]
    fn cubic_linearization_is_nearly_symmetric() {
        let d = dom(64);
        let params = p(2);
        let eq = find_equilibrium(&e(&d, 1), &params, DEFAULT_NEWTON_TOL).unwrap();
        let op = assemble_linearization(&eq, &params);
        assert!(
            op.symmetry_defect() <= SYMMETRY_TOL,
            "{:e}",
            op.symmetry_defect()
        );
        // High-mode directions are dominated by the shared −A part.
        let w = e(&d, 40);
        let eps = 1e-5;
        let mp = residual_m(&eq.field.add_scaled(&w, eps).unwrap(), &params).unwrap();
        let mm = residual_m(&eq.field.add_scaled(&w, -eps).unwrap(), &params).unwrap();
        let dm = mp.add_scaled(&mm, -1.0).unwrap().scaled(0.5 / eps).unwrap();
        let rel = op
            .apply(&w)
            .unwrap()
            .add_scaled(&dm, -1.0)
            .unwrap()
            .l2_norm()
            / dm.l2_norm();
        assert!(rel < 1e-7, "{rel:e}");
    }

    #[test]
    fn ground_mode_is_stable_with_gap_rate() {
        let d = dom(64);
        let eq = find_equilibrium(&e(&d, 1), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let report = spectrum(&assemble_linearization(&eq, &p(1))).unwrap();
        assert_eq!(report.tangent_rates.len(), 63);
        assert_eq!(report.classification, Stability::Stable);
        let gap = lam(2.0) - lam(1.0);
        assert!(
            (report.slowest_decay() - gap).abs() < 1e-5 * gap,
            "{}",
            report.slowest_decay()
        );
        for (k, r) in report.tangent_rates.iter().rev().take(6).enumerate() {
            let want = -(lam(k as f64 + 2.0) - lam(1.0));
            assert!((r - want).abs() < 1e-5 * want.abs(), "k={k} {r} {want}");
        }
    }

    #[test]
    fn second_mode_is_saddle() {
        let d = dom(64);
        let eq = find_equilibrium(&e(&d, 2), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let report = spectrum(&assemble_linearization(&eq, &p(1))).unwrap();
        assert_eq!(report.classification, Stability::Saddle);
        let top = *report.tangent_rates.last().unwrap();
        let gap = lam(2.0) - lam(1.0);
        assert!((top - gap).abs() < 1e-5 * gap, "{top}");
        assert_eq!(report.tangent_rates.iter().filter(|r| **r > 0.0).count(), 1);
    }

    #[test]
    fn zero_operator_is_degenerate() {
        let d = dom(16);
        let eq = find_equilibrium(&e(&d, 1), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let op = LinearizedOperator {
            matrix: DMatrix::zeros(16, 16),
            base: eq,
        };
        let report = spectrum(&op).unwrap();
        assert!(report.eigenvalues.iter().all(|v| *v == 0.0));
        assert_eq!(report.classification, Stability::Degenerate);
    }

    #[test]
    fn asymmetric_operator_rejected() {
        let d = dom(16);
        let eq = find_equilibrium(&e(&d, 1), &p(1), DEFAULT_NEWTON_TOL).unwrap();
        let mut m = DMatrix::identity(16, 16);
        m[(0, 1)] = 0.5;
        let op = LinearizedOperator {
            matrix: m,
            base: eq,
        };
        assert!(matches!(spectrum(&op), Err(StationaryError::Asymmetric(_))));
    }

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        let phi = [0.3, -0.4, 0.5, 0.1, -0.7];
        let q = tangent_basis(&phi);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::<f64>::identity(4, 4)).amax() < 1e-14);
        let proj = q.transpose() * DVector::from_column_slice(&phi);
        assert!(proj.amax() < 1e-14);
    }
}
