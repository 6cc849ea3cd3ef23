//! Sine-spectral discretization of real functions on `(0, ℓ)` with
//! homogeneous Dirichlet data.
//!
//! A [`Field`] carries two consistent representations: samples at the `N`
//! interior points `x_j = j·ℓ/(N+1)` and coefficients `c_k` in the
//! orthonormal basis `e_k(x) = √(2/ℓ)·sin(kπx/ℓ)`, `k = 1..N`. The map
//! between them is a scaled DST-I, which is exactly orthogonal with respect
//! to the uniform interior quadrature weight `ℓ/(N+1)`, so Parseval holds to
//! roundoff for every grid vector.
//!
//! Under Navier conditions (`u = Δu = 0` on the boundary) the operator
//! `A = Δ² − 2Δ` is diagonal in this basis with eigenvalues
//! `λ_k = κ_k⁴ + 2κ_k²`, `κ_k = kπ/ℓ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible number of sine modes.
pub const MIN_MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid domain `{key}`: {msg}")]
    Config { key: &'static str, msg: String },
    #[error("fields are defined on different domains")]
    DomainMismatch,
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("mode index {k} outside 1..={n_modes}")]
    ModeIndex { k: usize, n_modes: usize },
}

/// Geometry and resolution of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub length: f64,
    pub n_modes: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            length: 1.0,
            n_modes: 64,
        }
    }
}

impl DomainSpec {
    pub fn new(length: f64, n_modes: usize) -> Self {
        DomainSpec { length, n_modes }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(FieldError::Config {
                key: "length",
                msg: format!("must be a positive finite number, got {}", self.length),
            });
        }
        if self.n_modes < MIN_MODES {
            return Err(FieldError::Config {
                key: "n_modes",
                msg: format!("must be at least {MIN_MODES}, got {}", self.n_modes),
            });
        }
        Ok(())
    }
}

/// Which representation [`Domain::transform`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToModes,
    ToGrid,
}

/// Precomputed grid, eigenvalue tables and transform plan for one
/// [`DomainSpec`]. Read-only after construction and shared via `Arc`.
pub struct Domain {
    spec: DomainSpec,
    grid: Vec<f64>,
    wavenumbers: Vec<f64>,
    laplacian: Vec<f64>,
    biharmonic: Vec<f64>,
    a_eigs: Vec<f64>,
    v_weights: Vec<f64>,
    weight: f64,
    basis: DMatrix<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("length", &self.spec.length)
            .field("n_modes", &self.spec.n_modes)
            .finish()
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Builds the grid, the eigenvalue tables of `Δ`, `Δ²` and `A`, the
/// quadrature weight and the DST plan.
pub fn build_domain(spec: DomainSpec) -> Result<Arc<Domain>, FieldError> {
    spec.validate()?;
    let n = spec.n_modes;
    let len = spec.length;
    let h = len / (n + 1) as f64;
    let grid: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
    let wavenumbers: Vec<f64> = (1..=n).map(|k| k as f64 * PI / len).collect();
    let laplacian = wavenumbers.iter().map(|q| -q * q).collect();
    let biharmonic: Vec<f64> = wavenumbers.iter().map(|q| q.powi(4)).collect();
    let a_eigs = wavenumbers
        .iter()
        .map(|q| q.powi(4) + 2.0 * q * q)
        .collect();
    let v_weights = wavenumbers
        .iter()
        .map(|q| 1.0 + 2.0 * q * q + q.powi(4))
        .collect();
    let amp = (2.0 / len).sqrt();
    let basis = DMatrix::from_fn(n, n, |j, k| {
        amp * (PI * ((j + 1) * (k + 1)) as f64 / (n + 1) as f64).sin()
    });
    let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
    Ok(Arc::new(Domain {
        spec,
        grid,
        wavenumbers,
        laplacian,
        biharmonic,
        a_eigs,
        v_weights,
        weight: h,
        basis,
        fft,
    }))
}

impl Domain {
    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn n_modes(&self) -> usize {
        self.spec.n_modes
    }

    pub fn length(&self) -> f64 {
        self.spec.length
    }

    /// Interior grid points `x_j`, `j = 1..N`.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Uniform quadrature weight `ℓ/(N+1)`.
    pub fn quadrature_weight(&self) -> f64 {
        self.weight
    }

    /// `κ_k = kπ/ℓ`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Eigenvalues `−κ_k²` of the Dirichlet Laplacian.
    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.laplacian
    }

    /// Eigenvalues `κ_k⁴` of the Navier bilaplacian.
    pub fn biharmonic_eigenvalues(&self) -> &[f64] {
        &self.biharmonic
    }

    /// Eigenvalues `λ_k = κ_k⁴ + 2κ_k²` of `A`, strictly increasing.
    pub fn a_eigenvalues(&self) -> &[f64] {
        &self.a_eigs
    }

    /// Weights `1 + 2κ_k² + κ_k⁴` of the V inner product in mode space.
    pub fn v_weights(&self) -> &[f64] {
        &self.v_weights
    }

    /// Collocation matrix `B[(j, k)] = e_{k+1}(x_{j+1})`; `values = B·modes`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Number of modes kept by the 2/3 truncation rule.
    pub fn dealias_cutoff(&self) -> usize {
        2 * self.spec.n_modes / 3
    }

    /// Zeroes the top third of the mode vector.
    pub fn dealias(&self, modes: &mut [f64]) {
        let cut = self.dealias_cutoff();
        for c in modes.iter_mut().skip(cut) {
            *c = 0.0;
        }
    }

    pub fn transform(&self, data: &[f64], direction: Direction) -> Vec<f64> {
        match direction {
            Direction::ToModes => self.to_modes(data),
            Direction::ToGrid => self.to_grid(data),
        }
    }

    /// `c_k = Σ_j v_j e_k(x_j)·ℓ/(N+1)`.
    pub fn to_modes(&self, values: &[f64]) -> Vec<f64> {
        let scale = (2.0 / self.spec.length).sqrt() * self.weight;
        let mut out = self.dst1(values);
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    /// `v_j = Σ_k c_k e_k(x_j)`.
    pub fn to_grid(&self, modes: &[f64]) -> Vec<f64> {
        let scale = (2.0 / self.spec.length).sqrt();
        let mut out = self.dst1(modes);
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Unnormalized DST-I, `X_k = Σ_j x_j sin(πjk/(N+1))`, through an FFT of
    /// the odd extension of length `2(N+1)`.
    fn dst1(&self, input: &[f64]) -> Vec<f64> {
        let n = self.spec.n_modes;
        assert_eq!(input.len(), n, "transform input has wrong length");
        let m = 2 * (n + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1].re = x;
            buf[m - j - 1].re = -x;
        }
        self.fft.process(&mut buf);
        buf[1..=n].iter().map(|z| -0.5 * z.im).collect()
    }
}

/// A real function on the discretized interval, held as grid samples and
/// sine coefficients simultaneously.
#[derive(Clone)]
pub struct Field {
    domain: Arc<Domain>,
    values: Vec<f64>,
    modes: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.same_domain(other) && self.modes == other.modes
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("domain", &self.domain)
            .field("modes", &self.modes)
            .finish()
    }
}

fn check_entries(data: &[f64], expected: usize) -> Result<(), FieldError> {
    if data.len() != expected {
        return Err(FieldError::Length {
            expected,
            got: data.len(),
        });
    }
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(FieldError::NonFinite(i)),
        None => Ok(()),
    }
}

impl Field {
    pub fn zeros(domain: &Arc<Domain>) -> Self {
        let n = domain.n_modes();
        Field {
            domain: Arc::clone(domain),
            values: vec![0.0; n],
            modes: vec![0.0; n],
        }
    }

    pub fn from_modes(domain: &Arc<Domain>, modes: Vec<f64>) -> Result<Self, FieldError> {
        check_entries(&modes, domain.n_modes())?;
        let values = domain.to_grid(&modes);
        Ok(Field {
            domain: Arc::clone(domain),
            values,
            modes,
        })
    }

    pub fn from_values(domain: &Arc<Domain>, values: Vec<f64>) -> Result<Self, FieldError> {
        check_entries(&values, domain.n_modes())?;
        let modes = domain.to_modes(&values);
        Ok(Field {
            domain: Arc::clone(domain),
            values,
            modes,
        })
    }

    /// Samples `f` at the interior grid points.
    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(f64) -> f64) -> Result<Self, FieldError> {
        let values = domain.grid().iter().map(|&x| f(x)).collect();
        Field::from_values(domain, values)
    }

    /// The basis function `e_k`, `k` one-based.
    pub fn basis_mode(domain: &Arc<Domain>, k: usize) -> Result<Self, FieldError> {
        let n = domain.n_modes();
        if k == 0 || k > n {
            return Err(FieldError::ModeIndex { k, n_modes: n });
        }
        let mut modes = vec![0.0; n];
        modes[k - 1] = 1.0;
        Field::from_modes(domain, modes)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn into_modes(self) -> Vec<f64> {
        self.modes
    }

    pub fn same_domain(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    fn require_same_domain(&self, other: &Field) -> Result<(), FieldError> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(FieldError::DomainMismatch)
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Field, s: f64) -> Result<Field, FieldError> {
        self.require_same_domain(other)?;
        let modes = self
            .modes
            .iter()
            .zip(&other.modes)
            .map(|(a, b)| a + s * b)
            .collect();
        Field::from_modes(&self.domain, modes)
    }

    pub fn scaled(&self, s: f64) -> Result<Field, FieldError> {
        let modes = self.modes.iter().map(|c| s * c).collect();
        Field::from_modes(&self.domain, modes)
    }

    pub fn negated(&self) -> Field {
        Field {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| -v).collect(),
            modes: self.modes.iter().map(|c| -c).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        dot(&self.modes, &self.modes).sqrt()
    }

    /// Largest absolute grid sample.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid samples raised to an integer power.
    pub fn pointwise_powi(&self, p: i32) -> Vec<f64> {
        self.values.iter().map(|v| v.powi(p)).collect()
    }
}

/// Mode-space L² inner product `Σ c_k(f)·c_k(g)`.
pub fn inner_product_l2(f: &Field, g: &Field) -> Result<f64, FieldError> {
    f.require_same_domain(g)?;
    Ok(dot(&f.modes, &g.modes))
}

/// Quadrature form `Σ_j f(x_j)g(x_j)·ℓ/(N+1)` of the same inner product.
pub fn inner_product_quadrature(f: &Field, g: &Field) -> Result<f64, FieldError> {
    f.require_same_domain(g)?;
    Ok(dot(&f.values, &g.values) * f.domain.quadrature_weight())
}

/// V inner product `Σ (1 + 2κ_k² + κ_k⁴) c_k(f) c_k(g)`.
pub fn inner_product_v(f: &Field, g: &Field) -> Result<f64, FieldError> {
    f.require_same_domain(g)?;
    Ok(f.modes
        .iter()
        .zip(&g.modes)
        .zip(f.domain.v_weights())
        .map(|((a, b), w)| w * a * b)
        .sum())
}

fn apply_diagonal(f: &Field, eigs: &[f64]) -> Field {
    let modes: Vec<f64> = f.modes.iter().zip(eigs).map(|(c, l)| c * l).collect();
    let values = f.domain.to_grid(&modes);
    Field {
        domain: Arc::clone(&f.domain),
        values,
        modes,
    }
}

/// `A f = Δ²f − 2Δf`.
pub fn apply_a(f: &Field) -> Field {
    apply_diagonal(f, f.domain.a_eigenvalues())
}

pub fn apply_laplacian(f: &Field) -> Field {
    apply_diagonal(f, f.domain.laplacian_eigenvalues())
}

pub fn apply_biharmonic(f: &Field) -> Field {
    apply_diagonal(f, f.domain.biharmonic_eigenvalues())
}

/// Norms entering the V norm and the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    /// `‖u‖_{L²}`
    pub l2: f64,
    /// `‖∇u‖_{L²}`
    pub h1_semi: f64,
    /// `‖Δu‖_{L²}`
    pub h2_semi: f64,
    /// `‖u‖²_V = ‖u‖² + 2‖∇u‖² + ‖Δu‖²`
    pub v_norm_sq: f64,
    /// `‖u‖^{2n}_{L^{2n}}` by grid quadrature.
    pub l2n_2n: f64,
}

/// Spectral seminorms plus the quadrature `L^{2n}` term.
pub fn seminorms(f: &Field, n: u32) -> NormReport {
    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    let mut h2_sq = 0.0;
    for (c, q) in f.modes.iter().zip(f.domain.wavenumbers()) {
        let c2 = c * c;
        let q2 = q * q;
        l2_sq += c2;
        h1_sq += q2 * c2;
        h2_sq += q2 * q2 * c2;
    }
    NormReport {
        l2: l2_sq.sqrt(),
        h1_semi: h1_sq.sqrt(),
        h2_semi: h2_sq.sqrt(),
        v_norm_sq: l2_sq + 2.0 * h1_sq + h2_sq,
        l2n_2n: power_integral(f, n),
    }
}

/// `∫ |u|^{2n}` by the interior-point rule.
pub fn power_integral(f: &Field, n: u32) -> f64 {
    let p = 2 * n as i32;
    f.values.iter().map(|v| v.powi(p)).sum::<f64>() * f.domain.quadrature_weight()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
