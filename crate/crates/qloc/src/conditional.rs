//! Finite laboratory measurements.
//!
//! A laboratory is a finite family of localized one-particle modes spanning a
//! conditioning box. On that span the box-localization density becomes a
//! Hermitian matrix, and conjugating by the inverse square root of the
//! conditioning-box matrix renormalizes it into a bona fide effect: the
//! conditioning box itself maps to the identity, sub-boxes add up, and every
//! eigenvalue stays inside `[0, 1]` up to quadrature error.
//!
//! In finite dimensions every Hermitian matrix admits plain functional
//! calculus, so the fractional powers used here are eigendecompositions; this
//! is the finite stand-in for the self-adjoint extensions needed on the full
//! space, not a proof of the infinite-dimensional statement. Strict-positivity
//! failures abort instead of clamping eigenvalues: clamping would silently
//! fake the floor that the `eta` shift is supposed to guarantee.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use thiserror::Error;

use crate::localization::U_SIGMA;
use crate::minkowski::{FourVector, RegionBox};
use crate::smearing::{box_window, Profile, SmearingFunction};
use crate::states::{MassShellGrid, OneParticle};
use crate::stress_energy::mode_matrix;
use crate::C64;

/// Failures in laboratory construction or effect algebra.
#[derive(Debug, Error)]
pub enum ConditionalError {
    #[error("a laboratory needs at least one mode")]
    NoModes,
    #[error("mode centers at spacing {spacing} violate the width/2 floor for width {width}")]
    SpacingTooTight { spacing: f64, width: f64 },
    #[error("mode center outside the conditioning box")]
    CenterOutside,
    #[error("Gram matrix condition number {cond:.3e} exceeds 1e8")]
    IllConditionedGram { cond: f64 },
    #[error("orthonormality residual {0:.3e} exceeds 1e-10")]
    OrthonormalityResidual(f64),
    #[error("matrix is not strictly positive: eigen-range [{min:.3e}, {max:.3e}]")]
    PositivityLost { min: f64, max: f64 },
    #[error("inverse square root residual {0:.3e} exceeds 1e-9")]
    SquareRootResidual(f64),
    #[error("matrix is not Hermitian: residual {0:.3e}")]
    NotHermitian(f64),
    #[error("measured box is not contained in the conditioning box")]
    RegionNotContained,
    #[error("regularization requires epsilon > 0, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("floor shift must be nonnegative, got {0}")]
    NegativeEta(f64),
    #[error("frame velocity must be future-pointing unit timelike")]
    BadVelocity,
    #[error("effect dimensions differ: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("conditioning-box polar factor is singular")]
    SingularPolarFactor,
    #[error("enlarged supports are not causally separated: gap {gap:.3e} <= reach {reach:.3e}")]
    SupportsOverlap { gap: f64, reach: f64 },
}

type Result<T> = std::result::Result<T, ConditionalError>;

// ---------------------------------------------------------------------------
// Hermitian matrix helpers
// ---------------------------------------------------------------------------

fn to_dmatrix(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn hermiticity_residual(m: &DMatrix<C64>) -> f64 {
    let mut res: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            res = res.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    res
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Operator norm of a Hermitian matrix (largest |eigenvalue|).
fn hermitian_op_norm(m: &DMatrix<C64>) -> f64 {
    hermitize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
}

fn eigen_range(m: &DMatrix<C64>) -> (f64, f64) {
    let ev = hermitize(m).symmetric_eigen().eigenvalues;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in ev.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

/// Fractional power of a Hermitian strictly positive matrix through its
/// eigendecomposition. Eigenvalues below `1e-10·λmax` abort — they signal a
/// degenerate basis or a failed floor shift, and clamping them would fake the
/// guarantee the caller relies on.
fn psd_power(m: &DMatrix<C64>, exponent: f64) -> Result<DMatrix<C64>> {
    let herm = hermiticity_residual(m);
    let scale = 1.0 + m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if herm > 1e-10 * scale {
        return Err(ConditionalError::NotHermitian(herm));
    }
    let eig = hermitize(m).symmetric_eigen();
    let (min, max) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    if max.is_nan() || max <= 0.0 || min <= 1e-10 * max {
        return Err(ConditionalError::PositivityLost { min, max });
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::new(l.powf(exponent), 0.0)),
    ));
    Ok(u * d * u.adjoint())
}

/// Inverse square root of a Hermitian strictly positive matrix.
///
/// The result `S` satisfies `‖S·M·S − I‖ < 1e-9` (max-entry norm) or the call
/// fails; eigenvalues below the strict `1e-10·λmax` threshold are an error,
/// never clamped.
pub fn inverse_sqrt_psd(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let s = psd_power(m, -0.5)?;
    let residual = (&s * m * &s - DMatrix::<C64>::identity(m.nrows(), m.ncols()))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if residual >= 1e-9 {
        return Err(ConditionalError::SquareRootResidual(residual));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// laboratory bases
// ---------------------------------------------------------------------------

/// An orthonormal family of localized one-particle modes inside a
/// conditioning box.
///
/// Raw modes are Gaussians of a common position width placed at distinct
/// centers; Löwdin symmetric orthonormalization (`G^{-1/2}` applied to the
/// raw family) keeps the span and distributes the overlap symmetrically, so
/// permuting the centers permutes the basis without moving the span.
pub struct LabBasis {
    centers: Vec<[f64; 3]>,
    width: f64,
    region: RegionBox,
    gram: DMatrix<C64>,
    coeff: DMatrix<C64>,
    modes: Vec<Vec<C64>>,
    condition: f64,
}

/// Deterministic center layout: the first `m` sites of the smallest cubic
/// lattice that holds them, placed strictly inside the box.
pub fn lattice_centers(region: &RegionBox, m: usize) -> Vec<[f64; 3]> {
    let mut k = 1usize;
    while k * k * k < m {
        k += 1;
    }
    let lower = region.lower();
    let upper = region.upper();
    let pos = |a: usize, j: usize| {
        lower[a] + (upper[a] - lower[a]) * (j as f64 + 1.0) / (k as f64 + 1.0)
    };
    let mut centers = Vec::with_capacity(m);
    'fill: for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                centers.push([pos(0, i), pos(1, j), pos(2, l)]);
                if centers.len() == m {
                    break 'fill;
                }
            }
        }
    }
    centers
}

/// Gram matrix, orthonormalizing coefficients, orthonormal mode samples, and
/// the Gram condition number.
type LowdinParts = (DMatrix<C64>, DMatrix<C64>, Vec<Vec<C64>>, f64);

fn lowdin(grid: &MassShellGrid, raw: &[Vec<C64>]) -> Result<LowdinParts> {
    let m = raw.len();
    let gram = DMatrix::from_fn(m, m, |i, j| grid.inner(&raw[i], &raw[j]));
    let (min, max) = eigen_range(&gram);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e8 {
        return Err(ConditionalError::IllConditionedGram { cond: condition });
    }
    let coeff = psd_power(&gram, -0.5)?;
    let mut modes = Vec::with_capacity(m);
    for s in 0..m {
        let mut v = vec![C64::new(0.0, 0.0); raw[0].len()];
        for (j, rj) in raw.iter().enumerate() {
            let w = coeff[(j, s)];
            for (dst, src) in v.iter_mut().zip(rj) {
                *dst += w * src;
            }
        }
        modes.push(v);
    }
    let residual = (coeff.adjoint() * &gram * &coeff
        - DMatrix::<C64>::identity(m, m))
    .iter()
    .fold(0.0f64, |a, z| a.max(z.norm()));
    if residual > 1e-10 {
        return Err(ConditionalError::OrthonormalityResidual(residual));
    }
    Ok((gram, coeff, modes, condition))
}

fn raw_gaussian_mode(grid: &MassShellGrid, center: [f64; 3], width: f64) -> Vec<C64> {
    // momentum width 1/width, plane-wave phase pinning the position center
    let mode = OneParticle::gaussian([0.0; 3], 1.0 / width)
        .with_linear_phase([-center[0], -center[1], -center[2]]);
    let mut v = grid.sample(&mode);
    let n = grid.norm_sq(&v).sqrt();
    for z in &mut v {
        *z /= n;
    }
    v
}

impl LabBasis {
    /// Orthonormal basis on the deterministic center lattice.
    pub fn build(
        grid: &MassShellGrid,
        region: &RegionBox,
        mode_count: usize,
        width: f64,
    ) -> Result<Self> {
        Self::from_centers(grid, region, &lattice_centers(region, mode_count), width)
    }

    /// Orthonormal basis on explicit centers (all inside the box, pairwise
    /// spacing at least `width/2`).
    pub fn from_centers(
        grid: &MassShellGrid,
        region: &RegionBox,
        centers: &[[f64; 3]],
        width: f64,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(ConditionalError::NoModes);
        }
        if centers.iter().any(|&c| !region.contains(c)) {
            return Err(ConditionalError::CenterOutside);
        }
        let mut spacing = f64::INFINITY;
        for (i, a) in centers.iter().enumerate() {
            for b in centers.iter().skip(i + 1) {
                let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
                spacing = spacing.min(d2.sqrt());
            }
        }
        if centers.len() > 1 && spacing < width / 2.0 {
            return Err(ConditionalError::SpacingTooTight { spacing, width });
        }
        let raw: Vec<Vec<C64>> = centers
            .iter()
            .map(|&c| raw_gaussian_mode(grid, c, width))
            .collect();
        let (gram, coeff, modes, condition) = lowdin(grid, &raw)?;
        Ok(Self {
            centers: centers.to_vec(),
            width,
            region: *region,
            gram,
            coeff,
            modes,
            condition,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Orthonormalized mode samples on the construction grid.
    pub fn modes(&self) -> &[Vec<C64>] {
        &self.modes
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    pub fn coefficients(&self) -> &DMatrix<C64> {
        &self.coeff
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn region(&self) -> &RegionBox {
        &self.region
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Coordinates of a sampled amplitude in the orthonormal basis.
    pub fn project(&self, grid: &MassShellGrid, sample: &[C64]) -> DVector<C64> {
        DVector::from_iterator(
            self.modes.len(),
            self.modes.iter().map(|m| grid.inner(m, sample)),
        )
    }

    /// Apply the span projector to a sampled amplitude.
    pub fn span_apply(&self, grid: &MassShellGrid, sample: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); sample.len()];
        for m in &self.modes {
            let c = grid.inner(m, sample);
            for (dst, src) in out.iter_mut().zip(m) {
                *dst += c * src;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// compressed matrices
// ---------------------------------------------------------------------------

/// Compression of the frame energy multiplication operator (plus `epsilon`)
/// onto a mode family: `T_ij = ⟨m_i| (E_u + ε) |m_j⟩`.
pub fn energy_compression(
    grid: &MassShellGrid,
    u: &FourVector,
    epsilon: f64,
    modes: &[Vec<C64>],
) -> DMatrix<C64> {
    let eu = grid.energies_for(u);
    let mult: Vec<f64> = eu.iter().map(|&e| e + epsilon).collect();
    DMatrix::from_fn(modes.len(), modes.len(), |i, j| {
        grid.inner_weighted(&modes[i], &mult, &modes[j])
    })
}

/// Compression of the frame-contracted smeared energy density integrated over
/// a box, plus the `eta·|u·u_Σ|·vol` identity shift that keeps the
/// conditioning-box matrix strictly positive.
fn energy_in_box(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    region: &RegionBox,
    eta: f64,
    modes: &[Vec<C64>],
) -> DMatrix<C64> {
    let window = f.fourier_sq().product(&box_window(region));
    let mut m = to_dmatrix(&mode_matrix(grid, &window, u, &U_SIGMA, modes));
    let shift = eta * u.t * region.measure();
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(shift, 0.0);
    }
    m
}

/// A Hermitian matrix on a laboratory basis tagged with the box, floor shift,
/// and regularization it was built from.
pub struct EffectMatrix {
    matrix: DMatrix<C64>,
    lambda_min: f64,
    lambda_max: f64,
    region: Option<RegionBox>,
    eta: f64,
    epsilon: Option<f64>,
}

impl EffectMatrix {
    fn from_parts(
        matrix: DMatrix<C64>,
        region: Option<RegionBox>,
        eta: f64,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        let herm = hermiticity_residual(&matrix);
        let scale = 1.0 + matrix.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if herm > 1e-10 * scale {
            return Err(ConditionalError::NotHermitian(herm));
        }
        let matrix = hermitize(&matrix);
        let (lambda_min, lambda_max) = eigen_range(&matrix);
        Ok(Self {
            matrix,
            lambda_min,
            lambda_max,
            region,
            eta,
            epsilon,
        })
    }

    /// The zero effect of the empty region.
    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
            lambda_min: 0.0,
            lambda_max: 0.0,
            region: None,
            eta: 0.0,
            epsilon: None,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(λmin, λmax)` of the Hermitian matrix.
    pub fn eigen_range(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    /// Effect status: spectrum inside `[-tol, 1 + tol]`.
    pub fn is_effect(&self, tol: f64) -> bool {
        self.lambda_min >= -tol && self.lambda_max <= 1.0 + tol
    }

    pub fn region(&self) -> Option<&RegionBox> {
        self.region.as_ref()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// `⟨v|M|v⟩ / ⟨v|v⟩` for basis coordinates `v`.
    pub fn expectation(&self, coords: &DVector<C64>) -> f64 {
        let num = (coords.adjoint() * &self.matrix * coords)[(0, 0)].re;
        let den = coords.norm_squared();
        num / den
    }
}

// ---------------------------------------------------------------------------
// conditional and regularized effects
// ---------------------------------------------------------------------------

fn check_frame(u: &FourVector) -> Result<()> {
    if !u.is_future_unit_timelike(1e-9) {
        return Err(ConditionalError::BadVelocity);
    }
    Ok(())
}

fn check_contained(outer: &RegionBox, inner: &RegionBox) -> Result<()> {
    let tol = 1e-12;
    for a in 0..3 {
        if inner.lower()[a] < outer.lower()[a] - tol || inner.upper()[a] > outer.upper()[a] + tol {
            return Err(ConditionalError::RegionNotContained);
        }
    }
    Ok(())
}

/// Effect of detecting within `delta`, conditioned on the laboratory box:
/// the box-energy matrix of `delta` conjugated by the inverse square root of
/// the conditioning-box matrix. The conditioning box itself maps to the
/// identity, disjoint boxes add, and nested boxes order their effects.
pub fn conditional_effect(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    delta: &RegionBox,
    basis: &LabBasis,
    eta: f64,
) -> Result<EffectMatrix> {
    check_frame(u)?;
    if eta < 0.0 {
        return Err(ConditionalError::NegativeEta(eta));
    }
    check_contained(basis.region(), delta)?;
    let h0 = energy_in_box(grid, f, u, basis.region(), eta, basis.modes());
    let s0 = inverse_sqrt_psd(&h0)?;
    let hd = energy_in_box(grid, f, u, delta, eta, basis.modes());
    EffectMatrix::from_parts(&s0 * hd * &s0, Some(*delta), eta, None)
}

/// Regularized effect: the box-energy matrix conjugated by the inverse square
/// root of the compressed `(E_u + ε)` instead of the conditioning-box matrix.
///
/// On a one-particle basis the box-energy density is positive up to
/// quadrature error, so with `eta = 0` a tiny box can only dip marginally
/// below zero; the `eta` shift restores a provable floor of
/// `eta·|u·u_Σ|·vol(delta) / λmax(E_u + ε)`.
pub fn regularized_effect(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    delta: &RegionBox,
    basis: &LabBasis,
    epsilon: f64,
    eta: f64,
) -> Result<EffectMatrix> {
    check_frame(u)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ConditionalError::NonpositiveEpsilon(epsilon));
    }
    if eta < 0.0 {
        return Err(ConditionalError::NegativeEta(eta));
    }
    let he = energy_compression(grid, u, epsilon, basis.modes());
    let se = inverse_sqrt_psd(&he)?;
    let hd = energy_in_box(grid, f, u, delta, eta, basis.modes());
    EffectMatrix::from_parts(&se * hd * &se, Some(*delta), eta, Some(epsilon))
}

/// Operator norm of the commutator of two effects on a common basis.
pub fn effect_commutator_norm(a: &EffectMatrix, b: &EffectMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(ConditionalError::DimensionMismatch {
            a: a.dim(),
            b: b.dim(),
        });
    }
    let c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    // i·[A,B] is Hermitian for Hermitian A, B
    Ok(hermitian_op_norm(&(c * C64::new(0.0, 1.0))))
}

// ---------------------------------------------------------------------------
// polar relation
// ---------------------------------------------------------------------------

/// Residuals of the polar relation between conditional and regularized
/// effects.
#[derive(Debug, Clone, Copy)]
pub struct PolarReport {
    /// `‖V†V − I‖` in operator norm.
    pub unitarity_residual: f64,
    /// Operator-norm distance between the conditional effect and the
    /// unitarily transported regularized sandwich.
    pub identity_residual: f64,
}

/// Forms `K = H(Δ₀)^{1/2}·(E_u+ε)^{-1/2}` on the basis, polar-decomposes it
/// as `K = V·A(Δ₀)^{1/2}`, and checks that `V` is unitary and that
/// conjugating `A(Δ₀)^{-1/2}·A(Δ)·A(Δ₀)^{-1/2}` by `V` reproduces the
/// conditional effect of `Δ`.
pub fn polar_relation_check(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    delta: &RegionBox,
    basis: &LabBasis,
    epsilon: f64,
    eta: f64,
) -> Result<PolarReport> {
    check_frame(u)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ConditionalError::NonpositiveEpsilon(epsilon));
    }
    check_contained(basis.region(), delta)?;
    let h0 = energy_in_box(grid, f, u, basis.region(), eta, basis.modes());
    let hd = energy_in_box(grid, f, u, delta, eta, basis.modes());
    let he = energy_compression(grid, u, epsilon, basis.modes());
    let s0 = inverse_sqrt_psd(&h0)?;
    let r0 = psd_power(&h0, 0.5)?;
    let se = inverse_sqrt_psd(&he)?;
    let k = &r0 * &se;
    let a0 = hermitize(&(&se * &h0 * &se));
    let ad = hermitize(&(&se * &hd * &se));
    let a0i = match inverse_sqrt_psd(&a0) {
        Ok(m) => m,
        Err(ConditionalError::PositivityLost { .. }) => {
            return Err(ConditionalError::SingularPolarFactor)
        }
        Err(e) => return Err(e),
    };
    let v = &k * &a0i;
    let dim = v.nrows();
    let unitarity_residual =
        hermitian_op_norm(&(v.adjoint() * &v - DMatrix::<C64>::identity(dim, dim)));
    let b = &s0 * &hd * &s0;
    let rhs = &v * &a0i * &ad * &a0i * v.adjoint();
    let identity_residual = hermitian_op_norm(&(b - rhs));
    Ok(PolarReport {
        unitarity_residual,
        identity_residual,
    })
}

// ---------------------------------------------------------------------------
// regularization gap
// ---------------------------------------------------------------------------

/// Split of the distance between the exact localization expectation and its
/// regularized matrix counterpart for one basis state.
///
/// The `eta` floor contributes at most `eta·|u·u_Σ|·vol(Δ₀)/m` — the shift is
/// `eta·|u·u_Σ|·vol(Δ)` conjugated into `(E_u+ε)^{-1}`, whose spectrum on the
/// basis lies below `1/m`. The remaining distance is measured, not assumed:
/// `compression_gap` is the matrix-vs-multiplication discrepancy at the same
/// `ε`, and `epsilon_gap` is the drift of the exact dressing between `ε` and
/// `0`.
#[derive(Debug, Clone, Copy)]
pub struct RegularizationGap {
    /// `⟨d| T_c[f²⊗χ_Δ] |d⟩` with `d = (E_u)^{-1/2}·mode` (pointwise dressing).
    pub exact: f64,
    /// Diagonal entry of the regularized effect matrix.
    pub regularized: f64,
    /// Provable ceiling for the `eta` contribution.
    pub eta_budget: f64,
    /// Matrix-calculus vs pointwise-dressing discrepancy at the same `ε`.
    pub compression_gap: f64,
    /// Pointwise-dressing drift between `ε` and `0`.
    pub epsilon_gap: f64,
}

impl RegularizationGap {
    /// Signed distance `regularized − exact`.
    pub fn gap(&self) -> f64 {
        self.regularized - self.exact
    }

    /// Whether the measured distance respects the budget split.
    pub fn holds(&self) -> bool {
        self.gap().abs() <= self.eta_budget + self.compression_gap + self.epsilon_gap + 1e-12
    }
}

/// Compare the exact localization expectation of one orthonormal basis state
/// against the diagonal of the regularized effect.
#[allow(clippy::too_many_arguments)]
pub fn regularization_gap(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    delta: &RegionBox,
    basis: &LabBasis,
    epsilon: f64,
    eta: f64,
    mode: usize,
) -> Result<RegularizationGap> {
    check_frame(u)?;
    check_contained(basis.region(), delta)?;
    let e = &basis.modes()[mode];
    let eu = grid.energies_for(u);
    let dress = |shift: f64| -> Vec<C64> {
        e.iter()
            .zip(&eu)
            .map(|(&z, &en)| z / (en + shift).sqrt())
            .collect()
    };
    let window = f.fourier_sq().product(&box_window(delta));
    let exact_of = |d: Vec<C64>| {
        to_dmatrix(&mode_matrix(grid, &window, u, &U_SIGMA, &[d]))[(0, 0)].re
    };
    let exact = exact_of(dress(0.0));
    let exact_eps = exact_of(dress(epsilon));
    let regularized = regularized_effect(grid, f, u, delta, basis, epsilon, eta)?
        .matrix()[(mode, mode)]
        .re;
    let plain = regularized_effect(grid, f, u, delta, basis, epsilon, 0.0)?
        .matrix()[(mode, mode)]
        .re;
    Ok(RegularizationGap {
        exact,
        regularized,
        eta_budget: eta * u.t * basis.region().measure() / grid.mass(),
        compression_gap: (plain - exact_eps).abs(),
        epsilon_gap: (exact_eps - exact).abs(),
    })
}

// ---------------------------------------------------------------------------
// separated laboratories
// ---------------------------------------------------------------------------

/// One laboratory: its smearing, conditioning box, measured sub-box, and
/// basis parameters.
pub struct LabConfig {
    pub f: SmearingFunction,
    pub conditioning: RegionBox,
    pub measured: RegionBox,
    pub mode_count: usize,
    pub width: f64,
    pub eta: f64,
}

/// Commutator diagnostic between two laboratories on a merged basis.
///
/// No pass/fail is attached to the norm: on a truncated one-particle
/// compression the commutator of effects from causally separated labs is not
/// expected to vanish, only to be reported alongside the truncation scale.
#[derive(Debug, Clone, Copy)]
pub struct SeparationReport {
    pub commutator_norm: f64,
    pub basis_size: usize,
    pub gram_condition: f64,
    /// Minimal spatial distance between the support-enlarged boxes.
    pub spatial_gap: f64,
    /// Maximal time separation the smearings can bridge.
    pub time_reach: f64,
    /// Operator norms of the two effects.
    pub effect_norms: [f64; 2],
}

/// Support radius of the squared profile: exact for compactly supported
/// shapes, the `1e-16` relative-decay radius for Gaussians.
fn sq_support_radius(shape: &Profile) -> f64 {
    match *shape {
        // f² = e^{-s²/w²} falls below 1e-16 beyond w·√(16·ln10)
        Profile::Gaussian { width } => width * (16.0 * std::f64::consts::LN_10).sqrt(),
        Profile::Bump { radius } => radius,
    }
}

struct Slab {
    lower: [f64; 3],
    upper: [f64; 3],
    t_lo: f64,
    t_hi: f64,
}

fn enlarged_support(lab: &LabConfig) -> Slab {
    let mut lower = lab.conditioning.lower();
    let mut upper = lab.conditioning.upper();
    for a in 0..3 {
        let axis = lab.f.space_axis(a);
        let r = sq_support_radius(&axis.shape);
        lower[a] += axis.center - r;
        upper[a] += axis.center + r;
    }
    let time = lab.f.time_axis();
    let rt = sq_support_radius(&time.shape);
    Slab {
        lower,
        upper,
        t_lo: time.center - rt,
        t_hi: time.center + rt,
    }
}

/// Build both labs on a merged orthonormal basis and report the commutator
/// norm of their conditional effects. Errors unless the support-enlarged
/// regions are causally separated (spatial gap strictly above the time
/// reach).
pub fn separated_labs_diagnostic(
    grid: &MassShellGrid,
    lab1: &LabConfig,
    lab2: &LabConfig,
    u: &FourVector,
) -> Result<SeparationReport> {
    check_frame(u)?;
    check_contained(&lab1.conditioning, &lab1.measured)?;
    check_contained(&lab2.conditioning, &lab2.measured)?;
    let s1 = enlarged_support(lab1);
    let s2 = enlarged_support(lab2);
    let mut gap2 = 0.0f64;
    for a in 0..3 {
        let g = (s2.lower[a] - s1.upper[a]).max(s1.lower[a] - s2.upper[a]).max(0.0);
        gap2 += g * g;
    }
    let spatial_gap = gap2.sqrt();
    let time_reach = (s1.t_hi - s2.t_lo).abs().max((s2.t_hi - s1.t_lo).abs());
    if spatial_gap <= time_reach {
        return Err(ConditionalError::SupportsOverlap {
            gap: spatial_gap,
            reach: time_reach,
        });
    }
    let mut raw: Vec<Vec<C64>> = Vec::new();
    for (lab, region) in [(lab1, &lab1.conditioning), (lab2, &lab2.conditioning)] {
        for c in lattice_centers(region, lab.mode_count) {
            raw.push(raw_gaussian_mode(grid, c, lab.width));
        }
    }
    let (_, _, modes, gram_condition) = lowdin(grid, &raw)?;
    let effect_on_merged = |lab: &LabConfig| -> Result<DMatrix<C64>> {
        let h0 = energy_in_box(grid, &lab.f, u, &lab.conditioning, lab.eta, &modes);
        let s = inverse_sqrt_psd(&h0)?;
        let hd = energy_in_box(grid, &lab.f, u, &lab.measured, lab.eta, &modes);
        Ok(hermitize(&(&s * hd * &s)))
    };
    let b1 = effect_on_merged(lab1)?;
    let b2 = effect_on_merged(lab2)?;
    let comm = &b1 * &b2 - &b2 * &b1;
    Ok(SeparationReport {
        commutator_norm: hermitian_op_norm(&(comm * C64::new(0.0, 1.0))),
        basis_size: modes.len(),
        gram_condition,
        spatial_gap,
        time_reach,
        effect_norms: [hermitian_op_norm(&b1), hermitian_op_norm(&b2)],
    })
}

// ---------------------------------------------------------------------------
// basis-refinement diagnostic
// ---------------------------------------------------------------------------

/// One step of the basis-enlargement series: the conditional-effect
/// expectation of a fixed probe state and how much of the probe the span
/// misses.
#[derive(Debug, Clone, Copy)]
pub struct RefinementPoint {
    pub mode_count: usize,
    pub expectation: f64,
    /// `1 − ‖P·probe‖²` for the unit-normalized probe.
    pub projection_deficit: f64,
}

/// Track the conditional-effect expectation of a probe as the laboratory
/// basis grows. Diagnostic only: no convergence claim is attached, the series
/// is reported next to the projection deficit of each truncation.
#[allow(clippy::too_many_arguments)]
pub fn basis_refinement_series(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    delta: &RegionBox,
    conditioning: &RegionBox,
    eta: f64,
    width: f64,
    counts: &[usize],
    probe: &OneParticle,
) -> Result<Vec<RefinementPoint>> {
    let mut sample = grid.sample(probe);
    let n = grid.norm_sq(&sample).sqrt();
    for z in &mut sample {
        *z /= n;
    }
    let mut out = Vec::with_capacity(counts.len());
    for &m in counts {
        let basis = LabBasis::build(grid, conditioning, m, width)?;
        let effect = conditional_effect(grid, f, u, delta, &basis, eta)?;
        let coords = basis.project(grid, &sample);
        let in_span = coords.norm_squared();
        out.push(RefinementPoint {
            mode_count: m,
            expectation: effect.expectation(&coords),
            projection_deficit: 1.0 - in_span,
        });
    }
    Ok(out)
}
