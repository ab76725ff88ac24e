//! The energy-normalized spatial localization measurement.
//!
//! A normalized smearing `f` (`∫f² = 1`) together with a future unit
//! timelike contraction velocity `u` defines, on states with no vacuum
//! component, the probability of detecting the system's `u`-energy inside a
//! spatial region `Δ` of the lab rest space `{x⁰ = x0}`:
//!
//! ```text
//! P(Δ) = ⟨Ψ_ε| :T:[f²·χ_Δ] |Ψ_ε⟩,    Ψ_ε = (H_u + ε)^{-1/2} Ψ,
//! ```
//!
//! where `H_u` is the second-quantized `u`-energy and the contraction is
//! `u^μ u_Σ^ν` with `u_Σ = e₀`. The total over the whole plane is exactly 1
//! at `ε = 0`, making `Δ ↦ P(Δ)` a probability measure; its first moment
//! reproduces the Newton–Wigner position on one-particle states and the
//! center of `u`-energy on two-particle states.
//!
//! Probabilities and densities are produced by the position-space pipeline
//! ([`PositionPipeline`]); every result carries a cross-check against the
//! independent momentum-space double quadrature.
//!
//! The dressing acts per particle on sector 1. On sector 2 it multiplies by
//! `(E_u(p) + E_u(q) + ε)^{-1/2}`, which does not factorize; it is expanded
//! in a separable exponential sum `Σ_r κ_r e^{-t_r E_u(p)} e^{-t_r E_u(q)}`
//! (trapezoid discretization of `s^{-1/2} = π^{-1/2}∫ e^{-sτ} τ^{-1/2} dτ`),
//! after which the one-body reduced kernel of the dressed state is
//! diagonalized into a finite list of modes shared by both evaluation
//! routes.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array3;
use thiserror::Error;

use crate::minkowski::{causal_shadow, FourVector, RegionBox};
use crate::quadrature::gauss_legendre_on;
use crate::smearing::{box_window, SeparableWindow, SmearingFunction};
use crate::states::{MassShellGrid, MomentumGrid, OneParticle, SectorState};
use crate::stress_energy::{
    channel_diag_quadratic, sigma_plane_total, Channel, PositionPipeline,
};
use crate::C64;

/// Normal of the lab rest spaces; all measurements live on `{x⁰ = const}`.
pub const U_SIGMA: FourVector = FourVector::new(1.0, 0.0, 0.0, 0.0);

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("state has a vacuum component; the energy dressing is singular on it")]
    VacuumComponent,
    #[error("sector-{0} components are not supported by the localization measurement")]
    UnsupportedSector(usize),
    #[error("dressing regulator must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("smearing must satisfy ∫f² = 1 (got {0}); normalization is part of the measurement")]
    UnnormalizedSmearing(f64),
    #[error("state norm² on the quadrature grid is {0}, expected 1")]
    UnnormalizedState(f64),
    #[error("contraction velocity must be future unit timelike")]
    BadVelocity,
    #[error("density at the truncation boundary ({boundary:.3e}) exceeds 1e-8 × peak ({peak:.3e})")]
    InsufficientDecay { boundary: f64, peak: f64 },
    #[error("imaginary residue {0:.3e} exceeds the derivative-noise threshold")]
    DerivativeNoise(f64),
}

// ---------------------------------------------------------------------------
// measurement context
// ---------------------------------------------------------------------------

/// A localization measurement: smearing, contraction velocity, dressing
/// regulator and the two quadrature backends (mass-shell grid for the
/// momentum route, FFT lattice for the position route).
pub struct Povm<'a> {
    grid: &'a MassShellGrid,
    lattice: &'a MomentumGrid,
    f: SmearingFunction,
    u: FourVector,
    epsilon: f64,
    time_nodes: usize,
}

/// A state prepared for measurement: the energy dressing has been applied
/// and reduced to a diagonal one-body mode kernel
/// `K(p,k) = Σ_r coeff_r conj(g_r(p)) g_r(k)`, sampled on both grids, with
/// the position pipeline already built at plane time `x0`.
pub struct DressedState {
    coeffs: Vec<f64>,
    shell_modes: Vec<Vec<C64>>,
    pipeline: PositionPipeline,
    x0: f64,
}

impl DressedState {
    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn pipeline(&self) -> &PositionPipeline {
        &self.pipeline
    }
}

/// Density samples over the position lattice.
pub struct DensityMap {
    /// Real part of the contracted density at every lattice site.
    pub values: Array3<f64>,
    /// Largest imaginary residue encountered (roundoff diagnostic).
    pub max_imag: f64,
    /// Lattice spacing.
    pub dx: f64,
    /// Per-axis site coordinates.
    pub positions: Vec<f64>,
}

impl DensityMap {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann total `Σ values · dx³`.
    pub fn total(&self) -> f64 {
        self.values.sum() * self.dx.powi(3)
    }
}

/// Outcome of a single probability evaluation.
pub struct LocalizationResult {
    /// Box probability from the position-space pipeline.
    pub probability: f64,
    /// Regulator used for the dressing.
    pub epsilon: f64,
    /// |position route − momentum route| for the same box: an independent
    /// two-backend error estimate.
    pub cross_route_delta: f64,
    /// Density samples on the lattice (region-independent).
    pub density: DensityMap,
}

/// Causality-condition diagnostic: probability must not leak out of the
/// causal shadow when the measurement plane moves by `t`.
pub struct CcReport {
    /// Probability of `Δ` on the base plane.
    pub p_base: f64,
    /// Probability of the shadow's bounding box on the shifted plane.
    pub p_shadow: f64,
    /// `p_shadow − p_base`; nonnegative up to grid error when causality holds.
    pub margin: f64,
}

impl<'a> Povm<'a> {
    pub fn new(
        grid: &'a MassShellGrid,
        lattice: &'a MomentumGrid,
        f: SmearingFunction,
        u: FourVector,
    ) -> Result<Self, LocalizationError> {
        let fsq = f.integral_sq();
        if (fsq - 1.0).abs() > 1e-10 {
            return Err(LocalizationError::UnnormalizedSmearing(fsq));
        }
        if !u.is_future_unit_timelike(1e-9) {
            return Err(LocalizationError::BadVelocity);
        }
        Ok(Povm {
            grid,
            lattice,
            f,
            u,
            epsilon: 0.0,
            time_nodes: 48,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, LocalizationError> {
        if epsilon < 0.0 {
            return Err(LocalizationError::NegativeEpsilon(epsilon));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_time_nodes(mut self, nt: usize) -> Self {
        self.time_nodes = nt.max(2);
        self
    }

    pub fn f(&self) -> &SmearingFunction {
        &self.f
    }

    pub fn u(&self) -> &FourVector {
        &self.u
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Applies the energy dressing, reduces the state to the diagonal mode
    /// kernel and builds the position pipeline for the plane `{x⁰ = x0}`.
    pub fn dress(&self, state: &SectorState, x0: f64) -> Result<DressedState, LocalizationError> {
        let (coeffs, shell_modes, lattice_modes) = self.dress_modes(state)?;
        let pipeline = PositionPipeline::build_diagonal(
            self.lattice,
            self.grid.mass(),
            &self.f,
            x0,
            &lattice_modes,
            self.time_nodes,
        );
        Ok(DressedState {
            coeffs,
            shell_modes,
            pipeline,
            x0,
        })
    }

    /// Mode reduction without the pipeline build (momentum route only).
    #[allow(clippy::type_complexity)]
    fn dress_modes(
        &self,
        state: &SectorState,
    ) -> Result<(Vec<f64>, Vec<Vec<C64>>, Vec<(f64, Array3<C64>)>), LocalizationError> {
        if state.c0().norm() > 1e-14 {
            return Err(LocalizationError::VacuumComponent);
        }
        if !state.terms3().is_empty() {
            return Err(LocalizationError::UnsupportedSector(3));
        }
        let n2 = state.norm_sq(self.grid);
        if (n2 - 1.0).abs() > 1e-6 {
            return Err(LocalizationError::UnnormalizedState(n2));
        }
        let mass = self.grid.mass();
        let u = self.u;

        let mut coeffs = Vec::new();
        let mut shell = Vec::new();
        let mut lat = Vec::new();

        if !state.terms1().is_empty() {
            let combined = superpose(state.terms1());
            let dressed = scale_by_energy(&combined, u, mass, {
                let eps = self.epsilon;
                move |eu| 1.0 / (eu + eps).sqrt()
            });
            coeffs.push(1.0);
            shell.push(self.grid.sample(&dressed));
            lat.push((1.0, self.lattice.sample(&dressed)));
        }

        if !state.terms2().is_empty() {
            let (c2, s2, l2) = self.sector2_modes(state.terms2());
            coeffs.extend(c2);
            shell.extend(s2);
            lat.extend(l2);
        }
        Ok((coeffs, shell, lat))
    }

    /// Exponential-sum factorization of the total-energy dressing on sector
    /// 2, followed by diagonalization of the one-body reduced kernel.
    #[allow(clippy::type_complexity)]
    fn sector2_modes(
        &self,
        terms: &[(C64, OneParticle, OneParticle)],
    ) -> (Vec<f64>, Vec<Vec<C64>>, Vec<(f64, Array3<C64>)>) {
        let mass = self.grid.mass();
        let u = self.u;
        // dressed energies attainable on either sampling grid; E_u ≥ m holds
        // exactly on the mass shell
        let mut eu_max = self
            .grid
            .energies_for(&u)
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let pm = self.lattice.pmax();
        for corner in 0..8u32 {
            let p = [
                if corner & 1 == 0 { -pm } else { pm },
                if corner & 2 == 0 { -pm } else { pm },
                if corner & 4 == 0 { -pm } else { pm },
            ];
            eu_max = eu_max.max(u_energy(&u, mass, p));
        }
        let smin = 2.0 * mass + self.epsilon;
        let smax = 2.0 * eu_max + self.epsilon;
        let quad = inv_sqrt_exp_sum(smin, smax);

        // one dressed product term per (sector-2 term, quadrature node); the
        // per-slot factor e^{-t E_u} keeps each term separable-symmetric
        let mut gammas: Vec<C64> = Vec::new();
        let mut slots: Vec<OneParticle> = Vec::new();
        for (c, a, b) in terms {
            for &(t, kappa) in &quad {
                gammas.push(c * kappa * (-t * self.epsilon).exp());
                slots.push(scale_by_energy(a, u, mass, move |eu| (-t * eu).exp()));
                slots.push(scale_by_energy(b, u, mass, move |eu| (-t * eu).exp()));
            }
        }
        let dim = slots.len();
        let shell_basic: Vec<Vec<C64>> = slots.iter().map(|s| self.grid.sample(s)).collect();
        let lat_basic: Vec<Array3<C64>> = slots.iter().map(|s| self.lattice.sample(s)).collect();

        // Gram of the slot functions in dμ
        let mut gram = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = self.grid.inner(&shell_basic[i], &shell_basic[j]);
                gram[i * dim + j] = v;
                gram[j * dim + i] = v.conj();
            }
        }

        // hermitian coefficient matrix of the one-body kernel
        // G(p,k) = Σ_{μν} M_{μν} conj(f_μ(p)) f_ν(k)
        let m = DMatrix::from_fn(dim, dim, |mu, nu| {
            let (ta, sa) = (mu / 2, mu % 2);
            let (tb, sb) = (nu / 2, nu % 2);
            let pa = 2 * ta + (1 - sa);
            let pb = 2 * tb + (1 - sb);
            0.5 * gammas[ta].conj() * gammas[tb] * gram[pa * dim + pb]
        });
        let eig = m.symmetric_eigen();
        let lam_max = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &l| acc.max(l.abs()));
        let cut = 1e-12 * lam_max;

        let shell_len = self.grid.len();
        let n = self.lattice.n();
        let mut coeffs = Vec::new();
        let mut shell_modes = Vec::new();
        let mut lat_modes = Vec::new();
        for s in 0..dim {
            let lam = eig.eigenvalues[s];
            if lam.abs() <= cut {
                continue;
            }
            let mut sm = vec![C64::new(0.0, 0.0); shell_len];
            let mut lm = Array3::<C64>::zeros((n, n, n));
            for nu in 0..dim {
                let w = eig.eigenvectors[(nu, s)].conj();
                if w.norm() == 0.0 {
                    continue;
                }
                for (dst, src) in sm.iter_mut().zip(&shell_basic[nu]) {
                    *dst += w * src;
                }
                lm.zip_mut_with(&lat_basic[nu], |dst, &src| *dst += w * src);
            }
            coeffs.push(lam);
            shell_modes.push(sm);
            lat_modes.push((lam, lm));
        }
        (coeffs, shell_modes, lat_modes)
    }

    fn window_for(&self, x0: f64, region: &RegionBox) -> SeparableWindow {
        let mut w = self.f.fourier_sq();
        if x0 != 0.0 {
            w = w.translated(&FourVector::new(x0, 0.0, 0.0, 0.0));
        }
        w.product(&box_window(region))
    }

    /// Box probability with density samples and the two-route cross check.
    pub fn probability(&self, d: &DressedState, region: &RegionBox) -> LocalizationResult {
        let p_pos = d
            .pipeline
            .tensor_box(&self.f, region)
            .contract(&self.u, &U_SIGMA)
            .re;
        // ordering factor 2: the retained channel appears in both operator
        // orders of the normal-ordered bilinear
        let p_mom = 2.0
            * channel_diag_quadratic(
                self.grid,
                &self.window_for(d.x0, region),
                Channel::Retain,
                &self.u,
                &U_SIGMA,
                &d.coeffs,
                &d.shell_modes,
            )
            .re;
        LocalizationResult {
            probability: p_pos,
            epsilon: self.epsilon,
            cross_route_delta: (p_pos - p_mom).abs(),
            density: self.density(d),
        }
    }

    /// Momentum-route probability only (no pipeline, no density); used for
    /// cheap covariance and stability sweeps.
    pub fn probability_momentum(
        &self,
        state: &SectorState,
        x0: f64,
        region: &RegionBox,
    ) -> Result<f64, LocalizationError> {
        let (coeffs, shell, _lat) = self.dress_modes(state)?;
        Ok(2.0
            * channel_diag_quadratic(
                self.grid,
                &self.window_for(x0, region),
                Channel::Retain,
                &self.u,
                &U_SIGMA,
                &coeffs,
                &shell,
            )
            .re)
    }

    /// Contracted density over the whole lattice.
    pub fn density(&self, d: &DressedState) -> DensityMap {
        let raw = d.pipeline.density(&self.f, &self.u, &U_SIGMA);
        let mut max_imag = 0.0f64;
        let values = raw.mapv(|z| {
            max_imag = max_imag.max(z.im.abs());
            z.re
        });
        DensityMap {
            values,
            max_imag,
            dx: self.lattice.dx(),
            positions: self.lattice.positions(),
        }
    }

    /// Whole-plane total via the momentum-space collapse of the spatial
    /// integral; equals 1 exactly in the ε → 0 limit for normalized states.
    pub fn plane_probability(&self, d: &DressedState) -> f64 {
        let n3 = self.grid.len();
        let mut diag = vec![C64::new(0.0, 0.0); n3];
        for (c, m) in d.coeffs.iter().zip(&d.shell_modes) {
            for (dst, v) in diag.iter_mut().zip(m) {
                *dst += c * (v * v.conj());
            }
        }
        sigma_plane_total(self.grid, &self.f, &self.u, &diag).re
    }

    /// Whole-plane total by summing the lattice density (the position-route
    /// counterpart of [`Self::plane_probability`]).
    pub fn plane_probability_lattice(&self, d: &DressedState) -> f64 {
        self.density(d).total()
    }

    /// First moment `∫ x⃗ density(x⃗) d³x` over the truncation box, with a
    /// boundary-decay guard.
    pub fn first_moment(&self, d: &DressedState) -> Result<[f64; 3], LocalizationError> {
        let map = self.density(d);
        let n = self.lattice.n();
        let v = &map.values;
        let peak = map.values.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let mut boundary = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for face in [
                    [0, i, j],
                    [n - 1, i, j],
                    [i, 0, j],
                    [i, n - 1, j],
                    [i, j, 0],
                    [i, j, n - 1],
                ] {
                    boundary = boundary.max(v[face].abs());
                }
            }
        }
        if boundary > 1e-8 * peak {
            return Err(LocalizationError::InsufficientDecay { boundary, peak });
        }
        let xs = &map.positions;
        let dv = map.dx.powi(3);
        let mut out = [0.0f64; 3];
        for ((i, j, k), &val) in v.indexed_iter() {
            out[0] += xs[i] * val * dv;
            out[1] += xs[j] * val * dv;
            out[2] += xs[k] * val * dv;
        }
        Ok(out)
    }

    /// Causality check: probability of `Δ` now vs probability of the causal
    /// shadow's bounding box after the plane moves by `t`.
    pub fn check_cc(
        &self,
        state: &SectorState,
        region: &RegionBox,
        t: f64,
    ) -> Result<CcReport, LocalizationError> {
        let base = self.dress(state, 0.0)?;
        let p_base = self.probability(&base, region).probability;
        let shifted = self.dress(state, t)?;
        let shadow = causal_shadow(region, t).bounding_box();
        let p_shadow = self.probability(&shifted, &shadow).probability;
        Ok(CcReport {
            p_base,
            p_shadow,
            margin: p_shadow - p_base,
        })
    }

    /// Covariance under spatial translations: moving the state and the
    /// region together must leave the probability unchanged. Returns the
    /// absolute deviation (momentum route; exact up to roundoff).
    pub fn translation_covariance(
        &self,
        state: &SectorState,
        region: &RegionBox,
        shift: [f64; 3],
    ) -> Result<f64, LocalizationError> {
        let p0 = self.probability_momentum(state, 0.0, region)?;
        let moved = state.translated(
            &FourVector::new(0.0, shift[0], shift[1], shift[2]),
            self.grid.mass(),
        );
        let shifted_region = RegionBox::new(
            [
                region.lower()[0] + shift[0],
                region.lower()[1] + shift[1],
                region.lower()[2] + shift[2],
            ],
            [
                region.upper()[0] + shift[0],
                region.upper()[1] + shift[1],
                region.upper()[2] + shift[2],
            ],
        )
        .expect("shifted box stays ordered");
        let p1 = self.probability_momentum(&moved, 0.0, &shifted_region)?;
        Ok((p0 - p1).abs())
    }
}

// ---------------------------------------------------------------------------
// dressing helpers
// ---------------------------------------------------------------------------

fn u_energy(u: &FourVector, mass: f64, p: [f64; 3]) -> f64 {
    let e = (mass * mass + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    u.t * e - (u.x * p[0] + u.y * p[1] + u.z * p[2])
}

/// Single amplitude representing `Σ_i c_i ψ_i`.
fn superpose(terms: &[(C64, OneParticle)]) -> OneParticle {
    let owned: Arc<Vec<(C64, OneParticle)>> = Arc::new(terms.to_vec());
    OneParticle::new(move |p| owned.iter().map(|(c, f)| c * f.eval(p)).sum())
}

/// Multiplies an amplitude by a real function of the `u`-energy.
fn scale_by_energy(
    f: &OneParticle,
    u: FourVector,
    mass: f64,
    factor: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> OneParticle {
    let base = f.clone();
    OneParticle::new(move |p| base.eval(p) * factor(u_energy(&u, mass, p)))
}

/// Trapezoid exponential sum for `s^{-1/2}` on `[smin, smax]`:
/// `s^{-1/2} ≈ Σ_r κ_r e^{-s t_r}`, relative accuracy ≈ 1e-8.
fn inv_sqrt_exp_sum(smin: f64, smax: f64) -> Vec<(f64, f64)> {
    assert!(smin > 0.0 && smax >= smin);
    let h = 0.5;
    // s·t ≥ 25 beyond the right end; left end set by the truncated tail mass
    let tau_hi = (25.0 / smin).ln();
    let tau_lo = 2.0 * (1e-8 * std::f64::consts::PI.sqrt() / 2.0).ln() - smax.ln();
    let steps = ((tau_hi - tau_lo) / h).ceil() as usize;
    let norm = 1.0 / std::f64::consts::PI.sqrt();
    (0..=steps)
        .map(|k| {
            let tau = tau_lo + h * k as f64;
            (tau.exp(), h * (0.5 * tau).exp() * norm)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// first-moment comparators
// ---------------------------------------------------------------------------

/// Newton–Wigner position expectation along `axis` on the lab rest space:
/// `⟨N^a⟩ = ∫ conj(g) i ∂_a g d³p / ∫ |g|² d³p` with `g = ψ/√E`.
pub fn newton_wigner_expectation(
    grid: &MassShellGrid,
    psi: &OneParticle,
    axis: usize,
) -> Result<f64, LocalizationError> {
    assert!(axis < 3);
    let pts = grid.points();
    let es = grid.energies();
    let w = grid.grid().weights();
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0f64;
    for i in 0..pts.len() {
        let p = pts[i];
        let e = es[i];
        let v = psi.eval(p);
        let dv = psi.gradient(p)[axis];
        // conj(g) i ∂g = [i conj(ψ)ψ' + |ψ|²(-i p_a/(2E²))]/E
        let t = C64::new(0.0, 1.0) * (v.conj() * dv - v * v.conj() * (p[axis] / (2.0 * e * e)));
        num += w[i] / e * t;
        den += w[i] / e * (v * v.conj()).re;
    }
    let expectation = num.re / den;
    let residue = num.im.abs() / den;
    if residue > 1e-8 * (1.0 + expectation.abs()) {
        return Err(LocalizationError::DerivativeNoise(residue));
    }
    Ok(expectation)
}

/// Center of `u`-energy along `axis` for a pure two-particle state: the
/// summed anticommutator expectation
/// `Σ_i ⟨½{N^a_i, E_u(p_i)/(E_u(p₁)+E_u(p₂))}⟩ = 2 Re ⟨wΨ|N^a_1 Ψ⟩`.
pub fn center_of_energy_expectation(
    grid: &MassShellGrid,
    state: &SectorState,
    u: &FourVector,
    axis: usize,
) -> Result<f64, LocalizationError> {
    assert!(axis < 3);
    if state.c0().norm() > 1e-14 || !state.terms1().is_empty() {
        return Err(LocalizationError::UnsupportedSector(1));
    }
    if !state.terms3().is_empty() {
        return Err(LocalizationError::UnsupportedSector(3));
    }
    let terms = state.terms2();
    let n3 = grid.len();
    let pts = grid.points();
    let es = grid.energies();
    let eu = grid.energies_for(u);
    let wmu = grid.wmu();

    // per-term slot samples and slot-1 Newton-Wigner actions
    struct Tab {
        c: C64,
        a: Vec<C64>,
        b: Vec<C64>,
        da: Vec<C64>,
        db: Vec<C64>,
    }
    let tabs: Vec<Tab> = terms
        .iter()
        .map(|(c, fa, fb)| {
            let mut a = Vec::with_capacity(n3);
            let mut b = Vec::with_capacity(n3);
            let mut da = Vec::with_capacity(n3);
            let mut db = Vec::with_capacity(n3);
            for i in 0..n3 {
                let p = pts[i];
                let e = es[i];
                let corr = p[axis] / (2.0 * e * e);
                let va = fa.eval(p);
                let vb = fb.eval(p);
                a.push(va);
                b.push(vb);
                da.push(C64::new(0.0, 1.0) * (fa.gradient(p)[axis] - va * corr));
                db.push(C64::new(0.0, 1.0) * (fb.gradient(p)[axis] - vb * corr));
            }
            Tab {
                c: *c,
                a,
                b,
                da,
                db,
            }
        })
        .collect();

    let mut acc = C64::new(0.0, 0.0);
    for ta in &tabs {
        for tb in &tabs {
            let cc = ta.c.conj() * tb.c;
            for i in 0..n3 {
                let wi = wmu[i];
                let mut row = C64::new(0.0, 0.0);
                for j in 0..n3 {
                    let wgt = eu[i] / (eu[i] + eu[j]);
                    let bra = 0.5 * (ta.a[i] * ta.b[j] + ta.b[i] * ta.a[j]);
                    let ket = 0.5 * (tb.da[i] * tb.b[j] + tb.db[i] * tb.a[j]);
                    row += wgt * bra.conj() * ket * wmu[j];
                }
                acc += cc * row * wi;
            }
        }
    }
    let den = state.norm_sq(grid);
    Ok(2.0 * acc.re / den)
}

// ---------------------------------------------------------------------------
// non-relativistic comparator
// ---------------------------------------------------------------------------

/// Von Neumann probability with a smeared indicator:
/// `∫ (χ_Δ * g_f)(y⃗) |φ(y⃗)|² d³y`, where `g_f` is the spatial profile of
/// `f²` (unit mass for normalized `f`). Quadrature over `[-hw, hw]³`.
pub fn nonrel_limit_probability<F>(
    f: &SmearingFunction,
    phi: F,
    half_width: f64,
    nodes: usize,
    region: &RegionBox,
) -> f64
where
    F: Fn([f64; 3]) -> C64,
{
    let rule = gauss_legendre_on(nodes, -half_width, half_width);
    let xs = rule.nodes();
    let ws = rule.weights();
    let mut total = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            for (k, &z) in xs.iter().enumerate() {
                let v = phi([x, y, z]);
                let w = ws[i] * ws[j] * ws[k];
                total += w * f.smeared_box_overlap(region, [x, y, z]) * (v * v.conj()).re;
            }
        }
    }
    total
}

/// One row of the mass sweep comparing the relativistic probability with
/// the von Neumann formula.
pub struct NonrelComparison {
    pub mass: f64,
    pub exact: f64,
    pub vnm: f64,
    pub gap: f64,
}

/// Sweeps masses for a fixed momentum-space packet and smearing, comparing
/// the exact localization probability against the non-relativistic
/// convolution formula with the packet's flat Fourier transform as the
/// position wavefunction (mass-independent after normalization).
#[allow(clippy::too_many_arguments)]
pub fn nonrel_gap_sequence(
    packet: &OneParticle,
    f: &SmearingFunction,
    region: &RegionBox,
    masses: &[f64],
    shell_n: usize,
    shell_pmax: f64,
    lattice: &MomentumGrid,
    time_nodes: usize,
) -> Result<Vec<NonrelComparison>, LocalizationError> {
    // position wavefunction: bare lattice transform of the packet, unit-normalized
    let samples = lattice.sample(packet);
    let pos = lattice.position_from_momentum(&samples);
    let dv = lattice.dx().powi(3);
    let nrm2: f64 = pos.iter().map(|z| (z * z.conj()).re).sum::<f64>() * dv;
    let overlap_total: f64 = {
        let xs = lattice.positions();
        let mut acc = 0.0;
        for ((i, j, k), z) in pos.indexed_iter() {
            let w = f.smeared_box_overlap(region, [xs[i], xs[j], xs[k]]);
            acc += w * (z * z.conj()).re * dv;
        }
        acc / nrm2
    };

    let mut out = Vec::new();
    for &mass in masses {
        let grid = MassShellGrid::sinh(shell_n, shell_pmax, mass)
            .expect("shell grid parameters are valid");
        let state = SectorState::one_particle(packet.clone())
            .normalized(&grid)
            .expect("packet has positive norm");
        let povm = Povm::new(&grid, lattice, f.clone(), U_SIGMA)?.with_time_nodes(time_nodes);
        let d = povm.dress(&state, 0.0)?;
        let exact = povm.probability(&d, region).probability;
        out.push(NonrelComparison {
            mass,
            exact,
            vnm: overlap_total,
            gap: (exact - overlap_total).abs(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::SectorState;

    const M: f64 = 1.0;

    fn unit_f() -> SmearingFunction {
        SmearingFunction::gaussian(1.0, 1.0)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap()
    }

    fn packet() -> OneParticle {
        OneParticle::gaussian([0.2, 0.0, 0.0], 1.0)
    }

    #[test]
    fn exp_sum_tracks_inverse_sqrt() {
        let (a, b) = (2.0, 64.0);
        let quad = inv_sqrt_exp_sum(a, b);
        let mut s = a;
        while s <= b {
            let approx: f64 = quad.iter().map(|&(t, k)| k * (-s * t).exp()).sum();
            let exact = 1.0 / s.sqrt();
            assert!(
                (approx - exact).abs() < 1e-7 * exact,
                "s = {s}: {approx} vs {exact}"
            );
            s *= 1.17;
        }
    }

    #[test]
    fn one_particle_plane_total_is_one() {
        // the lattice total is limited by the shell-grid norm accuracy
        // (the state is normalized on the shell grid, evaluated on the
        // lattice): 14 sinh nodes keep that ratio below 1e-4
        let grid = MassShellGrid::sinh(14, 6.0, M).unwrap();
        let lattice = MomentumGrid::new(24, 4.5).unwrap();
        let state = SectorState::one_particle(packet()).normalized(&grid).unwrap();
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA)
            .unwrap()
            .with_time_nodes(48);
        let d = povm.dress(&state, 0.0).unwrap();
        // momentum collapse: exact on the grid at ε = 0
        let total = povm.plane_probability(&d);
        assert!((total - 1.0).abs() < 1e-12, "collapse total {total}");
        // lattice Riemann sum: limited by lattice resolution
        let lat_total = povm.plane_probability_lattice(&d);
        assert!((lat_total - 1.0).abs() < 2e-3, "lattice total {lat_total}");
    }

    #[test]
    fn two_particle_plane_total_is_one() {
        let grid = MassShellGrid::sinh(9, 6.0, M).unwrap();
        let lattice = MomentumGrid::new(8, 4.0).unwrap();
        let pair = SectorState::pair(
            OneParticle::gaussian([0.4, 0.0, 0.0], 1.0),
            OneParticle::gaussian([-0.2, 0.3, 0.0], 0.8),
        )
        .normalized(&grid)
        .unwrap();
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA).unwrap();
        let (coeffs, shell, _lat) = povm.dress_modes(&pair).unwrap();
        let n3 = grid.len();
        let mut diag = vec![C64::new(0.0, 0.0); n3];
        for (c, m) in coeffs.iter().zip(&shell) {
            for (dst, v) in diag.iter_mut().zip(m) {
                *dst += c * (v * v.conj());
            }
        }
        let total = sigma_plane_total(&grid, povm.f(), povm.u(), &diag).re;
        // limited only by the exponential-sum accuracy
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn sector2_modes_match_dense_dressing() {
        use crate::stress_energy::channel_tensor_dense;
        use ndarray::Array2;
        let grid = MassShellGrid::sinh(7, 5.0, M).unwrap();
        let lattice = MomentumGrid::new(8, 4.0).unwrap();
        let fa = OneParticle::gaussian([0.4, 0.0, 0.0], 1.0);
        let fb = OneParticle::gaussian([-0.2, 0.3, 0.0], 0.8);
        let pair = SectorState::pair(fa.clone(), fb.clone())
            .normalized(&grid)
            .unwrap();
        let eps = 1e-3;
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA)
            .unwrap()
            .with_epsilon(eps)
            .unwrap();
        let (coeffs, shell, _lat) = povm.dress_modes(&pair).unwrap();

        // dense reference: exact pointwise dressing of the pair amplitude
        let n3 = grid.len();
        let c = pair.terms2()[0].0;
        let sa = grid.sample(&fa);
        let sb = grid.sample(&fb);
        let eu = grid.energies_for(&U_SIGMA);
        let wmu = grid.wmu();
        let mut w2 = Array2::<C64>::zeros((n3, n3));
        for i in 0..n3 {
            for j in 0..n3 {
                let amp = 0.5 * c * (sa[i] * sb[j] + sb[i] * sa[j]);
                w2[[i, j]] = amp / (eu[i] + eu[j] + eps).sqrt();
            }
        }
        let mut g = Array2::<C64>::zeros((n3, n3));
        for i in 0..n3 {
            for j in 0..n3 {
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..n3 {
                    acc += wmu[q] * w2[[i, q]].conj() * w2[[j, q]];
                }
                g[[i, j]] = 2.0 * acc;
            }
        }
        let region = RegionBox::new([-0.6, -0.5, -0.4], [0.4, 0.5, 0.6]).unwrap();
        let win = povm.window_for(0.0, &region);
        let dense = 2.0
            * channel_tensor_dense(&grid, &win, Channel::Retain, &g)
                .contract(&U_SIGMA, &U_SIGMA)
                .re;
        let modal = 2.0
            * channel_diag_quadratic(
                &grid,
                &win,
                Channel::Retain,
                &U_SIGMA,
                &U_SIGMA,
                &coeffs,
                &shell,
            )
            .re;
        assert!(
            (dense - modal).abs() < 1e-6 * dense.abs(),
            "{dense} vs {modal}"
        );
    }

    #[test]
    fn octants_add_up_and_probability_is_monotone() {
        let grid = MassShellGrid::sinh(8, 5.0, M).unwrap();
        let lattice = MomentumGrid::new(16, 4.0).unwrap();
        let state = SectorState::one_particle(packet()).normalized(&grid).unwrap();
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA)
            .unwrap()
            .with_time_nodes(16);
        let d = povm.dress(&state, 0.0).unwrap();
        let big = RegionBox::new([-0.7, -0.6, -0.5], [0.5, 0.6, 0.7]).unwrap();
        let p_big = povm.probability(&d, &big).probability;
        let sum: f64 = big
            .octants()
            .iter()
            .map(|o| povm.probability(&d, o).probability)
            .sum();
        assert!((sum - p_big).abs() < 1e-10, "{sum} vs {p_big}");
        let small = RegionBox::new([-0.4, -0.3, -0.2], [0.3, 0.4, 0.5]).unwrap();
        let p_small = povm.probability(&d, &small).probability;
        assert!(p_small <= p_big + 1e-12);
        assert!(p_small >= 0.0 && p_big <= 1.0 + 1e-9);
    }

    #[test]
    fn epsilon_sweep_converges_like_cauchy() {
        let grid = MassShellGrid::sinh(8, 5.0, M).unwrap();
        let lattice = MomentumGrid::new(8, 4.0).unwrap();
        let state = SectorState::one_particle(packet()).normalized(&grid).unwrap();
        let region = RegionBox::centered_cube(0.5).unwrap();
        let mut ps = Vec::new();
        for eps in [1e-2, 1e-4, 1e-6] {
            let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA)
                .unwrap()
                .with_epsilon(eps)
                .unwrap();
            ps.push(povm.probability_momentum(&state, 0.0, &region).unwrap());
        }
        let gap1 = (ps[1] - ps[0]).abs();
        let gap2 = (ps[2] - ps[1]).abs();
        assert!(gap2 * 10.0 <= gap1, "gaps {gap1} {gap2}");
    }

    #[test]
    fn zero_time_causality_margin_vanishes() {
        let grid = MassShellGrid::sinh(7, 5.0, M).unwrap();
        let lattice = MomentumGrid::new(12, 4.0).unwrap();
        let state = SectorState::one_particle(packet()).normalized(&grid).unwrap();
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA)
            .unwrap()
            .with_time_nodes(12);
        let region = RegionBox::centered_cube(0.8).unwrap();
        let rep = povm.check_cc(&state, &region, 0.0).unwrap();
        assert!(rep.margin.abs() < 1e-12, "margin {}", rep.margin);
    }

    #[test]
    fn probability_is_translation_covariant() {
        let grid = MassShellGrid::sinh(8, 5.0, M).unwrap();
        let lattice = MomentumGrid::new(8, 4.0).unwrap();
        let state = SectorState::one_particle(packet()).normalized(&grid).unwrap();
        let povm = Povm::new(&grid, &lattice, unit_f(), U_SIGMA).unwrap();
        let region = RegionBox::new([-0.5, -0.4, -0.6], [0.5, 0.6, 0.4]).unwrap();
        let dev = povm
            .translation_covariance(&state, &region, [0.3, -0.2, 0.15])
            .unwrap();
        assert!(dev < 1e-8, "deviation {dev}");
    }

    #[test]
    fn newton_wigner_parity_and_linear_phase() {
        let grid = MassShellGrid::uniform(30, 6.0, M).unwrap();
        let even = OneParticle::gaussian([0.0, 0.0, 0.0], 1.0);
        for a in 0..3 {
            let v = newton_wigner_expectation(&grid, &even, a).unwrap();
            assert!(v.abs() < 1e-12, "axis {a}: {v}");
        }
        let phased = even.with_linear_phase([0.7, 0.0, 0.0]);
        let v = newton_wigner_expectation(&grid, &phased, 0).unwrap();
        assert!((v + 0.7).abs() < 1e-12, "{v}");
    }

    #[test]
    fn newton_wigner_translation_shift() {
        // displaced packets lose the symmetric error cancellation of the
        // parity test; 64 nodes per axis keep the total-derivative residue
        // inside the 1e-8 noise guard
        let grid = MassShellGrid::uniform(64, 6.0, M).unwrap();
        let base = OneParticle::gaussian([0.3, -0.1, 0.0], 0.9).with_linear_phase([0.2, 0.0, 0.4]);
        let x0 = [0.45, -0.3, 0.2];
        // spatial translation by x⃗₀ = momentum phase e^{-i p·x⃗₀}
        let moved = base.with_linear_phase([-x0[0], -x0[1], -x0[2]]);
        #[allow(clippy::needless_range_loop)] // axis index feeds both routes
        for a in 0..3 {
            let v0 = newton_wigner_expectation(&grid, &base, a).unwrap();
            let v1 = newton_wigner_expectation(&grid, &moved, a).unwrap();
            assert!((v1 - v0 - x0[a]).abs() < 1e-8, "axis {a}: {v0} -> {v1}");
        }
        // composing two translations equals the combined one
        let moved2 = moved.with_linear_phase([-0.1, 0.05, 0.0]);
        let direct = base.with_linear_phase([-x0[0] - 0.1, -x0[1] + 0.05, -x0[2]]);
        for a in 0..3 {
            let v2 = newton_wigner_expectation(&grid, &moved2, a).unwrap();
            let vd = newton_wigner_expectation(&grid, &direct, a).unwrap();
            assert!((v2 - vd).abs() < 1e-10);
        }
    }

    #[test]
    fn center_of_energy_parity_and_drift() {
        let grid = MassShellGrid::sinh(9, 6.0, M).unwrap();
        // both packets even: exchange-symmetric even state
        let even = SectorState::pair(
            OneParticle::gaussian([0.0, 0.0, 0.0], 1.0),
            OneParticle::gaussian([0.0, 0.0, 0.0], 0.7),
        )
        .normalized(&grid)
        .unwrap();
        let v = center_of_energy_expectation(&grid, &even, &U_SIGMA, 0).unwrap();
        assert!(v.abs() < 1e-10, "{v}");

        // packets at ±d with equal energies: moment 0; boosting one packet's
        // momentum pulls the center toward it
        let d = 0.8;
        let at = |x: f64, q: f64| {
            OneParticle::gaussian([q, 0.0, 0.0], 0.9).with_linear_phase([-x, 0.0, 0.0])
        };
        let sym = SectorState::pair(at(d, 0.0), at(-d, 0.0))
            .normalized(&grid)
            .unwrap();
        let v_sym = center_of_energy_expectation(&grid, &sym, &U_SIGMA, 0).unwrap();
        assert!(v_sym.abs() < 1e-8, "{v_sym}");
        let skew = SectorState::pair(at(d, 0.0), at(-d, 1.1))
            .normalized(&grid)
            .unwrap();
        let v_skew = center_of_energy_expectation(&grid, &skew, &U_SIGMA, 0).unwrap();
        assert!(v_skew < -1e-3, "expected drift toward -d, got {v_skew}");
    }

    #[test]
    fn vnm_probability_limits() {
        let f = unit_f();
        let norm = std::f64::consts::PI.powf(-0.75);
        let phi = move |y: [f64; 3]| {
            C64::new(
                norm * (-0.5 * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2])).exp(),
                0.0,
            )
        };
        // whole space: convolution has unit mass, φ is normalized
        let whole = RegionBox::centered_cube(40.0).unwrap();
        let p = nonrel_limit_probability(&f, phi, 9.0, 60, &whole);
        assert!((p - 1.0).abs() < 1e-9, "{p}");

        // smooth profile: the triple quadrature must factor into the
        // per-axis closed forms (overlap = ∏ ½[erf((y-l)/w) - erf((y-u)/w)]
        // for normalized f with spatial width w)
        use statrs::function::erf::erf;
        let w = 0.8;
        let f8 = SmearingFunction::gaussian(1.0, w)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let (l, u) = (-0.9, 0.9);
        let region = RegionBox::new([l; 3], [u; 3]).unwrap();
        let p3 = nonrel_limit_probability(&f8, phi, 9.0, 60, &region);
        let rule = crate::quadrature::gauss_legendre_on(400, -9.0, 9.0);
        let axis = rule.integrate(|y| {
            let rho = (-y * y).exp() / std::f64::consts::PI.sqrt();
            rho * 0.5 * (erf((y - l) / w) - erf((y - u) / w))
        });
        let exact = axis.powi(3);
        assert!((p3 - exact).abs() < 1e-8, "{p3} vs {exact}");
    }
}
