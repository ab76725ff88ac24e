//! Truncated Fock states over the invariant mass-shell measure.
//!
//! States live in momentum space: a sector-`n` amplitude is a symmetric
//! function of `n` momenta, square-integrable against `∏ dμ_m`, with
//! `dμ_m = d³p / E(p)`. Multi-particle amplitudes are kept as sums of
//! *symmetrized products* of one-particle amplitudes, which turns every inner
//! product, Hamiltonian expectation and smeared-tensor dressing into short
//! combinations of pairwise 3-d integrals — nothing ever materializes a 6-d
//! or 9-d tensor.
//!
//! Two kinds of momentum discretization coexist:
//!
//! * [`MassShellGrid`] — a quadrature grid (Gauss–Legendre, plain or
//!   sinh-mapped) carrying precomputed energies and measure weights; used by
//!   all momentum-route integrals;
//! * [`MomentumGrid`] — a uniform FFT lattice with its dual position lattice;
//!   used by the position-route synthesis `ψ(x) = (2π)^{-3/2} ∫ ψ(p)
//!   e^{ip·x} dμ_m(p)` and its inverse.

use std::sync::Arc;

use ndarray::{Array3, Axis};
use thiserror::Error;

use crate::minkowski::{Boost, FourVector};
use crate::quadrature::Grid3;
use crate::smearing::SmearingFunction;
use crate::C64;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("mass must be positive and finite, got {0}")]
    NonPositiveMass(f64),
    #[error("state has numerically zero norm, cannot normalize")]
    ZeroNorm,
    #[error("lattice size must be an even number ≥ 4, got {0}")]
    BadLatticeSize(usize),
    #[error("momentum cutoff must be positive and finite, got {0}")]
    BadCutoff(f64),
}

// ---------------------------------------------------------------------------
// quadrature grid on the mass shell
// ---------------------------------------------------------------------------

/// A 3-d quadrature grid with the mass-shell data precomputed: energies
/// `E(p⃗)` and measure weights `w/E` for `∫ · dμ_m`.
#[derive(Debug, Clone)]
pub struct MassShellGrid {
    grid: Grid3,
    mass: f64,
    energies: Vec<f64>,
    wmu: Vec<f64>,
    calibration: f64,
}

/// `∫ e^{-|p⃗|²} dμ_m` by radial reduction, accurate to machine precision
/// (the integrand is spent long before the upper cutoff).
fn radial_gaussian_reference(mass: f64) -> f64 {
    let rule = crate::quadrature::gauss_legendre_on(96, 0.0, 9.0);
    4.0 * std::f64::consts::PI
        * rule.integrate(|p| p * p * (-p * p).exp() / (mass * mass + p * p).sqrt())
}

impl MassShellGrid {
    pub fn new(grid: Grid3, mass: f64) -> Result<Self, StateError> {
        if !mass.is_finite() || mass <= 0.0 {
            return Err(StateError::NonPositiveMass(mass));
        }
        let energies: Vec<f64> = grid
            .points()
            .iter()
            .map(|&p| crate::minkowski::mass_shell_energy(p, mass))
            .collect();
        let wmu: Vec<f64> = grid
            .weights()
            .iter()
            .zip(&energies)
            .map(|(&w, &e)| w / e)
            .collect();
        let on_grid: f64 = grid
            .points()
            .iter()
            .zip(&wmu)
            .map(|(&p, &w)| w * (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp())
            .sum();
        let reference = radial_gaussian_reference(mass);
        let calibration = (on_grid - reference).abs() / reference;
        Ok(MassShellGrid {
            grid,
            mass,
            energies,
            wmu,
            calibration,
        })
    }

    /// Sinh-mapped cube — the default for mass-shell integrands.
    pub fn sinh(n: usize, pmax: f64, mass: f64) -> Result<Self, StateError> {
        MassShellGrid::new(Grid3::sinh_cube(n, pmax), mass)
    }

    /// Plain Gauss–Legendre cube.
    pub fn uniform(n: usize, pmax: f64, mass: f64) -> Result<Self, StateError> {
        MassShellGrid::new(Grid3::uniform_cube(n, pmax), mass)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        self.grid.points()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Measure weights `w_i / E_i`, so `∫ g dμ ≈ Σ_i wmu_i g(p⃗_i)`.
    pub fn wmu(&self) -> &[f64] {
        &self.wmu
    }

    /// `E_u(p⃗_i) = -u·P_i` for every grid point (the energy seen by the
    /// observer with four-velocity `u`).
    pub fn energies_for(&self, u: &FourVector) -> Vec<f64> {
        self.points()
            .iter()
            .zip(&self.energies)
            .map(|(&p, &e)| u.t * e - (u.x * p[0] + u.y * p[1] + u.z * p[2]))
            .collect()
    }

    /// Samples a one-particle amplitude on all grid points.
    pub fn sample(&self, s: &OneParticle) -> Vec<C64> {
        use rayon::prelude::*;
        self.points().par_iter().map(|&p| s.eval(p)).collect()
    }

    /// `⟨a|b⟩ = Σ_i wmu_i conj(a_i) b_i`.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..a.len() {
            acc += a[i].conj() * b[i] * self.wmu[i];
        }
        acc
    }

    /// `⟨a| m |b⟩` for a real diagonal multiplier sampled on the grid.
    pub fn inner_weighted(&self, a: &[C64], mult: &[f64], b: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..a.len() {
            acc += a[i].conj() * b[i] * (self.wmu[i] * mult[i]);
        }
        acc
    }

    pub fn norm_sq(&self, a: &[C64]) -> f64 {
        self.inner(a, a).re
    }

    /// Relative quadrature error on a unit-width reference Gaussian against
    /// a machine-precision radial reduction, fixed at construction. A cheap
    /// quality figure for shell integrands of comparable width; it folds in
    /// both node density and cutoff truncation.
    pub fn calibration(&self) -> f64 {
        self.calibration
    }
}

// ---------------------------------------------------------------------------
// one-particle amplitudes
// ---------------------------------------------------------------------------

type AmpFn = Arc<dyn Fn([f64; 3]) -> C64 + Send + Sync>;

/// A one-particle momentum amplitude `ψ(p⃗)`, optionally with an analytic
/// gradient `∂ψ/∂pᵃ` (used by Newton–Wigner-type derivative quadratures;
/// consumers fall back to central differences when absent).
#[derive(Clone)]
pub struct OneParticle {
    amp: AmpFn,
    grad: Option<[AmpFn; 3]>,
}

impl std::fmt::Debug for OneParticle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneParticle")
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

impl OneParticle {
    pub fn new(amp: impl Fn([f64; 3]) -> C64 + Send + Sync + 'static) -> Self {
        OneParticle {
            amp: Arc::new(amp),
            grad: None,
        }
    }

    pub fn with_gradient(
        amp: impl Fn([f64; 3]) -> C64 + Send + Sync + 'static,
        grad: [AmpFn; 3],
    ) -> Self {
        OneParticle {
            amp: Arc::new(amp),
            grad: Some(grad),
        }
    }

    /// `exp(-|p⃗ - c⃗|² / (2w²))` with its analytic gradient.
    pub fn gaussian(center: [f64; 3], width: f64) -> Self {
        let base = move |p: [f64; 3]| {
            let d0 = p[0] - center[0];
            let d1 = p[1] - center[1];
            let d2 = p[2] - center[2];
            C64::new(
                (-(d0 * d0 + d1 * d1 + d2 * d2) / (2.0 * width * width)).exp(),
                0.0,
            )
        };
        let mk = |a: usize| -> AmpFn {
            Arc::new(move |p: [f64; 3]| -(p[a] - center[a]) / (width * width) * base(p))
        };
        OneParticle {
            amp: Arc::new(base),
            grad: Some([mk(0), mk(1), mk(2)]),
        }
    }

    pub fn eval(&self, p: [f64; 3]) -> C64 {
        (self.amp)(p)
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Analytic gradient if present, otherwise 4th-order central differences.
    pub fn gradient(&self, p: [f64; 3]) -> [C64; 3] {
        if let Some(g) = &self.grad {
            return [g[0](p), g[1](p), g[2](p)];
        }
        let mut out = [C64::new(0.0, 0.0); 3];
        for a in 0..3 {
            let h = 1e-4 * (1.0 + p[a].abs());
            let at = |s: f64| {
                let mut q = p;
                q[a] += s;
                (self.amp)(q)
            };
            out[a] = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        }
        out
    }

    /// Multiplies by the plane-wave phase `e^{i b⃗·p⃗}` (position shift by
    /// `-b⃗` under the synthesis convention).
    pub fn with_linear_phase(&self, b: [f64; 3]) -> Self {
        let amp = self.amp.clone();
        let ph = move |p: [f64; 3]| {
            C64::new(0.0, b[0] * p[0] + b[1] * p[1] + b[2] * p[2]).exp()
        };
        let new_amp: AmpFn = {
            let amp = amp.clone();
            Arc::new(move |p| amp(p) * ph(p))
        };
        let new_grad = self.grad.as_ref().map(|g| {
            let mk = |a: usize| -> AmpFn {
                let (ga, amp) = (g[a].clone(), amp.clone());
                Arc::new(move |p: [f64; 3]| (ga(p) + C64::new(0.0, b[a]) * amp(p)) * ph(p))
            };
            [mk(0), mk(1), mk(2)]
        });
        OneParticle {
            amp: new_amp,
            grad: new_grad,
        }
    }

    /// Spacetime translation by `x`: multiplies by `e^{-i p·x}` with
    /// `p⁰ = E(p⃗)` on shell (the gradient is dropped).
    pub fn translated(&self, x: &FourVector, mass: f64) -> Self {
        let amp = self.amp.clone();
        let x = *x;
        OneParticle::new(move |p| {
            let e = crate::minkowski::mass_shell_energy(p, mass);
            let pdotx = -e * x.t + p[0] * x.x + p[1] * x.y + p[2] * x.z;
            amp(p) * C64::new(0.0, -pdotx).exp()
        })
    }

    /// The boosted state `ψ∘Λ⁻¹` (momentum measured in the lab after giving
    /// the packet the velocity of `boost`). Gradients chain through the
    /// on-shell Jacobian when present.
    pub fn boosted(&self, boost: &Boost, mass: f64) -> Self {
        let inv = boost.inverse();
        let amp = self.amp.clone();
        let pullback = move |p: [f64; 3]| -> [f64; 3] {
            let q = inv.apply(&crate::minkowski::on_shell(p, mass));
            q.spatial()
        };
        let new_amp: AmpFn = {
            let amp = amp.clone();
            Arc::new(move |p| amp(pullback(p)))
        };
        let new_grad = self.grad.as_ref().map(|g| {
            let g = g.clone();
            let inv_m = *inv.matrix();
            let mk = |a: usize| -> AmpFn {
                let g = g.clone();
                Arc::new(move |p: [f64; 3]| {
                    let e = crate::minkowski::mass_shell_energy(p, mass);
                    let q = {
                        let v = crate::minkowski::on_shell(p, mass);
                        let mut out = [0.0; 4];
                        for (row, o) in inv_m.iter().zip(out.iter_mut()) {
                            *o = row[0] * v.t + row[1] * v.x + row[2] * v.y + row[3] * v.z;
                        }
                        out
                    };
                    // ∂(Λ⁻¹P)^b/∂pᵃ = Λ⁻¹[b][0] pᵃ/E + Λ⁻¹[b][a]
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..3 {
                        let jac = inv_m[b + 1][0] * p[a] / e + inv_m[b + 1][a + 1];
                        acc += g[b]([q[1], q[2], q[3]]) * jac;
                    }
                    acc
                })
            };
            [mk(0), mk(1), mk(2)]
        });
        OneParticle {
            amp: new_amp,
            grad: new_grad,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let amp = self.amp.clone();
        let new_amp: AmpFn = Arc::new(move |p| amp(p) * c);
        let new_grad = self.grad.as_ref().map(|g| {
            let mk = |a: usize| -> AmpFn {
                let ga = g[a].clone();
                Arc::new(move |p: [f64; 3]| ga(p) * c)
            };
            [mk(0), mk(1), mk(2)]
        });
        OneParticle {
            amp: new_amp,
            grad: new_grad,
        }
    }
}

/// The one-particle embedding of a real test function:
/// `(κf)(p⃗) = √(2π) f̂(E(p⃗), p⃗)` restricted to the mass shell.
pub fn kappa_map(f: &SmearingFunction, mass: f64) -> OneParticle {
    let win = f.fourier();
    let root = (2.0 * std::f64::consts::PI).sqrt();
    OneParticle::new(move |p| {
        let q = crate::minkowski::on_shell(p, mass);
        win.eval(&q) * root
    })
}

// ---------------------------------------------------------------------------
// sector states
// ---------------------------------------------------------------------------

/// A state in the truncated Fock space, sectors 0 through 3.
///
/// * sector 1: `ψ₁ = Σ c_i φ_i`;
/// * sector 2: `Ψ₂ = Σ c_i S(a_i, b_i)` with
///   `S(a,b)(p,q) = (a(p)b(q) + b(p)a(q))/2`;
/// * sector 3: `Ψ₃ = Σ c_i S₃(a_i, b_i, c_i)` with
///   `S₃(a,b,c)(p,q,r) = (1/6) Σ_{σ∈S₃} a(p_{σ1}) b(p_{σ2}) c(p_{σ3})`.
///
/// Linear combinations of symmetrized products are dense in each symmetric
/// sector, and all sesquilinear quantities reduce to permanents of pairwise
/// inner products.
#[derive(Debug, Clone)]
pub struct SectorState {
    c0: C64,
    s1: Vec<(C64, OneParticle)>,
    s2: Vec<(C64, OneParticle, OneParticle)>,
    s3: Vec<(C64, OneParticle, OneParticle, OneParticle)>,
}

impl SectorState {
    pub fn new(
        c0: C64,
        s1: Vec<(C64, OneParticle)>,
        s2: Vec<(C64, OneParticle, OneParticle)>,
        s3: Vec<(C64, OneParticle, OneParticle, OneParticle)>,
    ) -> Self {
        SectorState { c0, s1, s2, s3 }
    }

    pub fn vacuum() -> Self {
        SectorState::new(C64::new(1.0, 0.0), vec![], vec![], vec![])
    }

    pub fn one_particle(psi: OneParticle) -> Self {
        SectorState::new(
            C64::new(0.0, 0.0),
            vec![(C64::new(1.0, 0.0), psi)],
            vec![],
            vec![],
        )
    }

    /// The symmetrized two-particle state `S(a, b)`.
    pub fn pair(a: OneParticle, b: OneParticle) -> Self {
        SectorState::new(
            C64::new(0.0, 0.0),
            vec![],
            vec![(C64::new(1.0, 0.0), a, b)],
            vec![],
        )
    }

    /// The symmetrized three-particle state `S₃(a, b, c)`.
    pub fn triple(a: OneParticle, b: OneParticle, c: OneParticle) -> Self {
        SectorState::new(
            C64::new(0.0, 0.0),
            vec![],
            vec![],
            vec![(C64::new(1.0, 0.0), a, b, c)],
        )
    }

    pub fn c0(&self) -> C64 {
        self.c0
    }

    pub fn terms1(&self) -> &[(C64, OneParticle)] {
        &self.s1
    }

    pub fn terms2(&self) -> &[(C64, OneParticle, OneParticle)] {
        &self.s2
    }

    pub fn terms3(&self) -> &[(C64, OneParticle, OneParticle, OneParticle)] {
        &self.s3
    }

    /// Highest sector with any term present.
    pub fn max_sector(&self) -> usize {
        if !self.s3.is_empty() {
            3
        } else if !self.s2.is_empty() {
            2
        } else if !self.s1.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        SectorState {
            c0: self.c0 * c,
            s1: self.s1.iter().map(|(w, a)| (w * c, a.clone())).collect(),
            s2: self
                .s2
                .iter()
                .map(|(w, a, b)| (w * c, a.clone(), b.clone()))
                .collect(),
            s3: self
                .s3
                .iter()
                .map(|(w, a, b, cc)| (w * c, a.clone(), b.clone(), cc.clone()))
                .collect(),
        }
    }

    /// Spacetime translation `e^{-i x·P}` applied to every particle (the
    /// vacuum component is invariant).
    pub fn translated(&self, x: &FourVector, mass: f64) -> Self {
        SectorState {
            c0: self.c0,
            s1: self
                .s1
                .iter()
                .map(|(w, a)| (*w, a.translated(x, mass)))
                .collect(),
            s2: self
                .s2
                .iter()
                .map(|(w, a, b)| (*w, a.translated(x, mass), b.translated(x, mass)))
                .collect(),
            s3: self
                .s3
                .iter()
                .map(|(w, a, b, c)| {
                    (
                        *w,
                        a.translated(x, mass),
                        b.translated(x, mass),
                        c.translated(x, mass),
                    )
                })
                .collect(),
        }
    }

    /// `⟨self|other⟩` — sectors are mutually orthogonal.
    pub fn inner(&self, grid: &MassShellGrid, other: &SectorState) -> C64 {
        let mut acc = self.c0.conj() * other.c0;

        let sl: Vec<Vec<C64>> = self.s1.iter().map(|(_, a)| grid.sample(a)).collect();
        let ol: Vec<Vec<C64>> = other.s1.iter().map(|(_, a)| grid.sample(a)).collect();
        for (i, (ci, _)) in self.s1.iter().enumerate() {
            for (j, (dj, _)) in other.s1.iter().enumerate() {
                acc += ci.conj() * dj * grid.inner(&sl[i], &ol[j]);
            }
        }

        let s2l: Vec<[Vec<C64>; 2]> = self
            .s2
            .iter()
            .map(|(_, a, b)| [grid.sample(a), grid.sample(b)])
            .collect();
        let o2l: Vec<[Vec<C64>; 2]> = other
            .s2
            .iter()
            .map(|(_, a, b)| [grid.sample(a), grid.sample(b)])
            .collect();
        for (i, (ci, _, _)) in self.s2.iter().enumerate() {
            for (j, (dj, _, _)) in other.s2.iter().enumerate() {
                let g = |r: usize, c: usize| grid.inner(&s2l[i][r], &o2l[j][c]);
                acc += ci.conj() * dj * 0.5 * (g(0, 0) * g(1, 1) + g(0, 1) * g(1, 0));
            }
        }

        let s3l: Vec<[Vec<C64>; 3]> = self
            .s3
            .iter()
            .map(|(_, a, b, c)| [grid.sample(a), grid.sample(b), grid.sample(c)])
            .collect();
        let o3l: Vec<[Vec<C64>; 3]> = other
            .s3
            .iter()
            .map(|(_, a, b, c)| [grid.sample(a), grid.sample(b), grid.sample(c)])
            .collect();
        for (i, (ci, ..)) in self.s3.iter().enumerate() {
            for (j, (dj, ..)) in other.s3.iter().enumerate() {
                let mut g = [[C64::new(0.0, 0.0); 3]; 3];
                for (r, row) in g.iter_mut().enumerate() {
                    for (c, el) in row.iter_mut().enumerate() {
                        *el = grid.inner(&s3l[i][r], &o3l[j][c]);
                    }
                }
                acc += ci.conj() * dj * permanent3(&g) / 6.0;
            }
        }
        acc
    }

    pub fn norm_sq(&self, grid: &MassShellGrid) -> f64 {
        self.inner(grid, self).re
    }

    pub fn normalized(&self, grid: &MassShellGrid) -> Result<SectorState, StateError> {
        let n2 = self.norm_sq(grid);
        if !n2.is_finite() || n2 <= 1e-300 {
            return Err(StateError::ZeroNorm);
        }
        Ok(self.scaled(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    /// `⟨Ψ| H_u |Ψ⟩` with `H_u = Σ_particles E_u(p_i)` (not normalized by
    /// `⟨Ψ|Ψ⟩`; the vacuum contributes zero).
    pub fn h_expectation_raw(&self, grid: &MassShellGrid, u: &FourVector) -> f64 {
        let eu = grid.energies_for(u);
        let mut acc = C64::new(0.0, 0.0);

        let sl: Vec<Vec<C64>> = self.s1.iter().map(|(_, a)| grid.sample(a)).collect();
        for (i, (ci, _)) in self.s1.iter().enumerate() {
            for (j, (cj, _)) in self.s1.iter().enumerate() {
                acc += ci.conj() * cj * grid.inner_weighted(&sl[i], &eu, &sl[j]);
            }
        }

        let s2l: Vec<[Vec<C64>; 2]> = self
            .s2
            .iter()
            .map(|(_, a, b)| [grid.sample(a), grid.sample(b)])
            .collect();
        for (i, (ci, _, _)) in self.s2.iter().enumerate() {
            for (j, (cj, _, _)) in self.s2.iter().enumerate() {
                let g = |r: usize, c: usize| grid.inner(&s2l[i][r], &s2l[j][c]);
                let ge = |r: usize, c: usize| grid.inner_weighted(&s2l[i][r], &eu, &s2l[j][c]);
                // ⟨S(ab)| (E(p₁)+E(p₂)) S(cd)⟩, expanded over the four pairings
                let v = 0.5
                    * (ge(0, 0) * g(1, 1)
                        + ge(0, 1) * g(1, 0)
                        + ge(1, 0) * g(0, 1)
                        + ge(1, 1) * g(0, 0));
                acc += ci.conj() * cj * v;
            }
        }

        let s3l: Vec<[Vec<C64>; 3]> = self
            .s3
            .iter()
            .map(|(_, a, b, c)| [grid.sample(a), grid.sample(b), grid.sample(c)])
            .collect();
        for (i, (ci, ..)) in self.s3.iter().enumerate() {
            for (j, (cj, ..)) in self.s3.iter().enumerate() {
                let mut g = [[C64::new(0.0, 0.0); 3]; 3];
                let mut ge = [[C64::new(0.0, 0.0); 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        g[r][c] = grid.inner(&s3l[i][r], &s3l[j][c]);
                        ge[r][c] = grid.inner_weighted(&s3l[i][r], &eu, &s3l[j][c]);
                    }
                }
                // Σ_σ Σ_slot (E on that slot) ∏ others, over 6 permutations
                let mut v = C64::new(0.0, 0.0);
                for perm in PERMS3 {
                    for slot in 0..3 {
                        let mut term = C64::new(1.0, 0.0);
                        for r in 0..3 {
                            let f = if r == slot { ge[r][perm[r]] } else { g[r][perm[r]] };
                            term *= f;
                        }
                        v += term;
                    }
                }
                acc += ci.conj() * cj * v / 6.0;
            }
        }
        acc.re
    }

    /// Normalized Hamiltonian expectation `⟨H_u⟩`.
    pub fn h_expectation(&self, grid: &MassShellGrid, u: &FourVector) -> f64 {
        self.h_expectation_raw(grid, u) / self.norm_sq(grid)
    }
}

const PERMS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn permanent3(g: &[[C64; 3]; 3]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for perm in PERMS3 {
        acc += g[0][perm[0]] * g[1][perm[1]] * g[2][perm[2]];
    }
    acc
}

// ---------------------------------------------------------------------------
// FFT lattice and position synthesis
// ---------------------------------------------------------------------------

/// Uniform momentum lattice `p_j = -P + j·dp` (per axis, `j = 0..n-1`,
/// `dp = 2P/n`) with the dual position lattice `x_k = -X + k·dx`,
/// `dx = π/P`, `X = n·dx/2`. With these choices `dp·dx = 2π/n`, so the
/// discrete transforms below are exact lattice evaluations of each other.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    n: usize,
    pmax: f64,
}

/// A synthesized field and its four derivatives `∂_μ` on the position
/// lattice (index order `[ix][iy][iz]`).
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub value: Array3<C64>,
    pub deriv: [Array3<C64>; 4],
}

impl MomentumGrid {
    pub fn new(n: usize, pmax: f64) -> Result<Self, StateError> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(StateError::BadLatticeSize(n));
        }
        if !pmax.is_finite() || pmax <= 0.0 {
            return Err(StateError::BadCutoff(pmax));
        }
        Ok(MomentumGrid { n, pmax })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pmax(&self) -> f64 {
        self.pmax
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.pmax / self.n as f64
    }

    pub fn dx(&self) -> f64 {
        std::f64::consts::PI / self.pmax
    }

    /// Side length of the periodic position box.
    pub fn box_len(&self) -> f64 {
        self.n as f64 * self.dx()
    }

    /// Per-axis momentum nodes.
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| -self.pmax + j as f64 * self.dp())
            .collect()
    }

    /// Per-axis position nodes.
    pub fn positions(&self) -> Vec<f64> {
        let x0 = -0.5 * self.box_len();
        (0..self.n).map(|k| x0 + k as f64 * self.dx()).collect()
    }

    /// Samples an amplitude on the momentum lattice.
    pub fn sample(&self, s: &OneParticle) -> Array3<C64> {
        let ps = self.momenta();
        let n = self.n;
        let mut out = Array3::zeros((n, n, n));
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    out[[ix, iy, iz]] = s.eval([ps[ix], ps[iy], ps[iz]]);
                }
            }
        }
        out
    }

    /// `F(x⃗_k) = Σ_j c_j e^{+i p⃗_j·x⃗_k}` (bare sum, no measure factors).
    pub fn position_from_momentum(&self, coeffs: &Array3<C64>) -> Array3<C64> {
        let mut data = coeffs.clone();
        self.lattice_fft(&mut data, false);
        data
    }

    /// `G(q⃗_l) = Σ_k v_k e^{-i q⃗_l·x⃗_k}` (bare sum; `q` on the momentum
    /// lattice). Inverse of [`Self::position_from_momentum`] up to `n³`.
    pub fn momentum_from_position(&self, vals: &Array3<C64>) -> Array3<C64> {
        let mut data = vals.clone();
        self.lattice_fft(&mut data, true);
        data
    }

    /// Shared core: FFT with the lattice offset phases. With `P·dx = π` and
    /// `X·dp = π` the offset phases reduce to alternating signs, and the
    /// corner constant is `e^{iPX}` per axis; both are kept in general form.
    fn lattice_fft(&self, data: &mut Array3<C64>, forward: bool) {
        let n = self.n;
        let (dp, dx) = (self.dp(), self.dx());
        let xhalf = 0.5 * self.box_len();
        let sgn = if forward { -1.0 } else { 1.0 };
        // e^{sgn·i p_j x_k} = corner · e^{sgn·(-iX dp j)} · e^{sgn·(-iP dx k)} · e^{sgn·2πi jk/n}
        let pre: Vec<C64> = (0..n)
            .map(|j| C64::new(0.0, -sgn * xhalf * dp * j as f64).exp())
            .collect();
        let post: Vec<C64> = (0..n)
            .map(|k| C64::new(0.0, -sgn * self.pmax * dx * k as f64).exp())
            .collect();
        let corner = C64::new(0.0, sgn * self.pmax * xhalf).exp();

        let mut planner = rustfft::FftPlanner::<f64>::new();
        let fft = if forward {
            planner.plan_fft_forward(n)
        } else {
            planner.plan_fft_inverse(n)
        };
        let mut lane = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

        for axis in 0..3 {
            // iterate over all 1-d lanes along `axis`
            let mut view = data.view_mut();
            for mut l in view.lanes_mut(Axis(axis)) {
                for (j, v) in l.iter().enumerate() {
                    lane[j] = v * pre[j];
                }
                fft.process_with_scratch(&mut lane, &mut scratch);
                for (k, v) in l.iter_mut().enumerate() {
                    *v = lane[k] * post[k] * corner;
                }
            }
        }
    }

    /// Synthesizes the field and its derivatives at time `t`:
    /// `ψ(t, x⃗) = (2π)^{-3/2} Σ_j ψ_j e^{i(p⃗_j·x⃗ - E_j t)} dp³/E_j` with
    /// `∂₀ ↦ -iE`, `∂_a ↦ ip_a` acting as lattice multipliers.
    pub fn synthesize_fields(&self, psi: &Array3<C64>, mass: f64, t: f64) -> FieldSet {
        let n = self.n;
        let ps = self.momenta();
        let scale = self.dp().powi(3) / (2.0 * std::f64::consts::PI).powf(1.5);
        let mut base = Array3::<C64>::zeros((n, n, n));
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let p = [ps[ix], ps[iy], ps[iz]];
                    let e = crate::minkowski::mass_shell_energy(p, mass);
                    base[[ix, iy, iz]] =
                        psi[[ix, iy, iz]] * C64::new(0.0, -e * t).exp() * (scale / e);
                }
            }
        }
        let mult = |f: &dyn Fn([f64; 3], f64) -> C64| -> Array3<C64> {
            let mut out = base.clone();
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let p = [ps[ix], ps[iy], ps[iz]];
                        let e = crate::minkowski::mass_shell_energy(p, mass);
                        out[[ix, iy, iz]] *= f(p, e);
                    }
                }
            }
            self.position_from_momentum(&out)
        };
        let value = self.position_from_momentum(&base);
        let d0 = mult(&|_p, e| C64::new(0.0, -e));
        let d1 = mult(&|p, _e| C64::new(0.0, p[0]));
        let d2 = mult(&|p, _e| C64::new(0.0, p[1]));
        let d3 = mult(&|p, _e| C64::new(0.0, p[2]));
        FieldSet {
            value,
            deriv: [d0, d1, d2, d3],
        }
    }

    /// Direct `O(n³)` evaluation of the synthesis at one point — the slow
    /// reference the FFT route is tested against.
    pub fn synthesize_at(
        &self,
        psi: &Array3<C64>,
        mass: f64,
        t: f64,
        x: [f64; 3],
    ) -> (C64, [C64; 4]) {
        let n = self.n;
        let ps = self.momenta();
        let scale = self.dp().powi(3) / (2.0 * std::f64::consts::PI).powf(1.5);
        let mut v = C64::new(0.0, 0.0);
        let mut d = [C64::new(0.0, 0.0); 4];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let p = [ps[ix], ps[iy], ps[iz]];
                    let e = crate::minkowski::mass_shell_energy(p, mass);
                    let ph = C64::new(0.0, p[0] * x[0] + p[1] * x[1] + p[2] * x[2] - e * t).exp();
                    let term = psi[[ix, iy, iz]] * ph * (scale / e);
                    v += term;
                    d[0] += term * C64::new(0.0, -e);
                    for a in 0..3 {
                        d[a + 1] += term * C64::new(0.0, p[a]);
                    }
                }
            }
        }
        (v, d)
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // pins recorded at oracle precision
mod tests {
    use super::*;
    use crate::minkowski::{boost_to_rest, FourVector};
    use proptest::prelude::*;

    const M: f64 = 1.0;

    fn packet() -> OneParticle {
        OneParticle::gaussian([0.3, 0.0, 0.0], 1.0)
    }

    #[test]
    fn gaussian_measure_norm_matches_pin() {
        let grid = MassShellGrid::uniform(180, 9.5, M).unwrap();
        let v = grid.norm_sq(&grid.sample(&packet()));
        assert!((v - 3.73843709028998106).abs() < 1e-10, "{v}");
    }

    #[test]
    fn boosted_energy_expectation_matches_pin() {
        let grid = MassShellGrid::uniform(180, 9.5, M).unwrap();
        let u = FourVector::rapidity_along(0.3, 0);
        let state = SectorState::one_particle(packet());
        let v = state.h_expectation(&grid, &u);
        assert!((v - 1.47987164980586527).abs() < 1e-10, "{v}");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let s = packet().with_linear_phase([0.4, -0.2, 0.0]);
        let without = OneParticle::new({
            let s = s.clone();
            move |p| s.eval(p)
        });
        for p in [[0.1, -0.7, 0.4], [1.3, 0.2, -0.5]] {
            let ga = s.gradient(p);
            let gn = without.gradient(p);
            for a in 0..3 {
                assert!((ga[a] - gn[a]).norm() < 1e-9, "axis {a}: {:?} {:?}", ga[a], gn[a]);
            }
        }
    }

    #[test]
    fn boosted_amplitude_gradient_chains_correctly() {
        let boost = boost_to_rest(&FourVector::rapidity_along(0.35, 1))
            .unwrap()
            .inverse();
        let s = packet().boosted(&boost, M);
        let numeric = OneParticle::new({
            let s = s.clone();
            move |p| s.eval(p)
        });
        let p = [0.3, 0.5, -0.2];
        let ga = s.gradient(p);
        let gn = numeric.gradient(p);
        for a in 0..3 {
            assert!((ga[a] - gn[a]).norm() < 1e-8, "axis {a}");
        }
    }

    #[test]
    fn pair_norm_formula_matches_direct_double_sum() {
        let grid = MassShellGrid::uniform(10, 6.0, M).unwrap();
        let a = OneParticle::gaussian([0.5, 0.0, 0.0], 1.0);
        let b = OneParticle::gaussian([-0.3, 0.2, 0.0], 0.8);
        let state = SectorState::pair(a.clone(), b.clone());
        let formula = state.norm_sq(&grid);

        let (va, vb) = (grid.sample(&a), grid.sample(&b));
        let mut direct = 0.0;
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let psi2 = 0.5 * (va[i] * vb[j] + vb[i] * va[j]);
                direct += (psi2.conj() * psi2).re * grid.wmu()[i] * grid.wmu()[j];
            }
        }
        assert!(
            (formula - direct).abs() < 1e-11 * direct,
            "{formula} vs {direct}"
        );
    }

    #[test]
    fn triple_norm_formula_matches_direct_triple_sum() {
        let grid = MassShellGrid::uniform(6, 5.0, M).unwrap();
        let a = OneParticle::gaussian([0.4, 0.0, 0.0], 1.0);
        let b = OneParticle::gaussian([0.0, 0.3, 0.0], 0.9);
        let c = OneParticle::gaussian([-0.2, 0.0, 0.1], 1.1);
        let state = SectorState::triple(a.clone(), b.clone(), c.clone());
        let formula = state.norm_sq(&grid);

        let (va, vb, vc) = (grid.sample(&a), grid.sample(&b), grid.sample(&c));
        let n = grid.len();
        let mut direct = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s3 = C64::new(0.0, 0.0);
                    for perm in super::PERMS3 {
                        let idx = [i, j, k];
                        s3 += va[idx[perm[0]]] * vb[idx[perm[1]]] * vc[idx[perm[2]]];
                    }
                    s3 /= 6.0;
                    direct += (s3.conj() * s3).re
                        * grid.wmu()[i]
                        * grid.wmu()[j]
                        * grid.wmu()[k];
                }
            }
        }
        assert!(
            (formula - direct).abs() < 1e-10 * direct,
            "{formula} vs {direct}"
        );
    }

    #[test]
    fn pair_h_expectation_matches_direct_double_sum() {
        let grid = MassShellGrid::uniform(10, 6.0, M).unwrap();
        let u = FourVector::rapidity_along(0.25, 1);
        let a = OneParticle::gaussian([0.5, 0.0, 0.0], 1.0);
        let b = OneParticle::gaussian([-0.3, 0.2, 0.0], 0.8);
        let state = SectorState::pair(a.clone(), b.clone());
        let formula = state.h_expectation_raw(&grid, &u);

        let (va, vb) = (grid.sample(&a), grid.sample(&b));
        let eu = grid.energies_for(&u);
        let mut direct = 0.0;
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let psi2 = 0.5 * (va[i] * vb[j] + vb[i] * va[j]);
                direct += (psi2.conj() * psi2).re
                    * (eu[i] + eu[j])
                    * grid.wmu()[i]
                    * grid.wmu()[j];
            }
        }
        assert!(
            (formula - direct).abs() < 1e-11 * direct.abs(),
            "{formula} vs {direct}"
        );
    }

    #[test]
    fn kappa_embedding_norm_matches_pin() {
        let f = SmearingFunction::gaussian(0.4, 0.7)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let grid = MassShellGrid::uniform(180, 10.5, M).unwrap();
        let v = grid.norm_sq(&grid.sample(&kappa_map(&f, M))).sqrt();
        assert!((v - 0.694253555200307515).abs() < 1e-9, "{v}");
    }

    #[test]
    fn mixed_sector_norms_add() {
        let grid = MassShellGrid::sinh(14, 8.0, M).unwrap();
        let a = OneParticle::gaussian([0.5, 0.0, 0.0], 1.0);
        let b = OneParticle::gaussian([-0.3, 0.2, 0.0], 0.8);
        let phi2 = SectorState::pair(a, b).normalized(&grid).unwrap();
        let eps: f64 = 0.15;
        let mixed = SectorState::new(
            C64::new((1.0 - eps * eps).sqrt(), 0.0),
            vec![],
            phi2.scaled(C64::new(0.0, eps)).terms2().to_vec(),
            vec![],
        );
        assert!((mixed.norm_sq(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_is_unitary_phase() {
        let grid = MassShellGrid::sinh(12, 8.0, M).unwrap();
        let x = FourVector::new(0.4, -0.3, 0.2, 0.1);
        let s = SectorState::one_particle(packet());
        let t = s.translated(&x, M);
        assert!((s.norm_sq(&grid) - t.norm_sq(&grid)).abs() < 1e-12);
        // pointwise: e^{-ip·x}
        let p = [0.3, -0.1, 0.6];
        let e = crate::minkowski::mass_shell_energy(p, M);
        let pdx = -e * x.t + p[0] * x.x + p[1] * x.y + p[2] * x.z;
        let got = t.terms1()[0].1.eval(p);
        let expect = packet().eval(p) * C64::new(0.0, -pdx).exp();
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn lattice_transforms_invert_each_other() {
        let g = MomentumGrid::new(8, 4.0).unwrap();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut rnd = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut arr = Array3::<C64>::zeros((8, 8, 8));
        for v in arr.iter_mut() {
            *v = C64::new(rnd(), rnd());
        }
        let round = g.momentum_from_position(&g.position_from_momentum(&arr));
        let n3 = 8.0f64.powi(3);
        for (a, b) in arr.iter().zip(round.iter()) {
            assert!((a * n3 - b).norm() < 1e-10);
        }
    }

    #[test]
    fn fft_synthesis_matches_direct_sum() {
        let g = MomentumGrid::new(8, 3.0).unwrap();
        let psi = g.sample(&packet().with_linear_phase([0.5, 0.0, -0.3]));
        let t = 0.37;
        let fields = g.synthesize_fields(&psi, M, t);
        let xs = g.positions();
        for &(ix, iy, iz) in &[(0usize, 0usize, 0usize), (3, 5, 1), (7, 2, 6)] {
            let x = [xs[ix], xs[iy], xs[iz]];
            let (v, d) = g.synthesize_at(&psi, M, t, x);
            assert!(
                (fields.value[[ix, iy, iz]] - v).norm() < 1e-11 * (1.0 + v.norm()),
                "value at {x:?}"
            );
            #[allow(clippy::needless_range_loop)] // index feeds both tables
            for mu in 0..4 {
                assert!(
                    (fields.deriv[mu][[ix, iy, iz]] - d[mu]).norm() < 1e-11 * (1.0 + d[mu].norm()),
                    "deriv {mu} at {x:?}"
                );
            }
        }
    }

    #[test]
    fn lattice_plancherel() {
        // Σ|v|² dx³ = (2π)⁻³ Σ|v̂|² dp³ for the bare lattice pair
        let g = MomentumGrid::new(16, 5.0).unwrap();
        let psi = g.sample(&packet());
        let pos = g.position_from_momentum(&psi);
        let lhs: f64 = pos.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dx().powi(3);
        // continuum transform ≈ lattice sum × dx³, then ∫|v̂|² dq/(2π)³
        let back = g.momentum_from_position(&pos);
        let rhs: f64 = back.iter().map(|v| v.norm_sqr()).sum::<f64>()
            * g.dx().powi(6)
            * g.dp().powi(3)
            / (2.0 * std::f64::consts::PI).powi(3);
        assert!((lhs - rhs).abs() < 1e-9 * lhs, "{lhs} vs {rhs}");
    }

    proptest! {
        /// S(a,b) = S(b,a): the pair norm must not depend on argument order.
        #[test]
        fn pair_is_symmetric(cx in -0.6f64..0.6, cy in -0.6f64..0.6, w in 0.5f64..1.5) {
            let grid = MassShellGrid::sinh(8, 6.0, M).unwrap();
            let a = OneParticle::gaussian([cx, cy, 0.0], w);
            let b = OneParticle::gaussian([-cy, 0.1, cx], 1.0);
            let n_ab = SectorState::pair(a.clone(), b.clone()).norm_sq(&grid);
            let n_ba = SectorState::pair(b, a).norm_sq(&grid);
            prop_assert!((n_ab - n_ba).abs() < 1e-12 * n_ab.max(1e-12));
        }

        /// Scaling a state scales its norm² by |c|².
        #[test]
        fn norm_scales_quadratically(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            prop_assume!(re * re + im * im > 1e-3);
            let grid = MassShellGrid::sinh(8, 6.0, M).unwrap();
            let s = SectorState::one_particle(packet());
            let c = C64::new(re, im);
            let n1 = s.scaled(c).norm_sq(&grid);
            let n0 = s.norm_sq(&grid);
            prop_assert!((n1 - c.norm_sqr() * n0).abs() < 1e-12 * n1.max(1e-12));
        }
    }
}
