//! Localization observables for a free massive real scalar quantum field.
//!
//! This crate implements, at desk scale on truncated momentum grids, the
//! operator tool-chain needed to study *where* the energy of a relativistic
//! quantum field is found:
//!
//! * [`minkowski`] — flat spacetime geometry: four-vectors with signature
//!   `(-,+,+,+)`, mass shells, pure boosts, rest spaces, axis-aligned spatial
//!   boxes and their causal shadows;
//! * [`smearing`] — separable smooth test functions (Gaussian and compactly
//!   supported bump profiles), their four-dimensional Fourier data, squares,
//!   translates and region windows;
//! * [`states`] — truncated Fock states (sectors 0..=3) over the invariant
//!   measure `d³p/E(p)`, momentum grids, Hamiltonian multipliers and fractional
//!   powers, the one-particle embedding of test functions, and mixed-sector
//!   witness states;
//! * [`stress_energy`] — matrix elements of the normal-ordered stress-energy
//!   tensor smeared with a test function, evaluated along two independent
//!   routes (momentum-space double quadrature and position-space FFT
//!   synthesis), local Hamiltonian matrices, the Pauli–Jordan commutator
//!   function and a microcausality diagnostic;
//! * [`localization`] — the energy-normalized localization POVM: box
//!   probabilities, densities, first moments, Newton–Wigner and
//!   center-of-energy comparisons, causal-shadow consistency checks and the
//!   non-relativistic comparator;
//! * [`qei`] — the quantum energy inequality: the closed-form spectral weight
//!   `Q₃`, temporal-profile bounds, profile tuning and bound verification
//!   against explicit negative-energy witness states;
//! * [`conditional`] — finite lab models: orthonormal mode bases in a box,
//!   positive-semidefinite inverse square roots, conditional effects,
//!   regularized effects and the polar-decomposition consistency check.
//!
//! The numerical conventions are fixed once, here, and used everywhere:
//!
//! * metric signature `(-,+,+,+)`, so `u·v = -u⁰v⁰ + u⃗·v⃗`;
//! * mass shell `E(p) = √(m² + |p⃗|²)` with invariant measure
//!   `dμ_m = d³p / E(p)`;
//! * Fourier transform `f̂(q) = (2π)^{-2} ∫ e^{-iq·x} f(x) d⁴x` with the
//!   Minkowski phase `q·x = -q⁰x⁰ + q⃗·x⃗`;
//! * one-particle position synthesis
//!   `ψ(x) = (2π)^{-3/2} ∫ ψ(p) e^{ip·x} dμ_m(p)`.
//!
//! A guided tour with runnable examples lives in the `book/` directory of the
//! repository and is compiled as doc-tests through the [`guide`] module.

pub mod conditional;
pub mod localization;
pub mod minkowski;
pub mod qei;
pub mod quadrature;
pub mod smearing;
pub mod states;
pub mod stress_energy;
// TEMP-GATE: modules below are being brought up in dependency order.
// pub mod guide;

pub use conditional::{EffectMatrix, LabBasis, LabConfig};
pub use localization::{DressedState, LocalizationResult, Povm, U_SIGMA};
pub use minkowski::{CausalShadow, FourVector, RegionBox, RestSpace};
pub use qei::{QeiBound, TemporalProfile, TunedProfile};
pub use smearing::{Profile, SmearingFunction};
pub use states::{MassShellGrid, MomentumGrid, OneParticle, SectorState};
pub use stress_energy::{Channel, PositionPipeline, SmearedOperator, SymTensor};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
