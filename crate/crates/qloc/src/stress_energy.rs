//! Smeared normally-ordered stress-energy elements between truncated Fock
//! states, evaluated along two independent routes.
//!
//! **Momentum route.** Every matrix element of the smeared tensor reduces to
//! double mass-shell integrals
//!
//! ```text
//! (1/4π) ∬ dμ(p) dμ(k) · W(q(p,k)) · t_{μν}(P, ±K) · F(p,k)
//! ```
//!
//! over one of three channels distinguished by the momentum transfer fed to
//! the window `W` (the spacetime Fourier transform of the smearing density):
//! particle-conserving (`q = P−K`, kernel `t(P,K)`), pair annihilation
//! (`q = −P−K`, kernel `t(P,−K)`) and pair creation (`q = P+K`, kernel
//! `t(P,−K)`). The kernel is the symmetric bilinear
//! `t_{μν}(A,B) = ½(A_μB_ν + B_μA_ν) − ½ g_{μν}(A·B + m²)`. Because the
//! windows are separable per axis, each channel precomputes three `n×n`
//! spatial factor tables and streams the `N⁶` pair loop through them.
//!
//! **Position route.** [`PositionPipeline`] synthesizes the fields on the
//! dual FFT lattice, forms the bilinear densities `D_{μν}(y)` pointwise,
//! and applies the smearing by spectral multiplication. The two routes share
//! no code past the amplitude samples, which is what makes their agreement a
//! meaningful check.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::minkowski::{FourVector, RegionBox};
use crate::quadrature::gauss_legendre_on;
use crate::smearing::{box_window, SeparableWindow, SmearingFunction};
use crate::states::{FieldSet, MassShellGrid, MomentumGrid, SectorState};
use crate::C64;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

// ---------------------------------------------------------------------------
// symmetric tensor values
// ---------------------------------------------------------------------------

/// A complex symmetric 4×4 tensor with lower indices, packed as
/// `(00, 01, 02, 03, 11, 12, 13, 22, 23, 33)`.
#[derive(Debug, Clone, Copy)]
pub struct SymTensor {
    c: [C64; 10],
}

const PACK: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

impl SymTensor {
    pub fn zero() -> Self {
        SymTensor {
            c: [C64::new(0.0, 0.0); 10],
        }
    }

    pub fn from_components(c: [C64; 10]) -> Self {
        SymTensor { c }
    }

    pub fn get(&self, mu: usize, nu: usize) -> C64 {
        self.c[PACK[mu][nu]]
    }

    pub fn components(&self) -> &[C64; 10] {
        &self.c
    }

    /// `u^μ u₂^ν T_{μν}`.
    pub fn contract(&self, u: &FourVector, u2: &FourVector) -> C64 {
        let a = [u.t, u.x, u.y, u.z];
        let b = [u2.t, u2.x, u2.y, u2.z];
        let mut acc = C64::new(0.0, 0.0);
        for (mu, &am) in a.iter().enumerate() {
            for (nu, &bn) in b.iter().enumerate() {
                acc += self.get(mu, nu) * (am * bn);
            }
        }
        acc
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(&other.c) {
            *x += y;
        }
        SymTensor { c }
    }

    pub fn scaled(&self, s: C64) -> SymTensor {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x *= s;
        }
        SymTensor { c }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest component of `self − other`.
    pub fn max_diff(&self, other: &SymTensor) -> f64 {
        self.c
            .iter()
            .zip(&other.c)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `t_{μν}(A, B)` for lowered real four-vectors, written into `out`.
#[inline]
fn kernel10(a: &[f64; 4], b: &[f64; 4], m2: f64, out: &mut [f64; 10]) {
    // A·B = η^{μν} A_μ B_ν with η = diag(−1,1,1,1)
    let s = -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + m2;
    out[0] = a[0] * b[0] + 0.5 * s; // g_{00} = −1
    out[1] = 0.5 * (a[0] * b[1] + b[0] * a[1]);
    out[2] = 0.5 * (a[0] * b[2] + b[0] * a[2]);
    out[3] = 0.5 * (a[0] * b[3] + b[0] * a[3]);
    out[4] = a[1] * b[1] - 0.5 * s;
    out[5] = 0.5 * (a[1] * b[2] + b[1] * a[2]);
    out[6] = 0.5 * (a[1] * b[3] + b[1] * a[3]);
    out[7] = a[2] * b[2] - 0.5 * s;
    out[8] = 0.5 * (a[2] * b[3] + b[2] * a[3]);
    out[9] = a[3] * b[3] - 0.5 * s;
}

// ---------------------------------------------------------------------------
// channels and pass tables
// ---------------------------------------------------------------------------

/// Which block of the quadratic field expansion an integral belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Particle-conserving block: window at `P−K`, kernel `t(P,K)`.
    /// Integrals are *not* doubled here; assemblers fold in the ordering
    /// factor 2 where it belongs.
    Retain,
    /// Pair-annihilation block: window at `−P−K`, kernel `t(P,−K)`.
    Annihilate,
    /// Pair-creation block: window at `P+K`, kernel `t(P,−K)`.
    Create,
}

impl Channel {
    #[inline]
    fn ket_sign(self) -> f64 {
        match self {
            Channel::Retain => 1.0,
            _ => -1.0,
        }
    }

    #[inline]
    fn q0(self, ei: f64, ej: f64) -> f64 {
        match self {
            Channel::Retain => ei - ej,
            Channel::Annihilate => -(ei + ej),
            Channel::Create => ei + ej,
        }
    }
}

/// Per-axis spatial window factor tables plus the flat→axis index map.
struct Pass {
    tab: [Vec<C64>; 3],
    idx: Vec<[u32; 3]>,
    n: [usize; 3],
}

impl Pass {
    fn new(grid: &MassShellGrid, window: &SeparableWindow, channel: Channel) -> Pass {
        let n = grid.grid().shape();
        let mut tab: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        #[allow(clippy::needless_range_loop)] // axis index feeds both the table and the rule
        for a in 0..3 {
            let nodes = grid.grid().axis(a).nodes();
            let na = nodes.len();
            let mut t = vec![C64::new(0.0, 0.0); na * na];
            for ii in 0..na {
                for jj in 0..na {
                    let arg = match channel {
                        Channel::Retain => nodes[ii] - nodes[jj],
                        Channel::Annihilate => -(nodes[ii] + nodes[jj]),
                        Channel::Create => nodes[ii] + nodes[jj],
                    };
                    t[ii * na + jj] = window.space_factor(a, arg);
                }
            }
            tab[a] = t;
        }
        let idx = (0..grid.len())
            .map(|i| {
                let iz = i % n[2];
                let iy = (i / n[2]) % n[1];
                let ix = i / (n[1] * n[2]);
                [ix as u32, iy as u32, iz as u32]
            })
            .collect();
        Pass { tab, idx, n }
    }

    #[inline]
    fn space(&self, i: usize, j: usize) -> C64 {
        let a = self.idx[i];
        let b = self.idx[j];
        self.tab[0][a[0] as usize * self.n[0] + b[0] as usize]
            * self.tab[1][a[1] as usize * self.n[1] + b[1] as usize]
            * self.tab[2][a[2] as usize * self.n[2] + b[2] as usize]
    }
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

// ---------------------------------------------------------------------------
// scalar-contracted passes
// ---------------------------------------------------------------------------

/// Cross matrix of scalar-contracted channel integrals:
///
/// `out[b][k] = (1/4π) ∬ W · (u^μ u₂^ν t_{μν}) · conj(bra_b(p)) ket_k(k)`.
pub fn channel_matrix(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    channel: Channel,
    u: &FourVector,
    u2: &FourVector,
    bras: &[Vec<C64>],
    kets: &[Vec<C64>],
) -> Array2<C64> {
    let pass = Pass::new(grid, window, channel);
    let e = grid.energies();
    let wmu = grid.wmu();
    let pts = grid.points();
    let eu = grid.energies_for(u);
    let eu2 = grid.energies_for(u2);
    let uu2 = u.dot(u2);
    let m2 = grid.mass() * grid.mass();
    let s = channel.ket_sign();
    let n3 = grid.len();
    let (nb, nk) = (bras.len(), kets.len());

    let acc = (0..n3)
        .into_par_iter()
        .fold(
            || (Array2::<C64>::zeros((nb, nk)), vec![C64::new(0.0, 0.0); n3]),
            |(mut acc, mut row), i| {
                for j in 0..n3 {
                    let w = pass.space(i, j) * window.time_factor(channel.q0(e[i], e[j]));
                    let pk = -e[i] * e[j] + dot3(&pts[i], &pts[j]);
                    let tc = 0.5 * (s * (eu[i] * eu2[j] + eu[j] * eu2[i]) - uu2 * (s * pk + m2));
                    row[j] = w * (tc * wmu[j]);
                }
                for (kk, ket) in kets.iter().enumerate() {
                    let mut dot = C64::new(0.0, 0.0);
                    for j in 0..n3 {
                        dot += row[j] * ket[j];
                    }
                    for (bb, bra) in bras.iter().enumerate() {
                        acc[[bb, kk]] += bra[i].conj() * (dot * wmu[i]);
                    }
                }
                (acc, row)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || Array2::<C64>::zeros((nb, nk)),
            |mut a, b| {
                a += &b;
                a
            },
        );
    acc * (window.scale() / FOUR_PI)
}

/// Applies a scalar-contracted channel kernel to an amplitude vector:
///
/// `out[i] = (1/4π) Σ_j wmu_j W(q(p_i,k_j)) t_c(P_i, ±K_j) v[j]`.
pub fn channel_apply(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    channel: Channel,
    u: &FourVector,
    u2: &FourVector,
    v: &[C64],
) -> Vec<C64> {
    let pass = Pass::new(grid, window, channel);
    let e = grid.energies();
    let wmu = grid.wmu();
    let pts = grid.points();
    let eu = grid.energies_for(u);
    let eu2 = grid.energies_for(u2);
    let uu2 = u.dot(u2);
    let m2 = grid.mass() * grid.mass();
    let s = channel.ket_sign();
    let n3 = grid.len();
    let scale = window.scale() / FOUR_PI;

    (0..n3)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n3 {
                let w = pass.space(i, j) * window.time_factor(channel.q0(e[i], e[j]));
                let pk = -e[i] * e[j] + dot3(&pts[i], &pts[j]);
                let tc = 0.5 * (s * (eu[i] * eu2[j] + eu[j] * eu2[i]) - uu2 * (s * pk + m2));
                acc += w * (tc * wmu[j]) * v[j];
            }
            acc * scale
        })
        .collect()
}

/// Contracted channel integral against a rank-`R` diagonal dressing kernel
/// `K(p,k) = Σ_r coeffs[r] · conj(modes[r](p)) · modes[r](k)` in a single
/// pair pass (one window/kernel evaluation shared by all modes).
pub fn channel_diag_quadratic(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    channel: Channel,
    u: &FourVector,
    u2: &FourVector,
    coeffs: &[f64],
    modes: &[Vec<C64>],
) -> C64 {
    assert_eq!(coeffs.len(), modes.len());
    let pass = Pass::new(grid, window, channel);
    let e = grid.energies();
    let wmu = grid.wmu();
    let pts = grid.points();
    let eu = grid.energies_for(u);
    let eu2 = grid.energies_for(u2);
    let uu2 = u.dot(u2);
    let m2 = grid.mass() * grid.mass();
    let s = channel.ket_sign();
    let n3 = grid.len();

    let total: C64 = (0..n3)
        .into_par_iter()
        .fold(
            || (C64::new(0.0, 0.0), vec![C64::new(0.0, 0.0); n3]),
            |(mut acc, mut row), i| {
                for j in 0..n3 {
                    let w = pass.space(i, j) * window.time_factor(channel.q0(e[i], e[j]));
                    let pk = -e[i] * e[j] + dot3(&pts[i], &pts[j]);
                    let tc =
                        0.5 * (s * (eu[i] * eu2[j] + eu[j] * eu2[i]) - uu2 * (s * pk + m2));
                    row[j] = w * (tc * wmu[j]);
                }
                for (c, m) in coeffs.iter().zip(modes) {
                    let mut dot = C64::new(0.0, 0.0);
                    for j in 0..n3 {
                        dot += row[j] * m[j];
                    }
                    acc += c * m[i].conj() * wmu[i] * dot;
                }
                (acc, row)
            },
        )
        .map(|(acc, _)| acc)
        .sum();
    total * (window.scale() / FOUR_PI)
}

// ---------------------------------------------------------------------------
// full-tensor passes
// ---------------------------------------------------------------------------

fn lowered(grid: &MassShellGrid) -> Vec<[f64; 4]> {
    grid.points()
        .iter()
        .zip(grid.energies())
        .map(|(&p, &e)| [-e, p[0], p[1], p[2]])
        .collect()
}

/// Full-tensor channel integral for a sum of product dressings
/// `F(p,k) = Σ_t coeff_t · conj(bra_t(p)) · ket_t(k)`.
pub fn channel_tensor(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    channel: Channel,
    terms: &[(C64, &[C64], &[C64])],
) -> SymTensor {
    if terms.is_empty() {
        return SymTensor::zero();
    }
    let pass = Pass::new(grid, window, channel);
    let e = grid.energies();
    let wmu = grid.wmu();
    let plow = lowered(grid);
    let m2 = grid.mass() * grid.mass();
    let s = channel.ket_sign();
    let n3 = grid.len();

    let acc = (0..n3)
        .into_par_iter()
        .fold(
            || [C64::new(0.0, 0.0); 10],
            |mut acc, i| {
                let mut t10 = [0.0f64; 10];
                for j in 0..n3 {
                    let w = pass.space(i, j)
                        * window.time_factor(channel.q0(e[i], e[j]))
                        * (wmu[i] * wmu[j]);
                    let b = [
                        s * plow[j][0],
                        s * plow[j][1],
                        s * plow[j][2],
                        s * plow[j][3],
                    ];
                    kernel10(&plow[i], &b, m2, &mut t10);
                    let mut f = C64::new(0.0, 0.0);
                    for (coeff, bra, ket) in terms {
                        f += coeff * bra[i].conj() * ket[j];
                    }
                    let fw = f * w;
                    for c in 0..10 {
                        acc[c] += fw * t10[c];
                    }
                }
                acc
            },
        )
        .reduce(
            || [C64::new(0.0, 0.0); 10],
            |mut a, b| {
                for c in 0..10 {
                    a[c] += b[c];
                }
                a
            },
        );
    SymTensor::from_components(acc).scaled(window.scale() / FOUR_PI)
}

/// Full-tensor channel integral for a dense dressing `F(p_i, k_j) = f[[i,j]]`
/// (used when a two-particle amplitude is wrapped by a non-separable
/// multiplier).
pub fn channel_tensor_dense(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    channel: Channel,
    f: &Array2<C64>,
) -> SymTensor {
    let pass = Pass::new(grid, window, channel);
    let e = grid.energies();
    let wmu = grid.wmu();
    let plow = lowered(grid);
    let m2 = grid.mass() * grid.mass();
    let s = channel.ket_sign();
    let n3 = grid.len();
    assert_eq!(f.dim(), (n3, n3), "dense dressing must be N³×N³");

    let acc = (0..n3)
        .into_par_iter()
        .fold(
            || [C64::new(0.0, 0.0); 10],
            |mut acc, i| {
                let mut t10 = [0.0f64; 10];
                for j in 0..n3 {
                    let w = pass.space(i, j)
                        * window.time_factor(channel.q0(e[i], e[j]))
                        * (wmu[i] * wmu[j]);
                    let b = [
                        s * plow[j][0],
                        s * plow[j][1],
                        s * plow[j][2],
                        s * plow[j][3],
                    ];
                    kernel10(&plow[i], &b, m2, &mut t10);
                    let fw = f[[i, j]] * w;
                    for c in 0..10 {
                        acc[c] += fw * t10[c];
                    }
                }
                acc
            },
        )
        .reduce(
            || [C64::new(0.0, 0.0); 10],
            |mut a, b| {
                for c in 0..10 {
                    a[c] += b[c];
                }
                a
            },
        );
    SymTensor::from_components(acc).scaled(window.scale() / FOUR_PI)
}

// ---------------------------------------------------------------------------
// sector assembly
// ---------------------------------------------------------------------------

fn conj_vec(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// `⟨bra| :T_{μν}:[w] |ket⟩` as a full symmetric tensor, assembled over all
/// sector pairs the truncated space admits. `window` is the spacetime
/// transform of the (real) smearing density `w`.
pub fn tensor_element(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    bra: &SectorState,
    ket: &SectorState,
) -> SymTensor {
    let b1: Vec<(C64, Vec<C64>)> = bra
        .terms1()
        .iter()
        .map(|(c, s)| (*c, grid.sample(s)))
        .collect();
    let k1: Vec<(C64, Vec<C64>)> = ket
        .terms1()
        .iter()
        .map(|(c, s)| (*c, grid.sample(s)))
        .collect();
    let b2: Vec<(C64, Vec<C64>, Vec<C64>)> = bra
        .terms2()
        .iter()
        .map(|(c, a, b)| (*c, grid.sample(a), grid.sample(b)))
        .collect();
    let k2: Vec<(C64, Vec<C64>, Vec<C64>)> = ket
        .terms2()
        .iter()
        .map(|(c, a, b)| (*c, grid.sample(a), grid.sample(b)))
        .collect();
    let b3: Vec<(C64, [Vec<C64>; 3])> = bra
        .terms3()
        .iter()
        .map(|(c, a, b, cc)| (*c, [grid.sample(a), grid.sample(b), grid.sample(cc)]))
        .collect();
    let k3: Vec<(C64, [Vec<C64>; 3])> = ket
        .terms3()
        .iter()
        .map(|(c, a, b, cc)| (*c, [grid.sample(a), grid.sample(b), grid.sample(cc)]))
        .collect();

    let mut out = SymTensor::zero();
    let rt2 = std::f64::consts::SQRT_2;
    let rt6_3 = 6.0f64.sqrt() / 3.0;

    // Particle-conserving block. The ordering factor 2 is folded into the
    // coefficients; the per-pair dressings come from tracing out spectators.
    {
        let mut terms: Vec<(C64, &[C64], &[C64])> = Vec::new();
        for (ci, vi) in &b1 {
            for (dj, wj) in &k1 {
                terms.push((ci.conj() * dj * 2.0, vi, wj));
            }
        }
        for (ci, ai, bi) in &b2 {
            for (dj, xj, yj) in &k2 {
                let cd = ci.conj() * dj;
                terms.push((cd * grid.inner(bi, yj), ai, xj));
                terms.push((cd * grid.inner(bi, xj), ai, yj));
                terms.push((cd * grid.inner(ai, yj), bi, xj));
                terms.push((cd * grid.inner(ai, xj), bi, yj));
            }
        }
        for (ci, ta) in &b3 {
            for (dj, tb) in &k3 {
                let cd = ci.conj() * dj * (2.0 / 3.0);
                for ia in 0..3 {
                    let ra: [usize; 2] = match ia {
                        0 => [1, 2],
                        1 => [0, 2],
                        _ => [0, 1],
                    };
                    for ib in 0..3 {
                        let rb: [usize; 2] = match ib {
                            0 => [1, 2],
                            1 => [0, 2],
                            _ => [0, 1],
                        };
                        let kappa = 0.5
                            * (grid.inner(&ta[ra[0]], &tb[rb[0]])
                                * grid.inner(&ta[ra[1]], &tb[rb[1]])
                                + grid.inner(&ta[ra[0]], &tb[rb[1]])
                                    * grid.inner(&ta[ra[1]], &tb[rb[0]]));
                        terms.push((cd * kappa, &ta[ia], &tb[ib]));
                    }
                }
            }
        }
        if !terms.is_empty() {
            out = out.add(&channel_tensor(grid, window, Channel::Retain, &terms));
        }
    }

    // Pair-annihilation block: bra two particles below ket.
    {
        let mut own: Vec<(C64, Vec<C64>, Vec<C64>)> = Vec::new();
        if bra.c0().norm() > 0.0 {
            for (dj, xj, yj) in &k2 {
                let c = bra.c0().conj() * dj * (rt2 / 2.0);
                own.push((c, conj_vec(xj), yj.clone()));
                own.push((c, conj_vec(yj), xj.clone()));
            }
        }
        for (ci, vi) in &b1 {
            for (dj, tb) in &k3 {
                for slot in 0..3 {
                    let rest: [usize; 2] = match slot {
                        0 => [1, 2],
                        1 => [0, 2],
                        _ => [0, 1],
                    };
                    let c = ci.conj() * dj * rt6_3 * grid.inner(vi, &tb[slot]) * 0.5;
                    own.push((c, conj_vec(&tb[rest[0]]), tb[rest[1]].clone()));
                    own.push((c, conj_vec(&tb[rest[1]]), tb[rest[0]].clone()));
                }
            }
        }
        if !own.is_empty() {
            let terms: Vec<(C64, &[C64], &[C64])> = own
                .iter()
                .map(|(c, a, b)| (*c, a.as_slice(), b.as_slice()))
                .collect();
            out = out.add(&channel_tensor(grid, window, Channel::Annihilate, &terms));
        }
    }

    // Pair-creation block: conjugate mirror of annihilation.
    {
        let mut own: Vec<(C64, Vec<C64>, Vec<C64>)> = Vec::new();
        if ket.c0().norm() > 0.0 {
            for (ci, ai, bi) in &b2 {
                let c = ci.conj() * ket.c0() * (rt2 / 2.0);
                own.push((c, ai.clone(), conj_vec(bi)));
                own.push((c, bi.clone(), conj_vec(ai)));
            }
        }
        for (ci, ta) in &b3 {
            for (dj, wj) in &k1 {
                for slot in 0..3 {
                    let rest: [usize; 2] = match slot {
                        0 => [1, 2],
                        1 => [0, 2],
                        _ => [0, 1],
                    };
                    let c = ci.conj() * dj * rt6_3 * grid.inner(&ta[slot], wj) * 0.5;
                    own.push((c, ta[rest[0]].clone(), conj_vec(&ta[rest[1]])));
                    own.push((c, ta[rest[1]].clone(), conj_vec(&ta[rest[0]])));
                }
            }
        }
        if !own.is_empty() {
            let terms: Vec<(C64, &[C64], &[C64])> = own
                .iter()
                .map(|(c, a, b)| (*c, a.as_slice(), b.as_slice()))
                .collect();
            out = out.add(&channel_tensor(grid, window, Channel::Create, &terms));
        }
    }

    out
}

/// Scalar element `u^μ u₂^ν ⟨bra| :T_{μν}:[w] |ket⟩`.
pub fn element(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    u: &FourVector,
    u2: &FourVector,
    bra: &SectorState,
    ket: &SectorState,
) -> C64 {
    tensor_element(grid, window, bra, ket).contract(u, u2)
}

/// Compression of the smeared contracted tensor onto a family of
/// one-particle modes: `M[i][j] = ⟨mode_i| T_c[w] |mode_j⟩` (only the
/// particle-conserving block contributes between one-particle states).
pub fn mode_matrix(
    grid: &MassShellGrid,
    window: &SeparableWindow,
    u: &FourVector,
    u2: &FourVector,
    modes: &[Vec<C64>],
) -> Array2<C64> {
    channel_matrix(grid, window, Channel::Retain, u, u2, modes, modes) * C64::new(2.0, 0.0)
}

// ---------------------------------------------------------------------------
// hyperplane total
// ---------------------------------------------------------------------------

/// Integral of the translated-window element over an entire constant-time
/// hyperplane. The spatial translation integral collapses the momentum
/// transfer, the pair blocks drop out on the collapsed support (standard
/// frame `u₂ = e₀`), and what survives is
///
/// `(2π)² W_{f²}(0) · Σ_i wmu_i E_u(p_i) diag[i]`,
///
/// with `diag` the particle-conserving dressing evaluated on the diagonal.
/// The window prefactor is evaluated through the transform chain, so this
/// checks the normalization conventions end to end.
pub fn sigma_plane_total(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    u: &FourVector,
    diag: &[C64],
) -> C64 {
    assert_eq!(diag.len(), grid.len());
    let w0 = f.fourier_sq().eval(&FourVector::new(0.0, 0.0, 0.0, 0.0));
    let pref = w0 * (2.0 * std::f64::consts::PI).powi(2);
    let eu = grid.energies_for(u);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..grid.len() {
        acc += diag[i] * (grid.wmu()[i] * eu[i]);
    }
    acc * pref
}

// ---------------------------------------------------------------------------
// field commutator through the one-particle embedding
// ---------------------------------------------------------------------------

/// `⟨κf|κg⟩ = 2π ∫ conj(f̂) ĝ dμ_m` for real test functions translated to
/// `xf`, `xg`. The imaginary part carries the field commutator:
/// `E(f,g) = −2 Im ⟨κf|κg⟩`.
pub fn kappa_inner(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    xf: &FourVector,
    g: &SmearingFunction,
    xg: &FourVector,
) -> C64 {
    let m = grid.mass();
    let kf = crate::states::kappa_map(f, m).translated(xf, m);
    let kg = crate::states::kappa_map(g, m).translated(xg, m);
    grid.inner(&grid.sample(&kf), &grid.sample(&kg))
}

/// Smeared field commutator `E(f,g) = −2 Im ⟨κf|κg⟩`.
pub fn pauli_jordan(
    grid: &MassShellGrid,
    f: &SmearingFunction,
    xf: &FourVector,
    g: &SmearingFunction,
    xg: &FourVector,
) -> f64 {
    -2.0 * kappa_inner(grid, f, xf, g, xg).im
}

// ---------------------------------------------------------------------------
// one-particle commutator of two smeared tensors
// ---------------------------------------------------------------------------

/// A contracted smeared tensor `T_c[w] = u^μ u₂^ν :T_{μν}:[w]`, specified by
/// its window and contraction directions.
#[derive(Clone)]
pub struct SmearedOperator {
    pub window: SeparableWindow,
    pub u: FourVector,
    pub u2: FourVector,
}

/// `⟨φ| [A, B] |ψ⟩` between one-particle states, including the two-particle
/// exchange through the pair blocks. Both the particle-conserving
/// composition and the creation/annihilation contraction are evaluated by
/// direct quadrature; nothing is assumed about (anti)commutativity.
pub fn one_particle_commutator(
    grid: &MassShellGrid,
    a: &SmearedOperator,
    b: &SmearedOperator,
    phi: &[C64],
    psi: &[C64],
) -> C64 {
    let two = C64::new(2.0, 0.0);
    // particle-conserving composition: A₁₁ = 2 × Retain kernel
    let b_psi: Vec<C64> = channel_apply(grid, &b.window, Channel::Retain, &b.u, &b.u2, psi)
        .iter()
        .map(|z| z * two)
        .collect();
    let ab = channel_apply(grid, &a.window, Channel::Retain, &a.u, &a.u2, &b_psi)
        .iter()
        .map(|z| z * two)
        .collect::<Vec<_>>();
    let a_psi: Vec<C64> = channel_apply(grid, &a.window, Channel::Retain, &a.u, &a.u2, psi)
        .iter()
        .map(|z| z * two)
        .collect();
    let ba = channel_apply(grid, &b.window, Channel::Retain, &b.u, &b.u2, &a_psi)
        .iter()
        .map(|z| z * two)
        .collect::<Vec<_>>();
    let term11 = grid.inner(phi, &ab) - grid.inner(phi, &ba);

    // Exchange through the pair blocks. With h_X the creation kernel of X,
    // the annihilation kernel is conj(h_X) pointwise (real smearing density,
    // real contraction), and
    //   ⟨φ|X₁←₃Y₃←₁ψ⟩ = 2 (∬ conj(h_X) h_Y dμdμ) ⟨φ|ψ⟩
    //                  + 4 ∫ dμ J_X I_Y,
    //   J_X(k) = ∫ dμ(p) conj(h_X(p,k)) ψ(p),
    //   I_Y(k) = ∫ dμ(q) h_Y(k,q) conj(φ(q)).
    let pass_a = Pass::new(grid, &a.window, Channel::Create);
    let pass_b = Pass::new(grid, &b.window, Channel::Create);
    let e = grid.energies();
    let wmu = grid.wmu();
    let pts = grid.points();
    let m2 = grid.mass() * grid.mass();
    let eua = grid.energies_for(&a.u);
    let eua2 = grid.energies_for(&a.u2);
    let eub = grid.energies_for(&b.u);
    let eub2 = grid.energies_for(&b.u2);
    let uu_a = a.u.dot(&a.u2);
    let uu_b = b.u.dot(&b.u2);
    let sc_a = a.window.scale() / FOUR_PI;
    let sc_b = b.window.scale() / FOUR_PI;
    let n3 = grid.len();

    struct Acc {
        s_ab: C64,
        ja: Vec<C64>,
        ia: Vec<C64>,
        jb: Vec<C64>,
        ib: Vec<C64>,
    }
    let zero = |n: usize| Acc {
        s_ab: C64::new(0.0, 0.0),
        ja: vec![C64::new(0.0, 0.0); n],
        ia: vec![C64::new(0.0, 0.0); n],
        jb: vec![C64::new(0.0, 0.0); n],
        ib: vec![C64::new(0.0, 0.0); n],
    };

    let acc = (0..n3)
        .into_par_iter()
        .fold(
            || zero(n3),
            |mut acc, i| {
                for j in 0..n3 {
                    let q0 = e[i] + e[j];
                    let pk = -e[i] * e[j] + dot3(&pts[i], &pts[j]);
                    // t(P,−K) contracted for each operator
                    let tc_a =
                        0.5 * (-(eua[i] * eua2[j] + eua[j] * eua2[i]) - uu_a * (m2 - pk));
                    let tc_b =
                        0.5 * (-(eub[i] * eub2[j] + eub[j] * eub2[i]) - uu_b * (m2 - pk));
                    let ha = pass_a.space(i, j) * a.window.time_factor(q0) * tc_a * sc_a;
                    let hb = pass_b.space(i, j) * b.window.time_factor(q0) * tc_b * sc_b;
                    acc.s_ab += ha.conj() * hb * (wmu[i] * wmu[j]);
                    // J/I accumulate along columns; kernels are symmetric
                    acc.ja[j] += ha.conj() * psi[i] * wmu[i];
                    acc.jb[j] += hb.conj() * psi[i] * wmu[i];
                    acc.ia[j] += ha * phi[i].conj() * wmu[i];
                    acc.ib[j] += hb * phi[i].conj() * wmu[i];
                }
                acc
            },
        )
        .reduce(
            || zero(n3),
            |mut x, y| {
                x.s_ab += y.s_ab;
                for k in 0..n3 {
                    x.ja[k] += y.ja[k];
                    x.jb[k] += y.jb[k];
                    x.ia[k] += y.ia[k];
                    x.ib[k] += y.ib[k];
                }
                x
            },
        );

    let phi_psi = grid.inner(phi, psi);
    let pair_dot = |x: &[C64], y: &[C64]| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n3 {
            acc += x[k] * y[k] * wmu[k];
        }
        acc
    };
    // ⟨φ|A₁←₃B₃←₁ψ⟩ − ⟨φ|B₁←₃A₃←₁ψ⟩
    let ab_exch = acc.s_ab * 2.0 * phi_psi + pair_dot(&acc.ja, &acc.ib) * 4.0;
    let ba_exch = acc.s_ab.conj() * 2.0 * phi_psi + pair_dot(&acc.jb, &acc.ia) * 4.0;

    term11 + ab_exch - ba_exch
}

// ---------------------------------------------------------------------------
// position route
// ---------------------------------------------------------------------------

/// Complex analogue of [`kernel10`]: `a` holds the conjugated bra
/// derivatives, `b` the ket derivatives, `mass_term = m² Φ̄Ψ`.
#[inline]
fn kernelc10(a: &[C64; 4], b: &[C64; 4], mass_term: C64, out: &mut [C64; 10]) {
    let s = -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + mass_term;
    out[0] = a[0] * b[0] + 0.5 * s;
    out[1] = 0.5 * (a[0] * b[1] + b[0] * a[1]);
    out[2] = 0.5 * (a[0] * b[2] + b[0] * a[2]);
    out[3] = 0.5 * (a[0] * b[3] + b[0] * a[3]);
    out[4] = a[1] * b[1] - 0.5 * s;
    out[5] = 0.5 * (a[1] * b[2] + b[1] * a[2]);
    out[6] = 0.5 * (a[1] * b[3] + b[1] * a[3]);
    out[7] = a[2] * b[2] - 0.5 * s;
    out[8] = 0.5 * (a[2] * b[3] + b[2] * a[3]);
    out[9] = a[3] * b[3] - 0.5 * s;
}

/// `comps[c] += coeff · T_c[conj(bf), kf]` over every lattice site.
fn add_bilinear(comps: &mut [Array3<C64>], bf: &FieldSet, kf: &FieldSet, m2: f64, coeff: f64) {
    let n3 = kf.value.len();
    let kv = kf.value.as_slice().unwrap();
    let kd: [&[C64]; 4] = [
        kf.deriv[0].as_slice().unwrap(),
        kf.deriv[1].as_slice().unwrap(),
        kf.deriv[2].as_slice().unwrap(),
        kf.deriv[3].as_slice().unwrap(),
    ];
    let bv = bf.value.as_slice().unwrap();
    let bd: [&[C64]; 4] = [
        bf.deriv[0].as_slice().unwrap(),
        bf.deriv[1].as_slice().unwrap(),
        bf.deriv[2].as_slice().unwrap(),
        bf.deriv[3].as_slice().unwrap(),
    ];
    let mut cs: Vec<&mut [C64]> = comps
        .iter_mut()
        .map(|arr| arr.as_slice_mut().unwrap())
        .collect();
    for s in 0..n3 {
        let a = [
            bd[0][s].conj(),
            bd[1][s].conj(),
            bd[2][s].conj(),
            bd[3][s].conj(),
        ];
        let b = [kd[0][s], kd[1][s], kd[2][s], kd[3][s]];
        let mt = bv[s].conj() * kv[s] * m2;
        let mut o = [C64::new(0.0, 0.0); 10];
        kernelc10(&a, &b, mt, &mut o);
        for c in 0..10 {
            cs[c][s] += coeff * o[c];
        }
    }
}

/// Time-integrated spectral density of the stress-energy bilinear on the
/// FFT lattice. Building one pipeline costs `nt` field syntheses plus ten
/// lattice transforms per time node; every subsequent probe (a point
/// element, a box element, a density map) is a single weighted lattice sum,
/// so one pipeline serves arbitrarily many spatial probes.
pub struct PositionPipeline {
    lattice: MomentumGrid,
    mass: f64,
    ghat: Vec<Array3<C64>>,
}

impl PositionPipeline {
    /// Synthesizes the bra/ket fields over `nt` Gauss–Legendre time nodes
    /// spanning the squared smearing's temporal support around `x0`, forms
    /// the ten bilinear densities on the position lattice and accumulates
    /// their transforms weighted by the temporal factor of `f²`. `ket =
    /// None` means diagonal (`ket = bra`), saving half the syntheses.
    pub fn build(
        lattice: &MomentumGrid,
        mass: f64,
        f: &SmearingFunction,
        x0: f64,
        bra: &Array3<C64>,
        ket: Option<&Array3<C64>>,
        nt: usize,
    ) -> PositionPipeline {
        let n = lattice.n();
        let m2 = mass * mass;
        let taxis = f.time_axis();
        let half = taxis.shape.support_halfwidth();
        let mid = x0 + taxis.center;
        let rule = gauss_legendre_on(nt, mid - half, mid + half);
        let a2 = f.amplitude() * f.amplitude();

        let mut ghat: Vec<Array3<C64>> = (0..10).map(|_| Array3::zeros((n, n, n))).collect();
        let mut comps: Vec<Array3<C64>> = (0..10).map(|_| Array3::zeros((n, n, n))).collect();

        for (&t, &wt) in rule.nodes().iter().zip(rule.weights()) {
            let tv = taxis.value(t - x0);
            let weight = wt * a2 * tv * tv;
            if weight == 0.0 {
                continue;
            }
            for arr in comps.iter_mut() {
                arr.fill(C64::new(0.0, 0.0));
            }
            let kf = lattice.synthesize_fields(ket.unwrap_or(bra), mass, t);
            let bf_own;
            let bf = if ket.is_some() {
                bf_own = lattice.synthesize_fields(bra, mass, t);
                &bf_own
            } else {
                &kf
            };
            add_bilinear(&mut comps, bf, &kf, m2, 1.0);
            for c in 0..10 {
                let tr = lattice.momentum_from_position(&comps[c]);
                ghat[c].zip_mut_with(&tr, |g, &v| *g += v * weight);
            }
        }
        PositionPipeline {
            lattice: lattice.clone(),
            mass,
            ghat,
        }
    }

    /// Diagonal multi-mode variant: the density kernel is
    /// `Σ_r coeff_r conj(Φ_r) ⊗ Φ_r`; the ten lattice transforms per time
    /// node are shared across modes.
    pub fn build_diagonal(
        lattice: &MomentumGrid,
        mass: f64,
        f: &SmearingFunction,
        x0: f64,
        modes: &[(f64, Array3<C64>)],
        nt: usize,
    ) -> PositionPipeline {
        let n = lattice.n();
        let m2 = mass * mass;
        let taxis = f.time_axis();
        let half = taxis.shape.support_halfwidth();
        let mid = x0 + taxis.center;
        let rule = gauss_legendre_on(nt, mid - half, mid + half);
        let a2 = f.amplitude() * f.amplitude();

        let mut ghat: Vec<Array3<C64>> = (0..10).map(|_| Array3::zeros((n, n, n))).collect();
        let mut comps: Vec<Array3<C64>> = (0..10).map(|_| Array3::zeros((n, n, n))).collect();

        for (&t, &wt) in rule.nodes().iter().zip(rule.weights()) {
            let tv = taxis.value(t - x0);
            let weight = wt * a2 * tv * tv;
            if weight == 0.0 {
                continue;
            }
            for arr in comps.iter_mut() {
                arr.fill(C64::new(0.0, 0.0));
            }
            for (coeff, samples) in modes {
                if *coeff == 0.0 {
                    continue;
                }
                let fld = lattice.synthesize_fields(samples, mass, t);
                add_bilinear(&mut comps, &fld, &fld, m2, *coeff);
            }
            for c in 0..10 {
                let tr = lattice.momentum_from_position(&comps[c]);
                ghat[c].zip_mut_with(&tr, |g, &v| *g += v * weight);
            }
        }
        PositionPipeline {
            lattice: lattice.clone(),
            mass,
            ghat,
        }
    }

    pub fn lattice(&self) -> &MomentumGrid {
        &self.lattice
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Weighted lattice sum `Σ_q ĝ_{μν}(q) ∏_a w_a(q_a) / n³` — the shared
    /// core of all probes.
    fn probe(&self, axis_factors: &[Vec<C64>; 3]) -> SymTensor {
        let n = self.lattice.n();
        let n3 = n * n * n;
        let gs: Vec<&[C64]> = self.ghat.iter().map(|a| a.as_slice().unwrap()).collect();
        let mut acc = [C64::new(0.0, 0.0); 10];
        for s in 0..n3 {
            let iz = s % n;
            let iy = (s / n) % n;
            let ix = s / (n * n);
            let w = axis_factors[0][ix] * axis_factors[1][iy] * axis_factors[2][iz];
            for (dst, g) in acc.iter_mut().zip(&gs) {
                *dst += g[s] * w;
            }
        }
        SymTensor::from_components(acc).scaled(C64::new(1.0 / n3 as f64, 0.0))
    }

    /// `⟨bra| :T_{μν}:[f²_x] |ket⟩` with the smearing translated to the
    /// spatial point `x` (time offset fixed at build time).
    pub fn tensor_at(&self, f: &SmearingFunction, x: [f64; 3]) -> SymTensor {
        let qs = self.lattice.momenta();
        let mk = |a: usize| -> Vec<C64> {
            qs.iter()
                .map(|&q| f.space_axis(a).sq_transform(q).conj() * C64::new(0.0, q * x[a]).exp())
                .collect()
        };
        self.probe(&[mk(0), mk(1), mk(2)])
    }

    /// `∫_Δ d³x ⟨bra| :T_{μν}:[f²_x] |ket⟩ — the box-integrated element.
    pub fn tensor_box(&self, f: &SmearingFunction, region: &RegionBox) -> SymTensor {
        let bw = box_window(region);
        let qs = self.lattice.momenta();
        let mk = |a: usize| -> Vec<C64> {
            qs.iter()
                .map(|&q| f.space_axis(a).sq_transform(q).conj() * bw.space_factor(a, q).conj())
                .collect()
        };
        self.probe(&[mk(0), mk(1), mk(2)]).scaled(bw.scale().conj())
    }

    /// Contracted density `x⃗ ↦ u^μ u₂^ν ⟨T_{μν}[f²_x]⟩` on the whole
    /// position lattice (imaginary parts are roundoff for bra = ket).
    pub fn density(&self, f: &SmearingFunction, u: &FourVector, u2: &FourVector) -> Array3<C64> {
        let n = self.lattice.n();
        let n3 = n * n * n;
        let qs = self.lattice.momenta();
        let wq: [Vec<C64>; 3] = [
            qs.iter()
                .map(|&q| f.space_axis(0).sq_transform(q).conj())
                .collect(),
            qs.iter()
                .map(|&q| f.space_axis(1).sq_transform(q).conj())
                .collect(),
            qs.iter()
                .map(|&q| f.space_axis(2).sq_transform(q).conj())
                .collect(),
        ];
        // distribute u^μ u₂^ν over the packed symmetric components
        let ua = [u.t, u.x, u.y, u.z];
        let ub = [u2.t, u2.x, u2.y, u2.z];
        let mut coeff = [0.0f64; 10];
        for mu in 0..4 {
            for nu in 0..4 {
                coeff[PACK[mu][nu]] += ua[mu] * ub[nu];
            }
        }
        let gs: Vec<&[C64]> = self.ghat.iter().map(|a| a.as_slice().unwrap()).collect();
        let mut hq = Array3::<C64>::zeros((n, n, n));
        {
            let hs = hq.as_slice_mut().unwrap();
            let scale = 1.0 / n3 as f64;
            for s in 0..n3 {
                let iz = s % n;
                let iy = (s / n) % n;
                let ix = s / (n * n);
                let mut v = C64::new(0.0, 0.0);
                for c in 0..10 {
                    v += gs[c][s] * coeff[c];
                }
                hs[s] = v * wq[0][ix] * wq[1][iy] * wq[2][iz] * scale;
            }
        }
        self.lattice.position_from_momentum(&hq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::on_shell;
    use crate::states::OneParticle;

    const M: f64 = 1.0;

    fn u_pair() -> (FourVector, FourVector) {
        (
            FourVector::rapidity_along(0.3, 0),
            FourVector::rapidity_along(-0.2, 1),
        )
    }

    fn test_window() -> SeparableWindow {
        let f = SmearingFunction::gaussian(0.8, 1.1)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let shift = FourVector::new(0.4, 0.3, -0.2, 0.1);
        let boxw = box_window(&RegionBox::new([-0.4, -0.5, -0.3], [0.6, 0.5, 0.7]).unwrap());
        f.fourier_sq().translated(&shift).product(&boxw)
    }

    fn sample_vecs(grid: &MassShellGrid) -> (Vec<C64>, Vec<C64>) {
        let a = OneParticle::gaussian([0.4, -0.1, 0.2], 0.9).with_linear_phase([0.5, 0.0, -0.3]);
        let b = OneParticle::gaussian([-0.2, 0.3, 0.0], 1.2).with_linear_phase([-0.1, 0.4, 0.0]);
        (grid.sample(&a), grid.sample(&b))
    }

    /// Fully independent slow evaluation: explicit four-vectors, whole-window
    /// evaluation, metric double loop. Exists to cross-check the table-driven
    /// fast pass.
    fn brute_tensor(
        grid: &MassShellGrid,
        window: &SeparableWindow,
        channel: Channel,
        terms: &[(C64, &[C64], &[C64])],
    ) -> SymTensor {
        let g = [-1.0, 1.0, 1.0, 1.0];
        let mut acc = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let p = on_shell(grid.points()[i], grid.mass());
                let k = on_shell(grid.points()[j], grid.mass());
                let q = match channel {
                    Channel::Retain => p - k,
                    Channel::Annihilate => -(p + k),
                    Channel::Create => p + k,
                };
                let kk = match channel {
                    Channel::Retain => k,
                    _ => -k,
                };
                let a4 = [-p.t, p.x, p.y, p.z];
                let b4 = [-kk.t, kk.x, kk.y, kk.z];
                let s = -a4[0] * b4[0] + a4[1] * b4[1] + a4[2] * b4[2] + a4[3] * b4[3]
                    + grid.mass() * grid.mass();
                let mut f = C64::new(0.0, 0.0);
                for (c, bra, ket) in terms {
                    f += c * bra[i].conj() * ket[j];
                }
                let w = window.eval(&q) * f * (grid.wmu()[i] * grid.wmu()[j]);
                for mu in 0..4 {
                    for nu in 0..4 {
                        let t = 0.5 * (a4[mu] * b4[nu] + a4[nu] * b4[mu])
                            - 0.5 * g[mu] * if mu == nu { s } else { 0.0 };
                        acc[mu][nu] += w * t / FOUR_PI;
                    }
                }
            }
        }
        let mut c = [C64::new(0.0, 0.0); 10];
        for mu in 0..4 {
            for nu in mu..4 {
                c[PACK[mu][nu]] = acc[mu][nu];
            }
        }
        SymTensor::from_components(c)
    }

    #[test]
    fn engine_matches_brute_force_on_all_channels() {
        let grid = MassShellGrid::sinh(5, 6.0, M).unwrap();
        let win = test_window();
        let (va, vb) = sample_vecs(&grid);
        let terms: Vec<(C64, &[C64], &[C64])> = vec![
            (C64::new(0.7, -0.3), &va, &vb),
            (C64::new(-0.2, 0.5), &vb, &va),
        ];
        let (u, u2) = u_pair();
        for ch in [Channel::Retain, Channel::Annihilate, Channel::Create] {
            let fast = channel_tensor(&grid, &win, ch, &terms);
            let slow = brute_tensor(&grid, &win, ch, &terms);
            let scale = slow.max_abs().max(1e-30);
            assert!(
                fast.max_diff(&slow) < 1e-12 * scale,
                "{ch:?}: {} vs scale {scale}",
                fast.max_diff(&slow)
            );
            // scalar pass agrees with the contracted tensor
            let m = channel_matrix(
                &grid,
                &win,
                ch,
                &u,
                &u2,
                std::slice::from_ref(&va),
                std::slice::from_ref(&vb),
            );
            let direct = brute_tensor(&grid, &win, ch, &[(C64::new(1.0, 0.0), &va, &vb)])
                .contract(&u, &u2);
            assert!(
                (m[[0, 0]] - direct).norm() < 1e-12 * direct.norm().max(1e-30),
                "{ch:?} scalar"
            );
            // applying then pairing equals the matrix element
            let applied = channel_apply(&grid, &win, ch, &u, &u2, &vb);
            let paired = grid.inner(&va, &applied);
            assert!((paired - direct).norm() < 1e-12 * direct.norm().max(1e-30));
        }
    }

    #[test]
    fn dense_dressing_matches_separable() {
        let grid = MassShellGrid::sinh(5, 6.0, M).unwrap();
        let win = test_window();
        let (va, vb) = sample_vecs(&grid);
        let n3 = grid.len();
        let mut dense = Array2::<C64>::zeros((n3, n3));
        let c = C64::new(0.6, 0.2);
        for i in 0..n3 {
            for j in 0..n3 {
                dense[[i, j]] = c * va[i].conj() * vb[j];
            }
        }
        let terms: Vec<(C64, &[C64], &[C64])> = vec![(c, &va, &vb)];
        for ch in [Channel::Retain, Channel::Annihilate, Channel::Create] {
            let a = channel_tensor(&grid, &win, ch, &terms);
            let b = channel_tensor_dense(&grid, &win, ch, &dense);
            assert!(a.max_diff(&b) < 1e-12 * a.max_abs().max(1e-30), "{ch:?}");
        }
    }

    #[test]
    fn diag_quadratic_matches_matrix_route() {
        let grid = MassShellGrid::sinh(5, 6.0, M).unwrap();
        let win = test_window();
        let (va, vb) = sample_vecs(&grid);
        let (u, u2) = u_pair();
        let coeffs = [0.8, -0.45];
        let modes = [va.clone(), vb.clone()];
        for ch in [Channel::Retain, Channel::Annihilate, Channel::Create] {
            let q = channel_diag_quadratic(&grid, &win, ch, &u, &u2, &coeffs, &modes);
            let m = channel_matrix(&grid, &win, ch, &u, &u2, &modes, &modes);
            let expect = coeffs[0] * m[[0, 0]] + coeffs[1] * m[[1, 1]];
            assert!(
                (q - expect).norm() < 1e-12 * expect.norm().max(1e-30),
                "{ch:?}: {q} vs {expect}"
            );
        }
    }

    #[test]
    fn diagonal_pipeline_matches_pair_pipeline() {
        let lattice = MomentumGrid::new(8, 3.0).unwrap();
        let f = SmearingFunction::gaussian(0.5, 0.9)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let psi = OneParticle::gaussian([0.2, -0.1, 0.0], 1.0);
        let chi = OneParticle::gaussian([-0.3, 0.2, 0.1], 0.8);
        let sp = lattice.sample(&psi);
        let sc = lattice.sample(&chi);
        let single = PositionPipeline::build(&lattice, M, &f, 0.1, &sp, None, 10);
        let multi = PositionPipeline::build_diagonal(
            &lattice,
            M,
            &f,
            0.1,
            &[(0.7, sp.clone()), (0.3, sc.clone())],
            10,
        );
        let other = PositionPipeline::build(&lattice, M, &f, 0.1, &sc, None, 10);
        let x = [0.3, -0.2, 0.4];
        let got = multi.tensor_at(&f, x);
        let want = single
            .tensor_at(&f, x)
            .scaled(C64::new(0.7, 0.0))
            .add(&other.tensor_at(&f, x).scaled(C64::new(0.3, 0.0)));
        assert!(got.max_diff(&want) < 1e-12 * want.max_abs().max(1e-30));
    }

    #[test]
    fn assembled_element_is_hermitian() {
        let grid = MassShellGrid::sinh(6, 6.0, M).unwrap();
        let win = test_window();
        let g1 = OneParticle::gaussian([0.3, 0.0, 0.1], 1.0);
        let g2 = OneParticle::gaussian([-0.2, 0.4, 0.0], 0.8);
        let g3 = OneParticle::gaussian([0.0, -0.3, 0.2], 1.1);
        let g4 = OneParticle::gaussian([0.5, 0.1, -0.1], 0.9);
        let bra = SectorState::new(
            C64::new(0.6, 0.1),
            vec![(C64::new(0.0, 0.5), g1.clone())],
            vec![(C64::new(0.7, -0.2), g2.clone(), g3.clone())],
            vec![(C64::new(0.3, 0.3), g1.clone(), g2.clone(), g4.clone())],
        );
        let ket = SectorState::new(
            C64::new(0.2, -0.1),
            vec![(C64::new(0.8, 0.0), g4.clone())],
            vec![(C64::new(0.0, 0.4), g1.clone(), g4.clone())],
            vec![(C64::new(-0.5, 0.2), g3.clone(), g2.clone(), g1.clone())],
        );
        let fwd = tensor_element(&grid, &win, &bra, &ket);
        let rev = tensor_element(&grid, &win, &ket, &bra);
        let scale = fwd.max_abs().max(1e-30);
        for mu in 0..4 {
            for nu in mu..4 {
                let d = (fwd.get(mu, nu) - rev.get(mu, nu).conj()).norm();
                assert!(d < 1e-11 * scale, "({mu},{nu}): {d} vs {scale}");
            }
        }
    }

    #[test]
    fn hyperplane_total_matches_hamiltonian_expectation() {
        let grid = MassShellGrid::sinh(12, 8.0, M).unwrap();
        let f = SmearingFunction::gaussian(0.7, 1.0)
            .unwrap()
            .normalized_sq(2.5)
            .unwrap();
        let u = FourVector::rapidity_along(0.25, 0);
        let psi = OneParticle::gaussian([0.3, 0.0, 0.0], 1.0);
        let state = SectorState::one_particle(psi.clone()).normalized(&grid).unwrap();
        let v = grid.sample(&state.terms1()[0].1);
        let coeff = state.terms1()[0].0;
        let diag: Vec<C64> = v.iter().map(|z| z * coeff * (z * coeff).conj()).collect();
        let lhs = sigma_plane_total(&grid, &f, &u, &diag);
        let rhs = f.integral_sq() * state.h_expectation_raw(&grid, &u);
        assert!((f.integral_sq() - 2.5).abs() < 1e-12);
        assert!(
            (lhs.re - rhs).abs() < 1e-12 * rhs.abs(),
            "{} vs {rhs}",
            lhs.re
        );
        assert!(lhs.im.abs() < 1e-14 * rhs.abs());
    }

    #[test]
    fn commutator_of_operator_with_itself_vanishes() {
        let grid = MassShellGrid::sinh(6, 6.0, M).unwrap();
        let (u, u2) = u_pair();
        let op = SmearedOperator {
            window: test_window(),
            u,
            u2,
        };
        let (phi, psi) = sample_vecs(&grid);
        let c = one_particle_commutator(&grid, &op, &op, &phi, &psi);
        assert!(c.norm() < 1e-13, "{c}");
    }

    #[test]
    fn commutator_is_antihermitian() {
        let grid = MassShellGrid::sinh(6, 6.0, M).unwrap();
        let f1 = SmearingFunction::gaussian(0.6, 0.9)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let f2 = SmearingFunction::gaussian(0.9, 1.2)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let a = SmearedOperator {
            window: f1
                .fourier_sq()
                .translated(&FourVector::new(0.0, 0.6, 0.0, 0.0)),
            u: FourVector::rapidity_along(0.2, 0),
            u2: FourVector::new(1.0, 0.0, 0.0, 0.0),
        };
        let b = SmearedOperator {
            window: f2
                .fourier_sq()
                .translated(&FourVector::new(0.3, -0.4, 0.2, 0.0)),
            u: FourVector::new(1.0, 0.0, 0.0, 0.0),
            u2: FourVector::rapidity_along(-0.15, 2),
        };
        let (phi, psi) = sample_vecs(&grid);
        let fwd = one_particle_commutator(&grid, &a, &b, &phi, &psi);
        let rev = one_particle_commutator(&grid, &a, &b, &psi, &phi);
        // hermitian A,B ⇒ ⟨φ|[A,B]ψ⟩ = −conj(⟨ψ|[A,B]φ⟩)
        assert!(
            (fwd + rev.conj()).norm() < 1e-12 * fwd.norm().max(1e-30),
            "{fwd} vs {rev}"
        );
    }

    #[test]
    fn momentum_and_position_routes_agree() {
        let psi = OneParticle::gaussian([0.3, 0.0, 0.0], 1.0).with_linear_phase([0.4, 0.0, -0.2]);
        let f = SmearingFunction::gaussian(0.5, 0.9)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let state = SectorState::one_particle(psi.clone());

        let grid = MassShellGrid::sinh(14, 7.5, M).unwrap();
        let x = [0.4, -0.3, 0.2];
        let w_at = f
            .fourier_sq()
            .translated(&FourVector::new(0.0, x[0], x[1], x[2]));
        let mom_at = tensor_element(&grid, &w_at, &state, &state);

        let region = RegionBox::new([-0.5, -0.6, -0.4], [0.6, 0.4, 0.5]).unwrap();
        let w_box = f.fourier_sq().product(&box_window(&region));
        let mom_box = tensor_element(&grid, &w_box, &state, &state);

        let lattice = MomentumGrid::new(40, 5.0).unwrap();
        let samples = lattice.sample(&psi);
        let pipe = PositionPipeline::build(&lattice, M, &f, 0.0, &samples, None, 48);
        let pos_at = pipe.tensor_at(&f, x);
        let pos_box = pipe.tensor_box(&f, &region);

        let s_at = mom_at.max_abs();
        assert!(
            mom_at.max_diff(&pos_at) < 2e-3 * s_at,
            "point probe: {} vs {s_at}",
            mom_at.max_diff(&pos_at)
        );
        let s_box = mom_box.max_abs();
        assert!(
            mom_box.max_diff(&pos_box) < 2e-3 * s_box,
            "box probe: {} vs {s_box}",
            mom_box.max_diff(&pos_box)
        );
    }
}
