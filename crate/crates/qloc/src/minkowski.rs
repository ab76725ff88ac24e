//! Minkowski geometry with signature `(-,+,+,+)`.
//!
//! Everything downstream — mass shells, boost matrices, rest spaces, spatial
//! boxes and causal shadows — is written against the conventions of this
//! module: the metric is `diag(-1,+1,+1,+1)`, future timelike vectors have
//! `u·u = -1` and `u⁰ > 0`, and spatial regions are axis-aligned boxes in a
//! Minkowskian chart comoving with the rest space they live on.

use thiserror::Error;

/// Errors produced by geometric constructions.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// A four-vector expected to be future unit timelike was not.
    #[error("four-vector {0:?} is not future unit timelike (u·u = {1}, u⁰ = {2})")]
    NotFutureUnitTimelike(FourVector, f64, f64),
    /// A mass parameter must be strictly positive.
    #[error("mass must be strictly positive, got {0}")]
    NonPositiveMass(f64),
    /// Box bounds must satisfy `lower[a] < upper[a]` on every axis.
    #[error("degenerate box: lower {lower:?} not strictly below upper {upper:?}")]
    DegenerateBox { lower: [f64; 3], upper: [f64; 3] },
}

/// A spacetime vector `(t, x, y, z)` in a fixed Minkowskian chart.
///
/// The index order is `0 ↦ t, 1 ↦ x, 2 ↦ y, 3 ↦ z` and the metric is
/// `diag(-1,+1,+1,+1)`:
///
/// ```
/// use qloc::FourVector;
/// let u = FourVector::new(1.0, 0.0, 0.0, 0.0);
/// assert_eq!(u.dot(&u), -1.0);
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourVector {
    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    /// The time axis of the chart; the standard laboratory four-velocity.
    pub const fn time_axis() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    /// Builds `(t, v⃗)` from a time component and a spatial triple.
    pub fn from_parts(t: f64, v: [f64; 3]) -> Self {
        Self::new(t, v[0], v[1], v[2])
    }

    /// Spatial part `v⃗ = (x, y, z)`.
    pub fn spatial(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Minkowski inner product `u·v = -u⁰v⁰ + u⃗·v⃗`.
    pub fn dot(&self, other: &Self) -> f64 {
        -self.t * other.t + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// `v·v`; negative for timelike, positive for spacelike vectors.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn component(&self, mu: usize) -> f64 {
        match mu {
            0 => self.t,
            1 => self.x,
            2 => self.y,
            3 => self.z,
            _ => panic!("four-vector index {mu} out of range"),
        }
    }

    /// True when `v·v < -tol` and `v⁰ > 0`.
    pub fn is_future_timelike(&self, tol: f64) -> bool {
        self.norm_sq() < -tol && self.t > 0.0
    }

    /// Checks `v·v = -1` within `tol` and `v⁰ > 0`.
    pub fn is_future_unit_timelike(&self, tol: f64) -> bool {
        (self.norm_sq() + 1.0).abs() <= tol && self.t > 0.0
    }

    /// Future unit timelike vector with rapidity `chi` along a spatial `axis`
    /// (0 ↦ x, 1 ↦ y, 2 ↦ z): `u = (cosh χ, sinh χ · ê)`.
    pub fn rapidity_along(chi: f64, axis: usize) -> Self {
        let mut v = [0.0; 3];
        v[axis] = chi.sinh();
        Self::from_parts(chi.cosh(), v)
    }
}

impl std::ops::Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector::new(self.t * s, self.x * s, self.y * s, self.z * s)
    }
}

/// On-shell energy `E(p⃗) = √(m² + |p⃗|²)`.
///
/// ```
/// assert_eq!(qloc::minkowski::mass_shell_energy([0.0; 3], 1.0), 1.0);
/// assert_eq!(qloc::minkowski::mass_shell_energy([3.0, 0.0, 0.0], 4.0), 5.0);
/// ```
pub fn mass_shell_energy(p: [f64; 3], m: f64) -> f64 {
    (m * m + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Lifts a spatial momentum to the future mass shell: `(E(p⃗), p⃗)`.
pub fn on_shell(p: [f64; 3], m: f64) -> FourVector {
    FourVector::from_parts(mass_shell_energy(p, m), p)
}

/// A Lorentz transformation stored as a dense 4×4 matrix acting on chart
/// components, `(Λv)^μ = Λ^μ_ν v^ν`.
#[derive(Debug, Clone, Copy)]
pub struct Boost {
    m: [[f64; 4]; 4],
}

impl Boost {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { m }
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn apply(&self, v: &FourVector) -> FourVector {
        let c = [v.t, v.x, v.y, v.z];
        let mut out = [0.0; 4];
        for (mu, row) in self.m.iter().enumerate() {
            out[mu] = (0..4).map(|nu| row[nu] * c[nu]).sum();
        }
        FourVector::new(out[0], out[1], out[2], out[3])
    }

    /// The inverse transformation `Λ⁻¹ = η Λᵀ η`.
    pub fn inverse(&self) -> Self {
        let eta = [-1.0, 1.0, 1.0, 1.0];
        let mut inv = [[0.0; 4]; 4];
        for (mu, row) in inv.iter_mut().enumerate() {
            for (nu, entry) in row.iter_mut().enumerate() {
                *entry = eta[mu] * self.m[nu][mu] * eta[nu];
            }
        }
        Self { m: inv }
    }

    /// Maximum absolute entry of `ΛᵀηΛ - η`; a direct measure of how well the
    /// matrix preserves the metric.
    pub fn metric_defect(&self) -> f64 {
        let eta = [-1.0f64, 1.0, 1.0, 1.0];
        let mut worst = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                let mut s = 0.0;
                for (mu, em) in eta.iter().enumerate() {
                    s += self.m[mu][a] * em * self.m[mu][b];
                }
                let target = if a == b { eta[a] } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// The pure boost carrying a future unit timelike `u` to the chart time axis.
///
/// With `γ = u⁰` and `β⃗ = u⃗/u⁰` the matrix is the standard symmetric pure
/// boost; it satisfies `Λu = (1,0,0,0)` and `ΛᵀηΛ = η` to machine precision.
///
/// ```
/// use qloc::FourVector;
/// let u = FourVector::rapidity_along(1.3, 0);
/// let lam = qloc::minkowski::boost_to_rest(&u).unwrap();
/// let e0 = lam.apply(&u);
/// assert!((e0.t - 1.0).abs() < 1e-14 && e0.x.abs() < 1e-14);
/// assert!(lam.metric_defect() < 1e-12);
/// ```
pub fn boost_to_rest(u: &FourVector) -> Result<Boost, GeometryError> {
    if !u.is_future_unit_timelike(1e-9) {
        return Err(GeometryError::NotFutureUnitTimelike(
            *u,
            u.norm_sq(),
            u.t,
        ));
    }
    let gamma = u.t;
    let beta = [u.x / gamma, u.y / gamma, u.z / gamma];
    let b2: f64 = beta.iter().map(|b| b * b).sum();
    let mut m = [[0.0; 4]; 4];
    m[0][0] = gamma;
    for a in 0..3 {
        m[0][a + 1] = -gamma * beta[a];
        m[a + 1][0] = -gamma * beta[a];
        for b in 0..3 {
            let proj = if b2 > 0.0 {
                (gamma - 1.0) * beta[a] * beta[b] / b2
            } else {
                0.0
            };
            m[a + 1][b + 1] = if a == b { 1.0 + proj } else { proj };
        }
    }
    Ok(Boost { m })
}

/// A flat spacelike hyperplane `{x⁰ = τ}` of the chart comoving with its
/// future unit normal.
///
/// The crate realizes every rest space in its own comoving chart: inputs given
/// in another frame are mapped with [`boost_to_rest`] first. `time_offset` is
/// the chart time `τ` of the plane.
#[derive(Debug, Clone, Copy)]
pub struct RestSpace {
    pub normal: FourVector,
    pub time_offset: f64,
}

impl RestSpace {
    /// The laboratory rest space `{x⁰ = 0}`.
    pub fn standard() -> Self {
        Self {
            normal: FourVector::time_axis(),
            time_offset: 0.0,
        }
    }

    pub fn at_time(tau: f64) -> Self {
        Self {
            normal: FourVector::time_axis(),
            time_offset: tau,
        }
    }
}

/// An axis-aligned spatial box on a rest space, `∏_a [lower_a, upper_a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBox {
    lower: [f64; 3],
    upper: [f64; 3],
}

impl RegionBox {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self, GeometryError> {
        let ordered = |a: usize| lower[a].is_finite() && upper[a].is_finite() && lower[a] < upper[a];
        if !(0..3).all(ordered) {
            return Err(GeometryError::DegenerateBox { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[-h, h]³`.
    pub fn centered_cube(h: f64) -> Result<Self, GeometryError> {
        Self::new([-h; 3], [h; 3])
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }

    /// Lebesgue measure `|Δ| = ∏_a (upper_a - lower_a)`.
    pub fn measure(&self) -> f64 {
        (0..3).map(|a| self.upper[a] - self.lower[a]).product()
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.lower[0] + self.upper[0]),
            0.5 * (self.lower[1] + self.upper[1]),
            0.5 * (self.lower[2] + self.upper[2]),
        ]
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| self.lower[a] <= x[a] && x[a] <= self.upper[a])
    }

    /// Euclidean distance from `x⃗` to the box (zero inside).
    pub fn distance(&self, x: [f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for ((&l, &u), &xa) in self.lower.iter().zip(&self.upper).zip(&x) {
            let d = (l - xa).max(0.0).max(xa - u);
            d2 += d * d;
        }
        d2.sqrt()
    }

    /// Splits the box at its center into 8 disjoint sub-boxes covering it.
    pub fn octants(&self) -> [RegionBox; 8] {
        let c = self.center();
        let mut out = [*self; 8];
        for (i, bx) in out.iter_mut().enumerate() {
            let mut lo = self.lower;
            let mut hi = self.upper;
            for a in 0..3 {
                if (i >> a) & 1 == 0 {
                    hi[a] = c[a];
                } else {
                    lo[a] = c[a];
                }
            }
            *bx = RegionBox { lower: lo, upper: hi };
        }
        out
    }

    /// Grows the box by `pad ≥ 0` on every face.
    pub fn padded(&self, pad: f64) -> RegionBox {
        RegionBox {
            lower: [self.lower[0] - pad, self.lower[1] - pad, self.lower[2] - pad],
            upper: [self.upper[0] + pad, self.upper[1] + pad, self.upper[2] + pad],
        }
    }
}

/// The intersection of the causal past and future of a box `Δ ⊂ {x⁰ = τ₀}`
/// with a parallel rest space a chart-time `dt` away.
///
/// A point `x⃗` on the target plane can signal to (or receive a signal from)
/// `Δ` exactly when its Euclidean distance to the box does not exceed `|dt|`;
/// [`CausalShadow::bounding_box`] is the cheap axis-aligned superset obtained
/// by padding every face with `|dt|`.
#[derive(Debug, Clone, Copy)]
pub struct CausalShadow {
    base: RegionBox,
    dt: f64,
}

/// Causal shadow of `region` on the parallel plane at chart-time offset `dt`.
pub fn causal_shadow(region: &RegionBox, dt: f64) -> CausalShadow {
    CausalShadow { base: *region, dt }
}

impl CausalShadow {
    /// Exact membership predicate: `dist(x⃗, Δ) ≤ |dt|`.
    pub fn contains(&self, x: [f64; 3]) -> bool {
        self.base.distance(x) <= self.dt.abs()
    }

    /// Signed margin `|dt| - dist(x⃗, Δ)`; nonnegative inside the shadow.
    pub fn margin(&self, x: [f64; 3]) -> f64 {
        self.dt.abs() - self.base.distance(x)
    }

    /// Axis-aligned superset of the shadow.
    pub fn bounding_box(&self) -> RegionBox {
        self.base.padded(self.dt.abs())
    }

    pub fn time_offset(&self) -> f64 {
        self.dt
    }

    pub fn base(&self) -> &RegionBox {
        &self.base
    }
}
