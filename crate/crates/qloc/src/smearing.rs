//! Separable test functions `f(x) = A · g₀(x⁰) g₁(x¹) g₂(x²) g₃(x³)` and
//! their momentum-space windows.
//!
//! Every smeared-operator computation in this crate reduces to quadrature
//! against the four-dimensional transform of `f` or of `f²` evaluated on
//! sums and differences of on-shell momenta. Because the factors stay
//! separable under transform, translation and squaring, a window is stored
//! as one complex factor per axis plus an overall scale
//! ([`SeparableWindow`]); six-dimensional kernels can then precompute
//! per-axis tables of size `n²` instead of touching `n⁶` points.
//!
//! Conventions (fixed crate-wide):
//!
//! * metric `(-,+,+,+)`, so `q·x = -q⁰x⁰ + q⃗·x⃗`;
//! * four-dimensional transform `f̂(q) = (2π)⁻² ∫ e^{-i q·x} f(x) d⁴x`;
//! * one-dimensional axis transform `ĝ(ω) = ∫ e^{-iωs} g(s) ds` (bare, no
//!   prefactor), so `f̂(q) = (2π)⁻² A ĝ₀(-q⁰) ĝ₁(q¹) ĝ₂(q²) ĝ₃(q³)`;
//! * translation by `x`: the window acquires `e^{-i q·x}`.

use std::sync::{Arc, LazyLock};

use thiserror::Error;

use crate::minkowski::{FourVector, RegionBox};
use crate::C64;

/// Construction-time validation failures for profiles.
#[derive(Debug, Error)]
pub enum SmearingError {
    #[error("axis scale must be positive and finite, got {0}")]
    BadAxisScale(f64),
    #[error("amplitude must be finite and nonzero, got {0}")]
    BadAmplitude(f64),
    #[error("profile has zero L² mass, cannot normalize")]
    ZeroMass,
}

// ---------------------------------------------------------------------------
// compactly supported bump transform
// ---------------------------------------------------------------------------

/// `∫_{-1}^{1} e^{-iκσ} e^{-power/(1-σ²)} dσ` — real and even in `κ`.
///
/// The integrand is smooth on the closed interval with all derivatives
/// vanishing at ±1, so the tanh-sinh substitution `σ = tanh(π/2 · sinh t)`
/// turns the trapezoid rule spectrally accurate; step halving stops once the
/// update falls below 1e-14 relative. `power = 1` transforms the profile
/// itself, `power = 2` its square.
pub fn bump_transform_exact(kappa: f64, power: u32) -> f64 {
    let kappa = kappa.abs();
    let p = power as f64;
    // integrand after substitution, on t >= 0 (σ is odd in t, cos is even)
    let g = |t: f64| {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        if u > 300.0 {
            return 0.0; // sech² underflow region: integrand is exactly 0 in f64
        }
        let sigma = u.tanh();
        let sech2 = 1.0 / (u.cosh() * u.cosh());
        let jac = std::f64::consts::FRAC_PI_2 * t.cosh() * sech2;
        (kappa * sigma).cos() * (-p / sech2).exp() * jac
    };
    const TMAX: f64 = 4.0;
    // seed the mesh finely enough to resolve cos(κσ): dσ/dt ≤ π/2, so the
    // integrand oscillates at ≤ κπ/2 rad per unit t
    let m0 = 8 + (2.2 * kappa) as usize;
    let mut h = TMAX / m0 as f64;
    let mut acc = 0.5 * (g(0.0) + g(TMAX));
    for k in 1..m0 {
        acc += g(k as f64 * h);
    }
    let mut prev = acc * h;
    for _ in 0..12 {
        // add midpoints of the current mesh
        let mut t = 0.5 * h;
        while t < TMAX {
            acc += g(t);
            t += h;
        }
        h *= 0.5;
        let cur = acc * h;
        if (cur - prev).abs() <= 1e-13 * cur.abs().max(1e-2) {
            return 2.0 * cur;
        }
        prev = cur;
    }
    2.0 * prev
}

/// Uniformly sampled even function with 4-point (cubic) local interpolation.
struct UniformTable {
    h: f64,
    vals: Vec<f64>,
}

impl UniformTable {
    fn build(h: f64, len: usize, f: impl Fn(f64) -> f64 + Sync) -> Self {
        use rayon::prelude::*;
        let vals = (0..len)
            .into_par_iter()
            .map(|j| f(j as f64 * h))
            .collect();
        UniformTable { h, vals }
    }

    fn covers(&self, x: f64) -> bool {
        x <= (self.vals.len() - 3) as f64 * self.h
    }

    fn eval(&self, x: f64) -> f64 {
        let s = x / self.h;
        let j = (s as usize).saturating_sub(1).min(self.vals.len() - 4);
        let r = s - j as f64; // in [0,3] near the 4-point stencil
        let v = &self.vals[j..j + 4];
        // Lagrange cubic on nodes 0,1,2,3
        let l0 = -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0;
        let l1 = r * (r - 2.0) * (r - 3.0) / 2.0;
        let l2 = -r * (r - 1.0) * (r - 3.0) / 2.0;
        let l3 = r * (r - 1.0) * (r - 2.0) / 6.0;
        v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
    }
}

/// Tables for powers 1 and 2 on κ ∈ [0, 128], step 1/64 (interpolation error
/// ≲ 1e-9, far below every quadrature tolerance downstream). Built lazily per
/// power so Gaussian-only workloads never pay for them.
static BUMP_TABLE_P1: LazyLock<UniformTable> =
    LazyLock::new(|| UniformTable::build(1.0 / 64.0, 128 * 64 + 4, |k| bump_transform_exact(k, 1)));
static BUMP_TABLE_P2: LazyLock<UniformTable> =
    LazyLock::new(|| UniformTable::build(1.0 / 64.0, 128 * 64 + 4, |k| bump_transform_exact(k, 2)));

/// Fast path for [`bump_transform_exact`]: table lookup with cubic
/// interpolation, falling back to the exact evaluation beyond κ = 128.
pub fn bump_transform(kappa: f64, power: u32) -> f64 {
    let x = kappa.abs();
    let table: &UniformTable = match power {
        1 => &BUMP_TABLE_P1,
        _ => &BUMP_TABLE_P2,
    };
    if table.covers(x) {
        table.eval(x)
    } else {
        bump_transform_exact(x, power)
    }
}

// ---------------------------------------------------------------------------
// per-axis profiles
// ---------------------------------------------------------------------------

/// Shape of one separable factor, centered at the origin with unit peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `e^{-s²/(2w²)}` — entire, transform is again a Gaussian.
    Gaussian { width: f64 },
    /// `e^{-1/(1-(s/R)²)}` on `(-R, R)`, zero outside — compactly supported,
    /// so statements about supports (causal shadows, disjoint labs) are exact.
    Bump { radius: f64 },
}

impl Profile {
    fn scale(&self) -> f64 {
        match *self {
            Profile::Gaussian { width } => width,
            Profile::Bump { radius } => radius,
        }
    }

    fn validate(&self) -> Result<(), SmearingError> {
        let s = self.scale();
        if s.is_finite() && s > 0.0 {
            Ok(())
        } else {
            Err(SmearingError::BadAxisScale(s))
        }
    }

    /// Pointwise value at `s`.
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::Gaussian { width } => (-0.5 * (s / width) * (s / width)).exp(),
            Profile::Bump { radius } => {
                let r2 = (s / radius) * (s / radius);
                if r2 >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }

    /// Bare transform `∫ e^{-iωs} g(s) ds` (real and even for these shapes).
    pub fn transform(&self, omega: f64) -> f64 {
        match *self {
            Profile::Gaussian { width } => {
                width * (2.0 * std::f64::consts::PI).sqrt()
                    * (-0.5 * omega * omega * width * width).exp()
            }
            Profile::Bump { radius } => radius * bump_transform(omega * radius, 1),
        }
    }

    /// Bare transform of the *squared* shape, `∫ e^{-iωs} g(s)² ds`.
    pub fn sq_transform(&self, omega: f64) -> f64 {
        match *self {
            Profile::Gaussian { width } => {
                // g² is a Gaussian of width w/√2
                width * std::f64::consts::PI.sqrt()
                    * (-0.25 * omega * omega * width * width).exp()
            }
            Profile::Bump { radius } => radius * bump_transform(omega * radius, 2),
        }
    }

    /// `∫ g(s) ds`.
    pub fn integral(&self) -> f64 {
        self.transform(0.0)
    }

    /// `∫ g(s)² ds`.
    pub fn l2_sq(&self) -> f64 {
        self.sq_transform(0.0)
    }

    /// Half-width outside which the shape is numerically negligible:
    /// exact for the bump, `8w` for the Gaussian (value `e^{-32} ≈ 1.3e-14`).
    pub fn support_halfwidth(&self) -> f64 {
        match *self {
            Profile::Gaussian { width } => 8.0 * width,
            Profile::Bump { radius } => radius,
        }
    }
}

/// A profile shifted to `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisProfile {
    pub shape: Profile,
    pub center: f64,
}

impl AxisProfile {
    pub fn new(shape: Profile, center: f64) -> Self {
        AxisProfile { shape, center }
    }

    pub fn centered(shape: Profile) -> Self {
        AxisProfile {
            shape,
            center: 0.0,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.shape.value(s - self.center)
    }

    /// `∫ e^{-iωs} g(s - c) ds = e^{-iωc} ĝ(ω)`.
    pub fn transform(&self, omega: f64) -> C64 {
        phase(-omega * self.center) * self.shape.transform(omega)
    }

    /// Same phase law for the squared factor.
    pub fn sq_transform(&self, omega: f64) -> C64 {
        phase(-omega * self.center) * self.shape.sq_transform(omega)
    }
}

fn phase(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

// ---------------------------------------------------------------------------
// the four-axis test function
// ---------------------------------------------------------------------------

/// `f(x) = A g₀(x⁰ - c₀) ∏ₐ gₐ(xᵃ - cₐ)`, the only test-function form the
/// crate needs: every operation used downstream (squaring, translating,
/// transforming, multiplying by a box indicator) preserves separability.
#[derive(Debug, Clone)]
pub struct SmearingFunction {
    amplitude: f64,
    time: AxisProfile,
    space: [AxisProfile; 3],
}

impl SmearingFunction {
    pub fn new(
        amplitude: f64,
        time: AxisProfile,
        space: [AxisProfile; 3],
    ) -> Result<Self, SmearingError> {
        if !amplitude.is_finite() || amplitude == 0.0 {
            return Err(SmearingError::BadAmplitude(amplitude));
        }
        time.shape.validate()?;
        for ax in &space {
            ax.shape.validate()?;
        }
        Ok(SmearingFunction {
            amplitude,
            time,
            space,
        })
    }

    /// Centered Gaussian in every axis: temporal width `tau`, common spatial
    /// width `w`, unit amplitude.
    pub fn gaussian(tau: f64, w: f64) -> Result<Self, SmearingError> {
        SmearingFunction::new(
            1.0,
            AxisProfile::centered(Profile::Gaussian { width: tau }),
            [
                AxisProfile::centered(Profile::Gaussian { width: w }),
                AxisProfile::centered(Profile::Gaussian { width: w }),
                AxisProfile::centered(Profile::Gaussian { width: w }),
            ],
        )
    }

    /// Centered bump in every axis: temporal radius `rt`, spatial radius `rs`.
    pub fn bump(rt: f64, rs: f64) -> Result<Self, SmearingError> {
        SmearingFunction::new(
            1.0,
            AxisProfile::centered(Profile::Bump { radius: rt }),
            [
                AxisProfile::centered(Profile::Bump { radius: rs }),
                AxisProfile::centered(Profile::Bump { radius: rs }),
                AxisProfile::centered(Profile::Bump { radius: rs }),
            ],
        )
    }

    /// Rescales the amplitude so that `∫ f² d⁴x = target`.
    pub fn normalized_sq(mut self, target: f64) -> Result<Self, SmearingError> {
        let mass = self.integral_sq();
        if !mass.is_finite() || mass <= 0.0 || !target.is_finite() || target <= 0.0 {
            return Err(SmearingError::ZeroMass);
        }
        self.amplitude *= (target / mass).sqrt();
        Ok(self)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn time_axis(&self) -> &AxisProfile {
        &self.time
    }

    pub fn space_axis(&self, a: usize) -> &AxisProfile {
        &self.space[a]
    }

    /// Pointwise value.
    pub fn value(&self, x: &FourVector) -> f64 {
        self.amplitude
            * self.time.value(x.t)
            * self.space[0].value(x.x)
            * self.space[1].value(x.y)
            * self.space[2].value(x.z)
    }

    /// `∫ f² d⁴x` (closed form: centers drop out).
    pub fn integral_sq(&self) -> f64 {
        self.amplitude
            * self.amplitude
            * self.time.shape.l2_sq()
            * self.space.iter().map(|a| a.shape.l2_sq()).product::<f64>()
    }

    /// `∫ f d⁴x`.
    pub fn integral(&self) -> f64 {
        self.amplitude
            * self.time.shape.integral()
            * self
                .space
                .iter()
                .map(|a| a.shape.integral())
                .product::<f64>()
    }

    /// Window for `f` itself: `f̂(q) = (2π)⁻² A ĝ₀(-q⁰) ∏ₐ ĝₐ(qᵃ)`.
    pub fn fourier(&self) -> SeparableWindow {
        let pref = self.amplitude / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        let t = self.time;
        let s = self.space;
        SeparableWindow {
            scale: C64::new(pref, 0.0),
            time: Arc::new(move |q0| t.transform(-q0)),
            space: [
                Arc::new(move |q| s[0].transform(q)),
                Arc::new(move |q| s[1].transform(q)),
                Arc::new(move |q| s[2].transform(q)),
            ],
        }
    }

    /// Window for `f²`: same structure with squared-axis transforms and `A²`.
    pub fn fourier_sq(&self) -> SeparableWindow {
        let pref =
            self.amplitude * self.amplitude / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        let t = self.time;
        let s = self.space;
        SeparableWindow {
            scale: C64::new(pref, 0.0),
            time: Arc::new(move |q0| t.sq_transform(-q0)),
            space: [
                Arc::new(move |q| s[0].sq_transform(q)),
                Arc::new(move |q| s[1].sq_transform(q)),
                Arc::new(move |q| s[2].sq_transform(q)),
            ],
        }
    }

    /// `∫_Δ dz⃗ ∫ dt f(t, y⃗ - z⃗)²` — the time-integrated square convolved
    /// with a box indicator. Gaussian axes integrate in closed form (erf);
    /// bump axes by quadrature over the clipped support.
    pub fn smeared_box_overlap(&self, region: &RegionBox, y: [f64; 3]) -> f64 {
        let mut out = self.amplitude * self.amplitude * self.time.shape.l2_sq();
        let lo = region.lower();
        let hi = region.upper();
        for a in 0..3 {
            out *= axis_sq_box_integral(&self.space[a], lo[a], hi[a], y[a]);
        }
        out
    }
}

/// `∫_l^u g²(y - z - c) dz` for one axis profile.
fn axis_sq_box_integral(axis: &AxisProfile, l: f64, u: f64, y: f64) -> f64 {
    let d = y - axis.center;
    match axis.shape {
        Profile::Gaussian { width } => {
            // g² has width w/√2: ∫ = (w√π/2) [erf((d-l)/w) - erf((d-u)/w)]
            use statrs::function::erf::erf;
            0.5 * width
                * std::f64::consts::PI.sqrt()
                * (erf((d - l) / width) - erf((d - u) / width))
        }
        Profile::Bump { radius } => {
            let a = l.max(d - radius);
            let b = u.min(d + radius);
            if a >= b {
                return 0.0;
            }
            let rule = crate::quadrature::gauss_legendre_on(48, a, b);
            rule.integrate(|z| {
                let v = axis.shape.value(d - z);
                v * v
            })
        }
    }
}

// ---------------------------------------------------------------------------
// separable momentum-space windows
// ---------------------------------------------------------------------------

type AxisFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// A function of a four-momentum that factors over axes:
/// `W(q) = scale · T(q⁰) · S₁(q¹) S₂(q²) S₃(q³)`.
///
/// Kernels over momentum pairs exploit the factorization: the spatial
/// factors are tabulated per axis over node pairs and only the time factor
/// is evaluated per pair (energies do not live on a per-axis lattice).
#[derive(Clone)]
pub struct SeparableWindow {
    scale: C64,
    time: AxisFn,
    space: [AxisFn; 3],
}

impl SeparableWindow {
    /// A constant window (useful as a neutral element for products).
    pub fn constant(value: C64) -> Self {
        let one: AxisFn = Arc::new(|_| C64::new(1.0, 0.0));
        SeparableWindow {
            scale: value,
            time: one.clone(),
            space: [one.clone(), one.clone(), one],
        }
    }

    pub fn scale(&self) -> C64 {
        self.scale
    }

    /// Time factor `T(q⁰)` (scale not included).
    pub fn time_factor(&self, q0: f64) -> C64 {
        (self.time)(q0)
    }

    /// Spatial factor `Sₐ(qᵃ)` (scale not included).
    pub fn space_factor(&self, axis: usize, q: f64) -> C64 {
        (self.space[axis])(q)
    }

    /// Full evaluation `W(q)`.
    pub fn eval(&self, q: &FourVector) -> C64 {
        self.scale
            * (self.time)(q.t)
            * (self.space[0])(q.x)
            * (self.space[1])(q.y)
            * (self.space[2])(q.z)
    }

    /// Pointwise product of two windows (stays separable).
    pub fn product(&self, other: &SeparableWindow) -> SeparableWindow {
        let t1 = self.time.clone();
        let t2 = other.time.clone();
        let mk = |a: &AxisFn, b: &AxisFn| -> AxisFn {
            let (a, b) = (a.clone(), b.clone());
            Arc::new(move |q| a(q) * b(q))
        };
        SeparableWindow {
            scale: self.scale * other.scale,
            time: Arc::new(move |q0| t1(q0) * t2(q0)),
            space: [
                mk(&self.space[0], &other.space[0]),
                mk(&self.space[1], &other.space[1]),
                mk(&self.space[2], &other.space[2]),
            ],
        }
    }

    /// Translation of the underlying function by `x`: multiplies the window
    /// by `e^{-i q·x} = e^{+i q⁰ x⁰} ∏ₐ e^{-i qᵃ xᵃ}`.
    pub fn translated(&self, x: &FourVector) -> SeparableWindow {
        let t = self.time.clone();
        let (x0, xs) = (x.t, x.spatial());
        let mk = |a: &AxisFn, sh: f64| -> AxisFn {
            let a = a.clone();
            Arc::new(move |q| a(q) * phase(-q * sh))
        };
        SeparableWindow {
            scale: self.scale,
            time: Arc::new(move |q0| t(q0) * phase(q0 * x0)),
            space: [
                mk(&self.space[0], xs[0]),
                mk(&self.space[1], xs[1]),
                mk(&self.space[2], xs[2]),
            ],
        }
    }
}

/// `sin(x)/x`, stable near 0.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Spatial indicator window of a box: time factor 1 and
/// `Sₐ(q) = ∫_{lₐ}^{uₐ} e^{-i q z} dz = e^{-i q cₐ} Lₐ sinc(q Lₐ / 2)`.
pub fn box_window(region: &RegionBox) -> SeparableWindow {
    let lo = region.lower();
    let hi = region.upper();
    let mk = |a: usize| -> AxisFn {
        let c = 0.5 * (lo[a] + hi[a]);
        let len = hi[a] - lo[a];
        Arc::new(move |q| phase(-q * c) * (len * sinc(0.5 * q * len)))
    };
    SeparableWindow {
        scale: C64::new(1.0, 0.0),
        time: Arc::new(|_| C64::new(1.0, 0.0)),
        space: [mk(0), mk(1), mk(2)],
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // pins recorded at oracle precision
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn bump_transform_reference_values() {
        // frozen against an independent 60-digit evaluation
        let pins1 = [
            (0.0, 0.4439938161680794378230489),
            (1.0, 0.4098591323903443535310912),
            (3.7, 0.1147925444719555681735337),
            (10.0, 0.01462308665513270861517789),
        ];
        let pins2 = [
            (0.0, 0.1330861208449942715569473),
            (1.0, 0.1256021427277972018037707),
            (3.7, 0.05492695342605066607583965),
            (10.0, -0.001319836279733197370961156),
        ];
        for (k, v) in pins1 {
            let got = bump_transform_exact(k, 1);
            assert!((got - v).abs() < 1e-12, "power 1, κ={k}: {got} vs {v}");
        }
        for (k, v) in pins2 {
            let got = bump_transform_exact(k, 2);
            assert!((got - v).abs() < 1e-12, "power 2, κ={k}: {got} vs {v}");
        }
    }

    #[test]
    fn bump_table_matches_exact_evaluation() {
        for i in 0..300 {
            let k = 0.21 * i as f64; // up to 62.8, covers the oscillatory range
            for power in [1u32, 2] {
                let fast = bump_transform(k, power);
                let exact = bump_transform_exact(k, power);
                assert!(
                    (fast - exact).abs() < 1e-9,
                    "κ={k}, power={power}: {fast} vs {exact}"
                );
            }
        }
        // beyond the table range the fallback must kick in seamlessly
        let far = bump_transform(300.0, 1);
        assert!((far - bump_transform_exact(300.0, 1)).abs() < 1e-13);
    }

    #[test]
    fn bump_transform_agrees_with_direct_quadrature() {
        // independent route: plain Gauss-Legendre on the original interval
        let rule = gauss_legendre_on(200, -1.0, 1.0);
        for k in [0.5, 2.0, 7.3] {
            let direct = rule.integrate(|s| {
                let b = Profile::Bump { radius: 1.0 }.value(s);
                (k * s).cos() * b
            });
            assert!(close(direct, bump_transform_exact(k, 1), 1e-10));
        }
    }

    #[test]
    fn gaussian_transform_matches_quadrature() {
        let p = Profile::Gaussian { width: 0.8 };
        let rule = gauss_legendre_on(120, -8.0, 8.0);
        for om in [0.0, 0.7, 2.1, 5.0] {
            let direct = rule.integrate(|s| (om * s).cos() * p.value(s));
            assert!(close(direct, p.transform(om), 1e-12), "ω={om}");
            let direct_sq = rule.integrate(|s| (om * s).cos() * p.value(s) * p.value(s));
            assert!(close(direct_sq, p.sq_transform(om), 1e-12), "ω={om} (sq)");
        }
    }

    #[test]
    fn bump_l2_mass_matches_pin() {
        let p = Profile::Bump { radius: 1.0 };
        assert!((p.l2_sq() - 0.1330861208449942715569473).abs() < 1e-12);
        // scaling: radius R multiplies both integrals by R
        let p3 = Profile::Bump { radius: 3.0 };
        assert!(close(p3.l2_sq(), 3.0 * p.l2_sq(), 1e-13));
        assert!(close(p3.integral(), 3.0 * p.integral(), 1e-13));
    }

    #[test]
    fn axis_center_shows_up_as_pure_phase() {
        let ax = AxisProfile::new(Profile::Gaussian { width: 1.3 }, 0.45);
        let om = 1.7;
        let shifted = ax.transform(om);
        let base = ax.shape.transform(om);
        let expect = C64::new(0.0, -om * 0.45).exp() * base;
        assert!((shifted - expect).norm() < 1e-14);
        assert!((shifted.norm() - base.abs()).abs() < 1e-14);
    }

    #[test]
    fn normalized_gaussian_window_closed_form() {
        // with ∫f² = 1, the f² window must be (2π)⁻² e^{-q0²τ²/4 - |q⃗|²w²/4}
        let (tau, w) = (1.0, 1.0);
        let f = SmearingFunction::gaussian(tau, w)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        assert!((f.integral_sq() - 1.0).abs() < 1e-13);
        let win = f.fourier_sq();
        let q = FourVector::new(0.35, -0.2, 0.9, 0.1);
        let got = win.eval(&q);
        let pref = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        let expect = pref
            * (-q.t * q.t * tau * tau / 4.0
                - (q.x * q.x + q.y * q.y + q.z * q.z) * w * w / 4.0)
                .exp();
        assert!((got.re - expect).abs() < 1e-14 && got.im.abs() < 1e-16);
    }

    #[test]
    fn box_window_matches_direct_integral() {
        let region = RegionBox::new([-0.4, -0.5, -0.3], [0.7, 0.5, 0.6]).unwrap();
        let win = box_window(&region);
        let q = [1.3, -0.7, 0.0];
        let mut expect = C64::new(1.0, 0.0);
        #[allow(clippy::needless_range_loop)] // axis index feeds box and q
        for a in 0..3 {
            let rule = gauss_legendre_on(60, region.lower()[a], region.upper()[a]);
            let mut acc = C64::new(0.0, 0.0);
            for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
                acc += C64::new(0.0, -q[a] * z).exp() * w;
            }
            expect *= acc;
        }
        let got = win.eval(&FourVector::new(9.9, q[0], q[1], q[2])); // time factor is 1
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn translation_is_a_pure_phase() {
        let f = SmearingFunction::gaussian(0.6, 1.1).unwrap();
        let x = FourVector::new(0.3, 0.4, -0.1, 0.25);
        let win = f.fourier_sq();
        let tr = win.translated(&x);
        let q = FourVector::new(-0.8, 0.55, 1.2, -0.4);
        let qdotx = -q.t * x.t + q.x * x.x + q.y * x.y + q.z * x.z;
        let expect = win.eval(&q) * C64::new(0.0, -qdotx).exp();
        assert!((tr.eval(&q) - expect).norm() < 1e-14);
    }

    #[test]
    fn window_product_is_pointwise() {
        let f = SmearingFunction::gaussian(0.5, 0.9).unwrap();
        let region = RegionBox::centered_cube(0.5).unwrap();
        let combined = f.fourier_sq().product(&box_window(&region));
        let q = FourVector::new(0.2, -1.0, 0.3, 0.8);
        let expect = f.fourier_sq().eval(&q) * box_window(&region).eval(&q);
        assert!((combined.eval(&q) - expect).norm() < 1e-14);
    }

    #[test]
    fn smeared_box_overlap_gaussian_vs_quadrature() {
        let f = SmearingFunction::gaussian(0.7, 1.2)
            .unwrap()
            .normalized_sq(1.0)
            .unwrap();
        let region = RegionBox::new([-0.6, -0.2, -0.9], [0.4, 0.8, 0.1]).unwrap();
        let y = [0.25, -0.4, 0.3];
        let closed = f.smeared_box_overlap(&region, y);
        // direct: per-axis quadrature of the squared profile over the box
        let mut direct = f.amplitude() * f.amplitude() * f.time_axis().shape.l2_sq();
        #[allow(clippy::needless_range_loop)] // axis index feeds box and y
        for a in 0..3 {
            let rule = gauss_legendre_on(80, region.lower()[a], region.upper()[a]);
            direct *= rule.integrate(|z| {
                let v = f.space_axis(a).value(y[a] - z);
                v * v
            });
        }
        assert!(close(closed, direct, 1e-11), "{closed} vs {direct}");
    }

    #[test]
    fn smeared_box_overlap_bump_axes() {
        let f = SmearingFunction::bump(0.5, 1.5).unwrap();
        let region = RegionBox::centered_cube(1.0).unwrap();
        // far outside the support: exactly zero
        assert_eq!(f.smeared_box_overlap(&region, [5.0, 0.0, 0.0]), 0.0);
        // at the center: positive, bounded by the full-space mass
        let v = f.smeared_box_overlap(&region, [0.0, 0.0, 0.0]);
        let full = f.integral_sq();
        assert!(v > 0.0 && v < full);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(SmearingFunction::gaussian(0.0, 1.0).is_err());
        assert!(SmearingFunction::gaussian(1.0, -2.0).is_err());
        let f = SmearingFunction::gaussian(1.0, 1.0).unwrap();
        assert!(matches!(
            SmearingFunction::new(f64::NAN, *f.time_axis(), [*f.space_axis(0); 3]),
            Err(SmearingError::BadAmplitude(_))
        ));
    }

    proptest! {
        /// Windows of real functions obey W(-q) = conj(W(q)).
        #[test]
        fn window_conjugate_symmetry(
            q0 in -3.0f64..3.0, qx in -3.0f64..3.0, c in -1.0f64..1.0, x0 in -1.0f64..1.0,
        ) {
            let f = SmearingFunction::new(
                0.7,
                AxisProfile::new(Profile::Gaussian { width: 0.8 }, c),
                [
                    AxisProfile::new(Profile::Bump { radius: 1.2 }, -c),
                    AxisProfile::centered(Profile::Gaussian { width: 1.0 }),
                    AxisProfile::centered(Profile::Bump { radius: 0.7 }),
                ],
            ).unwrap();
            let win = f.fourier().translated(&FourVector::new(x0, 0.1, -0.3, 0.0));
            let q = FourVector::new(q0, qx, 0.4, -1.1);
            let minus_q = FourVector::new(-q0, -qx, -0.4, 1.1);
            let (a, b) = (win.eval(&minus_q), win.eval(&q).conj());
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }

        /// ∫f² scales with the square of the amplitude; normalization hits any target.
        #[test]
        fn normalization_reaches_target(t in 0.2f64..3.0, s in 0.2f64..3.0, target in 0.1f64..5.0) {
            let f = SmearingFunction::gaussian(t, s).unwrap().normalized_sq(target).unwrap();
            prop_assert!((f.integral_sq() - target).abs() < 1e-10 * target);
        }
    }
}
