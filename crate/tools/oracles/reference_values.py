#!/usr/bin/env python3
"""Independent reference evaluations used to freeze expected values in the Rust tests.

Everything here is written directly from the mathematical definitions used by the
library (metric signature (-,+,+,+), Fourier convention
f_hat(q) = (2pi)^-2 * integral exp(-i q.x) f(x) d^4x with q.x = -q0 x0 + qvec.xvec,
invariant measure d mu_m = d^3p / E(p), E(p) = sqrt(m^2 + |p|^2)), with no code
shared with the library.  Run once; the printed FROZEN lines are transcribed into
the test suite.

Usage:  python3 reference_values.py > pinned.txt
"""

import numpy as np
import mpmath as mp

C = 2.0 * np.pi


def glnodes(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def grid3(n, P):
    """Tensor Gauss-Legendre grid on [-P,P]^3: returns (N,3) nodes and (N,) weights."""
    x, w = glnodes(n, -P, P)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    return X, W


def grid3m(n, P):
    """Sinh-mapped tensor grid: p = sinh(t), t Gauss-Legendre on [-asinh P, asinh P].

    The map moves the E(p) = sqrt(1+p^2) branch points (p = +-i, i.e. t = +-i pi/2)
    far from the real axis, restoring fast geometric convergence for the 6D
    integrals.  Weights absorb dp = cosh(t) dt per axis.
    """
    T = np.arcsinh(P)
    t, w = glnodes(n, -T, T)
    x = np.sinh(t)
    w = w * np.cosh(t)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    return X, W


def energy(p, m):
    return np.sqrt(m * m + np.sum(p * p, axis=-1))


def frozen(label, value):
    if isinstance(value, complex):
        print(f"FROZEN {label} = {value.real:.17e} {value.imag:+.17e}i")
    else:
        print(f"FROZEN {label} = {value:.17e}")


# ----------------------------------------------------------------------------
# 1. Q3 function: closed form at reference points (30 digits), series coefficients
# ----------------------------------------------------------------------------
mp.mp.dps = 60


def q3_mp(x):
    x = mp.mpf(x)
    return (mp.sqrt(1 - 1 / x**2) * (1 - 1 / (2 * x**2))
            - mp.log(x + mp.sqrt(x**2 - 1)) / (2 * x**4))


print("# --- Q3 closed form, 30 significant digits (mpmath, 60 dps) ---")
for xv in ["1.000000000001", "1.00000001", "1.000001", "1.0001", "1.001",
           "1.01", "1.1", "1.5", "2.0", "5.0", "10.0", "100.0", "1000000.0"]:
    print(f"FROZEN30 q3({xv}) = {mp.nstr(q3_mp(mp.mpf(xv)), 30)}")
print(f"FROZEN30 one_minus_q3(1000000.0) = {mp.nstr(1 - q3_mp(mp.mpf('1000000.0')), 30)}")

# Series Q3(1+t) = t^(3/2) * sum_k r_k t^k.  Leading r_0 = 8*sqrt(2)/3 (exact).
# Fit r_k on Chebyshev nodes of [1e-8, 0.08] at 60 dps (Vandermonde solve).
deg = 10
tmax = mp.mpf("0.08")
nodes = [tmax / 2 * (1 + mp.cos(mp.pi * (2 * j + 1) / (2 * (deg + 1)))) + mp.mpf("1e-9")
         for j in range(deg + 1)]
A = mp.matrix(deg + 1, deg + 1)
rhs = mp.matrix(deg + 1, 1)
for i, t in enumerate(nodes):
    for j in range(deg + 1):
        A[i, j] = t**j
    rhs[i] = q3_mp(1 + t) / t**mp.mpf("1.5")
coef = mp.lu_solve(A, rhs)
print("# --- Q3 series Q3(1+t) = t^(3/2) * (r0 + r1 t + ...), fitted 60 dps ---")
print(f"# r0 exact check: 8*sqrt(2)/3 = {mp.nstr(8 * mp.sqrt(2) / 3, 25)}")
for j in range(deg + 1):
    print(f"FROZEN30 q3_series_r{j} = {mp.nstr(coef[j], 25)}")
# residual of fit at a midpoint
tt = mp.mpf("0.013")
ser = sum(coef[j] * tt**j for j in range(deg + 1)) * tt**mp.mpf("1.5")
print(f"# series residual at t=0.013: {mp.nstr(abs(ser - q3_mp(1 + tt)) / q3_mp(1 + tt), 5)}")

# ----------------------------------------------------------------------------
# 2. Bump profile Fourier transform spot values (30 digits).
#    chi(s) = exp(-1/(1-s^2)) on (-1,1);  chi_hat(w) = int_-1^1 exp(-i w s) chi ds
#    (real and even in w).  Also the squared profile chi^2 (exponent doubled).
# ----------------------------------------------------------------------------
print("# --- bump transforms (mpmath quad, 60 dps) ---")


def bump_ft(w, power):
    f = lambda s: mp.exp(-power / (1 - s * s)) * mp.cos(w * s)
    return 2 * mp.quad(f, [0, mp.mpf(1)])


for w in ["0.0", "1.0", "3.7", "10.0"]:
    print(f"FROZEN30 bump_ft({w}) = {mp.nstr(bump_ft(mp.mpf(w), 1), 25)}")
    print(f"FROZEN30 bump_sq_ft({w}) = {mp.nstr(bump_ft(mp.mpf(w), 2), 25)}")
print(f"FROZEN30 bump_l2sq = {mp.nstr(2 * mp.quad(lambda s: mp.exp(-2 / (1 - s * s)), [0, 1]), 25)}")

# ----------------------------------------------------------------------------
# 3. Gaussian packet measure norm and boosted energy expectation (float64 GL).
#    psi(p) = exp(-|p - c|^2 / 2), c = (0.3, 0, 0), m = 1.
# ----------------------------------------------------------------------------
m = 1.0
c_pack = np.array([0.3, 0.0, 0.0])


def gauss_norm_sq(n, P):
    X, W = grid3(n, P)
    E = energy(X, m)
    d = X - c_pack
    amp2 = np.exp(-np.sum(d * d, axis=-1))
    return float(np.sum(amp2 / E * W))


n2_a, n2_b = gauss_norm_sq(140, 9.0), gauss_norm_sq(180, 9.5)
print("# --- Gaussian packet, c=(0.3,0,0), w=1, m=1 ---")
frozen("gauss_norm_sq", n2_b)
print(f"# refinement delta: {abs(n2_a - n2_b):.3e}")

rap = 0.3
u_boost = np.array([np.cosh(rap), np.sinh(rap), 0.0, 0.0])  # future unit timelike


def h_u_expect(n, P):
    X, W = grid3(n, P)
    E = energy(X, m)
    d = X - c_pack
    amp2 = np.exp(-np.sum(d * d, axis=-1))
    # E_u(p) = -u.p = u0 E - uvec.pvec
    Eu = u_boost[0] * E - X @ u_boost[1:]
    return float(np.sum(amp2 * Eu / E * W))


hu_a, hu_b = h_u_expect(140, 9.0), h_u_expect(180, 9.5)
frozen("gauss_h_u_expect_normalized", hu_b / n2_b)
print(f"# refinement delta: {abs(hu_a / n2_a - hu_b / n2_b):.3e}")

# ----------------------------------------------------------------------------
# 4. One-particle POVM probability, slow momentum-path oracle.
#    psi(p) = N exp(-|p|^2/2) (normalized in d mu), m = 1, u = u_Sigma = e0,
#    f separable Gaussian, temporal width tau=1, spatial widths 1, int f^2 = 1,
#    Delta = [-0.5, 0.5]^3, epsilon = 0 and epsilon in {1e-2, 1e-4, 1e-6}.
#
#    P = (1/4pi) * 2 Re T3,
#    T3 = sum_{p,k} w2hat(p - k) * Ibox(kvec - pvec) * t00(p,k)
#         * conj(psit(p)) psit(k) dmu(p) dmu(k),   psit = psi / sqrt(E + eps),
#    w2hat(q) = (2pi)^-2 exp(-q0^2 tau^2/4 - |qvec|^2 w^2/4)  (f^2 widths),
#    t00(p,k) = (E_p E_k + pvec.kvec + m^2)/2,
#    Ibox(v) = prod_a (exp(i v_a u_a) - exp(i v_a l_a)) / (i v_a).
# ----------------------------------------------------------------------------
tau_f = 1.0
w_f = 1.0
lo, hi = -0.5, 0.5


def box_factor(v):
    out = np.empty_like(v, dtype=np.complex128)
    small = np.abs(v) < 1e-12
    vv = np.where(small, 1.0, v)
    out = (np.exp(1j * vv * hi) - np.exp(1j * vv * lo)) / (1j * vv)
    out[small] = hi - lo
    return out


def povm_prob(n, P, eps):
    X, W = grid3m(n, P)
    E = energy(X, m)
    amp = np.exp(-0.5 * np.sum(X * X, axis=-1))
    nrm = np.sqrt(np.sum(amp * amp / E * W))
    psit = amp / nrm / np.sqrt(E + eps)
    wmu = W / E
    T3 = 0.0 + 0.0j
    B = 256
    for i0 in range(0, len(E), B):
        sl = slice(i0, min(i0 + B, len(E)))
        Ep = E[sl][:, None]
        dv = X[sl][:, None, :] - X[None, :, :]       # p - k, (B, N, 3)
        q0 = Ep - E[None, :]
        w2 = np.exp(-q0 * q0 * tau_f**2 / 4.0
                    - np.sum(dv * dv, axis=-1) * w_f**2 / 4.0) / C**2
        ib = box_factor(-dv[..., 0]) * box_factor(-dv[..., 1]) * box_factor(-dv[..., 2])
        t00 = 0.5 * (Ep * E[None, :] + X[sl] @ X.T + m * m)
        T3 += np.sum(w2 * ib * t00
                     * (psit[sl] * wmu[sl])[:, None] * (psit * wmu)[None, :])
    return float(np.real(T3) / C)  # (1/4pi)*2Re = Re/(2pi)


print("# --- POVM probability pin: std Gaussian, unit box, m=1 ---")
for eps, tag in [(0.0, "eps0"), (1e-2, "eps1e2"), (1e-4, "eps1e4"), (1e-6, "eps1e6")]:
    pa = povm_prob(20, 8.0, eps)
    pb = povm_prob(24, 8.0, eps)
    frozen(f"povm_prob_{tag}", pb)
    print(f"# refinement delta 20->24 nodes: {abs(pa - pb):.3e}")

# ----------------------------------------------------------------------------
# 5. Newton-Wigner expectation pins (analytic-derivative quadrature).
#    g = psi / sqrt(E);  <N_x> = i int conj(g) d/dp_x g d^3p.
#    (a) psi = exp(-|p|^2/2) e^{i b p_x}:             <N_x> = -b exactly.
#    (b) psi = exp(-|p|^2/2) e^{i(b p_x + beta p_x^3)}: <N_x> = -b - 3 beta <p_x^2>,
#        <p_x^2> = int p_x^2 |psi|^2 dmu / int |psi|^2 dmu.
# ----------------------------------------------------------------------------
b_lin, beta_cub = 0.7, 0.1


def px2_weighted(n, P):
    X, W = grid3(n, P)
    E = energy(X, m)
    a2 = np.exp(-np.sum(X * X, axis=-1))
    num = np.sum(X[:, 0] ** 2 * a2 / E * W)
    den = np.sum(a2 / E * W)
    return float(num / den)


px2_a, px2_b = px2_weighted(140, 9.0), px2_weighted(180, 9.5)
print("# --- Newton-Wigner pins ---")
frozen("nw_linear_phase_expect", -b_lin)
frozen("nw_cubic_phase_expect", -b_lin - 3 * beta_cub * px2_b)
frozen("px2_dmu_weighted", px2_b)
print(f"# refinement delta: {abs(px2_a - px2_b):.3e}")

# ----------------------------------------------------------------------------
# 6. Vacuum <-> two-particle matrix element of the contracted smeared tensor.
#    V = (sqrt2 / 4pi) sum_{p,k} w2hat(-p-k) * [u u' contraction of t(p,-k)]
#        * Psi2(p,k) dmu dmu,
#    t_{mu nu}(p,-k) contracted:  u.k = -u0 E_k + uvec.kvec etc.
#      u^mu u'^nu t_mn(p,-k) = -[ (u.k)(u'.p) + (u.p)(u'.k) + (u.u')(-p.k + m^2) ]/2
#    (substitute q = -k into the symmetric t(p,q); cross-checked against the
#    canonical a a coefficient of :T_00:, which is [m^2 - E_p E_k - pvec.kvec]/2)
#    Psi2 = nu * (a(p) b(k) + b(p) a(k))/2, normalized.
#    a: Gaussian c=(0.5,0,0) w=1;  b: c=(-0.3,0.2,0) w=0.8.
#    f: tau=0.5, spatial widths 1, int f^2 = 1.  u = e0, u' = boost-y rapidity 0.25.
# ----------------------------------------------------------------------------
tau2, w2s = 0.5, 1.0
ca = np.array([0.5, 0.0, 0.0])
cb = np.array([-0.3, 0.2, 0.0])
wa, wb = 1.0, 0.8
u0v = np.array([1.0, 0.0, 0.0, 0.0])
rap2 = 0.25
upv = np.array([np.cosh(rap2), 0.0, np.sinh(rap2), 0.0])


def amp_a(X):
    d = X - ca
    return np.exp(-np.sum(d * d, axis=-1) / (2 * wa * wa))


def amp_b(X):
    d = X - cb
    return np.exp(-np.sum(d * d, axis=-1) / (2 * wb * wb))


def pair3(n, P, f, g):
    X, W = grid3(n, P)
    E = energy(X, m)
    return float(np.sum(f(X) * g(X) / E * W))


def mdot(u, E, X):
    # u . p with p = (E, X): -u0 E + uvec.X
    return -u[0] * E + X @ u[1:]


def vac2_element(n, P):
    naa = pair3(180, 9.5, amp_a, amp_a)
    nbb = pair3(180, 9.5, amp_b, amp_b)
    nab = pair3(180, 9.5, amp_a, amp_b)
    norm2 = 0.5 * (naa * nbb + nab * nab)
    nu = 1.0 / np.sqrt(norm2)
    X, W = grid3m(n, P)
    E = energy(X, m)
    wmu = W / E
    Aa, Bb = amp_a(X), amp_b(X)
    uu = -np.dot(u0v, upv) + 2 * u0v[0] * upv[0]  # u.u' Minkowski = -u0 u'0 + uvec.u'vec
    uu = -u0v[0] * upv[0] + np.dot(u0v[1:], upv[1:])
    V = 0.0 + 0.0j
    B = 256
    for i0 in range(0, len(E), B):
        sl = slice(i0, min(i0 + B, len(E)))
        Ep = E[sl][:, None]
        q0 = Ep + E[None, :]
        sv = X[sl][:, None, :] + X[None, :, :]
        w2 = np.exp(-q0 * q0 * tau2**2 / 4.0
                    - np.sum(sv * sv, axis=-1) * w2s**2 / 4.0) / C**2
        ukp = mdot(u0v, E[None, :], X)[None, :]      # u.k
        up_p = mdot(upv, Ep[:, 0], X[sl])[:, None]   # u'.p
        up_k = mdot(upv, E[None, :], X)[None, :]     # u'.k
        u_p = mdot(u0v, Ep[:, 0], X[sl])[:, None]    # u.p
        pk = -Ep * E[None, :] + X[sl] @ X.T          # p.k
        tc = -0.5 * (ukp * up_p + u_p * up_k + uu * (-pk + m * m))
        psi2 = 0.5 * nu * (Aa[sl][:, None] * Bb[None, :] + Bb[sl][:, None] * Aa[None, :])
        V += np.sum(w2 * tc * psi2 * (wmu[sl])[:, None] * wmu[None, :])
    return complex(np.sqrt(2.0) / (4 * np.pi) * V)


print("# --- vacuum <-> 2-particle contracted element pin ---")
va = vac2_element(24, 7.5)
vb = vac2_element(28, 7.5)
frozen("vac2_element", vb)
print(f"# refinement delta 24->28: {abs(va - vb):.3e}")

# ----------------------------------------------------------------------------
# 7. Pauli-Jordan pin.  E(f,g) = -2 Im <kappa f | kappa g>,
#    <kf|kg> = 2pi int conj(fhat(E,p)) ghat(E,p) dmu(p).
#    Gaussian profiles (f at origin; g translated by x_g):
#    fhat0(q) = A tau w1 w2 w3 exp(-q0^2 tau^2/2 - sum q_a^2 w_a^2 / 2),
#    ghat(q) = exp(-i q.x_g) ghat0(q),  q.x = -q0 x0 + qvec.xvec.
# ----------------------------------------------------------------------------
tau_pj, w_pj = 0.4, 0.7
A_pj = 1.0 / np.sqrt(tau_pj * np.sqrt(np.pi) * (w_pj * np.sqrt(np.pi)) ** 3)
xg_time = np.array([1.5, 0.2, 0.1, -0.3])
xg_space = np.array([0.2, 3.5, 0.0, 0.0])


def pj_pair(n, P, xg):
    X, W = grid3(n, P)
    E = energy(X, m)
    fh = A_pj * tau_pj * w_pj**3 * np.exp(-E * E * tau_pj**2 / 2
                                          - np.sum(X * X, axis=-1) * w_pj**2 / 2)
    phase = np.exp(-1j * (-E * xg[0] + X @ xg[1:]))
    gh = fh * phase
    ip = C * np.sum(np.conj(fh) * gh / E * W)
    nf = np.sqrt(C * np.sum(fh * fh / E * W))
    return -2.0 * float(np.imag(ip)), float(nf)


print("# --- Pauli-Jordan pins (Gaussian profiles, tau=0.4, w=0.7, unit L2^2) ---")
et_a = pj_pair(140, 10.0, xg_time)
et_b = pj_pair(180, 10.5, xg_time)
frozen("pj_timelike", et_b[0])
frozen("kappa_norm_f", et_b[1])
print(f"# refinement delta: {abs(et_a[0] - et_b[0]):.3e}")
frozen("pj_spacelike_abs", abs(pj_pair(180, 10.5, xg_space)[0]))

# ----------------------------------------------------------------------------
# 8. Local Hamiltonian matrix element pin (momentum route, exact box x-integral).
#    Modes: g1(p) = exp(-|p-c1|^2/2) e^{-i p.x1}, c1 = (0.2,0,0), x1 = (0.3,-0.2,0.1)
#           g2(p) = exp(-|p-c2|^2/(2*1.2^2)) e^{-i p.x2}, c2 = (-0.1,0.3,0),
#           x2 = (-0.2,0.4,0.0); both normalized in dmu.
#    f: tau=0.6, spatial widths 1, int f^2 = 1.  Window W(q) = w2hat(q) * Ibox(qvec)
#    with Ibox(v) = prod_a (exp(-i v_a u_a) - exp(-i v_a l_a)) / (-i v_a),
#    Delta = [-0.4,0.7] x [-0.5,0.5] x [-0.3,0.6],  u = u_Sigma = e0, eta = 0.
#    M12 = (1/4pi) [ sum w2hat(p-k) Ibox(p-k) conj(g1(p)) g2(k) t00(p,k)
#                  + sum w2hat(k-p) Ibox(k-p) conj(g1(k)) g2(p) t00(p,k) ] dmu dmu
# ----------------------------------------------------------------------------
tau_lh = 0.6
c1 = np.array([0.2, 0.0, 0.0])
c2 = np.array([-0.1, 0.3, 0.0])
x1 = np.array([0.3, -0.2, 0.1])
x2 = np.array([-0.2, 0.4, 0.0])
w_g2 = 1.2
blo = np.array([-0.4, -0.5, -0.3])
bhi = np.array([0.7, 0.5, 0.6])


def mode1(X):
    d = X - c1
    return np.exp(-np.sum(d * d, axis=-1) / 2) * np.exp(-1j * (X @ x1))


def mode2(X):
    d = X - c2
    return np.exp(-np.sum(d * d, axis=-1) / (2 * w_g2**2)) * np.exp(-1j * (X @ x2))


def box_factor_neg(v, l, h):
    small = np.abs(v) < 1e-12
    vv = np.where(small, 1.0, v)
    out = (np.exp(-1j * vv * h) - np.exp(-1j * vv * l)) / (-1j * vv)
    out[small] = h - l
    return out


def local_ham_elem(n, P):
    X, W = grid3m(n, P)
    E = energy(X, m)
    wmu = W / E
    g1 = mode1(X)
    g2 = mode2(X)
    g1 = g1 / np.sqrt(np.sum(np.abs(g1) ** 2 / E * W))
    g2 = g2 / np.sqrt(np.sum(np.abs(g2) ** 2 / E * W))
    M = 0.0 + 0.0j
    B = 256
    for i0 in range(0, len(E), B):
        sl = slice(i0, min(i0 + B, len(E)))
        Ep = E[sl][:, None]
        q0 = Ep - E[None, :]
        dv = X[sl][:, None, :] - X[None, :, :]
        w2 = np.exp(-q0 * q0 * tau_lh**2 / 4.0
                    - np.sum(dv * dv, axis=-1) / 4.0) / C**2
        ib = (box_factor_neg(dv[..., 0], blo[0], bhi[0])
              * box_factor_neg(dv[..., 1], blo[1], bhi[1])
              * box_factor_neg(dv[..., 2], blo[2], bhi[2]))
        t00 = 0.5 * (Ep * E[None, :] + X[sl] @ X.T + m * m)
        # term 3: conj(g1(p)) g2(k) with window at q = p - k
        M += np.sum(w2 * ib * t00
                    * (np.conj(g1[sl]) * wmu[sl])[:, None] * (g2 * wmu)[None, :])
        # term 4: conj(g1(k)) g2(p) with window at q = k - p
        M += np.sum(np.conj(w2 * ib) * t00
                    * (g2[sl] * wmu[sl])[:, None] * (np.conj(g1) * wmu)[None, :])
    return complex(M / (4 * np.pi))


print("# --- local Hamiltonian element pin ---")
ma = local_ham_elem(22, 8.0)
mb = local_ham_elem(26, 8.0)
frozen("local_ham_m12", mb)
print(f"# refinement delta 22->26: {abs(ma - mb):.3e}")

# ----------------------------------------------------------------------------
# 9. Contracted diagonal element at a translated point (full phase check).
#    T_c(x) = u^mu u'^nu <psi| T_mn[f^2_x] |psi>, psi = Gaussian c=(0.3,0,0) w=1
#    (normalized), u = e0, u' = boost-y(0.25), f: tau=1, w=1, int f^2 = 1,
#    x = (0.3, 0.4, -0.1, 0.25).  Translation: window *= exp(-i q.x).
#    Must be real up to quadrature error.
# ----------------------------------------------------------------------------
xtr = np.array([0.3, 0.4, -0.1, 0.25])


def diag_translated(n, P):
    X, W = grid3m(n, P)
    E = energy(X, m)
    wmu = W / E
    d = X - c_pack
    amp = np.exp(-0.5 * np.sum(d * d, axis=-1))
    amp = amp / np.sqrt(np.sum(amp * amp / E * W))
    V = 0.0 + 0.0j
    B = 256
    for i0 in range(0, len(E), B):
        sl = slice(i0, min(i0 + B, len(E)))
        Ep = E[sl][:, None]
        q0 = Ep - E[None, :]
        dv = X[sl][:, None, :] - X[None, :, :]
        w2 = np.exp(-q0 * q0 * tau_f**2 / 4.0
                    - np.sum(dv * dv, axis=-1) * w_f**2 / 4.0) / C**2
        # translation phase exp(-i q.x), q.x = -q0 x0 + qvec.xvec
        ph = np.exp(-1j * (-q0 * xtr[0] + dv @ xtr[1:]))
        # contraction u^mu u'^nu t_mn(p,k) = [ (u.k)(u'.p) + (u.p)(u'.k) - (u.u')(p.k + m^2) ] / 2
        ukp = mdot(u0v, E[None, :], X)[None, :]
        up_p = mdot(upv, Ep[:, 0], X[sl])[:, None]
        u_p = mdot(u0v, Ep[:, 0], X[sl])[:, None]
        up_k = mdot(upv, E[None, :], X)[None, :]
        uu = -u0v[0] * upv[0] + np.dot(u0v[1:], upv[1:])
        pk = -Ep * E[None, :] + X[sl] @ X.T
        tc = 0.5 * (ukp * up_p + u_p * up_k - uu * (pk + m * m))
        # term 3 and term 4
        V += np.sum(w2 * ph * tc * (np.conj(amp[sl]) * wmu[sl])[:, None] * (amp * wmu)[None, :])
        V += np.sum(np.conj(w2 * ph) * tc * (amp[sl] * wmu[sl])[:, None] * (np.conj(amp) * wmu)[None, :])
    return complex(V / (4 * np.pi))


print("# --- translated contracted diagonal element pin ---")
da = diag_translated(20, 8.0)
db = diag_translated(24, 8.0)
frozen("diag_translated", db)
print(f"# refinement delta 20->24: {abs(da - db):.3e}")
print("done")
