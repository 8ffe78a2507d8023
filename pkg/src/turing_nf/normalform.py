"""Lattice phase/complement coordinates for perturbations of a periodic pattern.

A perturbation v on J concatenated cells is written per cell as

    v_j = W_j + H_j + u_*(x - θ_j) - u_*(x),

with a scalar phase θ_j and a complement W_j orthogonal to u_ad. The
corrector H_j couples neighbouring phases through a smooth odd cutoff φ
and an odd bump ψ with ⟨ψ, u_ad⟩ = 1. The linearisation at 0 is
(θ, W) ↦ W + E∗θ with the three-point stencil (E_{-1}, E_0, E_1).

Arrays: a chopped field is (J, N, n); the whole-domain field is (J·N, n) on
x ∈ [-π, 2πJ - π), cell j being [2πj - π, 2πj + π).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf
from scipy.sparse.linalg import LinearOperator, gmres

from . import fieldops as fo
from .errors import (AlignmentError, ConstraintViolation, CorrectorError,
                     NoConvergence, OutOfRegime)

TWO_PI = 2.0 * np.pi
# truncated Gaussians are cut at this many standard deviations (tail ~ 2e-16)
_CUT = 8.5


# -- chopping ------------------------------------------------------------------

def chop(V, J):
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] % J:
        raise AlignmentError(f"{V.shape[0]} grid points do not split into {J} cells")
    return V.reshape(J, V.shape[0] // J, V.shape[1])


def unchop(c):
    c = np.asarray(c)
    return c.reshape(c.shape[0] * c.shape[1], c.shape[2])


@dataclass
class LatticeState:
    theta: np.ndarray      # (J,)
    W: np.ndarray          # (J, N, n)

    @property
    def J(self):
        return len(self.theta)

    @classmethod
    def zeros(cls, J, N, n):
        return cls(np.zeros(J), np.zeros((J, N, n)))

    def __add__(self, other):
        return LatticeState(self.theta + other.theta, self.W + other.W)

    def __sub__(self, other):
        return LatticeState(self.theta - other.theta, self.W - other.W)

    def scaled(self, a):
        return LatticeState(a * self.theta, a * self.W)

    def norm(self):
        return max(np.abs(self.theta).max(), np.abs(self.W).max())

    def rows(self):
        """Per-site summary rows (j, θ_j, ‖W_j‖_L2, ‖W_j‖_L∞)."""
        return [(j, float(self.theta[j]), fo.lp_norm(self.W[j], 2), fo.lp_norm(self.W[j], np.inf))
                for j in range(self.J)]


# -- cutoff and corrector --------------------------------------------------------

def default_width():
    """Standard deviation of the mollifier so that its support is |x| ≤ π/2."""
    return 0.5 * np.pi / _CUT


def mollifier(x, s):
    x = np.asarray(x, dtype=float)
    Z = s * np.sqrt(TWO_PI) * erf(0.5 * np.pi / (np.sqrt(2) * s))
    return np.where(np.abs(x) <= 0.5 * np.pi, np.exp(-0.5 * (x / s) ** 2) / Z, 0.0)


def cutoff(x, s):
    """φ = (η ∗ step) - 1/2: odd, ±1/2 beyond |x| = π/2."""
    x = np.asarray(x, dtype=float)
    inner = 0.5 * erf(x / (np.sqrt(2) * s)) / erf(0.5 * np.pi / (np.sqrt(2) * s))
    return np.where(np.abs(x) <= 0.5 * np.pi, inner, 0.5 * np.sign(x))


def plateau_bump(x, s, support):
    """Even bump equal to ~1 on the middle and vanishing for |x| ≥ support."""
    x = np.asarray(x, dtype=float)
    a = support - _CUT * s
    val = 0.5 * (erf((x + a) / (np.sqrt(2) * s)) - erf((x - a) / (np.sqrt(2) * s)))
    return np.where(np.abs(x) < support, val, 0.0)


def mollifier_cosine_transform(k, s, nodes=600):
    """∫ η(x) cos(kx) dx by Gauss-Legendre on [-π/2, π/2]."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * np.pi * t
    w = 0.5 * np.pi * w
    k = np.asarray(k, dtype=float)
    return np.cos(np.multiply.outer(k, x)) @ (w * mollifier(x, s))


def cutoff_moments(N, s):
    """μ_k = ∫_{-π}^{π} φ(x) e^{ikx} dx for k in FFT order; μ_0 = 0."""
    k = np.fft.fftfreq(N, 1.0 / N)
    eta_hat = mollifier_cosine_transform(k, s)
    mu = np.zeros(N, dtype=complex)
    nz = k != 0
    mu[nz] = (np.cos(np.pi * k[nz]) - eta_hat[nz]) / (1j * k[nz])
    mu[N // 2] = 0.0
    return mu


@dataclass
class NormalFormContext:
    pattern: object
    u_ad: np.ndarray             # (N, n)
    phi: np.ndarray              # (N,)
    psi: np.ndarray              # (N, n)
    E: np.ndarray                # (3, N, n): E_{-1}, E_0, E_1
    width: float
    psi_support: float
    Mp: int                      # cell modes used in pairings
    u_hat: np.ndarray            # full-grid FFT-order coefficients of u_*
    u_ad_hat: np.ndarray
    psi_hat: np.ndarray
    u_ad_pair: np.ndarray        # (2Mp+1, n) coefficients of u_ad
    mu: np.ndarray               # cutoff moments, FFT order
    Dud_pi: np.ndarray           # D u_ad'(π)
    theta_max: float

    @property
    def N(self):
        return self.u_ad.shape[0]

    @property
    def n(self):
        return self.u_ad.shape[1]

    @property
    def sys(self):
        return self.pattern.sys

    def phi_at(self, x):
        return cutoff(x, self.width)

    def psi_at(self, x):
        c = fo.to_fourier(self.u_ad, self.N // 2 - 1)
        bump = plateau_bump(x, self.width, self.psi_support)
        return (bump * self.psi_scale)[..., None] * fo.evaluate(c, x).real

    psi_scale: float = 1.0


def _full_hat(a):
    """Unnormalised coefficients in FFT order: ∫ a e^{-ikx} dx."""
    N = a.shape[0]
    k = np.fft.fftfreq(N, 1.0 / N)
    return TWO_PI / N * np.fft.fft(a, axis=0) * np.cos(np.pi * k).reshape((N,) + (1,) * (a.ndim - 1))


def _from_full_hat(c):
    N = c.shape[0]
    k = np.fft.fftfreq(N, 1.0 / N)
    return np.fft.ifft(c * np.cos(np.pi * k).reshape((N,) + (1,) * (c.ndim - 1)), axis=0) * N / TWO_PI


def build_context(p, u_ad, width=None, psi_support=0.9 * np.pi, Mp=None):
    N = p.N
    x = fo.grid(N)
    s = default_width() if width is None else float(width)
    phi = cutoff(x, s)
    bump = plateau_bump(x, s, psi_support)
    base = bump[:, None] * u_ad
    norm = fo.inner_product(base, u_ad).real
    if abs(norm) < 1e-12:
        raise CorrectorError("bump-weighted adjoint mode has zero pairing with u_ad")
    psi = base / norm
    du = p.profile_dx
    E = np.stack([
        0.25 * psi - (0.25 + 0.5 * phi)[:, None] * du,
        -0.5 * (psi + du),
        0.25 * psi - (0.25 - 0.5 * phi)[:, None] * du,
    ])
    Mp = N // 4 if Mp is None else Mp
    c_ad = fo.to_fourier(u_ad, N // 2 - 1)
    dud_pi = fo.evaluate(1j * fo.modes(N // 2 - 1)[:, None] * c_ad, np.pi).real
    return NormalFormContext(
        pattern=p, u_ad=np.asarray(u_ad, dtype=float), phi=phi, psi=psi, E=E,
        width=s, psi_support=psi_support, Mp=Mp,
        u_hat=_full_hat(p.profile), u_ad_hat=_full_hat(u_ad), psi_hat=_full_hat(psi),
        u_ad_pair=fo.to_fourier(u_ad, Mp), mu=cutoff_moments(N, s),
        Dud_pi=p.sys.Dvec * dud_pi,
        theta_max=min(0.5, np.pi - psi_support - 1e-3),
        psi_scale=1.0 / norm,
    )


# -- linear maps ---------------------------------------------------------------------

def convolve_E(ctx, theta):
    """(E∗θ)_j = E_0 θ_j + E_1 θ_{j-1} + E_{-1} θ_{j+1}, indices mod J."""
    theta = np.asarray(theta, dtype=float)
    Em, E0, Ep = ctx.E
    return (E0[None] * theta[:, None, None]
            + Ep[None] * np.roll(theta, 1)[:, None, None]
            + Em[None] * np.roll(theta, -1)[:, None, None])


def cell_pair(ctx, c, b_coeffs):
    """⟨v_j, b_j⟩ for each cell, integrating the whole-domain interpolant exactly.

    ``b_coeffs`` is (2Mp+1, n) for one periodic function or (J, 2Mp+1, n).
    """
    J = c.shape[0]
    vh = fo.cell_fourier(unchop(c), J, ctx.Mp)
    b = np.asarray(b_coeffs)
    if b.ndim == 2:
        b = np.broadcast_to(b, vh.shape)
    return np.einsum("jli,jli->j", vh, np.conj(b)) / TWO_PI


def phase_functional(ctx, c):
    """F(v)_j = -⟨v_j, u_ad⟩."""
    return -cell_pair(ctx, c, ctx.u_ad_pair).real


def linear_reconstruct(ctx, s):
    return s.W + convolve_E(ctx, s.theta)


def linear_decompose(ctx, c):
    c = np.asarray(c, dtype=float)
    theta = phase_functional(ctx, c)
    return LatticeState(theta, c - convolve_E(ctx, theta))


# -- nonlinear corrector --------------------------------------------------------------

def _shift_cells(hat, theta, N):
    """Per-cell translates f(x - θ_j) from full FFT-order coefficients."""
    k = np.fft.fftfreq(N, 1.0 / N)
    ph = np.exp(-1j * np.multiply.outer(theta, k))
    ph[:, N // 2] = np.cos(N // 2 * theta)
    return _from_full_hat(np.moveaxis(hat[None] * ph[..., None], 0, 1)).real.transpose(1, 0, 2)


def _check_regime(ctx, theta):
    if np.abs(theta).max(initial=0.0) > ctx.theta_max:
        raise OutOfRegime(f"|θ| = {np.abs(theta).max():.3f} exceeds {ctx.theta_max:.3f}")


def _H_core(ctx, th_prev, th, th_next, W_hat):
    """H_j and c_j for arrays of neighbouring phases and cell coefficients of W."""
    N = ctx.N
    u_prev = _shift_cells(ctx.u_hat, th_prev, N)
    u_mid = _shift_cells(ctx.u_hat, th, N)
    u_next = _shift_cells(ctx.u_hat, th_next, N)
    ad_mid = _shift_cells(ctx.u_ad_hat, th, N)
    A = u_next - u_prev
    Bsum = u_next + u_prev - 2.0 * u_mid
    H1 = 0.5 * ctx.phi[None, :, None] * A + 0.25 * Bsum
    # ⟨φ A, u_ad(·-θ)⟩ through the cutoff moments, the rest is periodic
    g = np.sum(A * ad_mid, axis=2)
    g_hat = _full_hat(g.T).T
    phi_part = (g_hat @ ctx.mu).real / TWO_PI
    per_part = TWO_PI / N * np.sum(Bsum * ad_mid, axis=(1, 2))
    pair_H1 = 0.5 * phi_part + 0.25 * per_part
    # ⟨W_j, u_ad(·-θ_j) - u_ad⟩ from cell coefficients
    ell = fo.modes(ctx.Mp)
    b = (np.exp(-1j * np.multiply.outer(th, ell))[..., None] - 1.0) * ctx.u_ad_pair[None]
    pair_W = np.einsum("jli,jli->j", W_hat, np.conj(b)).real / TWO_PI
    cj = -pair_H1 - pair_W
    psi_sh = _shift_cells(ctx.psi_hat, th, N)
    return H1 + cj[:, None, None] * psi_sh, cj, u_mid


def assemble_H(ctx, theta_prev, theta, theta_next, W_j):
    """H_j and c_j for one cell; W_j is read as a periodic cell field."""
    th = np.array([theta_prev, theta, theta_next], dtype=float)
    _check_regime(ctx, th)
    W_j = fo.as_field(np.asarray(W_j, dtype=float))
    W_hat = fo.to_fourier(W_j, ctx.Mp)[None]
    H, cj, _ = _H_core(ctx, th[:1], th[1:2], th[2:], W_hat)
    return H[0], float(cj[0])


def assemble_H_cells(ctx, s):
    """H_j, c_j for all cells of a lattice state (W read on the whole domain)."""
    theta = np.asarray(s.theta, dtype=float)
    _check_regime(ctx, theta)
    W_hat = fo.cell_fourier(unchop(s.W), s.J, ctx.Mp)
    return _H_core(ctx, np.roll(theta, 1), theta, np.roll(theta, -1), W_hat)


def reconstruct(ctx, s):
    H, _, u_mid = assemble_H_cells(ctx, s)
    return s.W + H + u_mid - ctx.pattern.profile[None]


# -- inverse by Newton-Krylov -----------------------------------------------------------

def _state_from_y(ctx, Y):
    return linear_decompose(ctx, Y)


def _directional(fun, y, dy, h):
    nrm = np.abs(dy).max()
    if nrm == 0:
        return np.zeros_like(dy)
    step = h / nrm
    return (fun(y + step * dy) - fun(y - step * dy)) / (2 * step)


def _newton_krylov(fun, target, y0, tol, max_iter, h, what):
    """Solve fun(y) = target with y near y0; fun ≈ identity near 0."""
    shape = y0.shape
    y = y0.copy()
    for it in range(max_iter + 1):
        r = fun(y) - target
        res = np.abs(r).max()
        if res <= tol:
            return y, it, res
        if it == max_iter:
            break

        def mv(z):
            return _directional(fun, y, z.reshape(shape), h).ravel()

        op = LinearOperator((r.size, r.size), matvec=mv, dtype=float)
        # inexact Newton: the outer loop supplies the final accuracy
        dy, info = gmres(op, -r.ravel(), rtol=1e-8, atol=0.1 * tol, restart=30, maxiter=2)
        if info < 0:
            break
        y = y + dy.reshape(shape)
    raise NoConvergence(f"{what}: residual {res:.3e} after {max_iter} Newton steps")


def decompose(ctx, v, tol=1e-10, max_iter=20, seed=None, h=1e-5):
    """Invert reconstruct: returns the lattice state s with reconstruct(s) = v."""
    v = np.asarray(v, dtype=float)

    def fun(Y):
        return reconstruct(ctx, _state_from_y(ctx, Y))

    y0 = v.copy() if seed is None else linear_reconstruct(ctx, seed)
    y, _, _ = _newton_krylov(fun, v, y0, tol, max_iter, h, "decompose")
    s = _state_from_y(ctx, y)
    check_state(ctx, s)
    return s


def check_state(ctx, s, tol=1e-9, match_tol=1e-6):
    """Raise ConstraintViolation if ⟨W_j, u_ad⟩ ≠ 0 or the cells do not match up."""
    orth = np.abs(cell_pair(ctx, s.W, ctx.u_ad_pair)).max()
    scale = max(1.0, np.abs(s.W).max())
    if orth > tol * scale:
        raise ConstraintViolation(f"⟨W_j, u_ad⟩ = {orth:.2e}")
    jump, djump = boundary_mismatch(s.W)
    if max(jump, djump) > match_tol * scale:
        raise ConstraintViolation(f"cell matching violated ({jump:.2e}, {djump:.2e})")


def _edge_fit(vals, at_end, order=9):
    """Value and derivative at a cell edge from a one-sided polynomial fit.

    ``vals`` holds samples at unit spacing in local coordinate t; the edge is
    t = 0 and the samples sit at t = -order..-1 (right edge, extrapolation)
    or t = 0..order-1 (left edge).
    """
    t = np.arange(-order, 0) if at_end else np.arange(order)
    V = np.vander(t.astype(float), order, increasing=True)
    coef = np.linalg.solve(V, vals)
    return coef[0], coef[1]


def boundary_mismatch(W, order=9):
    """Max |W_j(π) - W_{j+1}(-π)| and the same for ∂_x (indices mod J)."""
    J, N, n = W.shape
    h = TWO_PI / N
    jump = djump = 0.0
    for j in range(J):
        nxt = W[(j + 1) % J]
        r_val, r_der = _edge_fit(W[j, N - order:], True, order)
        l_val, l_der = _edge_fit(nxt[:order], False, order)
        jump = max(jump, np.abs(r_val - nxt[0]).max())
        djump = max(djump, np.abs(r_der - l_der).max() / h)
    return float(jump), float(djump)


# -- linear operators -------------------------------------------------------------------

def apply_A_ch(ctx, c):
    """D∂_xx + f'(u_*) on the whole-domain field, returned chopped."""
    J, N, n = c.shape
    V = unchop(c)
    P = J * N
    q = np.fft.fftfreq(P, 1.0 / P) / J
    Vxx = np.fft.ifft(-(q**2)[:, None] * np.fft.fft(V, axis=0), axis=0).real
    Jx = ctx.sys.jac(ctx.pattern.profile)
    lin = np.einsum("mik,jmk->jmi", Jx, c)
    return chop(Vxx, J) * ctx.sys.Dvec[None, None, :] + lin


def gamma_boundary(ctx, W):
    """Γ(W)_j = (W_j(-π), D u_ad'(π))."""
    return W[:, 0, :] @ ctx.Dud_pi


def delta_plus(a):
    return np.roll(a, -1, axis=0) - a


def apply_A_nf(ctx, s):
    """Normal-form linear operator in block form (θ-row δ₊ΓW)."""
    th_out = delta_plus(gamma_boundary(ctx, s.W))
    v = linear_reconstruct(ctx, s)
    W_out = apply_A_ch(ctx, v) - convolve_E(ctx, th_out)
    return LatticeState(th_out, W_out)


def conjugated_A_ch(ctx, s):
    """𝓛⁻¹ A_ch 𝓛 s computed through the phase functional."""
    return linear_decompose(ctx, apply_A_ch(ctx, linear_reconstruct(ctx, s)))


def vector_field(ctx, c):
    """Right-hand side A_ch v + g(v) = D v_xx + f(u_* + v) - f(u_*), chopped."""
    J, N, n = c.shape
    V = unchop(c)
    P = J * N
    q = np.fft.fftfreq(P, 1.0 / P) / J
    Vxx = np.fft.ifft(-(q**2)[:, None] * np.fft.fft(V, axis=0), axis=0).real
    u = ctx.pattern.profile[None]
    return chop(Vxx, J) * ctx.sys.Dvec + ctx.sys.f(u + c) - ctx.sys.f(np.broadcast_to(u, c.shape))


def _solve_near_identity(apply, rhs, tol, max_outer=12):
    """Solve apply(x) = rhs for an operator close to the identity.

    GMRES with a loose inner tolerance inside an iterative-refinement loop;
    the finite-difference operator is too noisy for one tight GMRES solve.
    """
    shape = rhs.shape
    op = LinearOperator((rhs.size, rhs.size), matvec=lambda z: apply(z.reshape(shape)).ravel(),
                        dtype=float)
    scale = max(np.abs(rhs).max(), 1e-300)
    x = rhs.copy()
    for _ in range(max_outer):
        r = rhs - apply(x)
        if np.abs(r).max() <= tol * scale:
            return x
        dx, _ = gmres(op, r.ravel(), rtol=1e-6, atol=0.0, restart=20, maxiter=1)
        x = x + dx.reshape(shape)
    if np.abs(rhs - apply(x)).max() > 1e3 * tol * scale:
        raise NoConvergence("velocity solve did not converge")
    return x


def nonlinear_residual(ctx, sys, s, tol=1e-11, h=1e-5):
    """(N^θ, N^w): coordinate velocities minus the normal-form linear part."""
    if sys is not ctx.sys and sys is not None:
        if tuple(sys.D) != tuple(ctx.sys.D) or sys.params != ctx.sys.params:
            raise ValueError("system does not match the context's pattern")
    v = reconstruct(ctx, s)
    vdot = vector_field(ctx, v)
    Y = linear_reconstruct(ctx, s)

    def dT(dY):
        return _directional(lambda y: reconstruct(ctx, _state_from_y(ctx, y)), Y, dY, h)

    dy = _solve_near_identity(dT, vdot, tol)
    sdot = _state_from_y(ctx, dy)
    lin = apply_A_nf(ctx, s)
    return sdot.theta - lin.theta, sdot.W - lin.W


def project_complement(ctx, c):
    """W_j ↦ W_j - ⟨W_j, u_ad⟩ ψ; keeps whole-domain smoothness since ψ vanishes near the cell edges."""
    pair = cell_pair(ctx, c, ctx.u_ad_pair).real
    return c - pair[:, None, None] * ctx.psi[None]


def random_state(ctx, J, rng, theta_amp=0.05, w_amp=0.05, band=None):
    """Random small lattice state with smooth, matched, u_ad-orthogonal W."""
    N, n = ctx.N, ctx.n
    P = J * N
    band = 3 * J if band is None else band
    coef = np.zeros((P, n), dtype=complex)
    kk = np.arange(1, band + 1)
    decay = np.exp(-(kk / (0.5 * band)) ** 2)[:, None]
    coef[kk] = (rng.normal(size=(band, n)) + 1j * rng.normal(size=(band, n))) * decay
    coef[0] = rng.normal(size=n)
    coef[-kk] = np.conj(coef[kk])
    V = np.fft.ifft(coef, axis=0).real
    V *= w_amp / np.abs(V).max()
    W = project_complement(ctx, chop(V, J))
    theta = theta_amp * rng.uniform(-1, 1, size=J)
    return LatticeState(theta, W)
