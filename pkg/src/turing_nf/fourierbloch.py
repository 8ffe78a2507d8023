"""Per-σ normal-form operators, diagonaliser and propagator envelopes.

A lattice state (θ_j, W_j) with a single Bloch wavenumber σ has
θ_j = e^{2πiσj} θ̂ and W_j(x) = e^{iσ(x+2πj)} w(x), w periodic. In these
variables the normal-form linear operator is the (1 + m)-square matrix

    [[0,        R(σ)          ],
     [Â(σ)Ê(σ), Â(σ) - Ê(σ)R(σ)]]

with m = n(2M+1), Â(σ) the truncated Bloch matrix, Ê(σ) the Fourier
coefficients of the stencil's Bloch symbol and R(σ) the boundary row.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from . import bloch as bl
from . import fieldops as fo
from .errors import ExpFailure, GridError, IllConditioned

TWO_PI = 2.0 * np.pi


@dataclass
class SigmaBlockOperator:
    sigma: float
    M: int
    E_hat: np.ndarray        # (m,)
    F_hat: np.ndarray        # (m,) row: F̂ w = F_hat @ w
    R_row: np.ndarray        # (m,)
    A_ch_mat: np.ndarray     # (m, m)
    A_nf_mat: np.ndarray     # (m+1, m+1)

    @property
    def m(self):
        return self.A_ch_mat.shape[0]

    def kernel_basis(self):
        """Orthonormal basis of ker F̂ (m × (m-1))."""
        return sla.null_space(self.F_hat[None, :])

    def input_basis(self):
        """Orthonormal basis of C × ker F̂ inside C^{1+m}."""
        Q = self.kernel_basis()
        V = np.zeros((self.m + 1, self.m), dtype=complex)
        V[0, 0] = 1.0
        V[1:, 1:] = Q
        return V

    def exact_composition(self):
        """[F̂; I - ÊF̂] Â [Ê, I] written in the basis of C × ker F̂."""
        E, F, A = self.E_hat, self.F_hat, self.A_ch_mat
        m = self.m
        left = np.vstack([F[None, :], np.eye(m) - np.outer(E, F)])
        right = np.hstack([E[:, None], np.eye(m)])
        K = left @ A @ right
        V = self.input_basis()
        return V.conj().T @ K @ V


# -- symbols ---------------------------------------------------------------------------

def stencil_symbol(ctx, sigma, M):
    """Ê(σ) = 𝓕(Σ_j E_j e^{-2πijσ} e^{-iσx}) as an (m,) vector."""
    x = fo.grid(ctx.N)
    Em, E0, Ep = ctx.E
    Es = (E0 + Ep * np.exp(-2j * np.pi * sigma) + Em * np.exp(2j * np.pi * sigma))
    Es = Es * np.exp(-1j * sigma * x)[:, None]
    return bl.to_vec(fo.to_fourier(Es, M))


def modulated_adjoint_coeffs(ctx, sigma, M):
    """Exact 𝓕(e^{-iσx} u_ad)_ℓ for |ℓ| ≤ M (the product is not periodic for σ ≠ 0)."""
    K = ctx.N // 2 - 1
    a = fo.to_fourier(ctx.u_ad, K)
    m = fo.modes(K)
    ell = fo.modes(M)
    S = fo.sinc_integral(m[None, :] - sigma - ell[:, None])
    return S @ a / TWO_PI


def phase_row(ctx, sigma, M):
    """F̂(σ)w = -(1/2π) Σ_ℓ (ŵ_ℓ, conj ĝ_ℓ) with ĝ = 𝓕(e^{-iσx} u_ad)."""
    g = modulated_adjoint_coeffs(ctx, sigma, M)
    return -bl.to_vec(np.conj(g)) / TWO_PI


def boundary_row(ctx, sigma, M):
    """R(σ)w = (i sin πσ / π) Σ_ℓ (-1)^ℓ (ŵ_ℓ, D u_ad'(π))."""
    ell = fo.modes(M)
    sign = np.cos(np.pi * ell)
    row = (sign[:, None] * ctx.Dud_pi[None, :]).astype(complex)
    return 1j * np.sin(np.pi * sigma) / np.pi * bl.to_vec(row)


def assemble_sigma_operator(ctx, p, sigma, M):
    A = bl.assemble_bloch(p, sigma, M).entries
    E = stencil_symbol(ctx, sigma, M)
    F = phase_row(ctx, sigma, M)
    R = boundary_row(ctx, sigma, M)
    m = A.shape[0]
    Anf = np.zeros((m + 1, m + 1), dtype=complex)
    Anf[0, 1:] = R
    Anf[1:, 0] = A @ E
    Anf[1:, 1:] = A - np.outer(E, R)
    return SigmaBlockOperator(sigma=float(sigma), M=M, E_hat=E, F_hat=F, R_row=R,
                              A_ch_mat=A, A_nf_mat=Anf)


def spectrum_mismatch(op):
    """Max distance after optimally pairing eig(Â_nf) with eig(Â_ch) ∪ {-R·Ê}.

    The block matrix is similar to [[-RÊ, R], [0, Â]], so the extra
    eigenvalue is -RÊ, which vanishes.
    """
    a = np.linalg.eigvals(op.A_nf_mat)
    b = np.concatenate([np.linalg.eigvals(op.A_ch_mat), [-(op.R_row @ op.E_hat)]])
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# -- diagonaliser -----------------------------------------------------------------------

def branch_eigenpair(p, branch, sigma):
    """λ, e, e* at σ; tracked from the nearest branch sample when σ is off-grid."""
    i = int(np.argmin(np.abs(branch.sigmas - sigma)))
    if abs(branch.sigmas[i] - sigma) <= 1e-14:
        return branch.lambdas[i], bl.to_vec(branch.eigvecs[i]), bl.to_vec(branch.e_star[i])
    du = bl.to_vec(fo.to_fourier(p.profile_dx, branch.M))
    lam, e, es = bl._track(p, [sigma], branch.M, bl.to_vec(branch.eigvecs[i]), np.vdot(du, du))[0]
    # _track normalises against its reference; restore ⟨e, u_*'⟩ = ‖u_*'‖²
    e_v, es_v = bl.to_vec(e), bl.to_vec(es)
    scale = np.vdot(du, du) / np.vdot(du, e_v)
    return lam, e_v * scale, es_v / np.conj(scale)


@dataclass
class Diagonalizer:
    T: np.ndarray          # (m, m) in bases of C × ker F̂ → C × ker S
    T_inv: np.ndarray
    A_dg: np.ndarray       # diag(λ, Â_s) in the output basis
    K: np.ndarray          # exact composition in the input basis
    lam: complex
    mu: complex

    def conjugacy_residual(self):
        R = self.T @ self.K - self.A_dg @ self.T
        return float(np.linalg.norm(R, 2) / np.linalg.norm(self.K, 2))


def build_T_dg(ctx, p, branch, sigma, M=None, op=None, cond_max=1e12):
    M = branch.M if M is None else M
    if op is None:
        op = assemble_sigma_operator(ctx, p, sigma, M)
    lam, e, es = branch_eigenpair(p, branch, sigma)
    m = op.m
    S = -np.conj(es) / TWO_PI                 # S w = -(1/2π) ⟪w, ê*⟫
    P = np.eye(m) + np.outer(e, S)            # P w = w + (S w) ê
    full = np.vstack([S[None, :], P]) @ np.hstack([op.E_hat[:, None], np.eye(m)])
    V_in = op.input_basis()
    Q_out = sla.null_space(S[None, :])
    V_out = np.zeros((m + 1, m), dtype=complex)
    V_out[0, 0] = 1.0
    V_out[1:, 1:] = Q_out
    T = V_out.conj().T @ full @ V_in
    if np.linalg.cond(T) > cond_max:
        raise IllConditioned(f"diagonaliser condition number {np.linalg.cond(T):.2e}")
    T_inv = np.linalg.solve(T, np.eye(m))
    A_s = Q_out.conj().T @ op.A_ch_mat @ Q_out
    A_dg = np.zeros((m, m), dtype=complex)
    A_dg[0, 0] = lam
    A_dg[1:, 1:] = A_s
    return Diagonalizer(T=T, T_inv=T_inv, A_dg=A_dg, K=op.exact_composition(),
                        lam=complex(lam), mu=complex(S @ op.E_hat))


# -- propagator --------------------------------------------------------------------------

class Propagator:
    """t ↦ e^{At} with an eigendecomposition when it is well conditioned."""

    def __init__(self, A, cond_max=1e6):
        self.A = np.asarray(A)
        self.eig = None
        try:
            lam, V = np.linalg.eig(self.A)
            if np.linalg.cond(V) <= cond_max:
                self.eig = (lam, V, np.linalg.inv(V))
        except np.linalg.LinAlgError:
            pass

    def __call__(self, t):
        if t < 0:
            raise ValueError("t must be nonnegative")
        if self.eig is not None:
            lam, V, Vi = self.eig
            out = (V * np.exp(lam * t)[None, :]) @ Vi
        else:
            out = sla.expm(self.A * t)
        if not np.all(np.isfinite(out)):
            raise ExpFailure(f"matrix exponential failed at t={t}")
        return out


def propagator(A, t):
    return Propagator(A)(t)


@dataclass
class PropagatorSample:
    t: float
    sigma: float
    block_norms: np.ndarray    # [[|M00|, ‖M01‖], [‖M10‖, ‖M11‖]]


def block_norms(Mt, q=2):
    """Induced norms of the (θ, w) blocks; q ∈ {1, 2, ∞}."""
    def nrm(B):
        if q == 2:
            return np.linalg.norm(B, 2)
        if q == 1:
            return np.abs(B).sum(axis=0).max()
        return np.abs(B).sum(axis=1).max()

    return np.array([[abs(Mt[0, 0]), nrm(Mt[:1, 1:])],
                     [nrm(Mt[1:, :1]), nrm(Mt[1:, 1:])]])


def default_sigma_grid(size=33):
    """σ grid clustered quadratically near 0, covering [-1/2, 1/2]."""
    h = (size - 1) // 2
    k = np.arange(-h, h + 1)
    return 0.5 * np.sign(k) * (k / h) ** 2


def default_time_grid(size=40, t_max=1000.0):
    return np.concatenate([[0.0], np.geomspace(1.0, t_max, size - 1)])


def sample_envelopes(ctx, p, sigmas, times, M, q=2):
    """Block norms of e^{Kt} on a (t, σ) grid, K the exact composition.

    Returns an array (len(times), len(sigmas), 2, 2).
    """
    out = np.empty((len(times), len(sigmas), 2, 2))
    for k, s in enumerate(sigmas):
        K = assemble_sigma_operator(ctx, p, s, M).exact_composition()
        prop = Propagator(K)
        for i, t in enumerate(times):
            out[i, k] = block_norms(prop(t), q)
    return out


def envelope_fit(times, sigmas, norms, t_fit=(10.0, None), gamma0=0.25):
    """Fitted decay exponents per block, σ²-rate of |M00| and the rate away from 0."""
    times = np.asarray(times, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if len(times) < 5 or len(sigmas) < 5:
        raise GridError("need at least 5 times and 5 σ values")
    t_hi = times.max() if t_fit[1] is None else t_fit[1]
    sel = (times >= t_fit[0]) & (times <= t_hi)
    if sel.sum() < 3:
        raise GridError("fewer than 3 times inside the fit window")
    sup = norms.max(axis=1)                               # sup over σ, (T, 2, 2)
    x = np.log(times[sel])
    exps = np.empty((2, 2))
    consts = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            y = np.log(sup[sel, a, b])
            slope, icpt = np.polyfit(x, y, 1)
            exps[a, b] = -slope
            consts[a, b] = np.exp(icpt)
    # e^{-cσ²t}: slope of log|M00| in σ² at the last time, small σ
    small = (np.abs(sigmas) <= gamma0) & (np.abs(sigmas) > 0)
    t_last = times[sel][-1]
    i_last = int(np.flatnonzero(times == t_last)[0])
    y = np.log(norms[i_last, small, 0, 0])
    c_rate = -np.polyfit(sigmas[small] ** 2, y, 1)[0] / t_last
    # exponential decay for |σ| ≥ γ₀
    far = np.abs(sigmas) >= gamma0
    gamma2 = np.nan
    if far.any():
        tot = norms[:, far].max(axis=(2, 3)).max(axis=1)
        gamma2 = -np.polyfit(times[sel], np.log(tot[sel]), 1)[0]
    return {"exponents": exps, "constants": consts, "c_rate": float(c_rate),
            "gamma2": float(gamma2), "t_window": (float(t_fit[0]), float(t_hi))}


def sigma_derivative_norms(ctx, p, sigma, times, M, h=1e-4):
    """‖∂_σ e^{K(σ)t}‖₂ by centred differences in σ.

    The bases of ker F̂ differ between σ ± h, so both propagators are
    compared as operators on C^{1+m} through V e^{Kt} V^*, which does not
    depend on the basis chosen.
    """
    if abs(sigma) + h > 0.5:
        raise ValueError("σ ± h must stay inside [-1/2, 1/2]")
    embedded = []
    for s in (sigma + h, sigma - h):
        op = assemble_sigma_operator(ctx, p, s, M)
        V = op.input_basis()
        embedded.append((V, Propagator(op.exact_composition())))
    out = []
    for t in times:
        (Vp, Pp), (Vm, Pm) = embedded
        diff = Vp @ Pp(t) @ Vp.conj().T - Vm @ Pm(t) @ Vm.conj().T
        out.append(np.linalg.norm(diff, 2) / (2 * h))
    return np.array(out)
