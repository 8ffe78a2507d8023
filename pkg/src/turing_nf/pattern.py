"""Turing onset and even periodic patterns on the 2π cell."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import fieldops as fo
from .errors import (BracketError, CollapsedToHomogeneous, EigenError,
                     NoConvergence)
from .kinetics import ReactionSystem, builtin


@dataclass
class PatternSolution:
    profile: np.ndarray          # (N, n) values of u_* on the cell grid
    profile_dx: np.ndarray
    profile_dxx: np.ndarray
    sys: ReactionSystem = field(repr=False)
    residual_norm: float = np.nan
    amplitude: float = np.nan
    equilibrium: np.ndarray = None
    iterations: int = 0

    @property
    def N(self):
        return self.profile.shape[0]

    @property
    def n(self):
        return self.profile.shape[1]

    def coeffs(self, M):
        return fo.to_fourier(self.profile, M)

    def shifted(self, theta):
        """u_*(x - θ) on the cell grid."""
        return fo.shift(self.profile, theta)

    def evenness_residual(self):
        u = self.profile
        return float(np.abs(u[1:] - u[:0:-1]).max())

    def to_record(self):
        return {
            "model": self.sys.name,
            "params": self.sys.params,
            "D": list(self.sys.D),
            "wavenumber": self.sys.wavenumber,
            "profile": self.profile.tolist(),
            "residual_norm": self.residual_norm,
            "amplitude": self.amplitude,
            "equilibrium": None if self.equilibrium is None else list(self.equilibrium),
        }

    @classmethod
    def from_record(cls, rec):
        k = rec["wavenumber"]
        sys = builtin(rec["model"], D=[d / k**2 for d in rec["D"]], **rec["params"]).rescaled(k)
        u = np.asarray(rec["profile"], dtype=float)
        return _finish(sys, u, np.asarray(rec["equilibrium"]), 0)

    def dumps(self):
        return json.dumps(self.to_record())


def homogeneous_equilibrium(sys, guess, tol=1e-12, max_iter=50):
    u = np.asarray(guess, dtype=float).copy()
    for _ in range(max_iter + 1):
        r = sys.f(u)
        if np.linalg.norm(r) <= tol:
            return u
        u = u - np.linalg.solve(sys.jac(u), r)
        if not np.all(np.isfinite(u)):
            break
    raise NoConvergence(f"equilibrium Newton failed from {guess}")


def dispersion_relation(sys, u0, k):
    """Eigenvalues of -k²D + f'(u0), sorted by descending real part."""
    A = -k * k * np.diag(sys.Dvec) + sys.jac(np.asarray(u0, dtype=float))
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenError(str(exc)) from exc
    return lam[np.argsort(-lam.real, kind="stable")]


def max_growth(sys, u0, kmax=None):
    """(max_k Re λ(k), argmax k) over k ≥ 0."""
    if kmax is None:
        kmax = 4.0 * np.sqrt(np.abs(sys.jac(np.asarray(u0))).max() / sys.Dvec.min()) + 1.0
    ks = np.linspace(0.0, kmax, 401)
    Jac = sys.jac(np.asarray(u0, dtype=float))
    stack = Jac[None] - (ks**2)[:, None, None] * np.diag(sys.Dvec)[None]
    g = np.linalg.eigvals(stack).real.max(axis=1)
    i = int(np.argmax(g))
    lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, len(ks) - 1)]
    if hi <= lo:
        return g[i], ks[i]
    res = minimize_scalar(lambda k: -dispersion_relation(sys, u0, k)[0].real,
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    if -res.fun >= g[i]:
        return -res.fun, res.x
    return g[i], ks[i]


def turing_onset(sys, u0, param, bracket, tol=1e-8):
    """Bisect ``param`` for the onset of a finite-wavenumber instability."""
    lo, hi = map(float, bracket)

    def growth(value):
        s = sys.with_params(**{param: value})
        eq = homogeneous_equilibrium(s, _eq_guess(s, u0))
        return max_growth(s, eq)

    g_lo, _ = growth(lo)
    g_hi, _ = growth(hi)
    if np.sign(g_lo) == np.sign(g_hi):
        raise BracketError(f"no change of stability for {param} in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid, _ = growth(mid)
        if np.sign(g_mid) == np.sign(g_lo):
            lo = mid
        else:
            hi = mid
    pc = 0.5 * (lo + hi)
    _, kc = growth(pc)
    return pc, kc


def _eq_guess(sys, fallback):
    return sys.equilibrium_guess if sys.equilibrium_guess else fallback


def _even_operators(N):
    """Half-grid collocation on x ∈ [0, π] for even fields.

    Returns (D2e, ext) where ext maps N/2+1 half values to the full grid
    and D2e = restrict · D2 · ext.
    """
    h = N // 2
    m = np.arange(N)
    # x_m = -π + 2πm/N; |x_m| corresponds to half index |m - h|
    half_of = np.abs(m - h)
    ext = np.zeros((N, h + 1))
    ext[m, half_of] = 1.0
    restrict = np.zeros((h + 1, N))
    rows = np.arange(h + 1)
    restrict[rows, (h + rows) % N] = 1.0
    D2 = fo.diff_matrix(N, 2)
    return restrict @ D2 @ ext, ext, restrict


def onset_seed(sys, N=256, eps=0.1, u0=None):
    """u0 + ε cos(x) w_c with w_c the critical eigenvector at unit wavenumber."""
    if u0 is None:
        u0 = homogeneous_equilibrium(sys, sys.equilibrium_guess)
    A = -np.diag(sys.Dvec) + sys.jac(u0)
    lam, vec = np.linalg.eig(A)
    w = vec[:, int(np.argmax(lam.real))].real
    w = w / np.linalg.norm(w)
    if w[0] < 0:
        w = -w
    x = fo.grid(N)
    return u0[None, :] + eps * np.cos(x)[:, None] * w[None, :]


def steady_residual(sys, u):
    return sys.Dvec[None, :] * fo.differentiate(u, 2) + sys.f(u)


def solve_pattern(sys, init, tol=1e-9, max_iter=50, amplitude_min=1e-3, u0=None,
                  seed_growth=(1.0, 3.0, 6.0, 12.0)):
    """Newton for D u'' + f(u) = 0 restricted to even fields.

    Large-amplitude branches are often out of reach of a small onset seed;
    when Newton falls back to the homogeneous state the seed's deviation
    from u0 is scaled by the next factor in ``seed_growth`` and Newton is
    restarted.
    """
    init = fo.as_field(np.asarray(init, dtype=float))
    if u0 is None:
        u0 = homogeneous_equilibrium(sys, _eq_guess(sys, init.mean(axis=0)))
    u0 = np.asarray(u0, dtype=float)
    err = None
    for g in seed_growth:
        try:
            return _newton_even(sys, u0 + g * (init - u0), tol, max_iter, amplitude_min, u0)
        except (CollapsedToHomogeneous, NoConvergence) as exc:
            err = exc
            if np.abs(init - u0).max() == 0.0:
                break
    raise err


def _newton_even(sys, init, tol, max_iter, amplitude_min, u0):
    N, n = init.shape
    D2e, ext, restrict = _even_operators(N)
    h1 = N // 2 + 1
    # symmetrise the seed
    z = (restrict @ (0.5 * (init + init[np.r_[0, N - 1:0:-1]]))).copy()
    Dv = sys.Dvec
    for it in range(max_iter + 1):
        r = Dv[None, :] * (D2e @ z) + sys.f(z)
        rnorm = np.abs(r).max()
        if not np.isfinite(rnorm):
            break
        if rnorm <= 0.1 * tol:
            break
        Jk = sys.jac(z)  # (h1, n, n)
        Jmat = np.zeros((h1 * n, h1 * n))
        for i in range(n):
            Jmat[i * h1:(i + 1) * h1, i * h1:(i + 1) * h1] += Dv[i] * D2e
            for k in range(n):
                Jmat[i * h1:(i + 1) * h1, k * h1:(k + 1) * h1] += np.diag(Jk[:, i, k])
        dz = np.linalg.solve(Jmat, -r.T.reshape(-1))
        z = z + dz.reshape(n, h1).T
        if np.abs(dz).max() < 1e-15 * (1 + np.abs(z).max()):
            break
    u = ext @ z
    sol = _finish(sys, u, u0, it)
    if not np.isfinite(sol.residual_norm) or sol.residual_norm > tol:
        raise NoConvergence(f"pattern Newton stalled at residual {sol.residual_norm:.3e}")
    if sol.amplitude < amplitude_min:
        raise CollapsedToHomogeneous(f"amplitude {sol.amplitude:.3e} below {amplitude_min}")
    return sol


def _finish(sys, u, u0, iterations):
    res = steady_residual(sys, u)
    u0 = np.asarray(u0, dtype=float)
    return PatternSolution(
        profile=u,
        profile_dx=fo.differentiate(u, 1),
        profile_dxx=fo.differentiate(u, 2),
        sys=sys,
        residual_norm=float(np.abs(res).max()),
        amplitude=float(fo.lp_norm(u - u0[None, :], 2)),
        equilibrium=u0,
        iterations=iterations,
    )


def continue_pattern(sys, start, param, targets, min_step=1e-6, **solve_kw):
    """Natural-parameter continuation with step halving.

    Returns one entry per target: a PatternSolution, or the exception that
    stopped the branch at that target.
    """
    out = []
    current = start
    value = float(current.sys.params[param])
    failed = None
    for target in targets:
        target = float(target)
        if failed is not None:
            out.append(failed)
            continue
        if target == value:
            out.append(current)
            continue
        step = target - value
        try:
            while value != target:
                trial = value + step if abs(step) < abs(target - value) else target
                s = current.sys.with_params(**{param: trial})
                try:
                    nxt = solve_pattern(s, current.profile, **solve_kw)
                except (NoConvergence, CollapsedToHomogeneous) as exc:
                    step *= 0.5
                    if abs(step) < min_step:
                        raise exc
                    continue
                current, value = nxt, trial
            out.append(current)
        except (NoConvergence, CollapsedToHomogeneous) as exc:
            failed = exc
            out.append(exc)
    return out


def resample_pattern(p, N, tol=1e-9):
    """Re-solve the pattern on an N-point grid, seeded by spectral interpolation."""
    if N == p.N:
        return p
    M = min(N, p.N) // 2 - 1
    seed = fo.from_fourier(p.coeffs(M), N, real=True)
    return solve_pattern(p.sys, seed, tol=tol, u0=p.equilibrium, seed_growth=(1.0,))
