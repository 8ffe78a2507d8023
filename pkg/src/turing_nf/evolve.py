"""Perturbations of the pattern on J concatenated cells: time stepping and decay fits."""

from dataclasses import dataclass, field

import numpy as np

from . import fieldops as fo
from . import normalform as nf
from .errors import (AlignmentError, BlowUp, Indeterminate, NoConvergence, NonFinite,
                     WindowError)

TWO_PI = 2.0 * np.pi


@dataclass
class Trajectory:
    times: np.ndarray            # times of the stored fields
    snapshots: np.ndarray        # (S, J*N, n)
    J: int
    N: int
    dt: float
    linearized: bool
    norm_times: np.ndarray = None  # every ``stride`` steps
    sup_norms: np.ndarray = None
    l1_norms: np.ndarray = None
    scheme: str = "etdrk4"
    meta: dict = field(default_factory=dict)

    def norm_series(self, which="sup"):
        return self.norm_times, (self.sup_norms if which == "sup" else self.l1_norms)


@dataclass
class DecayReport:
    norm: str
    window: tuple
    exponent: float
    target: float
    tolerance: float
    passed: bool
    prefactor: float = np.nan

    def to_record(self):
        return {"norm": self.norm, "window": list(self.window), "exponent": self.exponent,
                "target": self.target, "tolerance": self.tolerance, "pass": bool(self.passed),
                "prefactor": self.prefactor}


DECAY_TARGETS = {"v_inf": 0.5, "theta_inf": 0.5, "W_Xinf": 1.0, "dtheta_l2": 0.75}


# -- ETDRK4 ------------------------------------------------------------------------------

def etdrk4_coefficients(Ldt, n_contour=32):
    """φ-function combinations of Kassam and Trefethen, by contour averaging."""
    r = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    LR = Ldt[..., None] + r
    Q = np.mean((np.exp(LR / 2) - 1) / LR, axis=-1).real
    f1 = np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=-1).real
    f2 = np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=-1).real
    f3 = np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=-1).real
    return Q, f1, f2, f3


class PatternFlow:
    """v_t = D v_xx + [f(u_* + v) - f(u_*)] (or f'(u_*) v) on J cells."""

    def __init__(self, p, J, linearized=False):
        self.p, self.J, self.linearized = p, J, linearized
        self.N, self.n = p.N, p.n
        self.P = J * self.N
        self.u = np.tile(p.profile, (J, 1))
        self.fu = p.sys.f(self.u)
        self.jac = np.tile(p.sys.jac(p.profile), (J, 1, 1))
        k = np.fft.rfftfreq(self.P, 1.0 / self.P) / J
        self.L = -(k**2)[:, None] * p.sys.Dvec[None, :]

    def reaction(self, v):
        if self.linearized:
            return np.einsum("pik,pk->pi", self.jac, v)
        return self.p.sys.f(self.u + v) - self.fu

    def full_rhs(self, v):
        vh = np.fft.rfft(v, axis=0)
        return np.fft.irfft(self.L * vh, n=self.P, axis=0) + self.reaction(v)


def integrate(p, v0, T, dt, J, linearized=False, stride=10, field_times=None,
              blowup_factor=1e3):
    """ETDRK4 in time, Fourier in space, on the periodic domain of J cells.

    Norms are recorded every ``stride`` steps; full fields are stored at
    ``field_times`` (rounded to the step grid), or every ``stride`` steps
    when not given.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    flow = PatternFlow(p, J, linearized)
    v = np.array(v0, dtype=float)
    if v.shape != (flow.P, flow.n):
        raise AlignmentError(f"v0 must have shape {(flow.P, flow.n)}, got {v.shape}")
    nsteps = int(round(T / dt))
    Ldt = flow.L * dt
    E, E2 = np.exp(Ldt), np.exp(Ldt / 2)
    Q, f1, f2, f3 = (c * dt for c in etdrk4_coefficients(Ldt))
    if field_times is None:
        keep = set(range(0, nsteps + 1, stride))
    else:
        keep = {int(round(t / dt)) for t in field_times if 0 <= t <= T + 1e-12}
    v0max = np.abs(v).max()
    limit = blowup_factor * v0max if v0max > 0 else np.inf

    def Nl(vh):
        return np.fft.rfft(flow.reaction(np.fft.irfft(vh, n=flow.P, axis=0)), axis=0)

    vh = np.fft.rfft(v, axis=0)
    times, snaps, ntimes, sups, l1s = [], [], [], [], []
    h = TWO_PI / flow.N
    for step in range(nsteps + 1):
        if step % stride == 0 or step in keep:
            v = np.fft.irfft(vh, n=flow.P, axis=0)
            if not np.all(np.isfinite(v)):
                raise NonFinite(f"non-finite field at t={step * dt:.4g}")
            vmax = np.abs(v).max()
            if vmax > limit:
                raise BlowUp(f"|v| = {vmax:.3e} at t={step * dt:.4g}")
            if step % stride == 0:
                ntimes.append(step * dt)
                pw = np.sqrt(np.sum(v**2, axis=1))
                sups.append(pw.max())
                l1s.append(h * pw.sum())
            if step in keep:
                times.append(step * dt)
                snaps.append(v.copy())
        if step == nsteps:
            break
        Nv = Nl(vh)
        a = E2 * vh + Q * Nv
        Na = Nl(a)
        b = E2 * vh + Q * Na
        Nb = Nl(b)
        c = E2 * a + Q * (2 * Nb - Nv)
        Nc = Nl(c)
        vh = E * vh + f1 * Nv + 2 * f2 * (Na + Nb) + f3 * Nc
    return Trajectory(times=np.array(times), snapshots=np.array(snaps), J=J, N=flow.N, dt=dt,
                      linearized=linearized, norm_times=np.array(ntimes),
                      sup_norms=np.array(sups), l1_norms=np.array(l1s))


# -- initial data -----------------------------------------------------------------------

def domain_center(J):
    """Centre of the middle cell of the J-cell domain."""
    return TWO_PI * (J // 2)


def make_perturbation(kind, J, N, p=None, seed=0, amplitude=1e-2, width=None,
                      offset=0.5 * np.pi, direction=None, n=2):
    """Localised initial data on J cells centred in the middle cell.

    gaussian_bump: amplitude·exp(-(x-x0)²/2w²)·unit vector, x0 shifted by
    ``offset`` from the cell centre so it has a nonzero phase component.
    phase_bump: u_*(x - θ(x)) - u_*(x) with θ a Gaussian of height
    ``amplitude``. random_localized: smooth seeded noise under a Gaussian
    window, scaled to sup norm ``amplitude``.
    """
    x = fo.large_grid(J, N)
    x0 = domain_center(J) + offset
    if p is not None:
        n = p.n
    if kind == "gaussian_bump":
        w = 1.0 if width is None else width
        d = np.ones(n) if direction is None else np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return amplitude * np.exp(-0.5 * ((x - x0) / w) ** 2)[:, None] * d[None, :]
    if kind == "phase_bump":
        if p is None:
            raise ValueError("phase_bump needs the pattern")
        w = 3 * TWO_PI if width is None else width
        if np.isinf(w):
            theta = np.full_like(x, amplitude)
        else:
            theta = amplitude * np.exp(-0.5 * ((x - x0) / w) ** 2)
        c = fo.to_fourier(p.profile, p.N // 2 - 1)
        return fo.evaluate(c, x - theta).real - np.tile(p.profile, (J, 1))
    if kind == "random_localized":
        rng = np.random.default_rng(seed)
        P = J * N
        noise = rng.normal(size=(P, n))
        k = np.fft.rfftfreq(P, 1.0 / P) / J
        noise = np.fft.irfft(np.fft.rfft(noise, axis=0) * np.exp(-(k / 2.0) ** 2)[:, None],
                             n=P, axis=0)
        w = 2 * TWO_PI if width is None else width
        field_ = noise * np.exp(-0.5 * ((x - x0) / w) ** 2)[:, None]
        peak = np.abs(field_).max()
        return field_ * (amplitude / peak) if peak > 0 else field_
    raise ValueError(f"unknown perturbation kind {kind!r}")


def wrap_fraction(traj, index=-1):
    """Share of L¹ mass farther than πJ/2 from the initial centre."""
    v = traj.snapshots[index]
    x = fo.large_grid(traj.J, traj.N)
    dist = np.abs(x - domain_center(traj.J))
    pw = np.sqrt(np.sum(v**2, axis=1))
    tot = pw.sum()
    return float(pw[dist > 0.5 * np.pi * traj.J].sum() / tot) if tot > 0 else 0.0


# -- lattice coordinates ------------------------------------------------------------------

def lattice_track(ctx, traj, tol=1e-10):
    """Decompose every stored field; stops early (with a note) if Newton fails."""
    states, times = [], []
    seed = None
    note = None
    for t, v in zip(traj.times, traj.snapshots):
        try:
            s = nf.decompose(ctx, nf.chop(v, traj.J), tol=tol, seed=seed)
        except NoConvergence as exc:
            note = f"decomposition failed at t={t}: {exc}"
            break
        states.append(s)
        times.append(t)
        seed = s
    return np.array(times), states, note


def lattice_norms(states, N):
    h = TWO_PI / N
    out = {"theta_inf": [], "W_Xinf": [], "dtheta_l2": [], "theta_sum": [], "W_L1": []}
    for s in states:
        out["theta_inf"].append(np.abs(s.theta).max())
        out["W_Xinf"].append(np.abs(s.W).max())
        out["dtheta_l2"].append(np.sqrt(np.sum(nf.delta_plus(s.theta) ** 2)))
        out["theta_sum"].append(s.theta.sum())
        out["W_L1"].append(h * np.sqrt(np.sum(s.W**2, axis=2)).sum())
    return {k: np.array(v) for k, v in out.items()}


# -- fits -------------------------------------------------------------------------------------

def measure_decay(times, values, norm="v_inf", window=(50.0, 800.0), target=None,
                  tolerance=0.1):
    """Slope of log(norm) against log(1+t) on the window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = window
    if t0 < 10 or t1 <= t0:
        raise WindowError(f"bad window {window}")
    if len(times) == 0 or t0 < times.min() - 1e-9 or t1 > times.max() + 1e-9:
        raise WindowError(f"window {window} outside the series")
    sel = (times >= t0) & (times <= t1) & (values > 0)
    if sel.sum() < 3:
        raise WindowError("fewer than 3 usable samples in the window")
    slope, icpt = np.polyfit(np.log1p(times[sel]), np.log(values[sel]), 1)
    if target is None:
        target = DECAY_TARGETS.get(norm, np.nan)
    exponent = float(-slope)
    return DecayReport(norm=norm, window=(float(t0), float(t1)), exponent=exponent,
                       target=float(target), tolerance=float(tolerance),
                       passed=bool(abs(exponent - target) <= tolerance),
                       prefactor=float(np.exp(icpt)))


def lattice_heat_kernel(J, d, t, j0=0):
    """Exact periodic solution of θ̇_j = d(θ_{j+1} - 2θ_j + θ_{j-1}) from a unit mass at j0."""
    k = np.arange(J)
    sym = -4 * d * np.sin(np.pi * k / J) ** 2
    delta = np.zeros(J)
    delta[j0 % J] = 1.0
    return np.fft.ifft(np.fft.fft(delta) * np.exp(sym * t)).real


def compare_discrete_diffusion(times, thetas, window=None):
    """Least-squares d_lat in θ̇ ≈ d_lat δ²θ with centred time differences."""
    times = np.asarray(times, dtype=float)
    th = np.asarray(thetas, dtype=float)
    if window is not None:
        sel = (times >= window[0]) & (times <= window[1])
        times, th = times[sel], th[sel]
    if len(times) < 50:
        raise WindowError(f"need ≥ 50 snapshots, got {len(times)}")
    dt_f = times[2:] - times[1:-1]
    dt_b = times[1:-1] - times[:-2]
    # three-point derivative on a possibly non-uniform grid
    thdot = (th[2:] * (dt_b / (dt_f * (dt_f + dt_b)))[:, None]
             - th[:-2] * (dt_f / (dt_b * (dt_f + dt_b)))[:, None]
             + th[1:-1] * ((dt_f - dt_b) / (dt_f * dt_b))[:, None])
    mid = th[1:-1]
    lap = np.roll(mid, -1, axis=1) - 2 * mid + np.roll(mid, 1, axis=1)
    den = np.sum(lap**2)
    num_scale = max(np.sum(thdot**2), 1e-300)
    if den <= 1e-28 * max(1.0, np.sum(mid**2)):
        raise Indeterminate("δ²θ vanishes; lattice coefficient undetermined")
    d = np.sum(thdot * lap) / den
    resid = np.sqrt(np.sum((thdot - d * lap) ** 2) / num_scale)
    return float(d), float(resid)
