"""Reaction-diffusion models u_t = D u_xx + f(u) with analytic Jacobians."""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import BadParameter, NonFiniteInput, UnknownModel


@dataclass(frozen=True)
class ReactionSystem:
    """A reaction-diffusion system with diagonal diffusion.

    ``f`` and ``jac`` act on arrays whose *last* axis is the species axis, so a
    field of shape (N, n) is evaluated pointwise in one call; ``jac`` then
    returns shape (N, n, n).
    """

    name: str
    n: int
    D: Tuple[float, ...]
    params: Dict[str, float]
    f: Callable = field(repr=False, compare=False)
    jac: Callable = field(repr=False, compare=False)
    equilibrium_guess: Tuple[float, ...] = ()
    wavenumber: float = 1.0

    def __post_init__(self):
        if self.n < 1 or len(self.D) != self.n:
            raise BadParameter(f"{self.name}: D must have {self.n} entries")
        if not all(d > 0 and np.isfinite(d) for d in self.D):
            raise BadParameter(f"{self.name}: diffusion coefficients must be positive")

    @property
    def Dvec(self):
        return np.asarray(self.D, dtype=float)

    def rescaled(self, k):
        """Same kinetics on the 2π cell for physical wavenumber ``k`` (D -> k^2 D)."""
        if not k > 0:
            raise BadParameter("wavenumber must be positive")
        D = tuple(float(d) * k * k for d in self.D)
        return replace(self, D=D, wavenumber=self.wavenumber * k)

    def __reduce__(self):
        # f and jac are closures; rebuild from the model name instead
        return (_rebuild, (self.name, list(self.D), dict(self.params), self.wavenumber))

    def with_params(self, **overrides):
        return builtin(self.name, D=[d / self.wavenumber**2 for d in self.D],
                       **{**self.params, **overrides}).rescaled(self.wavenumber)


def _check_finite(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("state contains NaN or inf")
    return u


def eval_f(sys, u):
    return sys.f(_check_finite(u))


def eval_jac(sys, u):
    return sys.jac(_check_finite(u))


def eval_g(sys, pattern_value, v):
    """Remainder g = f(p + v) - f(p) - f'(p) v, pointwise along the last axis."""
    p = _check_finite(pattern_value)
    v = _check_finite(v)
    lin = np.einsum("...ij,...j->...i", sys.jac(p), v)
    return sys.f(p + v) - sys.f(p) - lin


# -- builtin models ---------------------------------------------------------

def _brusselator(a, b):
    def f(u):
        x, y = u[..., 0], u[..., 1]
        x2y = x * x * y
        return np.stack([a - (b + 1.0) * x + x2y, b * x - x2y], axis=-1)

    def jac(u):
        x, y = u[..., 0], u[..., 1]
        J = np.empty(u.shape[:-1] + (2, 2))
        J[..., 0, 0] = -(b + 1.0) + 2.0 * x * y
        J[..., 0, 1] = x * x
        J[..., 1, 0] = b - 2.0 * x * y
        J[..., 1, 1] = -x * x
        return J

    return f, jac, (a, b / a)


def _schnakenberg(a, b):
    def f(u):
        x, y = u[..., 0], u[..., 1]
        x2y = x * x * y
        return np.stack([a - x + x2y, b - x2y], axis=-1)

    def jac(u):
        x, y = u[..., 0], u[..., 1]
        J = np.empty(u.shape[:-1] + (2, 2))
        J[..., 0, 0] = -1.0 + 2.0 * x * y
        J[..., 0, 1] = x * x
        J[..., 1, 0] = -2.0 * x * y
        J[..., 1, 1] = -x * x
        return J

    s = a + b
    return f, jac, (s, b / s**2)


def _gierer_meinhardt(a, b, c, eps):
    # activator-inhibitor with a regularised denominator:
    #   f1 = a - b u + u^2 / (v + eps),  f2 = u^2 - c v
    def f(u):
        x, y = u[..., 0], u[..., 1]
        return np.stack([a - b * x + x * x / (y + eps), x * x - c * y], axis=-1)

    def jac(u):
        x, y = u[..., 0], u[..., 1]
        J = np.empty(u.shape[:-1] + (2, 2))
        J[..., 0, 0] = -b + 2.0 * x / (y + eps)
        J[..., 0, 1] = -x * x / (y + eps) ** 2
        J[..., 1, 0] = 2.0 * x
        J[..., 1, 1] = -c
        return J

    # equilibrium of the eps=0 model: v = u^2/c, a - b u + c = 0
    u0 = (a + c) / b
    return f, jac, (u0, u0 * u0 / c)


_MODELS = {
    "brusselator": (_brusselator, ("a", "b"), {"a": 2.0, "b": 3.2}, (1.0, 8.0)),
    "schnakenberg": (_schnakenberg, ("a", "b"), {"a": 0.2, "b": 1.3}, (1.0, 40.0)),
    "gierer_meinhardt": (_gierer_meinhardt, ("a", "b", "c", "eps"),
                         {"a": 0.1, "b": 1.0, "c": 0.9, "eps": 1e-8}, (1.0, 40.0)),
}

MODEL_NAMES = tuple(_MODELS)


def builtin(name, D=None, **params):
    """Construct a builtin model.

    Defaults: brusselator a=2, b=3.2, D=(1, 8); schnakenberg a=0.2, b=1.3,
    D=(1, 40); gierer_meinhardt a=0.1, b=1, c=0.9, eps=1e-8, D=(1, 40).
    ``eps`` regularises the inhibitor denominator away from v = 0.
    """
    if name not in _MODELS:
        raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(_MODELS)}")
    factory, required, defaults, D_default = _MODELS[name]
    unknown = set(params) - set(required)
    if unknown:
        raise BadParameter(f"{name}: unexpected parameters {sorted(unknown)}")
    values = {**defaults, **params}
    for key in required:
        v = values.get(key)
        if v is None or not np.isfinite(float(v)):
            raise BadParameter(f"{name}: parameter {key!r} missing or not finite")
        values[key] = float(v)
    if name == "brusselator" and values["a"] <= 0:
        raise BadParameter("brusselator: a must be positive")
    if name == "schnakenberg" and values["a"] + values["b"] <= 0:
        raise BadParameter("schnakenberg: a + b must be positive")
    if name == "gierer_meinhardt" and (values["b"] <= 0 or values["c"] <= 0 or values["eps"] < 0):
        raise BadParameter("gierer_meinhardt: b, c must be positive and eps >= 0")
    D = tuple(float(d) for d in (D_default if D is None else D))
    f, jac, eq = factory(*(values[k] for k in required))
    return ReactionSystem(name=name, n=2, D=D, params=values, f=f, jac=jac,
                          equilibrium_guess=tuple(float(e) for e in eq))


def fd_jacobian(sys, u, h=1e-6):
    """Central finite-difference Jacobian at a single state ``u``."""
    u = np.asarray(u, dtype=float)
    J = np.empty((sys.n, sys.n))
    for k in range(sys.n):
        step = h * max(1.0, abs(u[k]))
        e = np.zeros(sys.n)
        e[k] = step
        J[:, k] = (sys.f(u + e) - sys.f(u - e)) / (2 * step)
    return J


def _rebuild(name, D, params, wavenumber):
    return replace(builtin(name, D=D, **params), wavenumber=wavenumber)
