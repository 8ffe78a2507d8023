"""Periodic field numerics on the cell (-π, π).

Fields are plain numpy arrays of shape (N, n) sampled on ``x_m = -π + 2πm/N``.
Fourier coefficients follow the unnormalised convention

    c_ℓ = ∫_{-π}^{π} u(x) e^{-iℓx} dx,     u(x) = (1/2π) Σ_ℓ c_ℓ e^{iℓx},

and are stored as (2M+1, n) arrays with row ``ℓ + M``.
"""

from functools import lru_cache

import numpy as np

from .errors import ShapeError, TruncationError, NonFiniteInput

TWO_PI = 2.0 * np.pi


def grid(N):
    if N < 16 or N % 2:
        raise ShapeError(f"N must be even and >= 16, got {N}")
    return -np.pi + TWO_PI * np.arange(N) / N


def as_field(a):
    """Promote (N,) to (N, 1) and check finiteness."""
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError(f"expected an (N, n) field, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("field contains NaN or inf")
    return a


def modes(M):
    return np.arange(-M, M + 1)


def inner_product(a, b):
    """∫ (a(x), conj b(x)) dx by the uniform-grid rule."""
    a, b = as_field(a), as_field(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return TWO_PI / a.shape[0] * np.sum(a * np.conj(b))


def _fft_signed(a):
    # Σ_m a_m e^{-iℓ x_m} for all ℓ in FFT order; the grid starts at -π
    N = a.shape[0]
    ell = np.fft.fftfreq(N, 1.0 / N)
    return np.fft.fft(a, axis=0) * np.cos(np.pi * ell)[:, None], ell


def to_fourier(a, M):
    a = as_field(a)
    N = a.shape[0]
    if M > N // 2 - 1:
        raise TruncationError(f"M={M} too large for N={N}")
    full, _ = _fft_signed(a)
    idx = modes(M) % N
    return TWO_PI / N * full[idx]


def from_fourier(c, N, real=None):
    c = np.asarray(c)
    if c.ndim == 1:
        c = c[:, None]
    M = (c.shape[0] - 1) // 2
    if M > N // 2 - 1:
        raise TruncationError(f"M={M} too large for N={N}")
    full = np.zeros((N, c.shape[1]), dtype=complex)
    ell = modes(M)
    full[ell % N] = c * np.cos(np.pi * ell)[:, None]
    u = np.fft.ifft(full, axis=0) * N / TWO_PI
    if real is None:
        real = np.allclose(c, np.conj(c[::-1]), atol=1e-13 * (1 + np.abs(c).max()))
    return u.real if real else u


def _multiplier(a, mult):
    a = as_field(a)
    full, ell = _fft_signed(a)
    out = np.fft.ifft(full * mult(ell)[:, None] * np.cos(np.pi * ell)[:, None], axis=0)
    return out.real if np.isrealobj(a) else out


def differentiate(a, order=1):
    N = as_field(a).shape[0]

    def mult(ell):
        m = (1j * ell) ** order
        if order % 2:
            m[N // 2] = 0.0
        return m

    return _multiplier(a, mult)


def shift(a, theta):
    """Spectral translate: returns a(x - θ)."""
    N = as_field(a).shape[0]

    def mult(ell):
        m = np.exp(-1j * ell * theta)
        m[N // 2] = np.cos(N // 2 * theta)
        return m

    return _multiplier(a, mult)


def evaluate(c, x):
    """Evaluate the Fourier series with (2M+1, n) coefficients at arbitrary points."""
    c = np.asarray(c)
    M = (c.shape[0] - 1) // 2
    x = np.asarray(x, dtype=float)
    basis = np.exp(1j * np.multiply.outer(x, modes(M)))
    return basis @ c / TWO_PI


def lp_norm(a, p=2):
    a = as_field(a)
    N = a.shape[0]
    pointwise = np.sqrt(np.sum(np.abs(a) ** 2, axis=1))
    if p == 1:
        return TWO_PI / N * pointwise.sum()
    if p == 2:
        return np.sqrt(TWO_PI / N * np.sum(pointwise**2))
    if p in (np.inf, "inf"):
        return float(pointwise.max())
    raise ValueError(f"unsupported p={p}")


def diff_matrix(N, order):
    """Dense Fourier differentiation matrix on the cell grid."""
    eye = np.eye(N)
    return differentiate(eye, order)


# -- fields on J concatenated cells -------------------------------------------

def large_grid(J, N):
    """Grid of the periodic domain [-π, 2πJ - π) made of J cells."""
    return -np.pi + TWO_PI * np.arange(J * N) / N


def sinc_integral(kappa):
    """∫_{-π}^{π} e^{iκx} dx = 2 sin(κπ)/κ, with value 2π at κ = 0."""
    kappa = np.asarray(kappa, dtype=float)
    return TWO_PI * np.sinc(kappa)


@lru_cache(maxsize=8)
def _cell_kernel(J, N, M):
    """Sinc weights grouped by residue of the large-domain mode q mod J."""
    P = J * N
    q = np.fft.fftfreq(P, 1.0 / P).astype(int)
    order = np.argsort(np.mod(q, J), kind="stable")
    qs = q[order].reshape(J, N)                       # row r holds q ≡ r (mod J)
    ell = modes(M)
    S = sinc_integral(qs[:, None, :] / J - ell[None, :, None])   # (J, 2M+1, N)
    return order, S.astype(complex)


def cell_fourier(V, J, M):
    """Per-cell Fourier coefficients of a field on J cells.

    ``V`` has shape (J*N, n). The field is read as the trigonometric
    interpolant on the whole periodic domain, and each cell restriction
    v_j(x) = V(x + 2πj) is integrated exactly against e^{-iℓx}. This avoids
    the low-order error of grid quadrature on cells where v_j is not
    periodic. Returns shape (J, 2M+1, n).
    """
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    P, n = V.shape
    if P % J:
        raise ShapeError("large grid is not a whole number of cells")
    N = P // J
    L = TWO_PI * J
    q = np.fft.fftfreq(P, 1.0 / P)
    # whole-domain coefficients under the same unnormalised convention
    Vhat = np.fft.fft(V, axis=0) * np.exp(1j * np.pi * q / J)[:, None] * (L / P)
    order, S = _cell_kernel(J, N, M)
    # e^{2πiqj/J} only depends on r = q mod J, so group by residue and finish
    # with an inverse DFT over r
    G = np.matmul(S, Vhat[order].reshape(J, N, n))
    return np.fft.ifft(G, axis=0) * J / L


def cell_pairing(coeffs, b_hat):
    """Pair per-cell coefficients (J, 2M+1, n) with a periodic field's coefficients.

    Returns ⟨v_j, b⟩ = (1/2π) Σ_ℓ (v̂_{j,ℓ}, conj b̂_ℓ) for every j.
    """
    return np.einsum("jli,li->j", coeffs, np.conj(b_hat)) / TWO_PI
