import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turing_nf import fieldops as fo
from turing_nf.errors import NonFiniteInput, ShapeError, TruncationError

TWO_PI = 2 * np.pi


def band_limited(rng, N, K, n=1):
    x = fo.grid(N)
    out = np.zeros((N, n))
    for k in range(K + 1):
        out += rng.normal(size=n) * np.cos(k * x)[:, None] + rng.normal(size=n) * np.sin(k * x)[:, None]
    return out


def test_grid_and_shape_checks():
    x = fo.grid(16)
    assert x[0] == -np.pi and np.isclose(x[1] - x[0], TWO_PI / 16)
    with pytest.raises(ShapeError):
        fo.grid(15)
    with pytest.raises(ShapeError):
        fo.grid(8)
    with pytest.raises(NonFiniteInput):
        fo.as_field(np.array([1.0, np.nan]))


def test_inner_products():
    x = fo.grid(64)
    assert abs(fo.inner_product(np.sin(x), np.sin(x)) - np.pi) < 1e-12
    assert abs(fo.inner_product(np.ones(64), np.ones(64)) - TWO_PI) < 1e-12
    assert abs(fo.inner_product(np.cos(x) ** 2 + x**0, np.sin(3 * x) * np.cos(x))) < 1e-12
    with pytest.raises(ShapeError):
        fo.inner_product(np.ones(64), np.ones(32))


def test_fourier_convention():
    x = fo.grid(64)
    c = fo.to_fourier(np.cos(x), 5)
    expect = np.zeros(11)
    expect[5 - 1] = expect[5 + 1] = np.pi
    np.testing.assert_allclose(c[:, 0], expect, atol=1e-12)
    c1 = fo.to_fourier(np.ones(64), 3)
    assert abs(c1[3, 0] - TWO_PI) < 1e-12
    with pytest.raises(TruncationError):
        fo.to_fourier(np.ones(64), 32)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([32, 64, 128]))
def test_round_trip_band_limited(seed, N):
    rng = np.random.default_rng(seed)
    a = band_limited(rng, N, N // 4, n=2)
    back = fo.from_fourier(fo.to_fourier(a, N // 2 - 1), N)
    assert np.abs(back - a).max() < 1e-12 * max(1, np.abs(a).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    N = 64
    a, b = band_limited(rng, N, 12, 2), band_limited(rng, N, 12, 2)
    ah, bh = fo.to_fourier(a, 31), fo.to_fourier(b, 31)
    lhs = fo.inner_product(a, b)
    rhs = np.sum(ah * np.conj(bh)) / TWO_PI
    assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))


def test_derivatives():
    x = fo.grid(64)
    np.testing.assert_allclose(fo.differentiate(np.sin(x))[:, 0], np.cos(x), atol=1e-10)
    np.testing.assert_allclose(fo.differentiate(np.cos(3 * x), 2)[:, 0], -9 * np.cos(3 * x), atol=1e-10)
    np.testing.assert_allclose(fo.differentiate(np.full(64, 4.0), 2), 0.0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_derivative_commutes_with_round_trip(seed):
    rng = np.random.default_rng(seed)
    a = band_limited(rng, 64, 10)
    da = fo.differentiate(fo.from_fourier(fo.to_fourier(a, 31), 64))
    np.testing.assert_allclose(da, fo.differentiate(a), atol=1e-10)


def test_norms():
    x = fo.grid(256)
    assert abs(fo.lp_norm(np.sin(x), np.inf) - 1) <= (TWO_PI / 256) ** 2
    assert fo.lp_norm(np.zeros(32), 1) == 0 and fo.lp_norm(np.zeros(32), 2) == 0
    assert abs(fo.lp_norm(np.ones(32), 1) - TWO_PI) < 1e-12
    assert abs(fo.lp_norm(np.sin(x), 2) - np.sqrt(np.pi)) < 1e-12


def test_shift_and_evaluate():
    x = fo.grid(64)
    a = np.cos(2 * x) + np.sin(5 * x)
    theta = 0.37
    np.testing.assert_allclose(fo.shift(a, theta)[:, 0],
                               np.cos(2 * (x - theta)) + np.sin(5 * (x - theta)), atol=1e-12)
    pts = np.array([0.1, 1.7, -2.9])
    vals = fo.evaluate(fo.to_fourier(a, 31), pts)[:, 0]
    np.testing.assert_allclose(vals.real, np.cos(2 * pts) + np.sin(5 * pts), atol=1e-12)


def test_cell_fourier_matches_direct_quadrature():
    # a smooth field on 4 cells that is not periodic on any single cell
    J, N = 4, 64
    X = fo.large_grid(J, N)
    L = TWO_PI * J
    V = (np.cos(2 * np.pi * X / L) + 0.3 * np.sin(6 * np.pi * X / L))[:, None]
    coeffs = fo.cell_fourier(V, J, 5)
    # Gauss-Legendre oracle per cell
    xg, wg = np.polynomial.legendre.leggauss(80)
    xg, wg = np.pi * xg, np.pi * wg
    ell = fo.modes(5)
    for j in range(J):
        y = xg + TWO_PI * j
        f = np.cos(2 * np.pi * y / L) + 0.3 * np.sin(6 * np.pi * y / L)
        ref = (np.exp(-1j * np.outer(ell, xg)) * f) @ wg
        np.testing.assert_allclose(coeffs[j, :, 0], ref, atol=1e-11)
